//! Average precision, mAP and evaluation reports.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::svm::OvrSvmModel;

/// The twenty PASCAL VOC object classes, in the toolkit's order.
pub const VOC_CLASSES: [&str; 20] = [
    "aero", "bike", "bird", "boat", "bottle", "bus", "car", "cat", "chair", "cow", "table", "dog",
    "horse", "mbike", "persn", "plant", "sheep", "sofa", "train", "tv",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApMode {
    /// 11-point interpolated AP (VOC2007 toolkit).
    #[default]
    Voc11,
    /// Area under the precision envelope.
    Continuous,
}

impl fmt::Display for ApMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApMode::Voc11 => "voc11",
            ApMode::Continuous => "continuous",
        })
    }
}

impl FromStr for ApMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voc11" => Ok(ApMode::Voc11),
            "continuous" => Ok(ApMode::Continuous),
            other => Err(Error::InvalidArgument(format!("unknown AP mode {other:?}"))),
        }
    }
}

/// Average precision of `scores` against binary `labels`, in `[0, 1]`.
///
/// Samples are ranked by descending score; equal scores keep their input
/// order. Fails with [`Error::NoPositives`] when no label is set.
pub fn average_precision(scores: &[f64], labels: &[bool], mode: ApMode) -> Result<f64> {
    Error::check_dim(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // Precision and true-positive count after each rank.
    let mut precision = Vec::with_capacity(order.len());
    let mut true_pos = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        }
        true_pos.push(tp);
        precision.push(tp as f64 / (rank + 1) as f64);
    }

    match mode {
        ApMode::Continuous => {
            let mut envelope = precision;
            for r in (0..envelope.len().saturating_sub(1)).rev() {
                envelope[r] = envelope[r].max(envelope[r + 1]);
            }
            let sum: f64 = order
                .iter()
                .zip(&envelope)
                .filter(|(&i, _)| labels[i])
                .map(|(_, &p)| p)
                .sum();
            Ok(sum / n_pos as f64)
        }
        ApMode::Voc11 => {
            let sum: f64 = (0..=10usize)
                .map(|t| {
                    // recall ≥ t/10  ⇔  10·tp ≥ t·P, kept in integers.
                    precision
                        .iter()
                        .zip(&true_pos)
                        .filter(|(_, &tp)| 10 * tp >= t * n_pos)
                        .map(|(&p, _)| p)
                        .fold(0.0, f64::max)
                })
                .sum();
            Ok(sum / 11.0)
        }
    }
}

/// Arithmetic mean of per-class APs.
pub fn mean_average_precision(per_class: &[f64]) -> Result<f64> {
    if per_class.is_empty() {
        return Err(Error::InvalidArgument("mAP of zero classes".into()));
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `(class name, AP in [0, 1])` for every evaluated class.
    pub per_class_ap: Vec<(String, f64)>,
    pub map: f64,
    pub ap_mode: ApMode,
    /// Classes left out because the test labels hold no positive.
    pub skipped: Vec<String>,
    /// Configuration the run was produced with, as key/value pairs.
    pub run_config: Vec<(String, String)>,
}

/// Per-class AP of the OVR scores on `features`, and their mean.
///
/// `class_names` defaults to `c0, c1, ...`.
pub fn evaluate(
    models: &OvrSvmModel,
    features: ArrayView2<f32>,
    class_labels: ArrayView2<u8>,
    mode: ApMode,
    class_names: Option<&[String]>,
) -> Result<EvalReport> {
    let n_classes = models.n_classes();
    Error::check_dim(n_classes, class_labels.ncols())?;
    Error::check_dim(features.nrows(), class_labels.nrows())?;
    if let Some(names) = class_names {
        Error::check_dim(n_classes, names.len())?;
    }
    let name = |c: usize| class_names.map_or_else(|| format!("c{c}"), |n| n[c].clone());

    let scores = models.decision_matrix(features)?;
    let mut per_class_ap = Vec::with_capacity(n_classes);
    let mut skipped = Vec::new();
    for c in 0..n_classes {
        let labels: Vec<bool> = class_labels.column(c).iter().map(|&v| v == 1).collect();
        let column = scores.column(c).to_vec();
        match average_precision(&column, &labels, mode) {
            Ok(ap) => per_class_ap.push((name(c), ap)),
            Err(Error::NoPositives) => {
                log::warn!("evaluate: class {} has no positive test sample; skipped", name(c));
                skipped.push(name(c));
            }
            Err(e) => return Err(e),
        }
    }
    let aps: Vec<f64> = per_class_ap.iter().map(|(_, ap)| *ap).collect();
    let map = mean_average_precision(&aps)
        .map_err(|_| Error::InvalidArgument("no class has a positive test sample".into()))?;
    Ok(EvalReport {
        per_class_ap,
        map,
        ap_mode: mode,
        skipped,
        run_config: Vec::new(),
    })
}

impl EvalReport {
    pub fn with_run_config(mut self, run_config: Vec<(String, String)>) -> Self {
        self.run_config = run_config;
        self
    }

    pub fn ap(&self, class: &str) -> Option<f64> {
        self.per_class_ap
            .iter()
            .find(|(name, _)| name == class)
            .map(|(_, ap)| *ap)
    }

    /// Machine-readable `key=value` lines at full precision.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        writeln!(out, "ap_mode={}", self.ap_mode).unwrap();
        writeln!(out, "map={}", self.map).unwrap();
        for (name, ap) in &self.per_class_ap {
            writeln!(out, "ap.{name}={ap}").unwrap();
        }
        if !self.skipped.is_empty() {
            writeln!(out, "skipped={}", self.skipped.join(",")).unwrap();
        }
        for (key, value) in &self.run_config {
            writeln!(out, "config.{key}={value}").unwrap();
        }
        out
    }
}

/// Aligned table with one column per class plus mAP, values in percent with
/// one decimal. Every report must cover the same classes.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::new();
    };
    let mut header = vec![String::new()];
    header.extend(first.per_class_ap.iter().map(|(name, _)| name.clone()));
    header.push("mAP".into());

    let mut table = vec![header];
    for (label, report) in rows {
        let mut line = vec![label.to_string()];
        line.extend(report.per_class_ap.iter().map(|(_, ap)| format!("{:.1}", ap * 100.0)));
        line.push(format!("{:.1}", report.map * 100.0));
        table.push(line);
    }

    let widths: Vec<usize> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r.get(j).map_or(0, String::len)).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                if j == 0 {
                    format!("{cell:<w$}", w = widths[j])
                } else {
                    format!("{cell:>w$}", w = widths[j])
                }
            })
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
    }
    out
}
