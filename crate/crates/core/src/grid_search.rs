//! Exhaustive sweep over the transfer network's layer widths.
//!
//! The second-layer width doubles as the k-means cluster count, so HR features
//! are clustered once per distinct `N2` and the result shared by every `N1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature_store::FeatureDataset;
use crate::pipeline::{cluster_and_label, transfer_and_classify, PipelineConfig};

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub n1_values: Vec<usize>,
    pub n2_values: Vec<usize>,
    /// Every other setting of each cell; its `k` and `n1` are overridden.
    pub base_config: PipelineConfig,
    pub seed: u64,
    /// Run cells concurrently. Results do not depend on it.
    pub parallel: bool,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n1_values.is_empty() || self.n2_values.is_empty() {
            return Err(Error::InvalidArgument("grid axes must be non-empty".into()));
        }
        if self.n1_values.iter().chain(&self.n2_values).any(|&w| w == 0) {
            return Err(Error::InvalidArgument("grid widths must be at least 1".into()));
        }
        Ok(())
    }

    /// The configuration a standalone run of cell `(n1, n2)` would use.
    pub fn cell_config(&self, n1: usize, n2: usize) -> PipelineConfig {
        PipelineConfig {
            n1,
            k: n2,
            seed: self.seed,
            ..self.base_config.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub n1: usize,
    pub n2: usize,
    /// mAP, or the error that stopped this cell.
    pub map: Result<f64, String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Column and row order for rendering, deduplicated.
    pub n1_values: Vec<usize>,
    pub n2_values: Vec<usize>,
    cells: BTreeMap<(usize, usize), GridCell>,
}

impl GridResult {
    pub fn from_cells(n1_values: Vec<usize>, n2_values: Vec<usize>, cells: Vec<GridCell>) -> Self {
        GridResult {
            n1_values: dedup(&n1_values),
            n2_values: dedup(&n2_values),
            cells: cells.into_iter().map(|c| ((c.n1, c.n2), c)).collect(),
        }
    }

    pub fn cell(&self, n1: usize, n2: usize) -> Option<&GridCell> {
        self.cells.get(&(n1, n2))
    }

    /// Cells ordered by `(n1, n2)`.
    pub fn cells(&self) -> impl Iterator<Item = &GridCell> {
        self.cells.values()
    }

    /// Highest mAP; ties go to the smaller `N1`, then the smaller `N2`.
    pub fn best(&self) -> Option<&GridCell> {
        let mut best: Option<&GridCell> = None;
        // Ascending (n1, n2) order, so strict `>` keeps the earliest tie.
        for cell in self.cells.values() {
            if let Ok(map) = cell.map {
                if best.is_none_or(|b| map > *b.map.as_ref().unwrap()) {
                    best = Some(cell);
                }
            }
        }
        best
    }

    /// One `n1=… n2=… map=… seconds=…` line per cell.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for cell in self.cells.values() {
            match &cell.map {
                Ok(map) => writeln!(
                    out,
                    "n1={} n2={} map={map} seconds={:.3}",
                    cell.n1, cell.n2, cell.seconds
                ),
                Err(e) => writeln!(
                    out,
                    "n1={} n2={} map=ERR seconds={:.3} error={e:?}",
                    cell.n1, cell.n2, cell.seconds
                ),
            }
            .unwrap();
        }
        out
    }
}

fn dedup(values: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Runs the full method for every `(N1, N2)` pair. A failing cell records its
/// error and the sweep carries on.
pub fn run_grid(
    spec: &GridSpec,
    hr: &FeatureDataset,
    lr_train: &FeatureDataset,
    lr_test: &FeatureDataset,
) -> Result<GridResult> {
    spec.validate()?;
    let n1_values = dedup(&spec.n1_values);
    let n2_values = dedup(&spec.n2_values);

    let mut cells = Vec::new();
    for &n2 in &n2_values {
        let start = Instant::now();
        let clustered = cluster_and_label(&spec.cell_config(n1_values[0], n2), hr, lr_train);
        let cluster_seconds = start.elapsed().as_secs_f64();
        let run_cell = |n1: usize| -> GridCell {
            let start = Instant::now();
            let map = match &clustered {
                Ok((kmeans, labelled)) => transfer_and_classify(
                    &spec.cell_config(n1, n2),
                    kmeans.clone(),
                    labelled.clone(),
                    lr_test,
                )
                .map(|run| run.report.map)
                .map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            if let Err(e) = &map {
                log::warn!("grid: cell N1={n1} N2={n2} failed: {e}");
            }
            GridCell {
                n1,
                n2,
                map,
                seconds: cluster_seconds + start.elapsed().as_secs_f64(),
            }
        };
        if spec.parallel {
            cells.extend(n1_values.par_iter().map(|&n1| run_cell(n1)).collect::<Vec<_>>());
        } else {
            cells.extend(n1_values.iter().map(|&n1| run_cell(n1)));
        }
        for cell in &cells[cells.len() - n1_values.len()..] {
            if let Ok(map) = cell.map {
                log::info!("grid: N1={} N2={} mAP={map:.4} ({:.2}s)", cell.n1, cell.n2, cell.seconds);
            }
        }
    }
    Ok(GridResult::from_cells(n1_values, n2_values, cells))
}

/// Text table with one row per `N2` and one column per `N1`; the best cell is
/// starred and failed cells read `ERR`.
pub fn render_grid(result: &GridResult) -> String {
    let best = result.best().map(|c| (c.n1, c.n2));
    let mut table = vec![std::iter::once("N2\\N1".to_string())
        .chain(result.n1_values.iter().map(|n1| n1.to_string()))
        .collect::<Vec<_>>()];
    for &n2 in &result.n2_values {
        let mut row = vec![n2.to_string()];
        for &n1 in &result.n1_values {
            let text = match result.cell(n1, n2).map(|c| &c.map) {
                Some(Ok(map)) if best == Some((n1, n2)) => format!("{map:.3}*"),
                Some(Ok(map)) => format!("{map:.3}"),
                _ => "ERR".to_string(),
            };
            row.push(text);
        }
        table.push(row);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j].len()).max().unwrap())
        .collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:>w$}"))
            .collect();
        out.push_str(&cells.join(" | "));
        out.push('\n');
    }
    out
}
