//! Linear SVM trained by dual coordinate descent, plus one-vs-rest wrapping.
//!
//! Solves the L1-loss (hinge) problem
//!
//! ```text
//! min_w ½‖w̃‖² + C Σᵢ max(0, 1 − yᵢ w̃·x̃ᵢ)
//! ```
//!
//! where `x̃ = (x, 1)` so the bias is the last, regularized, weight. The dual is
//! `min_α ½ αᵀQα − Σα` over the box `0 ≤ α ≤ C` with `Qᵢⱼ = yᵢyⱼ x̃ᵢ·x̃ⱼ`; each
//! coordinate update is solved in closed form and `w̃ = Σ αᵢyᵢx̃ᵢ` is kept in
//! sync.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

const MAGIC: &[u8; 4] = b"USVM";

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the largest projected-gradient magnitude in an epoch drops below this.
    pub tol: f64,
    /// Epoch budget.
    pub max_iter: usize,
    /// Seeds the per-epoch coordinate order.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-3,
            max_iter: 1000,
            seed: 0,
        }
    }
}

/// A linear decision function `x·w + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub w: Vec<f32>,
    pub b: f32,
    /// Training diagnostics; absent on models read back from disk.
    pub info: Option<FitInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitInfo {
    pub c: f64,
    /// Dual variables sitting at the upper bound `C`.
    pub n_sv_bounded: usize,
    /// Set when the labels held a single class and the model is a constant.
    pub degenerate: bool,
    pub epochs: usize,
    pub max_violation: f64,
    pub converged: bool,
}

impl SvmModel {
    pub fn p(&self) -> usize {
        self.w.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.info.as_ref().is_some_and(|i| i.degenerate)
    }
}

/// Full solver output, including the dual point.
#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub model: SvmModel,
    pub alpha: Vec<f64>,
    /// Weights in f64, before rounding into the model.
    pub w: Vec<f64>,
    pub b: f64,
}

pub fn svm_train_binary(x: ArrayView2<f32>, y: &[i8], params: &SvmParams) -> Result<SvmModel> {
    svm_fit_binary(x, y, params).map(|fit| fit.model)
}

pub fn svm_fit_binary(x: ArrayView2<f32>, y: &[i8], params: &SvmParams) -> Result<BinaryFit> {
    let (n, p) = x.dim();
    Error::check_dim(n, y.len())?;
    if n == 0 {
        return Err(Error::InvalidArgument("SVM needs at least one sample".into()));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C must be > 0, got {}", params.c)));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::InvalidArgument(format!("SVM labels must be ±1, got {bad}")));
    }

    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        let sign = f64::from(y[0]);
        return Ok(BinaryFit {
            model: SvmModel {
                w: vec![0.0; p],
                b: sign as f32,
                info: Some(FitInfo {
                    c: params.c,
                    n_sv_bounded: 0,
                    degenerate: true,
                    epochs: 0,
                    max_violation: 0.0,
                    converged: true,
                }),
            },
            alpha: vec![0.0; n],
            w: vec![0.0; p],
            b: sign,
        });
    }

    let c = params.c;
    let rows: Vec<Vec<f64>> = x
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| f64::from(v)).chain([1.0]).collect())
        .collect();
    let q_diag: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let ys: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; p + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(params.seed, Stream::Svm);
    let mut epochs = 0;
    let mut max_violation = f64::INFINITY;

    while epochs < params.max_iter {
        epochs += 1;
        order.shuffle(&mut rng);
        max_violation = 0.0f64;
        for &i in &order {
            let xi = &rows[i];
            let g = ys[i] * dot(&w, xi) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * ys[i];
                w.iter_mut().zip(xi).for_each(|(wj, &xj)| *wj += step * xj);
            }
        }
        if max_violation < params.tol {
            break;
        }
    }
    let converged = max_violation < params.tol;
    if !converged {
        log::warn!(
            "SVM stopped after {epochs} epochs with violation {max_violation:.3e} (tol {})",
            params.tol
        );
    }

    let b = w.pop().expect("augmented weight");
    let model = SvmModel {
        w: w.iter().map(|&v| v as f32).collect(),
        b: b as f32,
        info: Some(FitInfo {
            c,
            n_sv_bounded: alpha.iter().filter(|&&a| a >= c).count(),
            degenerate: false,
            epochs,
            max_violation,
            converged,
        }),
    };
    Ok(BinaryFit { model, alpha, w, b })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// `½(‖w‖² + b²) + C Σ max(0, 1 − y(w·x + b))`
pub fn primal_objective(x: ArrayView2<f32>, y: &[i8], w: &[f64], b: f64, c: f64) -> f64 {
    let reg = 0.5 * (dot(w, w) + b * b);
    let hinge: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &yi)| {
            let score: f64 = row.iter().zip(w).map(|(&v, wj)| f64::from(v) * wj).sum::<f64>() + b;
            (1.0 - f64::from(yi) * score).max(0.0)
        })
        .sum();
    reg + c * hinge
}

/// `Σα − ½‖Σ αᵢyᵢx̃ᵢ‖²` (to be maximized).
pub fn dual_objective(x: ArrayView2<f32>, y: &[i8], alpha: &[f64]) -> f64 {
    let p = x.ncols();
    let mut w = vec![0.0; p + 1];
    for ((row, &yi), &a) in x.rows().into_iter().zip(y).zip(alpha) {
        let s = a * f64::from(yi);
        for (wj, &v) in w.iter_mut().zip(row) {
            *wj += s * f64::from(v);
        }
        w[p] += s;
    }
    alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w)
}

/// `x·w + b` for every row, in f64.
pub fn svm_decision(model: &SvmModel, x: ArrayView2<f32>) -> Result<Vec<f64>> {
    Error::check_dim(model.p(), x.ncols())?;
    let b = f64::from(model.b);
    Ok(x.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&model.w)
                .map(|(&v, &wj)| f64::from(v) * f64::from(wj))
                .sum::<f64>()
                + b
        })
        .collect())
}

/// One binary SVM per class.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrSvmModel {
    pub models: Vec<SvmModel>,
    p: usize,
}

impl OvrSvmModel {
    pub fn new(models: Vec<SvmModel>, p: usize) -> Result<Self> {
        for m in &models {
            Error::check_dim(p, m.p())?;
        }
        Ok(OvrSvmModel { models, p })
    }

    pub fn n_classes(&self) -> usize {
        self.models.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Classes whose training labels held a single value.
    pub fn degenerate_classes(&self) -> Vec<usize> {
        (0..self.n_classes())
            .filter(|&c| self.models[c].is_degenerate())
            .collect()
    }

    /// `m × n_classes` decision scores.
    pub fn decision_matrix(&self, x: ArrayView2<f32>) -> Result<Array2<f64>> {
        Error::check_dim(self.p, x.ncols())?;
        let mut out = Array2::zeros((x.nrows(), self.n_classes()));
        for (c, model) in self.models.iter().enumerate() {
            let scores = svm_decision(model, x)?;
            out.column_mut(c).iter_mut().zip(scores).for_each(|(o, s)| *o = s);
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut enc = Encoder::with_header(MAGIC);
        enc.u32(self.n_classes() as u32);
        enc.u64(self.p as u64);
        for m in &self.models {
            enc.f32s(&m.w);
            enc.f32(m.b);
        }
        enc.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = codec::read_file(path)?;
        let mut dec = Decoder::open(&bytes, MAGIC, "SVM model")?;
        let n_classes = dec.u32()? as usize;
        let p = dec.len()?;
        let mut models = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let w = dec.f32s(p)?;
            let b = dec.f32()?;
            if w.iter().chain([&b]).any(|v| !v.is_finite()) {
                return Err(Error::Validation("SVM weights contain NaN or infinity".into()));
            }
            models.push(SvmModel { w, b, info: None });
        }
        dec.finish()?;
        Self::new(models, p)
    }
}

/// Trains class `c` as positives (`class_labels[:, c] == 1`) against the rest.
///
/// Classes are independent and train in parallel.
pub fn svm_train_ovr(
    x: ArrayView2<f32>,
    class_labels: ArrayView2<u8>,
    params: &SvmParams,
) -> Result<OvrSvmModel> {
    Error::check_dim(x.nrows(), class_labels.nrows())?;
    let models = (0..class_labels.ncols())
        .into_par_iter()
        .map(|c| {
            let y: Vec<i8> = class_labels
                .column(c)
                .iter()
                .map(|&v| if v == 1 { 1 } else { -1 })
                .collect();
            svm_train_binary(x, &y, params)
        })
        .collect::<Result<Vec<_>>>()?;
    let ovr = OvrSvmModel::new(models, x.ncols())?;
    for c in ovr.degenerate_classes() {
        log::warn!("SVM: class {c} has a single label value; using a constant scorer");
    }
    Ok(ovr)
}
