//! Two-layer fully connected feature transfer network.
//!
//! `d → N1 → N2` with a ReLU after the first layer and raw logits out of the
//! second. Trained with softmax cross-entropy against pseudo-labels; after
//! training the logits themselves are the transferred features.

mod sgd;
mod train;

use std::fmt::Debug;
use std::ops::AddAssign;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::Float;
use rand::Rng;
use rand_distr::Normal;

use crate::codec::{self, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

pub use sgd::{learning_rate, sgd_step, SgdHyper};
pub use train::{train, transform_dataset, TrainHistory};

/// Floating-point element type of a network.
///
/// Training runs in `f32`; gradient checks instantiate the same code in `f64`.
pub trait Real:
    Float + LinalgScalar + ScalarOperand + AddAssign + Debug + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn widen(self) -> f64;
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn widen(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn widen(self) -> f64 {
        self
    }
}

/// Weights and biases of both layers. The same shape also carries gradients
/// and momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferNet<T = f32> {
    /// `N1 × d`
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    /// `N2 × N1`
    pub w2: Array2<T>,
    pub b2: Array1<T>,
}

pub type Gradients<T> = TransferNet<T>;

/// Output of [`TransferNet::forward`] for a batch.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    /// `b × N1`, after the ReLU.
    pub hidden: Array2<T>,
    /// `b × N2`, no activation.
    pub logits: Array2<T>,
}

impl<T: Real> TransferNet<T> {
    /// MSRA initialization: weights drawn from `N(0, 2 / fan_in)`, zero biases.
    pub fn init(d: usize, n1: usize, n2: usize, seed: u64) -> Result<Self> {
        if d == 0 || n1 == 0 || n2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "network dimensions must be positive, got {d}→{n1}→{n2}"
            )));
        }
        let mut rng = rng_for(seed, Stream::NetInit);
        let mut he = |rows: usize, fan_in: usize| {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            Array2::from_shape_simple_fn((rows, fan_in), || T::from_f64(rng.sample(normal)))
        };
        let w1 = he(n1, d);
        let w2 = he(n2, n1);
        Ok(TransferNet {
            w1,
            b1: Array1::zeros(n1),
            w2,
            b2: Array1::zeros(n2),
        })
    }

    pub fn zeros(d: usize, n1: usize, n2: usize) -> Self {
        TransferNet {
            w1: Array2::zeros((n1, d)),
            b1: Array1::zeros(n1),
            w2: Array2::zeros((n2, n1)),
            b2: Array1::zeros(n2),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d(), self.n1(), self.n2())
    }

    pub fn d(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n1(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n2(&self) -> usize {
        self.w2.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .all(|v| v.is_finite())
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Result<Activations<T>> {
        Error::check_dim(self.d(), x.ncols())?;
        let mut hidden = x.dot(&self.w1.t());
        hidden += &self.b1;
        hidden.mapv_inplace(|v| v.max(T::zero()));
        let mut logits = hidden.dot(&self.w2.t());
        logits += &self.b2;
        Ok(Activations { hidden, logits })
    }

    /// Layer-2 outputs for every row of `x`: the transferred features.
    pub fn transform(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        Ok(self.forward(x)?.logits)
    }

    /// Mean cross-entropy of the batch and its exact gradient with respect to
    /// every parameter.
    pub fn loss_and_gradients(&self, x: ArrayView2<T>, labels: &[u32]) -> Result<(f64, Gradients<T>)> {
        let Activations { hidden, logits } = self.forward(x)?;
        let (loss, probs) = softmax_cross_entropy(logits.view(), labels)?;
        let batch = labels.len() as f64;

        // dL/dlogits = (softmax − onehot) / b
        let mut dlogits = probs;
        for (i, &label) in labels.iter().enumerate() {
            dlogits[[i, label as usize]] -= 1.0;
        }
        let dlogits = dlogits.mapv(|v| T::from_f64(v / batch));

        let w2 = dlogits.t().dot(&hidden);
        let b2 = dlogits.sum_axis(Axis(0));
        let mut dhidden = dlogits.dot(&self.w2);
        ndarray::Zip::from(&mut dhidden)
            .and(&hidden)
            .for_each(|g, &h| {
                if h <= T::zero() {
                    *g = T::zero();
                }
            });
        let w1 = dhidden.t().dot(&x);
        let b1 = dhidden.sum_axis(Axis(0));
        Ok((loss, TransferNet { w1, b1, w2, b2 }))
    }

    pub fn backward(&self, x: ArrayView2<T>, labels: &[u32]) -> Result<Gradients<T>> {
        self.loss_and_gradients(x, labels).map(|(_, g)| g)
    }

    pub fn cast<U: Real>(&self) -> TransferNet<U> {
        let c = |v: &T| U::from_f64(v.widen());
        TransferNet {
            w1: self.w1.map(c),
            b1: self.b1.map(c),
            w2: self.w2.map(c),
            b2: self.b2.map(c),
        }
    }
}

/// Mean over the batch of `−log softmax(logits)[label]`.
///
/// Evaluated in f64 with the row maximum subtracted before exponentiating.
pub fn loss_softmax_ce<T: Real>(logits: ArrayView2<T>, labels: &[u32]) -> Result<f64> {
    softmax_cross_entropy(logits, labels).map(|(loss, _)| loss)
}

/// Row-wise softmax probabilities in f64.
pub fn softmax<T: Real>(logits: ArrayView2<T>) -> Array2<f64> {
    let mut probs = logits.mapv(|v| v.widen());
    for mut row in probs.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    probs
}

fn softmax_cross_entropy<T: Real>(logits: ArrayView2<T>, labels: &[u32]) -> Result<(f64, Array2<f64>)> {
    Error::check_dim(logits.nrows(), labels.len())?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let classes = logits.ncols();
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let mut total = 0.0;
    let mut probs = Array2::zeros(logits.raw_dim());
    for ((row, mut out), &label) in logits.rows().into_iter().zip(probs.rows_mut()).zip(labels) {
        let max = row.iter().map(|v| v.widen()).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (o, v) in out.iter_mut().zip(row) {
            *o = (v.widen() - max).exp();
            sum += *o;
        }
        out.mapv_inplace(|v| v / sum);
        total += sum.ln() - (row[label as usize].widen() - max);
    }
    Ok((total / labels.len() as f64, probs))
}

const MAGIC: &[u8; 4] = b"UTNP";

impl TransferNet<f32> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut enc = Encoder::with_header(MAGIC);
        enc.u64(self.d() as u64);
        enc.u64(self.n1() as u64);
        enc.u64(self.n2() as u64);
        enc.f32s(self.w1.iter());
        enc.f32s(self.b1.iter());
        enc.f32s(self.w2.iter());
        enc.f32s(self.b2.iter());
        enc.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = codec::read_file(path)?;
        let mut dec = Decoder::open(&bytes, MAGIC, "transfer network checkpoint")?;
        let d = dec.len()?;
        let n1 = dec.len()?;
        let n2 = dec.len()?;
        let shape_err = |e: ndarray::ShapeError| Error::Format(e.to_string());
        let w1 = Array2::from_shape_vec((n1, d), dec.f32s(n1 * d)?).map_err(shape_err)?;
        let b1 = Array1::from_vec(dec.f32s(n1)?);
        let w2 = Array2::from_shape_vec((n2, n1), dec.f32s(n2 * n1)?).map_err(shape_err)?;
        let b2 = Array1::from_vec(dec.f32s(n2)?);
        dec.finish()?;
        let net = TransferNet { w1, b1, w2, b2 };
        if !net.is_finite() {
            return Err(Error::Validation("checkpoint contains NaN or infinity".into()));
        }
        Ok(net)
    }
}
