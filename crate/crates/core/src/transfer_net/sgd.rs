//! Mini-batch SGD with momentum, weight decay and a step learning-rate schedule.

use ndarray::{ArrayBase, DataMut, Dimension, Zip};

use super::{Gradients, Real, TransferNet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SgdHyper {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Iterations between learning-rate decays.
    pub step_size: usize,
    /// Multiplicative decay applied every `step_size` iterations.
    pub gamma: f64,
    pub total_iters: usize,
    /// Drives both weight initialization and per-epoch shuffling.
    pub seed: u64,
}

impl Default for SgdHyper {
    fn default() -> Self {
        SgdHyper {
            lr0: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            batch_size: 1000,
            step_size: 15_000,
            gamma: 0.1,
            total_iters: 31_561,
            seed: 0,
        }
    }
}

impl SgdHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("SGD: {what}")));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("lr0 must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be >= 0");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.step_size == 0 {
            return bad("step_size must be >= 1");
        }
        Ok(())
    }
}

/// `lr0 · gamma^⌊iter / step_size⌋`
pub fn learning_rate(hyper: &SgdHyper, iter: usize) -> f64 {
    hyper.lr0 * hyper.gamma.powi((iter / hyper.step_size.max(1)) as i32)
}

/// One momentum step at iteration `iter`:
///
/// ```text
/// v ← momentum·v − lr·(grad + weight_decay·param)
/// param ← param + v
/// ```
///
/// Weight decay applies to weights and biases alike.
pub fn sgd_step<T: Real>(
    params: &mut TransferNet<T>,
    grads: &Gradients<T>,
    velocity: &mut TransferNet<T>,
    hyper: &SgdHyper,
    iter: usize,
) {
    let lr = T::from_f64(learning_rate(hyper, iter));
    let momentum = T::from_f64(hyper.momentum);
    let decay = T::from_f64(hyper.weight_decay);
    update(&mut params.w1, &grads.w1, &mut velocity.w1, lr, momentum, decay);
    update(&mut params.b1, &grads.b1, &mut velocity.b1, lr, momentum, decay);
    update(&mut params.w2, &grads.w2, &mut velocity.w2, lr, momentum, decay);
    update(&mut params.b2, &grads.b2, &mut velocity.b2, lr, momentum, decay);
}

fn update<T, S, D>(
    param: &mut ArrayBase<S, D>,
    grad: &ArrayBase<S, D>,
    velocity: &mut ArrayBase<S, D>,
    lr: T,
    momentum: T,
    decay: T,
) where
    T: Real,
    S: DataMut<Elem = T>,
    D: Dimension,
{
    Zip::from(param)
        .and(grad)
        .and(velocity)
        .for_each(|p, &g, v| {
            *v = momentum * *v - lr * (g + decay * *p);
            *p += *v;
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn net(v: f64) -> TransferNet<f64> {
        TransferNet {
            w1: array![[v, -v]],
            b1: array![v],
            w2: array![[2.0 * v]],
            b2: array![-v],
        }
    }

    #[test]
    fn plain_gradient_step() {
        let hyper = SgdHyper {
            lr0: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut params = net(1.0);
        let grads = net(0.5);
        let mut velocity = params.zeros_like();
        sgd_step(&mut params, &grads, &mut velocity, &hyper, 0);
        assert_eq!(params.w1, array![[1.0 - 0.05, -1.0 + 0.05]]);
        assert_eq!(params.b2, array![-1.0 + 0.05]);
    }

    #[test]
    fn pure_decay_step() {
        let hyper = SgdHyper::default();
        let mut params = net(3.0);
        let grads = params.zeros_like();
        let mut velocity = params.zeros_like();
        sgd_step(&mut params, &grads, &mut velocity, &hyper, 0);
        let factor = 1.0 - 5e-6;
        let want = net(3.0);
        for (got, want) in params.w1.iter().chain(&params.b1).zip(want.w1.iter().chain(&want.b1)) {
            assert!((got - want * factor).abs() < 1e-15);
        }
    }

    #[test]
    fn momentum_accumulates() {
        let hyper = SgdHyper {
            lr0: 1.0,
            momentum: 0.5,
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut params = net(0.0);
        let grads = net(1.0);
        let mut velocity = params.zeros_like();
        sgd_step(&mut params, &grads, &mut velocity, &hyper, 0);
        sgd_step(&mut params, &grads, &mut velocity, &hyper, 1);
        // v₁ = −1, v₂ = −0.5 − 1
        assert_eq!(params.b1, array![-2.5]);
    }

    #[test]
    fn step_schedule() {
        let hyper = SgdHyper::default();
        assert_eq!(learning_rate(&hyper, 0), 0.01);
        assert_eq!(learning_rate(&hyper, 14_999), 0.01);
        assert!((learning_rate(&hyper, 15_000) - 0.001).abs() < 1e-15);
        assert!((learning_rate(&hyper, 30_000) - 0.0001).abs() < 1e-15);
    }

    #[test]
    fn defaults() {
        let h = SgdHyper::default();
        assert_eq!(
            (h.lr0, h.momentum, h.weight_decay, h.batch_size, h.step_size, h.gamma),
            (0.01, 0.9, 0.0005, 1000, 15_000, 0.1)
        );
        assert!(h.validate().is_ok());
    }

    #[test]
    fn validation() {
        let base = SgdHyper::default();
        for bad in [
            SgdHyper { lr0: 0.0, ..base.clone() },
            SgdHyper { momentum: 1.0, ..base.clone() },
            SgdHyper { weight_decay: -1.0, ..base.clone() },
            SgdHyper { gamma: 0.0, ..base.clone() },
            SgdHyper { gamma: 1.5, ..base.clone() },
            SgdHyper { batch_size: 0, ..base.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
