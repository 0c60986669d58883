use ndarray::Axis;
use rand::seq::SliceRandom;

use super::{sgd_step, SgdHyper, TransferNet};
use crate::error::{Error, Result};
use crate::feature_store::FeatureDataset;
use crate::pseudo_label::PseudoLabeling;
use crate::rng::{rng_for, Stream};

/// Per-iteration batch loss and learning rate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

impl TrainHistory {
    pub fn iterations(&self) -> usize {
        self.losses.len()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

/// Trains a `d → n1 → pseudo.k` network on `features` against `pseudo`.
///
/// Runs exactly `hyper.total_iters` mini-batch steps. Samples are reshuffled at
/// the start of every epoch and the last batch of an epoch may be short.
pub fn train(
    features: &FeatureDataset,
    pseudo: &PseudoLabeling,
    n1: usize,
    hyper: &SgdHyper,
) -> Result<(TransferNet<f32>, TrainHistory)> {
    hyper.validate()?;
    let n = features.n();
    Error::check_dim(n, pseudo.labels.len())?;
    if n == 0 {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let mut net = TransferNet::<f32>::init(features.d(), n1, pseudo.k, hyper.seed)?;
    let mut velocity = net.zeros_like();
    let mut history = TrainHistory::default();
    let mut rng = rng_for(hyper.seed, Stream::Shuffle);
    let data = features.data();

    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    for iter in 0..hyper.total_iters {
        if cursor >= n {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + hyper.batch_size).min(n);
        let batch = &order[cursor..end];
        cursor = end;

        let x = data.select(Axis(0), batch);
        let labels: Vec<u32> = batch.iter().map(|&i| pseudo.labels[i]).collect();
        let (loss, grads) = net.loss_and_gradients(x.view(), &labels)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: iter, loss });
        }
        history.losses.push(loss);
        history.learning_rates.push(super::learning_rate(hyper, iter));
        sgd_step(&mut net, &grads, &mut velocity, hyper, iter);
        if iter % 1000 == 0 {
            log::debug!("transfer net: iter {iter}, loss {loss:.6}");
        }
    }
    if !net.is_finite() {
        return Err(Error::Divergence {
            iteration: hyper.total_iters,
            loss: f64::NAN,
        });
    }
    Ok((net, history))
}

/// Transferred features for every row of `dataset`, keeping its class labels.
pub fn transform_dataset(net: &TransferNet<f32>, dataset: &FeatureDataset) -> Result<FeatureDataset> {
    let out = net.transform(dataset.data())?;
    dataset.clone().without_pseudo_labels().map_data(out)
}
