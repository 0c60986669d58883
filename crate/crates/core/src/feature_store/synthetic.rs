//! Paired HR/LR feature generator for desk-scale experiments.
//!
//! HR features are isotropic unit-variance Gaussian clusters whose centres sit
//! on mutually orthogonal directions, `hr_separation` apart. The LR view of a
//! sample is its HR vector pushed through a fixed random orthogonal projection
//! onto an `lr_rank`-dimensional subspace, plus Gaussian noise.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::FeatureDataset;
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_clusters: usize,
    pub n_per_cluster: usize,
    pub d: usize,
    /// Distance between cluster centres, in within-cluster standard deviations.
    pub hr_separation: f64,
    pub lr_noise_sigma: f64,
    pub lr_rank: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_clusters: 5,
            n_per_cluster: 200,
            d: 64,
            hr_separation: 8.0,
            lr_noise_sigma: 2.0,
            lr_rank: 16,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.n_per_cluster == 0 || self.d == 0 || self.lr_rank == 0 {
            return Err(Error::InvalidArgument(
                "synthetic counts must all be at least 1".into(),
            ));
        }
        if self.lr_rank > self.d {
            return Err(Error::InvalidArgument(format!(
                "lr_rank {} exceeds dimension {}",
                self.lr_rank, self.d
            )));
        }
        if !(self.lr_noise_sigma >= 0.0 && self.lr_noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument("lr_noise_sigma must be >= 0".into()));
        }
        if !(self.hr_separation >= 0.0 && self.hr_separation.is_finite()) {
            return Err(Error::InvalidArgument("hr_separation must be >= 0".into()));
        }
        Ok(())
    }
}

/// Returns `(hr, lr)` with paired rows and identical one-hot class labels.
///
/// With `lr_rank == d` the projection is the identity, so `lr_noise_sigma = 0`
/// reproduces the HR data exactly.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(FeatureDataset, FeatureDataset)> {
    config.validate()?;
    let mut rng = rng_for(config.seed, Stream::Synthetic);
    let d = config.d;
    let n = config.n_clusters * config.n_per_cluster;

    let radius = config.hr_separation / std::f64::consts::SQRT_2;
    let centres: Vec<Vec<f64>> = if config.n_clusters <= d {
        orthonormal_rows(config.n_clusters, d, &mut rng)
    } else {
        (0..config.n_clusters)
            .map(|_| unit(gaussian(d, &mut rng)))
            .collect()
    };

    let mut hr = Array2::<f64>::zeros((n, d));
    let mut labels = Array2::<u8>::zeros((n, config.n_clusters));
    for (c, centre) in centres.iter().enumerate() {
        for s in 0..config.n_per_cluster {
            let i = c * config.n_per_cluster + s;
            labels[[i, c]] = 1;
            for j in 0..d {
                hr[[i, j]] = radius * centre[j] + rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    let lr = if config.lr_rank == d {
        hr.clone()
    } else {
        let basis = Array2::from_shape_vec(
            (config.lr_rank, d),
            orthonormal_rows(config.lr_rank, d, &mut rng).concat(),
        )
        .expect("basis shape");
        hr.dot(&basis.t()).dot(&basis)
    };
    let mut lr = lr;
    if config.lr_noise_sigma > 0.0 {
        for v in lr.iter_mut() {
            *v += config.lr_noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let hr = FeatureDataset::new(hr.mapv(|v| v as f32))?.with_class_labels(labels.clone())?;
    let lr = FeatureDataset::new(lr.mapv(|v| v as f32))?.with_class_labels(labels)?;
    Ok((hr, lr))
}

fn gaussian(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// `count` orthonormal vectors in `d` dimensions (modified Gram-Schmidt).
fn orthonormal_rows(count: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = gaussian(d, rng);
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // Redraw the rare near-dependent candidate.
        if norm > 1e-6 {
            basis.push(unit(v));
        }
    }
    basis
}
