//! Feature matrices with optional ground-truth and pseudo labels.

mod io;
mod synthetic;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

pub use io::{load_features, save_features, FileFormat};
pub use synthetic::{generate_synthetic, SyntheticConfig};

/// An `n × d` matrix of feature vectors, one row per sample.
///
/// `class_labels` is a multi-label ground-truth matrix (`n × n_classes`, entries
/// 0 or 1). `pseudo_labels` holds cluster indices; `pseudo_k` records the
/// cluster count they were assigned against.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    data: Array2<f32>,
    class_labels: Option<Array2<u8>>,
    pseudo_labels: Option<Vec<u32>>,
    pseudo_k: Option<u32>,
}

impl FeatureDataset {
    /// Wraps a data matrix, rejecting NaN and infinite entries.
    pub fn new(data: Array2<f32>) -> Result<Self> {
        let ds = FeatureDataset {
            data,
            class_labels: None,
            pseudo_labels: None,
            pseudo_k: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} columns, expected {d}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        let data = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(data)
    }

    pub fn with_class_labels(mut self, labels: Array2<u8>) -> Result<Self> {
        self.class_labels = Some(labels);
        self.validate()?;
        Ok(self)
    }

    /// Attaches pseudo-labels assigned against `k` clusters.
    pub fn with_pseudo_labels(mut self, labels: Vec<u32>, k: Option<u32>) -> Result<Self> {
        self.pseudo_labels = Some(labels);
        self.pseudo_k = k;
        self.validate()?;
        Ok(self)
    }

    pub fn without_pseudo_labels(mut self) -> Self {
        self.pseudo_labels = None;
        self.pseudo_k = None;
        self
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.as_ref().map_or(0, |l| l.ncols())
    }

    pub fn data(&self) -> ArrayView2<'_, f32> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<f32> {
        self.data
    }

    pub fn class_labels(&self) -> Option<ArrayView2<'_, u8>> {
        self.class_labels.as_ref().map(|l| l.view())
    }

    pub fn pseudo_labels(&self) -> Option<&[u32]> {
        self.pseudo_labels.as_deref()
    }

    pub fn pseudo_k(&self) -> Option<u32> {
        self.pseudo_k
    }

    /// Replaces the feature matrix while keeping every label attached.
    ///
    /// Used for normalization and for emitting transferred features, which keep
    /// the same samples in the same order.
    pub fn map_data(&self, data: Array2<f32>) -> Result<Self> {
        Error::check_dim(self.n(), data.nrows())?;
        let ds = FeatureDataset {
            data,
            class_labels: self.class_labels.clone(),
            pseudo_labels: self.pseudo_labels.clone(),
            pseudo_k: self.pseudo_k,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Scales every row to unit Euclidean norm; all-zero rows stay zero.
    pub fn l2_normalized(&self) -> Result<Self> {
        let mut data = self.data.clone();
        for mut row in data.rows_mut() {
            let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| (f64::from(v) / norm) as f32);
            }
        }
        self.map_data(data)
    }

    /// Rows at `indices`, in that order, with their labels.
    pub fn select(&self, indices: &[usize]) -> Self {
        FeatureDataset {
            data: self.data.select(Axis(0), indices),
            class_labels: self
                .class_labels
                .as_ref()
                .map(|l| l.select(Axis(0), indices)),
            pseudo_labels: self
                .pseudo_labels
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
            pseudo_k: self.pseudo_k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((idx, v)) = self.data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let d = self.d().max(1);
            return Err(Error::Validation(format!(
                "non-finite value {v} at row {}, column {}",
                idx / d,
                idx % d
            )));
        }
        if let Some(labels) = &self.class_labels {
            if labels.nrows() != self.n() {
                return Err(Error::Validation(format!(
                    "class label matrix has {} rows for {} samples",
                    labels.nrows(),
                    self.n()
                )));
            }
            if labels.iter().any(|&v| v > 1) {
                return Err(Error::Validation("class labels must be 0 or 1".into()));
            }
        }
        if let Some(pseudo) = &self.pseudo_labels {
            if pseudo.len() != self.n() {
                return Err(Error::Validation(format!(
                    "{} pseudo-labels for {} samples",
                    pseudo.len(),
                    self.n()
                )));
            }
            if let Some(k) = self.pseudo_k {
                if let Some(bad) = pseudo.iter().find(|&&l| l >= k) {
                    return Err(Error::Validation(format!(
                        "pseudo-label {bad} is out of range for k = {k}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Randomly partitions `dataset` into a training part holding
/// `round(train_fraction · n)` rows and a test part with the rest.
///
/// Both parts keep the original row order. The partition depends only on `n`
/// and `seed`, so paired HR/LR datasets split identically.
pub fn split(
    dataset: &FeatureDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(FeatureDataset, FeatureDataset)> {
    let (train, test) = split_indices(dataset.n(), train_fraction, seed)?;
    Ok((dataset.select(&train), dataset.select(&test)))
}

pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} sample(s)"
        )));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_for(seed, Stream::Split));
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ten_rows() -> FeatureDataset {
        let data = Array2::from_shape_fn((10, 2), |(i, j)| (i * 2 + j) as f32);
        FeatureDataset::new(data).unwrap()
    }

    #[test]
    fn rejects_nan() {
        let err = FeatureDataset::new(array![[1.0, f32::NAN]]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(FeatureDataset::new(array![[f32::INFINITY]]).is_err());
    }

    #[test]
    fn rejects_non_binary_labels() {
        let ds = FeatureDataset::new(array![[1.0], [2.0]]).unwrap();
        assert!(ds.with_class_labels(array![[0], [2]]).is_err());
    }

    #[test]
    fn rejects_pseudo_label_out_of_range() {
        let ds = FeatureDataset::new(array![[1.0], [2.0]]).unwrap();
        assert!(ds.clone().with_pseudo_labels(vec![0, 3], Some(3)).is_err());
        assert!(ds.with_pseudo_labels(vec![0, 2], Some(3)).is_ok());
    }

    #[test]
    fn split_sizes() {
        let (a, b) = split(&ten_rows(), 0.8, 7).unwrap();
        assert_eq!((a.n(), b.n()), (8, 2));
    }

    #[test]
    fn split_is_deterministic() {
        let ds = ten_rows();
        assert_eq!(split(&ds, 0.8, 7).unwrap(), split(&ds, 0.8, 7).unwrap());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = ten_rows();
        for f in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(split(&ds, f, 1), Err(Error::InvalidArgument(_))));
        }
        let one = FeatureDataset::new(array![[1.0]]).unwrap();
        assert!(split(&one, 0.5, 1).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let (train, test) = split_indices(37, 0.3, 11).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn l2_normalization() {
        let ds = FeatureDataset::new(array![[3.0, 4.0], [0.0, 0.0]]).unwrap();
        let n = ds.l2_normalized().unwrap();
        assert_eq!(n.data(), array![[0.6, 0.8], [0.0, 0.0]]);
    }
}
