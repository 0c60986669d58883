//! Pseudo-labels for LR features: the index of the nearest HR centroid.

use crate::clustering::{kmeans_assign, KMeansModel};
use crate::error::Result;
use crate::feature_store::FeatureDataset;

/// Hard cluster assignments of a feature set against `k` centroids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLabeling {
    pub labels: Vec<u32>,
    pub k: usize,
    /// Samples per pseudo-class.
    pub histogram: Vec<usize>,
}

impl PseudoLabeling {
    pub fn from_labels(labels: Vec<u32>, k: usize) -> Self {
        let mut histogram = vec![0; k];
        for &l in &labels {
            histogram[l as usize] += 1;
        }
        PseudoLabeling { labels, k, histogram }
    }

    /// Reads the pseudo-labels stored in a dataset; `None` when it carries none
    /// or the cluster count was not recorded.
    pub fn from_dataset(dataset: &FeatureDataset) -> Option<Self> {
        let labels = dataset.pseudo_labels()?.to_vec();
        let k = dataset.pseudo_k()? as usize;
        Some(Self::from_labels(labels, k))
    }

    /// Number of pseudo-classes with no sample.
    pub fn empty_classes(&self) -> usize {
        self.histogram.iter().filter(|&&c| c == 0).count()
    }

    /// Copy of `dataset` carrying these labels (and `k`).
    pub fn attach(&self, dataset: &FeatureDataset) -> Result<FeatureDataset> {
        dataset
            .clone()
            .with_pseudo_labels(self.labels.clone(), Some(self.k as u32))
    }
}

pub fn assign_pseudo_labels(model: &KMeansModel, lr: &FeatureDataset) -> Result<PseudoLabeling> {
    let labels = kmeans_assign(model, lr.data())?;
    let labeling = PseudoLabeling::from_labels(labels, model.k());
    log::debug!(
        "pseudo-labels: {} samples over {} classes ({} empty)",
        labeling.labels.len(),
        labeling.k,
        labeling.empty_classes()
    );
    Ok(labeling)
}
