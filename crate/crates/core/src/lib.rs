//! Unsupervised deep feature transfer for low-resolution image classification.
//!
//! The pipeline has three stages:
//!
//! 1. Cluster high-resolution (HR) feature vectors with k-means and label every
//!    low-resolution (LR) feature with the index of its nearest HR centroid.
//! 2. Train a two-layer fully connected transfer network on the LR features
//!    against those pseudo-labels (softmax cross-entropy, SGD with momentum).
//! 3. Train one-vs-rest linear SVMs on the network's outputs and score them
//!    with per-class average precision.
//!
//! Every stage is usable on its own; [`pipeline`] strings them together and
//! [`grid_search`] sweeps the network widths.

pub mod clustering;
mod codec;
pub mod error;
pub mod evaluation;
pub mod feature_store;
pub mod grid_search;
pub mod pipeline;
pub mod pseudo_label;
pub mod rng;
pub mod svm;
pub mod transfer_net;

pub use clustering::{kmeans_assign, kmeans_fit, kmeans_objective, KMeansModel, KMeansParams};
pub use error::{Error, Result};
pub use evaluation::{average_precision, evaluate, mean_average_precision, ApMode, EvalReport};
pub use feature_store::{FeatureDataset, FileFormat, SyntheticConfig};
pub use grid_search::{render_grid, run_grid, GridResult, GridSpec};
pub use pipeline::{run_baseline, run_pipeline, Baseline, Normalize, PipelineConfig};
pub use pseudo_label::{assign_pseudo_labels, PseudoLabeling};
pub use svm::{svm_decision, svm_train_binary, svm_train_ovr, OvrSvmModel, SvmModel, SvmParams};
pub use transfer_net::{SgdHyper, TrainHistory, TransferNet};
