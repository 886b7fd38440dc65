//! Long-tailed link prediction toolkit.
//!
//! A minimal GCN link predictor is pretrained on the training graph, then the
//! edge set is expanded with candidate edges that the pretrained model scores
//! confidently and consistently across its last five epochs. Training resumes
//! on the expanded graph with a cross-entropy loss mixed with a class-center
//! pull on pair representations. Evaluation splits test pairs into head (at
//! least one common neighbor) and tail (none) groups.
//!
//! Module map:
//!
//! - [`graph`]: immutable CSR graph with neighbor, degree and common-neighbor queries
//! - [`dataset`]: edge-list/feature loading, 85/5/10 splits, synthetic generators,
//!   downsampling and the binary checkpoint container
//! - [`encoder`]: normalized adjacency, GCN forward/backward, pair decoder, Adam
//! - [`trainer`]: losses, pretraining with snapshot memory, continued training
//! - [`sem`]: candidate generation, snapshot scoring, score/variance filtering, augmentation
//! - [`eval`]: AUC, Hits@K, head/tail accuracy and bias, bucket and CN-distribution reports

pub mod dataset;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod seed;
pub mod sem;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{Graph, NodePair};
