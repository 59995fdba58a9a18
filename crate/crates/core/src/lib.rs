//! Triplet-based dimensionality reduction.
//!
//! The pipeline embeds `n` points from `R^m` into a low-dimensional space by
//! sampling triplets `(i, j, k)` that say "`i` is closer to `j` than to `k`",
//! weighting them by how strongly the original data agrees, and minimizing a
//! heavy-tailed triplet loss with full-batch gradient descent.
//!
//! Stages, in pipeline order:
//!
//! * [`linalg`]: centering, PCA (pre-reduction and initialization) and the
//!   least-squares inverse map behind the reconstruction error.
//! * [`knn`]: random-projection forest for approximate k-NN, with an exact
//!   brute-force scan as reference.
//! * [`triplets`]: per-point scales, triplet sampling and log-transformed weights.
//! * [`optimizer`]: triplet loss, analytic gradient, delta-bar-delta descent.
//! * [`metrics`]: minimum reconstruction error, global score and 1-NN accuracy.
//! * [`pipeline`]: runs everything above and reports per-stage timings.
//!
//! [`data`] handles file formats and synthetic datasets; [`plot`] renders
//! 2-D embeddings as SVG.
//!
//! ```no_run
//! use trimap::{data, pipeline, RunConfig};
//!
//! let (x, labels) = data::make_s_curve(5000, 0);
//! let result = pipeline::run_pipeline(&RunConfig::default(), x, Some(labels))?;
//! println!("global score {:.3}", result.metrics.global_score);
//! # Ok::<(), trimap::TrimapError>(())
//! ```

pub mod config;
pub mod data;
mod error;
pub mod knn;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod pipeline;
pub mod plot;
pub mod triplets;

pub use config::RunConfig;
pub use data::{DataMatrix, Labels};
pub use error::{Result, TrimapError};
pub use knn::NeighborTable;
pub use linalg::{Embedding, PcaModel};
pub use metrics::MetricsReport;
pub use pipeline::{run_pipeline, PipelineResult};
pub use triplets::TripletSet;
