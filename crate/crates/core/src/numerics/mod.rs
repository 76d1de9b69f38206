//! Numerical kernels used by the selectors and the evaluation harness.

pub mod eigen;
pub mod factor;
pub mod kmeans;
pub mod metrics;
pub mod varimax;

pub use eigen::{correlation_matrix, kaiser_factor_count, standardize_rows, symmetric_eigenvalues};
pub use factor::{factor_analysis, FactorConfig, FactorModel};
pub use kmeans::{kmeans, KMeansConfig, KMeansResult};
pub use metrics::{auc, cosine_similarity, mid_ranks};
pub use varimax::{varimax, varimax_criterion, Varimax};
