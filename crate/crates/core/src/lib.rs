//! Low-rank approximation of positive semi-definite kernels by the Nyström
//! extension, with landmark subsets chosen uniformly, by squared diagonal,
//! by annealed determinantal sampling or by determinant maximization.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`linalg`] | symmetric matrices, eigendecomposition, Schur complements, log-determinants |
//! | [`kernels`] | RBF, k-NN, Markov, normalized, Laplacian, covariance and Gram kernels |
//! | [`nystrom`] | completion, approximate eigensystem, trace-norm error |
//! | [`sampling`] | landmark selection strategies and exhaustive oracles |
//! | [`embeddings`] | PCA, diffusion maps, Laplacian eigenmaps, synthetic manifolds |

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embeddings;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod nystrom;
pub mod sampling;
pub mod subset;
pub mod synthetic;

pub use error::{Error, Result};
pub use kernels::PointCloud;
pub use linalg::{KernelMatrix, Spectrum, SymmetricMatrix};
pub use sampling::RandomSeed;
pub use subset::LandmarkSubset;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
