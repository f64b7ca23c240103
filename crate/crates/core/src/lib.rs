//! Depth-image denoising with group-wise low-rank and learned graph priors.
//!
//! The pipeline works on groups of similar patches. Each group is a matrix
//! whose rows are vectorized patches; the denoiser learns one graph over the
//! rows (patches) and one over the columns (pixel positions), then solves
//!
//! ```text
//! min_X  θn·‖X‖*  +  ½‖X − T‖²  +  θr·tr(XᵀLr X)  +  θc·tr(X Lc Xᵀ)
//! ```
//!
//! with ADMM. Denoised groups are averaged back into the image and the whole
//! procedure is repeated under an outer iterative-regularization loop.
//!
//! Modules, bottom-up:
//!
//! - [`image_io`]: grayscale PGM/PNG I/O and seeded Gaussian noise
//! - [`metrics`]: PSNR and SSIM
//! - [`linalg`]: Jacobi SVD and symmetric eigendecomposition
//! - [`patch`]: patch grid, block matching, aggregation
//! - [`graph`]: kernel graphs and learned Laplacians
//! - [`admm`]: the per-group solver
//! - [`pipeline`]: outer loop and reporting
//! - [`cli`]: the `denoise`, `bench` and `inspect-laplacian` commands

pub mod admm;
pub mod cli;
pub mod error;
pub mod graph;
pub mod image_io;
pub mod linalg;
pub mod metrics;
pub mod patch;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
pub use image_io::{add_awgn, load_image, save_image, Image, NoiseSpec};
pub use metrics::{psnr, ssim, QualityScore};
pub use pipeline::{denoise, DenoiseReport, ParamSchedule};

/// Dense real matrix used throughout the crate.
pub type Matrix = ndarray::Array2<f64>;
