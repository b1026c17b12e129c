//! Multi-scale sparse-representation inpainting of vessel shadows in
//! retinal-OCT-style grayscale images.
//!
//! The crate is organized around the processing stages:
//!
//! - [`raster`] / [`patch`] / [`io`] — image data model, overlapping patch
//!   grids, grayscale file I/O
//! - [`preproc`] — membrane detection, robust LOESS flattening, shadow mask
//!   construction
//! - [`sparse`] — dictionary learning (K-SVD), orthogonal matching pursuit
//!   with masked rows, strip inpainting and regularization
//! - [`pipeline`] — shadow-width routing and the full
//!   downsample/inpaint/upsample/regularize flow
//! - [`eval`] — synthetic shadows, PSNR/SSIM, baseline inpainter, and the
//!   width-sweep harness

pub mod eval;
pub mod io;
pub mod patch;
pub mod pipeline;
pub mod preproc;
pub mod raster;
pub mod sparse;

pub use patch::{aggregate_patches, extract_patches, PatchGrid};
pub use pipeline::{inpaint_image, PipelineConfig, Upsampler};
pub use raster::{Image, Rect, ShadowMask};
pub use sparse::{Dictionary, SparseCode};
