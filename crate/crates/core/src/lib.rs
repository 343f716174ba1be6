//! Wavelet-corrected style transfer for grayscale images with depth-dependent
//! appearance shift.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`] and [`io`]: dense `(c, h, w)` tensors, channel statistics, PNG/PGM I/O.
//! - [`wavelet`]: orthonormal Haar pooling and its exact inverse.
//! - [`network`]: the encoder–decoder that routes low frequencies through the
//!   trunk and skips detail bands to the decoder.
//! - [`transfer`]: AdaIN, depth-windowed AdaIN, WCT and the whole-image entry point.
//! - [`styleselect`]: uniform LBP histograms, correlation retrieval and final
//!   mean/std selection over a style library.
//! - [`metrics`]: SSIM, PSNR and mask overlap/boundary metrics.
//! - [`tgcsim`]: synthetic phantoms and time-gain-compensation perturbations.
//! - [`pipeline`]: selection followed by transfer, as used by the CLI.

pub mod error;
pub mod io;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod styleselect;
pub mod tensor;
pub mod tgcsim;
pub mod transfer;
pub mod wavelet;

pub use error::{Error, Result};
pub use tensor::{ChannelStats, Tensor};
