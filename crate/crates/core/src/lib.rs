//! Binary masks as truncated 2D Fourier series.
//!
//! A mask is represented implicitly: a normalized pixel coordinate is mapped
//! through cosines and sines of an integer frequency lattice, the resulting
//! features are weighted by learned or encoded coefficients, summed and passed
//! through a sigmoid. Because the representation is a continuous function of
//! the coordinate, the same coefficients can be evaluated on denser grids to
//! produce higher-resolution masks, or re-evaluated point-wise to sharpen
//! uncertain boundary pixels.
//!
//! The crate is organized around that pipeline:
//!
//! - [`lattice`]: the integer frequency lattice and its cardinality
//! - [`fourier`]: coordinate grids, the Fourier mapping, feature products,
//!   mask synthesis and their analytic gradients
//! - [`codec`]: FFT-based encoding of binary masks into coefficient vectors,
//!   band truncation, reconstruction and dataset spectrum analysis
//! - [`metrics`]: soft IoU, IoU loss and its subgradient
//! - [`siren`]: a small sine-activation MLP over Fourier features with
//!   hand-derived backprop
//! - [`fitter`]: gradient-descent fitting of coefficients (and optionally the
//!   MLP) to a target mask
//! - [`upsampler`]: sub-pixel super-resolution via coordinate sub-sampling and
//!   bilinear coefficient upsampling
//! - [`renderer`]: uncertainty-driven subdivision refinement
//! - [`maskio`]: mask file formats and deterministic dataset iteration

pub mod codec;
pub mod error;
pub mod fitter;
pub mod fourier;
pub mod lattice;
pub mod maskio;
pub mod metrics;
pub mod renderer;
pub mod siren;
pub mod upsampler;

pub use error::{Error, Result};
pub use fourier::{CoefficientField, CoordinateGrid, FieldMode, MappingMatrix, MaskRaster};
pub use lattice::FrequencyLattice;
