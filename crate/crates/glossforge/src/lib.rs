//! Gloss, color and topography pipeline for painting appearance
//! reproduction.
//!
//! The crate models a scanner that samples specular reflection at
//! Brewster's angle through a rotating polarizer, and everything needed to
//! turn those captures into print-ready data:
//!
//! * [`optics`] — Fresnel reflectances, Brewster's angle, polarization
//!   residuals;
//! * [`geometry`] — per-pixel mirror angles and lamp-camera path lengths of
//!   the capture rig;
//! * [`extraction`] — polarized-pair differencing, off-center correction,
//!   flat-field color correction, normalization;
//! * [`masking`] — surface-normal and cast-shadow masks, local-max infill;
//! * [`stitching`] — registration, height alignment and blending of
//!   overlapping tiles into a mosaic;
//! * [`fabrication`] — gloss response curve fitting/inversion, layer-stack
//!   slicing and transparent-ink dithering;
//! * [`simulator`] — a forward renderer that stands in for the physical
//!   scanner and supplies ground truth;
//! * [`evaluation`] — rotation-consistency statistics;
//! * [`pipeline`] — stage orchestration and on-disk layout;
//! * [`io`] — PNG and float-raster file formats.
//!
//! See the crate examples for one runnable program per capability.

pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod fabrication;
pub mod geometry;
pub mod io;
pub mod masking;
pub mod optics;
pub mod pipeline;
pub mod raster;
pub mod simulator;
pub mod stitching;

pub use error::{GlossError, Result};
