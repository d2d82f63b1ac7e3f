//! Offline EEG decoding toolkit.
//!
//! Covers the classical tactile/motor BCI analysis chain: Butterworth IIR
//! filtering, epoch extraction, common spatial patterns, shrinkage LDA,
//! repeated stratified cross-validation, ERSP time-frequency maps and
//! band-power topographies. A seeded synthetic generator with known ground
//! truth backs the test suite end to end.
//!
//! Math kernels are generic over the scalar type (see [`scalar::Scalar`]);
//! the pipeline itself runs in `f64` (the [`Real`] alias below).

pub mod clf;
pub mod dsp;
pub mod ersp;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod linalg;
pub mod montage;
pub mod scalar;
pub mod synth;
pub mod types;

pub use error::{Error, Result};

/// Working scalar type of the pipeline. Samples are widened to 64-bit on
/// load regardless of on-disk precision; downstream eigendecompositions are
/// sensitive to accumulation error.
pub type Real = f64;

/// Concrete aliases over the generic kernels.
pub type IirFilter = dsp::IirFilter<Real>;
pub type CspModel = features::CspModel<Real>;
pub type LdaModel = clf::LdaModel<Real>;
pub type ErspMap = ersp::ErspMap<Real>;
