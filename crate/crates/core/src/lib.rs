//! Adaptive filter-bank spectral estimation.
//!
//! This crate implements the APES estimator and its generalization NAPES,
//! where each sample of the fitted sinusoid is modulated by a known complex
//! reference sequence `x_t`. Both are available for 1-D sequences and 2-D
//! arrays. The [`gapped`] module reconstructs missing samples of a 1-D
//! record by cyclic minimization over the missing samples and the
//! per-frequency filter/amplitude pairs.
//!
//! Frequencies are always in radians per sample, in `[0, 2π)`.

pub mod cli;
pub mod error;
pub mod gapped;
pub mod linalg;
pub mod snapshot;
pub mod spectral1d;
pub mod spectral2d;
pub mod testkit;

pub use error::{NapesError, Result};
pub use linalg::{CMatrix, CVector, HermitianSolveConfig, SingularPolicy, C64};
pub use snapshot::{ComplexSignal, FrequencyGrid, SnapshotPlan, SnapshotPlan2D};
pub use spectral1d::{FilterEstimate, NoiseReference, Spectrum1D};
pub use spectral2d::{FilterEstimate2D, NoiseReference2D, Spectrum2D};
