//! Shaping filters for stationary Gaussian processes with a rational power
//! spectral density.
//!
//! A transfer function `H(s)` can be turned into three equivalent
//! generators: a state-space SDE driven by white noise, a closed-form
//! impulse response used in an Itô sum, and a truncated two-dimensional
//! transfer function in a cosine basis that maps white-noise spectral
//! coefficients to output coefficients. The mean-square error of the last
//! form is computed exactly.

pub mod basis;
pub mod error;
pub mod error_analysis;
pub mod impulse;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod par;
pub mod poly;
pub mod presets;
pub mod quadrature;
pub mod simulation;
pub mod state_space;
pub mod tf;

pub use basis::{project_kernel, CosineBasis, Kernel};
pub use error::{FilterError, Result};
pub use error_analysis::{convergence_rate, error_decomposition, error_table, ErrorReport};
pub use impulse::{ModalImpulseResponse, ModalKind, ModalTerm};
pub use operators::{
    compose_rational, exact_projection, whitening_operator, Composition, Provenance, SpectralOperator,
};
pub use par::ExecutionMode;
pub use presets::Preset;
pub use simulation::{EnsembleStats, GaussianSource, Method, SampleTrajectory, SpectralSampler};
pub use state_space::{companion_realization, interpolation_realization, StateSpaceRealization};
pub use tf::{FractionTerm, PartialFractions, RationalTransferFunction};
