//! Discretized generator, spectral heat kernel and bound verification.

pub mod bounds;
pub mod generator;
pub mod poincare;
pub mod spectrum;
pub mod twist;

pub use bounds::{verify_longtime, verify_offdiag, verify_ondiag, OffDiagOptions};
pub use generator::{build_generator, build_weighted_generator, DiscretizedGenerator};
pub use poincare::{poincare_gap, PoincareGap};
pub use spectrum::{spectrum, InvariantReport, InvariantTolerances, KernelSpectrum, KernelTable};
pub use twist::{davies_twist_check, TwistProfile};
