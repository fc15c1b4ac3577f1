//! Coherent interaction of a free electron with an ensemble of identical
//! two-level emitters: couplings, Dicke-ladder scattering, energy-loss
//! spectra, phase-matched excitation, superradiant dynamics and population
//! reconstruction.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`.

pub mod coupling;
pub mod dynamics;
pub mod eels;
pub mod error;
pub mod excitation;
pub mod joint;
pub mod ladder;
mod linalg;
pub mod real;
pub mod reconstruct;
pub mod scattering;
pub mod special;
pub mod units;

pub use error::{Error, Result};

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use real::Real;

pub type ElectronParams = coupling::ElectronParams<f64>;
pub type EmitterEnsemble = coupling::EmitterEnsemble<f64>;
pub type CouplingSet = coupling::CouplingSet<f64>;
pub type LadderState = ladder::LadderState<f64>;
pub type ProductState = ladder::ProductState<f64>;
pub type ScatteringKernel = scattering::ScatteringKernel<f64>;
pub type JointState = joint::JointState<f64>;
pub type EelsSpectrum = eels::EelsSpectrum<f64>;
pub type ElectronComb = eels::ElectronComb<f64>;
pub type ExcitationPulse = excitation::ExcitationPulse<f64>;
pub type SweepResult = excitation::SweepResult<f64>;
pub type DickeTrajectory = dynamics::DickeTrajectory<f64>;
pub type TwaEnsemble = dynamics::TwaEnsemble<f64>;
pub type ReconstructionReport = reconstruct::ReconstructionReport<f64>;

pub type Complex64 = num_complex::Complex<f64>;
