//! Steady-state observables of the noisy one-atom micromaser.
//!
//! The stationary photon distribution, atom excitation and joint
//! probabilities, effective-potential saddles, thermal-maser critical lines,
//! revival analytics and the spectral correlation length, for a cavity whose
//! pump parameter or detuning fluctuates.

pub mod csvfmt;
pub mod error;
pub mod kernel;
pub mod model;
pub mod observables;
pub mod phase;
pub mod potential;
pub mod quad;
pub mod spectrum;
pub mod steady_state;
pub mod tridiag;

pub use error::{MaserError, Result};
pub use kernel::{KernelMode, PumpKernel};
pub use model::{MaserParams, NMax, NoiseKind, NoiseSpec, NumericControls, ValidatedConfig};
pub use observables::{p_joint, p_joint_all, p_plus, p_plus_resummed, ResumMode, Sign};
pub use phase::{critical_line_detuning, critical_line_pump, transition_order, Regime};
pub use potential::{asymptotic_min, find_saddles, v0, v0_second, SaddleReport};
pub use spectrum::{build_generator, correlation_length, spectral_gap, CorrelationResult};
pub use steady_state::{stationary_distribution, PhotonDistribution};
