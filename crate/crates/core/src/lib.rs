//! Simulation of conditional-displacement (resonant longitudinal) qubit readout
//! alongside conventional dispersive readout.
//!
//! The crate is organised bottom-up:
//!
//! - [`sysmodel`]: physical parameters and the fourth-order Josephson couplings.
//! - [`driveframe`]: drive envelopes, the displaced frame of the driven mode and
//!   the resulting longitudinal coupling strength.
//! - [`cavitydyn`]: semiclassical coherent-state trajectories of the readout
//!   cavity for each qubit state, and depletion design.
//! - [`demod`]: homodyne demodulation, analytic and numeric SNR.
//! - [`shotsim`]: Monte Carlo single shots, histograms, fidelity and QND-ness.
//! - [`dephase`]: measurement-induced dephasing, efficiency calibration,
//!   spectator dephasing under echoes and cancellation-tone tuning.
//! - [`cli`]: JSON-configured experiments used by the `cdreadout` binary.
//!
//! All rates and frequencies are angular (rad/s) internally; times are in
//! seconds. Qubit states map to `σ_z` as `e ↔ +1`, `g ↔ −1`.

// `!(x > 0.0)` is the NaN-rejecting form used by every validator.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavitydyn;
pub mod cli;
pub mod demod;
pub mod dephase;
pub mod driveframe;
mod error;
pub mod quadrature;
mod rk4;
pub mod shotsim;
pub mod sysmodel;
pub mod table;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use cavitydyn::{ConditionalTrajectory, CouplingMode, QubitState};
pub use demod::{DemodEnvelope, EnvelopeKind, SnrCurve};
pub use driveframe::{DriveEnvelope, FrameSolution, Segment, SegmentKind};
pub use sysmodel::{DerivedCouplings, SystemParams};
