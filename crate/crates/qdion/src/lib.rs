//! Simulator of a photonic link between a resonantly driven quantum-dot
//! single-photon source and a cavity-coupled trapped ion.
//!
//! The crate models the chain from emitter to detector:
//!
//! - [`emitter`] — steady state, emission spectrum, intensity correlation and
//!   lifetime of a driven two-level transition with pure dephasing, spectral
//!   wandering and a phonon-sideband fraction.
//! - [`ion`] — cavity-QED figures of merit for the ion node, the
//!   cavity-mediated absorption line, and the fluorescence readout model.
//! - [`link`] — the spectral-overlap absorption model connecting the emitter
//!   spectrum to the ion line, laser-leakage correction, and the optical-path
//!   transmission budget.
//! - [`protocol`] — Monte Carlo simulation of the pump/probe/readout
//!   sequences with the photon-counting estimators, plus the spin-mixture
//!   preparation model.
//! - [`scenario`] — scenario files, bundled presets, and sweep execution with
//!   CSV/JSON output.
//!
//! All linewidths and detunings are stored as ordinary-frequency MHz; the
//! factor 2π is applied exactly where angular rates enter equations of
//! motion. Times are microseconds unless a field name says otherwise.
//!
//! Monte Carlo runs derive one RNG stream per trial from the scenario seed,
//! so results are reproducible bit-for-bit and independent of whether trials
//! execute sequentially or on a thread pool (the `parallel` feature,
//! enabled by default, fans trials out with rayon).

// validation guards use `!(v > 0.0)`-style comparisons so NaN is rejected
// together with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod emitter;
pub mod error;
pub mod exec;
pub mod ion;
pub mod link;
pub mod numeric;
pub mod output;
pub mod protocol;
pub mod scenario;

pub use emitter::{BlochSteadyState, EmissionSpectrum, EmitterParams, GridSpec};
pub use error::Error;
pub use exec::ExecMode;
pub use ion::{AbsorptionLine, IonCavityParams, IonState, ReadoutRates};
pub use link::{LinkBudget, LinkModelParams};
pub use protocol::{SequenceConfig, SpinPrepConfig, TrialOutcome};
pub use scenario::Scenario;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
