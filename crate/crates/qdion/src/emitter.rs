//! Driven two-level emitter: steady state of the optical Bloch equations
//! with pure dephasing, emission spectrum, intensity correlation, and
//! radiative decay.
//!
//! Parameters are stored as ordinary-frequency MHz. The drive is specified
//! through the normalized intensity `s = I / I_sat`, where I_sat is defined
//! by the steady-state excited population reaching exactly 1/4 at `s = 1`
//! on resonance without extra dephasing; this fixes the Rabi frequency as
//! Ω² = s Γ² / 2.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numeric::{solve3, Mat3, C64};
use crate::Result;

mod correlation;
mod spectrum;

pub use correlation::g2;
pub use spectrum::{emission_spectrum, emission_spectrum_with_mode, EmissionSpectrum, GridSpec};

/// Driven two-level transition of the quantum dot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// Radiative decay rate Γ in MHz (multiplied by 2π where angular rates
    /// enter equations of motion).
    pub gamma_rad: f64,
    /// Normalized drive intensity s = I / I_sat, ≥ 0.
    pub s: f64,
    /// Laser–emitter detuning δ = ν_QD − ν_L in MHz.
    pub delta: f64,
    /// Pure-dephasing slope in MHz per unit s: γ_d = s × dephasing_coeff.
    pub dephasing_coeff: f64,
    /// RMS Gaussian spectral wandering of the transition frequency, MHz.
    /// Zero disables the inhomogeneous average.
    pub wandering_sigma: f64,
    /// Fraction of the emission carried by the phonon sideband, [0, 1).
    /// Those photons never overlap the ion line; no spectral shape is kept.
    pub psb_fraction: f64,
}

impl Default for EmitterParams {
    fn default() -> Self {
        EmitterParams {
            gamma_rad: 250.0,
            s: 1.0,
            delta: 0.0,
            dephasing_coeff: 9.3,
            wandering_sigma: 0.0,
            psb_fraction: 0.13,
        }
    }
}

impl EmitterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_rad > 0.0) || !self.gamma_rad.is_finite() {
            return Err(Error::domain("gamma_rad", "must be finite and > 0"));
        }
        if !(self.s >= 0.0) || !self.s.is_finite() {
            return Err(Error::domain("s", "must be finite and >= 0"));
        }
        if !self.delta.is_finite() {
            return Err(Error::domain("delta", "must be finite"));
        }
        if !(self.dephasing_coeff >= 0.0) {
            return Err(Error::domain("dephasing_coeff", "must be >= 0"));
        }
        if !(self.wandering_sigma >= 0.0) {
            return Err(Error::domain("wandering_sigma", "must be >= 0"));
        }
        if !(self.psb_fraction >= 0.0 && self.psb_fraction < 1.0) {
            return Err(Error::domain("psb_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Rabi frequency in MHz: Ω = Γ √(s/2).
    pub fn rabi_mhz(&self) -> f64 {
        self.gamma_rad * (self.s / 2.0).sqrt()
    }

    /// Pure-dephasing rate γ_d = s × dephasing_coeff, MHz.
    pub fn dephasing_mhz(&self) -> f64 {
        self.s * self.dephasing_coeff
    }

    /// Total coherence decay γ₂ = Γ/2 + γ_d, MHz.
    pub fn gamma2_mhz(&self) -> f64 {
        self.gamma_rad / 2.0 + self.dephasing_mhz()
    }

    /// Generalized Rabi frequency √(Ω² + δ²), MHz. Mollow sidebands sit at
    /// ν − ν_L = ±Ω_gen.
    pub fn generalized_rabi_mhz(&self) -> f64 {
        self.rabi_mhz().hypot(self.delta)
    }

    /// Total photon emission rate Γ·ρ_ee in photons per μs.
    pub fn emission_rate_per_us(&self) -> Result<f64> {
        let ss = steady_state(self)?;
        Ok(TAU * self.gamma_rad * ss.rho_ee)
    }
}

/// Stationary solution of the optical Bloch equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSteadyState {
    /// Excited-state population ρ_ee.
    pub rho_ee: f64,
    /// Stationary optical coherence ⟨σ⁻⟩ = ρ_eg in the frame rotating at
    /// the laser frequency.
    pub coherence: Complex64,
}

/// Optical Bloch generator for the vector (x_eg, x_ge, x_ee) in angular
/// units (rad/μs): ẋ = A·x + tr(x)·drive. The same generator propagates the
/// density matrix (trace 1) and, via the quantum regression theorem, the
/// two-time correlation vectors (complex trace).
pub(crate) struct BlochGenerator {
    pub a: Mat3,
    pub drive: [C64; 3],
}

impl BlochGenerator {
    /// `delta_mhz` is passed separately from the params so inhomogeneous
    /// averages can reuse one builder.
    pub fn new(params: &EmitterParams, delta_mhz: f64) -> Self {
        let gamma = TAU * params.gamma_rad;
        let gamma2 = TAU * (params.gamma_rad / 2.0 + params.dephasing_mhz());
        let delta = TAU * delta_mhz;
        let omega = TAU * params.rabi_mhz();
        let i = C64::new(0.0, 1.0);
        let z = C64::new(0.0, 0.0);
        let a = Mat3([
            [-C64::new(gamma2, delta), z, i * omega],
            [z, -C64::new(gamma2, -delta), -i * omega],
            [i * omega / 2.0, -i * omega / 2.0, C64::new(-gamma, 0.0)],
        ]);
        let drive = [-i * omega / 2.0, i * omega / 2.0, z];
        BlochGenerator { a, drive }
    }

    /// Stationary vector for unit trace: solves A·x = −drive.
    pub fn steady_vector(&self) -> [C64; 3] {
        if self.drive[0].norm() == 0.0 {
            // no drive: ground state
            return [C64::new(0.0, 0.0); 3];
        }
        let rhs = [-self.drive[0], -self.drive[1], -self.drive[2]];
        solve3(&self.a, &rhs)
    }
}

/// Stationary solution of the two-level optical Bloch equations for a single
/// detuning realization (spectral wandering is ignored here).
///
/// Closed form: with γ₂ = Γ/2 + γ_d, δ = ν_QD − ν_L, Ω = Γ √(s/2),
///
/// ρ_ee = (Ω²/2) γ₂ / (Γ(γ₂² + δ²) + Ω² γ₂),
/// ⟨σ⁻⟩ = (Ω/2)(2ρ_ee − 1)(δ + iγ₂) / (γ₂² + δ²).
///
/// Both expressions are homogeneous of degree zero in the rates, so the
/// 2π factors cancel and the MHz values are used as stored.
pub fn steady_state(params: &EmitterParams) -> Result<BlochSteadyState> {
    params.validate()?;
    let gamma = params.gamma_rad;
    let gamma2 = params.gamma2_mhz();
    let delta = params.delta;
    let omega_sq = params.gamma_rad * params.gamma_rad * params.s / 2.0;
    let lorentz = gamma2 * gamma2 + delta * delta;
    let rho_ee = if params.s == 0.0 {
        0.0
    } else {
        0.5 * omega_sq * gamma2 / (gamma * lorentz + omega_sq * gamma2)
    };
    let coherence = if params.s == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        let omega = omega_sq.sqrt();
        Complex64::new(delta, gamma2) * (omega / 2.0) * (2.0 * rho_ee - 1.0) / lorentz
    };
    Ok(BlochSteadyState { rho_ee, coherence })
}

/// Fraction of the emission that is coherently (elastically) scattered:
/// Γ|⟨σ⁻⟩|² / (Γ ρ_ee). At `s = 0` the emission rate vanishes and the value
/// is defined as the s → 0 limit, which is exactly 1 (the dephasing rate
/// scales with s, so weak excitation scatters fully coherently).
pub fn coherent_fraction(params: &EmitterParams) -> Result<f64> {
    params.validate()?;
    if params.s == 0.0 {
        return Ok(1.0);
    }
    let ss = steady_state(params)?;
    Ok(ss.coherence.norm_sqr() / ss.rho_ee)
}

/// Excited-population decay after pulsed excitation with the drive off:
/// ρ_ee(t) = ρ_ee(0) · exp(−2π Γ t). Times in ns.
pub fn lifetime_trace(params: &EmitterParams, rho_ee0: f64, t_ns: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    if !(0.0..=1.0).contains(&rho_ee0) {
        return Err(Error::domain("rho_ee0", "must lie in [0, 1]"));
    }
    // 2π Γ in 1/ns: Γ is MHz = 1/μs cycles, so the angular rate is
    // 2π Γ × 1e-3 per ns.
    let rate = TAU * params.gamma_rad * 1e-3;
    Ok(t_ns.iter().map(|&t| rho_ee0 * (-rate * t).exp()).collect())
}

/// 1/e lifetime T₁ = 1/(2π Γ) in ns.
pub fn lifetime_t1_ns(params: &EmitterParams) -> f64 {
    1e3 / (TAU * params.gamma_rad)
}
