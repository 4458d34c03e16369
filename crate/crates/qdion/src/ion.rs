//! Cavity-QED quantities for the trapped-ion node, the cavity-mediated
//! absorption line, and the fluorescence readout model.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Ion–cavity parameters. Rates are the 2π·MHz numbers, e.g. the nominal
/// triple (g, κ, γ) = (1.6, 25, 2.1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonCavityParams {
    /// Ion–cavity coupling g, MHz.
    pub g: f64,
    /// Cavity field decay rate κ, MHz.
    pub kappa: f64,
    /// Atomic dipole decay rate γ, MHz.
    pub gamma_ion: f64,
    /// Natural branching probability of the intermediate state back into
    /// the dark manifold.
    pub bare_branch_to_d: f64,
    /// FWHM of the cavity-mediated absorption line, MHz.
    pub line_fwhm: f64,
}

impl Default for IonCavityParams {
    fn default() -> Self {
        IonCavityParams {
            g: 1.6,
            kappa: 25.0,
            gamma_ion: 2.1,
            bare_branch_to_d: 0.02,
            line_fwhm: 20.0,
        }
    }
}

impl IonCavityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("g", self.g),
            ("kappa", self.kappa),
            ("gamma_ion", self.gamma_ion),
            ("line_fwhm", self.line_fwhm),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::ParameterDomain {
                    field: match name {
                        "g" => "g",
                        "kappa" => "kappa",
                        "gamma_ion" => "gamma_ion",
                        _ => "line_fwhm",
                    },
                    constraint: "must be finite and > 0".into(),
                });
            }
        }
        if !(self.bare_branch_to_d > 0.0 && self.bare_branch_to_d < 1.0) {
            return Err(Error::domain("bare_branch_to_d", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn line(&self) -> AbsorptionLine {
        AbsorptionLine {
            fwhm_mhz: self.line_fwhm,
        }
    }
}

/// Single-emitter cooperativity C₀ = g²/(2κγ).
pub fn cooperativity(p: &IonCavityParams) -> Result<f64> {
    p.validate()?;
    Ok(p.g * p.g / (2.0 * p.kappa * p.gamma_ion))
}

/// Cavity-modified branching probabilities from the intermediate state:
/// the dark-manifold channel gains the Purcell term 2C₀/(2C₀+1) on top of
/// the bare probability. Returns (p_to_s, p_to_d).
pub fn branching(p: &IonCavityParams) -> Result<(f64, f64)> {
    p.validate()?;
    let c0 = cooperativity(p)?;
    let p_to_d = p.bare_branch_to_d + 2.0 * c0 / (2.0 * c0 + 1.0);
    if p_to_d >= 1.0 {
        return Err(Error::domain(
            "bare_branch_to_d",
            format!("cavity-modified branching {p_to_d:.4} reaches 1"),
        ));
    }
    Ok((1.0 - p_to_d, p_to_d))
}

/// Peak-normalized Lorentzian absorption line: L(0) = 1, L(±FWHM/2) = 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionLine {
    pub fwhm_mhz: f64,
}

impl AbsorptionLine {
    pub fn eval(&self, detuning_mhz: f64) -> f64 {
        let x = 2.0 * detuning_mhz / self.fwhm_mhz;
        1.0 / (1.0 + x * x)
    }
}

/// Dimensionless response of the ion line at a given detuning.
pub fn absorption_line(p: &IonCavityParams, detuning_mhz: f64) -> f64 {
    p.line().eval(detuning_mhz)
}

/// Internal state of the ion relevant to the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IonState {
    /// Prepared dark Zeeman level of the metastable manifold; absorbs the
    /// cavity-coupled photons.
    DDark,
    /// Electronic ground state; fluoresces during readout.
    SBright,
    /// Unprepared population elsewhere in the dark manifold; neither
    /// absorbs nor fluoresces.
    DOther,
}

/// Readout fluorescence model. The bright-state signal decays exponentially
/// because the readout transition is not cyclic; the dark signal is flat
/// background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutRates {
    /// Initial bright-state count rate, per μs.
    pub bright_rate_per_us: f64,
    /// 1/e decay time of the bright-state signal, μs.
    pub bright_decay_us: f64,
    /// Background count rate, per μs.
    pub background_per_us: f64,
}

impl Default for ReadoutRates {
    fn default() -> Self {
        // Chosen so the default 19 μs window separates bright and dark
        // means by well over ten standard deviations of the dark counts.
        ReadoutRates {
            bright_rate_per_us: 1.35,
            bright_decay_us: 8.0,
            background_per_us: 0.04,
        }
    }
}

impl ReadoutRates {
    pub fn validate(&self) -> Result<()> {
        if !(self.bright_rate_per_us >= 0.0) {
            return Err(Error::domain("bright_rate_per_us", "must be >= 0"));
        }
        if !(self.bright_decay_us > 0.0) {
            return Err(Error::domain("bright_decay_us", "must be > 0"));
        }
        if !(self.background_per_us >= 0.0) {
            return Err(Error::domain("background_per_us", "must be >= 0"));
        }
        Ok(())
    }

    /// Mean photomultiplier counts over a readout window.
    pub fn mean_counts(&self, state: IonState, window_us: f64) -> f64 {
        let bg = self.background_per_us * window_us;
        match state {
            IonState::SBright => {
                bg + self.bright_rate_per_us
                    * self.bright_decay_us
                    * (1.0 - (-window_us / self.bright_decay_us).exp())
            }
            IonState::DDark | IonState::DOther => bg,
        }
    }
}

/// Poisson-sampled photomultiplier counts for a readout window.
pub fn readout_counts<R: Rng>(
    state: IonState,
    window_us: f64,
    rates: &ReadoutRates,
    rng: &mut R,
) -> Result<u64> {
    rates.validate()?;
    if !(window_us > 0.0) {
        return Err(Error::domain("window_us", "must be > 0"));
    }
    let mean = rates.mean_counts(state, window_us);
    if mean == 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(mean).expect("validated mean > 0");
    Ok(poisson.sample(rng) as u64)
}
