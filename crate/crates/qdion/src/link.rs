//! Spectral-overlap absorption model connecting the emitter spectrum to the
//! ion line, with laser-leakage correction, calibration scaling, and the
//! optical-path transmission budget.

use serde::{Deserialize, Serialize};

use crate::emitter::{emission_spectrum_with_mode, EmissionSpectrum, EmitterParams, GridSpec};
use crate::error::Error;
use crate::exec::{map_indexed, ExecMode};
use crate::ion::AbsorptionLine;
use crate::numeric::trapezoid;
use crate::Result;

/// Parameters of the absorption-probability model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModelParams {
    /// Signal-to-laser-leakage ratio at s = 1 (70 for single-laser, 20 for
    /// two-laser operation). Leakage scales linearly with intensity:
    /// n_L(s) = s · n_QD(1) / ratio.
    pub leakage_ratio_at_sat: f64,
    /// Calibration constant mapping overlap fraction to absorption
    /// probability per photon. Fixed by the monochromatic resonant
    /// benchmark: a delta line at the ion frequency absorbs with
    /// probability scale_k.
    pub scale_k: f64,
    /// Ion resonance offset ν₀ − ν_L, MHz.
    pub ion_freq_offset: f64,
}

impl Default for LinkModelParams {
    fn default() -> Self {
        LinkModelParams {
            leakage_ratio_at_sat: 70.0,
            scale_k: 0.018,
            ion_freq_offset: 0.0,
        }
    }
}

impl LinkModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.leakage_ratio_at_sat > 0.0) || !self.leakage_ratio_at_sat.is_finite() {
            return Err(Error::domain(
                "leakage_ratio_at_sat",
                "must be finite and > 0",
            ));
        }
        if !(self.scale_k > 0.0) || !self.scale_k.is_finite() {
            return Err(Error::domain("scale_k", "must be finite and > 0"));
        }
        if !self.ion_freq_offset.is_finite() {
            return Err(Error::domain("ion_freq_offset", "must be finite"));
        }
        Ok(())
    }
}

/// Photon rate spectrally overlapping the ion line: trapezoidal integral of
/// the incoherent density against the line response plus the coherent
/// weight at the laser offset, excluding the phonon-sideband portion.
pub fn overlap_photon_number(
    spec: &EmissionSpectrum,
    line: &AbsorptionLine,
    ion_freq_offset_mhz: f64,
) -> Result<f64> {
    let step = spec.grid_step();
    if step > line.fwhm_mhz / 5.0 {
        return Err(Error::Resolution(format!(
            "grid spacing {step:.3} MHz exceeds line FWHM/5 = {:.3} MHz",
            line.fwhm_mhz / 5.0
        )));
    }
    let weighted: Vec<f64> = spec
        .grid
        .iter()
        .zip(&spec.incoherent_density)
        .map(|(&nu, &d)| d * line.eval(ion_freq_offset_mhz - nu))
        .collect();
    let incoherent = trapezoid(&spec.grid, &weighted);
    let coherent = spec.coherent_weight * line.eval(ion_freq_offset_mhz);
    Ok((1.0 - spec.psb_fraction) * (incoherent + coherent))
}

/// Leakage photon rate reference: the emitter's total rate at s = 1 with
/// the other parameters unchanged, photons per μs.
fn leakage_reference_rate(params: &EmitterParams) -> Result<f64> {
    let at_sat = EmitterParams { s: 1.0, ..*params };
    at_sat.emission_rate_per_us()
}

fn p_abs_from_parts(
    spec: &EmissionSpectrum,
    line: &AbsorptionLine,
    link: &LinkModelParams,
    n_leak: f64,
    include_leakage: bool,
) -> Result<f64> {
    let n_overlap = overlap_photon_number(spec, line, link.ion_freq_offset)?;
    let n_qd = spec.total_rate;
    let n_l = if include_leakage { n_leak } else { 0.0 };
    let denom = n_qd + n_l;
    if denom <= 0.0 {
        return Err(Error::domain(
            "s",
            "zero total photon rate; absorption probability undefined",
        ));
    }
    Ok(link.scale_k * (n_overlap + n_l * line.eval(link.ion_freq_offset)) / denom)
}

/// Absorption probability per photon reaching the cavity:
/// scale_k · (n_overlap + n_L·L(ν₀−ν_L)) / (n_QD + n_L), with the
/// phonon-sideband photons counted in n_QD but never in the overlap.
pub fn p_abs_model(
    params: &EmitterParams,
    link: &LinkModelParams,
    line: &AbsorptionLine,
) -> Result<f64> {
    params.validate()?;
    link.validate()?;
    let spec = emission_spectrum_with_mode(params, &GridSpec::default(), ExecMode::Sequential)?;
    let n_leak = leakage_reference_rate(params)? / link.leakage_ratio_at_sat * params.s;
    p_abs_from_parts(&spec, line, link, n_leak, true)
}

/// One point of a detuning sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningPoint {
    pub offset_mhz: f64,
    pub p_abs: f64,
    pub p_abs_no_leakage: f64,
}

/// p_abs versus ion offset ν₀ − ν_L at fixed emitter parameters. The
/// spectrum is built once; offsets evaluate in parallel under the default
/// execution mode.
pub fn detuning_sweep(
    params: &EmitterParams,
    link: &LinkModelParams,
    line: &AbsorptionLine,
    offsets_mhz: &[f64],
) -> Result<Vec<DetuningPoint>> {
    detuning_sweep_with_mode(params, link, line, offsets_mhz, ExecMode::default())
}

pub fn detuning_sweep_with_mode(
    params: &EmitterParams,
    link: &LinkModelParams,
    line: &AbsorptionLine,
    offsets_mhz: &[f64],
    mode: ExecMode,
) -> Result<Vec<DetuningPoint>> {
    params.validate()?;
    link.validate()?;
    let spec = emission_spectrum_with_mode(params, &GridSpec::default(), ExecMode::Sequential)?;
    let n_leak = leakage_reference_rate(params)? / link.leakage_ratio_at_sat * params.s;
    let points = map_indexed(offsets_mhz.len(), mode, |i| {
        let at = LinkModelParams {
            ion_freq_offset: offsets_mhz[i],
            ..*link
        };
        let p_abs = p_abs_from_parts(&spec, line, &at, n_leak, true)?;
        let p_abs_no_leakage = p_abs_from_parts(&spec, line, &at, n_leak, false)?;
        Ok(DetuningPoint {
            offset_mhz: offsets_mhz[i],
            p_abs,
            p_abs_no_leakage,
        })
    });
    points.into_iter().collect()
}

/// One point of an intensity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityPoint {
    pub s: f64,
    pub p_abs: f64,
    pub p_abs_no_leakage: f64,
}

/// p_abs versus normalized drive intensity at fixed ion offset.
pub fn intensity_sweep(
    params: &EmitterParams,
    link: &LinkModelParams,
    line: &AbsorptionLine,
    s_values: &[f64],
) -> Result<Vec<IntensityPoint>> {
    intensity_sweep_with_mode(params, link, line, s_values, ExecMode::default())
}

pub fn intensity_sweep_with_mode(
    params: &EmitterParams,
    link: &LinkModelParams,
    line: &AbsorptionLine,
    s_values: &[f64],
    mode: ExecMode,
) -> Result<Vec<IntensityPoint>> {
    params.validate()?;
    link.validate()?;
    let n_ref = leakage_reference_rate(params)?;
    let points = map_indexed(s_values.len(), mode, |i| {
        let s = s_values[i];
        let at_s = EmitterParams { s, ..*params };
        at_s.validate()?;
        let spec = emission_spectrum_with_mode(&at_s, &GridSpec::default(), ExecMode::Sequential)?;
        let n_leak = n_ref / link.leakage_ratio_at_sat * s;
        let p_abs = p_abs_from_parts(&spec, line, link, n_leak, true)?;
        let p_abs_no_leakage = p_abs_from_parts(&spec, line, link, n_leak, false)?;
        Ok(IntensityPoint {
            s,
            p_abs,
            p_abs_no_leakage,
        })
    });
    points.into_iter().collect()
}

/// One attenuating element of the optical path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetStage {
    pub name: String,
    pub transmission: f64,
}

/// Transmission budget from the emitter sample to the ion cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub stages: Vec<BudgetStage>,
    /// Photon-extraction probability from the sample into the first lens.
    pub extraction_into_first_lens: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        let stage = |name: &str, transmission: f64| BudgetStage {
            name: name.to_string(),
            transmission,
        };
        LinkBudget {
            stages: vec![
                stage("microscope beam splitter", 0.9),
                stage("microscope beam splitter", 0.9),
                stage("linear polarizer", 0.41),
                stage("microscope fiber coupling", 0.40),
                stage("long fiber coupling", 0.70),
                stage("polarization optics", 0.90),
                stage("polarization filtering", 0.50),
                stage("beam splitter", 0.9),
                stage("beam splitter", 0.9),
                stage("fiber cavity coupling", 0.42),
            ],
            extraction_into_first_lens: 0.035,
        }
    }
}

/// Product of the path transmissions and the overall efficiency including
/// extraction: (path, overall).
pub fn budget_product(budget: &LinkBudget) -> Result<(f64, f64)> {
    if budget.stages.is_empty() {
        return Err(Error::Validation("budget stage list is empty".into()));
    }
    for s in &budget.stages {
        if !(s.transmission > 0.0 && s.transmission <= 1.0) {
            return Err(Error::Validation(format!(
                "stage '{}' transmission {} outside (0, 1]",
                s.name, s.transmission
            )));
        }
    }
    if !(budget.extraction_into_first_lens > 0.0 && budget.extraction_into_first_lens <= 1.0) {
        return Err(Error::Validation(
            "extraction_into_first_lens outside (0, 1]".into(),
        ));
    }
    let path: f64 = budget.stages.iter().map(|s| s.transmission).product();
    Ok((path, budget.extraction_into_first_lens * path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emitter::emission_spectrum;
    use crate::ion::IonCavityParams;
    use proptest::prelude::*;

    fn line() -> AbsorptionLine {
        IonCavityParams::default().line()
    }

    fn fig3a_emitter() -> EmitterParams {
        EmitterParams {
            s: 11.0,
            delta: 250.0,
            dephasing_coeff: 93.0 / 11.0,
            psb_fraction: 0.13,
            ..EmitterParams::default()
        }
    }

    fn fig3b_emitter() -> EmitterParams {
        EmitterParams {
            s: 1.0,
            delta: 0.0,
            dephasing_coeff: 9.3,
            psb_fraction: 0.13,
            ..EmitterParams::default()
        }
    }

    #[test]
    fn pure_coherent_on_resonance_passes_everything() {
        let grid: Vec<f64> = (-500..=500).map(|i| i as f64 * 0.5).collect();
        let spec = EmissionSpectrum::coherent_only(42.0, grid);
        let n = overlap_photon_number(&spec, &line(), 0.0).unwrap();
        assert!((n - 42.0).abs() < 1e-12);
    }

    #[test]
    fn far_detuned_overlap_vanishes() {
        let p = fig3b_emitter();
        let spec = emission_spectrum(&p, &GridSpec::default()).unwrap();
        let n0 = overlap_photon_number(&spec, &line(), 0.0).unwrap();
        let nfar = overlap_photon_number(&spec, &line(), 1e6).unwrap();
        assert!(nfar < 1e-6 * n0);
    }

    #[test]
    fn suppressed_leakage_far_detuned_probability_vanishes() {
        let p = fig3b_emitter();
        let link = LinkModelParams {
            leakage_ratio_at_sat: 1e12,
            ion_freq_offset: 1e6,
            ..LinkModelParams::default()
        };
        let v = p_abs_model(&p, &link, &line()).unwrap();
        assert!(v < 1e-9, "p_abs = {v}");
    }

    #[test]
    fn coarse_grid_is_a_resolution_error() {
        let grid: Vec<f64> = (-10..=10).map(|i| i as f64 * 10.0).collect();
        let spec = EmissionSpectrum::coherent_only(1.0, grid);
        assert!(matches!(
            overlap_photon_number(&spec, &line(), 0.0),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn overlap_matches_fine_grid_oracle() {
        let p = fig3a_emitter();
        let coarse = emission_spectrum(&p, &GridSpec::default()).unwrap();
        let fine = emission_spectrum(
            &p,
            &GridSpec {
                points: 40960,
                half_span_mhz: None,
            },
        )
        .unwrap();
        let omega_gen = p.generalized_rabi_mhz();
        for offset in [0.0, 30.0, -120.0, omega_gen, -omega_gen, 2.0 * omega_gen] {
            let a = overlap_photon_number(&coarse, &line(), offset).unwrap();
            let b = overlap_photon_number(&fine, &line(), offset).unwrap();
            assert!(
                (a - b).abs() / b.abs().max(1e-12) < 1e-4,
                "offset {offset}: coarse {a} vs fine {b}"
            );
        }
    }

    #[test]
    fn intensity_sweep_reproduces_low_drive_maximum() {
        let link = LinkModelParams::default();
        let s_values = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 11.0, 20.0];
        let pts = intensity_sweep(&fig3b_emitter(), &link, &line(), &s_values).unwrap();
        let max = pts
            .iter()
            .cloned()
            .max_by(|a, b| a.p_abs.partial_cmp(&b.p_abs).unwrap())
            .unwrap();
        assert_eq!(max.s, 0.1, "maximum should sit at the lowest drive");
        assert!(
            max.p_abs > 0.010 && max.p_abs < 0.015,
            "peak p_abs = {}",
            max.p_abs
        );
        let high = pts.iter().find(|p| p.s == 11.0).unwrap();
        assert!(high.p_abs / max.p_abs < 0.25);
        // solid-curve (no leakage) variant drops roughly an order of magnitude
        let high_clean = high.p_abs_no_leakage;
        let max_clean = pts
            .iter()
            .map(|p| p.p_abs_no_leakage)
            .fold(f64::MIN, f64::max);
        assert!(high_clean / max_clean < 0.15);
    }

    #[test]
    fn detuning_sweep_is_even_for_symmetric_emitter() {
        let p = EmitterParams {
            s: 11.0,
            delta: 0.0,
            dephasing_coeff: 0.0,
            psb_fraction: 0.13,
            ..EmitterParams::default()
        };
        let link = LinkModelParams::default();
        let offsets: Vec<f64> = (1..=30).map(|i| i as f64 * 25.0).collect();
        let plus = detuning_sweep(&p, &link, &line(), &offsets).unwrap();
        let neg: Vec<f64> = offsets.iter().map(|o| -o).collect();
        let minus = detuning_sweep(&p, &link, &line(), &neg).unwrap();
        for (a, b) in plus.iter().zip(&minus) {
            assert!(
                (a.p_abs - b.p_abs).abs() / a.p_abs < 1e-6,
                "asymmetry at {} MHz",
                a.offset_mhz
            );
        }
    }

    #[test]
    fn leakage_lifts_center_and_leaves_far_wings() {
        let p = fig3a_emitter();
        let link = LinkModelParams::default();
        let omega_gen = p.generalized_rabi_mhz();
        let offsets = [0.0, 50.0 * omega_gen, 60.0 * omega_gen];
        let pts = detuning_sweep(&p, &link, &line(), &offsets).unwrap();
        assert!(pts[0].p_abs > pts[0].p_abs_no_leakage);
        for pt in &pts[1..] {
            assert!(
                (pt.p_abs - pt.p_abs_no_leakage).abs() < 1e-9,
                "offset {}: {} vs {}",
                pt.offset_mhz,
                pt.p_abs,
                pt.p_abs_no_leakage
            );
        }
    }

    #[test]
    fn budget_reproduces_reference_chain() {
        let budget = LinkBudget::default();
        let (path, overall) = budget_product(&budget).unwrap();
        assert!((path - 0.0142).abs() < 0.0005, "path = {path}");
        assert!((overall - 5.0e-4).abs() < 0.3e-4, "overall = {overall}");
    }

    #[test]
    fn single_unit_stage_is_identity() {
        let budget = LinkBudget {
            stages: vec![BudgetStage {
                name: "only".into(),
                transmission: 1.0,
            }],
            extraction_into_first_lens: 1.0,
        };
        assert_eq!(budget_product(&budget).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn empty_budget_is_rejected() {
        let budget = LinkBudget {
            stages: vec![],
            extraction_into_first_lens: 0.035,
        };
        assert!(budget_product(&budget).is_err());
    }

    proptest! {
        #[test]
        fn budget_is_permutation_invariant(
            order in Just((0..10usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let budget = LinkBudget::default();
            let (want, _) = budget_product(&budget).unwrap();
            let permuted = LinkBudget {
                stages: order.iter().map(|&i| budget.stages[i].clone()).collect(),
                extraction_into_first_lens: budget.extraction_into_first_lens,
            };
            let (got, _) = budget_product(&permuted).unwrap();
            prop_assert!((got - want).abs() < 1e-12 * want);
        }

        #[test]
        fn p_abs_stays_within_scale(offset in -2000.0f64..2000.0, s in 0.05f64..20.0) {
            let p = EmitterParams { s, ..fig3b_emitter() };
            let link = LinkModelParams { ion_freq_offset: offset, ..LinkModelParams::default() };
            let v = p_abs_model(&p, &link, &line()).unwrap();
            prop_assert!(v >= 0.0 && v <= link.scale_k);
        }
    }
}
