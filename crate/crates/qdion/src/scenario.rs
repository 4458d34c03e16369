//! Scenario files, bundled presets, and sweep execution.
//!
//! A scenario is a TOML document that fully determines one run: emitter,
//! ion, link, sequence and (optionally) spin-preparation parameters, the
//! engine to dispatch to, the sweep axis, and the RNG seed. Unknown keys
//! are rejected in strict mode and reported as warnings in lenient mode.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emitter::{emission_spectrum, EmitterParams, GridSpec};
use crate::error::Error;
use crate::ion::IonCavityParams;
use crate::link::{
    budget_product, detuning_sweep, intensity_sweep, p_abs_model, LinkBudget, LinkModelParams,
};
use crate::output::{ResultMetadata, RunArtifacts, SweepResult};
use crate::protocol::{run_fig2_sweep, run_fig4_sweep, SequenceConfig, SpinPrepConfig};
use crate::Result;

/// Which reproduction a scenario drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Transfer probability vs probe duration with a saturation fit.
    TransferSaturation,
    /// Absorption probability vs ion–laser frequency offset.
    DetuningSweep,
    /// Absorption probability vs drive intensity.
    IntensitySweep,
    /// Normalized ion transfer vs prepared spin population.
    SpinCorrelation,
    /// Emission spectrum dump.
    Spectrum,
    /// Optical-path transmission report.
    Budget,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::TransferSaturation => "transfer-saturation",
            Engine::DetuningSweep => "detuning-sweep",
            Engine::IntensitySweep => "intensity-sweep",
            Engine::SpinCorrelation => "spin-correlation",
            Engine::Spectrum => "spectrum",
            Engine::Budget => "budget",
        }
    }

    fn sweep_axis(&self) -> Option<&'static str> {
        match self {
            Engine::TransferSaturation => Some("t_interact_us"),
            Engine::DetuningSweep => Some("ion_freq_offset_mhz"),
            Engine::IntensitySweep => Some("s"),
            Engine::SpinCorrelation => Some("pump_pulse_len_ns"),
            Engine::Spectrum | Engine::Budget => None,
        }
    }
}

/// Sweep axis specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: String,
    pub values: Vec<f64>,
}

fn default_seed() -> u64 {
    1
}

/// Fully specified run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub engine: Engine,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Resolve `sequence.p_abs` from the link model before running.
    #[serde(default)]
    pub p_abs_from_link: bool,
    #[serde(default)]
    pub emitter: EmitterParams,
    #[serde(default)]
    pub ion: IonCavityParams,
    #[serde(default)]
    pub link: LinkModelParams,
    #[serde(default)]
    pub sequence: SequenceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<SpinPrepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<LinkBudget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl Scenario {
    /// Check every invariant the engines rely on; names the violation.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Validation("scenario name is empty".into()));
        }
        self.emitter.validate()?;
        self.ion.validate()?;
        self.link.validate()?;
        self.sequence.validate()?;
        if let Some(spin) = &self.spin {
            spin.validate()?;
        }
        match self.engine.sweep_axis() {
            Some(axis) => {
                let sweep = self.sweep.as_ref().ok_or_else(|| {
                    Error::Validation(format!(
                        "engine {} needs a [sweep] section over {axis}",
                        self.engine.as_str()
                    ))
                })?;
                if sweep.variable != axis {
                    return Err(Error::Validation(format!(
                        "engine {} sweeps {axis}, not {}",
                        self.engine.as_str(),
                        sweep.variable
                    )));
                }
                if sweep.values.is_empty() {
                    return Err(Error::Validation("sweep values are empty".into()));
                }
                if sweep.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation("sweep values must be finite".into()));
                }
                if sweep.values.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Validation(
                        "sweep values must be strictly increasing".into(),
                    ));
                }
            }
            None => {
                if self.sweep.is_some() {
                    return Err(Error::Validation(format!(
                        "engine {} takes no [sweep] section",
                        self.engine.as_str()
                    )));
                }
            }
        }
        if self.engine == Engine::SpinCorrelation && self.spin.is_none() {
            return Err(Error::Validation(
                "spin-correlation engine needs a [spin] section".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// schema walk for unknown keys

enum Key {
    Leaf(&'static str),
    Table(&'static str, &'static [Key]),
    ArrayOfTables(&'static str, &'static [Key]),
}

const READOUT_KEYS: &[Key] = &[
    Key::Leaf("bright_rate_per_us"),
    Key::Leaf("bright_decay_us"),
    Key::Leaf("background_per_us"),
];

const SCHEMA: &[Key] = &[
    Key::Leaf("name"),
    Key::Leaf("engine"),
    Key::Leaf("seed"),
    Key::Leaf("description"),
    Key::Leaf("p_abs_from_link"),
    Key::Table(
        "emitter",
        &[
            Key::Leaf("gamma_rad"),
            Key::Leaf("s"),
            Key::Leaf("delta"),
            Key::Leaf("dephasing_coeff"),
            Key::Leaf("wandering_sigma"),
            Key::Leaf("psb_fraction"),
        ],
    ),
    Key::Table(
        "ion",
        &[
            Key::Leaf("g"),
            Key::Leaf("kappa"),
            Key::Leaf("gamma_ion"),
            Key::Leaf("bare_branch_to_d"),
            Key::Leaf("line_fwhm"),
        ],
    ),
    Key::Table(
        "link",
        &[
            Key::Leaf("leakage_ratio_at_sat"),
            Key::Leaf("scale_k"),
            Key::Leaf("ion_freq_offset"),
        ],
    ),
    Key::Table(
        "sequence",
        &[
            Key::Leaf("t_init_us"),
            Key::Leaf("prep_efficiency"),
            Key::Leaf("t_interact_us"),
            Key::Leaf("gamma_qd_per_s"),
            Key::Leaf("p_abs"),
            Key::Leaf("branch_to_s"),
            Key::Leaf("t_readout_window_us"),
            Key::Leaf("t_cool_us"),
            Key::Leaf("n_reps"),
            Key::Leaf("ideal_calibration"),
            Key::Leaf("d_state_lifetime_us"),
            Key::Table("readout", READOUT_KEYS),
        ],
    ),
    Key::Table(
        "spin",
        &[
            Key::Leaf("pump_pulse_len_ns"),
            Key::Leaf("probe_pulse_len_ns"),
            Key::Leaf("fidelity_up"),
            Key::Leaf("fidelity_down"),
            Key::Leaf("pump_time_constant_ns"),
            Key::Leaf("rep_rate_khz"),
            Key::Leaf("t_interact_us"),
            Key::Leaf("zeeman_split_ghz"),
        ],
    ),
    Key::Table(
        "budget",
        &[
            Key::Leaf("extraction_into_first_lens"),
            Key::ArrayOfTables("stages", &[Key::Leaf("name"), Key::Leaf("transmission")]),
        ],
    ),
    Key::Table(
        "spectrum_grid",
        &[Key::Leaf("points"), Key::Leaf("half_span_mhz")],
    ),
    Key::Table("sweep", &[Key::Leaf("variable"), Key::Leaf("values")]),
];

fn walk_keys(table: &toml::Table, schema: &[Key], path: &str, unknown: &mut Vec<String>) {
    for (key, value) in table {
        let full = if path.is_empty() {
            key.clone()
        } else {
            format!("{path}.{key}")
        };
        let entry = schema.iter().find(|k| match k {
            Key::Leaf(n) | Key::Table(n, _) | Key::ArrayOfTables(n, _) => n == key,
        });
        match entry {
            None => unknown.push(full),
            Some(Key::Leaf(_)) => {}
            Some(Key::Table(_, sub)) => {
                if let Some(t) = value.as_table() {
                    walk_keys(t, sub, &full, unknown);
                }
            }
            Some(Key::ArrayOfTables(_, sub)) => {
                if let Some(arr) = value.as_array() {
                    for (i, item) in arr.iter().enumerate() {
                        if let Some(t) = item.as_table() {
                            walk_keys(t, sub, &format!("{full}[{i}]"), unknown);
                        }
                    }
                }
            }
        }
    }
}

/// Parse a scenario from TOML text. Strict mode rejects unknown keys;
/// lenient mode returns them as warnings.
pub fn parse_scenario(text: &str, source: &str, strict: bool) -> Result<(Scenario, Vec<String>)> {
    let value: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
        path: source.to_string(),
        detail: e.to_string(),
    })?;
    let mut unknown = Vec::new();
    walk_keys(&value, SCHEMA, "", &mut unknown);
    if strict && !unknown.is_empty() {
        return Err(Error::Parse {
            path: source.to_string(),
            detail: format!("unknown keys: {}", unknown.join(", ")),
        });
    }
    let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
        path: source.to_string(),
        detail: e.to_string(),
    })?;
    scenario.validate()?;
    let warnings = unknown
        .into_iter()
        .map(|k| format!("ignoring unknown key '{k}'"))
        .collect();
    Ok((scenario, warnings))
}

/// Load and validate a scenario file, rejecting unknown keys.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    parse_scenario(&text, &path.display().to_string(), true).map(|(s, _)| s)
}

/// Load and validate a scenario file, reporting unknown keys as warnings.
pub fn load_scenario_lenient(path: &Path) -> Result<(Scenario, Vec<String>)> {
    let text = fs::read_to_string(path)?;
    parse_scenario(&text, &path.display().to_string(), false)
}

/// Serialize a scenario back to TOML.
pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    let text = toml::to_string_pretty(scenario)
        .map_err(|e| Error::Validation(format!("toml serialization: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// bundled presets

const PRESETS: &[(&str, &str)] = &[
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("fig3a", include_str!("../presets/fig3a.toml")),
    ("fig3b", include_str!("../presets/fig3b.toml")),
    ("fig4b", include_str!("../presets/fig4b.toml")),
    ("mollow_s11", include_str!("../presets/mollow_s11.toml")),
    ("budget", include_str!("../presets/budget.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// One-line description of each bundled preset, for `presets list`.
pub fn preset_summaries() -> Vec<(String, String)> {
    PRESETS
        .iter()
        .map(|(name, text)| {
            let s = parse_scenario(text, name, true)
                .expect("bundled presets parse")
                .0;
            (name.to_string(), s.description.unwrap_or_default())
        })
        .collect()
}

/// A bundled preset by name.
pub fn preset(name: &str) -> Result<Scenario> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            Error::Validation(format!(
                "unknown preset '{name}'; available: {}",
                preset_names().join(", ")
            ))
        })?;
    parse_scenario(text, name, true).map(|(s, _)| s)
}

// ---------------------------------------------------------------------------
// run dispatch

/// Execute a scenario and write `<name>.csv` and `<name>.json` (and
/// `<name>.svg` when requested) into `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path, svg: bool) -> Result<RunArtifacts> {
    scenario.validate()?;
    fs::create_dir_all(out_dir)?;

    // resolve the per-photon absorption probability if requested
    let mut resolved = scenario.clone();
    if resolved.p_abs_from_link {
        let p = p_abs_model(&resolved.emitter, &resolved.link, &resolved.ion.line())?;
        resolved.sequence.p_abs = p;
    }

    let (result, headline) = build_result(&resolved)?;
    result.validate()?;

    let csv = out_dir.join(format!("{}.csv", resolved.name));
    let json = out_dir.join(format!("{}.json", resolved.name));
    result.write_csv(&csv)?;
    result.write_json(&resolved, &json)?;
    let svg_path = if svg {
        let p = out_dir.join(format!("{}.svg", resolved.name));
        crate::output::write_svg(&result, &p)?;
        Some(p)
    } else {
        None
    };
    Ok(RunArtifacts {
        csv,
        json,
        svg: svg_path,
        headline,
    })
}

/// Build the in-memory result table for a validated scenario.
pub fn build_result(sc: &Scenario) -> Result<(SweepResult, String)> {
    let mut meta = ResultMetadata::new(sc.seed);
    if sc.p_abs_from_link {
        meta.notes.push(format!(
            "p_abs resolved from link model: {}",
            sc.sequence.p_abs
        ));
    }
    match sc.engine {
        Engine::TransferSaturation => {
            let sweep = sc.sweep.as_ref().expect("validated");
            let run = run_fig2_sweep(&sc.sequence, &sweep.values, sc.seed)?;
            meta.n_reps = Some(sc.sequence.n_reps);
            meta.calibration = Some(run.calibration);
            meta.fit = run.fit;
            meta.notes.push(
                "n_bar is the analytic mean photon number; photons_mean is the drawn mean".into(),
            );
            let rows = run
                .points
                .iter()
                .map(|p| {
                    vec![
                        p.t_interact_us,
                        p.n_bar,
                        p.estimate.photons_mean,
                        p.estimate.p_transfer,
                        p.estimate.p_transfer_se,
                        p.p_abs_est,
                        p.p_abs_est_se,
                        crate::protocol::expected_transfer(
                            &SequenceConfig {
                                t_interact_us: p.t_interact_us,
                                ..sc.sequence
                            },
                            p.n_bar,
                        ),
                    ]
                })
                .collect();
            let headline = match run.fit {
                Some(f) => format!(
                    "saturation fit: tau = {:.1} us ({:.3} ms), amplitude = {:.4}; n_bar(tau) = {:.1} photons",
                    f.tau_us,
                    f.tau_us * 1e-3,
                    f.amplitude,
                    sc.sequence.gamma_qd_per_s * f.tau_us * 1e-6
                ),
                None => "saturation fit did not converge; raw points written".into(),
            };
            Ok((
                SweepResult {
                    scenario_name: sc.name.clone(),
                    engine: sc.engine.as_str().into(),
                    columns: vec![
                        "t_interact_us".into(),
                        "n_bar".into(),
                        "photons_mean".into(),
                        "p_transfer".into(),
                        "p_transfer_se".into(),
                        "p_abs_est".into(),
                        "p_abs_est_se".into(),
                        "model_p_transfer".into(),
                    ],
                    rows,
                    metadata: meta,
                },
                headline,
            ))
        }
        Engine::DetuningSweep => {
            let sweep = sc.sweep.as_ref().expect("validated");
            let pts = detuning_sweep(&sc.emitter, &sc.link, &sc.ion.line(), &sweep.values)?;
            let grid = GridSpec::default();
            meta.grid_points = Some(grid.points);
            meta.scale_k = Some(sc.link.scale_k);
            let rows = pts
                .iter()
                .map(|p| vec![p.offset_mhz, p.p_abs, 0.0, p.p_abs_no_leakage])
                .collect();
            let peak = pts
                .iter()
                .cloned()
                .max_by(|a, b| a.p_abs.partial_cmp(&b.p_abs).unwrap())
                .expect("non-empty");
            let headline = format!(
                "detuning sweep peak p_abs = {:.4}% at {:.1} MHz",
                peak.p_abs * 100.0,
                peak.offset_mhz
            );
            Ok((
                SweepResult {
                    scenario_name: sc.name.clone(),
                    engine: sc.engine.as_str().into(),
                    columns: vec![
                        "ion_freq_offset_mhz".into(),
                        "p_abs".into(),
                        "p_abs_se".into(),
                        "p_abs_no_leakage".into(),
                    ],
                    rows,
                    metadata: meta,
                },
                headline,
            ))
        }
        Engine::IntensitySweep => {
            let sweep = sc.sweep.as_ref().expect("validated");
            let pts = intensity_sweep(&sc.emitter, &sc.link, &sc.ion.line(), &sweep.values)?;
            meta.scale_k = Some(sc.link.scale_k);
            let rows = pts
                .iter()
                .map(|p| vec![p.s, p.p_abs, 0.0, p.p_abs_no_leakage])
                .collect();
            let peak = pts
                .iter()
                .cloned()
                .max_by(|a, b| a.p_abs.partial_cmp(&b.p_abs).unwrap())
                .expect("non-empty");
            let headline = format!(
                "intensity sweep peak p_abs = {:.4}% at s = {}",
                peak.p_abs * 100.0,
                peak.s
            );
            Ok((
                SweepResult {
                    scenario_name: sc.name.clone(),
                    engine: sc.engine.as_str().into(),
                    columns: vec![
                        "s".into(),
                        "p_abs".into(),
                        "p_abs_se".into(),
                        "p_abs_no_leakage".into(),
                    ],
                    rows,
                    metadata: meta,
                },
                headline,
            ))
        }
        Engine::SpinCorrelation => {
            let sweep = sc.sweep.as_ref().expect("validated");
            let spin = sc.spin.as_ref().expect("validated");
            let run = run_fig4_sweep(
                spin,
                &sweep.values,
                sc.emitter.s,
                sc.link.leakage_ratio_at_sat,
                true,
                &sc.sequence,
                sc.seed,
            )?;
            meta.n_reps = Some(sc.sequence.n_reps);
            meta.calibration = Some(run.calibration);
            let rows = run
                .points
                .iter()
                .zip(&run.normalized)
                .zip(run.model_with_leakage.iter().zip(&run.model_no_leakage))
                .map(|((p, (norm, norm_se)), (m_on, m_off))| {
                    vec![
                        p.pump_pulse_len_ns,
                        p.p_up,
                        *norm,
                        *norm_se,
                        *m_on,
                        *m_off,
                        p.estimate.p_transfer,
                        p.estimate.p_transfer_se,
                    ]
                })
                .collect();
            let headline = format!(
                "spin correlation: p_up from {:.3} to {:.3}, leakage floor (model) = {:.4}",
                run.points.first().map(|p| p.p_up).unwrap_or(f64::NAN),
                run.points.last().map(|p| p.p_up).unwrap_or(f64::NAN),
                run.model_with_leakage.first().cloned().unwrap_or(f64::NAN)
            );
            Ok((
                SweepResult {
                    scenario_name: sc.name.clone(),
                    engine: sc.engine.as_str().into(),
                    columns: vec![
                        "pump_pulse_len_ns".into(),
                        "p_up".into(),
                        "transfer_norm".into(),
                        "transfer_norm_se".into(),
                        "model_with_leakage".into(),
                        "model_no_leakage".into(),
                        "p_transfer".into(),
                        "p_transfer_se".into(),
                    ],
                    rows,
                    metadata: meta,
                },
                headline,
            ))
        }
        Engine::Spectrum => {
            let grid = sc.spectrum_grid.unwrap_or_default();
            let spec = emission_spectrum(&sc.emitter, &grid)?;
            meta.grid_points = Some(spec.grid.len());
            meta.grid_step_mhz = Some(spec.grid_step());
            meta.notes.push(format!(
                "coherent_weight = {}, total_rate = {}, captured_fraction = {:.6}, truncated = {}",
                spec.coherent_weight,
                spec.total_rate,
                spec.captured_fraction(),
                spec.truncated()
            ));
            let rows = spec
                .grid
                .iter()
                .zip(&spec.incoherent_density)
                .map(|(&f, &d)| vec![f, d])
                .collect();
            let headline = format!(
                "spectrum at s = {}: coherent fraction = {:.4}, generalized Rabi = {:.1} MHz",
                sc.emitter.s,
                spec.coherent_weight / spec.total_rate,
                sc.emitter.generalized_rabi_mhz()
            );
            Ok((
                SweepResult {
                    scenario_name: sc.name.clone(),
                    engine: sc.engine.as_str().into(),
                    columns: vec!["nu_offset_mhz".into(), "incoherent_density".into()],
                    rows,
                    metadata: meta,
                },
                headline,
            ))
        }
        Engine::Budget => {
            let budget = sc.budget.clone().unwrap_or_default();
            let (path, overall) = budget_product(&budget)?;
            let mut rows = Vec::with_capacity(budget.stages.len());
            let mut cumulative = 1.0;
            for (i, stage) in budget.stages.iter().enumerate() {
                cumulative *= stage.transmission;
                rows.push(vec![i as f64, stage.transmission, cumulative]);
                meta.notes.push(format!("stage {i}: {}", stage.name));
            }
            meta.notes.push(format!(
                "extraction_into_first_lens = {}",
                budget.extraction_into_first_lens
            ));
            let headline = format!(
                "path transmission = {:.4}, overall with extraction = {:.3e}",
                path, overall
            );
            Ok((
                SweepResult {
                    scenario_name: sc.name.clone(),
                    engine: sc.engine.as_str().into(),
                    columns: vec![
                        "stage_index".into(),
                        "transmission".into(),
                        "cumulative_transmission".into(),
                    ],
                    rows,
                    metadata: meta,
                },
                headline,
            ))
        }
    }
}
