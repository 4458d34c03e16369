//! Sweep result container and serialization: CSV for the data contract,
//! JSON embedding the fully resolved configuration, and an optional minimal
//! SVG rendering for quick inspection.
//!
//! CSV is UTF-8, comma-separated, '.' decimal, header row first. Floats use
//! Rust's shortest round-trip formatting, which is locale-independent and
//! byte-stable across runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::protocol::{Calibration, SaturationFit};
use crate::scenario::Scenario;
use crate::Result;

/// Tabular result of one scenario run: one row per axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario_name: String,
    pub engine: String,
    /// Column names; the first column is the sweep axis.
    pub columns: Vec<String>,
    /// Rectangular data, each row aligned with `columns`.
    pub rows: Vec<Vec<f64>>,
    pub metadata: ResultMetadata,
}

/// Everything needed to reproduce and interpret a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMetadata {
    pub seed: u64,
    pub version: String,
    pub n_reps: Option<u64>,
    pub grid_points: Option<usize>,
    pub grid_step_mhz: Option<f64>,
    pub scale_k: Option<f64>,
    pub calibration: Option<Calibration>,
    pub fit: Option<SaturationFit>,
    pub notes: Vec<String>,
}

impl ResultMetadata {
    pub fn new(seed: u64) -> Self {
        ResultMetadata {
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            n_reps: None,
            grid_points: None,
            grid_step_mhz: None,
            scale_k: None,
            calibration: None,
            fit: None,
            notes: Vec::new(),
        }
    }
}

impl SweepResult {
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(crate::Error::Validation(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    self.columns.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// JSON document with the result and the resolved scenario so that any
    /// output is reproducible from its own metadata.
    pub fn write_json(&self, scenario: &Scenario, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Document<'a> {
            result: &'a SweepResult,
            config: &'a Scenario,
        }
        let doc = Document {
            result: self,
            config: scenario,
        };
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| crate::Error::Validation(format!("json serialization: {e}")))?;
        let mut f = fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

/// Paths produced by a scenario run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: Option<PathBuf>,
    pub headline: String,
}

/// Minimal SVG polyline rendering of the sweep: first column on x, every
/// other column as one series. Good enough to eyeball a curve; the CSV is
/// the contract.
pub fn write_svg(result: &SweepResult, path: &Path) -> Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 50.0;
    let xs: Vec<f64> = result.rows.iter().map(|r| r[0]).collect();
    let finite = |v: &f64| v.is_finite();
    let x_min = xs
        .iter()
        .filter(|v| finite(v))
        .cloned()
        .fold(f64::MAX, f64::min);
    let x_max = xs
        .iter()
        .filter(|v| finite(v))
        .cloned()
        .fold(f64::MIN, f64::max);
    let mut y_min = f64::MAX;
    let mut y_max = f64::MIN;
    for row in &result.rows {
        for v in &row[1..] {
            if v.is_finite() {
                y_min = y_min.min(*v);
                y_max = y_max.max(*v);
            }
        }
    }
    if !(x_max > x_min) || !(y_max >= y_min) {
        return Err(crate::Error::Validation(
            "not enough finite data to plot".into(),
        ));
    }
    let y_span = (y_max - y_min).max(f64::MIN_POSITIVE);
    let sx = |x: f64| M + (x - x_min) / (x_max - x_min) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y_min) / y_span * (H - 2.0 * M);

    let palette = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2",
    ];
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        W - 2.0 * M,
        H - 2.0 * M
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{} — {}</text>\n",
        W / 2.0,
        xml_escape(&result.scenario_name),
        xml_escape(&result.engine)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        H - 12.0,
        xml_escape(&result.columns[0])
    ));
    for (label, x, anchor) in [
        (format!("{x_min:.4}"), M, "middle"),
        (format!("{x_max:.4}"), W - M, "middle"),
    ] {
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"10\" text-anchor=\"{anchor}\">{label}</text>\n",
            H - M + 16.0
        ));
    }
    for (label, y) in [
        (format!("{y_max:.4}"), M + 4.0),
        (format!("{y_min:.4}"), H - M),
    ] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{y}\" font-size=\"10\" text-anchor=\"end\">{label}</text>\n",
            M - 6.0
        ));
    }
    for (ci, name) in result.columns.iter().enumerate().skip(1) {
        let color = palette[(ci - 1) % palette.len()];
        let pts: Vec<String> = result
            .rows
            .iter()
            .filter(|r| r[0].is_finite() && r[ci].is_finite())
            .map(|r| format!("{:.2},{:.2}", sx(r[0]), sy(r[ci])))
            .collect();
        if pts.len() > 1 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            W - M + 4.0 - 120.0,
            M + 16.0 * ci as f64,
            xml_escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    let mut f = fs::File::create(path)?;
    f.write_all(svg.as_bytes())?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SweepResult {
        SweepResult {
            scenario_name: "demo".into(),
            engine: "intensity-sweep".into(),
            columns: vec!["s".into(), "p_abs".into()],
            rows: vec![vec![0.1, 0.014], vec![1.0, 0.009], vec![11.0, f64::NAN]],
            metadata: ResultMetadata::new(7),
        }
    }

    #[test]
    fn csv_is_stable_and_headered() {
        let r = sample();
        let csv = r.to_csv();
        assert!(csv.starts_with("s,p_abs\n"));
        assert!(csv.contains("0.1,0.014\n"));
        assert!(csv.contains("11,NaN\n"));
        assert_eq!(csv, r.to_csv());
    }

    #[test]
    fn ragged_rows_fail_validation() {
        let mut r = sample();
        r.rows.push(vec![1.0]);
        assert!(r.validate().is_err());
    }
}
