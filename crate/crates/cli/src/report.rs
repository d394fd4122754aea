//! Report layout shared by the JSON and text renderers.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays. The text form is rendered from the same JSON value, so both
//! carry identical numbers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use riccati_spectra::{RealMatrix, C64};

pub type Matrix = Vec<Vec<f64>>;
pub type Complex = [f64; 2];

pub fn matrix(m: &RealMatrix) -> Matrix {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn complex_list<'a>(values: impl IntoIterator<Item = &'a C64>) -> Vec<Complex> {
    values.into_iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub care: Option<CareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special_cases: Option<Vec<SpecialCaseEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jensen: Option<JensenSection>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub label: Option<String>,
    pub states: usize,
    pub outputs: usize,
    pub eigenvalues: Vec<Complex>,
    pub symmetrized: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CareSection {
    pub p: Matrix,
    pub k: Matrix,
    pub output_error_cov: Matrix,
    pub residual: f64,
    pub residual_bound: f64,
    pub closed_loop_eigenvalues: Vec<Complex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSection {
    pub integral_term: f64,
    pub integral_error_estimate: f64,
    pub integral_evaluations: usize,
    pub unstable_sum: f64,
    pub trace_from_care: f64,
    pub trace_from_integral: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeros_poles: Option<ZerosPolesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bode: Option<BodeSection>,
    pub residuals: Vec<ResidualEntry>,
    /// `[ω, ln det(Φ_y(ω) V⁻¹)]` on a log-spaced grid.
    pub frequency_samples: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZerosPolesSection {
    pub zeros: Vec<Complex>,
    pub poles: Vec<Complex>,
    pub cancelled: usize,
    pub zeros_term: f64,
    pub poles_term: f64,
    pub unstable_sum: f64,
    pub trace: f64,
    pub boundary_zeros: Vec<Complex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodeSection {
    pub integral: f64,
    pub error_estimate: f64,
    pub closed_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSection {
    pub trace_p: f64,
    pub lower: f64,
    /// `null` when `CᵀV⁻¹C` is singular.
    pub upper: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialCaseEntry {
    pub name: String,
    pub applied: bool,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSection {
    pub dt: f64,
    pub t_end: f64,
    pub burn_in: f64,
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
    pub gain_mode: String,
    pub empirical_output_error_cov: Matrix,
    pub empirical_state_error_cov: Matrix,
    pub innovation_intensity: Matrix,
    pub relative_gap_output: f64,
    pub relative_gap_state: f64,
    pub whiteness: WhitenessSection,
    pub innovation_autocorr: Vec<LagEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitenessSection {
    pub passed: bool,
    pub threshold: f64,
    pub worst_lag: f64,
    pub worst_entry: [usize; 2],
    pub worst_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagEntry {
    pub lag: f64,
    pub rho: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenSection {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub mode: String,
    pub zeros: Vec<Complex>,
    pub poles: Vec<Complex>,
    pub integral_numeric: f64,
    pub integral_error_estimate: f64,
    pub limit_term: f64,
    pub zeros_term: f64,
    pub poles_term: f64,
    pub closed_form: f64,
    pub residual: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub tolerance: f64,
    pub quadrature_tolerance: f64,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            // NaN residuals fail
            passed: residual <= tolerance,
        }
    }
}

impl Verdict {
    pub fn new(tolerance: f64, quadrature_tolerance: f64, checks: Vec<Check>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed),
            tolerance,
            quadrature_tolerance,
            checks,
        }
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = String::new();
        if let Value::Object(map) = &value {
            for (key, v) in map {
                if key == "schema_version" {
                    continue;
                }
                out.push_str(key);
                out.push('\n');
                render(&mut out, v, 1);
            }
        }
        out
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("none".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.iter().all(|x| !x.is_array() && !x.is_object()) => {
            let parts: Vec<String> = items.iter().filter_map(scalar).collect();
            Some(format!("[{}]", parts.join(", ")))
        }
        _ => None,
    }
}

/// Array of equal-length scalar rows, printed one row per line.
fn table(v: &Value) -> Option<Vec<Vec<String>>> {
    let rows = v.as_array()?;
    if rows.is_empty() {
        return None;
    }
    rows.iter()
        .map(|r| {
            r.as_array()?
                .iter()
                .map(|x| match x {
                    Value::Number(n) => Some(n.to_string()),
                    Value::Null => Some("none".into()),
                    _ => None,
                })
                .collect()
        })
        .collect()
}

fn render(out: &mut String, value: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match value {
        Value::Object(map) => {
            let width = map.keys().map(String::len).max().unwrap_or(0);
            for (key, v) in map {
                if let Some(s) = scalar(v) {
                    let _ = writeln!(out, "{pad}{key:<width$}  {s}");
                } else if let Some(rows) = table(v) {
                    let _ = writeln!(out, "{pad}{key}");
                    write_table(out, &rows, depth + 1);
                } else {
                    let _ = writeln!(out, "{pad}{key}");
                    render(out, v, depth + 1);
                }
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                let _ = writeln!(out, "{pad}[{i}]");
                render(out, item, depth + 1);
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{}", scalar(other).unwrap_or_default());
        }
    }
}

fn write_table(out: &mut String, rows: &[Vec<String>], depth: usize) {
    let pad = "  ".repeat(depth);
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| {
            rows.iter()
                .filter_map(|r| r.get(j))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        let _ = writeln!(out, "{pad}{}", cells.join("  "));
    }
}
