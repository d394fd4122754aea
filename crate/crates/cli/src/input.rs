//! System files: JSON with `schema_version`, row-major `A`, `C`, `W`, `V`
//! and an optional `label`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;
use thiserror::Error;

use riccati_spectra::model::ModelError;
use riccati_spectra::{build_model, RealMatrix, SystemModel};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: ModelError },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub schema_version: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
}

/// Reads a system file and validates it into a model.
pub fn load(path: &Path) -> Result<(SystemFile, SystemModel), InputError> {
    let text = fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file = parse(&text, path)?;
    let model = file.to_model(path)?;
    Ok((file, model))
}

pub fn parse(text: &str, path: &Path) -> Result<SystemFile, InputError> {
    let file: SystemFile = serde_json::from_str(text).map_err(|e| InputError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(InputError::Schema {
            path: path.to_path_buf(),
            message: format!(
                "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
                file.schema_version
            ),
        });
    }
    Ok(file)
}

impl SystemFile {
    pub fn to_model(&self, path: &Path) -> Result<SystemModel, InputError> {
        let schema = |message: String| InputError::Schema {
            path: path.to_path_buf(),
            message,
        };
        let a = matrix("A", &self.a).map_err(schema)?;
        let c = matrix("C", &self.c).map_err(schema)?;
        let w = matrix("W", &self.w).map_err(schema)?;
        let v = matrix("V", &self.v).map_err(schema)?;
        build_model(a, c, w, v).map_err(|source| InputError::Model {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<RealMatrix, String> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(format!("field `{name}` must be a non-empty matrix"));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(format!(
            "field `{name}` row {} has {} entries, expected {cols}",
            i + 1,
            row.len()
        ));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> &'static Path {
        Path::new("test.json")
    }

    #[test]
    fn parses_scalar_file() {
        let text = r#"{"schema_version": "1", "label": "s",
            "A": [[-1]], "C": [[1]], "W": [[3]], "V": [[1]]}"#;
        let file = parse(text, path()).unwrap();
        let model = file.to_model(path()).unwrap();
        assert_eq!(model.state_dim(), 1);
        assert_eq!(file.label.as_deref(), Some("s"));
    }

    #[test]
    fn reports_ragged_rows() {
        let text = r#"{"schema_version": "1",
            "A": [[1, 0], [0]], "C": [[1, 0]], "W": [[1, 0], [0, 1]], "V": [[1]]}"#;
        let err = parse(text, path()).unwrap().to_model(path()).unwrap_err();
        assert!(err.to_string().contains("field `A` row 2 has 1 entries"));
    }

    #[test]
    fn rejects_nan_and_unknown_fields_with_position() {
        let text = "{\"schema_version\": \"1\",\n \"A\": [[NaN]], \"C\": [[1]], \"W\": [[1]], \"V\": [[1]]}";
        let err = parse(text, path()).unwrap_err();
        assert!(matches!(err, InputError::Parse { line: 2, .. }), "{err}");
        let text = r#"{"schema_version": "1", "B": [[1]],
            "A": [[1]], "C": [[1]], "W": [[1]], "V": [[1]]}"#;
        assert!(parse(text, path())
            .unwrap_err()
            .to_string()
            .contains("unknown field"));
    }

    #[test]
    fn rejects_other_schema_versions() {
        let text = r#"{"schema_version": "2",
            "A": [[1]], "C": [[1]], "W": [[1]], "V": [[1]]}"#;
        assert!(matches!(
            parse(text, path()),
            Err(InputError::Schema { .. })
        ));
    }
}
