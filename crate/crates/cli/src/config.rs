//! Experiment configuration files.
//!
//! ```json
//! {
//!   "experiment": "mp-sweep",
//!   "inputs": {"A": {"rows": 2, "cols": 2, "data": [1, 0, 0, 0]}},
//!   "tolerances": {"rank_tol": 1e-8},
//!   "output_path": "sweep",
//!   "seed": 1
//! }
//! ```
//!
//! Only `experiment` is required. Tolerances not listed keep their defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use geninv_core::json::{MatrixJson, SubspaceJson};
use geninv_core::{Matrix, Subspace, Tolerances, Vector};
use serde::Serialize;
use serde_json::Value;

use crate::experiments::EXPERIMENTS;

const FIELDS: [&str; 5] = ["experiment", "inputs", "tolerances", "output_path", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub inputs: BTreeMap<String, Value>,
    pub tolerances: Tolerances,
    /// File stem for the report, relative to the output directory.
    pub output_path: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{}", parse_message(.line, .column, .field, .message))]
    Parse {
        line: Option<usize>,
        column: Option<usize>,
        field: Option<String>,
        message: String,
    },
    #[error("unknown experiment {name:?}; known experiments: {}", EXPERIMENTS.join(", "))]
    UnknownExperiment { name: String },
}

fn parse_message(
    line: &Option<usize>,
    column: &Option<usize>,
    field: &Option<String>,
    message: &str,
) -> String {
    let mut out = String::from("invalid config");
    if let (Some(l), Some(c)) = (line, column) {
        out.push_str(&format!(" at line {l}, column {c}"));
    }
    if let Some(f) = field {
        out.push_str(&format!(" in field {f:?}"));
    }
    out.push_str(": ");
    out.push_str(message);
    out
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::Parse {
            line: None,
            column: None,
            field: Some(field.into()),
            message: message.to_string(),
        }
    }

    /// The offending field, when the error is tied to one.
    pub fn field_name(&self) -> Option<&str> {
        match self {
            Self::Parse { field, .. } => field.as_deref(),
            Self::UnknownExperiment { .. } => Some("experiment"),
        }
    }
}

pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
        line: None,
        column: None,
        field: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: Some(e.line()),
        column: Some(e.column()),
        field: None,
        message: e.to_string(),
    })?;
    let Value::Object(mut root) = root else {
        return Err(ConfigError::Parse {
            line: None,
            column: None,
            field: None,
            message: "top level must be an object".into(),
        });
    };
    if let Some(extra) = root.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(ConfigError::field(extra.clone(), "unknown field"));
    }

    let experiment = match root.remove("experiment") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(ConfigError::field("experiment", "expected a string")),
        None => return Err(ConfigError::field("experiment", "missing required field")),
    };
    if !EXPERIMENTS.contains(&experiment.as_str()) {
        return Err(ConfigError::UnknownExperiment { name: experiment });
    }
    let inputs = match root.remove("inputs") {
        None => BTreeMap::new(),
        Some(Value::Object(map)) => map.into_iter().collect(),
        Some(_) => return Err(ConfigError::field("inputs", "expected an object")),
    };
    let tolerances = match root.remove("tolerances") {
        None => Tolerances::default(),
        Some(v @ Value::Object(_)) => {
            serde_json::from_value(v).map_err(|e| ConfigError::field("tolerances", e))?
        }
        Some(_) => return Err(ConfigError::field("tolerances", "expected an object")),
    };
    let output_path = match root.remove("output_path") {
        None => experiment.clone(),
        Some(Value::String(s)) if !s.is_empty() => s,
        Some(_) => {
            return Err(ConfigError::field(
                "output_path",
                "expected a non-empty string",
            ))
        }
    };
    let seed = match root.remove("seed") {
        None => 0,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| ConfigError::field("seed", "expected a nonnegative 64-bit integer"))?,
    };
    Ok(ExperimentConfig {
        experiment,
        inputs,
        tolerances,
        output_path,
        seed,
    })
}

impl ExperimentConfig {
    /// The configuration as it would be written back to a file.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn inputs(&self) -> Inputs<'_> {
        Inputs { map: &self.inputs }
    }
}

/// Typed access to the `inputs` object; errors name the offending key.
pub struct Inputs<'a> {
    map: &'a BTreeMap<String, Value>,
}

impl Inputs<'_> {
    fn get(&self, key: &str) -> Result<&Value, ConfigError> {
        self.map
            .get(key)
            .ok_or_else(|| ConfigError::field(format!("inputs.{key}"), "missing required input"))
    }

    fn typed<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.map
            .get(key)
            .map(|v| {
                serde_json::from_value(v.clone())
                    .map_err(|e| ConfigError::field(format!("inputs.{key}"), e))
            })
            .transpose()
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn matrix(&self, key: &str) -> Result<Matrix, ConfigError> {
        self.get(key)?;
        self.opt_matrix(key).map(|m| m.expect("present"))
    }

    pub fn opt_matrix(&self, key: &str) -> Result<Option<Matrix>, ConfigError> {
        self.typed::<MatrixJson>(key)?
            .map(|m| {
                m.to_matrix()
                    .map_err(|e| ConfigError::field(format!("inputs.{key}"), e))
            })
            .transpose()
    }

    pub fn opt_matrices(&self, key: &str) -> Result<Option<Vec<Matrix>>, ConfigError> {
        self.typed::<Vec<MatrixJson>>(key)?
            .map(|ms| {
                ms.iter()
                    .map(|m| {
                        m.to_matrix()
                            .map_err(|e| ConfigError::field(format!("inputs.{key}"), e))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn opt_subspace(&self, key: &str) -> Result<Option<Subspace>, ConfigError> {
        self.typed::<SubspaceJson>(key)?
            .map(|s| {
                s.to_subspace()
                    .map_err(|e| ConfigError::field(format!("inputs.{key}"), e))
            })
            .transpose()
    }

    pub fn opt_vector(&self, key: &str) -> Result<Option<Vector>, ConfigError> {
        Ok(self.typed::<Vec<f64>>(key)?.map(Vector::from_vec))
    }

    pub fn opt_vectors(&self, key: &str) -> Result<Option<Vec<Vector>>, ConfigError> {
        Ok(self
            .typed::<Vec<Vec<f64>>>(key)?
            .map(|vs| vs.into_iter().map(Vector::from_vec).collect()))
    }

    pub fn opt_f64s(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.typed(key)
    }

    pub fn opt_bools(&self, key: &str) -> Result<Option<Vec<bool>>, ConfigError> {
        self.typed(key)
    }

    pub fn string(&self, key: &str) -> Result<String, ConfigError> {
        self.get(key)?;
        self.opt_string(key).map(|s| s.expect("present"))
    }

    pub fn opt_string(&self, key: &str) -> Result<Option<String>, ConfigError> {
        self.typed(key)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.typed(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.typed(key)?.unwrap_or(default))
    }
}

/// Wraps a value map as the `inputs` of a config, for building configs in code.
pub fn inputs_from(
    pairs: impl IntoIterator<Item = (&'static str, Value)>,
) -> BTreeMap<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// JSON for a matrix input.
pub fn matrix_value(m: &Matrix) -> Value {
    serde_json::to_value(MatrixJson::from(m)).expect("matrix serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "experiment": "mp-sweep",
        "inputs": {
            "A": {"rows": 2, "cols": 2, "data": [1, 0, 0, 0]},
            "direction": {"rows": 2, "cols": 2, "data": [0, 1, 1, 0]}
        },
        "seed": 1
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.experiment, "mp-sweep");
        assert_eq!(c.seed, 1);
        assert_eq!(c.output_path, "mp-sweep");
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(
            c.inputs().matrix("A").unwrap(),
            Matrix::from_row_slice(2, 2, &[1., 0., 0., 0.])
        );
    }

    #[test]
    fn missing_experiment_names_the_field() {
        let err = parse_config(r#"{"inputs": {}}"#).unwrap_err();
        assert_eq!(err.field_name(), Some("experiment"));
        assert!(err.to_string().contains("experiment"));
    }

    #[test]
    fn syntax_errors_carry_a_position() {
        match parse_config("{\n  \"experiment\": \"chart\",\n  oops\n}").unwrap_err() {
            ConfigError::Parse { line, column, .. } => {
                assert_eq!(line, Some(3));
                assert!(column.is_some());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_experiment_and_fields_are_rejected() {
        assert!(matches!(
            parse_config(r#"{"experiment": "sweep"}"#),
            Err(ConfigError::UnknownExperiment { .. })
        ));
        let err = parse_config(r#"{"experiment": "chart", "sed": 3}"#).unwrap_err();
        assert_eq!(err.field_name(), Some("sed"));
        let err =
            parse_config(r#"{"experiment": "chart", "tolerances": {"rank": 1}}"#).unwrap_err();
        assert_eq!(err.field_name(), Some("tolerances"));
    }

    #[test]
    fn tolerance_override_survives_a_round_trip() {
        let c =
            parse_config(r#"{"experiment": "chart", "tolerances": {"rank_tol": 1e-8}}"#).unwrap();
        assert_eq!(c.tolerances.rank_tol, Some(1e-8));
        assert_eq!(c.tolerances.angle_tol, Tolerances::default().angle_tol);
        let again = parse_config(&c.to_json()).unwrap();
        assert_eq!(again, c);
        assert!(c.to_json().contains("\"rank_tol\": 1e-8"));
    }

    #[test]
    fn input_errors_name_the_key() {
        let c = parse_config(r#"{"experiment": "chart", "inputs": {"X": [1, 2]}}"#).unwrap();
        let err = c.inputs().matrix("X").unwrap_err();
        assert_eq!(err.field_name(), Some("inputs.X"));
        let err = c.inputs().matrix("Y").unwrap_err();
        assert_eq!(err.field_name(), Some("inputs.Y"));
    }
}
