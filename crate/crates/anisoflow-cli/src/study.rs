//! Parameter-sweep definition files.

use crate::commands::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StudyAxis {
    MeshSize,
    TimeStep,
    Ratio,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StudyFile {
    study: StudySpecRaw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StudySpecRaw {
    axis: StudyAxis,
    values: Vec<f64>,
    base: PathBuf,
    outputs: PathBuf,
}

#[derive(Debug, Clone)]
pub struct StudySpec {
    pub axis: StudyAxis,
    pub values: Vec<f64>,
    pub base: PathBuf,
    pub outputs: PathBuf,
}

impl StudySpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let raw: StudyFile = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut spec = Self {
            axis: raw.study.axis,
            values: raw.study.values,
            base: raw.study.base,
            outputs: raw.study.outputs,
        };
        if let Some(dir) = path.parent() {
            if spec.base.is_relative() {
                spec.base = dir.join(&spec.base);
            }
            if spec.outputs.is_relative() {
                spec.outputs = dir.join(&spec.outputs);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), CliError> {
        let need = match self.axis {
            StudyAxis::MeshSize | StudyAxis::TimeStep => 3,
            StudyAxis::Ratio => 1,
        };
        if self.values.len() < need {
            return Err(CliError::Validation(format!(
                "{:?} study needs at least {need} values, got {}",
                self.axis,
                self.values.len()
            )));
        }
        let monotone = self.values.windows(2).all(|w| w[1] > w[0])
            || self.values.windows(2).all(|w| w[1] < w[0]);
        if !monotone || self.values.iter().any(|&v| v <= 0.0) {
            return Err(CliError::Validation(
                "study values must be positive and strictly monotone".to_string(),
            ));
        }
        Ok(())
    }
}
