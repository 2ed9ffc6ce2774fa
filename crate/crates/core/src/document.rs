//! JSON model file format.
//!
//! ```json
//! {
//!   "name": "...",
//!   "hazard_frequency_per_year": 0.7,
//!   "subsystems": [{ "name": "LHD", "pfd": { "scaled": 0.25 } }, ...],
//!   "functions":  [{ "name": "AFS", "requires": ["LHD", "FDP", "FSS"] }, ...],
//!   "segments":   [{ "name": "Catastrophic", "tolerance_per_year": 0.001,
//!                    "severity": 40.0, "predicate": "!ASE & !MSE & !EE" }, ...]
//! }
//! ```
//!
//! `requires` lists are the columns of the mapping matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::Findings;
use crate::model::{
    validate, ConsequenceScheme, FunctionDef, MappingMatrix, PfdSpec, SegmentDef, SubsystemDef,
    SystemModel, ValidationReport, DEFAULT_ENUMERATION_CAP,
};
use crate::predicate::{parse_predicate, PredicateEnv};
use crate::Error;

/// The case-study road tunnel fire model.
pub const TUNNEL_MODEL_JSON: &str = include_str!("../models/tunnel.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub name: String,
    pub hazard_frequency_per_year: f64,
    pub subsystems: Vec<SubsystemEntry>,
    pub functions: Vec<FunctionEntry>,
    pub segments: Vec<SegmentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemEntry {
    pub name: String,
    pub pfd: PfdSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionEntry {
    pub name: String,
    pub requires: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentEntry {
    pub name: String,
    pub tolerance_per_year: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<f64>,
    pub predicate: String,
}

impl ModelDocument {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serializes")
    }

    /// Resolve names and parse predicates. Resolution problems come back as
    /// a failed report; on success the model has also passed [`validate`].
    pub fn to_model(&self) -> Result<SystemModel, ValidationReport> {
        self.to_model_with_cap(DEFAULT_ENUMERATION_CAP)
    }

    pub fn to_model_with_cap(
        &self,
        enumeration_cap: usize,
    ) -> Result<SystemModel, ValidationReport> {
        let mut out = Findings::default();
        let subsystem_names: Vec<String> = self.subsystems.iter().map(|s| s.name.clone()).collect();
        let function_names: Vec<String> = self.functions.iter().map(|f| f.name.clone()).collect();
        let segment_names: Vec<String> = self.segments.iter().map(|s| s.name.clone()).collect();

        let mut requires = Vec::with_capacity(self.functions.len());
        for (k, func) in self.functions.iter().enumerate() {
            let mut idx = Vec::new();
            for sub in &func.requires {
                match subsystem_names.iter().position(|s| s == sub) {
                    Some(j) => idx.push(j),
                    None => out.error(
                        "unknown-subsystem",
                        format!("function[{k}] {}", func.name),
                        format!(
                            "function `{}` requires unknown subsystem `{sub}`",
                            func.name
                        ),
                    ),
                }
            }
            requires.push(idx);
        }

        let mut segments = Vec::with_capacity(self.segments.len());
        for (h, seg) in self.segments.iter().enumerate() {
            let env = PredicateEnv::new(&function_names, &segment_names, h);
            match parse_predicate(&seg.predicate, &env) {
                Ok(predicate) => segments.push(SegmentDef {
                    name: seg.name.clone(),
                    tolerance: seg.tolerance_per_year,
                    severity: seg.severity,
                    predicate,
                }),
                Err(e) => out.error(
                    "predicate",
                    format!("segment[{h}] {}", seg.name),
                    format!("in `{}`: {e}", seg.predicate),
                ),
            }
        }

        if out.has_errors() {
            return Err(ValidationReport::from_findings(out.0));
        }

        let model = SystemModel {
            name: self.name.clone(),
            subsystems: self
                .subsystems
                .iter()
                .map(|s| SubsystemDef {
                    name: s.name.clone(),
                    pfd: s.pfd,
                })
                .collect(),
            functions: self
                .functions
                .iter()
                .map(|f| FunctionDef {
                    name: f.name.clone(),
                })
                .collect(),
            mapping: MappingMatrix::from_requirements(
                self.subsystems.len(),
                self.functions.len(),
                &requires,
            ),
            hazard_frequency: self.hazard_frequency_per_year,
            scheme: ConsequenceScheme::new(segments),
            enumeration_cap,
        };
        let mut report = validate(&model);
        if report.is_ok() {
            Ok(model)
        } else {
            report.findings.splice(0..0, out.0);
            Err(report)
        }
    }

    pub fn from_model(model: &SystemModel) -> Self {
        let function_names = model.function_names();
        let segment_names = model.scheme.names();
        Self {
            name: model.name.clone(),
            hazard_frequency_per_year: model.hazard_frequency,
            subsystems: model
                .subsystems
                .iter()
                .map(|s| SubsystemEntry {
                    name: s.name.clone(),
                    pfd: s.pfd,
                })
                .collect(),
            functions: model
                .functions
                .iter()
                .enumerate()
                .map(|(k, f)| FunctionEntry {
                    name: f.name.clone(),
                    requires: model
                        .mapping
                        .requirements(k)
                        .into_iter()
                        .map(|j| model.subsystems[j].name.clone())
                        .collect(),
                })
                .collect(),
            segments: model
                .scheme
                .segments
                .iter()
                .enumerate()
                .map(|(h, s)| {
                    let env = PredicateEnv::new(&function_names, &segment_names, h);
                    SegmentEntry {
                        name: s.name.clone(),
                        tolerance_per_year: s.tolerance,
                        severity: s.severity,
                        predicate: s.predicate.display(&env).to_string(),
                    }
                })
                .collect(),
        }
    }
}

/// Outcome of loading a model file.
#[derive(Debug)]
pub enum LoadError {
    /// Unreadable file or malformed JSON.
    Io(Error),
    /// Well-formed document describing an invalid model.
    Invalid(ValidationReport),
}

pub fn load_model(path: &Path, enumeration_cap: usize) -> Result<SystemModel, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(e.into()))?;
    let doc = ModelDocument::from_json(&text).map_err(LoadError::Io)?;
    doc.to_model_with_cap(enumeration_cap)
        .map_err(LoadError::Invalid)
}

pub fn tunnel_document() -> ModelDocument {
    ModelDocument::from_json(TUNNEL_MODEL_JSON).expect("bundled tunnel model parses")
}

pub fn tunnel_model() -> SystemModel {
    tunnel_document()
        .to_model()
        .expect("bundled tunnel model validates")
}
