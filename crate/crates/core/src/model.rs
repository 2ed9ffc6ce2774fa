//! Mitigation system model and structural validation.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::predicate::{gamma_row, Predicate};

/// Default upper bound on the number of subsystems (2^26 states).
pub const DEFAULT_ENUMERATION_CAP: usize = 26;

/// Hard limit imposed by the 64-bit state index.
pub const MAX_SUBSYSTEMS: usize = 40;

/// Functions and segments are carried as bits of a `u64`.
pub const MAX_FUNCTIONS: usize = 64;
pub const MAX_SEGMENTS: usize = 64;

/// How a subsystem's probability of failure on demand is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PfdSpec {
    /// Known PFD, independent of the allocation target.
    Fixed(f64),
    /// Share of the allocation target: `pfd = weight * p`.
    Scaled(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemDef {
    pub name: String,
    pub pfd: PfdSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
}

/// Which subsystems each function needs. Row `j` is subsystem `j`, column
/// `k` is function `k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MappingMatrix {
    rows: Vec<Vec<bool>>,
}

impl MappingMatrix {
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Self {
        Self { rows }
    }

    /// Build an `l x m` matrix from each function's required subsystem indices.
    pub fn from_requirements(l: usize, m: usize, requires: &[Vec<usize>]) -> Self {
        let mut rows = vec![vec![false; m]; l];
        for (k, subs) in requires.iter().enumerate() {
            for &j in subs {
                rows[j][k] = true;
            }
        }
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn subsystem_count(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, subsystem: usize, function: usize) -> bool {
        self.rows[subsystem][function]
    }

    /// Subsystem indices function `k` requires.
    pub fn requirements(&self, k: usize) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, row)| row.get(k).copied().unwrap_or(false))
            .map(|(j, _)| j)
            .collect()
    }

    /// Per function, the bit set of required subsystems. Assumes a
    /// rectangular matrix with `m` columns.
    pub fn function_masks(&self, m: usize) -> Vec<u64> {
        (0..m)
            .map(|k| {
                self.rows
                    .iter()
                    .enumerate()
                    .filter(|(_, row)| row[k])
                    .fold(0u64, |acc, (j, _)| acc | (1 << j))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDef {
    pub name: String,
    /// Tolerable frequency, events per year.
    pub tolerance: f64,
    pub severity: Option<f64>,
    pub predicate: Predicate,
}

/// Consequence segments, most severe first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConsequenceScheme {
    pub segments: Vec<SegmentDef>,
}

impl ConsequenceScheme {
    pub fn new(segments: Vec<SegmentDef>) -> Self {
        Self { segments }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// True when every segment carries a severity value.
    pub fn severities_present(&self) -> bool {
        !self.segments.is_empty() && self.segments.iter().all(|s| s.severity.is_some())
    }

    pub fn tolerances(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.tolerance).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.segments.iter().map(|s| s.name.clone()).collect()
    }

    /// Gamma row for a function-state row, as a segment bit set.
    pub fn classify(&self, phi: u64) -> u64 {
        gamma_row(self.segments.iter().map(|s| &s.predicate), phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    pub subsystems: Vec<SubsystemDef>,
    pub functions: Vec<FunctionDef>,
    pub mapping: MappingMatrix,
    /// Hazardous event frequency, events per year.
    pub hazard_frequency: f64,
    pub scheme: ConsequenceScheme,
    /// Largest admissible subsystem count. Not part of the model file.
    pub enumeration_cap: usize,
}

impl SystemModel {
    pub fn l(&self) -> usize {
        self.subsystems.len()
    }

    pub fn m(&self) -> usize {
        self.functions.len()
    }

    pub fn n(&self) -> usize {
        self.scheme.len()
    }

    pub fn subsystem_names(&self) -> Vec<String> {
        self.subsystems.iter().map(|s| s.name.clone()).collect()
    }

    pub fn function_names(&self) -> Vec<String> {
        self.functions.iter().map(|f| f.name.clone()).collect()
    }

    pub fn subsystem_index(&self, name: &str) -> Option<usize> {
        self.subsystems.iter().position(|s| s.name == name)
    }

    pub fn segment_index(&self, name: &str) -> Option<usize> {
        self.scheme.segments.iter().position(|s| s.name == name)
    }

    pub fn has_scaled(&self) -> bool {
        self.subsystems
            .iter()
            .any(|s| matches!(s.pfd, PfdSpec::Scaled(_)))
    }

    /// Human-readable description of a state index (bit `j` set means
    /// subsystem `j` is available).
    pub fn describe_state(&self, state: u64) -> String {
        let down: Vec<&str> = self
            .subsystems
            .iter()
            .enumerate()
            .filter(|(j, _)| (state >> j) & 1 == 0)
            .map(|(_, s)| s.name.as_str())
            .collect();
        if down.is_empty() {
            format!("state {state} (all subsystems available)")
        } else {
            format!("state {state} (unavailable: {})", down.join(", "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FindingSeverity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: FindingSeverity,
    pub code: String,
    pub message: String,
    pub location: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            FindingSeverity::Error => "error",
            FindingSeverity::Warning => "warning",
        };
        write!(
            f,
            "{sev}[{}] {}: {}",
            self.code, self.location, self.message
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub status: ValidationStatus,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn from_findings(findings: Vec<Finding>) -> Self {
        let status = if findings
            .iter()
            .any(|f| f.severity == FindingSeverity::Error)
        {
            ValidationStatus::Failed
        } else {
            ValidationStatus::Ok
        };
        Self { status, findings }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ValidationStatus::Ok
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == FindingSeverity::Error)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        match self.status {
            ValidationStatus::Ok => write!(f, "ok"),
            ValidationStatus::Failed => write!(f, "failed"),
        }
    }
}

#[derive(Default)]
pub(crate) struct Findings(pub Vec<Finding>);

impl Findings {
    pub fn error(&mut self, code: &str, location: impl Into<String>, message: impl Into<String>) {
        self.push(FindingSeverity::Error, code, location, message);
    }

    pub fn warning(&mut self, code: &str, location: impl Into<String>, message: impl Into<String>) {
        self.push(FindingSeverity::Warning, code, location, message);
    }

    fn push(
        &mut self,
        severity: FindingSeverity,
        code: &str,
        location: impl Into<String>,
        message: impl Into<String>,
    ) {
        self.0.push(Finding {
            severity,
            code: code.to_string(),
            message: message.into(),
            location: location.into(),
        });
    }

    pub fn has_errors(&self) -> bool {
        self.0.iter().any(|f| f.severity == FindingSeverity::Error)
    }
}

fn check_names<'a>(out: &mut Findings, kind: &str, names: impl Iterator<Item = &'a str>) {
    let mut seen = HashSet::new();
    for (i, name) in names.enumerate() {
        let loc = format!("{kind}[{i}]");
        if name.trim().is_empty() {
            out.error("empty-name", loc, format!("{kind} name is empty"));
        } else if !seen.insert(name) {
            out.error(
                "duplicate-name",
                loc,
                format!("duplicate {kind} name `{name}`"),
            );
        }
    }
}

/// Check every structural invariant and, when those hold, the partition
/// property: for each reachable function-state row exactly one segment
/// predicate is true.
pub fn validate(model: &SystemModel) -> ValidationReport {
    let mut out = Findings::default();
    let l = model.l();
    let m = model.m();
    let n = model.n();

    if l == 0 {
        out.error("no-subsystems", "subsystems", "model has no subsystems");
    }
    let cap = model.enumeration_cap.min(MAX_SUBSYSTEMS);
    if l > cap {
        out.error(
            "enumeration-cap",
            "subsystems",
            format!("{l} subsystems exceed the enumeration cap of {cap}"),
        );
    }
    if m == 0 {
        out.error("no-functions", "functions", "model has no functions");
    }
    if m > MAX_FUNCTIONS {
        out.error(
            "too-many-functions",
            "functions",
            format!("{m} functions exceed the limit of {MAX_FUNCTIONS}"),
        );
    }
    if n == 0 {
        out.error(
            "no-segments",
            "segments",
            "consequence scheme has no segments",
        );
    }
    if n > MAX_SEGMENTS {
        out.error(
            "too-many-segments",
            "segments",
            format!("{n} segments exceed the limit of {MAX_SEGMENTS}"),
        );
    }
    if !(model.hazard_frequency.is_finite() && model.hazard_frequency > 0.0) {
        out.error(
            "hazard-frequency",
            "hazard_frequency_per_year",
            format!(
                "hazard frequency must be positive and finite, got {}",
                model.hazard_frequency
            ),
        );
    }

    check_names(
        &mut out,
        "subsystem",
        model.subsystems.iter().map(|s| s.name.as_str()),
    );
    check_names(
        &mut out,
        "function",
        model.functions.iter().map(|f| f.name.as_str()),
    );
    check_names(
        &mut out,
        "segment",
        model.scheme.segments.iter().map(|s| s.name.as_str()),
    );
    let function_names: HashSet<&str> = model.functions.iter().map(|f| f.name.as_str()).collect();
    for (h, seg) in model.scheme.segments.iter().enumerate() {
        if function_names.contains(seg.name.as_str()) {
            out.warning(
                "shadowed-segment",
                format!("segment[{h}]"),
                format!(
                    "segment `{}` has the same name as a function; predicates resolve it to the function",
                    seg.name
                ),
            );
        }
    }

    for (j, sub) in model.subsystems.iter().enumerate() {
        let loc = format!("subsystem[{j}] {}", sub.name);
        match sub.pfd {
            PfdSpec::Fixed(v) if !(0.0..=1.0).contains(&v) => out.error(
                "probability-out-of-range",
                loc,
                format!("probability out of range: fixed PFD {v} is not in [0, 1]"),
            ),
            PfdSpec::Scaled(w) if !(w.is_finite() && w > 0.0) => out.error(
                "scaled-weight",
                loc,
                format!("scaled PFD weight must be positive and finite, got {w}"),
            ),
            _ => {}
        }
    }

    let rows = model.mapping.rows();
    let mut mapping_ok = true;
    if rows.len() != l {
        mapping_ok = false;
        out.error(
            "dimension-mismatch",
            "mapping",
            format!(
                "mapping has {} rows but the model has {l} subsystems",
                rows.len()
            ),
        );
    }
    for (j, row) in rows.iter().enumerate() {
        if row.len() != m {
            mapping_ok = false;
            out.error(
                "dimension-mismatch",
                format!("mapping row {j}"),
                format!(
                    "mapping row has {} columns but the model has {m} functions",
                    row.len()
                ),
            );
        }
    }
    if mapping_ok {
        for (k, func) in model.functions.iter().enumerate() {
            if !rows.iter().any(|row| row[k]) {
                out.error(
                    "unmapped-function",
                    format!("function[{k}] {}", func.name),
                    format!("function `{}` requires no subsystem", func.name),
                );
            }
        }
        for (j, sub) in model.subsystems.iter().enumerate() {
            if !rows[j].iter().any(|&b| b) {
                out.warning(
                    "unused-subsystem",
                    format!("subsystem[{j}] {}", sub.name),
                    format!("subsystem `{}` is not required by any function", sub.name),
                );
            }
        }
    }

    let severities: Vec<Option<f64>> = model.scheme.segments.iter().map(|s| s.severity).collect();
    let with_severity = severities.iter().filter(|s| s.is_some()).count();
    if with_severity != 0 && with_severity != n {
        out.error(
            "partial-severities",
            "segments",
            format!("{with_severity} of {n} segments have a severity; give all or none"),
        );
    }
    for (h, seg) in model.scheme.segments.iter().enumerate() {
        let loc = format!("segment[{h}] {}", seg.name);
        if !(seg.tolerance.is_finite() && seg.tolerance > 0.0) {
            out.error(
                "nonpositive-tolerance",
                loc.clone(),
                format!(
                    "tolerance must be positive and finite, got {}",
                    seg.tolerance
                ),
            );
        }
        if let Some(c) = seg.severity {
            if !(c.is_finite() && c > 0.0) {
                out.error(
                    "severity-out-of-range",
                    loc.clone(),
                    format!("severity must be positive and finite, got {c}"),
                );
            }
        }
        let mut bad = Vec::new();
        seg.predicate.for_each_literal(&mut |lit| match lit {
            Predicate::Function(k) if *k >= m => bad.push(format!("unknown function index {k}")),
            Predicate::Segment(r) if *r >= h => bad.push(format!(
                "reference to segment {r}, which is not earlier than {h}"
            )),
            _ => {}
        });
        for msg in bad {
            out.error("predicate-reference", loc.clone(), msg);
        }
    }

    if !out.has_errors() {
        check_partition(model, &mut out);
    }

    ValidationReport::from_findings(out.0)
}

/// Distinct function rows reachable from the 2^l states, each with the first
/// state index producing it.
pub(crate) fn reachable_phi_rows(model: &SystemModel) -> Vec<(u64, u64)> {
    let l = model.l();
    let m = model.m();
    let masks = model.mapping.function_masks(m);
    let limit = 1u64 << m.min(63);
    let mut seen: HashMap<u64, u64> = HashMap::new();
    for state in 0..(1u64 << l) {
        let phi = crate::engine::phi_mask(state, &masks);
        seen.entry(phi).or_insert(state);
        if m < 63 && seen.len() as u64 == limit {
            break;
        }
    }
    let mut rows: Vec<(u64, u64)> = seen.into_iter().collect();
    rows.sort_by_key(|&(_, state)| state);
    rows
}

fn check_partition(model: &SystemModel, out: &mut Findings) {
    let names = model.scheme.names();
    for (phi, state) in reachable_phi_rows(model) {
        let gamma = model.scheme.classify(phi);
        if gamma.count_ones() == 1 {
            continue;
        }
        let claimed: Vec<&str> = (0..names.len())
            .filter(|h| (gamma >> h) & 1 == 1)
            .map(|h| names[h].as_str())
            .collect();
        let claim = if claimed.is_empty() {
            "claimed by no segment".to_string()
        } else {
            format!(
                "claimed by {} segments: {}",
                claimed.len(),
                claimed.join(", ")
            )
        };
        out.error(
            "partition-violation",
            "segments",
            format!(
                "partition violation: witness {} is {claim}",
                model.describe_state(state)
            ),
        );
    }
}
