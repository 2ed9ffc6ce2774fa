//! Target PFD and SIL allocation for mitigation safety functions.
//!
//! A mitigation system is a set of independent subsystems, each available or
//! unavailable on demand, shared among several mitigation functions. Every
//! availability state of the subsystems leads, through the functions that
//! still work, to exactly one consequence segment. Summing state frequencies
//! per segment gives the estimated consequence frequencies, which are checked
//! against tolerable frequencies (per segment or as a severity-weighted
//! total). The allocation search then finds the largest target PFD for the
//! safety function's subsystems that keeps the risk tolerable.
//!
//! ```
//! use silalloc_core::{allocate, tunnel_model, AllocationOptions, SilBand};
//!
//! let model = tunnel_model();
//! let result = allocate(&model, &AllocationOptions::default()).unwrap();
//! assert_eq!(result.p_star_recommended, Some(4e-3));
//! assert_eq!(result.sil_pfd, Some(SilBand::Sil2));
//! ```

pub mod allocation;
pub mod document;
pub mod engine;
pub mod model;
pub mod oracle;
pub mod predicate;
pub mod summation;

use thiserror::Error;

pub use allocation::{
    allocate, instantiate_pfd, pfh_from_pfd, round_down_one_significant, sil_from_pfd,
    sil_from_pfh, AllocationOptions, AllocationResult, PfhTarget, SilBand, TraceEntry,
};
pub use document::{load_model, tunnel_model, LoadError, ModelDocument};
pub use engine::{
    consequence_frequencies, evaluate, function_states, risk_measures, state_frequency,
    ConsequenceFrequencies, Criterion, PfdVector, RiskReport, StateIndex,
};
pub use model::{
    validate, ConsequenceScheme, FunctionDef, MappingMatrix, PfdSpec, SegmentDef, SubsystemDef,
    SystemModel, ValidationReport, DEFAULT_ENUMERATION_CAP,
};
pub use oracle::{eta_reference, lopa_frequency, monte_carlo_w, McEstimate};
pub use predicate::{parse_predicate, EvalContext, Predicate, PredicateEnv, PredicateError};

#[derive(Debug, Error)]
pub enum Error {
    #[error("probability out of range: {what} = {value}")]
    ProbabilityOutOfRange { what: String, value: f64 },
    #[error("scaled PFD of subsystem `{subsystem}` would be {value}, above 1")]
    ScaledExceedsOne { subsystem: String, value: f64 },
    #[error("allocation needs at least one subsystem with a scaled PFD")]
    NoScaledSubsystem,
    #[error("{subsystems} subsystems exceed the enumeration cap of {cap}")]
    EnumerationCap { subsystems: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("collective criterion requires a severity on every segment")]
    CollectiveWithoutSeverities,
    #[error("partition violation: {state} is claimed by {claimed} segments")]
    PartitionViolation { state: String, claimed: usize },
    #[error("ETA independence violated: subsystem `{subsystem}` is shared by functions `{first}` and `{second}`")]
    EtaIndependenceViolated {
        subsystem: String,
        first: String,
        second: String,
    },
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
