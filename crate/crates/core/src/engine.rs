//! Exact state-space evaluation.
//!
//! State index `i` encodes subsystem availability: bit `j` (0-based) set
//! means subsystem `j` is available. All `2^l` states are streamed; the
//! function rows and consequence assignments are recomputed per state and
//! never stored.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{ConsequenceScheme, MappingMatrix, SystemModel, MAX_SUBSYSTEMS};
use crate::summation::NeumaierSum;
use crate::Error;

/// Low bits of the state index varied inside one chunk.
const CHUNK_BITS: usize = 12;

/// Relative tolerance on `sum(w) == w_HE`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateIndex(pub u64);

impl StateIndex {
    pub fn all_available(l: usize) -> Self {
        StateIndex((1u64 << l) - 1)
    }

    #[inline]
    pub fn is_available(self, subsystem: usize) -> bool {
        (self.0 >> subsystem) & 1 == 1
    }

    /// Availability row, subsystem order.
    pub fn availability(self, l: usize) -> Vec<bool> {
        (0..l).map(|j| self.is_available(j)).collect()
    }

    pub fn from_availability(row: &[bool]) -> Self {
        StateIndex(crate::predicate::pack_bits(row))
    }
}

/// Per-subsystem unavailability, subsystem order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PfdVector(Vec<f64>);

impl PfdVector {
    pub fn new(values: Vec<f64>) -> Result<Self, Error> {
        if let Some((j, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::ProbabilityOutOfRange {
                what: format!("PFD of subsystem {j}"),
                value: v,
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(l: usize) -> Self {
        Self(vec![0.0; l])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub fn set(&mut self, j: usize, value: f64) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ProbabilityOutOfRange {
                what: format!("PFD of subsystem {j}"),
                value,
            });
        }
        self.0[j] = value;
        Ok(())
    }
}

/// Estimated frequency per consequence segment, events per year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConsequenceFrequencies(pub Vec<f64>);

impl ConsequenceFrequencies {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().copied().collect::<NeumaierSum>().value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// `w_h <= tolerance_h` for every segment.
    #[default]
    PerSegment,
    /// `sum(w_h c_h) <= sum(tolerance_h c_h)`.
    Collective,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::PerSegment => "per-segment",
            Criterion::Collective => "collective",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-segment" => Ok(Criterion::PerSegment),
            "collective" => Ok(Criterion::Collective),
            other => Err(Error::InvalidOption(format!(
                "unknown criterion `{other}` (expected per-segment or collective)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRisk {
    pub segment: String,
    pub frequency: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// `frequency / tolerance`.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveRisk {
    pub risk: f64,
    pub tolerable_risk: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub criterion: Criterion,
    pub w: ConsequenceFrequencies,
    pub per_segment: Vec<SegmentRisk>,
    pub collective: Option<CollectiveRisk>,
    pub overall_pass: bool,
}

impl RiskReport {
    /// Index of the segment with the largest margin; ties go to the more
    /// severe (earlier) segment.
    pub fn binding_segment(&self) -> usize {
        let mut best = 0;
        for (h, s) in self.per_segment.iter().enumerate() {
            if s.margin > self.per_segment[best].margin {
                best = h;
            }
        }
        best
    }
}

/// Function success row for a state, as a bit set over functions.
#[inline]
pub fn phi_mask(state: u64, function_masks: &[u64]) -> u64 {
    function_masks
        .iter()
        .enumerate()
        .fold(0u64, |acc, (k, &req)| {
            acc | (u64::from(state & req == req) << k)
        })
}

/// Success of each function in `state`: a function works iff every
/// subsystem it requires is available.
pub fn function_states(state: StateIndex, mapping: &MappingMatrix) -> Vec<bool> {
    let rows = mapping.rows();
    let m = rows.first().map_or(0, Vec::len);
    (0..m)
        .map(|k| {
            rows.iter()
                .enumerate()
                .all(|(j, row)| state.is_available(j) || !row[k])
        })
        .collect()
}

/// Frequency of the hazardous event coinciding with `state`.
pub fn state_frequency(state: StateIndex, p: &PfdVector, hazard_frequency: f64) -> f64 {
    p.as_slice()
        .iter()
        .enumerate()
        .fold(hazard_frequency, |acc, (j, &pj)| {
            acc * if state.is_available(j) { 1.0 - pj } else { pj }
        })
}

/// Products over subsystems `offset..offset+bits` for every sub-index.
fn partial_products(p: &[f64], offset: usize, bits: usize) -> Vec<f64> {
    (0..1usize << bits)
        .map(|s| {
            (0..bits).fold(1.0, |acc, b| {
                let pj = p[offset + b];
                acc * if (s >> b) & 1 == 1 { 1.0 - pj } else { pj }
            })
        })
        .collect()
}

/// Exact consequence-segment frequencies `w = omega^T Gamma`.
///
/// States are processed in fixed chunks of `2^12` consecutive indices; chunk
/// partial sums are combined in index order, so the result is the same
/// whether chunks run sequentially or on the rayon pool.
pub fn consequence_frequencies(
    model: &SystemModel,
    p: &PfdVector,
) -> Result<ConsequenceFrequencies, Error> {
    fold_states(model, p, true)
}

/// Same fold as [`consequence_frequencies`], single-threaded.
pub fn consequence_frequencies_sequential(
    model: &SystemModel,
    p: &PfdVector,
) -> Result<ConsequenceFrequencies, Error> {
    fold_states(model, p, false)
}

pub(crate) fn check_dimensions(model: &SystemModel, p: &PfdVector) -> Result<(), Error> {
    let l = model.l();
    let cap = model.enumeration_cap.min(MAX_SUBSYSTEMS);
    if l > cap {
        return Err(Error::EnumerationCap { subsystems: l, cap });
    }
    if p.len() != l {
        return Err(Error::Dimension(format!(
            "PFD vector has {} entries but the model has {l} subsystems",
            p.len()
        )));
    }
    if model.mapping.subsystem_count() != l
        || model.mapping.rows().iter().any(|r| r.len() != model.m())
    {
        return Err(Error::Dimension(
            "mapping matrix does not match model".into(),
        ));
    }
    Ok(())
}

fn fold_states(
    model: &SystemModel,
    p: &PfdVector,
    parallel: bool,
) -> Result<ConsequenceFrequencies, Error> {
    check_dimensions(model, p)?;
    let l = model.l();
    let n = model.n();
    let masks = model.mapping.function_masks(model.m());
    let low_bits = l.min(CHUNK_BITS);
    let high_bits = l - low_bits;
    let low = partial_products(p.as_slice(), 0, low_bits);
    let high = partial_products(p.as_slice(), low_bits, high_bits);
    let w_he = model.hazard_frequency;
    let scheme = &model.scheme;

    let chunk = |c: usize| -> Result<Vec<NeumaierSum>, Error> {
        let mut acc = vec![NeumaierSum::new(); n];
        let base = (c as u64) << low_bits;
        let hp = w_he * high[c];
        for (s, &lp) in low.iter().enumerate() {
            let state = base | s as u64;
            let gamma = scheme.classify(phi_mask(state, &masks));
            if gamma.count_ones() != 1 {
                return Err(Error::PartitionViolation {
                    state: model.describe_state(state),
                    claimed: gamma.count_ones() as usize,
                });
            }
            acc[gamma.trailing_zeros() as usize].add(hp * lp);
        }
        Ok(acc)
    };

    let chunks: Vec<Result<Vec<NeumaierSum>, Error>> = if parallel && high.len() > 1 {
        (0..high.len()).into_par_iter().map(chunk).collect()
    } else {
        (0..high.len()).map(chunk).collect()
    };

    let mut total = vec![NeumaierSum::new(); n];
    for part in chunks {
        for (t, c) in total.iter_mut().zip(part?) {
            t.merge(&c);
        }
    }
    Ok(ConsequenceFrequencies(
        total.iter().map(NeumaierSum::value).collect(),
    ))
}

/// Compare frequencies with tolerances. Comparisons are exact `<=`.
pub fn risk_measures(
    w: &ConsequenceFrequencies,
    scheme: &ConsequenceScheme,
    criterion: Criterion,
) -> Result<RiskReport, Error> {
    if w.0.len() != scheme.len() {
        return Err(Error::Dimension(format!(
            "{} frequencies for {} segments",
            w.0.len(),
            scheme.len()
        )));
    }
    if criterion == Criterion::Collective && !scheme.severities_present() {
        return Err(Error::CollectiveWithoutSeverities);
    }
    let per_segment: Vec<SegmentRisk> = scheme
        .segments
        .iter()
        .zip(&w.0)
        .map(|(seg, &wh)| SegmentRisk {
            segment: seg.name.clone(),
            frequency: wh,
            tolerance: seg.tolerance,
            pass: wh <= seg.tolerance,
            margin: wh / seg.tolerance,
        })
        .collect();
    let collective = scheme.severities_present().then(|| {
        let mut risk = NeumaierSum::new();
        let mut tolerable = NeumaierSum::new();
        for (seg, &wh) in scheme.segments.iter().zip(&w.0) {
            let c = seg.severity.unwrap_or_default();
            risk.add(wh * c);
            tolerable.add(seg.tolerance * c);
        }
        CollectiveRisk {
            risk: risk.value(),
            tolerable_risk: tolerable.value(),
            pass: risk.value() <= tolerable.value(),
        }
    });
    let overall_pass = match criterion {
        Criterion::PerSegment => per_segment.iter().all(|s| s.pass),
        Criterion::Collective => collective.is_some_and(|c| c.pass),
    };
    Ok(RiskReport {
        criterion,
        w: w.clone(),
        per_segment,
        collective,
        overall_pass,
    })
}

/// [`consequence_frequencies`] followed by [`risk_measures`].
pub fn evaluate(
    model: &SystemModel,
    p: &PfdVector,
    criterion: Criterion,
) -> Result<RiskReport, Error> {
    let w = consequence_frequencies(model, p)?;
    risk_measures(&w, &model.scheme, criterion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::instantiate_pfd;
    use crate::document::tunnel_model;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn function_states_examples() {
        let model = tunnel_model();
        let all = StateIndex::all_available(10);
        assert_eq!(function_states(all, &model.mapping), vec![true; 5]);

        let pcs = model.subsystem_index("PCS").unwrap();
        let only_pcs_down = StateIndex(all.0 & !(1 << pcs));
        assert_eq!(
            function_states(only_pcs_down, &model.mapping),
            vec![true, false, false, false, false]
        );

        let tvs = model.subsystem_index("TVS").unwrap();
        let only_tvs_down = StateIndex(all.0 & !(1 << tvs));
        assert_eq!(
            function_states(only_tvs_down, &model.mapping),
            vec![true, true, false, false, true]
        );
    }

    #[test]
    fn phi_mask_matches_function_states() {
        let model = tunnel_model();
        let masks = model.mapping.function_masks(5);
        for state in 0..1024u64 {
            let bools = function_states(StateIndex(state), &model.mapping);
            assert_eq!(phi_mask(state, &masks), crate::predicate::pack_bits(&bools));
        }
    }

    #[test]
    fn state_frequency_examples() {
        let p = PfdVector::new(vec![0.1]).unwrap();
        assert_eq!(state_frequency(StateIndex(0), &p, 1.0), 0.1);

        let model = tunnel_model();
        let zeros = PfdVector::zeros(10);
        assert_eq!(
            state_frequency(StateIndex::all_available(10), &zeros, 0.7),
            0.7
        );

        // 0.7 * prod(1 - p_j) at p = 0.1, evaluated by hand.
        let p = instantiate_pfd(&model, 0.1).unwrap();
        let all_up = 0.7 * 0.975 * 0.98 * 0.95 * 0.98 * 0.9 * 0.9993 * 0.96 * 0.965 * 0.98 * 0.8;
        let got = state_frequency(StateIndex::all_available(10), &p, 0.7);
        assert!(rel(got, all_up) < 1e-14);
        assert!((got - 0.4068).abs() < 5e-5);
    }

    #[test]
    fn state_frequencies_sum_to_hazard_frequency() {
        let model = tunnel_model();
        let p = instantiate_pfd(&model, 0.1).unwrap();
        let total: NeumaierSum = (0..1024)
            .map(|i| state_frequency(StateIndex(i), &p, 0.7))
            .collect();
        assert!(rel(total.value(), 0.7) < 1e-14);
    }

    #[test]
    fn tunnel_frequencies_at_case_study_points() {
        let model = tunnel_model();
        let w = consequence_frequencies(&model, &instantiate_pfd(&model, 0.1).unwrap()).unwrap();
        for (got, want) in w.0.iter().zip([2.4e-2, 1.03e-2, 2.92e-2, 6.36e-1]) {
            assert!(rel(*got, want) < 0.01, "{got} vs {want}");
        }
        assert_eq!(w.0[4], 0.0);

        let w = consequence_frequencies(&model, &instantiate_pfd(&model, 4e-3).unwrap()).unwrap();
        for (got, want) in w.0.iter().zip([9.75e-4, 8.34e-3, 2.01e-2, 6.71e-1]) {
            assert!(rel(*got, want) < 0.01, "{got} vs {want}");
        }
        assert_eq!(w.0[4], 0.0);
    }

    #[test]
    fn zero_pfd_puts_everything_in_minor() {
        let model = tunnel_model();
        let w = consequence_frequencies(&model, &PfdVector::zeros(10)).unwrap();
        assert_eq!(w.0, vec![0.0, 0.0, 0.0, 0.7, 0.0]);
    }

    #[test]
    fn parallel_and_sequential_are_bit_identical() {
        let mut model = tunnel_model();
        // 16 subsystems spans 16 chunks.
        for extra in 0..6 {
            model.subsystems.push(crate::model::SubsystemDef {
                name: format!("X{extra}"),
                pfd: crate::model::PfdSpec::Fixed(0.01 * (extra + 1) as f64),
            });
        }
        let mut rows = model.mapping.rows().to_vec();
        for extra in 0..6 {
            let mut row = vec![false; 5];
            row[extra % 5] = true;
            rows.push(row);
        }
        model.mapping = MappingMatrix::from_rows(rows);
        assert!(crate::model::validate(&model).is_ok());
        let p = instantiate_pfd(&model, 0.05).unwrap();
        let par = consequence_frequencies(&model, &p).unwrap();
        let seq = consequence_frequencies_sequential(&model, &p).unwrap();
        assert_eq!(
            par.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            seq.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert!(rel(par.total(), 0.7) <= NORMALIZATION_TOLERANCE);
    }

    #[test]
    fn risk_measures_examples() {
        let model = tunnel_model();
        let w = consequence_frequencies(&model, &instantiate_pfd(&model, 0.1).unwrap()).unwrap();
        let report = risk_measures(&w, &model.scheme, Criterion::PerSegment).unwrap();
        let fails: Vec<_> = report
            .per_segment
            .iter()
            .filter(|s| !s.pass)
            .map(|s| s.segment.as_str())
            .collect();
        assert_eq!(fails, ["Catastrophic", "Major"]);
        assert!(!report.overall_pass);
        assert!(report.collective.is_none());

        let w = consequence_frequencies(&model, &instantiate_pfd(&model, 4e-3).unwrap()).unwrap();
        let report = risk_measures(&w, &model.scheme, Criterion::PerSegment).unwrap();
        assert!(report.overall_pass);
        assert_eq!(report.binding_segment(), 0);

        assert!(matches!(
            risk_measures(&w, &model.scheme, Criterion::Collective),
            Err(Error::CollectiveWithoutSeverities)
        ));

        let mut unit = model.clone();
        for seg in &mut unit.scheme.segments {
            seg.severity = Some(1.0);
        }
        let report = risk_measures(&w, &unit.scheme, Criterion::Collective).unwrap();
        let c = report.collective.unwrap();
        assert!(rel(c.risk, 0.7) < 1e-12);
        assert!(rel(c.tolerable_risk, 11.111) < 1e-12);
        assert!(report.overall_pass);
    }

    #[test]
    fn exact_comparison_at_tolerance() {
        let model = tunnel_model();
        let mut w = ConsequenceFrequencies(vec![0.001, 0.0, 0.0, 0.699, 0.0]);
        let report = risk_measures(&w, &model.scheme, Criterion::PerSegment).unwrap();
        assert!(report.per_segment[0].pass);
        w.0[0] = f64::from_bits(0.001f64.to_bits() + 1);
        let report = risk_measures(&w, &model.scheme, Criterion::PerSegment).unwrap();
        assert!(!report.per_segment[0].pass);
    }

    #[test]
    fn enumeration_cap_enforced() {
        let mut model = tunnel_model();
        model.enumeration_cap = 9;
        let err = consequence_frequencies(&model, &PfdVector::zeros(10)).unwrap_err();
        assert!(matches!(
            err,
            Error::EnumerationCap {
                subsystems: 10,
                cap: 9
            }
        ));
    }

    #[test]
    fn unvalidated_partition_violation_surfaces() {
        let mut model = tunnel_model();
        model.scheme.segments[3].predicate = crate::predicate::Predicate::False;
        let err = consequence_frequencies(&model, &PfdVector::zeros(10)).unwrap_err();
        assert!(matches!(err, Error::PartitionViolation { claimed: 0, .. }));
    }

    #[test]
    fn pfd_vector_rejects_out_of_range() {
        assert!(PfdVector::new(vec![0.5, 1.5]).is_err());
        assert!(PfdVector::new(vec![f64::NAN]).is_err());
        let mut p = PfdVector::zeros(2);
        assert!(p.set(1, -0.1).is_err());
        p.set(1, 1.0).unwrap();
        assert_eq!(p.get(1), 1.0);
    }
}
