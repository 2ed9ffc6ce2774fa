//! Target PFD search and SIL banding.
//!
//! Scaled subsystems share the allocation target `p` through fixed weights
//! (`pfd_j = weight_j * p`). [`allocate`] looks for the largest `p` at which
//! the risk criterion still holds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{evaluate, Criterion, PfdVector, RiskReport};
use crate::model::{PfdSpec, SystemModel};
use crate::Error;

/// Interior points probed before bisection to catch non-monotone criteria.
const SPOT_CHECKS: usize = 6;

/// `PFH * tau` above this makes the `2 PFD / tau` conversion questionable.
pub const PFH_TAU_WARNING: f64 = 0.1;

/// Resolve the per-subsystem PFD vector for allocation target `p`.
pub fn instantiate_pfd(model: &SystemModel, p: f64) -> Result<PfdVector, Error> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange {
            what: "target PFD".into(),
            value: p,
        });
    }
    let mut values = Vec::with_capacity(model.l());
    for sub in &model.subsystems {
        let v = match sub.pfd {
            PfdSpec::Fixed(v) => v,
            PfdSpec::Scaled(weight) => {
                let v = weight * p;
                if v > 1.0 {
                    return Err(Error::ScaledExceedsOne {
                        subsystem: sub.name.clone(),
                        value: v,
                    });
                }
                v
            }
        };
        values.push(v);
    }
    PfdVector::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SilBand {
    BelowSil1,
    Sil1,
    Sil2,
    Sil3,
    Sil4,
    BeyondSil4,
}

impl fmt::Display for SilBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SilBand::BelowSil1 => "none (below SIL1)",
            SilBand::Sil1 => "SIL1",
            SilBand::Sil2 => "SIL2",
            SilBand::Sil3 => "SIL3",
            SilBand::Sil4 => "SIL4",
            SilBand::BeyondSil4 => "beyond SIL4",
        })
    }
}

const PFD_BOUNDS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
const PFH_BOUNDS: [f64; 5] = [1e-5, 1e-6, 1e-7, 1e-8, 1e-9];

// Half-open decades: bounds[i + 1] <= value < bounds[i] is band i + 1.
fn band(value: f64, bounds: &[f64; 5]) -> SilBand {
    const BANDS: [SilBand; 6] = [
        SilBand::BelowSil1,
        SilBand::Sil1,
        SilBand::Sil2,
        SilBand::Sil3,
        SilBand::Sil4,
        SilBand::BeyondSil4,
    ];
    let idx = bounds.iter().position(|&b| value >= b).unwrap_or(5);
    BANDS[idx]
}

/// Low-demand band: SIL1 is `[1e-2, 1e-1)`, SIL4 is `[1e-5, 1e-4)`.
pub fn sil_from_pfd(pfd: f64) -> Result<SilBand, Error> {
    if !(pfd > 0.0 && pfd <= 1.0) {
        return Err(Error::ProbabilityOutOfRange {
            what: "PFD for SIL banding (must be in (0, 1])".into(),
            value: pfd,
        });
    }
    Ok(band(pfd, &PFD_BOUNDS))
}

/// High-demand band: SIL1 is `[1e-6, 1e-5)` per hour, SIL4 is `[1e-9, 1e-8)`.
pub fn sil_from_pfh(pfh: f64) -> Result<SilBand, Error> {
    if !(pfh.is_finite() && pfh > 0.0) {
        return Err(Error::InvalidOption(format!(
            "PFH must be positive, got {pfh}"
        )));
    }
    Ok(band(pfh, &PFH_BOUNDS))
}

/// Target PFH from target PFD and proof-test interval `tau` (hours).
pub fn pfh_from_pfd(pfd: f64, tau_hours: f64) -> Result<f64, Error> {
    if !(tau_hours.is_finite() && tau_hours > 0.0) {
        return Err(Error::InvalidOption(format!(
            "proof test interval must be positive, got {tau_hours}"
        )));
    }
    if !(0.0..=1.0).contains(&pfd) {
        return Err(Error::ProbabilityOutOfRange {
            what: "PFD".into(),
            value: pfd,
        });
    }
    Ok(2.0 * pfd / tau_hours)
}

// Nearest double to d * 10^e.
fn decimal(d: f64, e: i32) -> f64 {
    if e >= 0 {
        d * 10f64.powi(e)
    } else {
        d / 10f64.powi(-e)
    }
}

/// Round down to one significant decimal digit (4.1e-3 becomes 4e-3).
pub fn round_down_one_significant(x: f64) -> f64 {
    if !(x.is_finite() && x > 0.0) {
        return x;
    }
    let mut exp = x.log10().floor() as i32;
    if decimal(1.0, exp) > x {
        exp -= 1;
    } else if decimal(1.0, exp + 1) <= x {
        exp += 1;
    }
    let digit = (1..=9)
        .rev()
        .find(|&d| decimal(d as f64, exp) <= x)
        .unwrap_or(1);
    decimal(digit as f64, exp)
}

/// Descending one-significant-figure values inside `[lo, hi]`.
pub fn descending_grid(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut exp = hi.log10().floor() as i32 + 1;
    let stop = lo.log10().floor() as i32 - 1;
    while exp >= stop {
        for d in (1..=9).rev() {
            let v = decimal(d as f64, exp);
            if v >= lo && v <= hi {
                out.push(v);
            }
        }
        exp -= 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationOptions {
    pub criterion: Criterion,
    /// Search interval for the target PFD.
    pub bracket: (f64, f64),
    /// Stop once `hi / lo - 1 <= tolerance`.
    pub tolerance: f64,
    /// Proof-test interval in hours; enables the PFH conversion.
    pub tau_hours: Option<f64>,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        Self {
            criterion: Criterion::PerSegment,
            bracket: (1e-6, 1e-1),
            tolerance: 0.01,
            tau_hours: None,
        }
    }
}

impl AllocationOptions {
    pub fn check(&self) -> Result<(), Error> {
        let (lo, hi) = self.bracket;
        if !(lo > 0.0 && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidOption(format!(
                "bracket must satisfy 0 < lo < hi <= 1, got ({lo}, {hi})"
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 0.5) {
            return Err(Error::InvalidOption(format!(
                "tolerance must be in (0, 0.5), got {}",
                self.tolerance
            )));
        }
        if let Some(tau) = self.tau_hours {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::InvalidOption(format!(
                    "proof test interval must be positive, got {tau}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub p: f64,
    pub w: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfhTarget {
    pub tau_hours: f64,
    pub pfh: f64,
    pub sil: SilBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub criterion: Criterion,
    pub feasible: bool,
    /// Bracket actually searched (the top may have been lowered).
    pub bracket: (f64, f64),
    /// Largest passing value found by the search.
    pub p_star_raw: Option<f64>,
    /// `p_star_raw` rounded down to one significant figure.
    pub p_star_recommended: Option<f64>,
    /// Resolved PFDs at the recommended target, or at the bracket bottom when
    /// infeasible.
    pub resolved_pfds: PfdVector,
    /// Segment with the largest `w / tolerance` at the raw threshold (at the
    /// bracket bottom when infeasible).
    pub binding_segment: String,
    pub sil_pfd: Option<SilBand>,
    pub pfh: Option<PfhTarget>,
    /// Search fell back to the grid scan.
    pub non_monotone: bool,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
    pub trace: Vec<TraceEntry>,
}

/// Outcome of the one-dimensional threshold search.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Threshold {
    /// The bracket top already passes.
    AtTop(f64),
    /// The bracket bottom fails.
    Infeasible,
    Found {
        raw: f64,
        recommended: f64,
        non_monotone: bool,
        /// Grid fallback found no passing value; `raw` is the bracket bottom.
        grid_exhausted: bool,
    },
}

/// Every recorded pass lies below every recorded failure.
fn is_monotone(evaluated: &[(f64, bool)]) -> bool {
    let lowest_fail = evaluated
        .iter()
        .filter(|(_, pass)| !pass)
        .map(|&(p, _)| p)
        .fold(f64::INFINITY, f64::min);
    evaluated.iter().all(|&(p, pass)| !pass || p < lowest_fail)
}

/// Largest passing value in `[lo, hi]`, assuming (and spot-checking) that the
/// pass predicate is true below some threshold and false above it. Bisection
/// runs on `log10(p)`; a detected violation switches to a descending scan of
/// one-significant-figure values.
pub(crate) fn threshold_search(
    mut pass: impl FnMut(f64) -> Result<bool, Error>,
    lo: f64,
    hi: f64,
    tolerance: f64,
) -> Result<Threshold, Error> {
    let mut seen: Vec<(f64, bool)> = Vec::new();
    let mut probe = |p: f64, seen: &mut Vec<(f64, bool)>| -> Result<bool, Error> {
        let ok = pass(p)?;
        seen.push((p, ok));
        Ok(ok)
    };

    if probe(hi, &mut seen)? {
        return Ok(Threshold::AtTop(hi));
    }
    if !probe(lo, &mut seen)? {
        return Ok(Threshold::Infeasible);
    }

    let (mut a, mut b) = (lo, hi);
    let (log_lo, log_hi) = (lo.log10(), hi.log10());
    for i in 1..=SPOT_CHECKS {
        let p = 10f64.powf(log_lo + (log_hi - log_lo) * i as f64 / (SPOT_CHECKS + 1) as f64);
        if probe(p, &mut seen)? {
            a = a.max(p);
        } else {
            b = b.min(p);
        }
    }
    if a < b {
        while b / a - 1.0 > tolerance {
            let mid = (a * b).sqrt();
            if probe(mid, &mut seen)? {
                a = mid;
            } else {
                b = mid;
            }
        }
    }
    let recommended = round_down_one_significant(a);
    if recommended != a {
        probe(recommended, &mut seen)?;
    }
    if is_monotone(&seen) {
        return Ok(Threshold::Found {
            raw: a,
            recommended,
            non_monotone: false,
            grid_exhausted: false,
        });
    }

    for g in descending_grid(lo, hi) {
        if probe(g, &mut seen)? {
            return Ok(Threshold::Found {
                raw: g,
                recommended: g,
                non_monotone: true,
                grid_exhausted: false,
            });
        }
    }
    Ok(Threshold::Found {
        raw: lo,
        recommended: lo,
        non_monotone: true,
        grid_exhausted: true,
    })
}

/// Search for the largest target PFD meeting the criterion.
pub fn allocate(model: &SystemModel, opts: &AllocationOptions) -> Result<AllocationResult, Error> {
    opts.check()?;
    if opts.criterion == Criterion::Collective && !model.scheme.severities_present() {
        return Err(Error::CollectiveWithoutSeverities);
    }
    let max_weight = model
        .subsystems
        .iter()
        .filter_map(|s| match s.pfd {
            PfdSpec::Scaled(w) => Some(w),
            PfdSpec::Fixed(_) => None,
        })
        .fold(f64::NAN, f64::max);
    if max_weight.is_nan() {
        return Err(Error::NoScaledSubsystem);
    }

    let mut warnings = Vec::new();
    let mut notes = Vec::new();
    let (lo, mut hi) = opts.bracket;
    if max_weight * hi > 1.0 {
        let top = 1.0 / max_weight;
        warnings.push(format!(
            "bracket top {hi} would push a scaled PFD above 1; searching up to {top} instead"
        ));
        hi = top;
        if hi <= lo {
            return Err(Error::InvalidOption(format!(
                "bracket collapses: largest admissible target {hi} is not above {lo}"
            )));
        }
    }

    let mut trace = Vec::new();
    let mut eval = |p: f64| -> Result<RiskReport, Error> {
        let report = evaluate(model, &instantiate_pfd(model, p)?, opts.criterion)?;
        trace.push(TraceEntry {
            p,
            w: report.w.0.clone(),
            pass: report.overall_pass,
        });
        Ok(report)
    };
    let outcome = threshold_search(|p| Ok(eval(p)?.overall_pass), lo, hi, opts.tolerance)?;

    let (raw, recommended, non_monotone) = match outcome {
        Threshold::AtTop(top) => {
            notes.push(format!(
                "criterion already met at the bracket top p = {top}; no reduction needed"
            ));
            (top, round_down_one_significant(top), false)
        }
        Threshold::Infeasible => {
            let report = eval(lo)?;
            let binding = &report.per_segment[report.binding_segment()];
            notes.push(format!(
                "infeasible: criterion fails even at p = {lo}; segment {} has w = {:e} against tolerance {:e}",
                binding.segment, binding.frequency, binding.tolerance
            ));
            let binding_segment = binding.segment.clone();
            return Ok(AllocationResult {
                criterion: opts.criterion,
                feasible: false,
                bracket: (lo, hi),
                p_star_raw: None,
                p_star_recommended: None,
                resolved_pfds: instantiate_pfd(model, lo)?,
                binding_segment,
                sil_pfd: None,
                pfh: None,
                non_monotone: false,
                notes,
                warnings,
                trace,
            });
        }
        Threshold::Found {
            raw,
            recommended,
            non_monotone,
            grid_exhausted,
        } => {
            if non_monotone {
                warnings.push(
                    "criterion is not monotone in the target PFD; result taken from a descending grid scan"
                        .into(),
                );
            }
            if grid_exhausted {
                warnings.push(format!(
                    "no grid value passed; reporting the bracket bottom {lo}"
                ));
            }
            (raw, recommended, non_monotone)
        }
    };

    let raw_report = eval(raw)?;
    let binding_segment = raw_report.per_segment[raw_report.binding_segment()]
        .segment
        .clone();
    let sil_pfd = sil_from_pfd(recommended)?;
    let pfh = match opts.tau_hours {
        Some(tau) => {
            let pfh = pfh_from_pfd(recommended, tau)?;
            if pfh * tau > PFH_TAU_WARNING {
                warnings.push(format!(
                    "PFH x tau = {:.3} is not small; the 2 PFD / tau conversion is approximate",
                    pfh * tau
                ));
            }
            Some(PfhTarget {
                tau_hours: tau,
                pfh,
                sil: sil_from_pfh(pfh)?,
            })
        }
        None => None,
    };

    Ok(AllocationResult {
        criterion: opts.criterion,
        feasible: true,
        bracket: (lo, hi),
        p_star_raw: Some(raw),
        p_star_recommended: Some(recommended),
        resolved_pfds: instantiate_pfd(model, recommended)?,
        binding_segment,
        sil_pfd: Some(sil_pfd),
        pfh,
        non_monotone,
        notes,
        warnings,
        trace,
    })
}
