//! Table and machine (JSON) renderings of command results.

use std::fmt::Write;

use serde::Serialize;
use silalloc_core::engine::CollectiveRisk;
use silalloc_core::{
    AllocationResult, ConsequenceFrequencies, McEstimate, PfdSpec, PfdVector, RiskReport,
    SystemModel, ValidationReport,
};

/// Largest |z| accepted when comparing Monte Carlo with the exact result.
pub const Z_LIMIT: f64 = 4.0;

/// Scientific notation with `sig` significant figures and a signed
/// two-digit exponent, e.g. `2.40E-02`.
pub fn sci(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{:.*E}", sig.saturating_sub(1), x);
    let (mantissa, exp) = s.split_once('E').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}

fn sci3(x: f64) -> String {
    sci(x, 3)
}

fn pass_mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum PfdSource {
    Fixed,
    Scaled { weight: f64 },
    Override { replaced: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedPfd {
    pub name: String,
    pub pfd: f64,
    #[serde(flatten)]
    pub source: PfdSource,
}

/// Per-subsystem PFDs with their origin in the model.
pub fn provenance(model: &SystemModel, p: &PfdVector) -> Vec<ResolvedPfd> {
    model
        .subsystems
        .iter()
        .zip(p.as_slice())
        .map(|(sub, &pfd)| ResolvedPfd {
            name: sub.name.clone(),
            pfd,
            source: match sub.pfd {
                PfdSpec::Fixed(_) => PfdSource::Fixed,
                PfdSpec::Scaled(weight) => PfdSource::Scaled { weight },
            },
        })
        .collect()
}

fn field(out: &mut String, label: &str, value: String) {
    let _ = writeln!(out, "{:<27}{value}", format!("{label}:"));
}

fn name_width<'a>(names: impl Iterator<Item = &'a str>, min: usize) -> usize {
    names.map(str::len).max().unwrap_or(0).max(min)
}

fn model_header(out: &mut String, model: &SystemModel) {
    let _ = writeln!(
        out,
        "model: {} ({} subsystems, {} functions, {} segments)",
        model.name,
        model.l(),
        model.m(),
        model.n()
    );
    let _ = writeln!(
        out,
        "hazard event frequency: {} /yr",
        sci3(model.hazard_frequency)
    );
}

fn pfd_table(out: &mut String, title: &str, rows: &[ResolvedPfd]) {
    let width = name_width(rows.iter().map(|r| r.name.as_str()), 9);
    let _ = writeln!(out, "\n{title}");
    let _ = writeln!(out, "  {:<width$}  {:>9}  source", "subsystem", "PFD");
    for r in rows {
        let source = match r.source {
            PfdSource::Fixed => "fixed".to_string(),
            PfdSource::Scaled { weight } => format!("scaled {weight} x p"),
            PfdSource::Override { replaced } => format!("override (was {})", sci3(replaced)),
        };
        let _ = writeln!(out, "  {:<width$}  {:>9}  {source}", r.name, sci3(r.pfd));
    }
}

fn segment_table(out: &mut String, report: &RiskReport) {
    let width = name_width(report.per_segment.iter().map(|s| s.segment.as_str()), 7);
    let _ = writeln!(
        out,
        "  {:<width$}  {:>9}  {:>9}  {:>9}  result",
        "segment", "w (/yr)", "tolerance", "w/tol"
    );
    for s in &report.per_segment {
        let _ = writeln!(
            out,
            "  {:<width$}  {:>9}  {:>9}  {:>9}  {}",
            s.segment,
            sci3(s.frequency),
            sci3(s.tolerance),
            sci3(s.margin),
            pass_mark(s.pass)
        );
    }
    if let Some(c) = report.collective {
        let _ = writeln!(
            out,
            "  collective risk r = {}, tolerable r = {}  {}",
            sci3(c.risk),
            sci3(c.tolerable_risk),
            pass_mark(c.pass)
        );
    }
}

#[derive(Serialize)]
struct SegmentRow<'a> {
    name: &'a str,
    frequency: f64,
    tolerance: f64,
    margin: f64,
    pass: bool,
}

#[derive(Serialize)]
struct RiskSection<'a> {
    criterion: String,
    segments: Vec<SegmentRow<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collective: Option<CollectiveRisk>,
    binding_segment: &'a str,
    pass: bool,
}

impl<'a> RiskSection<'a> {
    fn new(report: &'a RiskReport) -> Self {
        Self {
            criterion: report.criterion.to_string(),
            segments: report
                .per_segment
                .iter()
                .map(|s| SegmentRow {
                    name: &s.segment,
                    frequency: s.frequency,
                    tolerance: s.tolerance,
                    margin: s.margin,
                    pass: s.pass,
                })
                .collect(),
            collective: report.collective,
            binding_segment: &report.per_segment[report.binding_segment()].segment,
            pass: report.overall_pass,
        }
    }
}

pub fn validation(model: &SystemModel, report: &ValidationReport, machine: bool) -> String {
    if machine {
        #[derive(Serialize)]
        struct Doc<'a> {
            command: &'static str,
            model: &'a str,
            report: &'a ValidationReport,
        }
        return json(&Doc {
            command: "validate",
            model: &model.name,
            report,
        });
    }
    let mut out = String::new();
    for f in &report.findings {
        let _ = writeln!(out, "{f}");
    }
    let _ = writeln!(
        out,
        "model {} is valid: {} subsystems, {} functions, {} segments, {} states",
        model.name,
        model.l(),
        model.m(),
        model.n(),
        1u64 << model.l()
    );
    out
}

pub struct Evaluation<'a> {
    pub model: &'a SystemModel,
    pub pfd_scalar: Option<f64>,
    pub pfds: &'a [ResolvedPfd],
    pub report: &'a RiskReport,
}

impl Evaluation<'_> {
    pub fn render(&self, machine: bool) -> String {
        if machine {
            #[derive(Serialize)]
            struct Doc<'a> {
                command: &'static str,
                model: &'a str,
                hazard_frequency_per_year: f64,
                pfd_scalar: Option<f64>,
                subsystems: &'a [ResolvedPfd],
                #[serde(flatten)]
                risk: RiskSection<'a>,
            }
            return json(&Doc {
                command: "evaluate",
                model: &self.model.name,
                hazard_frequency_per_year: self.model.hazard_frequency,
                pfd_scalar: self.pfd_scalar,
                subsystems: self.pfds,
                risk: RiskSection::new(self.report),
            });
        }
        let mut out = String::new();
        model_header(&mut out, self.model);
        if let Some(p) = self.pfd_scalar {
            let _ = writeln!(out, "target PFD p: {}", sci3(p));
        }
        pfd_table(&mut out, "subsystem PFDs", self.pfds);
        let _ = writeln!(
            out,
            "\nconsequence frequencies ({} criterion)",
            self.report.criterion
        );
        segment_table(&mut out, self.report);
        let binding = &self.report.per_segment[self.report.binding_segment()].segment;
        let _ = writeln!(out, "\nbinding segment: {binding}");
        let verdict = if self.report.overall_pass {
            "TOLERABLE"
        } else {
            "INTOLERABLE"
        };
        let _ = writeln!(out, "verdict: {verdict}");
        out
    }
}

pub struct Allocation<'a> {
    pub model: &'a SystemModel,
    pub result: &'a AllocationResult,
    pub pfds: &'a [ResolvedPfd],
    pub at_target: &'a RiskReport,
}

impl Allocation<'_> {
    pub fn render(&self, machine: bool) -> String {
        let r = self.result;
        if machine {
            #[derive(Serialize)]
            struct Doc<'a> {
                command: &'static str,
                model: &'a str,
                feasible: bool,
                bracket: (f64, f64),
                p_star_raw: Option<f64>,
                p_star_recommended: Option<f64>,
                sil: Option<String>,
                binding_segment: &'a str,
                pfh: Option<Pfh>,
                non_monotone: bool,
                subsystems: &'a [ResolvedPfd],
                at_target: RiskSection<'a>,
                notes: &'a [String],
                warnings: &'a [String],
                trace: &'a [silalloc_core::TraceEntry],
            }
            #[derive(Serialize)]
            struct Pfh {
                tau_hours: f64,
                pfh: f64,
                sil: String,
            }
            return json(&Doc {
                command: "allocate",
                model: &self.model.name,
                feasible: r.feasible,
                bracket: r.bracket,
                p_star_raw: r.p_star_raw,
                p_star_recommended: r.p_star_recommended,
                sil: r.sil_pfd.map(|s| s.to_string()),
                binding_segment: &r.binding_segment,
                pfh: r.pfh.map(|t| Pfh {
                    tau_hours: t.tau_hours,
                    pfh: t.pfh,
                    sil: t.sil.to_string(),
                }),
                non_monotone: r.non_monotone,
                subsystems: self.pfds,
                at_target: RiskSection::new(self.at_target),
                notes: &r.notes,
                warnings: &r.warnings,
                trace: &r.trace,
            });
        }
        let mut out = String::new();
        model_header(&mut out, self.model);
        let _ = writeln!(
            out,
            "criterion: {}; bracket [{}, {}]; {} evaluations",
            r.criterion,
            sci3(r.bracket.0),
            sci3(r.bracket.1),
            r.trace.len()
        );
        for w in &r.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out);
        if let (Some(raw), Some(rec)) = (r.p_star_raw, r.p_star_recommended) {
            field(&mut out, "raw threshold p*", sci3(raw));
            field(&mut out, "recommended target PFD", sci(rec, 1));
        }
        if let Some(sil) = r.sil_pfd {
            field(&mut out, "SIL (low demand)", sil.to_string());
        }
        if let Some(t) = r.pfh {
            field(
                &mut out,
                &format!("target PFH (tau {} h)", t.tau_hours),
                format!("{} /h, {} (high demand)", sci3(t.pfh), t.sil),
            );
        }
        field(&mut out, "binding segment", r.binding_segment.clone());
        if r.non_monotone {
            let _ = writeln!(out, "search: non-monotone response, grid fallback used");
        }
        for n in &r.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let title = if r.feasible {
            "PFDs at the recommended target"
        } else {
            "PFDs at the bracket bottom"
        };
        pfd_table(&mut out, title, self.pfds);
        let _ = writeln!(out);
        segment_table(&mut out, self.at_target);
        let verdict = if r.feasible { "FEASIBLE" } else { "INFEASIBLE" };
        let _ = writeln!(out, "\nverdict: {verdict}");
        out
    }
}

#[derive(Serialize)]
struct McRow<'a> {
    name: &'a str,
    count: u64,
    w_hat: f64,
    stderr: f64,
    exact: f64,
    z: f64,
}

pub struct Simulation<'a> {
    model: &'a SystemModel,
    pfd_scalar: Option<f64>,
    pfds: &'a [ResolvedPfd],
    estimate: &'a McEstimate,
    rows: Vec<McRow<'a>>,
    pub pass: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(
        model: &'a SystemModel,
        pfd_scalar: Option<f64>,
        pfds: &'a [ResolvedPfd],
        exact: &ConsequenceFrequencies,
        estimate: &'a McEstimate,
    ) -> Self {
        let z = estimate.z_scores(exact, model.hazard_frequency);
        let rows: Vec<McRow> = model
            .scheme
            .segments
            .iter()
            .enumerate()
            .map(|(h, seg)| McRow {
                name: &seg.name,
                count: estimate.counts[h],
                w_hat: estimate.w_hat[h],
                stderr: estimate.stderr[h],
                exact: exact.0[h],
                z: z[h],
            })
            .collect();
        let pass = rows.iter().all(|r| r.z.abs() <= Z_LIMIT);
        Self {
            model,
            pfd_scalar,
            pfds,
            estimate,
            rows,
            pass,
        }
    }

    pub fn render(&self, machine: bool) -> String {
        if machine {
            #[derive(Serialize)]
            struct Doc<'a> {
                command: &'static str,
                model: &'a str,
                pfd_scalar: Option<f64>,
                samples: u64,
                seed: u64,
                z_limit: f64,
                subsystems: &'a [ResolvedPfd],
                segments: &'a [McRow<'a>],
                pass: bool,
            }
            return json(&Doc {
                command: "simulate",
                model: &self.model.name,
                pfd_scalar: self.pfd_scalar,
                samples: self.estimate.n_samples,
                seed: self.estimate.seed,
                z_limit: Z_LIMIT,
                subsystems: self.pfds,
                segments: &self.rows,
                pass: self.pass,
            });
        }
        let mut out = String::new();
        model_header(&mut out, self.model);
        if let Some(p) = self.pfd_scalar {
            let _ = writeln!(out, "target PFD p: {}", sci3(p));
        }
        let _ = writeln!(
            out,
            "samples: {}; seed: {}",
            self.estimate.n_samples, self.estimate.seed
        );
        let width = name_width(self.rows.iter().map(|r| r.name), 7);
        let _ = writeln!(
            out,
            "\n  {:<width$}  {:>21}  {:>9}  {:>7}",
            "segment", "w_hat +/- stderr", "exact w", "z"
        );
        for r in &self.rows {
            let estimate = format!("{} +/- {}", sci3(r.w_hat), sci3(r.stderr));
            let _ = writeln!(
                out,
                "  {:<width$}  {:>21}  {:>9}  {:>+7.2}",
                r.name,
                estimate,
                sci3(r.exact),
                r.z
            );
        }
        let verdict = if self.pass {
            format!("CONSISTENT (all |z| <= {Z_LIMIT})")
        } else {
            format!("INCONSISTENT (some |z| > {Z_LIMIT})")
        };
        let _ = writeln!(out, "\nverdict: {verdict}");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_uses_two_digit_signed_exponent() {
        assert_eq!(sci(2.404e-2, 3), "2.40E-02");
        assert_eq!(sci(0.7, 3), "7.00E-01");
        assert_eq!(sci(4e-3, 1), "4E-03");
        assert_eq!(sci(12.0, 2), "1.2E+01");
        assert_eq!(sci(0.0, 3), "0.00E+00");
        assert_eq!(sci(9.999e-4, 3), "1.00E-03");
        assert_eq!(sci(4.795e-7, 2), "4.8E-07");
    }
}
