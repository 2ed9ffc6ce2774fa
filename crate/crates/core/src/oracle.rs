//! Independent cross-checks for the exact engine.
//!
//! - [`monte_carlo_w`] samples subsystem availability directly.
//! - [`lopa_frequency`] is the layer-of-protection product formula.
//! - [`eta_reference`] multiplies event-tree branch probabilities and is only
//!   valid when no subsystem is shared between functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{check_dimensions, phi_mask, ConsequenceFrequencies, PfdVector};
use crate::model::SystemModel;
use crate::summation::NeumaierSum;
use crate::Error;

/// Samples per deterministic sub-stream.
pub const MC_CHUNK: u64 = 1 << 16;

/// Largest function count accepted by [`eta_reference`].
pub const ETA_MAX_FUNCTIONS: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Estimated segment frequencies, events per year.
    pub w_hat: Vec<f64>,
    /// `w_HE * sqrt(q (1 - q) / N)` with `q` the sample proportion.
    pub stderr: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: u64,
    pub seed: u64,
}

impl McEstimate {
    /// `(w_hat - w) / stderr` per segment. When the sample proportion is 0 or
    /// 1 the standard error is taken from the exact proportion instead; if
    /// that is also zero the score is 0 for an exact match and infinite
    /// otherwise.
    pub fn z_scores(&self, exact: &ConsequenceFrequencies, hazard_frequency: f64) -> Vec<f64> {
        let n = self.n_samples as f64;
        self.w_hat
            .iter()
            .zip(&self.stderr)
            .zip(exact.as_slice())
            .map(|((&est, &se), &w)| {
                let diff = est - w;
                let se = if se > 0.0 {
                    se
                } else {
                    let q = (w / hazard_frequency).clamp(0.0, 1.0);
                    hazard_frequency * (q * (1.0 - q) / n).sqrt()
                };
                if se > 0.0 {
                    diff / se
                } else if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY.copysign(diff)
                }
            })
            .collect()
    }
}

/// Monte Carlo estimate of the consequence frequencies.
///
/// Uses ChaCha8. Samples are split into chunks of [`MC_CHUNK`]; chunk `c`
/// draws from the generator seeded with `seed` on stream `c`, so the result
/// depends only on `(seed, n_samples)`, not on thread scheduling.
pub fn monte_carlo_w(
    model: &SystemModel,
    p: &PfdVector,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate, Error> {
    if n_samples == 0 {
        return Err(Error::InvalidOption(
            "sample count must be at least 1".into(),
        ));
    }
    check_dimensions(model, p)?;
    let n = model.n();
    let masks = model.mapping.function_masks(model.m());
    let pfd = p.as_slice();
    let chunks = n_samples.div_ceil(MC_CHUNK);

    let per_chunk: Vec<Result<Vec<u64>, Error>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let size = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            let mut counts = vec![0u64; n];
            for _ in 0..size {
                let mut state = 0u64;
                for (j, &pj) in pfd.iter().enumerate() {
                    if rng.gen::<f64>() >= pj {
                        state |= 1 << j;
                    }
                }
                let gamma = model.scheme.classify(phi_mask(state, &masks));
                if gamma.count_ones() != 1 {
                    return Err(Error::PartitionViolation {
                        state: model.describe_state(state),
                        claimed: gamma.count_ones() as usize,
                    });
                }
                counts[gamma.trailing_zeros() as usize] += 1;
            }
            Ok(counts)
        })
        .collect();

    let mut counts = vec![0u64; n];
    for part in per_chunk {
        for (total, c) in counts.iter_mut().zip(part?) {
            *total += c;
        }
    }
    let w_he = model.hazard_frequency;
    let nf = n_samples as f64;
    let w_hat = counts.iter().map(|&c| w_he * c as f64 / nf).collect();
    let stderr = counts
        .iter()
        .map(|&c| {
            let q = c as f64 / nf;
            w_he * (q * (1.0 - q) / nf).sqrt()
        })
        .collect();
    Ok(McEstimate {
        w_hat,
        stderr,
        counts,
        n_samples,
        seed,
    })
}

/// Frequency of the hazardous event after independent protection layers:
/// `w_IE * (p_1 * p_2 * ... )`.
pub fn lopa_frequency(initiating_frequency: f64, layer_pfds: &[f64]) -> Result<f64, Error> {
    if !(initiating_frequency.is_finite() && initiating_frequency >= 0.0) {
        return Err(Error::InvalidOption(format!(
            "initiating event frequency must be non-negative, got {initiating_frequency}"
        )));
    }
    if let Some((i, &v)) = layer_pfds
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::ProbabilityOutOfRange {
            what: format!("PFD of layer {i}"),
            value: v,
        });
    }
    let product = layer_pfds.iter().fold(1.0, |acc, &v| acc * v);
    Ok(initiating_frequency * product)
}

/// Event-tree reference: each function is one branch point whose failure
/// probability is `1 - prod(1 - p_j)` over its subsystems. Only valid when
/// functions share no subsystem.
pub fn eta_reference(model: &SystemModel, p: &PfdVector) -> Result<ConsequenceFrequencies, Error> {
    check_dimensions(model, p)?;
    let m = model.m();
    if m > ETA_MAX_FUNCTIONS {
        return Err(Error::InvalidOption(format!(
            "event tree reference supports at most {ETA_MAX_FUNCTIONS} functions, model has {m}"
        )));
    }
    for (j, row) in model.mapping.rows().iter().enumerate() {
        let users: Vec<usize> = (0..m).filter(|&k| row[k]).collect();
        if users.len() > 1 {
            return Err(Error::EtaIndependenceViolated {
                subsystem: model.subsystems[j].name.clone(),
                first: model.functions[users[0]].name.clone(),
                second: model.functions[users[1]].name.clone(),
            });
        }
    }

    // Success and failure probability per function; failure via expm1 so
    // small PFDs do not cancel.
    let branches: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let subs = model.mapping.requirements(k);
            let works = subs.iter().fold(1.0, |acc, &j| acc * (1.0 - p.get(j)));
            let log_works: f64 = subs.iter().map(|&j| (-p.get(j)).ln_1p()).sum();
            (works, -log_works.exp_m1())
        })
        .collect();

    let mut acc = vec![NeumaierSum::new(); model.n()];
    for outcome in 0..(1u64 << m) {
        let branch = branches
            .iter()
            .enumerate()
            .fold(1.0, |prob, (k, &(works, fails))| {
                prob * if (outcome >> k) & 1 == 1 {
                    works
                } else {
                    fails
                }
            });
        let gamma = model.scheme.classify(outcome);
        if gamma.count_ones() != 1 {
            return Err(Error::PartitionViolation {
                state: format!("function outcome {outcome:#b}"),
                claimed: gamma.count_ones() as usize,
            });
        }
        acc[gamma.trailing_zeros() as usize].add(model.hazard_frequency * branch);
    }
    Ok(ConsequenceFrequencies(
        acc.iter().map(NeumaierSum::value).collect(),
    ))
}
