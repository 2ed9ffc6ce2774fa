//! Shared test fixtures: random models and a materialized-matrix oracle.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silalloc_core::{
    ConsequenceScheme, FunctionDef, MappingMatrix, PfdSpec, PfdVector, Predicate, SegmentDef,
    SubsystemDef, SystemModel, DEFAULT_ENUMERATION_CAP,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_formula(rng: &mut ChaCha8Rng, m: usize, depth: usize) -> Predicate {
    if depth == 0 || rng.gen_bool(0.35) {
        let lit = Predicate::Function(rng.gen_range(0..m));
        return if rng.gen_bool(0.5) {
            Predicate::not(lit)
        } else {
            lit
        };
    }
    let a = random_formula(rng, m, depth - 1);
    let b = random_formula(rng, m, depth - 1);
    match rng.gen_range(0..3) {
        0 => Predicate::and(a, b),
        1 => Predicate::or(a, b),
        _ => Predicate::not(Predicate::and(a, b)),
    }
}

/// Segment predicates forming a partition by construction: segment `h`
/// conjoins a random formula with the negation of every earlier segment, and
/// the last segment is the complement of all earlier ones.
pub fn random_scheme(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ConsequenceScheme {
    let mut segments = Vec::with_capacity(n);
    for h in 0..n {
        let earlier = (0..h).map(|r| Predicate::not(Predicate::Segment(r)));
        let predicate = if h + 1 == n {
            Predicate::all(earlier)
        } else {
            let own = random_formula(rng, m, 3);
            Predicate::all(std::iter::once(own).chain(earlier))
        };
        segments.push(SegmentDef {
            name: format!("S{h}"),
            tolerance: 10f64.powf(rng.gen_range(-4.0..1.0)),
            severity: Some(rng.gen_range(0.1..100.0)),
            predicate,
        });
    }
    ConsequenceScheme::new(segments)
}

fn model_from_parts(
    rng: &mut ChaCha8Rng,
    l: usize,
    m: usize,
    n: usize,
    requires: Vec<Vec<usize>>,
) -> SystemModel {
    SystemModel {
        name: "random".into(),
        subsystems: (0..l)
            .map(|j| SubsystemDef {
                name: format!("J{j}"),
                pfd: if rng.gen_bool(0.5) {
                    PfdSpec::Scaled(rng.gen_range(0.05..1.0))
                } else {
                    PfdSpec::Fixed(rng.gen_range(0.0..0.5))
                },
            })
            .collect(),
        functions: (0..m)
            .map(|k| FunctionDef {
                name: format!("K{k}"),
            })
            .collect(),
        mapping: MappingMatrix::from_requirements(l, m, &requires),
        hazard_frequency: 10f64.powf(rng.gen_range(-2.0..1.0)),
        scheme: random_scheme(rng, m, n),
        enumeration_cap: DEFAULT_ENUMERATION_CAP,
    }
}

/// Random model with arbitrary (possibly shared) requirements.
pub fn random_model(rng: &mut ChaCha8Rng, max_l: usize, max_m: usize, max_n: usize) -> SystemModel {
    let l = rng.gen_range(1..=max_l);
    let m = rng.gen_range(1..=max_m);
    let n = rng.gen_range(1..=max_n);
    let requires = (0..m)
        .map(|_| {
            let mut subs: Vec<usize> = (0..l).filter(|_| rng.gen_bool(0.4)).collect();
            if subs.is_empty() {
                subs.push(rng.gen_range(0..l));
            }
            subs
        })
        .collect();
    model_from_parts(rng, l, m, n, requires)
}

/// Random model in which no subsystem serves two functions.
pub fn random_disjoint_model(
    rng: &mut ChaCha8Rng,
    max_l: usize,
    max_m: usize,
    max_n: usize,
) -> SystemModel {
    let m = rng.gen_range(1..=max_m);
    let l = rng.gen_range(m..=max_l.max(m));
    let n = rng.gen_range(1..=max_n);
    let mut requires: Vec<Vec<usize>> = (0..m).map(|k| vec![k]).collect();
    for j in m..l {
        // Some subsystems stay unused.
        if rng.gen_bool(0.8) {
            requires[rng.gen_range(0..m)].push(j);
        }
    }
    model_from_parts(rng, l, m, n, requires)
}

/// Random PFD vector, occasionally hitting 0 and 1 exactly.
pub fn random_pfds(rng: &mut ChaCha8Rng, l: usize) -> PfdVector {
    let values = (0..l)
        .map(|_| match rng.gen_range(0..20) {
            0 => 0.0,
            1 => 1.0,
            _ => 10f64.powf(rng.gen_range(-5.0..0.0)),
        })
        .collect();
    PfdVector::new(values).unwrap()
}

/// Plain recursive interpreter, independent of `Predicate::eval`.
fn interpret(pred: &Predicate, phi: &[u8], gamma: &[u8]) -> u8 {
    match pred {
        Predicate::True => 1,
        Predicate::False => 0,
        Predicate::Function(k) => phi[*k],
        Predicate::Segment(h) => gamma[*h],
        Predicate::Not(a) => 1 - interpret(a, phi, gamma),
        Predicate::And(a, b) => interpret(a, phi, gamma) * interpret(b, phi, gamma),
        Predicate::Or(a, b) => interpret(a, phi, gamma).max(interpret(b, phi, gamma)),
    }
}

/// Materialized matrices for a model and PFD vector.
pub struct Matrices {
    pub psi: Vec<Vec<u8>>,
    pub phi: Vec<Vec<u8>>,
    pub gamma: Vec<Vec<u8>>,
    pub omega: Vec<f64>,
}

/// Build the full state, function-state and consequence matrices and the
/// state frequency vector, straight from the definitions.
pub fn materialize(model: &SystemModel, p: &PfdVector) -> Matrices {
    let l = model.l();
    let m = model.m();
    let f = model.mapping.rows();
    let rows = 1usize << l;
    let psi: Vec<Vec<u8>> = (0..rows)
        .map(|i| (0..l).map(|j| ((i >> j) & 1) as u8).collect())
        .collect();
    let phi: Vec<Vec<u8>> = psi
        .iter()
        .map(|row| {
            (0..m)
                .map(|k| {
                    (0..l)
                        .map(|j| row[j] | u8::from(!f[j][k]))
                        .fold(1u8, |acc, x| acc & x)
                })
                .collect()
        })
        .collect();
    let gamma: Vec<Vec<u8>> = phi
        .iter()
        .map(|row| {
            let mut g = Vec::with_capacity(model.n());
            for seg in &model.scheme.segments {
                let v = interpret(&seg.predicate, row, &g);
                g.push(v);
            }
            g
        })
        .collect();
    let omega: Vec<f64> = psi
        .iter()
        .map(|row| {
            let mut prod = model.hazard_frequency;
            for (&up, &pj) in row.iter().zip(p.as_slice()) {
                let up = f64::from(up);
                prod *= up * (1.0 - pj) + (1.0 - up) * pj;
            }
            prod
        })
        .collect();
    Matrices {
        psi,
        phi,
        gamma,
        omega,
    }
}

/// `w = omega^T Gamma` by explicit matrix product.
pub fn brute_force_w(model: &SystemModel, p: &PfdVector) -> Vec<f64> {
    let mats = materialize(model, p);
    (0..model.n())
        .map(|h| {
            mats.omega
                .iter()
                .zip(&mats.gamma)
                .map(|(w, g)| w * g[h] as f64)
                .sum()
        })
        .collect()
}

/// Serial preventive chain: one exclusive subsystem per layer, segment 0 is
/// "every layer failed".
pub fn serial_chain(initiating: f64, layer_pfds: &[f64]) -> (SystemModel, PfdVector) {
    let l = layer_pfds.len();
    let requires: Vec<Vec<usize>> = (0..l).map(|j| vec![j]).collect();
    let all_fail = Predicate::all((0..l).map(|k| Predicate::not(Predicate::Function(k))));
    let model = SystemModel {
        name: "chain".into(),
        subsystems: layer_pfds
            .iter()
            .enumerate()
            .map(|(j, &v)| SubsystemDef {
                name: format!("L{j}"),
                pfd: PfdSpec::Fixed(v),
            })
            .collect(),
        functions: (0..l)
            .map(|k| FunctionDef {
                name: format!("IPL{k}"),
            })
            .collect(),
        mapping: MappingMatrix::from_requirements(l, l, &requires),
        hazard_frequency: initiating,
        scheme: ConsequenceScheme::new(vec![
            SegmentDef {
                name: "HE".into(),
                tolerance: 1.0,
                severity: None,
                predicate: all_fail,
            },
            SegmentDef {
                name: "prevented".into(),
                tolerance: 1.0,
                severity: None,
                predicate: Predicate::not(Predicate::Segment(0)),
            },
        ]),
        enumeration_cap: DEFAULT_ENUMERATION_CAP,
    };
    (model, PfdVector::new(layer_pfds.to_vec()).unwrap())
}

/// `|a - b| <= tol * max(|a|, |b|)`; two zeros agree.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
