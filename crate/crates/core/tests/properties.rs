mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use silalloc_core::engine::NORMALIZATION_TOLERANCE;
use silalloc_core::{
    consequence_frequencies, eta_reference, instantiate_pfd, lopa_frequency, monte_carlo_w,
    tunnel_model, validate, MappingMatrix, ModelDocument, PfdVector, SystemModel,
};

fn w_of(model: &SystemModel, p: &PfdVector) -> Vec<f64> {
    consequence_frequencies(model, p).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn generated_models_validate(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 8, 4, 4);
        let report = validate(&model);
        prop_assert!(report.is_ok(), "{}", report);
    }

    #[test]
    fn normalization(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 8, 4, 4);
        let p = random_pfds(&mut r, model.l());
        let total: f64 = w_of(&model, &p).iter().sum();
        prop_assert!((total - model.hazard_frequency).abs() <= NORMALIZATION_TOLERANCE * model.hazard_frequency);
    }

    #[test]
    fn matches_materialized_matrices(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 4, 4, 4);
        let p = random_pfds(&mut r, model.l());
        let engine = w_of(&model, &p);
        let brute = brute_force_w(&model, &p);
        for (a, b) in engine.iter().zip(&brute) {
            prop_assert!(close_rel(*a, *b, 1e-12), "{} vs {}", a, b);
        }
    }

    #[test]
    fn matches_event_tree_when_disjoint(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_disjoint_model(&mut r, 10, 4, 4);
        prop_assert!(validate(&model).is_ok());
        let p = random_pfds(&mut r, model.l());
        let engine = w_of(&model, &p);
        let eta = eta_reference(&model, &p).unwrap().0;
        for (a, b) in engine.iter().zip(&eta) {
            prop_assert!(close_rel(*a, *b, 1e-12), "{} vs {}", a, b);
        }
    }

    #[test]
    fn multilinear_in_each_pfd(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 8, 4, 4);
        let base = random_pfds(&mut r, model.l());
        let j = r.gen_range(0..model.l());
        let a = r.gen_range(0.0..0.5);
        let d = r.gen_range(0.0..0.25);
        let at = |v: f64| {
            let mut p = base.clone();
            p.set(j, v).unwrap();
            w_of(&model, &p)
        };
        let (w0, w1, w2) = (at(a), at(a + d), at(a + 2.0 * d));
        for h in 0..model.n() {
            let scale = w0[h].abs().max(w1[h].abs()).max(w2[h].abs()).max(1e-300);
            let second = (w0[h] - 2.0 * w1[h] + w2[h]).abs();
            prop_assert!(second <= 1e-12 * scale, "segment {}: {}", h, second / scale);
        }
    }

    #[test]
    fn subsystem_order_invariance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 8, 4, 4);
        let p = random_pfds(&mut r, model.l());
        // Reverse subsystem order consistently.
        let mut permuted = model.clone();
        permuted.subsystems.reverse();
        let mut rows = model.mapping.rows().to_vec();
        rows.reverse();
        permuted.mapping = MappingMatrix::from_rows(rows);
        let mut pv = p.as_slice().to_vec();
        pv.reverse();
        let pp = PfdVector::new(pv).unwrap();
        let a = w_of(&model, &p);
        let b = w_of(&permuted, &pp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(close_rel(*x, *y, 1e-13), "{} vs {}", x, y);
        }
    }

    #[test]
    fn conditioning_on_perfect_subsystem(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 8, 4, 4);
        let mut p = random_pfds(&mut r, model.l());
        let j = r.gen_range(0..model.l());
        let released = {
            let mut m = model.clone();
            let mut rows = m.mapping.rows().to_vec();
            rows[j].iter_mut().for_each(|b| *b = false);
            m.mapping = MappingMatrix::from_rows(rows);
            m
        };
        let expected = w_of(&released, &p);
        p.set(j, 0.0).unwrap();
        let got = w_of(&model, &p);
        for (x, y) in got.iter().zip(&expected) {
            prop_assert!(close_rel(*x, *y, 1e-12), "{} vs {}", x, y);
        }
    }

    #[test]
    fn document_round_trip_preserves_w(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_model(&mut r, 6, 4, 4);
        let text = ModelDocument::from_model(&model).to_json();
        let back = ModelDocument::from_json(&text).unwrap().to_model().unwrap();
        let p = random_pfds(&mut r, model.l());
        prop_assert_eq!(w_of(&model, &p), w_of(&back, &p));
    }
}

#[test]
fn catastrophic_is_monotone_in_every_pfd() {
    // Catastrophic = !ASE & !MSE & !EE, a conjunction of failures.
    let model = tunnel_model();
    let mut r = rng(5);
    for _ in 0..20 {
        let base = random_pfds(&mut r, model.l());
        let w0 = w_of(&model, &base)[0];
        for j in 0..model.l() {
            let mut p = base.clone();
            let bumped = (p.get(j) + r.gen_range(0.0..0.2)).min(1.0);
            p.set(j, bumped).unwrap();
            let w1 = w_of(&model, &p)[0];
            assert!(w1 >= w0 * (1.0 - 1e-14), "subsystem {j}: {w0} -> {w1}");
        }
    }
}

#[test]
fn lopa_chain_matches_engine_exactly() {
    let mut r = rng(17);
    for _ in 0..200 {
        let layers: Vec<f64> = (0..r.gen_range(1..=8))
            .map(|_| 10f64.powf(r.gen_range(-4.0..0.0)))
            .collect();
        let initiating = 10f64.powf(r.gen_range(-2.0..1.0));
        let (model, p) = serial_chain(initiating, &layers);
        assert!(validate(&model).is_ok());
        let w = w_of(&model, &p);
        assert_eq!(w[0], lopa_frequency(initiating, &layers).unwrap());
    }
}

#[test]
fn matrices_have_expected_shapes() {
    let model = tunnel_model();
    let p = instantiate_pfd(&model, 0.1).unwrap();
    let mats = materialize(&model, &p);
    assert_eq!(mats.psi.len(), 1024);
    assert_eq!(mats.phi[0].len(), 5);
    assert!(mats
        .gamma
        .iter()
        .all(|g| g.iter().map(|&x| x as u32).sum::<u32>() == 1));
    let brute = brute_force_w(&model, &p);
    let engine = w_of(&model, &p);
    for (a, b) in engine.iter().zip(&brute) {
        assert!(close_rel(*a, *b, 1e-12));
    }
}

#[test]
fn monte_carlo_error_shrinks_with_samples() {
    let model = tunnel_model();
    let p = instantiate_pfd(&model, 0.1).unwrap();
    let exact = w_of(&model, &p);
    let rms = |n: u64, seed: u64| {
        let est = monte_carlo_w(&model, &p, n, seed).unwrap();
        let sq: f64 = est
            .w_hat
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        sq.sqrt()
    };
    let seeds = [1u64, 2, 3];
    let small: f64 = seeds.iter().map(|&s| rms(2_000, s)).sum::<f64>() / 3.0;
    let large: f64 = seeds.iter().map(|&s| rms(200_000, s + 100)).sum::<f64>() / 3.0;
    let ratio = small / large;
    // Expected ratio is 10; allow wide statistical slack.
    assert!((3.0..=30.0).contains(&ratio), "ratio {ratio}");
}
