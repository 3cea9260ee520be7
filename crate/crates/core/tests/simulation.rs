use lfqkd::rates::{coherent_memory_stats, key_rate_single_click, RANDOM_ASSIGNMENT_ERROR};
use lfqkd::sim::{
    compare_to_analytic, double_click_offset_bounds, empirical_stats, run_trials, BatchSummary,
    Scenario, Tally,
};
use lfqkd::{AdversaryStrategy, DetectionStats, SourceModel};

fn within_sigmas(observed: f64, expected: f64, n: u64, k: f64) -> bool {
    let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
    (observed - expected).abs() <= k * sigma
}

/// Exact sifted single-click rate and single-click error rate of the
/// simulated coherent receiver, summing the Poisson photon-number tree:
/// k detected photons give a single click when all pick one detector, and
/// an error when all pick the wrong one.
fn coherent_outcome_tree(mu: f64, eta: f64, e_d: f64) -> (f64, f64) {
    let lambda = eta * mu;
    let mut pk = (-lambda).exp();
    let (mut q, mut err) = (0.0, 0.0);
    for k in 1..200 {
        pk *= lambda / k as f64;
        q += pk * ((1.0 - e_d).powi(k) + e_d.powi(k));
        err += pk * e_d.powi(k);
    }
    (q, err / q)
}

#[test]
fn honest_single_photon_matches_outcome_tree() {
    let m = SourceModel::single_photon(0.7, 0.03).unwrap();
    let b = run_trials(&m, AdversaryStrategy::None, 1_000_000, 2024).unwrap();
    let emp = empirical_stats(&b);
    assert!(within_sigmas(emp.stats.q_s.value(), 0.7, b.n_pulses(), 3.0));
    assert!(within_sigmas(
        emp.stats.e_s.value(),
        0.03,
        b.n_single(),
        3.0
    ));
    assert_eq!(b.n_double(), 0);
}

#[test]
fn honest_coherent_matches_poisson_tree() {
    for (mu, eta, e_d) in [(0.5, 1.0, 0.0), (0.5, 0.6, 0.03), (0.8, 0.9, 0.1)] {
        let m = SourceModel::coherent(mu, eta, e_d).unwrap();
        let b = run_trials(&m, AdversaryStrategy::None, 1_000_000, 77).unwrap();
        let emp = empirical_stats(&b);
        let (q, e) = coherent_outcome_tree(mu, eta, e_d);
        assert!(
            within_sigmas(emp.stats.q_s.value(), q, b.n_pulses(), 3.0),
            "{mu} {eta} {e_d}: {} vs {q}",
            emp.stats.q_s.value()
        );
        assert!(
            within_sigmas(emp.stats.e_s.value(), e, b.n_single(), 3.0),
            "{mu} {eta} {e_d}: {} vs {e}",
            emp.stats.e_s.value()
        );
    }
}

#[test]
fn poisson_tree_stays_within_offset_bounds() {
    for mu in [0.1, 0.5, 1.0] {
        for eta in [0.2, 0.6, 1.0] {
            for e_d in [0.0, 0.03, 0.1, 0.3] {
                let m = SourceModel::coherent(mu, eta, e_d).unwrap();
                let (q_exact, e_exact) = coherent_outcome_tree(mu, eta, e_d);
                let (q_off, e_off) = double_click_offset_bounds(&m);
                let q_analytic = 1.0 - (-eta * mu).exp();
                assert!((q_exact - q_analytic).abs() <= q_off + 1e-15);
                assert!((e_exact - e_d).abs() <= e_off + 1e-15);
            }
        }
    }
}

#[test]
fn coherent_without_error_has_no_double_clicks() {
    let m = SourceModel::coherent(0.5, 1.0, 0.0).unwrap();
    let b = run_trials(&m, AdversaryStrategy::None, 1_000_000, 5).unwrap();
    assert_eq!(b.n_double(), 0);
    let emp = empirical_stats(&b);
    assert!(within_sigmas(
        emp.stats.q_s.value(),
        1.0 - (-0.5f64).exp(),
        b.n_pulses(),
        3.0
    ));
    assert!(compare_to_analytic(&m, &b).unwrap().pass);
}

#[test]
fn memory_trigger_single_photon_fraction() {
    let m = SourceModel::coherent_memory(0.5, 0.01, 0.8, 0.02).unwrap();
    let b = run_trials(&m, AdversaryStrategy::None, 400_000, 9).unwrap();
    let (_, terms) = coherent_memory_stats(&m.params()).unwrap();
    let t = b.sifted.merge(&b.unsifted);
    let frac = t.n_single_photon as f64 / t.n_pulses as f64;
    assert!(
        within_sigmas(frac, terms.p_1.value(), t.n_pulses, 3.0),
        "{frac}"
    );
    let emp = empirical_stats(&b);
    assert!(within_sigmas(emp.stats.q_s.value(), 0.8, b.n_pulses(), 3.0));
}

#[test]
fn same_seed_same_batch() {
    let m = SourceModel::coherent(0.5, 0.7, 0.02).unwrap();
    for adv in [
        AdversaryStrategy::None,
        AdversaryStrategy::ExtremeTimeShift,
        AdversaryStrategy::StrongPulse { n_photons: 20 },
    ] {
        let a = run_trials(&m, adv, 200_000, 31).unwrap();
        let b = run_trials(&m, adv, 200_000, 31).unwrap();
        assert_eq!(a, b);
        let c = run_trials(&m, adv, 200_000, 32).unwrap();
        assert_ne!(a.sifted, c.sifted);
    }
}

#[test]
fn batch_independent_of_thread_count() {
    let m = SourceModel::single_photon(0.8, 0.05).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_trials(&m, AdversaryStrategy::None, 300_001, 4).unwrap())
    };
    assert_eq!(run(1), run(4));
}

fn two_proportion_z(a: u64, n_a: u64, b: u64, n_b: u64) -> f64 {
    let pa = a as f64 / n_a as f64;
    let pb = b as f64 / n_b as f64;
    let pooled = (a + b) as f64 / (n_a + n_b) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    if se == 0.0 {
        0.0
    } else {
        (pa - pb) / se
    }
}

#[test]
fn sifting_does_not_change_click_statistics() {
    let models = [
        SourceModel::single_photon(0.65, 0.04).unwrap(),
        SourceModel::coherent_memory(0.5, 0.01, 0.75, 0.04).unwrap(),
    ];
    for m in models {
        let b = run_trials(&m, AdversaryStrategy::None, 1_000_000, 12).unwrap();
        let (s, u) = (&b.sifted, &b.unsifted);
        let z_single = two_proportion_z(s.n_single, s.n_pulses, u.n_single, u.n_pulses);
        let z_none = two_proportion_z(s.n_none, s.n_pulses, u.n_none, u.n_pulses);
        assert!(z_single.abs() < 3.0, "{}: {z_single}", m.tag());
        assert!(z_none.abs() < 3.0, "{}: {z_none}", m.tag());
        assert_eq!(s.n_double + u.n_double, 0);
    }
}

#[test]
fn overall_error_rate_reconstructs_from_single_click_stats() {
    for m in [
        SourceModel::single_photon(0.6, 0.05).unwrap(),
        SourceModel::coherent(0.5, 0.8, 0.05).unwrap(),
    ] {
        let b = run_trials(&m, AdversaryStrategy::None, 1_000_000, 21).unwrap();
        let t: &Tally = &b.sifted;
        let emp = empirical_stats(&b).stats;
        let q = emp.q_s.value();
        let reconstructed = emp.e_s.value() * q + 0.5 * (1.0 - q);
        // Only the random assignments add noise to the difference.
        let n_random = (t.n_none + t.n_double) as f64;
        let sigma = (0.25 * n_random).sqrt() / t.n_pulses as f64;
        assert!(
            (t.overall_error_rate() - reconstructed).abs() <= 4.0 * sigma,
            "{}: {} vs {reconstructed}",
            m.tag(),
            t.overall_error_rate()
        );
    }
}

#[test]
fn conventional_error_rate_equals_single_click_rate_without_doubles() {
    let m = SourceModel::single_photon(0.7, 0.05).unwrap();
    let b = run_trials(&m, AdversaryStrategy::None, 100_000, 1).unwrap();
    let emp = empirical_stats(&b).stats;
    assert_eq!(b.sifted.conventional_error_rate(), emp.e_s.value());
}

#[test]
fn time_shift_attack_halves_single_clicks() {
    let m = SourceModel::single_photon(0.9, 0.0).unwrap();
    let b = run_trials(&m, AdversaryStrategy::ExtremeTimeShift, 200_000, 3).unwrap();
    let emp = empirical_stats(&b).stats;
    assert!(within_sigmas(emp.q_s.value(), 0.5, b.n_pulses(), 3.0));
    assert_eq!(emp.e_s.value(), 0.0);
    assert_eq!(b.n_double(), 0);
    // At the expected statistics the rate is exactly zero; sampling noise
    // in Q_s can only lift it to the rate at Q_s = 1/2 + 3 sigma.
    let at_mean = key_rate_single_click(
        DetectionStats::new(0.5, 0.0).unwrap(),
        RANDOM_ASSIGNMENT_ERROR,
    );
    assert_eq!(at_mean.rate, 0.0);
    let noise_q = 0.5 + 3.0 * (0.25 / b.n_pulses() as f64).sqrt();
    let noise = key_rate_single_click(
        DetectionStats::new(noise_q, 0.0).unwrap(),
        RANDOM_ASSIGNMENT_ERROR,
    );
    assert!(key_rate_single_click(emp, RANDOM_ASSIGNMENT_ERROR).rate <= noise.rate);
}

#[test]
fn strong_pulse_attack_forces_double_clicks() {
    let m = SourceModel::single_photon(0.9, 0.0).unwrap();
    let b = run_trials(
        &m,
        AdversaryStrategy::StrongPulse { n_photons: 20 },
        200_000,
        3,
    )
    .unwrap();
    let emp = empirical_stats(&b).stats;
    let expected = 0.5 + 0.5f64.powi(20);
    assert!(within_sigmas(emp.q_s.value(), expected, b.n_pulses(), 3.0));
    assert!(key_rate_single_click(emp, RANDOM_ASSIGNMENT_ERROR).rate <= 0.0);
    // The conventional scheme keeps the double clicks and sees a high error rate.
    assert!(b.sifted.conventional_error_rate() > 0.2);
}

#[test]
fn weak_strong_pulse_leaves_single_clicks() {
    // With two photons half of the off-basis resends still single-click.
    let m = SourceModel::single_photon(1.0, 0.0).unwrap();
    let b = run_trials(
        &m,
        AdversaryStrategy::StrongPulse { n_photons: 2 },
        400_000,
        8,
    )
    .unwrap();
    let emp = empirical_stats(&b).stats;
    assert!(within_sigmas(emp.q_s.value(), 0.75, b.n_pulses(), 3.0));
    // Errors come from uniform bits in off-basis single clicks: (1/4 * 1/2) / (3/4).
    assert!(within_sigmas(emp.e_s.value(), 1.0 / 6.0, b.n_single(), 3.0));
}

#[test]
fn summary_json_has_exact_fields() {
    let m = SourceModel::single_photon(1.0, 0.0).unwrap();
    let b = run_trials(&m, AdversaryStrategy::None, 1000, 42).unwrap();
    let s = BatchSummary::from_batch(&b);
    assert_eq!(s.scenario, Scenario::Honest);
    assert_eq!((s.q_s, s.e_s, s.rate), (1.0, 0.0, 1.0));
    let v: serde_json::Value = serde_json::to_value(&s).unwrap();
    let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    let mut expected = vec![
        "scenario",
        "model",
        "n_pulses",
        "seed",
        "n_single",
        "n_double",
        "n_none",
        "n_single_errors",
        "q_s",
        "e_s",
        "rate",
    ];
    expected.sort();
    assert_eq!(keys, expected);
    assert_eq!(v["scenario"], "honest");
    assert_eq!(v["model"], "single-photon");
    let back: BatchSummary = serde_json::from_value(v).unwrap();
    assert_eq!(back, s);
}
