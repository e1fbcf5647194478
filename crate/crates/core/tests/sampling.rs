mod common;

use cbs_core::sampling::{run_procedure_1, run_procedure_2, run_procedure_3, sample_bernoulli, ExperimentConfig};
use cbs_core::state::{expectation, ground_state};
use cbs_core::variance::AllocationMode;
use cbs_core::StateVector;
use common::{fixture, random_observable};

#[test]
fn replicas_are_reproducible() {
    let o = random_observable(11, 2, 6);
    let psi = StateVector::random(2, 12, false).unwrap();
    let cfg = ExperimentConfig {
        l_f: 2000,
        replicas_m: 20,
        base_seed: 99,
        ..Default::default()
    };
    let a = run_procedure_2(&o, &psi, &cfg).unwrap();
    let b = run_procedure_2(&o, &psi, &cfg).unwrap();
    assert_eq!(a, b);
    let other = run_procedure_2(&o, &psi, &ExperimentConfig { base_seed: 100, ..cfg }).unwrap();
    assert_ne!(a.mean, other.mean);
}

#[test]
fn full_support_mean_is_unbiased() {
    let o = random_observable(21, 2, 8);
    let psi = StateVector::random(2, 22, false).unwrap();
    let cfg = ExperimentConfig {
        l_f: 200_000,
        epsilon_freq: 1e-9,
        replicas_m: 1000,
        base_seed: 5,
        ..Default::default()
    };
    let r = run_procedure_2(&o, &psi, &cfg).unwrap();
    let exact = expectation(&o, &psi).unwrap();
    let se = r.sd / (r.replicas.len() as f64).sqrt();
    assert!((r.mean - exact).abs() < 3.0 * se, "{} vs {exact} (se {se})", r.mean);
}

#[test]
fn binomial_mean_converges() {
    let draws: Vec<f64> = (0..2000).map(|s| sample_bernoulli(0.9, 10_000, s).unwrap() as f64 / 1e4).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let se = (0.9 * 0.1 / 1e4 / draws.len() as f64).sqrt();
    assert!((mean - 0.9).abs() < 3.0 * se);
}

#[test]
fn particle_filter_only_keeps_the_right_sector() {
    let h = fixture("h2");
    let psi = ground_state(&h, 1e-10).unwrap().state;
    let cfg = ExperimentConfig {
        l_f: 3000,
        replicas_m: 10,
        particle_filter: Some(2),
        ..Default::default()
    };
    let r = run_procedure_2(&h, &psi, &cfg).unwrap();
    assert!(r.replicas.iter().all(|x| x.r_tilde <= 2));
    let wrong = ExperimentConfig {
        particle_filter: Some(1),
        ..cfg
    };
    assert!(run_procedure_1(&h, &psi, &wrong, 1).is_err());
}

#[test]
fn sigma_one_is_invariant_under_doubling() {
    let o = random_observable(31, 3, 10);
    let psi = StateVector::random(3, 32, false).unwrap();
    let base = ExperimentConfig {
        l_f: 4000,
        epsilon_freq: 1e-9,
        replicas_m: 400,
        base_seed: 3,
        ..Default::default()
    };
    let one = run_procedure_2(&o, &psi, &base).unwrap();
    let two = run_procedure_2(&o, &psi, &ExperimentConfig { l_f: 8000, ..base }).unwrap();
    assert!((two.sigma_one / one.sigma_one - 1.0).abs() < 0.2);
    assert!(two.mean_shots > 1.9 * one.mean_shots);
}

#[test]
fn h2_bias_is_small() {
    let h = fixture("h2");
    let gs = ground_state(&h, 1e-10).unwrap();
    let cfg = ExperimentConfig {
        l_f: 10_000,
        replicas_m: 50,
        outer_m_prime: 3,
        allocation_mode: AllocationMode::HeuristicW,
        ..Default::default()
    };
    let s = run_procedure_3(&h, &gs.state, &cfg).unwrap();
    assert_eq!(s.mus.len(), 3);
    assert!(s.sd_mu.is_some());
    assert!((s.mean_mu - gs.energy).abs() < 1e-3);
}
