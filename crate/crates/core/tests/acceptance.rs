//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::time::{Duration, Instant};

use cbs_core::cbs::{cbs_expectation, estimate, interference_set, truncate, truncate_to, truncation_bound};
use cbs_core::cbs::{InterferenceSet, TransitionTable};
use cbs_core::grouping::{sorted_insertion, verify_grouping, Relation};
use cbs_core::sampling::{run_procedure_2, sample_basis, sample_bernoulli, ExperimentConfig};
use cbs_core::state::{ab_probabilities, basis_probabilities, expectation, ground_state};
use cbs_core::variance::{
    allocation_variance, cbs_exact_report, cbs_gradients, cbs_stream_variances, conventional_variance,
    importance_sampling_variance, optimal_allocation, shots_to_target, AllocationMode, MeasurementPlan,
    StreamLayout,
};
use cbs_core::{BasisLabel, Observable, PauliString, StateVector};
use common::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn full_support(psi: &StateVector) -> cbs_core::cbs::TruncationResult {
    let probs = basis_probabilities(psi);
    let r = probs.values().filter(|&&p| p > 0.0).count();
    truncate_to(&probs, r).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for seed in 0..120u64 {
        let n = 1 + (seed % 4) as usize;
        let o = random_observable(seed, n, 1 + (seed % 20) as usize);
        let psi = StateVector::random(n, 1000 + seed, false).unwrap();
        let t = full_support(&psi);
        let intf = interference_set(&psi, &t).unwrap();
        let est = cbs_expectation(&o, &t, &intf, true).unwrap();
        let exact = dense_expectation(&o, &psi);
        let rel = (est - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(if exact == 0.0 { (est - exact).abs() } else { rel });
        count += 1;
    }
    outcome(worst <= 1e-10, format!("{count} instances, worst relative error {worst:.2e}"))
}

fn truncation_bound_holds() -> Outcome {
    let mut violations = 0;
    let mut checks = 0;
    for seed in 0..100u64 {
        let n = 1 + (seed % 4) as usize;
        let o = random_observable(2000 + seed, n, 10);
        let psi = StateVector::random(n, 3000 + seed, false).unwrap();
        let exact = dense_expectation(&o, &psi);
        let probs = basis_probabilities(&psi);
        for r in 1..=psi.dim() {
            let t = truncate_to(&probs, r).unwrap();
            let psi_r = t.truncated_state(&psi).unwrap();
            let overlap: Complex64 = psi_r
                .amplitudes()
                .iter()
                .zip(psi.amplitudes())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let infidelity = (1.0 - overlap.norm_sqr()).max(0.0);
            let bound = 2.0 * spectral_norm(&o) * infidelity.sqrt();
            let gap = (exact - dense_expectation(&o, &psi_r)).abs();
            checks += 1;
            if gap > bound + 1e-12 {
                violations += 1;
            }
            // the library bound must agree with the dense-norm bound
            let lib = truncation_bound(&o, infidelity).unwrap();
            if (lib - bound).abs() > 1e-6 * (1.0 + bound) {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{checks} (instance, R) pairs, {violations} violations"))
}

fn gradient_correctness() -> Outcome {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for seed in 0..60u64 {
        let n = 1 + (seed % 3) as usize;
        let o = random_observable(4000 + seed, n, 8);
        let psi = StateVector::random(n, 5000 + seed, false).unwrap();
        let t = full_support(&psi);
        let intf = interference_set(&psi, &t).unwrap();
        let table = TransitionTable::new(&o, &t.labels).unwrap();
        let g = cbs_gradients(&table, &intf).unwrap();
        let (f, a, b) = (intf.weights().to_vec(), intf.a().to_vec(), intf.b().to_vec());
        let eval = |f: &[f64], a: &[f64], b: &[f64]| {
            estimate(&table, &InterferenceSet::from_measurements(f, a, b).unwrap(), false).unwrap()
        };
        let scale = g
            .d_f
            .iter()
            .chain(&g.d_a)
            .chain(&g.d_b)
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let mut check = |analytic: f64, fd: f64| {
            worst = worst.max((analytic - fd).abs() / analytic.abs().max(1e-3 * scale));
        };
        for k in 0..f.len() {
            let (mut up, mut dn) = (f.clone(), f.clone());
            up[k] += h;
            dn[k] -= h;
            check(g.d_f[k], (eval(&up, &a, &b) - eval(&dn, &a, &b)) / (2.0 * h));
        }
        for k in 0..a.len() {
            let (mut up, mut dn) = (a.clone(), a.clone());
            up[k] += h;
            dn[k] -= h;
            check(g.d_a[k], (eval(&f, &up, &b) - eval(&f, &dn, &b)) / (2.0 * h));
            let (mut up, mut dn) = (b.clone(), b.clone());
            up[k] += h;
            dn[k] -= h;
            check(g.d_b[k], (eval(&f, &a, &up) - eval(&f, &a, &dn)) / (2.0 * h));
        }
    }
    outcome(worst <= 1e-5, format!("60 instances, worst relative deviation {worst:.2e}"))
}

fn concentrated_state() -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let support: [(BasisLabel, f64); 5] = [(3, 0.55), (5, 0.2), (6, 0.12), (9, 0.08), (12, 0.05)];
    let mut amps = vec![Complex64::new(0.0, 0.0); 16];
    for (label, w) in support {
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        amps[label as usize] = Complex64::from_polar(w.sqrt(), phase);
    }
    StateVector::new(4, amps).unwrap()
}

fn variance_formula() -> Outcome {
    let o = random_observable(6000, 4, 20);
    let psi = concentrated_state();
    let cfg = ExperimentConfig {
        l_f: 10_000,
        replicas_m: 500,
        base_seed: 2024,
        ..Default::default()
    };
    let result = run_procedure_2(&o, &psi, &cfg).unwrap();

    let t = full_support(&psi);
    let intf = interference_set(&psi, &t).unwrap();
    let v = cbs_stream_variances(&TransitionTable::new(&o, &t.labels).unwrap(), &intf).unwrap();
    let l_f = cfg.l_f as f64;
    let shots: Vec<u64> = std::iter::once(cfg.l_f)
        .chain(v[1..].iter().map(|&vk| {
            if vk == 0.0 {
                0
            } else {
                ((l_f * (vk / v[0]).sqrt()).round() as u64).max(1)
            }
        }))
        .collect();
    let plan = MeasurementPlan::new(shots, StreamLayout::Cbs { r: t.r() }).unwrap();
    let analytic = allocation_variance(&v, &plan).unwrap();
    let empirical = result.sd * result.sd;
    let ratio = empirical / analytic;
    let e_r = dense_expectation(&o, &psi);
    let z = (result.mean - e_r).abs() / (result.sd / (result.energies().len() as f64).sqrt());
    outcome(
        (ratio - 1.0).abs() <= 0.15 && z <= 3.0 && result.failures == 0,
        format!(
            "empirical/analytic variance {ratio:.3}, mean offset {z:.2} sigma, {} failures",
            result.failures
        ),
    )
}

fn allocation_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut losses = 0;
    let mut vectors = 0;
    for _ in 0..25 {
        let len = rng.random_range(2..12);
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..10.0)).collect();
        let total = 1000u64;
        let best = allocation_variance(&v, &optimal_allocation(&v, total).unwrap()).unwrap();
        for _ in 0..100 {
            let weights: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
            let sum: f64 = weights.iter().sum();
            let mut shots: Vec<u64> = weights
                .iter()
                .map(|w| 1 + ((total - len as u64) as f64 * w / sum).floor() as u64)
                .collect();
            let spare = total - shots.iter().sum::<u64>();
            shots[0] += spare;
            let plan = MeasurementPlan::new(shots, StreamLayout::Generic).unwrap();
            if best > allocation_variance(&v, &plan).unwrap() * 1.01 {
                losses += 1;
            }
        }
        vectors += 1;
    }
    outcome(losses == 0, format!("{vectors} v-vectors x 100 random plans, {losses} beaten"))
}

/// Sample variance with the standard error of that estimate.
fn variance_with_error(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sq: Vec<f64> = x.iter().map(|v| (v - mean).powi(2)).collect();
    let var = sq.iter().sum::<f64>() / (n - 1.0);
    let spread = sq.iter().map(|s| (s - var).powi(2)).sum::<f64>() / (n - 1.0);
    (var, (spread / n).sqrt())
}

fn covariance_with_error(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let prod: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = prod.iter().sum::<f64>() / (n - 1.0);
    let spread = prod.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (n - 1.0);
    (cov, (spread / n).sqrt())
}

fn sampling_statistics() -> Outcome {
    let psi = concentrated_state();
    let labels: Vec<BasisLabel> = vec![3, 5, 6, 9];
    let l_f = 1000u64;
    let replicas = 10_000;
    let mut freqs = vec![Vec::with_capacity(replicas); labels.len()];
    for rep in 0..replicas as u64 {
        let counts = sample_basis(&psi, l_f, 90_000 + rep);
        for (k, label) in labels.iter().enumerate() {
            let c = counts.iter().find(|c| c.0 == *label).map_or(0, |c| c.1);
            freqs[k].push(c as f64 / l_f as f64);
        }
    }
    let mut worst = 0.0f64;
    for i in 0..labels.len() {
        let fi = psi.amplitude(labels[i]).norm_sqr();
        let (var, se) = variance_with_error(&freqs[i]);
        worst = worst.max((var - fi * (1.0 - fi) / l_f as f64).abs() / se);
        for j in i + 1..labels.len() {
            let fj = psi.amplitude(labels[j]).norm_sqr();
            let (cov, se) = covariance_with_error(&freqs[i], &freqs[j]);
            worst = worst.max((cov + fi * fj / l_f as f64).abs() / se);
        }
    }
    let l_a = 400u64;
    for &label in &labels[1..] {
        let (a, _) = ab_probabilities(&psi, labels[0], label).unwrap();
        let draws: Vec<f64> = (0..replicas as u64)
            .map(|rep| sample_bernoulli(a, l_a, 7_000_000 + rep * 31 + label).unwrap() as f64 / l_a as f64)
            .collect();
        let (var, se) = variance_with_error(&draws);
        worst = worst.max((var - a * (1.0 - a) / l_a as f64).abs() / se);
    }
    outcome(worst <= 3.0, format!("10^4 replicas, worst deviation {worst:.2} standard errors"))
}

fn letters_commute(a: char, b: char) -> bool {
    let (ma, mb) = (single(a), single(b));
    (&ma * &mb - &mb * &ma).norm() < 1e-12
}

fn grouping_soundness() -> Outcome {
    let mut failures = Vec::new();
    for seed in 0..200u64 {
        let n = 1 + (seed % 6) as usize;
        let o = random_observable(7000 + seed, n, 5 + (seed % 30) as usize);
        let mut counts = Vec::new();
        for rel in [Relation::Gc, Relation::Qwc, Relation::None] {
            let g = sorted_insertion(&o, rel);
            if !verify_grouping(&o, &g).valid {
                failures.push(format!("seed {seed} {rel} invalid"));
            }
            counts.push(g.len());
        }
        let m = o.terms().iter().filter(|t| !t.string.is_identity()).count();
        if !(counts[0] <= counts[1] && counts[1] <= counts[2] && counts[2] == m) {
            failures.push(format!("seed {seed} counts {counts:?}"));
        }
    }
    let mut pairs = 0;
    for n in 1..=3usize {
        let all = 1u64 << n;
        for xp in 0..all {
            for zp in 0..all {
                let p = PauliString::from_masks(n, xp, zp).unwrap();
                let pm = pauli_matrix(&p);
                for xq in 0..all {
                    for zq in 0..all {
                        let q = PauliString::from_masks(n, xq, zq).unwrap();
                        let qm = pauli_matrix(&q);
                        let gc = (&pm * &qm - &qm * &pm).norm() < 1e-12;
                        let qwc = (0..n).all(|s| letters_commute(p.letter(s).as_char(), q.letter(s).as_char()));
                        if p.generally_commutes(&q).unwrap() != gc || p.qubit_wise_commutes(&q).unwrap() != qwc {
                            failures.push(format!("{p} vs {q}"));
                        }
                        pairs += 1;
                    }
                }
            }
        }
    }
    let mut detail = format!("200 observables, {pairs} exhaustive pairs, {} failures", failures.len());
    if let Some(first) = failures.first() {
        detail.push_str(&format!(", first {first:?}"));
    }
    outcome(failures.is_empty(), detail)
}

/// Real observable: strings with an odd number of Y letters are dropped.
fn random_real_observable(seed: u64, n: usize, m: usize) -> Observable {
    let o = random_observable(seed, n, m);
    let keep: Vec<usize> = (0..o.len()).filter(|&i| o.terms()[i].string.y_count() % 2 == 0).collect();
    o.subset(&keep).unwrap()
}

/// Real state with amplitude magnitudes in [0.5, 1] before normalization.
fn bounded_real_state(n: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<f64> = (0..1usize << n)
        .map(|_| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * rng.random_range(0.5..1.0)
        })
        .collect();
    StateVector::from_real(n, &amps).unwrap()
}

fn importance_sampling() -> Outcome {
    let z = Observable::from_pairs(1, &[(1.0, "Z0")]).unwrap();
    let plus = StateVector::from_real(1, &[1.0, 1.0]).unwrap();
    let hand = importance_sampling_variance(&z, &plus).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let o = random_real_observable(8000 + seed, 3, 12);
        let psi = bounded_real_state(3, 8100 + seed);
        let closed = importance_sampling_variance(&o, &psi).unwrap();
        let dense = observable_matrix(&o);
        let amps: Vec<f64> = psi.amplitudes().iter().map(|a| a.re).collect();
        let probs: Vec<f64> = amps.iter().map(|a| a * a).collect();
        let cumulative: Vec<f64> = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8200 + seed);
        let draw = |rng: &mut ChaCha8Rng| {
            let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
            cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
        };
        let samples: Vec<Complex64> = (0..1_000_000)
            .map(|_| {
                let m = draw(&mut rng);
                let n = draw(&mut rng);
                dense[(m, n)] / (amps[m] * amps[n])
            })
            .collect();
        let count = samples.len() as f64;
        let mean: Complex64 = samples.iter().sum::<Complex64>() / count;
        let mc = samples.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (count - 1.0);
        worst = worst.max((mc - closed).abs() / closed);
    }
    outcome(
        hand == 2.0 && worst <= 0.10,
        format!("Z on |+> gives {hand}, worst Monte Carlo deviation {:.1}%", 100.0 * worst),
    )
}

fn table_rows() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, expected_r, expected_gap, tol) in [("h2", 2, 0.0, 5e-5), ("lih", 9, 2.4e-4, 1e-4)] {
        let h = fixture(name);
        let gs = ground_state(&h, 1e-10).unwrap();
        let t = truncate(&basis_probabilities(&gs.state), 1e-4).unwrap();
        let psi_r = t.truncated_state(&gs.state).unwrap();
        let gap = expectation(&h, &psi_r).unwrap() - gs.energy;
        let ok = t.r() == expected_r && (gap - expected_gap).abs() <= tol;
        pass &= ok;
        detail.push(format!("{name}: R={} dE={gap:.3e}", t.r()));
    }
    outcome(pass, detail.join(", "))
}

fn method_ordering() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in ["h2", "lih"] {
        let h = fixture(name);
        let psi = ground_state(&h, 1e-10).unwrap().state;
        let t = truncate(&basis_probabilities(&psi), 1e-4).unwrap();
        let intf = interference_set(&psi, &t).unwrap();
        let cbs = cbs_exact_report(&h, &t, &intf, 1_000_000).unwrap().c_v;
        let grouped = |rel| {
            conventional_variance(&h, &sorted_insertion(&h, rel), &psi, AllocationMode::Exact, 1_000_000)
                .unwrap()
                .c_v
        };
        let shots = [cbs, grouped(Relation::Qwc), grouped(Relation::None)].map(|c| shots_to_target(c, 1e-3).unwrap());
        pass &= shots[0] <= shots[1] && shots[1] <= shots[2];
        detail.push(format!("{name}: cbs {} qwc {} none {}", shots[0], shots[1], shots[2]));
    }
    outcome(pass, detail.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("oracle equivalence", oracle_equivalence, Duration::from_secs(10)),
        ("truncation bound", truncation_bound_holds, Duration::from_secs(30)),
        ("gradient correctness", gradient_correctness, Duration::from_secs(30)),
        ("variance formula", variance_formula, Duration::from_secs(300)),
        ("allocation optimality", allocation_optimality, Duration::from_secs(5)),
        ("sampling statistics", sampling_statistics, Duration::from_secs(120)),
        ("grouping soundness", grouping_soundness, Duration::from_secs(30)),
        ("importance sampling", importance_sampling, Duration::from_secs(60)),
        ("fixture truncation rows", table_rows, Duration::from_secs(120)),
        ("method ordering", method_ordering, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<24} {}  {} ({:.2}s of {}s)",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
