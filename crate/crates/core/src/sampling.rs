//! Finite-shot emulation of the truncated estimator.
//!
//! One replica samples the basis `l_f` times, keeps the most frequent labels
//! until the cumulative relative frequency exceeds `1 - epsilon_freq`,
//! allocates interference shots from the true state (or the heuristic
//! reference), draws binomial `A_r`/`B_r` outcomes and assembles the
//! normalized estimate. Replicas are repeated and summarized, and the whole
//! summary can itself be repeated.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cbs::{estimate, InterferenceSet, TransitionTable};
use crate::error::{Error, Result};
use crate::pauli::Observable;
use crate::state::{ab_probabilities, StateVector, PRUNE_THRESHOLD};
use crate::variance::{cbs_stream_variances, heuristic_quantities, AllocationMode, DEFAULT_W};
use crate::BasisLabel;

pub const DEFAULT_EPSILON_FREQ: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Shots spent on sampling the computational basis.
    pub l_f: u64,
    /// Cumulative-frequency threshold for choosing the retained labels.
    pub epsilon_freq: f64,
    /// Replicas per summary.
    pub replicas_m: usize,
    /// Number of repeated summaries.
    pub outer_m_prime: usize,
    pub base_seed: u64,
    /// `Exact` or `HeuristicW` (with reference weight `w`) or `Uniform`.
    pub allocation_mode: AllocationMode,
    pub w: f64,
    /// Keep only basis outcomes with this many set bits.
    pub particle_filter: Option<u32>,
    pub normalize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            l_f: 10_000,
            epsilon_freq: DEFAULT_EPSILON_FREQ,
            replicas_m: 100,
            outer_m_prime: 1,
            base_seed: 0,
            allocation_mode: AllocationMode::Exact,
            w: DEFAULT_W,
            particle_filter: None,
            normalize: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_f == 0 || self.replicas_m == 0 || self.outer_m_prime == 0 {
            return Err(Error::Domain("shot and replica counts must be at least 1".into()));
        }
        if !(self.epsilon_freq > 0.0 && self.epsilon_freq < 1.0) {
            return Err(Error::Domain(format!("epsilon_freq = {} outside (0, 1)", self.epsilon_freq)));
        }
        if self.allocation_mode == AllocationMode::Haar {
            return Err(Error::Domain("haar allocation applies to grouped estimators only".into()));
        }
        if self.allocation_mode == AllocationMode::HeuristicW && !(self.w > 0.0 && self.w < 1.0) {
            return Err(Error::Domain(format!("w = {} outside (0, 1)", self.w)));
        }
        Ok(())
    }
}

/// Seed of replica `replica` in summary `outer`, mixed from the base seed.
pub fn replica_seed(base_seed: u64, outer: u64, replica: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let golden = 0x9e37_79b9_7f4a_7c15u64;
    let a = mix(base_seed.wrapping_add(golden));
    let b = mix(a ^ outer.wrapping_add(golden).wrapping_mul(golden));
    mix(b ^ replica.wrapping_add(golden.rotate_left(17)))
}

/// Support of `|psi|^2` prepared for repeated multinomial draws.
#[derive(Debug, Clone)]
pub struct BasisSampler {
    labels: Vec<BasisLabel>,
    probs: Vec<f64>,
}

impl BasisSampler {
    pub fn new(psi: &StateVector) -> Self {
        let (labels, probs) = psi
            .amplitudes()
            .iter()
            .enumerate()
            .filter_map(|(l, a)| {
                let p = a.norm_sqr();
                (p > PRUNE_THRESHOLD).then_some((l as BasisLabel, p))
            })
            .unzip();
        Self { labels, probs }
    }

    /// Multinomial counts as a sequence of conditional binomials.
    pub fn sample(&self, shots: u64, rng: &mut ChaCha8Rng) -> Vec<(BasisLabel, u64)> {
        let mut left = shots;
        let mut mass: f64 = self.probs.iter().sum();
        let mut counts = Vec::new();
        for (i, (&label, &p)) in self.labels.iter().zip(&self.probs).enumerate() {
            if left == 0 {
                break;
            }
            let k = if i + 1 == self.labels.len() {
                left
            } else {
                binomial(left, (p / mass).clamp(0.0, 1.0), rng)
            };
            if k > 0 {
                counts.push((label, k));
            }
            left -= k;
            mass -= p;
        }
        counts
    }
}

fn binomial(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p checked in range").sample(rng)
}

/// Label counts from `l_f` measurements of `psi` in the computational basis.
pub fn sample_basis(psi: &StateVector, l_f: u64, seed: u64) -> Vec<(BasisLabel, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BasisSampler::new(psi).sample(l_f, &mut rng)
}

/// Number of successes in `shots` Bernoulli trials.
pub fn sample_bernoulli(p: f64, shots: u64, seed: u64) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(binomial(shots, p, &mut rng))
}

/// Most frequent labels (ties by ascending label) until the cumulative
/// relative frequency exceeds `1 - epsilon`.
pub fn select_frequent(counts: &[(BasisLabel, u64)], epsilon: f64) -> Vec<(BasisLabel, u64)> {
    let total: u64 = counts.iter().map(|c| c.1).sum();
    let mut ranked: Vec<(BasisLabel, u64)> = counts.iter().copied().filter(|c| c.1 > 0).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut acc = 0u64;
    let mut keep = ranked.len();
    for (i, c) in ranked.iter().enumerate() {
        acc += c.1;
        if acc as f64 / total as f64 > 1.0 - epsilon {
            keep = i + 1;
            break;
        }
    }
    ranked.truncate(keep);
    ranked
}

/// Result of a single pass of the measurement pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replica {
    pub seed: u64,
    pub r_tilde: usize,
    pub energy: f64,
    pub total_shots: u64,
}

/// Shared, state-dependent inputs of every replica.
struct Pipeline<'a> {
    o: &'a Observable,
    psi: &'a StateVector,
    sampler: BasisSampler,
    cfg: &'a ExperimentConfig,
}

impl Pipeline<'_> {
    fn interference_shots(&self, table: &TransitionTable, labels: &[BasisLabel]) -> Result<Vec<u64>> {
        let r = labels.len();
        if r < 2 {
            return Ok(Vec::new());
        }
        let v = match self.cfg.allocation_mode {
            AllocationMode::Uniform => return Ok(vec![self.cfg.l_f; 2 * (r - 1)]),
            AllocationMode::HeuristicW => cbs_stream_variances(table, &heuristic_quantities(r, self.cfg.w)?)?,
            _ => {
                let weights: Vec<f64> = labels.iter().map(|&l| self.psi.amplitude(l).norm_sqr()).collect();
                let mut a = Vec::with_capacity(r - 1);
                let mut b = Vec::with_capacity(r - 1);
                for &l in &labels[1..] {
                    let (ai, bi) = ab_probabilities(self.psi, labels[0], l)?;
                    a.push(ai);
                    b.push(bi);
                }
                cbs_stream_variances(table, &InterferenceSet::from_measurements(&weights, &a, &b)?)?
            }
        };
        let l_f = self.cfg.l_f as f64;
        Ok(v[1..]
            .iter()
            .map(|&vk| {
                if vk == 0.0 {
                    0
                } else if v[0] == 0.0 {
                    self.cfg.l_f
                } else {
                    ((l_f * (vk / v[0]).sqrt()).round() as u64).max(1)
                }
            })
            .collect())
    }

    fn run(&self, seed: u64) -> Result<Replica> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = self.sampler.sample(self.cfg.l_f, &mut rng);
        if let Some(n) = self.cfg.particle_filter {
            counts.retain(|c| c.0.count_ones() == n);
        }
        if counts.is_empty() {
            return Err(Error::EmptySupport);
        }
        let kept_total: u64 = counts.iter().map(|c| c.1).sum();
        let selected = select_frequent(&counts, self.cfg.epsilon_freq);
        let labels: Vec<BasisLabel> = selected.iter().map(|c| c.0).collect();
        let f: Vec<f64> = selected.iter().map(|c| c.1 as f64 / kept_total as f64).collect();
        let table = TransitionTable::new(self.o, &labels)?;
        let shots = self.interference_shots(&table, &labels)?;

        let mut a = Vec::with_capacity(labels.len().saturating_sub(1));
        let mut b = Vec::with_capacity(labels.len().saturating_sub(1));
        for (k, &l) in labels.iter().enumerate().skip(1) {
            let (pa, pb) = ab_probabilities(self.psi, labels[0], l)?;
            let (la, lb) = (shots[2 * (k - 1)], shots[2 * (k - 1) + 1]);
            // An unmeasured stream contributes no interference.
            let neutral = 0.5 * (f[0] + f[k]);
            a.push(if la == 0 { neutral } else { binomial(la, pa, &mut rng) as f64 / la as f64 });
            b.push(if lb == 0 { neutral } else { binomial(lb, pb, &mut rng) as f64 / lb as f64 });
        }
        let intf = InterferenceSet::from_measurements(&f, &a, &b)?;
        let energy = estimate(&table, &intf, self.cfg.normalize)?;
        Ok(Replica {
            seed,
            r_tilde: labels.len(),
            energy,
            total_shots: self.cfg.l_f + shots.iter().sum::<u64>(),
        })
    }
}

/// One replica with the given seed.
pub fn run_procedure_1(o: &Observable, psi: &StateVector, cfg: &ExperimentConfig, seed: u64) -> Result<Replica> {
    cfg.validate()?;
    check_dims(o, psi)?;
    Pipeline {
        o,
        psi,
        sampler: BasisSampler::new(psi),
        cfg,
    }
    .run(seed)
}

fn check_dims(o: &Observable, psi: &StateVector) -> Result<()> {
    if o.n_qubits() != psi.n_qubits() {
        return Err(Error::Dimension {
            expected: o.n_qubits(),
            found: psi.n_qubits(),
        });
    }
    Ok(())
}

/// Summary of `M` replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub replicas: Vec<Replica>,
    /// Replicas that produced no estimate.
    pub failures: usize,
    pub mean: f64,
    /// Unbiased standard deviation of the replica energies.
    pub sd: f64,
    pub mean_shots: f64,
    /// `sd * sqrt(mean_shots)`, the single-shot standard deviation.
    pub sigma_one: f64,
}

impl ExperimentResult {
    pub fn energies(&self) -> Vec<f64> {
        self.replicas.iter().map(|r| r.energy).collect()
    }

    /// One successful replica per row: `seed,r_tilde,energy,total_shots`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,r_tilde,energy,total_shots\n");
        for r in &self.replicas {
            let _ = writeln!(out, "{},{},{:.17e},{}", r.seed, r.r_tilde, r.energy, r.total_shots);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "replicas": self.replicas.len(),
            "failures": self.failures,
            "mean": self.mean,
            "sd": self.sd,
            "mean_shots": self.mean_shots,
            "sigma_one": self.sigma_one,
        })
        .to_string()
    }
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(o: &Observable, psi: &StateVector, cfg: &ExperimentConfig, outer: u64) -> Result<ExperimentResult> {
    if cfg.replicas_m < 2 {
        return Err(Error::Domain("at least two replicas are needed for a standard deviation".into()));
    }
    let pipeline = Pipeline {
        o,
        psi,
        sampler: BasisSampler::new(psi),
        cfg,
    };
    let outcomes: Vec<Result<Replica>> = (0..cfg.replicas_m as u64)
        .into_par_iter()
        .map(|i| pipeline.run(replica_seed(cfg.base_seed, outer, i)))
        .collect();
    let mut replicas = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for outcome in outcomes {
        match outcome {
            Ok(r) => replicas.push(r),
            Err(Error::IllConditioned { .. } | Error::EmptySupport | Error::DegenerateAnchor(_)) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    if replicas.len() < 2 {
        return Err(Error::Domain(format!(
            "only {} of {} replicas succeeded",
            replicas.len(),
            cfg.replicas_m
        )));
    }
    let energies: Vec<f64> = replicas.iter().map(|r| r.energy).collect();
    let (mean, sd) = mean_sd(&energies);
    let mean_shots = replicas.iter().map(|r| r.total_shots as f64).sum::<f64>() / replicas.len() as f64;
    Ok(ExperimentResult {
        replicas,
        failures,
        mean,
        sd,
        mean_shots,
        sigma_one: sd * mean_shots.sqrt(),
    })
}

/// `M` replicas seeded from `cfg.base_seed`.
pub fn run_procedure_2(o: &Observable, psi: &StateVector, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    check_dims(o, psi)?;
    summarize(o, psi, cfg, 0)
}

/// Statistics over `M'` repeated summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterSummary {
    pub mus: Vec<f64>,
    pub sigma_ones: Vec<f64>,
    pub mean_mu: f64,
    /// `None` when `M' = 1`.
    pub sd_mu: Option<f64>,
    pub mean_sigma_one: f64,
    pub sd_sigma_one: Option<f64>,
    pub failures: usize,
}

impl OuterSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serialization is infallible")
    }

    /// One summary per row: `outer,mu,sigma_one`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("outer,mu,sigma_one\n");
        for (i, (mu, s)) in self.mus.iter().zip(&self.sigma_ones).enumerate() {
            let _ = writeln!(out, "{i},{mu:.17e},{s:.17e}");
        }
        out
    }
}

pub fn run_procedure_3(o: &Observable, psi: &StateVector, cfg: &ExperimentConfig) -> Result<OuterSummary> {
    cfg.validate()?;
    check_dims(o, psi)?;
    let mut mus = Vec::with_capacity(cfg.outer_m_prime);
    let mut sigma_ones = Vec::with_capacity(cfg.outer_m_prime);
    let mut failures = 0;
    for outer in 0..cfg.outer_m_prime as u64 {
        let r = summarize(o, psi, cfg, outer)?;
        mus.push(r.mean);
        sigma_ones.push(r.sigma_one);
        failures += r.failures;
    }
    let stats = |x: &[f64]| {
        if x.len() < 2 {
            (x[0], None)
        } else {
            let (m, s) = mean_sd(x);
            (m, Some(s))
        }
    };
    let (mean_mu, sd_mu) = stats(&mus);
    let (mean_sigma_one, sd_sigma_one) = stats(&sigma_ones);
    Ok(OuterSummary {
        mus,
        sigma_ones,
        mean_mu,
        sd_mu,
        mean_sigma_one,
        sd_sigma_one,
        failures,
    })
}
