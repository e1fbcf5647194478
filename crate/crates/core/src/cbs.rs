//! Truncated computational-basis-sampling estimator.
//!
//! The state is truncated to its `R` heaviest basis states `z_1..z_R`. With
//! weights `f_r = |<z_r|psi>|^2` and interference factors
//! `G(r, s) = <z_r|psi><psi|z_s>`, the expectation value is
//!
//! ```text
//! <O> ~= N_R^2 * sum_{r,s} f_r f_s <z_r|O|z_s> / G(r, s)
//! ```
//!
//! Only `g_r = G(1, r)` is measured (anchor `z_1`); the remaining
//! off-diagonal factors are rebuilt as `G(r, s) = conj(g_r) g_s / f_1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{operator_inf_norm, Observable};
use crate::state::{ab_probabilities, Distribution, StateVector};
use crate::BasisLabel;

/// Minimum anchor weight `f_1` before dividing by it.
pub const ANCHOR_GUARD: f64 = 1e-12;

/// Minimum `|G(r, s)|` for a pair with a nonzero transition element.
pub const FACTOR_GUARD: f64 = 1e-14;

/// Allowed imaginary residue of the reconstructed sum, relative to `max(1, |<O>|)`.
pub const IMAG_TOLERANCE: f64 = 1e-9;

/// The `R` retained basis states, heaviest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationResult {
    pub labels: Vec<BasisLabel>,
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub norm_factor: f64,
    pub infidelity: f64,
}

fn rank(probs: &Distribution) -> Vec<(BasisLabel, f64)> {
    let mut ranked: Vec<(BasisLabel, f64)> = probs
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|(&l, &p)| (l, p))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

impl TruncationResult {
    /// Builds a result from weight-ranked labels (heaviest first).
    pub fn from_ranked(labels: Vec<BasisLabel>, weights: Vec<f64>) -> Result<Self> {
        if labels.is_empty() || labels.len() != weights.len() {
            return Err(Error::Domain(format!(
                "need matching non-empty labels and weights, got {} and {}",
                labels.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Domain("retained weights must be positive".into()));
        }
        let mass: f64 = weights.iter().sum();
        Ok(Self {
            labels,
            weights,
            norm_factor: 1.0 / mass.sqrt(),
            infidelity: (1.0 - mass).clamp(0.0, 1.0),
        })
    }

    /// Number of retained basis states.
    pub fn r(&self) -> usize {
        self.labels.len()
    }

    /// Retained probability mass `sum_r f_r = 1 / N_R^2`.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// The normalized truncated state `|psi_R>`.
    pub fn truncated_state(&self, psi: &StateVector) -> Result<StateVector> {
        let mut amps = vec![Complex64::new(0.0, 0.0); psi.dim()];
        for &l in &self.labels {
            let slot = amps
                .get_mut(l as usize)
                .ok_or_else(|| Error::Domain(format!("label {l} out of range")))?;
            *slot = psi.amplitude(l);
        }
        StateVector::normalized(psi.n_qubits(), amps)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("truncation serialization is infallible")
    }
}

/// Keeps the fewest heaviest basis states whose infidelity `1 - sum f_r` is at most `epsilon`.
///
/// Equal weights are ranked by ascending label.
pub fn truncate(probs: &Distribution, epsilon: f64) -> Result<TruncationResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside (0, 1)")));
    }
    let total: f64 = probs.values().sum();
    if total > 1.0 + 1e-9 {
        return Err(Error::Domain(format!("probabilities sum to {total} > 1")));
    }
    let ranked = rank(probs);
    let mut mass = 0.0;
    for (i, &(_, p)) in ranked.iter().enumerate() {
        mass += p;
        if 1.0 - mass <= epsilon {
            let (labels, weights) = ranked[..=i].iter().copied().unzip();
            return TruncationResult::from_ranked(labels, weights);
        }
    }
    Err(Error::Infeasible { mass, epsilon })
}

/// Truncation to exactly the `r` heaviest states.
pub fn truncate_to(probs: &Distribution, r: usize) -> Result<TruncationResult> {
    let ranked = rank(probs);
    if r == 0 || r > ranked.len() {
        return Err(Error::Domain(format!(
            "cannot keep {r} of {} nonzero basis states",
            ranked.len()
        )));
    }
    let (labels, weights) = ranked[..r].iter().copied().unzip();
    TruncationResult::from_ranked(labels, weights)
}

/// Measured (or exact) interference data anchored at `z_1`.
///
/// Index `r` runs over `0..R` with `0` the anchor; `a[k]`, `b[k]` and `g[k]`
/// belong to basis state `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceSet {
    weights: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    g: Vec<Complex64>,
}

impl InterferenceSet {
    /// Forms `g_r = A_r + i B_r - (1 + i)(f_1 + f_r) / 2` from single weights and
    /// the two interference probabilities of each non-anchor state.
    pub fn from_measurements(weights: &[f64], a: &[f64], b: &[f64]) -> Result<Self> {
        if weights.is_empty() || a.len() + 1 != weights.len() || b.len() != a.len() {
            return Err(Error::Domain(format!(
                "inconsistent interference inputs: {} weights, {} A, {} B",
                weights.len(),
                a.len(),
                b.len()
            )));
        }
        let f1 = weights[0];
        if !(f1 >= ANCHOR_GUARD) {
            return Err(Error::DegenerateAnchor(f1));
        }
        let half = Complex64::new(0.5, 0.5);
        let g = a
            .iter()
            .zip(b)
            .zip(&weights[1..])
            .map(|((&ar, &br), &fr)| Complex64::new(ar, br) - half * (f1 + fr))
            .collect();
        Ok(Self {
            weights: weights.to_vec(),
            a: a.to_vec(),
            b: b.to_vec(),
            g,
        })
    }

    pub fn r(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `g_r` for `r = 2..R`.
    pub fn g(&self) -> &[Complex64] {
        &self.g
    }

    /// Reconstructed `G(r, s) ~ <z_r|psi><psi|z_s>` (zero-based indices).
    pub fn factor(&self, r: usize, s: usize) -> Complex64 {
        match (r, s) {
            _ if r == s => Complex64::new(self.weights[r], 0.0),
            (0, s) => self.g[s - 1],
            (r, 0) => self.g[r - 1].conj(),
            (r, s) => self.g[r - 1].conj() * self.g[s - 1] / self.weights[0],
        }
    }
}

/// Interference set from the exact amplitudes of `psi`.
pub fn interference_set(psi: &StateVector, trunc: &TruncationResult) -> Result<InterferenceSet> {
    let anchor = trunc.labels[0];
    let mut a = Vec::with_capacity(trunc.r().saturating_sub(1));
    let mut b = Vec::with_capacity(trunc.r().saturating_sub(1));
    for &l in &trunc.labels[1..] {
        let (ar, br) = ab_probabilities(psi, anchor, l)?;
        a.push(ar);
        b.push(br);
    }
    InterferenceSet::from_measurements(&trunc.weights, &a, &b)
}

/// Row-major table of `<z_r|O|z_s>` over retained labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    r: usize,
    data: Vec<Complex64>,
}

impl TransitionTable {
    pub fn new(o: &Observable, labels: &[BasisLabel]) -> Result<Self> {
        Ok(Self {
            r: labels.len(),
            data: o.transition_table(labels)?,
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn get(&self, r: usize, s: usize) -> Complex64 {
        self.data[r * self.r + s]
    }

    /// True iff every off-diagonal element vanishes.
    pub fn is_diagonal(&self) -> bool {
        (0..self.r).all(|r| (0..self.r).all(|s| r == s || self.get(r, s) == Complex64::new(0.0, 0.0)))
    }
}

/// Evaluates the truncated estimator for given weights and interference factors.
pub fn estimate(table: &TransitionTable, intf: &InterferenceSet, normalize: bool) -> Result<f64> {
    let r = table.r();
    if intf.r() != r {
        return Err(Error::Domain(format!(
            "transition table has R = {r} but interference set has R = {}",
            intf.r()
        )));
    }
    let f = intf.weights();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..r {
        acc += table.get(i, i) * f[i];
        for j in 0..r {
            if i == j {
                continue;
            }
            let o = table.get(i, j);
            if o == Complex64::new(0.0, 0.0) {
                continue;
            }
            let factor = intf.factor(i, j);
            let modulus = factor.norm();
            if !(modulus >= FACTOR_GUARD) {
                return Err(Error::IllConditioned {
                    row: i + 1,
                    col: j + 1,
                    modulus,
                });
            }
            acc += o * (f[i] * f[j]) / factor;
        }
    }
    if acc.im.abs() > IMAG_TOLERANCE * acc.re.abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "estimator has imaginary residue {:e}",
            acc.im
        )));
    }
    let scale = if normalize {
        1.0 / f.iter().sum::<f64>()
    } else {
        1.0
    };
    Ok(acc.re * scale)
}

/// Truncated expectation value with `N_R^2` applied when `normalize` is set.
pub fn cbs_expectation(
    o: &Observable,
    trunc: &TruncationResult,
    intf: &InterferenceSet,
    normalize: bool,
) -> Result<f64> {
    if intf.weights() != trunc.weights.as_slice() {
        return Err(Error::Domain("interference set was not built from this truncation".into()));
    }
    let table = TransitionTable::new(o, &trunc.labels)?;
    estimate(&table, intf, normalize)
}

/// Upper bound `2 ||O||_inf sqrt(infidelity)` on the truncation error.
pub fn truncation_bound(o: &Observable, infidelity: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&infidelity) {
        return Err(Error::Domain(format!("infidelity {infidelity} outside [0, 1]")));
    }
    if infidelity == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * operator_inf_norm(o)? * infidelity.sqrt())
}

/// Output of [`symmetry_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredDistribution {
    pub probs: Distribution,
    pub rejected_mass: f64,
}

/// Drops labels whose popcount differs from `particle_number` and rescales the
/// survivors so they carry the input's total mass.
pub fn symmetry_filter(probs: &Distribution, particle_number: u32) -> Result<FilteredDistribution> {
    let mut kept = Distribution::new();
    let mut rejected = 0.0;
    for (&l, &p) in probs {
        if l.count_ones() == particle_number {
            kept.insert(l, p);
        } else {
            rejected += p;
        }
    }
    let mass: f64 = kept.values().sum();
    if kept.is_empty() || mass <= 0.0 {
        return Err(Error::EmptySupport);
    }
    let scale = (mass + rejected) / mass;
    kept.values_mut().for_each(|p| *p *= scale);
    Ok(FilteredDistribution {
        probs: kept,
        rejected_mass: rejected,
    })
}
