//! Closed-form single-shot variances and shot allocation.
//!
//! Every estimator here has variance `sum_k v_k / L_k` over independent
//! measurement streams `k`. Given per-stream variances `v_k` the optimal split
//! of a budget `L` is `L_k ∝ sqrt(v_k)`, giving `c_v / L` with
//! `c_v = (sum_k sqrt(v_k))^2`. Allocating with reference variances `u_k`
//! instead gives `c_v = (sum_k sqrt(u_k)) (sum_k v_k / sqrt(u_k))`.
//!
//! Variances of the truncated estimator follow from first-order error
//! propagation with `N_R = 1`, multinomial weights and binomial interference
//! probabilities.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cbs::{InterferenceSet, TransitionTable, TruncationResult, FACTOR_GUARD};
use crate::error::{Error, Result};
use crate::grouping::GroupingResult;
use crate::pauli::{Observable, PauliTerm};
use crate::state::{lanczos, StateVector};
use crate::BasisLabel;

/// Default reference weight of the heuristic state.
pub const DEFAULT_W: f64 = 0.75;

/// How a shot budget was split between streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMode {
    /// Optimal for the true state.
    Exact,
    /// Optimal for the heuristic reference state `psi_w`.
    HeuristicW,
    /// Optimal for vanishing Pauli expectations.
    Haar,
    Uniform,
}

impl std::fmt::Display for AllocationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AllocationMode::Exact => "exact",
            AllocationMode::HeuristicW => "heuristic-w",
            AllocationMode::Haar => "haar",
            AllocationMode::Uniform => "uniform",
        })
    }
}

/// Stream layout of a [`MeasurementPlan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLayout {
    Generic,
    /// `[f, A_2, B_2, A_3, B_3, ...]` for `R` retained states.
    Cbs { r: usize },
    /// One stream per measurement group.
    Grouped,
}

/// Integer shot counts per measurement stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementPlan {
    shots: Vec<u64>,
    layout: StreamLayout,
}

impl MeasurementPlan {
    pub fn new(shots: Vec<u64>, layout: StreamLayout) -> Result<Self> {
        let expected = match layout {
            StreamLayout::Cbs { r } => Some(2 * r - 1),
            _ => None,
        };
        if let Some(n) = expected {
            if shots.len() != n {
                return Err(Error::Domain(format!(
                    "CBS plan for R states needs {n} streams, got {}",
                    shots.len()
                )));
            }
        }
        Ok(Self { shots, layout })
    }

    /// Same shot counts viewed through another layout.
    pub fn with_layout(self, layout: StreamLayout) -> Result<Self> {
        Self::new(self.shots, layout)
    }

    pub fn shots(&self) -> &[u64] {
        &self.shots
    }

    pub fn layout(&self) -> StreamLayout {
        self.layout
    }

    pub fn total(&self) -> u64 {
        self.shots.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    /// Shots for the basis-weight stream (CBS layout).
    pub fn l_f(&self) -> Option<u64> {
        matches!(self.layout, StreamLayout::Cbs { .. }).then(|| self.shots[0])
    }

    /// Shots for `A_r`, `r = 2..R` (CBS layout).
    pub fn l_a(&self) -> Vec<u64> {
        match self.layout {
            StreamLayout::Cbs { .. } => self.shots[1..].iter().step_by(2).copied().collect(),
            _ => Vec::new(),
        }
    }

    /// Shots for `B_r`, `r = 2..R` (CBS layout).
    pub fn l_b(&self) -> Vec<u64> {
        match self.layout {
            StreamLayout::Cbs { .. } => self.shots.iter().skip(2).step_by(2).copied().collect(),
            _ => Vec::new(),
        }
    }

    /// Shots per group (grouped layout).
    pub fn l_g(&self) -> &[u64] {
        match self.layout {
            StreamLayout::Grouped => &self.shots,
            _ => &[],
        }
    }

    pub fn stream_names(&self) -> Vec<String> {
        stream_names(self.layout, self.shots.len())
    }
}

fn stream_names(layout: StreamLayout, n: usize) -> Vec<String> {
    match layout {
        StreamLayout::Cbs { r } => {
            let mut names = vec!["f".to_string()];
            for k in 2..=r {
                names.push(format!("A{k}"));
                names.push(format!("B{k}"));
            }
            names
        }
        StreamLayout::Grouped => (0..n).map(|g| format!("g{g}")).collect(),
        StreamLayout::Generic => (0..n).map(|k| format!("s{k}")).collect(),
    }
}

fn check_variances(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Domain("no measurement streams".into()));
    }
    if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Domain(format!("stream variance {bad} is not a finite non-negative number")));
    }
    Ok(())
}

/// Splits `total_l` shots as `L_k ∝ sqrt(v_k)` with largest-remainder rounding.
///
/// The total is preserved exactly, zero-variance streams get no shots, and
/// every nonzero stream gets at least one shot when the budget allows it.
pub fn optimal_allocation(v: &[f64], total_l: u64) -> Result<MeasurementPlan> {
    check_variances(v)?;
    let roots: Vec<f64> = v.iter().map(|x| x.sqrt()).collect();
    let sum: f64 = roots.iter().sum();
    if sum == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let nonzero = roots.iter().filter(|&&x| x > 0.0).count() as u64;
    if total_l < nonzero {
        return Err(Error::Domain(format!(
            "budget {total_l} is smaller than the {nonzero} streams that need shots"
        )));
    }
    let ideal: Vec<f64> = roots.iter().map(|x| total_l as f64 * x / sum).collect();
    let mut shots: Vec<u64> = ideal.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = shots.iter().sum();
    let mut order: Vec<usize> = (0..v.len()).filter(|&k| roots[k] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(total_l.saturating_sub(assigned) as usize) {
        shots[k] += 1;
    }
    // A nonzero stream rounded down to nothing borrows from the largest stream.
    for k in 0..shots.len() {
        if roots[k] > 0.0 && shots[k] == 0 {
            let donor = (0..shots.len())
                .max_by(|&a, &b| shots[a].cmp(&shots[b]).then(b.cmp(&a)))
                .expect("non-empty");
            shots[donor] -= 1;
            shots[k] = 1;
        }
    }
    MeasurementPlan::new(shots, StreamLayout::Generic)
}

/// Equal split (remainder to the first streams).
pub fn uniform_allocation(n_streams: usize, total_l: u64) -> Result<MeasurementPlan> {
    if n_streams == 0 {
        return Err(Error::Domain("no measurement streams".into()));
    }
    let base = total_l / n_streams as u64;
    let extra = (total_l % n_streams as u64) as usize;
    let shots = (0..n_streams).map(|k| base + u64::from(k < extra)).collect();
    MeasurementPlan::new(shots, StreamLayout::Generic)
}

/// `sum_k v_k / L_k` for a concrete plan.
pub fn allocation_variance(v_true: &[f64], plan: &MeasurementPlan) -> Result<f64> {
    check_variances(v_true)?;
    if v_true.len() != plan.len() {
        return Err(Error::Domain(format!(
            "{} variances for a plan with {} streams",
            v_true.len(),
            plan.len()
        )));
    }
    let names = plan.stream_names();
    let mut total = 0.0;
    for ((&v, &l), name) in v_true.iter().zip(plan.shots()).zip(names) {
        if v == 0.0 {
            continue;
        }
        if l == 0 {
            return Err(Error::InfiniteVariance(name));
        }
        total += v / l as f64;
    }
    Ok(total)
}

/// `c_v = (sum_k sqrt(u_k)) (sum_k v_k / sqrt(u_k))` for allocation by reference variances `u`.
///
/// With `u = v` this is the optimal constant `(sum_k sqrt(v_k))^2`.
pub fn reference_constant(v_true: &[f64], v_ref: &[f64]) -> Result<f64> {
    check_variances(v_true)?;
    check_variances(v_ref)?;
    if v_true.len() != v_ref.len() {
        return Err(Error::Domain("variance vectors differ in length".into()));
    }
    let mut roots = 0.0;
    let mut weighted = 0.0;
    for (k, (&v, &u)) in v_true.iter().zip(v_ref).enumerate() {
        roots += u.sqrt();
        if v == 0.0 {
            continue;
        }
        if u == 0.0 {
            return Err(Error::InfiniteVariance(format!("s{k}")));
        }
        weighted += v / u.sqrt();
    }
    Ok(roots * weighted)
}

/// Total shots `ceil(c_v / target_sd^2)` for a target standard deviation.
pub fn shots_to_target(c_v: f64, target_sd: f64) -> Result<u64> {
    if !(c_v >= 0.0 && c_v.is_finite()) || !(target_sd > 0.0) {
        return Err(Error::Domain(format!(
            "need c_v >= 0 and target > 0, got {c_v} and {target_sd}"
        )));
    }
    let ratio = c_v / (target_sd * target_sd);
    let nearest = ratio.round();
    // Absorb the last-ulp noise of the division before taking the ceiling.
    let shots = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    Ok(shots as u64)
}

/// One row of a [`VarianceReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEntry {
    pub name: String,
    pub v: f64,
    pub shots: u64,
}

/// Single-shot variances of every stream together with a plan and its total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub mode: AllocationMode,
    pub c_v: f64,
    pub total_variance: f64,
    pub streams: Vec<StreamEntry>,
}

impl VarianceReport {
    pub fn v(&self) -> Vec<f64> {
        self.streams.iter().map(|s| s.v).collect()
    }

    pub fn total_shots(&self) -> u64 {
        self.streams.iter().map(|s| s.shots).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }

    /// One stream per row: `name,v,shots`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,v,shots\n");
        for s in &self.streams {
            let _ = writeln!(out, "{},{:e},{}", s.name, s.v, s.shots);
        }
        out
    }
}

/// Builds a report: plan from `v_ref` (or `v_true`), constant and total from `v_true`.
fn build_report(
    mode: AllocationMode,
    layout: StreamLayout,
    v_true: &[f64],
    v_ref: &[f64],
    total_l: u64,
) -> Result<VarianceReport> {
    let names = stream_names(layout, v_true.len());
    let all_zero = |v: &[f64]| v.iter().all(|&x| x == 0.0);
    let (plan_shots, c_v, total) = if all_zero(v_true) && all_zero(v_ref) {
        (vec![0; v_true.len()], 0.0, 0.0)
    } else {
        let plan = optimal_allocation(v_ref, total_l)?.with_layout(layout)?;
        let total = allocation_variance(v_true, &plan)?;
        let c_v = reference_constant(v_true, v_ref)?;
        (plan.shots().to_vec(), c_v, total)
    };
    let streams = names
        .into_iter()
        .zip(v_true)
        .zip(plan_shots)
        .map(|((name, &v), shots)| StreamEntry { name, v, shots })
        .collect();
    Ok(VarianceReport {
        mode,
        c_v,
        total_variance: total,
        streams,
    })
}

/// Partial derivatives of the unnormalized truncated estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct CbsGradients {
    /// `d<O>/df_r`, `r = 1..R`.
    pub d_f: Vec<f64>,
    /// `d<O>/dA_r`, `r = 2..R`.
    pub d_a: Vec<f64>,
    /// `d<O>/dB_r`, `r = 2..R`.
    pub d_b: Vec<f64>,
}

/// Closed-form error-propagation derivatives of the `N_R = 1` estimator with
/// respect to the measured `f_r`, `A_r` and `B_r`.
pub fn cbs_gradients(table: &TransitionTable, intf: &InterferenceSet) -> Result<CbsGradients> {
    let r = intf.r();
    if table.r() != r {
        return Err(Error::Domain(format!(
            "transition table has R = {} but interference set has R = {r}",
            table.r()
        )));
    }
    let f = intf.weights();
    let g = intf.g();
    let zero = Complex64::new(0.0, 0.0);
    let h = Complex64::new(0.5, 0.5);
    let hc = h.conj();
    let o = |i: usize, j: usize| table.get(i, j);

    for k in 1..r {
        let coupled = (0..r).any(|j| j != k && o(k, j) != zero);
        if coupled && !(g[k - 1].norm() >= FACTOR_GUARD) {
            return Err(Error::IllConditioned {
                row: 1,
                col: k + 1,
                modulus: g[k - 1].norm(),
            });
        }
    }
    // g_k for zero-based k >= 1
    let gk = |k: usize| g[k - 1];

    let mut d_f = vec![0.0; r];
    let mut d_a = vec![0.0; r.saturating_sub(1)];
    let mut d_b = vec![0.0; r.saturating_sub(1)];

    let mut acc = o(0, 0);
    for k in 1..r {
        if o(0, k) != zero {
            acc += 2.0 * (f[k] / gk(k) * (1.0 + h * f[0] / gk(k)) * o(0, k)).re;
        }
        for l in k + 1..r {
            if o(k, l) != zero {
                let pref = f[k] * f[l] / (gk(k).conj() * gk(l));
                let bracket = 1.0 + h * f[0] / gk(l) + hc * f[0] / gk(k).conj();
                acc += 2.0 * (pref * bracket * o(k, l)).re;
            }
        }
    }
    d_f[0] = acc.re;

    for k in 1..r {
        let mut acc = o(k, k);
        if o(0, k) != zero {
            acc += 2.0 * (f[0] / gk(k) * (1.0 + h * f[k] / gk(k)) * o(0, k)).re;
        }
        let mut coupling = o(0, k);
        for l in 1..r {
            if l == k || o(k, l) == zero {
                continue;
            }
            let pref = f[0] * f[l] / (gk(k).conj() * gk(l));
            acc += 2.0 * (pref * (1.0 + hc * f[k] / gk(k).conj()) * o(k, l)).re;
            coupling += f[l] / gk(l).conj() * o(l, k);
        }
        d_f[k] = acc.re;
        if coupling != zero {
            let z = f[0] * f[k] / (gk(k) * gk(k)) * coupling;
            d_a[k - 1] = -2.0 * z.re;
            d_b[k - 1] = 2.0 * z.im;
        }
    }
    Ok(CbsGradients { d_f, d_a, d_b })
}

/// Single-shot variances `[v_f, v_A2, v_B2, ...]` of the truncated estimator
/// evaluated at the given weights and interference probabilities.
pub fn cbs_stream_variances(table: &TransitionTable, intf: &InterferenceSet) -> Result<Vec<f64>> {
    let grads = cbs_gradients(table, intf)?;
    let f = intf.weights();
    let r = f.len();
    let mut v_f = 0.0;
    for i in 0..r {
        for j in 0..r {
            let cov = if i == j { f[i] * (1.0 - f[i]) } else { -f[i] * f[j] };
            v_f += grads.d_f[i] * grads.d_f[j] * cov;
        }
    }
    let mut v = Vec::with_capacity(2 * r - 1);
    v.push(v_f.max(0.0));
    for k in 0..r - 1 {
        let a = intf.a()[k];
        let b = intf.b()[k];
        v.push(grads.d_a[k].powi(2) * a * (1.0 - a));
        v.push(grads.d_b[k].powi(2) * b * (1.0 - b));
    }
    Ok(v)
}

/// Variance report of the truncated estimator under a given plan.
///
/// `c_v` is `L * Var` for the plan's proportions.
pub fn cbs_variance(
    o: &Observable,
    trunc: &TruncationResult,
    intf: &InterferenceSet,
    plan: &MeasurementPlan,
    mode: AllocationMode,
) -> Result<VarianceReport> {
    let table = TransitionTable::new(o, &trunc.labels)?;
    let v = cbs_stream_variances(&table, intf)?;
    let plan = plan.clone().with_layout(StreamLayout::Cbs { r: trunc.r() })?;
    let total = allocation_variance(&v, &plan)?;
    let streams = plan
        .stream_names()
        .into_iter()
        .zip(&v)
        .zip(plan.shots())
        .map(|((name, &v), &shots)| StreamEntry { name, v, shots })
        .collect();
    Ok(VarianceReport {
        mode,
        c_v: total * plan.total() as f64,
        total_variance: total,
        streams,
    })
}

/// Truncated-estimator report with allocation optimized for the true state.
pub fn cbs_exact_report(
    o: &Observable,
    trunc: &TruncationResult,
    intf: &InterferenceSet,
    total_l: u64,
) -> Result<VarianceReport> {
    let table = TransitionTable::new(o, &trunc.labels)?;
    let v = cbs_stream_variances(&table, intf)?;
    build_report(
        AllocationMode::Exact,
        StreamLayout::Cbs { r: trunc.r() },
        &v,
        &v,
        total_l,
    )
}

/// Weights and interference probabilities of the reference state
/// `sqrt(w)|z_1> + sum_{r>=2} sqrt((1-w)/(R-1)) |z_r>`.
pub fn heuristic_quantities(r: usize, w: f64) -> Result<InterferenceSet> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::Domain(format!("w = {w} outside (0, 1)")));
    }
    if r < 2 {
        return Err(Error::Domain("heuristic allocation needs R >= 2".into()));
    }
    let rest = (1.0 - w) / (r - 1) as f64;
    let mut weights = vec![rest; r];
    weights[0] = w;
    let a = 0.5 * (w.sqrt() + rest.sqrt()).powi(2);
    let b = 0.5 * (w + rest);
    InterferenceSet::from_measurements(&weights, &vec![a; r - 1], &vec![b; r - 1])
}

/// Reference single-shot variances at the heuristic state for the given labels.
pub fn heuristic_stream_variances(o: &Observable, labels: &[BasisLabel], w: f64) -> Result<Vec<f64>> {
    let table = TransitionTable::new(o, labels)?;
    let reference = heuristic_quantities(labels.len(), w)?;
    cbs_stream_variances(&table, &reference)
}

/// Plan optimized for the heuristic reference state.
pub fn heuristic_plan(o: &Observable, labels: &[BasisLabel], w: f64, total_l: u64) -> Result<MeasurementPlan> {
    let v_ref = heuristic_stream_variances(o, labels, w)?;
    optimal_allocation(&v_ref, total_l)?.with_layout(StreamLayout::Cbs { r: labels.len() })
}

/// Truncated-estimator report with allocation from the heuristic reference state.
pub fn cbs_heuristic_report(
    o: &Observable,
    trunc: &TruncationResult,
    intf: &InterferenceSet,
    w: f64,
    total_l: u64,
) -> Result<VarianceReport> {
    let table = TransitionTable::new(o, &trunc.labels)?;
    let v = cbs_stream_variances(&table, intf)?;
    // A single retained state leaves only the basis stream to allocate.
    let v_ref = if trunc.r() == 1 {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::Domain(format!("w = {w} outside (0, 1)")));
        }
        v.clone()
    } else {
        heuristic_stream_variances(o, &trunc.labels, w)?
    };
    build_report(
        AllocationMode::HeuristicW,
        StreamLayout::Cbs { r: trunc.r() },
        &v,
        &v_ref,
        total_l,
    )
}

/// `Var[O_g] = <O_g^2> - <O_g>^2` for a commuting group of terms.
pub fn group_variance(group: &[PauliTerm], psi: &StateVector) -> Result<f64> {
    for (i, a) in group.iter().enumerate() {
        if a.string.n_qubits() != psi.n_qubits() {
            return Err(Error::Dimension {
                expected: psi.n_qubits(),
                found: a.string.n_qubits(),
            });
        }
        for b in &group[i + 1..] {
            if !a.string.generally_commutes(&b.string)? {
                return Err(Error::Precondition(format!(
                    "group members {} and {} do not commute",
                    a.string, b.string
                )));
            }
        }
    }
    if group.is_empty() {
        return Ok(0.0);
    }
    let og = Observable::new(psi.n_qubits(), group.iter().copied())?;
    let mut phi = vec![Complex64::new(0.0, 0.0); psi.dim()];
    og.apply_unchecked(psi.amplitudes(), &mut phi);
    let second: f64 = phi.iter().map(|x| x.norm_sqr()).sum();
    let first = lanczos::dot(psi.amplitudes(), &phi).re;
    Ok((second - first * first).max(0.0))
}

/// Conventional grouped estimator with exact, Haar or uniform allocation.
pub fn conventional_variance(
    o: &Observable,
    grouping: &GroupingResult,
    psi: &StateVector,
    mode: AllocationMode,
    total_l: u64,
) -> Result<VarianceReport> {
    if grouping.groups.is_empty() {
        return Err(Error::Domain("empty grouping".into()));
    }
    let terms = o.terms();
    let mut v = Vec::with_capacity(grouping.groups.len());
    let mut haar = Vec::with_capacity(grouping.groups.len());
    for group in &grouping.groups {
        let members = group
            .iter()
            .map(|&i| {
                terms
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Domain(format!("term index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        v.push(group_variance(&members, psi)?);
        haar.push(members.iter().map(|t| t.coeff * t.coeff).sum::<f64>());
    }
    let v_ref = match mode {
        AllocationMode::Exact => v.clone(),
        AllocationMode::Haar => haar,
        AllocationMode::Uniform => vec![1.0; v.len()],
        AllocationMode::HeuristicW => {
            return Err(Error::Domain("heuristic-w allocation applies to the truncated estimator only".into()))
        }
    };
    build_report(mode, StreamLayout::Grouped, &v, &v_ref, total_l)
}

/// Variance of the explicit importance sampler over pairs of basis states:
/// `sum'_{m,n} |<m|O|n>|^2 - <O>^2`, primed sum over the support of `psi`.
pub fn importance_sampling_variance(o: &Observable, psi: &StateVector) -> Result<f64> {
    if o.n_qubits() != psi.n_qubits() {
        return Err(Error::Dimension {
            expected: o.n_qubits(),
            found: psi.n_qubits(),
        });
    }
    if psi.max_imag() > 1e-10 {
        return Err(Error::Precondition("importance-sampling variance needs real amplitudes".into()));
    }
    let amps = psi.amplitudes();
    let in_support = |l: usize| amps[l].norm_sqr() > crate::state::PRUNE_THRESHOLD;
    let mut restricted = 0.0;
    let mut mean = 0.0;
    let mut column = std::collections::HashMap::new();
    for n in (0..amps.len()).filter(|&n| in_support(n)) {
        column.clear();
        for t in o.terms() {
            let m = n as u64 ^ t.string.x_mask();
            if in_support(m as usize) {
                *column.entry(m).or_insert(Complex64::new(0.0, 0.0)) +=
                    t.string.transition_unchecked(m, n as u64) * t.coeff;
            }
        }
        for (&m, &elem) in &column {
            restricted += elem.norm_sqr();
            mean += (amps[m as usize].conj() * elem * amps[n]).re;
        }
    }
    Ok(restricted - mean * mean)
}
