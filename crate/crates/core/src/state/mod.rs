//! Dense statevectors, exact ground states and the analytic measurement
//! probabilities the estimator consumes.

pub mod lanczos;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pauli::Observable;
use crate::BasisLabel;
use lanczos::{lowest_eigenpair, LanczosOptions};

/// Probability distribution over computational basis labels.
pub type Distribution = BTreeMap<BasisLabel, f64>;

/// Normalization tolerance for [`StateVector`].
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Default pruning threshold for [`basis_probabilities`].
pub const PRUNE_THRESHOLD: f64 = 1e-16;

/// Largest register the dense routines will accept by default.
pub const DEFAULT_QUBIT_CAP: usize = 16;

/// Registers up to this size may fall back to dense diagonalization.
pub const DENSE_FALLBACK_QUBITS: usize = 10;

/// Relative slack used when picking the largest-modulus amplitude.
const PHASE_TIE_SLACK: f64 = 1e-10;

/// A normalized pure state over `2^n_qubits` basis states.
///
/// The global phase is fixed so that the largest-modulus amplitude (lowest
/// label among ties) is real and non-negative. For real Hamiltonians this
/// makes the ground state real.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_width(n_qubits: usize, len: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits >= usize::BITS as usize - 1 || len != 1usize << n_qubits {
        return Err(Error::Domain(format!(
            "{len} amplitudes do not describe a {n_qubits}-qubit register"
        )));
    }
    Ok(())
}

fn fix_phase(amplitudes: &mut [Complex64]) {
    let max = amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = amplitudes
        .iter()
        .position(|a| a.norm() >= max * (1.0 - PHASE_TIE_SLACK))
        .expect("maximum exists");
    let a = amplitudes[pivot];
    let rot = a.conj() / a.norm();
    if rot != Complex64::new(1.0, 0.0) {
        amplitudes.iter_mut().for_each(|v| *v *= rot);
    }
    amplitudes[pivot] = Complex64::new(amplitudes[pivot].norm(), 0.0);
}

impl StateVector {
    /// Wraps already-normalized amplitudes (within [`NORM_TOLERANCE`]).
    pub fn new(n_qubits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        check_width(n_qubits, amplitudes.len())?;
        let total: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Domain(format!("state norm^2 is {total}, expected 1")));
        }
        fix_phase(&mut amplitudes);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(n_qubits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        check_width(n_qubits, amplitudes.len())?;
        let n = lanczos::norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain("cannot normalize a zero or non-finite vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Self::new(n_qubits, amplitudes)
    }

    pub fn from_real(n_qubits: usize, amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(
            n_qubits,
            amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        )
    }

    pub fn basis_state(n_qubits: usize, label: BasisLabel) -> Result<Self> {
        let dim = 1usize
            .checked_shl(n_qubits as u32)
            .ok_or_else(|| Error::Domain("register too large".into()))?;
        if label as usize >= dim {
            return Err(Error::Domain(format!("label {label} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[label as usize] = Complex64::new(1.0, 0.0);
        Self::new(n_qubits, amps)
    }

    /// Seeded Haar-like random state (normalized complex Gaussian vector).
    pub fn random(n_qubits: usize, seed: u64, real: bool) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1usize << n_qubits)
            .map(|_| {
                let re: f64 = rng.sample(rand_distr::StandardNormal);
                let im: f64 = if real { 0.0 } else { rng.sample(rand_distr::StandardNormal) };
                Complex64::new(re, im)
            })
            .collect();
        Self::normalized(n_qubits, amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, label: BasisLabel) -> Complex64 {
        self.amplitudes
            .get(label as usize)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Largest imaginary part over all amplitudes.
    pub fn max_imag(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.im.abs()).fold(0.0, f64::max)
    }

    /// Re-applies the phase convention; the identity on any constructed state.
    pub fn with_fixed_phase(&self) -> Self {
        let mut amplitudes = self.amplitudes.clone();
        fix_phase(&mut amplitudes);
        Self {
            n_qubits: self.n_qubits,
            amplitudes,
        }
    }

    /// Little-endian dump: `u32` qubit count, then `(re, im)` f64 pairs.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.n_qubits as u32).to_le_bytes())?;
        for a in &self.amplitudes {
            out.write_all(&a.re.to_le_bytes())?;
            out.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let n_qubits = u32::from_le_bytes(word) as usize;
        if n_qubits == 0 || n_qubits > 30 {
            return Err(Error::parse("header", format!("implausible qubit count {n_qubits}")));
        }
        let mut buf = [0u8; 8];
        let mut amps = Vec::with_capacity(1 << n_qubits);
        for _ in 0..1usize << n_qubits {
            input.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            input.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            amps.push(Complex64::new(re, im));
        }
        Self::new(n_qubits, amps)
    }
}

fn check_match(o: &Observable, psi: &StateVector) -> Result<()> {
    if o.n_qubits() != psi.n_qubits() {
        return Err(Error::Dimension {
            expected: o.n_qubits(),
            found: psi.n_qubits(),
        });
    }
    Ok(())
}

/// `<psi|O|psi>`, matrix-free.
pub fn expectation(o: &Observable, psi: &StateVector) -> Result<f64> {
    check_match(o, psi)?;
    let mut out = vec![Complex64::new(0.0, 0.0); psi.dim()];
    o.apply_unchecked(psi.amplitudes(), &mut out);
    let value = lanczos::dot(psi.amplitudes(), &out);
    debug_assert!(value.im.abs() <= 1e-10 * value.re.abs().max(1.0));
    Ok(value.re)
}

/// `|<n|psi>|^2` for every label above `prune` (default [`PRUNE_THRESHOLD`]).
pub fn basis_probabilities(psi: &StateVector) -> Distribution {
    basis_probabilities_pruned(psi, PRUNE_THRESHOLD)
}

pub fn basis_probabilities_pruned(psi: &StateVector, prune: f64) -> Distribution {
    psi.amplitudes()
        .iter()
        .enumerate()
        .filter_map(|(n, a)| {
            let p = a.norm_sqr();
            (p > prune).then_some((n as BasisLabel, p))
        })
        .collect()
}

/// Outcome-"0" probabilities of the two interference circuits for the pair `(m, n)`:
/// `(|<m|psi> + <n|psi>|^2 / 2, |<m|psi> + i<n|psi>|^2 / 2)`.
pub fn ab_probabilities(psi: &StateVector, m: BasisLabel, n: BasisLabel) -> Result<(f64, f64)> {
    if m == n {
        return Err(Error::Domain(format!("interference pair needs distinct labels, got {m} twice")));
    }
    let dim = psi.dim() as BasisLabel;
    if m >= dim || n >= dim {
        return Err(Error::Domain(format!("labels ({m}, {n}) out of range")));
    }
    let am = psi.amplitude(m);
    let an = psi.amplitude(n);
    let a = (am + an).norm_sqr() / 2.0;
    let b = (am + Complex64::new(0.0, 1.0) * an).norm_sqr() / 2.0;
    Ok((a.clamp(0.0, 1.0), b.clamp(0.0, 1.0)))
}

/// Options for [`ground_state_with`].
#[derive(Debug, Clone, Copy)]
pub struct GroundStateOptions {
    pub tol: f64,
    pub qubit_cap: usize,
    pub seed: u64,
    /// Spectral gap below which the ground space is reported as degenerate.
    pub degeneracy_gap: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            qubit_cap: DEFAULT_QUBIT_CAP,
            seed: 0x5EED_CB5,
            degeneracy_gap: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub energy: f64,
    pub state: StateVector,
    /// `||H psi - E psi||`.
    pub residual: f64,
    pub degenerate: bool,
    /// Next eigenvalue above the ground energy, when resolvable.
    pub first_excited: Option<f64>,
}

fn start_vector(dim: usize, seed: u64, real: bool) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| {
            let re: f64 = rng.random_range(-1.0..1.0);
            let im: f64 = if real { 0.0 } else { rng.random_range(-1.0..1.0) };
            Complex64::new(re, im)
        })
        .collect()
}

/// Lowest eigenpair of `h` with default options.
pub fn ground_state(h: &Observable, tol: f64) -> Result<GroundStateResult> {
    ground_state_with(
        h,
        &GroundStateOptions {
            tol,
            ..GroundStateOptions::default()
        },
    )
}

/// Lowest eigenpair by restarted Lanczos; dense diagonalization is used when
/// Lanczos fails on a register of at most [`DENSE_FALLBACK_QUBITS`] qubits.
pub fn ground_state_with(h: &Observable, opts: &GroundStateOptions) -> Result<GroundStateResult> {
    let n = h.n_qubits();
    if n > opts.qubit_cap {
        return Err(Error::Domain(format!(
            "{n} qubits exceeds the configured cap of {}",
            opts.qubit_cap
        )));
    }
    let dim = h.dim();
    let real = h.is_real();
    let lopts = LanczosOptions {
        tol: opts.tol,
        ..LanczosOptions::default()
    };
    let apply = |x: &[Complex64], y: &mut [Complex64]| h.apply_unchecked(x, y);
    let (energy, vector, residual, excited) =
        match lowest_eigenpair(dim, apply, start_vector(dim, opts.seed, real), &[], &lopts) {
            Ok(ground) => {
                let excited = if dim > 1 {
                    lowest_eigenpair(
                        dim,
                        apply,
                        start_vector(dim, opts.seed.wrapping_add(1), real),
                        std::slice::from_ref(&ground.vector),
                        &lopts,
                    )
                    .ok()
                    .map(|e| e.value)
                } else {
                    None
                };
                (ground.value, ground.vector, ground.residual, excited)
            }
            Err(err) if n <= DENSE_FALLBACK_QUBITS => {
                let _ = err;
                dense_ground_state(h)?
            }
            Err(err) => return Err(err),
        };
    if residual > opts.tol {
        return Err(Error::Convergence {
            iterations: 0,
            residual,
            lower: energy - residual,
            upper: energy,
        });
    }
    let mut amps = vector;
    if real {
        amps.iter_mut().for_each(|a| a.im = 0.0);
    }
    let state = StateVector::normalized(n, amps)?;
    let degenerate = excited.is_some_and(|e1| e1 - energy < opts.degeneracy_gap);
    Ok(GroundStateResult {
        energy,
        state,
        residual,
        degenerate,
        first_excited: excited,
    })
}

fn dense_ground_state(h: &Observable) -> Result<(f64, Vec<Complex64>, f64, Option<f64>)> {
    let dim = h.dim();
    let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
    let mut col = vec![Complex64::new(0.0, 0.0); dim];
    let mut unit = vec![Complex64::new(0.0, 0.0); dim];
    for j in 0..dim {
        unit[j] = Complex64::new(1.0, 0.0);
        h.apply_unchecked(&unit, &mut col);
        for i in 0..dim {
            mat[(i, j)] = col[i];
        }
        unit[j] = Complex64::new(0.0, 0.0);
    }
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e0 = eig.eigenvalues[order[0]];
    let vector: Vec<Complex64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    h.apply_unchecked(&vector, &mut col);
    let residual = col
        .iter()
        .zip(&vector)
        .map(|(a, x)| (a - x * e0).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let excited = order.get(1).map(|&i| eig.eigenvalues[i]);
    Ok((e0, vector, residual, excited))
}

/// Extreme eigenvalues `(lambda_min, lambda_max)` of `o` by Lanczos on `o` and `-o`.
pub(crate) fn spectral_bounds(o: &Observable, tol: f64, seed: u64) -> Result<(f64, f64)> {
    let dim = o.dim();
    let real = o.is_real();
    let opts = LanczosOptions {
        tol,
        ..LanczosOptions::default()
    };
    let lo = lowest_eigenpair(
        dim,
        |x: &[Complex64], y: &mut [Complex64]| o.apply_unchecked(x, y),
        start_vector(dim, seed, real),
        &[],
        &opts,
    )?;
    let hi = lowest_eigenpair(
        dim,
        |x: &[Complex64], y: &mut [Complex64]| {
            o.apply_unchecked(x, y);
            y.iter_mut().for_each(|v| *v = -*v);
        },
        start_vector(dim, seed.wrapping_add(7), real),
        &[],
        &opts,
    )?;
    Ok((lo.value, -hi.value))
}
