//! Restarted Lanczos for the lowest eigenpair of a matrix-free Hermitian operator.
//!
//! Full reorthogonalization is used throughout: the Krylov blocks are short
//! (at most `krylov_dim` vectors) and the problem sizes are desk scale, so the
//! extra inner products are cheap compared to losing orthogonality near
//! convergence. After each block the Ritz vector of the lowest Ritz value
//! seeds the next block (explicit restart).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Target residual `||A x - theta x||`.
    pub tol: f64,
    /// Maximum number of Krylov vectors per block.
    pub krylov_dim: usize,
    /// Maximum number of restarted blocks.
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            krylov_dim: 80,
            max_restarts: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<Complex64>,
    pub residual: f64,
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn project_out(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
}

/// Lowest eigenpair of `apply` restricted to the orthogonal complement of `deflate`.
///
/// `deflate` must hold orthonormal vectors. On failure the error carries the
/// bracket `[theta - residual, theta]`, which always contains an eigenvalue.
pub fn lowest_eigenpair<F>(
    dim: usize,
    apply: F,
    start: Vec<Complex64>,
    deflate: &[Vec<Complex64>],
    opts: &LanczosOptions,
) -> Result<Eigenpair>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    if start.len() != dim {
        return Err(Error::Domain(format!(
            "start vector has length {}, expected {dim}",
            start.len()
        )));
    }
    let free_dim = dim.saturating_sub(deflate.len());
    if free_dim == 0 {
        return Err(Error::Domain("no space left after deflation".into()));
    }
    let mut x = start;
    project_out(&mut x, deflate);
    let nx = norm(&x);
    if nx < 1e-12 {
        return Err(Error::Domain("start vector lies in the deflated space".into()));
    }
    x.iter_mut().for_each(|v| *v /= nx);

    let block = opts.krylov_dim.max(2).min(free_dim);
    let mut scratch = vec![Complex64::new(0.0, 0.0); dim];
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut last = (f64::NAN, f64::INFINITY);

    for _ in 0..opts.max_restarts.max(1) {
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(block);
        let mut alpha: Vec<f64> = Vec::with_capacity(block);
        let mut beta: Vec<f64> = Vec::with_capacity(block);
        basis.push(x.clone());
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            project_out(&mut w, deflate);
            project_out(&mut w, &basis);
            let b = norm(&w);
            if basis.len() == block || b < 1e-13 * (1.0 + a.abs()) {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }

        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let y = eig.eigenvectors.column(imin);

        let mut ritz = vec![Complex64::new(0.0, 0.0); dim];
        for (coef, v) in y.iter().zip(&basis) {
            axpy(Complex64::new(*coef, 0.0), v, &mut ritz);
        }
        project_out(&mut ritz, deflate);
        let nr = norm(&ritz);
        ritz.iter_mut().for_each(|v| *v /= nr);
        apply(&ritz, &mut scratch);
        let theta = dot(&ritz, &scratch).re;
        let res = scratch
            .iter()
            .zip(&ritz)
            .map(|(ax, xi)| (ax - xi * theta).norm_sqr())
            .sum::<f64>()
            .sqrt();
        last = (theta, res);
        if res <= opts.tol {
            return Ok(Eigenpair {
                value: theta,
                vector: ritz,
                residual: res,
            });
        }
        x = ritz;
    }
    Err(Error::Convergence {
        iterations: opts.max_restarts,
        residual: last.1,
        lower: last.0 - last.1,
        upper: last.0,
    })
}
