//! Pauli strings, observables and their classical matrix elements.

mod observable;
mod string;

pub use observable::{observable_transition, parse_observable, Observable, PauliTerm, MERGE_DROP_TOLERANCE};
pub use string::{generally_commutes, pauli_transition, qubit_wise_commutes, Pauli, PauliString, MAX_QUBITS};

use crate::error::{Error, Result};
use crate::state::{spectral_bounds, DEFAULT_QUBIT_CAP};

/// Options for [`operator_inf_norm_with`].
#[derive(Debug, Clone, Copy)]
pub struct NormOptions {
    pub tol: f64,
    pub qubit_cap: usize,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            qubit_cap: DEFAULT_QUBIT_CAP,
            seed: 0x0B5E_4AB1E,
        }
    }
}

/// Largest singular value `||O||_inf = max |eigenvalue|`.
pub fn operator_inf_norm(o: &Observable) -> Result<f64> {
    operator_inf_norm_with(o, &NormOptions::default())
}

pub fn operator_inf_norm_with(o: &Observable, opts: &NormOptions) -> Result<f64> {
    if o.n_qubits() > opts.qubit_cap {
        return Err(Error::Domain(format!(
            "{} qubits exceeds the configured cap of {}",
            o.n_qubits(),
            opts.qubit_cap
        )));
    }
    if o.is_empty() {
        return Ok(0.0);
    }
    let (lo, hi) = spectral_bounds(o, opts.tol, opts.seed)?;
    Ok(lo.abs().max(hi.abs()))
}
