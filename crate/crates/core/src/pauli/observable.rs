use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::string::PauliString;
use crate::error::{Error, Result};
use crate::BasisLabel;

/// Terms whose merged coefficient falls below this magnitude are dropped.
pub const MERGE_DROP_TOLERANCE: f64 = 1e-14;

/// Statevectors at least this long are processed in parallel chunks.
const PARALLEL_DIM: usize = 1 << 12;

/// A real-weighted Pauli string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coeff: f64, string: PauliString) -> Result<Self> {
        if !coeff.is_finite() {
            return Err(Error::Domain(format!("coefficient {coeff} is not finite")));
        }
        Ok(Self { coeff, string })
    }
}

/// A Hermitian observable `O = sum_i c_i P_i` with distinct Pauli strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

#[derive(Serialize, Deserialize)]
struct RawObservable {
    n_qubits: serde_json::Value,
    terms: Vec<RawTerm>,
}

#[derive(Serialize, Deserialize)]
struct RawTerm {
    coeff: serde_json::Value,
    pauli: String,
}

impl Observable {
    /// Builds an observable, merging repeated strings by adding coefficients.
    ///
    /// Merged terms keep the position of their first occurrence.
    pub fn new(n_qubits: usize, terms: impl IntoIterator<Item = PauliTerm>) -> Result<Self> {
        let mut merged: Vec<PauliTerm> = Vec::new();
        let mut index: HashMap<PauliString, usize> = HashMap::new();
        for term in terms {
            if term.string.n_qubits() != n_qubits {
                return Err(Error::Dimension {
                    expected: n_qubits,
                    found: term.string.n_qubits(),
                });
            }
            if !term.coeff.is_finite() {
                return Err(Error::Domain(format!(
                    "coefficient {} is not finite",
                    term.coeff
                )));
            }
            match index.get(&term.string) {
                Some(&i) => merged[i].coeff += term.coeff,
                None => {
                    index.insert(term.string, merged.len());
                    merged.push(term);
                }
            }
        }
        merged.retain(|t| t.coeff.abs() >= MERGE_DROP_TOLERANCE);
        if n_qubits == 0 {
            return Err(Error::Domain("observable needs at least one qubit".into()));
        }
        Ok(Self {
            n_qubits,
            terms: merged,
        })
    }

    /// Convenience constructor from `(coeff, "X0 Z1")` pairs.
    pub fn from_pairs(n_qubits: usize, pairs: &[(f64, &str)]) -> Result<Self> {
        let terms = pairs
            .iter()
            .map(|&(c, s)| PauliTerm::new(c, PauliString::parse(n_qubits, s)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_qubits, terms)
    }

    /// Parses the JSON observable format.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let raw: RawObservable = serde_json::from_slice(bytes).map_err(|e| {
            Error::parse(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        let n_qubits = raw
            .n_qubits
            .as_u64()
            .filter(|&n| n >= 1 && n as usize <= super::string::MAX_QUBITS)
            .ok_or_else(|| {
                Error::parse("n_qubits", format!("expected an integer in 1..=64, got {}", raw.n_qubits))
            })? as usize;
        let mut terms = Vec::with_capacity(raw.terms.len());
        for (i, t) in raw.terms.iter().enumerate() {
            let location = format!("term {i}");
            let coeff = t
                .coeff
                .as_f64()
                .ok_or_else(|| Error::parse(&location, format!("coefficient {} is not a real number", t.coeff)))?;
            let string = PauliString::parse(n_qubits, &t.pauli).map_err(|e| {
                let message = match e {
                    Error::Domain(m) => m,
                    other => other.to_string(),
                };
                Error::parse(&location, message)
            })?;
            let term = PauliTerm::new(coeff, string).map_err(|e| Error::parse(&location, e.to_string()))?;
            terms.push(term);
        }
        Self::new(n_qubits, terms)
    }

    pub fn to_json(&self) -> String {
        let raw = RawObservable {
            n_qubits: self.n_qubits.into(),
            terms: self
                .terms
                .iter()
                .map(|t| RawTerm {
                    coeff: serde_json::Value::from(t.coeff),
                    pauli: t.string.to_string(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("observable serialization is infallible")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// Number of Pauli strings, identity included.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    /// Coefficient of the identity string, zero if absent.
    pub fn identity_offset(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.string.is_identity())
            .map(|t| t.coeff)
            .sum()
    }

    /// True iff the matrix of `O` is real (every term has an even number of Ys).
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.string.y_count() % 2 == 0)
    }

    /// True iff every string is built from I and Z only.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.string.x_mask() == 0)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.n_qubits,
            self.terms.iter().map(|t| PauliTerm {
                coeff: t.coeff * factor,
                string: t.string,
            }),
        )
    }

    /// Sub-observable made of the listed term indices (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let terms = indices
            .iter()
            .map(|&i| {
                self.terms
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Domain(format!("term index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.n_qubits, terms)
    }

    fn check_label(&self, label: BasisLabel) -> Result<()> {
        if self.n_qubits < 64 && label >> self.n_qubits != 0 {
            return Err(Error::Domain(format!(
                "basis label {label} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// `<m|O|n> = sum_i c_i <m|P_i|n>` in O(M) word operations.
    pub fn transition(&self, m: BasisLabel, n: BasisLabel) -> Result<Complex64> {
        self.check_label(m)?;
        self.check_label(n)?;
        Ok(self.transition_unchecked(m, n))
    }

    pub(crate) fn transition_unchecked(&self, m: BasisLabel, n: BasisLabel) -> Complex64 {
        let flip = m ^ n;
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            if t.string.x_mask() == flip {
                acc += t.string.phase_on(n) * t.coeff;
            }
        }
        if m == n {
            acc.im = 0.0;
        }
        acc
    }

    /// Matrix elements `<z_r|O|z_s>` for all pairs of the given labels, row-major.
    pub fn transition_table(&self, labels: &[BasisLabel]) -> Result<Vec<Complex64>> {
        for &l in labels {
            self.check_label(l)?;
        }
        let r = labels.len();
        let mut table = vec![Complex64::new(0.0, 0.0); r * r];
        for (a, &m) in labels.iter().enumerate() {
            for (b, &n) in labels.iter().enumerate().skip(a) {
                let v = self.transition_unchecked(m, n);
                table[a * r + b] = v;
                table[b * r + a] = v.conj();
            }
        }
        Ok(table)
    }

    /// Writes `O|input>` into `output` without forming the matrix.
    pub fn apply(&self, input: &[Complex64], output: &mut [Complex64]) -> Result<()> {
        let dim = self.dim();
        if input.len() != dim || output.len() != dim {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: input.len().max(1).trailing_zeros() as usize,
            });
        }
        self.apply_unchecked(input, output);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&self, input: &[Complex64], output: &mut [Complex64]) {
        // Gather form: (O psi)[m] = sum_i c_i phase_i(m ^ x_i) psi[m ^ x_i].
        let kernel = |m: usize, slot: &mut Complex64| {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in &self.terms {
                let n = m as u64 ^ t.string.x_mask();
                acc += t.string.phase_on(n) * (t.coeff * input[n as usize]);
            }
            *slot = acc;
        };
        if output.len() >= PARALLEL_DIM {
            output
                .par_iter_mut()
                .enumerate()
                .for_each(|(m, slot)| kernel(m, slot));
        } else {
            output
                .iter_mut()
                .enumerate()
                .for_each(|(m, slot)| kernel(m, slot));
        }
    }
}

/// Free-function form of [`Observable::from_json`].
pub fn parse_observable(bytes: &[u8]) -> Result<Observable> {
    Observable::from_json(bytes)
}

/// Free-function form of [`Observable::transition`].
pub fn observable_transition(m: BasisLabel, o: &Observable, n: BasisLabel) -> Result<Complex64> {
    o.transition(m, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_term() {
        let o = parse_observable(br#"{"n_qubits":1,"terms":[{"coeff":0.5,"pauli":"Z0"}]}"#).unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!(o.terms()[0].coeff, 0.5);
        assert_eq!(o.terms()[0].string.to_string(), "Z0");
    }

    #[test]
    fn merges_duplicates() {
        let o = parse_observable(
            br#"{"n_qubits":2,"terms":[{"coeff":0.2,"pauli":"X0 X1"},{"coeff":0.3,"pauli":"X1 X0"}]}"#,
        )
        .unwrap();
        assert_eq!(o.len(), 1);
        assert!((o.terms()[0].coeff - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cancelling_terms_are_dropped() {
        let o = Observable::from_pairs(2, &[(0.2, "Z0"), (-0.2, "Z0"), (1.0, "X1")]).unwrap();
        assert_eq!(o.len(), 1);
        assert_eq!(o.n_qubits(), 2);
    }

    #[test]
    fn keeps_declared_width() {
        let o = parse_observable(br#"{"n_qubits":5,"terms":[{"coeff":1.0,"pauli":"Z0"}]}"#).unwrap();
        assert_eq!(o.n_qubits(), 5);
    }

    #[test]
    fn parse_errors_name_the_term() {
        let cases: [&[u8]; 5] = [
            br#"{"n_qubits":4,"terms":[{"coeff":1.0,"pauli":"W3"}]}"#,
            br#"{"n_qubits":2,"terms":[{"coeff":1.0,"pauli":"Z0"},{"coeff":1.0,"pauli":"X2"}]}"#,
            br#"{"n_qubits":2,"terms":[{"coeff":[1.0,2.0],"pauli":"X0"}]}"#,
            br#"{"n_qubits":2,"terms":[{"coeff":1.0,"pauli":"X0 Y0"}]}"#,
            br#"{"n_qubits":2,"terms":[{"coeff":"1.0","pauli":"X0"}]}"#,
        ];
        for bytes in cases {
            match parse_observable(bytes) {
                Err(Error::Parse { location, .. }) => assert!(location.starts_with("term")),
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(matches!(
            parse_observable(b"{\"n_qubits\":2,"),
            Err(Error::Parse { .. })
        ));
        assert!(parse_observable(br#"{"n_qubits":0,"terms":[]}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let o = Observable::from_pairs(3, &[(-0.25, ""), (0.5, "X0 Y2"), (1e-3, "Z1")]).unwrap();
        let back = parse_observable(o.to_json().as_bytes()).unwrap();
        assert_eq!(o, back);
    }

    #[test]
    fn transition_examples() {
        let o = Observable::from_pairs(1, &[(0.5, "Z0"), (0.3, "X0")]).unwrap();
        assert_eq!(observable_transition(0, &o, 0).unwrap(), Complex64::new(0.5, 0.0));
        assert_eq!(observable_transition(0, &o, 1).unwrap(), Complex64::new(0.3, 0.0));
        assert!(observable_transition(0, &o, 2).is_err());
    }

    #[test]
    fn classification() {
        let o = Observable::from_pairs(2, &[(1.0, "Y0 Y1"), (0.5, "Z0")]).unwrap();
        assert!(o.is_real());
        assert!(!o.is_diagonal());
        let c = Observable::from_pairs(2, &[(1.0, "Y0 X1")]).unwrap();
        assert!(!c.is_real());
    }
}
