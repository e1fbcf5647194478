use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::BasisLabel;

/// Largest register width representable by the 64-bit symplectic masks.
pub const MAX_QUBITS: usize = 64;

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Z => (false, true),
            Pauli::Y => (true, true),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A tensor product of single-qubit Paulis in symplectic form.
///
/// Qubit `s` carries an X component iff bit `s` of `x_mask` is set and a Z
/// component iff bit `s` of `z_mask` is set; both set means Y. Phases are not
/// tracked: the string always denotes the Hermitian operator `P`, so `Y` is
/// the usual Pauli-Y and not `XZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x_mask: u64,
    z_mask: u64,
}

fn width_mask(n_qubits: usize) -> u64 {
    if n_qubits >= 64 {
        u64::MAX
    } else {
        (1u64 << n_qubits) - 1
    }
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::from_masks(n_qubits, 0, 0)
    }

    pub fn from_masks(n_qubits: usize, x_mask: u64, z_mask: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Domain(format!(
                "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let outside = !width_mask(n_qubits);
        if (x_mask | z_mask) & outside != 0 {
            return Err(Error::Domain(format!(
                "mask bits set beyond qubit {}",
                n_qubits - 1
            )));
        }
        Ok(Self {
            n_qubits,
            x_mask,
            z_mask,
        })
    }

    /// Builds a string from `(qubit, letter)` pairs; qubits not mentioned are identity.
    pub fn from_letters(n_qubits: usize, letters: &[(usize, Pauli)]) -> Result<Self> {
        let mut x = 0u64;
        let mut z = 0u64;
        let mut seen = 0u64;
        for &(q, p) in letters {
            if q >= n_qubits {
                return Err(Error::Domain(format!(
                    "qubit index {q} out of range for {n_qubits} qubits"
                )));
            }
            if seen >> q & 1 == 1 {
                return Err(Error::Domain(format!("duplicate qubit index {q}")));
            }
            seen |= 1 << q;
            let (xb, zb) = p.bits();
            x |= (xb as u64) << q;
            z |= (zb as u64) << q;
        }
        Self::from_masks(n_qubits, x, z)
    }

    /// Parses the token form `"X0 Y2 Z3"`; the empty string is the identity.
    pub fn parse(n_qubits: usize, text: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for token in text.split_whitespace() {
            let mut chars = token.chars();
            let letter = match chars.next() {
                Some('X') => Pauli::X,
                Some('Y') => Pauli::Y,
                Some('Z') => Pauli::Z,
                _ => return Err(Error::Domain(format!("malformed token `{token}`"))),
            };
            let digits = chars.as_str();
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::Domain(format!("malformed token `{token}`")));
            }
            let qubit: usize = digits
                .parse()
                .map_err(|_| Error::Domain(format!("malformed token `{token}`")))?;
            letters.push((qubit, letter));
        }
        Self::from_letters(n_qubits, &letters)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> u32 {
        (self.x_mask | self.z_mask).count_ones()
    }

    /// Number of Y letters; the matrix of `P` is real iff this is even.
    pub fn y_count(&self) -> u32 {
        (self.x_mask & self.z_mask).count_ones()
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x_mask >> qubit & 1 == 1, self.z_mask >> qubit & 1 == 1)
    }

    fn check_same_width(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(())
    }

    /// True iff the two strings commute letter by letter.
    pub fn qubit_wise_commutes(&self, other: &Self) -> Result<bool> {
        self.check_same_width(other)?;
        Ok(self.qwc_unchecked(other))
    }

    /// True iff the two strings commute as operators (even symplectic form).
    pub fn generally_commutes(&self, other: &Self) -> Result<bool> {
        self.check_same_width(other)?;
        Ok(self.gc_unchecked(other))
    }

    pub(crate) fn qwc_unchecked(&self, other: &Self) -> bool {
        let support = (self.x_mask | self.z_mask) & (other.x_mask | other.z_mask);
        let differ = (self.x_mask ^ other.x_mask) | (self.z_mask ^ other.z_mask);
        support & differ == 0
    }

    pub(crate) fn gc_unchecked(&self, other: &Self) -> bool {
        let form = (self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask);
        form.count_ones() % 2 == 0
    }

    /// `P|n> = phase(n) |n ^ x_mask>`; this returns `phase(n)`.
    #[inline]
    pub(crate) fn phase_on(&self, n: BasisLabel) -> Complex64 {
        let sign_flips = (self.z_mask & n).count_ones();
        let base = i_power(self.y_count());
        if sign_flips % 2 == 0 {
            base
        } else {
            -base
        }
    }

    /// `<m|P|n>`, evaluated in O(1) word operations.
    pub fn transition(&self, m: BasisLabel, n: BasisLabel) -> Result<Complex64> {
        let limit = width_mask(self.n_qubits);
        if m & !limit != 0 || n & !limit != 0 {
            return Err(Error::Domain(format!(
                "basis labels ({m}, {n}) out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(self.transition_unchecked(m, n))
    }

    #[inline]
    pub(crate) fn transition_unchecked(&self, m: BasisLabel, n: BasisLabel) -> Complex64 {
        if m != n ^ self.x_mask {
            Complex64::new(0.0, 0.0)
        } else {
            self.phase_on(n)
        }
    }
}

/// `i^k` without floating-point drift.
#[inline]
pub(crate) fn i_power(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for q in 0..self.n_qubits {
            let p = self.letter(q);
            if p == Pauli::I {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{}{}", p.as_char(), q)?;
            first = false;
        }
        Ok(())
    }
}

/// Parses `"<n>:<tokens>"`, e.g. `"4:X0 Z3"`.
impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (n, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Domain(format!("expected `<n_qubits>:<tokens>`, got `{s}`")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("bad qubit count in `{s}`")))?;
        Self::parse(n, rest)
    }
}

/// Free-function form of [`PauliString::qubit_wise_commutes`].
pub fn qubit_wise_commutes(p: &PauliString, q: &PauliString) -> Result<bool> {
    p.qubit_wise_commutes(q)
}

/// Free-function form of [`PauliString::generally_commutes`].
pub fn generally_commutes(p: &PauliString, q: &PauliString) -> Result<bool> {
    p.generally_commutes(q)
}

/// Free-function form of [`PauliString::transition`].
pub fn pauli_transition(m: BasisLabel, p: &PauliString, n: BasisLabel) -> Result<Complex64> {
    p.transition(m, n)
}
