//! Sorted-insertion partitioning of Pauli terms into simultaneously measurable groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Observable, PauliString};

/// Compatibility relation between members of a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// Every term measured on its own.
    None,
    /// Qubit-wise commutation.
    Qwc,
    /// General commutation.
    Gc,
}

impl Relation {
    pub fn compatible(self, a: &PauliString, b: &PauliString) -> bool {
        match self {
            Relation::None => false,
            Relation::Qwc => a.qwc_unchecked(b),
            Relation::Gc => a.gc_unchecked(b),
        }
    }
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Relation::None => "none",
            Relation::Qwc => "qwc",
            Relation::Gc => "gc",
        })
    }
}

impl std::str::FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Relation::None),
            "qwc" => Ok(Relation::Qwc),
            "gc" => Ok(Relation::Gc),
            other => Err(Error::Domain(format!("unknown relation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingResult {
    pub relation: Relation,
    /// Term indices into the source observable.
    pub groups: Vec<Vec<usize>>,
    /// Rough two-qubit gate count of each group's measurement circuit.
    #[serde(default)]
    pub two_qubit_gate_cost: Vec<u64>,
}

/// `ceil(n^2 / log2 n)` for general-commutation groups, zero otherwise.
pub fn gate_cost(relation: Relation, n_qubits: usize) -> u64 {
    if relation != Relation::Gc || n_qubits <= 1 {
        return 0;
    }
    let n = n_qubits as f64;
    (n * n / n.log2()).ceil() as u64
}

impl GroupingResult {
    pub fn new(relation: Relation, groups: Vec<Vec<usize>>, n_qubits: usize) -> Self {
        let cost = gate_cost(relation, n_qubits);
        let two_qubit_gate_cost = groups
            .iter()
            .map(|g| if g.len() > 1 { cost } else { 0 })
            .collect();
        Self {
            relation,
            groups,
            two_qubit_gate_cost,
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grouping serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })
    }
}

/// Greedy grouping: terms ordered by descending `|c|` (ties by index), each
/// pass seeds a group with the largest remaining term and sweeps the rest.
pub fn sorted_insertion(o: &Observable, relation: Relation) -> GroupingResult {
    let terms = o.terms();
    let mut order: Vec<usize> = (0..terms.len())
        .filter(|&i| !terms[i].string.is_identity())
        .collect();
    order.sort_by(|&a, &b| terms[b].coeff.abs().total_cmp(&terms[a].coeff.abs()).then(a.cmp(&b)));

    let mut groups = Vec::new();
    let mut remaining = order;
    while !remaining.is_empty() {
        let mut group = vec![remaining[0]];
        let mut rest = Vec::with_capacity(remaining.len());
        for &i in &remaining[1..] {
            let fits = group
                .iter()
                .all(|&j| relation.compatible(&terms[i].string, &terms[j].string));
            if fits {
                group.push(i);
            } else {
                rest.push(i);
            }
        }
        groups.push(group);
        remaining = rest;
    }
    GroupingResult::new(relation, groups, o.n_qubits())
}

/// Outcome of [`verify_grouping`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verification {
    pub valid: bool,
    pub diagnostics: Vec<String>,
}

/// Checks that `result` partitions the non-identity terms of `o` and that
/// every intra-group pair satisfies the declared relation.
pub fn verify_grouping(o: &Observable, result: &GroupingResult) -> Verification {
    let terms = o.terms();
    let mut diagnostics = Vec::new();
    let mut seen = vec![0usize; terms.len()];
    for (g, group) in result.groups.iter().enumerate() {
        if group.is_empty() {
            diagnostics.push(format!("group {g} is empty"));
        }
        for (k, &i) in group.iter().enumerate() {
            let Some(term) = terms.get(i) else {
                diagnostics.push(format!("group {g} references missing term {i}"));
                continue;
            };
            seen[i] += 1;
            if term.string.is_identity() {
                diagnostics.push(format!("group {g} contains the identity term {i}"));
            }
            for &j in &group[k + 1..] {
                let Some(other) = terms.get(j) else { continue };
                let ok = match result.relation {
                    Relation::None => false,
                    _ => result.relation.compatible(&term.string, &other.string),
                };
                if !ok {
                    diagnostics.push(format!(
                        "group {g}: terms {i} and {j} violate {}",
                        result.relation
                    ));
                }
            }
        }
    }
    for (i, (&count, term)) in seen.iter().zip(terms).enumerate() {
        if term.string.is_identity() {
            continue;
        }
        match count {
            0 => diagnostics.push(format!("term {i} is not covered")),
            1 => {}
            n => diagnostics.push(format!("term {i} appears {n} times")),
        }
    }
    Verification {
        valid: diagnostics.is_empty(),
        diagnostics,
    }
}
