//! One function per subcommand; each returns a report.

use std::path::{Path, PathBuf};

use cbs_core::cbs::{cbs_expectation, interference_set, symmetry_filter, truncate, truncation_bound};
use cbs_core::grouping::{sorted_insertion, Relation};
use cbs_core::sampling::{run_procedure_2, run_procedure_3, ExperimentConfig};
use cbs_core::state::{basis_probabilities, expectation, ground_state_with, GroundStateOptions};
use cbs_core::variance::{
    cbs_exact_report, cbs_heuristic_report, conventional_variance, shots_to_target, AllocationMode, VarianceReport,
};
use cbs_core::{Error, Observable, Result, StateVector};
use serde_json::{json, Value};

use crate::report::Report;

/// Budget used when only the shot-independent constant `c_v` is wanted.
const NOMINAL_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Exact,
    Heuristic,
    Haar,
}

impl From<Mode> for AllocationMode {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Exact => AllocationMode::Exact,
            Mode::Heuristic => AllocationMode::HeuristicW,
            Mode::Haar => AllocationMode::Haar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        s == Switch::On
    }
}

pub fn load_hamiltonian(path: &Path) -> Result<Observable> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Observable::from_json(&bytes)
}

/// Reference state: read from `state` if given, otherwise the ground state of `h`.
pub struct Instance {
    pub h: Observable,
    pub psi: StateVector,
    pub energy: f64,
}

pub fn instance(hamiltonian: &Path, state: Option<&PathBuf>, seed: u64) -> Result<Instance> {
    let h = load_hamiltonian(hamiltonian)?;
    let psi = match state {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            StateVector::read_binary(std::io::BufReader::new(file))?
        }
        None => solve(&h, seed)?.state,
    };
    let energy = expectation(&h, &psi)?;
    Ok(Instance { h, psi, energy })
}

fn solve(h: &Observable, seed: u64) -> Result<cbs_core::GroundStateResult> {
    let opts = GroundStateOptions {
        tol: 1e-10,
        seed,
        ..Default::default()
    };
    ground_state_with(h, &opts)
}

pub fn ground_state(hamiltonian: &Path, seed: u64, state_out: Option<&PathBuf>) -> Result<Report> {
    let h = load_hamiltonian(hamiltonian)?;
    let gs = solve(&h, seed)?;
    if let Some(path) = state_out {
        let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        gs.state.write_binary(std::io::BufWriter::new(file))?;
    }
    Ok(Report::record(vec![
        ("n_qubits", json!(h.n_qubits())),
        ("terms", json!(h.len())),
        ("energy", json!(gs.energy)),
        ("residual", json!(gs.residual)),
        ("degenerate", json!(gs.degenerate)),
        ("first_excited", json!(gs.first_excited)),
    ]))
}

pub fn truncation(inst: &Instance, epsilon: f64, particle_number: Option<u32>) -> Result<Report> {
    let mut probs = basis_probabilities(&inst.psi);
    let mut rejected = 0.0;
    if let Some(n) = particle_number {
        let filtered = symmetry_filter(&probs, n)?;
        rejected = filtered.rejected_mass;
        probs = filtered.probs;
    }
    let t = truncate(&probs, epsilon)?;
    let psi_r = t.truncated_state(&inst.psi)?;
    let e_r = expectation(&inst.h, &psi_r)?;
    Ok(Report::record(vec![
        ("r", json!(t.r())),
        ("labels", json!(t.labels)),
        ("weights", json!(t.weights)),
        ("infidelity", json!(t.infidelity)),
        ("rejected_mass", json!(rejected)),
        ("energy_exact", json!(inst.energy)),
        ("energy_truncated", json!(e_r)),
        ("delta_e", json!(e_r - inst.energy)),
        ("bound", json!(truncation_bound(&inst.h, t.infidelity)?)),
    ]))
}

pub fn estimate(inst: &Instance, epsilon: f64, normalize: bool) -> Result<Report> {
    let t = truncate(&basis_probabilities(&inst.psi), epsilon)?;
    let intf = interference_set(&inst.psi, &t)?;
    let value = cbs_expectation(&inst.h, &t, &intf, normalize)?;
    Ok(Report::record(vec![
        ("r", json!(t.r())),
        ("normalize", json!(normalize)),
        ("estimate", json!(value)),
        ("energy_exact", json!(inst.energy)),
        ("delta_e", json!(value - inst.energy)),
    ]))
}

fn cbs_report(inst: &Instance, epsilon: f64, mode: Mode, w: f64, total: u64) -> Result<VarianceReport> {
    let t = truncate(&basis_probabilities(&inst.psi), epsilon)?;
    let intf = interference_set(&inst.psi, &t)?;
    match mode {
        Mode::Exact => cbs_exact_report(&inst.h, &t, &intf, total),
        Mode::Heuristic => cbs_heuristic_report(&inst.h, &t, &intf, w, total),
        Mode::Haar => Err(Error::Domain("haar allocation applies to grouped estimators only".into())),
    }
}

fn grouped_report(inst: &Instance, relation: Relation, mode: Mode, total: u64) -> Result<VarianceReport> {
    let grouping = sorted_insertion(&inst.h, relation);
    conventional_variance(&inst.h, &grouping, &inst.psi, mode.into(), total)
}

pub fn variance(
    inst: &Instance,
    relation: Option<Relation>,
    mode: Mode,
    epsilon: f64,
    w: f64,
    shots: u64,
) -> Result<Report> {
    let report = match relation {
        None => cbs_report(inst, epsilon, mode, w, shots)?,
        Some(rel) => grouped_report(inst, rel, mode, shots)?,
    };
    let mut table = Report::new(&["name", "v", "shots"]);
    for s in &report.streams {
        table.push(vec![json!(s.name), json!(s.v), json!(s.shots)]);
    }
    let json: Value = serde_json::from_str(&report.to_json()).map_err(|e| Error::Io(e.to_string()))?;
    Ok(table.with_json(json))
}

pub fn shots(inst: &Instance, epsilon: f64, w: f64, target_sd: f64) -> Result<Report> {
    let mut table = Report::new(&["method", "mode", "c_v", "shots"]);
    let mut push = |method: &str, mode: AllocationMode, c_v: f64| -> Result<()> {
        table.push(vec![
            json!(method),
            json!(mode.to_string()),
            json!(c_v),
            json!(shots_to_target(c_v, target_sd)?),
        ]);
        Ok(())
    };
    push("cbs", AllocationMode::Exact, cbs_report(inst, epsilon, Mode::Exact, w, NOMINAL_BUDGET)?.c_v)?;
    push(
        "cbs",
        AllocationMode::HeuristicW,
        cbs_report(inst, epsilon, Mode::Heuristic, w, NOMINAL_BUDGET)?.c_v,
    )?;
    for rel in [Relation::None, Relation::Qwc, Relation::Gc] {
        for mode in [Mode::Exact, Mode::Haar] {
            let r = grouped_report(inst, rel, mode, NOMINAL_BUDGET)?;
            push(&rel.to_string(), mode.into(), r.c_v)?;
        }
    }
    Ok(table)
}

pub fn simulate(inst: &Instance, cfg: &ExperimentConfig) -> Result<Report> {
    if cfg.outer_m_prime == 1 {
        let r = run_procedure_2(&inst.h, &inst.psi, cfg)?;
        let mut table = Report::new(&["seed", "r_tilde", "energy", "total_shots"]);
        for rep in &r.replicas {
            table.push(vec![json!(rep.seed), json!(rep.r_tilde), json!(rep.energy), json!(rep.total_shots)]);
        }
        let summary = json!({
            "energy_exact": inst.energy,
            "replicas": r.replicas.len(),
            "failures": r.failures,
            "mean": r.mean,
            "sd": r.sd,
            "mean_shots": r.mean_shots,
            "sigma_one": r.sigma_one,
        });
        Ok(table.with_json(summary))
    } else {
        let s = run_procedure_3(&inst.h, &inst.psi, cfg)?;
        let mut table = Report::new(&["outer", "mu", "sigma_one"]);
        for (i, (mu, sigma)) in s.mus.iter().zip(&s.sigma_ones).enumerate() {
            table.push(vec![json!(i), json!(mu), json!(sigma)]);
        }
        let summary = json!({
            "energy_exact": inst.energy,
            "outer": s.mus.len(),
            "failures": s.failures,
            "mean_mu": s.mean_mu,
            "sd_mu": s.sd_mu,
            "mean_sigma_one": s.mean_sigma_one,
            "sd_sigma_one": s.sd_sigma_one,
        });
        Ok(table.with_json(summary))
    }
}

pub fn group(hamiltonian: &Path, relation: Relation) -> Result<Report> {
    let h = load_hamiltonian(hamiltonian)?;
    let result = sorted_insertion(&h, relation);
    let mut table = Report::new(&["group", "term", "coeff", "pauli"]);
    for (g, members) in result.groups.iter().enumerate() {
        for &i in members {
            let t = &h.terms()[i];
            table.push(vec![json!(g), json!(i), json!(t.coeff), json!(t.string.to_string())]);
        }
    }
    let json: Value = serde_json::from_str(&result.to_json()).map_err(|e| Error::Io(e.to_string()))?;
    Ok(table.with_json(json))
}
