//! Single runs, ε-sweeps and ledger checks.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use bvdp_core::bv_diagnostics::{diagnose, DiagnosticsReport};
use bvdp_core::energetics::Model;
use bvdp_core::linalg::DenseMatrix;
use bvdp_core::reparam::{
    arclength, change_of_variables_gap, from_samples, max_abs, normalization_residual, reparam_edb_residual, rescale,
    ReparamTrajectory,
};
use bvdp_core::tensor_mesh::nonlocal::{assemble_from_weights, PairWeights};
use bvdp_core::tensor_mesh::Mesh;
use bvdp_core::viscous_solver::{simulate, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Result, RunError};
use crate::ledger::{self, Manifest, RunSummary, Samples, Status};

/// Mesh and nonlocal matrix, shared by every viscosity of a sweep.
#[derive(Clone, Debug)]
pub struct Problem {
    pub mesh: Mesh,
    pub a_m: Arc<DenseMatrix>,
}

impl Problem {
    /// Builds the mesh and assembles `A_m`, element-pair rows in parallel on
    /// the current rayon pool.
    pub fn assemble(cfg: &RunConfig) -> Result<Self> {
        let mesh = cfg.build_mesh()?;
        let pw = PairWeights::new(&mesh, cfg.material.m, &cfg.nonlocal)?;
        let rows: Vec<(usize, Vec<(usize, f64)>)> =
            (0..mesh.n_elements()).into_par_iter().map(|t| (t, pw.row(t))).collect();
        let a_m = assemble_from_weights(&mesh, rows);
        Ok(Self { mesh, a_m: Arc::new(a_m) })
    }

    pub fn model(&self, cfg: &RunConfig, eps: f64) -> Result<Model> {
        Ok(Model::new(self.mesh.clone(), cfg.material.with_eps(eps), cfg.loads.clone(), self.a_m.clone())?)
    }
}

/// Everything a run produced, in memory and on disk.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub model: Model,
    pub manifest: Manifest,
    pub trajectory: Trajectory,
    pub reparam: Option<ReparamTrajectory>,
    pub diagnostics: Option<DiagnosticsReport>,
}

impl RunOutcome {
    pub fn status(&self) -> Status {
        self.manifest.status
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Solves, reparameterizes, diagnoses and writes the ledger to
/// `cfg.output.dir`.
pub fn run_single(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = pool(cfg.sweep.workers)?.install(|| Problem::assemble(cfg))?;
    run_with(&problem, cfg, cfg.material.eps, &cfg.output.dir)
}

/// [`run_single`] for one viscosity on an assembled problem.
pub fn run_with(problem: &Problem, cfg: &RunConfig, eps: f64, dir: &Path) -> Result<RunOutcome> {
    let started = Instant::now();
    let dir = ledger::ensure_dir(dir)?;
    let mut cfg = cfg.clone();
    cfg.material.eps = eps;
    cfg.output.dir = dir.clone();
    let cfg_path = dir.join(ledger::CONFIG_FILE);
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(RunError::io(&cfg_path))?;
    for stale in ledger::HASHED_FILES.iter().chain([&ledger::DIAGNOSTICS_FILE]) {
        let _ = std::fs::remove_file(dir.join(stale));
    }

    let model = problem.model(&cfg, eps)?;
    log::info!("eps = {eps:e}: solving on [0, {}] with tau = {:e}", cfg.time.t_end, cfg.time.tau);
    let traj = simulate(&model, model.initial_state(), 0.0, cfg.time.t_end, cfg.time.tau, &cfg.solver)?;
    ledger::write_csv(&dir.join(ledger::STEPS_FILE), &ledger::step_rows(&traj))?;
    let mut summary = trajectory_summary(&traj);
    let mut failed_checks = Vec::new();
    let (mut reparam, mut diagnostics) = (None, None);

    let status = if let Some(f) = &traj.failure {
        log::warn!("eps = {eps:e}: step at t = {} failed: {}", f.t_start, f.message);
        Status::FailedStep
    } else {
        let rpt = rescale(&model, &traj, &arclength(&traj), &cfg.reparam)?;
        let report = diagnose(&model, &rpt, &cfg.diagnostics)?;
        ledger::write_csv(&dir.join(ledger::REPARAM_FILE), &ledger::reparam_rows(&rpt, &report.regimes))?;
        ledger::write_samples(&dir.join(ledger::SAMPLES_FILE), &Samples::of(&rpt))?;
        ledger::write_json(&dir.join(ledger::DIAGNOSTICS_FILE), &ledger::diagnostics_json(&report))?;
        reparam_summary(&mut summary, &rpt, &traj);
        summary.diagnostics_passed = Some(report.passed());
        failed_checks = run_checks(&cfg, &summary, &report);
        reparam = Some(rpt);
        diagnostics = Some(report);
        if failed_checks.is_empty() {
            Status::Ok
        } else {
            Status::FailedCheck
        }
    };
    let (files, hash) = ledger::content_hashes(&dir)?;
    let manifest = Manifest {
        status,
        eps,
        tau: cfg.time.tau,
        t_end: cfg.time.t_end,
        failure: traj.failure.as_ref().map(|f| format!("t = {}, tau = {:e}: {}", f.t_start, f.tau, f.message)),
        failed_checks,
        summary,
        files,
        hash,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    ledger::write_json(&dir.join(ledger::MANIFEST_FILE), &manifest)?;
    log::info!("eps = {eps:e}: {:?} in {:.1} s", manifest.status, manifest.elapsed_seconds);
    Ok(RunOutcome { dir, model, manifest, trajectory: traj, reparam, diagnostics })
}

fn trajectory_summary(traj: &Trajectory) -> RunSummary {
    let ledger = traj.ledger();
    let (dz, dp) = traj.total_variations();
    let fold = |f: fn(&bvdp_core::viscous_solver::StepReport) -> f64| traj.steps.iter().map(f).fold(0.0, f64::max);
    RunSummary {
        steps: traj.steps.len(),
        halvings: traj.steps.iter().map(|s| s.halvings).max().unwrap_or(0),
        max_edb_residual: ledger.iter().map(|r| r.edb_residual).fold(0.0, f64::max),
        final_edb_residual: ledger.last().map_or(0.0, |r| r.edb_residual),
        unidirectional: traj.is_unidirectional(),
        m0_observed: traj.min_z(),
        total_dz_l1: dz,
        total_dp_l1: dp,
        max_kkt_p: fold(|s| s.kkt_p),
        max_kkt_z: fold(|s| s.kkt_z),
        max_objective_rise: fold(|s| s.objective_rise),
        ..Default::default()
    }
}

fn reparam_summary(summary: &mut RunSummary, rpt: &ReparamTrajectory, traj: &Trajectory) {
    summary.arclength = Some(rpt.total);
    summary.m_eps_integral = Some(rpt.m_eps_integral());
    summary.max_norm_residual = Some(max_abs(&normalization_residual(rpt)));
    summary.max_reparam_edb_residual = Some(reparam_edb_residual(rpt).into_iter().fold(0.0, f64::max));
    summary.change_of_variables_gap = Some(change_of_variables_gap(rpt, traj));
}

fn run_checks(cfg: &RunConfig, s: &RunSummary, report: &DiagnosticsReport) -> Vec<String> {
    let mut failed = Vec::new();
    if s.max_edb_residual > cfg.checks.max_edb_residual {
        failed.push(format!("EDB residual {:e} exceeds {:e}", s.max_edb_residual, cfg.checks.max_edb_residual));
    }
    if !s.unidirectional {
        failed.push("damage increased at some dof".into());
    }
    if !(s.m0_observed > 0.0) {
        failed.push(format!("damage reached {:e}", s.m0_observed));
    }
    let c = &report.cornerstone_summary;
    if !c.passed {
        failed.push(format!("two-point estimate: min slack {:e}, min ARV {:e}", c.min_slack, c.min_arv));
    }
    if let Some(m) = report.mediesci.iter().find(|m| !(m.holds && m.iterations as f64 <= m.iteration_bound)) {
        failed.push(format!("partition on samples {}..={} fails", m.first, m.last));
    }
    failed
}

/// Cross-viscosity comparison at shared arclength points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    pub status: Vec<Status>,
    pub hashes: Vec<String>,
    /// `S_ε` per member.
    pub arclength: Vec<f64>,
    pub m_eps_integral: Vec<f64>,
    /// Shared points in `(0, min S_ε]`.
    pub s: Vec<f64>,
    /// `energy[k][i] = E(t_ε(s_i), q_ε(s_i))` for member `k`.
    pub energy: Vec<Vec<f64>>,
    /// `differences[k][i] = |energy[k][i] − energy[k+1][i]|`.
    pub differences: Vec<Vec<f64>>,
    /// Differences at or below this count as converged.
    pub converged_below: f64,
    /// Points where the differences decrease along the whole list.
    pub decreasing: usize,
    /// `max S_ε / min S_ε`.
    pub arclength_ratio: f64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub members: Vec<RunOutcome>,
    /// `None` when some member has no reparameterized trajectory.
    pub report: Option<SweepReport>,
}

impl SweepOutcome {
    /// Worst member status.
    pub fn status(&self) -> Status {
        let st: Vec<Status> = self.members.iter().map(|m| m.status()).collect();
        if st.contains(&Status::FailedStep) {
            Status::FailedStep
        } else if st.contains(&Status::FailedCheck) {
            Status::FailedCheck
        } else {
            Status::Ok
        }
    }
}

pub fn member_dir(root: &Path, k: usize, eps: f64) -> PathBuf {
    root.join(format!("member_{k}_eps_{eps:e}"))
}

/// Runs every viscosity of `cfg.sweep.eps` on a pool of `cfg.sweep.workers`
/// threads and compares the members.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    if cfg.sweep.eps.len() < 2 {
        return Err(RunError::Config("a sweep needs at least two eps values".into()));
    }
    let root = ledger::ensure_dir(&cfg.output.dir)?;
    let workers = pool(cfg.sweep.workers)?;
    let problem = workers.install(|| Problem::assemble(cfg))?;
    let members: Vec<RunOutcome> = workers.install(|| {
        cfg.sweep
            .eps
            .par_iter()
            .enumerate()
            .map(|(k, &eps)| run_with(&problem, cfg, eps, &member_dir(&root, k, eps)))
            .collect::<Result<_>>()
    })?;
    let report = compare_members(&members, cfg.sweep.shared_samples)?;
    if let Some(r) = &report {
        write_sweep(&root, r)?;
    }
    Ok(SweepOutcome { dir: root, members, report })
}

fn compare_members(members: &[RunOutcome], n: usize) -> Result<Option<SweepReport>> {
    let Some(rpts) = members.iter().map(|m| m.reparam.as_ref()).collect::<Option<Vec<_>>>() else {
        return Ok(None);
    };
    let arclength: Vec<f64> = rpts.iter().map(|r| r.total).collect();
    let s_min = arclength.iter().copied().fold(f64::INFINITY, f64::min);
    let s: Vec<f64> = (1..=n).map(|i| s_min * i as f64 / n as f64).collect();
    let mut energy = Vec::with_capacity(members.len());
    for (m, r) in members.iter().zip(&rpts) {
        let e = s
            .iter()
            .map(|&si| {
                let (t, q) = r.state_at(si);
                m.model.energy(t, &q)
            })
            .collect::<bvdp_core::Result<Vec<f64>>>()?;
        energy.push(e);
    }
    let differences: Vec<Vec<f64>> =
        energy.windows(2).map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).collect()).collect();
    let scale = energy.iter().flatten().fold(1.0f64, |m, e| m.max(e.abs()));
    let converged_below = 1e-12 * scale;
    let decreasing = (0..n)
        .filter(|&i| differences.windows(2).all(|w| w[1][i] < w[0][i] || w[0][i].max(w[1][i]) <= converged_below))
        .count();
    let s_max = arclength.iter().copied().fold(0.0, f64::max);
    Ok(Some(SweepReport {
        eps: members.iter().map(|m| m.manifest.eps).collect(),
        status: members.iter().map(|m| m.status()).collect(),
        hashes: members.iter().map(|m| m.manifest.hash.clone()).collect(),
        m_eps_integral: rpts.iter().map(|r| r.m_eps_integral()).collect(),
        arclength,
        s,
        energy,
        differences,
        converged_below,
        decreasing,
        arclength_ratio: s_max / s_min,
    }))
}

#[derive(Serialize)]
struct SweepRow {
    s: f64,
    member: usize,
    eps: f64,
    energy: f64,
    /// Difference to the next member, empty for the last.
    difference: Option<f64>,
}

fn write_sweep(root: &Path, r: &SweepReport) -> Result<()> {
    let mut rows = Vec::new();
    for (i, &s) in r.s.iter().enumerate() {
        for k in 0..r.eps.len() {
            rows.push(SweepRow {
                s,
                member: k,
                eps: r.eps[k],
                energy: r.energy[k][i],
                difference: r.differences.get(k).map(|d| d[i]),
            });
        }
    }
    ledger::write_csv(&root.join("sweep.csv"), &rows)?;
    ledger::write_json(&root.join("sweep.json"), r)
}

/// Result of re-running the diagnostics on a persisted ledger.
#[derive(Debug)]
pub struct CheckOutcome {
    pub status: Status,
    pub problems: Vec<String>,
    pub diagnostics: Option<DiagnosticsReport>,
}

/// Verifies the content hashes of `dir`, rebuilds the reparameterized run
/// from its samples, re-runs the diagnostics and rewrites
/// `diagnostics.json`.
pub fn check(dir: &Path, workers: usize) -> Result<CheckOutcome> {
    let manifest = ledger::read_manifest(dir)?;
    let cfg = RunConfig::load(&dir.join(ledger::CONFIG_FILE))?;
    let mut problems = Vec::new();
    let (files, hash) = ledger::content_hashes(dir)?;
    if files != manifest.files || hash != manifest.hash {
        problems.push(format!("content hash {hash} does not match the recorded {}", manifest.hash));
    }
    if manifest.status == Status::FailedStep {
        problems.push("run ended with a failed step; nothing to diagnose".into());
        return Ok(CheckOutcome { status: Status::FailedCheck, problems, diagnostics: None });
    }
    let problem = pool(workers)?.install(|| Problem::assemble(&cfg))?;
    let model = problem.model(&cfg, manifest.eps)?;
    let x = ledger::read_samples(&dir.join(ledger::SAMPLES_FILE))?;
    let rpt = from_samples(&model, x.eps, x.total, x.s, x.t, x.states, &cfg.reparam)?;
    let report = diagnose(&model, &rpt, &cfg.diagnostics)?;
    ledger::write_json(&dir.join(ledger::DIAGNOSTICS_FILE), &ledger::diagnostics_json(&report))?;
    if !report.passed() {
        let c = &report.cornerstone_summary;
        problems.push(format!("diagnostics fail: min slack {:e}, min ARV {:e}", c.min_slack, c.min_arv));
    }
    let status = if problems.is_empty() { Status::Ok } else { Status::FailedCheck };
    Ok(CheckOutcome { status, problems, diagnostics: Some(report) })
}
