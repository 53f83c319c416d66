//! Time-incremental solution of the viscous damage-plasticity system by
//! staggered minimization, with the energy-dissipation balance tracked as a
//! residual.
//!
//! One step from `t_k` to `t_{k+1} = t_k + τ` first solves `(u, p)` at the old
//! damage, then alternates a damage update with a coupled `(u, p)` solve until
//! the increments stall. The coupled solve eliminates `p` per element through
//! the viscous return map, so the flow rule holds to round-off at the end of
//! every step. Failed steps are retried with `τ/2` up to `max_halvings` times.

mod damage;
mod equilibrium;
mod plastic;

pub use damage::{damage_kkt, update_z, DamageProblem, DamageSolve};
pub use equilibrium::{solve_coupled, solve_momentum, CoupledSolve};
pub use plastic::{consistent_tangent, inclusion_residual, update_p, ReturnMap};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::energetics::{EnergyParts, Model, Slopes, State};
use crate::tensor_mesh::SymTensor2;
use crate::{Error, Result};

/// Tolerances and iteration limits.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SolverSettings {
    /// Momentum residual in the `K(z)⁻¹` norm.
    pub tol_u: f64,
    /// Damage KKT residual.
    pub tol_z: f64,
    /// Flow-rule inclusion residual, per element.
    pub tol_p: f64,
    /// `‖Δu‖ + ‖Δz‖ + ‖Δp‖` between staggered sweeps.
    pub tol_stag: f64,
    /// Inner damage solves stop at `tol_z · inner_tol_factor`.
    pub inner_tol_factor: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    pub max_z_iters: usize,
    pub max_halvings: u32,
    pub z_floor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_u: 1e-9,
            tol_z: 1e-7,
            tol_p: 1e-10,
            tol_stag: 1e-9,
            inner_tol_factor: 1e-2,
            max_outer: 200,
            max_newton: 50,
            max_z_iters: 100,
            max_halvings: 3,
            z_floor: 1e-4,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.tol_u, self.tol_z, self.tol_p, self.tol_stag, self.inner_tol_factor, self.z_floor];
        if tols.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Parameter("solver tolerances and z_floor must be positive and finite".into()));
        }
        if self.max_outer == 0 || self.max_newton == 0 || self.max_z_iters == 0 {
            return Err(Error::Parameter("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Per-step record of the incremental solve and its ledger contributions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    /// End time `t_{k+1}`.
    pub t: f64,
    pub tau: f64,
    pub outer_iters: usize,
    pub newton_iters: usize,
    pub r_u: f64,
    pub kkt_z: f64,
    /// Maximum flow-rule residual over elements.
    pub kkt_p: f64,
    pub dz_l2: f64,
    pub dp_l2: f64,
    pub dz_l1: f64,
    pub dp_l1: f64,
    /// `R(Δz)`.
    pub r_inc: f64,
    /// `H(z_{k+1}, Δp)`.
    pub h_inc: f64,
    /// `(ε/2τ)(‖Δz‖² + ‖Δp‖²)`.
    pub visc_inc: f64,
    /// `(τ/2ε)(d_z² + d_p²)` at the new state.
    pub conj_inc: f64,
    /// Trapezoidal `∫ ∂_tE`.
    pub work_inc: f64,
    /// Number of times `τ` was halved to reach this step.
    pub halvings: u32,
    /// Largest increase of the incremental objective between consecutive
    /// sweeps, zero when the sweeps are monotone.
    pub objective_rise: f64,
}

impl StepReport {
    pub fn dissipated(&self) -> f64 {
        self.r_inc + self.h_inc + self.visc_inc + self.conj_inc
    }
}

/// Energetic data at one time node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeRecord {
    pub t: f64,
    pub energy: EnergyParts,
    pub d_t_energy: f64,
    pub slopes: Slopes,
}

/// A step that could not be completed even after halving.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFailure {
    pub t_start: f64,
    pub tau: f64,
    pub message: String,
}

/// Cumulative energy-dissipation ledger at one node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub energy: f64,
    pub r_cum: f64,
    pub h_cum: f64,
    pub visc_cum: f64,
    pub conj_cum: f64,
    pub work_cum: f64,
    pub edb_residual: f64,
}

/// Time-discrete viscous solution.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub eps: f64,
    pub states: Vec<State>,
    pub nodes: Vec<NodeRecord>,
    /// `steps[k]` leads from node `k` to node `k + 1`.
    pub steps: Vec<StepReport>,
    pub failure: Option<StepFailure>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.t).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    /// Smallest damage value seen along the trajectory.
    pub fn min_z(&self) -> f64 {
        self.states.iter().flat_map(|s| s.z.iter()).fold(f64::INFINITY, |m, z| m.min(*z))
    }

    /// `true` iff `z` never increases at any dof.
    pub fn is_unidirectional(&self) -> bool {
        self.states.windows(2).all(|w| w[1].z.iter().zip(&w[0].z).all(|(a, b)| a <= b))
    }

    /// Cumulative ledger at every node.
    pub fn ledger(&self) -> Vec<LedgerRow> {
        let mut rows = Vec::with_capacity(self.nodes.len());
        let e0 = self.nodes[0].energy.total();
        let mut acc = LedgerRow { t: self.nodes[0].t, energy: e0, ..Default::default() };
        rows.push(acc);
        for (k, s) in self.steps.iter().enumerate() {
            acc.t = self.nodes[k + 1].t;
            acc.energy = self.nodes[k + 1].energy.total();
            acc.r_cum += s.r_inc;
            acc.h_cum += s.h_inc;
            acc.visc_cum += s.visc_inc;
            acc.conj_cum += s.conj_inc;
            acc.work_cum += s.work_inc;
            let diss = acc.r_cum + acc.h_cum + acc.visc_cum + acc.conj_cum;
            acc.edb_residual = (acc.energy + diss - e0 - acc.work_cum).abs() / (e0.abs() + diss + 1.0);
            rows.push(acc);
        }
        rows
    }

    /// Relative energy-dissipation balance residual at node `k`.
    pub fn edb_residual(&self, k: usize) -> f64 {
        edb_residual(self, k)
    }

    /// Largest residual over all nodes.
    pub fn max_edb_residual(&self) -> f64 {
        self.ledger().iter().fold(0.0, |m, r| m.max(r.edb_residual))
    }

    /// `Σ‖Δz‖_{L¹}` and `Σ‖Δp‖_{L¹}`.
    pub fn total_variations(&self) -> (f64, f64) {
        self.steps.iter().fold((0.0, 0.0), |(a, b), s| (a + s.dz_l1, b + s.dp_l1))
    }

    /// `sup_k |E(t_k, q_k)|`.
    pub fn energy_bound(&self) -> f64 {
        self.nodes.iter().fold(0.0, |m, n| m.max(n.energy.total().abs()))
    }
}

/// `|E(t_k,q_k) + Σ dissipation − E(0,q_0) − Σ work| / (|E(0,q_0)| + dissipated + 1)`.
pub fn edb_residual(traj: &Trajectory, k: usize) -> f64 {
    let e0 = traj.nodes[0].energy.total();
    let mut diss = 0.0;
    let mut work = 0.0;
    for s in &traj.steps[..k] {
        diss += s.dissipated();
        work += s.work_inc;
    }
    (traj.nodes[k].energy.total() + diss - e0 - work).abs() / (e0.abs() + diss + 1.0)
}

/// Energetic record of a state.
pub fn node_record(model: &Model, t: f64, q: &State) -> Result<NodeRecord> {
    Ok(NodeRecord { t, energy: model.energy_parts(t, q)?, d_t_energy: model.d_t_energy(t, q), slopes: model.slopes(t, q)? })
}

fn diff_p(a: &[SymTensor2], b: &[SymTensor2]) -> Vec<SymTensor2> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `E(t,q) + R(z − z_k) + H(z, p − p_k) + (ε/2τ)(‖z − z_k‖² + ‖p − p_k‖²)`.
pub fn incremental_objective(model: &Model, t: f64, q_k: &State, q: &State, tau: f64) -> Result<f64> {
    let dz = diff(&q.z, &q_k.z);
    let dp = diff_p(&q.p, &q_k.p);
    let eta = plastic::viscous_modulus(model.material.eps, tau);
    Ok(model.energy(t, q)?
        + model.dissipation_r(&dz)
        + model.dissipation_h(&q.z, &dp)?
        + 0.5 * eta * (model.l2.scalar_norm_sq_lumped(&dz) + model.l2.tensor_norm_sq(&dp)))
}

/// Outcome of a single incremental step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: State,
    pub report: StepReport,
    pub node: NodeRecord,
}

/// One staggered step from `(t_k, q_k)` to `t_k + τ`, without retries.
pub fn time_step(model: &Model, t_k: f64, q_k: &State, node_k: &NodeRecord, tau: f64, settings: &SolverSettings) -> Result<StepOutcome> {
    let t = t_k + tau;
    let l2 = &model.l2;
    let mut coupled = solve_coupled(model, t, &q_k.z, &q_k.u, &q_k.p, tau, settings)?;
    let mut z = q_k.z.clone();
    let mut newton_iters = coupled.newton_iters;
    let objective = |z: &[f64], c: &CoupledSolve| {
        incremental_objective(model, t, q_k, &State { u: c.u.clone(), z: z.to_vec(), p: c.p.clone() }, tau)
    };
    let mut obj = objective(&z, &coupled)?;
    let mut rise = 0.0f64;
    for outer in 1..=settings.max_outer {
        let dmg = update_z(model, t, &q_k.z, &coupled.u, &coupled.p, tau, &z, settings)?;
        let next = solve_coupled(model, t, &dmg.z, &coupled.u, &q_k.p, tau, settings)?;
        newton_iters += next.newton_iters;
        let obj_next = objective(&dmg.z, &next)?;
        rise = rise.max(obj_next - obj);
        obj = obj_next;
        let inc = libm::sqrt(l2.vector_norm_sq(&diff(&next.u, &coupled.u)))
            + libm::sqrt(l2.scalar_norm_sq_lumped(&diff(&dmg.z, &z)))
            + libm::sqrt(l2.tensor_norm_sq(&diff_p(&next.p, &coupled.p)));
        z = dmg.z;
        coupled = next;
        if inc > settings.tol_stag {
            continue;
        }
        let kkt_z = damage_kkt(model, t, &q_k.z, &coupled.u, &z, &coupled.p, tau, settings.z_floor);
        if kkt_z > settings.tol_z {
            continue;
        }
        let state = State { u: coupled.u, z, p: coupled.p };
        let node = node_record(model, t, &state)?;
        let mut kkt_p = 0.0f64;
        for k in 0..model.mesh.n_elements() {
            let zbar = model.mesh.element_mean(&state.z, k);
            kkt_p = kkt_p.max(inclusion_residual(&model.material, zbar, coupled.sigma[k], q_k.p[k], state.p[k], tau));
        }
        if node.slopes.r_u > settings.tol_u || kkt_p > settings.tol_p {
            return Err(Error::Numeric(format!(
                "step to t = {t} ended with residuals r_u = {:e}, kkt_p = {kkt_p:e}",
                node.slopes.r_u
            )));
        }
        let dz = diff(&state.z, &q_k.z);
        let dp = diff_p(&state.p, &q_k.p);
        let (dz2, dp2) = (l2.scalar_norm_sq_lumped(&dz), l2.tensor_norm_sq(&dp));
        let eps = model.material.eps;
        let conj = if eps > 0.0 {
            tau / (2.0 * eps) * (node.slopes.d_z * node.slopes.d_z + node.slopes.d_p * node.slopes.d_p)
        } else {
            0.0
        };
        let report = StepReport {
            t,
            tau,
            outer_iters: outer,
            newton_iters,
            r_u: node.slopes.r_u,
            kkt_z,
            kkt_p,
            dz_l2: libm::sqrt(dz2),
            dp_l2: libm::sqrt(dp2),
            dz_l1: model.z_l1(&dz),
            dp_l1: model.p_l1(&dp),
            r_inc: model.dissipation_r(&dz),
            h_inc: model.dissipation_h(&state.z, &dp)?,
            visc_inc: eps / (2.0 * tau) * (dz2 + dp2),
            conj_inc: conj,
            work_inc: 0.5 * tau * (node_k.d_t_energy + node.d_t_energy),
            halvings: 0,
            objective_rise: rise,
        };
        return Ok(StepOutcome { state, report, node });
    }
    Err(Error::Numeric(format!("staggered iteration did not converge in {} sweeps at t = {t}", settings.max_outer)))
}

/// Advances over `[t, t + τ]`, halving `τ` on failure.
fn advance(
    model: &Model,
    t: f64,
    q: &State,
    node: &NodeRecord,
    tau: f64,
    depth: u32,
    settings: &SolverSettings,
    out: &mut Vec<StepOutcome>,
) -> core::result::Result<(), StepFailure> {
    match time_step(model, t, q, node, tau, settings) {
        Ok(mut s) => {
            s.report.halvings = depth;
            out.push(s);
            Ok(())
        }
        Err(e) if depth >= settings.max_halvings => Err(StepFailure { t_start: t, tau, message: format!("{e}") }),
        Err(_) => {
            let half = 0.5 * tau;
            advance(model, t, q, node, half, depth + 1, settings, out)?;
            let mid = out.last().expect("pushed above");
            let (qm, nm) = (mid.state.clone(), mid.node);
            advance(model, t + half, &qm, &nm, tau - half, depth + 1, settings, out)
        }
    }
}

/// Uniform grid on `[t0, t_end]` with spacing at most `τ`.
pub fn time_grid(t0: f64, t_end: f64, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !(t_end > t0) || !tau.is_finite() || !t_end.is_finite() {
        return Err(Error::Parameter(format!("invalid time window [{t0}, {t_end}] with step {tau}")));
    }
    if tau > t_end - t0 {
        return Err(Error::Parameter(format!("time step {tau} exceeds the window length {}", t_end - t0)));
    }
    let n = libm::ceil((t_end - t0) / tau - 1e-9) as usize;
    Ok((0..=n).map(|k| if k == n { t_end } else { t0 + k as f64 * tau }).collect())
}

/// Solves the viscous problem on `[t0, t_end]` from `q0`.
///
/// Setup and parameter errors are returned as `Err`; a step that fails after
/// all halvings ends the trajectory early with `failure` set.
pub fn simulate(model: &Model, q0: State, t0: f64, t_end: f64, tau: f64, settings: &SolverSettings) -> Result<Trajectory> {
    settings.validate()?;
    check_state(model, &q0)?;
    let grid = time_grid(t0, t_end, tau)?;
    let node0 = node_record(model, t0, &q0)?;
    let mut traj = Trajectory { eps: model.material.eps, states: alloc::vec![q0], nodes: alloc::vec![node0], steps: Vec::new(), failure: None };
    let mut buf = Vec::new();
    for w in grid.windows(2) {
        let q = traj.states.last().expect("nonempty").clone();
        let node = *traj.nodes.last().expect("nonempty");
        buf.clear();
        let res = advance(model, w[0], &q, &node, w[1] - w[0], 0, settings, &mut buf);
        for s in buf.drain(..) {
            traj.states.push(s.state);
            traj.nodes.push(s.node);
            traj.steps.push(s.report);
        }
        if let Err(f) = res {
            traj.failure = Some(f);
            break;
        }
    }
    Ok(traj)
}

fn check_state(model: &Model, q: &State) -> Result<()> {
    let lay = &model.layout;
    if q.u.len() != lay.n_u_full() || q.z.len() != lay.n_z() || q.p.len() != model.mesh.n_elements() {
        return Err(Error::Contract("state dimensions do not match the mesh".into()));
    }
    if q.z.iter().any(|z| !(*z > 0.0 && *z <= 1.0)) {
        return Err(Error::Domain("initial damage must lie in (0, 1]".into()));
    }
    if q.u.iter().enumerate().any(|(i, u)| lay.u_free[i].is_none() && *u != 0.0) {
        return Err(Error::Contract("u must vanish on Dirichlet vertices".into()));
    }
    if q.p.iter().any(|p| p.trace().abs() > 1e-12 * (1.0 + p.norm())) {
        return Err(Error::Contract("initial plastic strain must be deviatoric".into()));
    }
    Ok(())
}
