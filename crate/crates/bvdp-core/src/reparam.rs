//! Energy-dissipation arclength reparameterization of viscous trajectories
//! and the rescaled rate functional `M_ε`.
//!
//! A viscous trajectory `(t_k, q_k)` is re-indexed by
//! `s̃(t) = ∫ 1 + ‖z'‖_{L¹} + ‖p'‖_{L¹} + D(q')·D*(t,q) dt` with
//! `D(q') = (‖z'‖² + ‖p'‖²)^{1/2}` and `D* = (d_z² + d_p²)^{1/2}`. In the new
//! parameter the curve is 1-Lipschitz in `t`, `z` and `p`, and the viscous
//! energy balance turns into `E(s) + ∫M_ε = E(0) + ∫∂_tE·t'`.

use alloc::vec::Vec;

use crate::energetics::{Model, Slopes, State};
use crate::tensor_mesh::SymTensor2;
use crate::viscous_solver::Trajectory;
use crate::{Error, Result};

/// Arclength at every time node.
#[derive(Clone, Debug, PartialEq)]
pub struct Arclength {
    pub s: Vec<f64>,
    pub total: f64,
}

/// Arclength with `D*` averaged over the two nodes of each step.
pub fn arclength(traj: &Trajectory) -> Arclength {
    let mut s = Vec::with_capacity(traj.nodes.len());
    let mut acc = 0.0;
    s.push(acc);
    for (k, st) in traj.steps.iter().enumerate() {
        let dstar = 0.5 * (traj.nodes[k].slopes.dstar() + traj.nodes[k + 1].slopes.dstar());
        acc += st.tau + st.dz_l1 + st.dp_l1 + libm::hypot(st.dz_l2, st.dp_l2) * dstar;
        s.push(acc);
    }
    Arclength { s, total: acc }
}

/// Arclength with `D*` taken at the interpolated mid-step state.
pub fn arclength_midpoint(model: &Model, traj: &Trajectory) -> Result<Arclength> {
    let mut s = Vec::with_capacity(traj.nodes.len());
    let mut acc = 0.0;
    s.push(acc);
    for (k, st) in traj.steps.iter().enumerate() {
        let q = lerp_state(&traj.states[k], &traj.states[k + 1], 0.5);
        let t = 0.5 * (traj.nodes[k].t + traj.nodes[k + 1].t);
        check_positive(&q)?;
        let dstar = libm::hypot(model.slope_distance_z(t, &q), model.slope_distance_p(t, &q));
        acc += st.tau + st.dz_l1 + st.dp_l1 + libm::hypot(st.dz_l2, st.dp_l2) * dstar;
        s.push(acc);
    }
    Ok(Arclength { s, total: acc })
}

fn check_positive(q: &State) -> Result<()> {
    if q.z.iter().any(|z| !(*z > 0.0)) {
        return Err(Error::Domain("interpolated damage left (0, 1]".into()));
    }
    Ok(())
}

/// `(1 − θ) a + θ b` on every field.
pub fn lerp_state(a: &State, b: &State, theta: f64) -> State {
    let l = |x: f64, y: f64| x + theta * (y - x);
    State {
        u: a.u.iter().zip(&b.u).map(|(x, y)| l(*x, *y)).collect(),
        z: a.z.iter().zip(&b.z).map(|(x, y)| l(*x, *y)).collect(),
        p: a.p.iter().zip(&b.p).map(|(x, y)| *x + theta * (*y - *x)).collect(),
    }
}

/// Sampling density and the tolerance of the equilibrium indicator in `M_ε`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ReparamSettings {
    pub n_samples: usize,
    /// Interpolated states between equilibrium nodes satisfy the momentum
    /// balance only up to interpolation error.
    pub tol_eq: f64,
}

impl Default for ReparamSettings {
    fn default() -> Self {
        Self { n_samples: 512, tol_eq: 1e-6 }
    }
}

/// Pieces of `M_ε` at one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MEps {
    /// `+∞` when the equilibrium indicator trips.
    pub value: f64,
    pub r: f64,
    pub h: f64,
    /// `(ε/2t') D²`.
    pub viscous: f64,
    /// `(t'/2ε) D*²`.
    pub conjugate: f64,
    pub r_u: f64,
}

impl MEps {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `M_ε` from precomputed parts (squared form).
pub fn m_eps_from_parts(r: f64, h: f64, d: f64, slopes: Slopes, tprime: f64, eps: f64, tol_eq: f64) -> Result<MEps> {
    if !(tprime > 0.0) {
        return Err(Error::Parameter("M_eps needs t' > 0; the t' = 0 limit is M_0".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Parameter("M_eps needs eps > 0".into()));
    }
    let dstar = slopes.dstar();
    let viscous = eps / (2.0 * tprime) * d * d;
    let conjugate = tprime / (2.0 * eps) * dstar * dstar;
    let value = if slopes.r_u > tol_eq { f64::INFINITY } else { r + h + viscous + conjugate };
    Ok(MEps { value, r, h, viscous, conjugate, r_u: slopes.r_u })
}

/// `M_ε(t, q, t', q') = R(z') + H(z, p') + I_{0}(r_u) + (ε/2t')D(q')² + (t'/2ε)D*(t,q)²`.
pub fn eval_m_eps(
    model: &Model,
    t: f64,
    q: &State,
    tprime: f64,
    zprime: &[f64],
    pprime: &[SymTensor2],
    eps: f64,
    tol_eq: f64,
) -> Result<MEps> {
    let slopes = model.slopes(t, q)?;
    let d = libm::hypot(model.z_l2(zprime), model.p_l2(pprime));
    m_eps_from_parts(model.dissipation_r(zprime), model.dissipation_h(&q.z, pprime)?, d, slopes, tprime, eps, tol_eq)
}

/// Trajectory re-sampled on a uniform arclength grid.
#[derive(Clone, Debug)]
pub struct ReparamTrajectory {
    pub eps: f64,
    /// `S_ε`.
    pub total: f64,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub states: Vec<State>,
    pub tprime: Vec<f64>,
    /// `‖z'(s)‖_{L¹}`.
    pub z_rate_l1: Vec<f64>,
    /// `‖p'(s)‖_{L¹}`.
    pub p_rate_l1: Vec<f64>,
    /// `D(q'(s))`.
    pub d: Vec<f64>,
    pub slopes: Vec<Slopes>,
    pub m_eps: Vec<MEps>,
    pub energy: Vec<f64>,
    pub d_t_energy: Vec<f64>,
}

impl ReparamTrajectory {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn dstar(&self, j: usize) -> f64 {
        self.slopes[j].dstar()
    }

    /// Linear interpolation of `(t, q)` between samples.
    pub fn state_at(&self, s: f64) -> (f64, State) {
        let (j, theta) = bracket(&self.s, s);
        if theta == 0.0 {
            return (self.t[j], self.states[j].clone());
        }
        (self.t[j] + theta * (self.t[j + 1] - self.t[j]), lerp_state(&self.states[j], &self.states[j + 1], theta))
    }

    /// Largest difference quotients of `t`, `z` (in `L¹`) and `p` (in `L¹`)
    /// over consecutive samples.
    pub fn lipschitz_constants(&self, model: &Model) -> (f64, f64, f64) {
        let mut out = (0.0f64, 0.0f64, 0.0f64);
        for j in 1..self.len() {
            let ds = self.s[j] - self.s[j - 1];
            let dz: Vec<f64> = self.states[j].z.iter().zip(&self.states[j - 1].z).map(|(a, b)| a - b).collect();
            let dp: Vec<SymTensor2> = self.states[j].p.iter().zip(&self.states[j - 1].p).map(|(a, b)| *a - *b).collect();
            out.0 = out.0.max((self.t[j] - self.t[j - 1]).abs() / ds);
            out.1 = out.1.max(model.z_l1(&dz) / ds);
            out.2 = out.2.max(model.p_l1(&dp) / ds);
        }
        out
    }

    /// `∫₀^S M_ε ds` by the trapezoid rule over the samples.
    pub fn m_eps_integral(&self) -> f64 {
        cumulative_trapezoid(&self.s, &self.m_eps.iter().map(|m| m.value).collect::<Vec<_>>())
            .last()
            .copied()
            .unwrap_or(0.0)
    }

    pub fn max_equilibrium_residual(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, s| m.max(s.r_u))
    }
}

/// Index `j` and weight `θ ∈ [0,1)` with `x = (1−θ) xs[j] + θ xs[j+1]`;
/// `θ = 0` at or beyond the ends.
fn bracket(xs: &[f64], x: f64) -> (usize, f64) {
    let n = xs.len();
    if x <= xs[0] {
        return (0, 0.0);
    }
    if x >= xs[n - 1] {
        return (n - 1, 0.0);
    }
    let j = xs.partition_point(|v| *v <= x) - 1;
    let w = xs[j + 1] - xs[j];
    (j, if w > 0.0 { (x - xs[j]) / w } else { 0.0 })
}

fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..x.len() {
        acc += 0.5 * (x[j] - x[j - 1]) * (y[j] + y[j - 1]);
        out.push(acc);
    }
    out
}

/// Re-samples `traj` on `n_samples` uniform arclength points.
pub fn rescale(model: &Model, traj: &Trajectory, arc: &Arclength, settings: &ReparamSettings) -> Result<ReparamTrajectory> {
    let n = settings.n_samples;
    if n < 2 {
        return Err(Error::Parameter(alloc::format!("need at least 2 arclength samples, got {n}")));
    }
    if arc.s.len() != traj.nodes.len() || traj.nodes.len() < 2 {
        return Err(Error::Contract("arclength does not match the trajectory".into()));
    }
    let total = arc.total;
    let s: Vec<f64> = (0..n).map(|j| if j == n - 1 { total } else { total * j as f64 / (n - 1) as f64 }).collect();
    let mut t = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for &sj in &s {
        let (k, theta) = bracket(&arc.s, sj);
        if theta == 0.0 {
            t.push(traj.nodes[k].t);
            states.push(traj.states[k].clone());
        } else {
            t.push(traj.nodes[k].t + theta * (traj.nodes[k + 1].t - traj.nodes[k].t));
            states.push(lerp_state(&traj.states[k], &traj.states[k + 1], theta));
        }
    }
    from_samples(model, traj.eps, total, s, t, states, settings)
}

/// Rebuilds rates, slopes and `M_ε` from sampled `(s, t, q)`, e.g. after
/// reading persisted samples. Rates are central differences.
pub fn from_samples(
    model: &Model,
    eps: f64,
    total: f64,
    s: Vec<f64>,
    t: Vec<f64>,
    states: Vec<State>,
    settings: &ReparamSettings,
) -> Result<ReparamTrajectory> {
    let n = s.len();
    if n < 2 || t.len() != n || states.len() != n {
        return Err(Error::Contract("sample arrays must have equal length >= 2".into()));
    }
    let mut out = ReparamTrajectory {
        eps,
        total,
        s,
        t,
        states,
        tprime: Vec::with_capacity(n),
        z_rate_l1: Vec::with_capacity(n),
        p_rate_l1: Vec::with_capacity(n),
        d: Vec::with_capacity(n),
        slopes: Vec::with_capacity(n),
        m_eps: Vec::with_capacity(n),
        energy: Vec::with_capacity(n),
        d_t_energy: Vec::with_capacity(n),
    };
    for j in 0..n {
        let (a, b) = (j.saturating_sub(1), (j + 1).min(n - 1));
        let ds = out.s[b] - out.s[a];
        let tprime = (out.t[b] - out.t[a]) / ds;
        let zp: Vec<f64> = out.states[b].z.iter().zip(&out.states[a].z).map(|(x, y)| (x - y) / ds).collect();
        let pp: Vec<SymTensor2> = out.states[b].p.iter().zip(&out.states[a].p).map(|(x, y)| (1.0 / ds) * (*x - *y)).collect();
        let (tj, q) = (out.t[j], &out.states[j]);
        let slopes = model.slopes(tj, q)?;
        let d = libm::hypot(model.z_l2(&zp), model.p_l2(&pp));
        let m = m_eps_from_parts(model.dissipation_r(&zp), model.dissipation_h(&q.z, &pp)?, d, slopes, tprime, eps, settings.tol_eq)?;
        out.energy.push(model.energy(tj, q)?);
        out.d_t_energy.push(model.d_t_energy(tj, q));
        out.tprime.push(tprime);
        out.z_rate_l1.push(model.z_l1(&zp));
        out.p_rate_l1.push(model.p_l1(&pp));
        out.d.push(d);
        out.slopes.push(slopes);
        out.m_eps.push(m);
    }
    Ok(out)
}

/// `t' + ‖z'‖₁ + ‖p'‖₁ + D·D* − 1` at every sample.
pub fn normalization_residual(rpt: &ReparamTrajectory) -> Vec<f64> {
    (0..rpt.len())
        .map(|j| rpt.tprime[j] + rpt.z_rate_l1[j] + rpt.p_rate_l1[j] + rpt.d[j] * rpt.dstar(j) - 1.0)
        .collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Relative residual of `E(s) + ∫₀^s M_ε = E(0) + ∫₀^s ∂_tE t'` at every sample.
pub fn reparam_edb_residual(rpt: &ReparamTrajectory) -> Vec<f64> {
    let m: Vec<f64> = rpt.m_eps.iter().map(|m| m.value).collect();
    let w: Vec<f64> = (0..rpt.len()).map(|j| rpt.d_t_energy[j] * rpt.tprime[j]).collect();
    let mc = cumulative_trapezoid(&rpt.s, &m);
    let wc = cumulative_trapezoid(&rpt.s, &w);
    let e0 = rpt.energy[0];
    (0..rpt.len())
        .map(|j| (rpt.energy[j] + mc[j] - e0 - wc[j]).abs() / (e0.abs() + mc[j] + 1.0))
        .collect()
}

/// `|∫M_ε ds − Σ dissipated| / Σ dissipated`, the change-of-variables gap
/// between the two balances (`0` when nothing dissipates on both sides).
pub fn change_of_variables_gap(rpt: &ReparamTrajectory, traj: &Trajectory) -> f64 {
    let diss: f64 = traj.steps.iter().map(|s| s.dissipated()).sum();
    let m = rpt.m_eps_integral();
    if diss == 0.0 {
        return m.abs();
    }
    (m - diss).abs() / diss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energetics::test_support::small_model;
    use crate::energetics::Loads;
    use crate::viscous_solver::{simulate, SolverSettings};
    use proptest::prelude::*;

    fn frozen() -> (Model, Trajectory) {
        let m = small_model(Loads::default());
        let traj = simulate(&m, m.initial_state(), 0.0, 0.5, 0.05, &SolverSettings::default()).unwrap();
        (m, traj)
    }

    fn loaded() -> (Model, Trajectory) {
        let m = small_model(Loads::horizontal_stretch(1.0));
        let traj = simulate(&m, m.initial_state(), 0.0, 1.0, 1e-2, &SolverSettings::default()).unwrap();
        assert!(traj.is_complete());
        (m, traj)
    }

    #[test]
    fn frozen_evolution_has_unit_speed() {
        let (m, traj) = frozen();
        let arc = arclength(&traj);
        assert!((arc.total - 0.5).abs() < 1e-14);
        for (s, n) in arc.s.iter().zip(&traj.nodes) {
            assert!((s - n.t).abs() < 1e-14);
        }
        let rpt = rescale(&m, &traj, &arc, &ReparamSettings { n_samples: 11, ..Default::default() }).unwrap();
        for j in 0..rpt.len() {
            assert!((rpt.t[j] - rpt.s[j]).abs() < 1e-14);
            assert_eq!(rpt.states[j], traj.states[0]);
            assert_eq!(rpt.m_eps[j].value, 0.0);
        }
        assert!(max_abs(&normalization_residual(&rpt)) < 1e-12);
        assert!(max_abs(&reparam_edb_residual(&rpt)) < 1e-12);
    }

    #[test]
    fn rejects_fewer_than_two_samples() {
        let (m, traj) = frozen();
        let arc = arclength(&traj);
        let r = rescale(&m, &traj, &arc, &ReparamSettings { n_samples: 1, ..Default::default() });
        assert!(matches!(r, Err(Error::Parameter(_))));
    }

    #[test]
    fn loaded_run_reparameterization() {
        let (m, traj) = loaded();
        let arc = arclength(&traj);
        assert!(arc.s.windows(2).all(|w| w[1] > w[0]));
        assert!(arc.total > 1.0);
        let mid = arclength_midpoint(&m, &traj).unwrap();
        assert!((mid.total - arc.total).abs() <= 5e-3 * arc.total);

        let rpt = rescale(&m, &traj, &arc, &ReparamSettings { n_samples: 128, ..Default::default() }).unwrap();
        assert!(rpt.t.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*rpt.t.last().unwrap(), 1.0);
        let (lt, lz, lp) = rpt.lipschitz_constants(&m);
        assert!(lt <= 1.0 + 1e-12 && lz <= 1.0 + 1e-12 && lp <= 1.0 + 1e-12, "{lt} {lz} {lp}");
        assert!(rpt.m_eps.iter().all(|m| m.is_finite()));
        assert!(max_abs(&normalization_residual(&rpt)) < 5e-2);
        assert!(max_abs(&reparam_edb_residual(&rpt)) < 2e-2);
        assert!(change_of_variables_gap(&rpt, &traj) < 2e-2);
    }

    #[test]
    fn round_trip_recovers_time_nodes() {
        let (m, traj) = loaded();
        let arc = arclength(&traj);
        let rpt = rescale(&m, &traj, &arc, &ReparamSettings { n_samples: 400, ..Default::default() }).unwrap();
        let tau = 1e-2;
        for (k, q) in traj.states.iter().enumerate() {
            let (t, qs) = rpt.state_at(arc.s[k]);
            assert!((t - traj.nodes[k].t).abs() <= tau);
            let dz = qs.z.iter().zip(&q.z).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(dz <= tau, "{dz}");
        }
    }

    #[test]
    fn tripped_equilibrium_indicator_gives_infinity() {
        let m = small_model(Loads::horizontal_stretch(1.0));
        let q = m.initial_state();
        let zp = alloc::vec![0.0; q.z.len()];
        let pp = alloc::vec![SymTensor2::ZERO; q.p.len()];
        let v = eval_m_eps(&m, 0.5, &q, 1.0, &zp, &pp, 1e-2, 1e-6).unwrap();
        assert!(v.value.is_infinite() && v.r_u > 1e-6);
        assert!(eval_m_eps(&m, 0.5, &q, 0.0, &zp, &pp, 1e-2, 1e-6).is_err());
    }

    #[test]
    fn stable_frozen_state_has_zero_m_eps() {
        let m = small_model(Loads::default());
        let q = m.initial_state();
        let zp = alloc::vec![0.0; q.z.len()];
        let pp = alloc::vec![SymTensor2::ZERO; q.p.len()];
        assert_eq!(eval_m_eps(&m, 0.0, &q, 1.0, &zp, &pp, 1e-2, 1e-9).unwrap().value, 0.0);
    }

    proptest! {
        #[test]
        fn viscous_terms_dominate_the_product(d in 0.0..10.0f64, dz in 0.0..10.0f64, dp in 0.0..10.0f64, tp in 1e-6..1.0f64, eps in 1e-4..1.0f64) {
            let slopes = Slopes { r_u: 0.0, d_z: dz, d_p: dp };
            let m = m_eps_from_parts(0.0, 0.0, d, slopes, tp, eps, 1.0).unwrap();
            prop_assert!(m.viscous + m.conjugate >= d * slopes.dstar() * (1.0 - 1e-14));
        }
    }
}
