//! Vanishing-viscosity diagnostics on reparameterized trajectories.
//!
//! The limit contact potential `M₀`, the split of the arclength axis into the
//! stable set `B° = {D* = 0}` and the unstable set `A°`, the two-point energy
//! variations `HV`, `RV`, `ARV`, `WE` with the estimate that bounds the
//! external work between two states, and the partition-based lower
//! energy-dissipation ledger built from them.
//!
//! Exact-zero conditions of the limit problem (`D* = 0`, `t' = 0`) are met by
//! a viscous discretization only to tolerance; every threshold below is a
//! field of [`DiagnosticSettings`].

mod ledger;
mod mediesci;

pub use ledger::{
    lower_inequality_ledger, refine_partition, uniform_partition, IntervalClass, IntervalEntry, LedgerConstants,
    LowerInequalityLedger,
};
pub use mediesci::{first_violation, iteration_bound, mediesci_partition, Partition};

use alloc::vec::Vec;

use crate::energetics::{Model, Slopes, State};
use crate::material_laws::MaterialParams;
use crate::reparam::ReparamTrajectory;
use crate::tensor_mesh::SymTensor2;
use crate::{Error, Result};

/// Thresholds and sizes of the diagnostics.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct DiagnosticSettings {
    /// `D* ≤ θ_stab · energy scale / length scale` counts as stable.
    pub theta_stab: f64,
    /// `t' > θ_rate` selects the rate branch of `M₀`.
    pub theta_rate: f64,
    /// `t' ≤ θ_frozen` inside an unstable component counts as frozen time.
    pub theta_frozen: f64,
    /// Equilibrium indicator tolerance on `‖r_u‖`.
    pub tol_u: f64,
    /// Nodes of the uniform partition used for two-point checks.
    pub n_partition: usize,
    /// Sub-partition tolerance, relative to the largest `D*` on the run.
    pub eta: f64,
    /// Endpoint margin on mixed intervals, relative to the energy scale.
    pub beta: f64,
    /// Slack tolerance, relative to the energy scale; `ARV` uses it as is.
    pub tol_slack: f64,
}

impl Default for DiagnosticSettings {
    fn default() -> Self {
        Self {
            theta_stab: 1e-6,
            theta_rate: 1e-6,
            theta_frozen: 1e-6,
            tol_u: 1e-6,
            n_partition: 64,
            eta: 1e-2,
            beta: 1e-2,
            tol_slack: 1e-8,
        }
    }
}

impl DiagnosticSettings {
    pub fn validate(&self) -> Result<()> {
        let v = [self.theta_stab, self.theta_rate, self.theta_frozen, self.tol_u, self.eta, self.beta, self.tol_slack];
        if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::Parameter("diagnostic thresholds must be positive and finite".into()));
        }
        if self.n_partition < 2 {
            return Err(Error::Parameter("a partition needs at least 2 nodes".into()));
        }
        Ok(())
    }
}

/// `max_s |E(s)| + ∫M_ε ds`, or 1 if both vanish.
pub fn energy_scale(rpt: &ReparamTrajectory) -> f64 {
    let e = rpt.energy.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let scale = e + rpt.m_eps_integral().abs();
    if scale > 0.0 && scale.is_finite() {
        scale
    } else {
        1.0
    }
}

/// Square root of the domain area.
pub fn length_scale(model: &Model) -> f64 {
    libm::sqrt((0..model.mesh.n_elements()).map(|k| model.mesh.area(k)).sum::<f64>())
}

/// Absolute stability threshold on `D*`.
pub fn stability_threshold(model: &Model, rpt: &ReparamTrajectory, settings: &DiagnosticSettings) -> f64 {
    settings.theta_stab * energy_scale(rpt) / length_scale(model)
}

/// `D·D*` with `0·∞ = 0`.
pub fn contact_product(d: f64, dstar: f64) -> f64 {
    if d == 0.0 || dstar == 0.0 {
        0.0
    } else {
        d * dstar
    }
}

/// Parts of the limit contact potential.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct M0 {
    pub value: f64,
    pub r: f64,
    pub h: f64,
    /// `0`, `+∞` or `D(q')·D*` depending on the branch.
    pub reduced: f64,
    /// `t' ≤ θ_rate`.
    pub jump: bool,
    pub r_u: f64,
}

/// `M₀ = R(z') + H(z,p') + I(r_u) + M₀^red` from precomputed parts.
/// On the rate branch `M₀^red` is the indicator of `D* ≤ θ_stab`; on the
/// jump branch it is `D(q')·D*`.
pub fn m0_from_parts(r: f64, h: f64, d: f64, slopes: Slopes, tprime: f64, theta_stab: f64, settings: &DiagnosticSettings) -> M0 {
    let dstar = slopes.dstar();
    let jump = tprime <= settings.theta_rate;
    let reduced = if jump {
        contact_product(d, dstar)
    } else if dstar <= theta_stab {
        0.0
    } else {
        f64::INFINITY
    };
    let value = if slopes.r_u > settings.tol_u { f64::INFINITY } else { r + h + reduced };
    M0 { value, r, h, reduced, jump, r_u: slopes.r_u }
}

/// `M₀(t, q, t', q')` for rates `z'`, `p'`.
#[allow(clippy::too_many_arguments)]
pub fn eval_m0(
    model: &Model,
    t: f64,
    q: &State,
    tprime: f64,
    zprime: &[f64],
    pprime: &[SymTensor2],
    theta_stab: f64,
    settings: &DiagnosticSettings,
) -> Result<M0> {
    let slopes = model.slopes(t, q)?;
    let d = libm::hypot(model.z_l2(zprime), model.p_l2(pprime));
    Ok(m0_from_parts(model.dissipation_r(zprime), model.dissipation_h(&q.z, pprime)?, d, slopes, tprime, theta_stab, settings))
}

/// Stable (`B°`) or unstable (`A°`) sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Regime {
    Stable,
    Unstable,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Stable => "B",
            Regime::Unstable => "A",
        }
    }
}

/// Maximal run of unstable samples, `first..=last`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Component {
    pub first: usize,
    pub last: usize,
    /// Largest `t'` on samples strictly inside the run.
    pub max_interior_tprime: f64,
    pub frozen: bool,
}

/// Per-sample regimes and the unstable components.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeTag {
    pub theta_stab: f64,
    pub theta_frozen: f64,
    pub regime: Vec<Regime>,
    pub components: Vec<Component>,
}

/// Which form of the two-point estimate applies to a pair of samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EndpointCondition {
    BothStable,
    InsideUnstable,
    Mixed,
}

impl RegimeTag {
    pub fn is_stable(&self, j: usize) -> bool {
        self.regime[j] == Regime::Stable
    }

    pub fn endpoint_condition(&self, j1: usize, j2: usize) -> EndpointCondition {
        let (a, b) = (j1.min(j2), j1.max(j2));
        if self.is_stable(a) && self.is_stable(b) {
            EndpointCondition::BothStable
        } else if self.regime[a..=b].iter().all(|r| *r == Regime::Unstable) {
            EndpointCondition::InsideUnstable
        } else {
            EndpointCondition::Mixed
        }
    }

    /// Whether every component keeps `t'` frozen inside.
    pub fn all_frozen(&self) -> bool {
        self.components.iter().all(|c| c.frozen)
    }
}

/// Tags samples from a `D*` profile and the matching `t'` samples.
pub fn classify_profile(dstar: &[f64], tprime: &[f64], theta_stab: f64, theta_frozen: f64) -> RegimeTag {
    let regime: Vec<Regime> =
        dstar.iter().map(|d| if *d > theta_stab { Regime::Unstable } else { Regime::Stable }).collect();
    let mut components = Vec::new();
    let mut j = 0;
    while j < regime.len() {
        if regime[j] == Regime::Stable {
            j += 1;
            continue;
        }
        let first = j;
        while j + 1 < regime.len() && regime[j + 1] == Regime::Unstable {
            j += 1;
        }
        let last = j;
        let max_interior_tprime = (first + 1..last).map(|i| tprime[i]).fold(0.0, f64::max);
        components.push(Component { first, last, max_interior_tprime, frozen: max_interior_tprime <= theta_frozen });
        j += 1;
    }
    RegimeTag { theta_stab, theta_frozen, regime, components }
}

/// Tags the samples of `rpt` with the absolute threshold `theta_stab`.
pub fn classify_regimes(rpt: &ReparamTrajectory, theta_stab: f64, theta_frozen: f64) -> RegimeTag {
    let dstar: Vec<f64> = (0..rpt.len()).map(|j| rpt.dstar(j)).collect();
    classify_profile(&dstar, &rpt.tprime, theta_stab, theta_frozen)
}

/// Constants of the two-point estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Constants {
    #[cfg_attr(feature = "serde", serde(rename = "K_C"))]
    pub k_c: f64,
    #[cfg_attr(feature = "serde", serde(rename = "K_W"))]
    pub k_w: f64,
    pub m0_observed: f64,
}

impl Constants {
    /// `K_C`, `K_W` on `[m₀, 1]`.
    pub fn new(material: &MaterialParams, m0: f64) -> Result<Self> {
        if !(m0 > 0.0 && m0 <= 1.0) {
            return Err(Error::Domain(alloc::format!("lower damage bound {m0} outside (0, 1]")));
        }
        Ok(Self { k_c: material.k_c(m0), k_w: material.k_w(m0), m0_observed: m0 })
    }

    /// Constants for the smallest `z` over all samples.
    pub fn for_run(material: &MaterialParams, rpt: &ReparamTrajectory) -> Result<Self> {
        let m0 = rpt.states.iter().flat_map(|q| q.z.iter()).fold(1.0f64, |m, z| m.min(*z));
        Self::new(material, m0)
    }
}

/// Everything the two-point quantities need at one sample.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub s: f64,
    pub t: f64,
    pub state: State,
    pub energy: f64,
    pub phi: f64,
    pub sigma: Vec<SymTensor2>,
    /// `E(w(t))` per element.
    pub ew: Vec<SymTensor2>,
    pub force: Vec<f64>,
    pub w: Vec<f64>,
    pub slopes: Slopes,
}

impl Snapshot {
    /// Evaluates energies, stresses and slopes at `(t, q)`.
    pub fn new(model: &Model, s: f64, t: f64, state: State) -> Result<Self> {
        let slopes = model.slopes(t, &state)?;
        let energy = model.energy(t, &state)?;
        Ok(Self::with_parts(model, s, t, state, energy, slopes))
    }

    /// Sample `j` of a reparameterized run, reusing its energy and slopes.
    pub fn from_sample(model: &Model, rpt: &ReparamTrajectory, j: usize) -> Self {
        Self::with_parts(model, rpt.s[j], rpt.t[j], rpt.states[j].clone(), rpt.energy[j], rpt.slopes[j])
    }

    fn with_parts(model: &Model, s: f64, t: f64, state: State, energy: f64, slopes: Slopes) -> Self {
        let e = model.strains(t, &state);
        let sigma = model.stresses(&state.z, &e);
        let ew = (0..model.mesh.n_elements()).map(|k| model.dirichlet_strain(t, k)).collect();
        let phi = model.phi(&state.z);
        Self { s, t, energy, phi, sigma, ew, force: model.force(t), w: model.dirichlet_field(t), state, slopes }
    }
}

/// Lazily built snapshots of the samples of one run.
pub(crate) struct IntervalSnapshots<'a> {
    model: &'a Model,
    rpt: &'a ReparamTrajectory,
    cache: Vec<Option<Snapshot>>,
}

impl<'a> IntervalSnapshots<'a> {
    pub(crate) fn new(model: &'a Model, rpt: &'a ReparamTrajectory) -> Self {
        Self { model, rpt, cache: (0..rpt.len()).map(|_| None).collect() }
    }

    pub(crate) fn pair(&mut self, i: usize, j: usize) -> (&Snapshot, &Snapshot) {
        for k in [i, j] {
            if self.cache[k].is_none() {
                self.cache[k] = Some(Snapshot::from_sample(self.model, self.rpt, k));
            }
        }
        (self.cache[i].as_ref().unwrap(), self.cache[j].as_ref().unwrap())
    }
}

/// `WE` on `[s₁, s₂]`: `½⟨σ₁+σ₂, E(w₂−w₁)⟩ − ⟨½(F₁+F₂), w₂−w₁⟩
/// − ⟨F₂−F₁, ½(u₁+u₂)⟩ − ⟨F₂−F₁, ½(w₁+w₂)⟩`.
pub fn work_variation(model: &Model, a: &Snapshot, b: &Snapshot) -> f64 {
    let mut stress = 0.0;
    for k in 0..a.sigma.len() {
        stress += model.mesh.area(k) * (a.sigma[k] + b.sigma[k]).ddot(&(b.ew[k] - a.ew[k]));
    }
    let mut load = 0.0;
    for i in 0..a.force.len() {
        let (f1, f2) = (a.force[i], b.force[i]);
        load += 0.5 * (f1 + f2) * (b.w[i] - a.w[i]);
        load += (f2 - f1) * 0.5 * (a.state.u[i] + b.state.u[i]);
        load += (f2 - f1) * 0.5 * (a.w[i] + b.w[i]);
    }
    0.5 * stress - load
}

/// Two-point variations on `[s₁, s₂]`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariationReport {
    pub s1: f64,
    pub s2: f64,
    pub e1: f64,
    pub e2: f64,
    /// `H(z₁, Δp/2) + H(z₂, Δp/2)`.
    pub h_terms: f64,
    /// `‖Δp‖·(d_p₁ + d_p₂)/2`.
    pub p_slope_term: f64,
    pub hv: f64,
    /// `R(Δz)`.
    pub r: f64,
    /// `‖Δz‖·(d_z₁ + d_z₂)/2`.
    pub z_slope_term: f64,
    pub rv: f64,
    pub phi_change: f64,
    pub arv: f64,
    pub we: f64,
    pub dz_l1: f64,
    pub dz_l2: f64,
    pub dz_linf: f64,
    pub dp_l2: f64,
    pub k_c: f64,
    pub k_w: f64,
}

impl VariationReport {
    /// `K_W‖Δz‖₁‖Δz‖_∞`.
    pub fn w_term(&self) -> f64 {
        self.k_w * self.dz_l1 * self.dz_linf
    }

    /// `Δ₁·‖Δz‖_∞` with `Δ₁ = K_C(ΔΦ + R(Δz)) + K_W‖Δz‖₁(1 + K_C‖Δz‖_∞)`.
    pub fn remainder(&self) -> f64 {
        let delta = self.k_c * (self.phi_change + self.r) + self.k_w * self.dz_l1 * (1.0 + self.k_c * self.dz_linf);
        delta * self.dz_linf
    }

    /// `K_C‖Δz‖_∞ · ‖Δz‖·avg d_z`, the part of `K_C‖Δz‖_∞ ARV` not in the
    /// remainder.
    pub fn slope_coupling(&self) -> f64 {
        self.k_c * self.dz_linf * self.z_slope_term
    }

    /// `RHS − LHS` of the two-point estimate.
    pub fn slack(&self) -> f64 {
        (self.e2 - self.e1) + self.hv + self.rv + self.k_c * self.dz_linf * self.arv + self.w_term() - self.we
    }
}

/// `HV`, `RV`, `ARV`, `WE` between two snapshots (`a` earlier than `b`).
pub fn variations(model: &Model, a: &Snapshot, b: &Snapshot, c: &Constants) -> Result<VariationReport> {
    let dz: Vec<f64> = b.state.z.iter().zip(&a.state.z).map(|(x, y)| x - y).collect();
    let half_dp: Vec<SymTensor2> = b.state.p.iter().zip(&a.state.p).map(|(x, y)| 0.5 * (*x - *y)).collect();
    let h_terms = model.dissipation_h(&a.state.z, &half_dp)? + model.dissipation_h(&b.state.z, &half_dp)?;
    let dp_l2 = 2.0 * model.p_l2(&half_dp);
    let dz_l2 = model.z_l2(&dz);
    let p_slope_term = contact_product(dp_l2, 0.5 * (a.slopes.d_p + b.slopes.d_p));
    let z_slope_term = contact_product(dz_l2, 0.5 * (a.slopes.d_z + b.slopes.d_z));
    let r = model.dissipation_r(&dz);
    let dz_l1 = model.z_l1(&dz);
    let dz_linf = dz.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let phi_change = b.phi - a.phi;
    let rv = r + z_slope_term;
    let arv = phi_change + rv + c.k_w * dz_l1 * dz_linf;
    Ok(VariationReport {
        s1: a.s,
        s2: b.s,
        e1: a.energy,
        e2: b.energy,
        h_terms,
        p_slope_term,
        hv: h_terms + p_slope_term,
        r,
        z_slope_term,
        rv,
        phi_change,
        arv,
        we: work_variation(model, a, b),
        dz_l1,
        dz_l2,
        dz_linf,
        dp_l2,
        k_c: c.k_c,
        k_w: c.k_w,
    })
}

/// Outcome of the two-point estimate on one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Cornerstone {
    Slack(f64),
    NotApplicable,
}

impl Cornerstone {
    pub fn slack(self) -> Option<f64> {
        match self {
            Cornerstone::Slack(v) => Some(v),
            Cornerstone::NotApplicable => None,
        }
    }
}

/// Slack of the estimate when both endpoints are stable or the interval is
/// unstable throughout; not applicable otherwise.
pub fn cornerstone_check(report: &VariationReport, condition: EndpointCondition) -> Cornerstone {
    match condition {
        EndpointCondition::Mixed => Cornerstone::NotApplicable,
        _ => Cornerstone::Slack(report.slack()),
    }
}

/// One evaluated pair of partition nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairCheck {
    pub i: usize,
    pub j: usize,
    pub s1: f64,
    pub s2: f64,
    pub condition: EndpointCondition,
    pub arv: f64,
    pub slack: Option<f64>,
}

/// All pairs `i < j` of the given sample indices.
pub fn pair_checks(
    model: &Model,
    rpt: &ReparamTrajectory,
    regimes: &RegimeTag,
    nodes: &[usize],
    c: &Constants,
) -> Result<Vec<PairCheck>> {
    let snaps: Vec<Snapshot> = nodes.iter().map(|&j| Snapshot::from_sample(model, rpt, j)).collect();
    let mut out = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let rep = variations(model, &snaps[a], &snaps[b], c)?;
            let condition = regimes.endpoint_condition(nodes[a], nodes[b]);
            out.push(PairCheck {
                i: nodes[a],
                j: nodes[b],
                s1: rep.s1,
                s2: rep.s2,
                condition,
                arv: rep.arv,
                slack: cornerstone_check(&rep, condition).slack(),
            });
        }
    }
    Ok(out)
}

/// `Σ WE` over consecutive nodes of a partition given by sample indices.
pub fn work_riemann_sum(model: &Model, rpt: &ReparamTrajectory, nodes: &[usize]) -> f64 {
    let snaps: Vec<Snapshot> = nodes.iter().map(|&j| Snapshot::from_sample(model, rpt, j)).collect();
    snaps.windows(2).map(|w| work_variation(model, &w[0], &w[1])).sum()
}

/// `∫₀^S ∂_tE · t' ds` by the trapezoid rule over all samples.
pub fn work_integral(rpt: &ReparamTrajectory) -> f64 {
    let mut acc = 0.0;
    for j in 1..rpt.len() {
        let f = |i: usize| rpt.d_t_energy[i] * rpt.tprime[i];
        acc += 0.5 * (rpt.s[j] - rpt.s[j - 1]) * (f(j) + f(j - 1));
    }
    acc
}

/// Mediesci partition of one unstable component's `D*` profile.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComponentPartition {
    pub first: usize,
    pub last: usize,
    pub eta: f64,
    /// Sample indices of the nodes.
    pub nodes: Vec<usize>,
    pub iterations: usize,
    pub iteration_bound: f64,
    /// Inequality at every sample, checked exactly.
    pub holds: bool,
}

/// Runs the partition on every unstable component with absolute `eta`.
pub fn component_partitions(rpt: &ReparamTrajectory, regimes: &RegimeTag, eta: f64) -> Result<Vec<ComponentPartition>> {
    regimes
        .components
        .iter()
        .map(|c| {
            let psi: Vec<f64> = (c.first..=c.last).map(|j| rpt.dstar(j)).collect();
            let part = mediesci_partition(&psi, eta)?;
            Ok(ComponentPartition {
                first: c.first,
                last: c.last,
                eta,
                holds: first_violation(&psi, &part.nodes, eta).is_none(),
                iteration_bound: iteration_bound(&psi, eta),
                iterations: part.iterations,
                nodes: part.nodes.iter().map(|i| i + c.first).collect(),
            })
        })
        .collect()
}

/// Counts and extremes over the pair checks.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairSummary {
    pub pairs: usize,
    pub applicable: usize,
    pub min_slack: f64,
    pub min_arv: f64,
    /// Slack tolerance, scaled by the energy scale.
    pub tolerance: f64,
    pub arv_tolerance: f64,
    pub passed: bool,
}

pub fn summarize_pairs(pairs: &[PairCheck], tolerance: f64, arv_tolerance: f64) -> PairSummary {
    let applicable = pairs.iter().filter(|p| p.slack.is_some()).count();
    let min_slack = pairs.iter().filter_map(|p| p.slack).fold(f64::INFINITY, f64::min);
    let min_arv = pairs.iter().map(|p| p.arv).fold(f64::INFINITY, f64::min);
    PairSummary {
        pairs: pairs.len(),
        applicable,
        min_slack,
        min_arv,
        tolerance,
        arv_tolerance,
        passed: min_slack >= -tolerance && min_arv >= -arv_tolerance,
    }
}

/// Full diagnostics of one reparameterized run.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagnosticsReport {
    pub energy_scale: f64,
    pub regimes: RegimeTag,
    pub constants: Constants,
    pub partition: Vec<usize>,
    pub cornerstone: Vec<PairCheck>,
    pub cornerstone_summary: PairSummary,
    pub mediesci: Vec<ComponentPartition>,
    pub lower_inequality: LowerInequalityLedger,
    /// `(nodes, Σ WE)` over refining uniform partitions.
    pub work_sums: Vec<(usize, f64)>,
    pub work_integral: f64,
}

impl DiagnosticsReport {
    /// All checks with a pass/fail meaning.
    pub fn passed(&self) -> bool {
        self.cornerstone_summary.passed
            && self.mediesci.iter().all(|m| m.holds && m.iterations as f64 <= m.iteration_bound)
    }
}

/// Regimes, pair checks, component partitions, the lower-inequality ledger
/// and work sums for `rpt`.
pub fn diagnose(model: &Model, rpt: &ReparamTrajectory, settings: &DiagnosticSettings) -> Result<DiagnosticsReport> {
    settings.validate()?;
    if rpt.len() < 2 {
        return Err(Error::Contract("diagnostics need at least 2 samples".into()));
    }
    let scale = energy_scale(rpt);
    let theta = stability_threshold(model, rpt, settings);
    let regimes = classify_regimes(rpt, theta, settings.theta_frozen);
    let constants = Constants::for_run(&model.material, rpt)?;
    let partition = uniform_partition(rpt.len(), settings.n_partition);
    let cornerstone = pair_checks(model, rpt, &regimes, &partition, &constants)?;
    let cornerstone_summary = summarize_pairs(&cornerstone, settings.tol_slack * scale, settings.tol_slack);
    let max_dstar = (0..rpt.len()).map(|j| rpt.dstar(j)).fold(0.0, f64::max);
    let eta = settings.eta * max_dstar.max(theta);
    let mediesci = component_partitions(rpt, &regimes, eta)?;
    let lower_inequality =
        lower_inequality_ledger(model, rpt, &regimes, &partition, eta, settings.beta * scale, &constants)?;
    let mut work_sums = Vec::new();
    let mut n = 2;
    while n < rpt.len() {
        work_sums.push((n, work_riemann_sum(model, rpt, &uniform_partition(rpt.len(), n))));
        n = 2 * n - 1;
    }
    work_sums.push((rpt.len(), work_riemann_sum(model, rpt, &uniform_partition(rpt.len(), rpt.len()))));
    Ok(DiagnosticsReport {
        energy_scale: scale,
        regimes,
        constants,
        partition,
        cornerstone,
        cornerstone_summary,
        mediesci,
        lower_inequality,
        work_sums,
        work_integral: work_integral(rpt),
    })
}

#[cfg(test)]
mod tests;
