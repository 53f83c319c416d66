//! Discrete lower energy-dissipation inequality assembled over a partition.
//!
//! Each interval of the (refined) base partition is classified by its
//! endpoints. Intervals with both endpoints stable use the two-point estimate
//! directly. Intervals inside the unstable set are split by the mediesci
//! partition of `D*`; intervals with a stable endpoint and unstable interior
//! are first shrunk to their outermost unstable samples and then split the
//! same way. Summing the estimates gives
//!
//! `Σ WE + E(0) ≤ E(S) + Σ H-terms + R(z(S)−z(0)) + ∫_{A°} D·D* + Σ Rem
//!   + η M Σ 1/min D* + β #mixed`
//!
//! plus the slope terms that vanish in the limit (`D*` at stable samples and
//! the `K_C`-coupling of the damage slope), which are recorded separately.

use alloc::vec::Vec;

use super::{variations, Constants, IntervalSnapshots, RegimeTag};
use crate::energetics::Model;
use crate::reparam::ReparamTrajectory;
use crate::{Error, Result};

/// `n` sample indices spread uniformly over `0..len`, ends included.
pub fn uniform_partition(len: usize, n: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let n = n.clamp(2, len.max(2));
    let mut out: Vec<usize> = (0..n)
        .map(|j| libm::round((j as f64) * (len - 1) as f64 / (n - 1) as f64) as usize)
        .collect();
    out.dedup();
    out
}

/// Inserts, in every interval with an unstable endpoint and some stable
/// interior sample, the first and last stable interior samples.
pub fn refine_partition(regimes: &RegimeTag, base: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(base.len());
    for w in base.windows(2) {
        out.push(w[0]);
        let (a, b) = (w[0], w[1]);
        if regimes.is_stable(a) && regimes.is_stable(b) {
            continue;
        }
        let inner = a + 1..b;
        if let Some(first) = inner.clone().find(|&j| regimes.is_stable(j)) {
            let last = inner.rev().find(|&j| regimes.is_stable(j)).unwrap_or(first);
            out.push(first);
            if last != first {
                out.push(last);
            }
        }
    }
    if let Some(&l) = base.last() {
        out.push(l);
    }
    out.dedup();
    out
}

/// Index classes of the refined partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum IntervalClass {
    /// Both endpoints stable.
    Stable,
    /// Closed interval inside the unstable set.
    Unstable,
    /// Unstable interior, at least one stable endpoint.
    Mixed,
}

/// Contributions of one interval `[first, last]` (sample indices).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntervalEntry {
    pub class: IntervalClass,
    pub first: usize,
    pub last: usize,
    /// Nodes of the sub-partition actually summed over.
    pub nodes: Vec<usize>,
    pub mediesci_iterations: usize,
    pub we: f64,
    pub h_terms: f64,
    /// `Σ ‖Δz‖ avg d_z + ‖Δp‖ avg d_p` over the sub-intervals.
    pub slope_terms: f64,
    /// `R(z(last) − z(first))`.
    pub r: f64,
    /// `∫ D·D* ds` over `[first, last]` (unstable classes only).
    pub contact_integral: f64,
    /// `min D*` over the summed range (unstable classes only).
    pub min_dstar: f64,
    pub remainder: f64,
    pub coupling: f64,
    /// `E(s_first) − E(a) + E(b) − E(s_last)` for the shrunk range `[a, b]`.
    pub margin: f64,
    /// Sum of the two-point slacks over the sub-intervals.
    pub chain_slack: f64,
    /// Largest `‖Δz‖_∞` over the sub-intervals.
    pub dz_linf: f64,
}

/// Constants of the remainder bound.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LedgerConstants {
    /// `max(sup |E|, ∫ R(z') + H(z,p') + D·D* ds)`.
    pub big_m: f64,
    /// `sup Φ(z(s))`.
    pub c_m: f64,
    /// `δ = max ‖Δz‖_∞` over all summed sub-intervals.
    pub delta: f64,
    /// `3[(2C_M + M)K_C + (M/κ) K_W (1 + K_C δ)]`.
    pub k_m: f64,
}

/// Assembled discrete lower inequality.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LowerInequalityLedger {
    pub entries: Vec<IntervalEntry>,
    pub counts: [usize; 3],
    pub eta: f64,
    pub beta: f64,
    pub energy_start: f64,
    pub energy_end: f64,
    pub work: f64,
    pub h_terms: f64,
    pub r_total: f64,
    pub contact_integral: f64,
    pub remainder: f64,
    pub eta_term: f64,
    pub beta_term: f64,
    /// Slope terms on stable intervals.
    pub stable_defect: f64,
    pub coupling: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `Σ` two-point slacks `− Σ` margins: the exact gap of the chained
    /// estimates.
    pub chain_slack: f64,
    pub constants: LedgerConstants,
    /// `Σ Rem ≤ δ K_M`.
    pub remainder_bounded: bool,
}

struct SubChain {
    we: f64,
    h_terms: f64,
    slope_terms: f64,
    remainder: f64,
    coupling: f64,
    chain_slack: f64,
    dz_linf: f64,
}

fn chain(model: &Model, snaps: &mut IntervalSnapshots<'_>, nodes: &[usize], c: &Constants) -> Result<SubChain> {
    let mut out = SubChain { we: 0.0, h_terms: 0.0, slope_terms: 0.0, remainder: 0.0, coupling: 0.0, chain_slack: 0.0, dz_linf: 0.0 };
    for w in nodes.windows(2) {
        let rep = {
            let (a, b) = snaps.pair(w[0], w[1]);
            variations(model, a, b, c)?
        };
        out.we += rep.we;
        out.h_terms += rep.h_terms;
        out.slope_terms += rep.z_slope_term + rep.p_slope_term;
        out.remainder += rep.remainder();
        out.coupling += rep.slope_coupling();
        out.chain_slack += rep.slack();
        out.dz_linf = out.dz_linf.max(rep.dz_linf);
    }
    Ok(out)
}

fn trapezoid(rpt: &ReparamTrajectory, first: usize, last: usize, f: impl Fn(usize) -> f64) -> f64 {
    (first + 1..=last).map(|j| 0.5 * (rpt.s[j] - rpt.s[j - 1]) * (f(j) + f(j - 1))).sum()
}

/// Ledger over `base` (sample indices, first `0`, last `len − 1`) with
/// absolute sub-partition tolerance `eta` and endpoint margin `beta`.
pub fn lower_inequality_ledger(
    model: &Model,
    rpt: &ReparamTrajectory,
    regimes: &RegimeTag,
    base: &[usize],
    eta: f64,
    beta: f64,
    c: &Constants,
) -> Result<LowerInequalityLedger> {
    let n = rpt.len();
    if base.len() < 2 || base[0] != 0 || *base.last().unwrap() != n - 1 || base.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("base partition must increase from the first to the last sample".into()));
    }
    if !(eta > 0.0) || !(beta >= 0.0) {
        return Err(Error::Parameter("eta must be positive and beta nonnegative".into()));
    }
    let nodes = refine_partition(regimes, base);
    let dd = |j: usize| super::contact_product(rpt.d[j], rpt.dstar(j));
    let mut snaps = IntervalSnapshots::new(model, rpt);
    let mut entries = Vec::with_capacity(nodes.len() - 1);
    for w in nodes.windows(2) {
        let (first, last) = (w[0], w[1]);
        let r = model.dissipation_r(
            &rpt.states[last].z.iter().zip(&rpt.states[first].z).map(|(x, y)| x - y).collect::<Vec<_>>(),
        );
        let (class, a, b) = if regimes.is_stable(first) && regimes.is_stable(last) {
            (IntervalClass::Stable, first, last)
        } else if !regimes.is_stable(first) && !regimes.is_stable(last) {
            (IntervalClass::Unstable, first, last)
        } else {
            let a = if regimes.is_stable(first) { first + 1 } else { first };
            let b = if regimes.is_stable(last) { last - 1 } else { last };
            (IntervalClass::Mixed, a, b.max(a))
        };
        let (sub, iterations, contact_integral, min_dstar) = match class {
            IntervalClass::Stable => (alloc::vec![first, last], 0, 0.0, 0.0),
            _ => {
                let psi: Vec<f64> = (a..=b).map(|j| rpt.dstar(j)).collect();
                let part = super::mediesci_partition(&psi, eta)?;
                let min = psi.iter().copied().fold(f64::INFINITY, f64::min);
                let sub: Vec<usize> = part.nodes.iter().map(|i| i + a).collect();
                (sub, part.iterations, trapezoid(rpt, first, last, dd), min)
            }
        };
        let ch = chain(model, &mut snaps, &sub, c)?;
        let margin = (rpt.energy[first] - rpt.energy[a]) + (rpt.energy[b] - rpt.energy[last]);
        entries.push(IntervalEntry {
            class,
            first,
            last,
            nodes: sub,
            mediesci_iterations: iterations,
            we: ch.we,
            h_terms: ch.h_terms,
            slope_terms: ch.slope_terms,
            r,
            contact_integral,
            min_dstar,
            remainder: ch.remainder,
            coupling: ch.coupling,
            margin,
            chain_slack: ch.chain_slack,
            dz_linf: ch.dz_linf,
        });
    }

    let sum = |f: &dyn Fn(&IntervalEntry) -> f64| entries.iter().map(f).sum::<f64>();
    let mut counts = [0usize; 3];
    for e in &entries {
        counts[match e.class {
            IntervalClass::Stable => 0,
            IntervalClass::Unstable => 1,
            IntervalClass::Mixed => 2,
        }] += 1;
    }
    let (energy_start, energy_end) = (rpt.energy[0], rpt.energy[n - 1]);
    let work = sum(&|e| e.we);
    let h_terms = sum(&|e| e.h_terms);
    let dz_total: Vec<f64> = rpt.states[n - 1].z.iter().zip(&rpt.states[0].z).map(|(x, y)| x - y).collect();
    let r_total = model.dissipation_r(&dz_total);
    let contact_integral = sum(&|e| e.contact_integral);
    let remainder = sum(&|e| e.remainder);
    let stable_defect = sum(&|e| if e.class == IntervalClass::Stable { e.slope_terms } else { 0.0 });
    let coupling = sum(&|e| e.coupling);

    let mut big_m = rpt.energy.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let dissipation = trapezoid(rpt, 0, n - 1, |j| rpt.m_eps[j].r + rpt.m_eps[j].h + dd(j));
    big_m = big_m.max(dissipation);
    let c_m = rpt.states.iter().map(|q| model.phi(&q.z)).fold(f64::NEG_INFINITY, f64::max);
    let delta = entries.iter().fold(0.0f64, |m, e| m.max(e.dz_linf));
    let k_hat = (2.0 * c_m + big_m) * c.k_c + big_m / model.material.kappa * c.k_w * (1.0 + c.k_c * delta);
    let k_m = 3.0 * k_hat;
    let eta_term = sum(&|e| if e.class == IntervalClass::Stable || e.min_dstar <= 0.0 { 0.0 } else { eta * big_m / e.min_dstar });
    let beta_term = beta * counts[2] as f64;

    let lhs = work + energy_start;
    let rhs = energy_end
        + h_terms
        + r_total
        + contact_integral
        + remainder
        + eta_term
        + beta_term
        + stable_defect
        + coupling;
    let chain_slack = sum(&|e| e.chain_slack - e.margin);
    Ok(LowerInequalityLedger {
        counts,
        eta,
        beta,
        energy_start,
        energy_end,
        work,
        h_terms,
        r_total,
        contact_integral,
        remainder,
        eta_term,
        beta_term,
        stable_defect,
        coupling,
        lhs,
        rhs,
        slack: rhs - lhs,
        chain_slack,
        constants: LedgerConstants { big_m, c_m, delta, k_m },
        remainder_bounded: remainder <= delta * k_m,
        entries,
    })
}
