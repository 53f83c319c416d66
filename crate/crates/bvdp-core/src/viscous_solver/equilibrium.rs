//! Displacement solves: the linear elastic problem at fixed `p` and the
//! coupled `(u, p)` problem with the return map eliminated per element.

use alloc::format;
use alloc::vec::Vec;

use super::plastic::{consistent_tangent, update_p, viscous_modulus, ReturnMap};
use super::SolverSettings;
use crate::energetics::Model;
use crate::linalg::dot;
use crate::tensor_mesh::SymTensor2;
use crate::{Error, Result};

/// Minimizer of `Q(E(u + w(t)) − p, z) − ⟨F(t), u⟩` over homogeneous-Dirichlet `u`.
pub fn solve_momentum(model: &Model, t: f64, z: &[f64], p: &[SymTensor2]) -> Result<Vec<f64>> {
    let mut k = model.elastic_stiffness(z)?;
    let q = crate::energetics::State { u: alloc::vec![0.0; model.layout.n_u_full()], z: z.to_vec(), p: p.to_vec() };
    let r = model.momentum_residual(t, &q);
    k.factor()?;
    let du = k.solve(&r);
    let free: Vec<f64> = du.iter().map(|v| -v).collect();
    Ok(model.layout.extend(&free))
}

/// Converged `(u, p)` for fixed `z`.
#[derive(Clone, Debug)]
pub struct CoupledSolve {
    pub u: Vec<f64>,
    pub p: Vec<SymTensor2>,
    pub sigma: Vec<SymTensor2>,
    pub newton_iters: usize,
    /// Newton decrement `(rᵀK_t⁻¹r)^{1/2}` at exit.
    pub decrement: f64,
}

struct Evaluation {
    value: f64,
    maps: Vec<ReturnMap>,
    residual: Vec<f64>,
}

struct Coupled<'a> {
    model: &'a Model,
    t: f64,
    tau: f64,
    zbar: Vec<f64>,
    p_prev: &'a [SymTensor2],
    force: Vec<f64>,
}

impl Coupled<'_> {
    fn evaluate(&self, u: &[f64]) -> Evaluation {
        let m = self.model;
        let mat = &m.material;
        let eta = viscous_modulus(mat.eps, self.tau);
        let mut value = 0.0;
        let mut maps = Vec::with_capacity(m.mesh.n_elements());
        for k in 0..m.mesh.n_elements() {
            let total = m.sym_grad(u, k) + m.dirichlet_strain(self.t, k);
            let rm = update_p(mat, self.zbar[k], total, self.p_prev[k], self.tau);
            let e = total - rm.p;
            let local = 0.5 * mat.v(self.zbar[k]) * mat.stiffness_energy(e)
                + rm.yield_radius * rm.dgamma
                + 0.5 * eta * rm.dgamma * rm.dgamma;
            value += m.mesh.area(k) * local;
            maps.push(rm);
        }
        value -= dot(&self.force, u);
        let sig: Vec<SymTensor2> = maps.iter().map(|r| r.sigma).collect();
        let fi = m.internal_force(&sig);
        let residual = m.layout.u_free_to_full.iter().map(|&d| fi[d] - self.force[d]).collect();
        Evaluation { value, maps, residual }
    }
}

/// Newton iteration on the reduced functional
/// `J(u) = min_p [Q(E(u+w) − p, z) + H(z, p − p_prev) + (ε/2τ)‖p − p_prev‖²] − ⟨F, u⟩`
/// with the consistent tangent and Armijo backtracking.
pub fn solve_coupled(
    model: &Model,
    t: f64,
    z: &[f64],
    u0: &[f64],
    p_prev: &[SymTensor2],
    tau: f64,
    settings: &SolverSettings,
) -> Result<CoupledSolve> {
    if !model.mesh.has_dirichlet() {
        return Err(Error::Setup("no Dirichlet boundary: the displacement problem is singular".into()));
    }
    let prob = Coupled { model, t, tau, zbar: model.mesh.element_means(z), p_prev, force: model.force(t) };
    let lay = &model.layout;
    let mut u = u0.to_vec();
    let mut ev = prob.evaluate(&u);
    for it in 0..settings.max_newton {
        let mut kt = model.assemble_stiffness(|k| consistent_tangent(&model.material, prob.zbar[k], &ev.maps[k], tau));
        if kt.factor().is_err() {
            kt = model.elastic_stiffness(z)?;
            kt.factor()?;
        }
        let d = kt.solve(&ev.residual);
        let slope = dot(&ev.residual, &d);
        let decrement = libm::sqrt(slope.max(0.0));
        if decrement <= settings.tol_u {
            return Ok(finish(u, ev, it, decrement));
        }
        let mut alpha = 1.0;
        loop {
            let mut trial = u.clone();
            for (i, &dof) in lay.u_free_to_full.iter().enumerate() {
                trial[dof] -= alpha * d[i];
            }
            let ev_try = prob.evaluate(&trial);
            let guard = 1e-14 * ev.value.abs().max(1.0);
            if ev_try.value <= ev.value - 1e-4 * alpha * slope + guard {
                u = trial;
                ev = ev_try;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return Err(Error::Numeric(format!(
                    "displacement line search stalled at t = {t} (decrement {decrement:e})"
                )));
            }
        }
    }
    Err(Error::Numeric(format!("displacement Newton did not converge in {} iterations at t = {t}", settings.max_newton)))
}

fn finish(u: Vec<f64>, ev: Evaluation, iters: usize, decrement: f64) -> CoupledSolve {
    CoupledSolve {
        u,
        p: ev.maps.iter().map(|r| r.p).collect(),
        sigma: ev.maps.iter().map(|r| r.sigma).collect(),
        newton_iters: iters,
        decrement,
    }
}
