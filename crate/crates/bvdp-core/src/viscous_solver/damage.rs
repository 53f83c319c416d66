//! Damage update: projected Newton on the incremental `z` problem
//! `min ½zᵀA_m z + Σm W(z) + Q(e, z) + κΣm(z_prev − z) + (ε/2τ)Σm(z − z_prev)²`
//! over `z_floor ≤ z ≤ z_prev`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::plastic::viscous_modulus;
use super::SolverSettings;
use crate::energetics::Model;
use crate::linalg::{dot, Cholesky, DenseMatrix};
use crate::tensor_mesh::SymTensor2;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct DamageSolve {
    pub z: Vec<f64>,
    pub iters: usize,
    /// Projected-gradient residual (lumped `L²` of the pointwise representative).
    pub kkt: f64,
}

/// Incremental damage functional with `(u, p)` frozen.
pub struct DamageProblem<'a> {
    model: &'a Model,
    z_prev: &'a [f64],
    lower: Vec<f64>,
    /// `ℂe_T : e_T` per element.
    c: Vec<f64>,
    eta: f64,
}

impl<'a> DamageProblem<'a> {
    pub fn new(model: &'a Model, t: f64, z_prev: &'a [f64], u: &[f64], p: &[SymTensor2], tau: f64, z_floor: f64) -> Self {
        let e: Vec<SymTensor2> = (0..model.mesh.n_elements())
            .map(|k| model.sym_grad(u, k) + model.dirichlet_strain(t, k) - p[k])
            .collect();
        let c = model.stiffness_energies(&e);
        let lower = z_prev.iter().map(|z| z_floor.min(*z)).collect();
        Self { model, z_prev, lower, c, eta: viscous_modulus(model.material.eps, tau) }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let m = self.model;
        let mat = &m.material;
        let mut elastic = 0.0;
        for k in 0..m.mesh.n_elements() {
            elastic += 0.5 * m.mesh.area(k) * mat.v(m.mesh.element_mean(z, k)) * self.c[k];
        }
        let mut local = 0.0;
        for (i, mi) in m.l2.lumped.iter().enumerate() {
            let d = z[i] - self.z_prev[i];
            local += mi * (-mat.kappa * d + 0.5 * self.eta * d * d);
        }
        m.phi(z) + elastic + local
    }

    /// `value(z + s) − value(z)`, evaluated from the increment so that
    /// large cancelling terms of the nonlocal quadratic never appear.
    pub fn value_change(&self, z: &[f64], s: &[f64]) -> f64 {
        let m = self.model;
        let mat = &m.material;
        let az = m.a_m.mul_vec(z);
        let mut out = dot(&az, s) + 0.5 * m.a_m.quad_form(s);
        for k in 0..m.mesh.n_elements() {
            let (zb, sb) = (m.mesh.element_mean(z, k), m.mesh.element_mean(s, k));
            out += 0.5 * m.mesh.area(k) * self.c[k] * mat.v_increment(zb, sb);
        }
        for (i, mi) in m.l2.lumped.iter().enumerate() {
            let d = z[i] - self.z_prev[i];
            out += mi * (mat.w_increment(z[i], s[i]) - mat.kappa * s[i] + self.eta * s[i] * (d + 0.5 * s[i]));
        }
        out
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let m = self.model;
        let mut g = m.grad_phi(z);
        for (gi, qi) in g.iter_mut().zip(m.grad_z_elastic(z, &self.c)) {
            *gi += qi;
        }
        for (i, mi) in m.l2.lumped.iter().enumerate() {
            g[i] += mi * (-m.material.kappa + self.eta * (z[i] - self.z_prev[i]));
        }
        g
    }

    fn hessian(&self, z: &[f64], free: &[usize]) -> crate::linalg::DenseMatrix {
        let m = self.model;
        let mat = &m.material;
        let nv = z.len();
        let mut pos = vec![usize::MAX; nv];
        for (a, &i) in free.iter().enumerate() {
            pos[i] = a;
        }
        let mut h = m.a_m.submatrix(free);
        for (a, &i) in free.iter().enumerate() {
            h.add(a, a, m.l2.lumped[i] * (mat.d2w(z[i]) + self.eta));
        }
        for (k, tri) in m.mesh.triangles().iter().enumerate() {
            let s = m.mesh.area(k) * 0.5 * mat.d2v(m.mesh.element_mean(z, k)) * self.c[k] / 9.0;
            for &i in tri {
                for &j in tri {
                    if pos[i] != usize::MAX && pos[j] != usize::MAX {
                        h.add(pos[i], pos[j], s);
                    }
                }
            }
        }
        h
    }

    fn diag_hessian(&self, z: &[f64], i: usize) -> f64 {
        let m = self.model;
        m.a_m.get(i, i) + m.l2.lumped[i] * (m.material.d2w(z[i]) + self.eta)
    }

    fn project(&self, z: &mut [f64]) {
        for (i, v) in z.iter_mut().enumerate() {
            *v = v.min(self.z_prev[i]).max(self.lower[i]);
        }
    }

    /// Lumped-`L²` norm of the projected gradient divided by the mass.
    pub fn kkt(&self, z: &[f64], g: &[f64]) -> f64 {
        let mass = &self.model.l2.lumped;
        let mut s = 0.0;
        for i in 0..z.len() {
            let r = if z[i] >= self.z_prev[i] {
                g[i].max(0.0)
            } else if z[i] <= self.lower[i] {
                g[i].min(0.0)
            } else {
                g[i]
            };
            s += r * r / mass[i];
        }
        libm::sqrt(s)
    }

    /// Bertsekas' ε-active-set projected Newton direction.
    fn eps_active_direction(&self, z: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let nv = z.len();
        let mass = &self.model.l2.lumped;
        let mut width = 0.0f64;
        for i in 0..nv {
            let step = (z[i] - g[i] / mass[i]).min(self.z_prev[i]).max(self.lower[i]);
            width = width.max((z[i] - step).abs());
        }
        let width = width.min(1e-6);
        let active: Vec<bool> = (0..nv)
            .map(|i| (z[i] >= self.z_prev[i] - width && g[i] < 0.0) || (z[i] <= self.lower[i] + width && g[i] > 0.0))
            .collect();
        let free: Vec<usize> = (0..nv).filter(|&i| !active[i]).collect();
        let mut d = vec![0.0; nv];
        if !free.is_empty() {
            let chol = Cholesky::factor(&self.hessian(&z, &free))?;
            let gf: Vec<f64> = free.iter().map(|&i| g[i]).collect();
            for (a, v) in chol.solve(&gf).into_iter().enumerate() {
                d[free[a]] = -v;
            }
        }
        for i in (0..nv).filter(|&i| active[i]) {
            d[i] = -g[i] / self.diag_hessian(&z, i);
        }
        Ok(d)
    }

    pub fn solve(&self, start: &[f64], settings: &SolverSettings) -> Result<DamageSolve> {
        let nv = start.len();
        let mut z = start.to_vec();
        self.project(&mut z);
        let tol = settings.tol_z * settings.inner_tol_factor;
        let mut sets = vec![Bound::Free; nv];
        for it in 0..settings.max_z_iters {
            let g = self.gradient(&z);
            let kkt = self.kkt(&z, &g);
            if kkt <= tol {
                return Ok(DamageSolve { z, iters: it, kkt });
            }
            let all: Vec<usize> = (0..nv).collect();
            let h = self.hessian(&z, &all);
            let lo: Vec<f64> = (0..nv).map(|i| self.lower[i] - z[i]).collect();
            let hi: Vec<f64> = (0..nv).map(|i| self.z_prev[i] - z[i]).collect();
            let d = match box_qp(&h, &g, &lo, &hi, &mut sets) {
                Some(d) => d,
                None => self.eps_active_direction(&z, &g)?,
            };
            let mut alpha = 1.0;
            loop {
                let mut trial: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                self.project(&mut trial);
                let step: Vec<f64> = trial.iter().zip(&z).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &step);
                if self.value_change(&z, &step) <= 1e-4 * decrease {
                    z = trial;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    // no representable decrease left
                    return Ok(DamageSolve { z, iters: it, kkt });
                }
            }
        }
        let g = self.gradient(&z);
        let kkt = self.kkt(&z, &g);
        if kkt <= settings.tol_z {
            return Ok(DamageSolve { z, iters: settings.max_z_iters, kkt });
        }
        Err(Error::Numeric(format!(
            "damage update did not converge in {} iterations (residual {kkt:e})",
            settings.max_z_iters
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

/// Primal-dual active-set solve of `min gᵀs + ½sᵀHs` over `lo ≤ s ≤ hi`,
/// warm-started from `sets`. `None` if the active set cycles.
fn box_qp(h: &DenseMatrix, g: &[f64], lo: &[f64], hi: &[f64], sets: &mut [Bound]) -> Option<Vec<f64>> {
    let n = g.len();
    let mut s = vec![0.0; n];
    for _ in 0..50 {
        for i in 0..n {
            if hi[i] <= lo[i] {
                sets[i] = Bound::Upper;
            }
            s[i] = match sets[i] {
                Bound::Free => 0.0,
                Bound::Lower => lo[i],
                Bound::Upper => hi[i],
            };
        }
        let free: Vec<usize> = (0..n).filter(|&i| sets[i] == Bound::Free).collect();
        if !free.is_empty() {
            let hs = h.mul_vec(&s);
            let rhs: Vec<f64> = free.iter().map(|&i| -g[i] - hs[i]).collect();
            let chol = Cholesky::factor(&h.submatrix(&free)).ok()?;
            for (a, v) in chol.solve(&rhs).into_iter().enumerate() {
                s[free[a]] = v;
            }
        }
        let hs = h.mul_vec(&s);
        let mut changed = false;
        for i in 0..n {
            let lambda = if sets[i] == Bound::Free { 0.0 } else { -(hs[i] + g[i]) };
            let trial = s[i] + lambda / h.get(i, i);
            let next = if trial > hi[i] {
                Bound::Upper
            } else if trial < lo[i] {
                Bound::Lower
            } else {
                Bound::Free
            };
            if next != sets[i] && hi[i] > lo[i] {
                sets[i] = next;
                changed = true;
            }
        }
        if !changed {
            return Some(s);
        }
    }
    None
}

/// Solves the damage subproblem at time `t` starting from `start`.
pub fn update_z(
    model: &Model,
    t: f64,
    z_prev: &[f64],
    u: &[f64],
    p: &[SymTensor2],
    tau: f64,
    start: &[f64],
    settings: &SolverSettings,
) -> Result<DamageSolve> {
    DamageProblem::new(model, t, z_prev, u, p, tau, settings.z_floor).solve(start, settings)
}

/// KKT residual of the damage subproblem at the current `(u, z, p)`.
pub fn damage_kkt(model: &Model, t: f64, z_prev: &[f64], u: &[f64], z: &[f64], p: &[SymTensor2], tau: f64, z_floor: f64) -> f64 {
    let prob = DamageProblem::new(model, t, z_prev, u, p, tau, z_floor);
    prob.kkt(z, &prob.gradient(z))
}
