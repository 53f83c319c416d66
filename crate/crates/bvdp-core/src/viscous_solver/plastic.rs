//! Per-element viscous radial return and its consistent tangent.

use crate::material_laws::MaterialParams;
use crate::tensor_mesh::SymTensor2;

/// Outcome of the return map on one element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnMap {
    pub p: SymTensor2,
    pub sigma: SymTensor2,
    /// Plastic multiplier `Δγ = |p − p_prev|`.
    pub dgamma: f64,
    /// Flow direction (unit deviatoric), zero on elastic steps.
    pub n: SymTensor2,
    /// `|σ_D^tr|`.
    pub trial_norm: f64,
    pub yield_radius: f64,
}

impl ReturnMap {
    pub fn is_plastic(&self) -> bool {
        self.dgamma > 0.0
    }
}

/// `ε/τ`, with `τ = ∞` meaning no viscous shift.
pub(crate) fn viscous_modulus(eps: f64, tau: f64) -> f64 {
    if tau.is_finite() {
        eps / tau
    } else {
        0.0
    }
}

/// Minimizes `½V(z̄)ℂ(E − p):(E − p) + σ_y(z̄)|p − p_prev| + (ε/2τ)|p − p_prev|²`
/// over deviatoric `p`, where `total_strain = E(u + w)`.
pub fn update_p(mat: &MaterialParams, zbar: f64, total_strain: SymTensor2, p_prev: SymTensor2, tau: f64) -> ReturnMap {
    let sigma_tr = mat.elastic_apply(zbar, total_strain - p_prev);
    let sd = sigma_tr.deviatoric();
    let s = sd.norm();
    let sy = mat.yield_radius(zbar);
    if s <= sy {
        return ReturnMap { p: p_prev, sigma: sigma_tr, dgamma: 0.0, n: SymTensor2::ZERO, trial_norm: s, yield_radius: sy };
    }
    let g2 = 2.0 * mat.mu * mat.v(zbar);
    let dgamma = (s - sy) / (g2 + viscous_modulus(mat.eps, tau));
    let n = (1.0 / s) * sd;
    ReturnMap {
        p: p_prev + dgamma * n,
        sigma: sigma_tr - (g2 * dgamma) * n,
        dgamma,
        n,
        trial_norm: s,
        yield_radius: sy,
    }
}

/// Derivative of `σ` with respect to the total strain, in Mandel form.
pub fn consistent_tangent(mat: &MaterialParams, zbar: f64, rm: &ReturnMap, tau: f64) -> [[f64; 3]; 3] {
    let v = mat.v(zbar);
    if !rm.is_plastic() {
        return mat.stiffness_mandel().map(|row| row.map(|x| v * x));
    }
    let g2 = 2.0 * mat.mu * v;
    let c = g2 / (g2 + viscous_modulus(mat.eps, tau));
    let radial = 1.0 - c;
    let tangential = radial + c * rm.yield_radius / rm.trial_norm;
    let bulk = v * (mat.lambda + mat.mu);
    let n = rm.n.to_mandel();
    let m = [1.0, 1.0, 0.0];
    let mut d = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { 1.0 } else { 0.0 };
            let dev = id - 0.5 * m[i] * m[j];
            let nn = n[i] * n[j];
            d[i][j] = bulk * m[i] * m[j] + g2 * (radial * nn + tangential * (dev - nn));
        }
    }
    d
}

/// Residual of `∂_πH(z̄, Δp/τ) + ε Δp/τ ∋ σ_D` on one element.
pub fn inclusion_residual(mat: &MaterialParams, zbar: f64, sigma: SymTensor2, p_prev: SymTensor2, p_new: SymTensor2, tau: f64) -> f64 {
    let sd = sigma.deviatoric();
    let sy = mat.yield_radius(zbar);
    let dp = p_new - p_prev;
    let a = dp.norm();
    if a > 0.0 {
        (sd - (sy / a) * dp - (viscous_modulus(mat.eps, tau)) * dp).norm()
    } else {
        (sd.norm() - sy).max(0.0)
    }
}
