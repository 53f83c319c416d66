//! Constitutive functions: degradation `V`, damage potential `W`, yield
//! radius `σ_y`, the dissipation potentials `R` and `H`, and the pointwise
//! projections used by the slope distances.

use alloc::format;
use alloc::vec::Vec;

use crate::tensor_mesh::{Mesh, SymTensor2};
use crate::{Error, Result};

/// Threshold above which a positive damage rate counts as a violation of
/// unidirectionality in [`MaterialParams::dissipation_r`].
pub const TOL_UNIDIR: f64 = 1e-12;

/// Material and regularization parameters.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
    pub delta_v: f64,
    pub kappa: f64,
    pub r_bar: f64,
    #[cfg_attr(feature = "serde", serde(rename = "R_bar"))]
    pub big_r_bar: f64,
    pub w_quad: f64,
    pub w_sing: f64,
    /// Exponent of the fractional gradient term, in `(1, 3/2)`.
    pub m: f64,
    /// Viscosity `ε ≥ 0`.
    pub eps: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 1.0,
            delta_v: 0.1,
            kappa: 0.25,
            r_bar: 0.5,
            big_r_bar: 1.0,
            w_quad: 0.5,
            w_sing: 0.05,
            m: 1.25,
            eps: 1e-2,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("delta_V", self.delta_v),
            ("kappa", self.kappa),
            ("r_bar", self.r_bar),
            ("w_quad", self.w_quad),
            ("w_sing", self.w_sing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.big_r_bar > self.r_bar && self.big_r_bar.is_finite()) {
            return Err(Error::Parameter(format!(
                "yield radii need 0 < r_bar < R_bar, got {} and {}",
                self.r_bar, self.big_r_bar
            )));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Parameter(format!("eps must be nonnegative, got {}", self.eps)));
        }
        crate::tensor_mesh::nonlocal::check_exponent(self.m)
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    /// `V(z) = δ_V + z²`.
    pub fn v(&self, z: f64) -> f64 {
        self.delta_v + z * z
    }

    /// `V(z + s) − V(z)` without cancellation.
    pub fn v_increment(&self, z: f64, s: f64) -> f64 {
        s * (2.0 * z + s)
    }

    pub fn dv(&self, z: f64) -> f64 {
        2.0 * z
    }

    pub fn d2v(&self, _z: f64) -> f64 {
        2.0
    }

    /// `W(z) = w_quad (z−1)² + w_sing z⁻⁵`, `+∞` for `z ≤ 0`.
    pub fn w(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return f64::INFINITY;
        }
        self.w_quad * (z - 1.0) * (z - 1.0) + self.w_sing * libm::pow(z, -5.0)
    }

    /// `W(z + s) − W(z)` without cancellation.
    pub fn w_increment(&self, z: f64, s: f64) -> f64 {
        if z <= 0.0 || z + s <= 0.0 {
            return f64::INFINITY;
        }
        let sing = libm::pow(z, -5.0) * libm::expm1(-5.0 * libm::log1p(s / z));
        self.w_quad * s * (2.0 * (z - 1.0) + s) + self.w_sing * sing
    }

    pub fn dw(&self, z: f64) -> f64 {
        2.0 * self.w_quad * (z - 1.0) - 5.0 * self.w_sing * libm::pow(z, -6.0)
    }

    pub fn d2w(&self, z: f64) -> f64 {
        2.0 * self.w_quad + 30.0 * self.w_sing * libm::pow(z, -7.0)
    }

    /// Yield radius `σ_y(z) = r̄ + (R̄ − r̄) clamp(z, 0, 1)`.
    pub fn yield_radius(&self, z: f64) -> f64 {
        self.r_bar + (self.big_r_bar - self.r_bar) * z.clamp(0.0, 1.0)
    }

    /// Lipschitz constant `C_K = R̄ − r̄` of `σ_y`.
    pub fn c_k(&self) -> f64 {
        self.big_r_bar - self.r_bar
    }

    /// `ℂe = 2μe + λ tr(e) I`.
    pub fn stiffness_apply(&self, e: SymTensor2) -> SymTensor2 {
        2.0 * self.mu * e + (self.lambda * e.trace()) * SymTensor2::IDENTITY
    }

    /// `ℂe : e`.
    pub fn stiffness_energy(&self, e: SymTensor2) -> f64 {
        let tr = e.trace();
        2.0 * self.mu * e.norm_sq() + self.lambda * tr * tr
    }

    /// `σ = V(z) ℂe`.
    pub fn elastic_apply(&self, z: f64, e: SymTensor2) -> SymTensor2 {
        self.v(z) * self.stiffness_apply(e)
    }

    /// `ℂ` in Mandel coordinates.
    pub fn stiffness_mandel(&self) -> [[f64; 3]; 3] {
        let (mu, la) = (self.mu, self.lambda);
        [[2.0 * mu + la, la, 0.0], [la, 2.0 * mu + la, 0.0], [0.0, 0.0, 2.0 * mu]]
    }

    /// Coercivity constant `γ₁ = 2μ δ_V` of `C(z)`.
    pub fn gamma1(&self) -> f64 {
        2.0 * self.mu * self.delta_v
    }

    /// `R(η) = Σ m_i κ|η_i|` for `η ≤ 0`, `+∞` when some `η_i > TOL_UNIDIR`.
    pub fn dissipation_r(&self, lumped_mass: &[f64], eta: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (m, e) in lumped_mass.iter().zip(eta) {
            if *e > TOL_UNIDIR {
                return f64::INFINITY;
            }
            acc += m * self.kappa * e.abs();
        }
        acc
    }

    /// `H(z, π) = Σ_T |T| σ_y(z̄_T) |π_T|` for a deviatoric P0 field `π`.
    pub fn dissipation_h(&self, mesh: &Mesh, z: &[f64], pi: &[SymTensor2]) -> Result<f64> {
        let mut acc = 0.0;
        for (t, p) in pi.iter().enumerate() {
            if p.trace().abs() > 1e-12 * (1.0 + p.norm()) {
                return Err(Error::Contract(format!(
                    "plastic rate on element {t} is not deviatoric (trace {:e})",
                    p.trace()
                )));
            }
            acc += mesh.area(t) * self.yield_radius(mesh.element_mean(z, t)) * p.norm();
        }
        Ok(acc)
    }

    /// Nearest point of the ball `K(z) = {|τ| ≤ σ_y(z)}` to `σ_D`.
    pub fn project_k(&self, sigma_d: SymTensor2, z: f64) -> SymTensor2 {
        project_ball(sigma_d, self.yield_radius(z))
    }

    /// `K_C = ‖C'‖_Lip / min_{[m₀,1]} C'` for `C'(z) = 2zℂ`.
    pub fn k_c(&self, m0: f64) -> f64 {
        (self.mu + self.lambda) / (self.mu * m0)
    }

    /// `max W''` over 2001 equispaced points of `[m₀, 1]`.
    pub fn k_w(&self, m0: f64) -> f64 {
        (0..=2000)
            .map(|i| self.d2w(m0 + (1.0 - m0) * i as f64 / 2000.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Radial projection onto the ball of the given radius.
pub fn project_ball(a: SymTensor2, radius: f64) -> SymTensor2 {
    let n = a.norm();
    if n <= radius {
        a
    } else {
        (radius / n) * a
    }
}

/// Pointwise nearest element of `∂R(0) = {γ ≥ −κ}`: `γ* = max(ξ, −κ)`.
pub fn subdiff_r_at_zero_projection(kappa: f64, xi: &[f64]) -> Vec<f64> {
    xi.iter().map(|x| x.max(-kappa)).collect()
}
