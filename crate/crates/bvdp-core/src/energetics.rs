//! Driving energy `E(t, q)`, its partial derivatives, the external loads and
//! the slope distances `d_z`, `d_p`.
//!
//! Conventions for the discrete fields:
//! * `u` is a full nodal vector `[u0x, u0y, u1x, …]` vanishing at Dirichlet
//!   vertices; the total displacement is `u + w(t)`.
//! * `z` is nodal; `∫W(z)`, `‖z‖_{L²}` and `‖z‖_{L¹}` use the lumped mass.
//! * `p` is one deviatoric tensor per element.
//! * The elastic energy uses the element mean `z̄_T` in `V`:
//!   `Q = Σ_T |T| ½ V(z̄_T) ℂe_T : e_T`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, BandedSpd, DenseMatrix};
use crate::material_laws::MaterialParams;
use crate::tensor_mesh::{
    assemble_nonlocal_form, l2_products, BoundaryTag, FieldLayout, L2Products, Mesh, SymTensor2,
};
use crate::{Error, Result};

/// Scalar time profile `φ(t)` of a load.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields))]
pub enum Profile {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `φ(t) = slope · t`.
    Ramp { slope: f64 },
    /// `φ(t) = slope · min(t, t_hold)`.
    Hold { slope: f64, t_hold: f64 },
    /// Linear up to `peak` at `t_peak`, then linear back down.
    Triangle { peak: f64, t_peak: f64 },
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value,
            Profile::Ramp { slope } => slope * t,
            Profile::Hold { slope, t_hold } => slope * t.min(t_hold),
            Profile::Triangle { peak, t_peak } => {
                if t <= t_peak {
                    peak * t / t_peak
                } else {
                    peak * (2.0 - t / t_peak)
                }
            }
        }
    }

    /// Right derivative of `φ`.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Profile::Zero | Profile::Constant { .. } => 0.0,
            Profile::Ramp { slope } => slope,
            Profile::Hold { slope, t_hold } => {
                if t < t_hold {
                    slope
                } else {
                    0.0
                }
            }
            Profile::Triangle { peak, t_peak } => {
                if t < t_peak {
                    peak / t_peak
                } else {
                    -peak / t_peak
                }
            }
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Profile::Zero | Profile::Constant { .. })
    }
}

/// Dirichlet datum `w(t, x) = φ(t)(A x + b)`, applied as a global P1 field.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AffineLoad {
    pub profile: Profile,
    pub matrix: [[f64; 2]; 2],
    #[cfg_attr(feature = "serde", serde(default))]
    pub offset: [f64; 2],
}

/// Spatially constant vector load `φ(t) v`.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct VectorLoad {
    pub profile: Profile,
    pub value: [f64; 2],
}

/// Body force, Neumann traction and Dirichlet datum.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct Loads {
    pub dirichlet: AffineLoad,
    pub body: VectorLoad,
    pub traction: VectorLoad,
}

impl Loads {
    /// `w(t) = slope · t · (x, 0)`, no forces.
    pub fn horizontal_stretch(slope: f64) -> Self {
        Self {
            dirichlet: AffineLoad {
                profile: Profile::Ramp { slope },
                matrix: [[1.0, 0.0], [0.0, 0.0]],
                offset: [0.0, 0.0],
            },
            ..Self::default()
        }
    }

    pub fn is_static(&self) -> bool {
        self.dirichlet.profile.is_static()
            && self.body.profile.is_static()
            && self.traction.profile.is_static()
    }
}

/// Unknowns `q = (u, z, p)` at one time node.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<SymTensor2>,
}

/// Parts of the driving energy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    /// Elastic energy `Q`.
    pub elastic: f64,
    /// `Φ(z) = ½ a_m(z, z) + ∫W(z)`.
    pub phi: f64,
    /// `⟨F(t), u + w(t)⟩`.
    pub load: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.elastic + self.phi - self.load
    }
}

/// Slopes at a state: equilibrium residual and the two distances.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Slopes {
    pub r_u: f64,
    pub d_z: f64,
    pub d_p: f64,
}

impl Slopes {
    /// `D* = (d_z² + d_p²)^{1/2}`.
    pub fn dstar(&self) -> f64 {
        libm::hypot(self.d_z, self.d_p)
    }
}

/// Strain-displacement rows in Mandel form for one element:
/// `e_M = B u_e` with `u_e = [u0x, u0y, u1x, u1y, u2x, u2y]`.
pub type ElementB = [[f64; 6]; 3];

/// Mesh, material, loads and the assembled operators of one problem.
#[derive(Clone, Debug)]
pub struct Model {
    pub mesh: Mesh,
    pub layout: FieldLayout,
    pub material: MaterialParams,
    pub loads: Loads,
    /// Matrix of the fractional form `a_m` on nodal `z`.
    pub a_m: Arc<DenseMatrix>,
    pub l2: L2Products,
    b: Vec<ElementB>,
    body_unit: Vec<f64>,
    traction_unit: Vec<f64>,
    w_unit: Vec<f64>,
    ew_unit: Vec<SymTensor2>,
}

fn element_b(grads: &[[f64; 2]; 3]) -> ElementB {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    let mut b = [[0.0; 6]; 3];
    for a in 0..3 {
        let (gx, gy) = (grads[a][0], grads[a][1]);
        b[0][2 * a] = gx;
        b[1][2 * a + 1] = gy;
        b[2][2 * a] = r * gy;
        b[2][2 * a + 1] = r * gx;
    }
    b
}

impl Model {
    /// Assembles the nonlocal matrix serially and builds the model.
    pub fn assemble(mesh: Mesh, material: MaterialParams, loads: Loads) -> Result<Self> {
        material.validate()?;
        let a_m = assemble_nonlocal_form(&mesh, material.m)?;
        Self::new(mesh, material, loads, Arc::new(a_m))
    }

    /// Builds the model around an existing `a_m` matrix for this mesh.
    pub fn new(mesh: Mesh, material: MaterialParams, loads: Loads, a_m: Arc<DenseMatrix>) -> Result<Self> {
        material.validate()?;
        if a_m.dim() != mesh.n_vertices() {
            return Err(Error::Contract(format!(
                "nonlocal matrix has dimension {}, mesh has {} vertices",
                a_m.dim(),
                mesh.n_vertices()
            )));
        }
        let layout = FieldLayout::new(&mesh);
        let l2 = l2_products(&mesh);
        let nv = mesh.n_vertices();
        let b = (0..mesh.n_elements()).map(|t| element_b(mesh.basis_grads(t))).collect();
        let mut body_unit = vec![0.0; 2 * nv];
        for v in 0..nv {
            body_unit[2 * v] = l2.lumped[v] * loads.body.value[0];
            body_unit[2 * v + 1] = l2.lumped[v] * loads.body.value[1];
        }
        let mut traction_unit = vec![0.0; 2 * nv];
        for e in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Neu) {
            let (a, c) = (mesh.vertices()[e.v0], mesh.vertices()[e.v1]);
            let half = 0.5 * libm::hypot(c[0] - a[0], c[1] - a[1]);
            for v in [e.v0, e.v1] {
                traction_unit[2 * v] += half * loads.traction.value[0];
                traction_unit[2 * v + 1] += half * loads.traction.value[1];
            }
        }
        let (am, off) = (loads.dirichlet.matrix, loads.dirichlet.offset);
        let mut w_unit = vec![0.0; 2 * nv];
        for (v, x) in mesh.vertices().iter().enumerate() {
            w_unit[2 * v] = am[0][0] * x[0] + am[0][1] * x[1] + off[0];
            w_unit[2 * v + 1] = am[1][0] * x[0] + am[1][1] * x[1] + off[1];
        }
        let ew_unit = (0..mesh.n_elements()).map(|t| mesh.sym_grad(&w_unit, t)).collect::<Result<_>>()?;
        Ok(Self { mesh, layout, material, loads, a_m, l2, b, body_unit, traction_unit, w_unit, ew_unit })
    }

    /// Same problem with another viscosity.
    pub fn with_eps(&self, eps: f64) -> Self {
        let mut m = self.clone();
        m.material.eps = eps;
        m
    }

    /// Undamaged, unloaded state `u = 0`, `z ≡ 1`, `p = 0`.
    pub fn initial_state(&self) -> State {
        State {
            u: vec![0.0; self.layout.n_u_full()],
            z: vec![1.0; self.mesh.n_vertices()],
            p: vec![SymTensor2::ZERO; self.mesh.n_elements()],
        }
    }

    pub fn element_b(&self, t: usize) -> &ElementB {
        &self.b[t]
    }

    /// Full nodal vector of `w(t)`.
    pub fn dirichlet_field(&self, t: f64) -> Vec<f64> {
        let s = self.loads.dirichlet.profile.value(t);
        self.w_unit.iter().map(|w| s * w).collect()
    }

    /// Full nodal vector of `w'(t)`.
    pub fn dirichlet_rate(&self, t: f64) -> Vec<f64> {
        let s = self.loads.dirichlet.profile.rate(t);
        self.w_unit.iter().map(|w| s * w).collect()
    }

    /// `E(w(t))` on element `t_el`.
    pub fn dirichlet_strain(&self, t: f64, t_el: usize) -> SymTensor2 {
        self.loads.dirichlet.profile.value(t) * self.ew_unit[t_el]
    }

    /// Full load vector `F(t)` (lumped body force plus edge-lumped traction).
    pub fn force(&self, t: f64) -> Vec<f64> {
        let (a, b) = (self.loads.body.profile.value(t), self.loads.traction.profile.value(t));
        self.body_unit.iter().zip(&self.traction_unit).map(|(f, g)| a * f + b * g).collect()
    }

    /// `F'(t)`.
    pub fn force_rate(&self, t: f64) -> Vec<f64> {
        let (a, b) = (self.loads.body.profile.rate(t), self.loads.traction.profile.rate(t));
        self.body_unit.iter().zip(&self.traction_unit).map(|(f, g)| a * f + b * g).collect()
    }

    /// `E(u)` for a full nodal vector.
    pub fn sym_grad(&self, u: &[f64], t_el: usize) -> SymTensor2 {
        self.mesh.sym_grad_unchecked(u, t_el)
    }

    /// Elastic strains `e_T = E(u + w(t)) − p_T`.
    pub fn strains(&self, t: f64, q: &State) -> Vec<SymTensor2> {
        (0..self.mesh.n_elements())
            .map(|k| self.sym_grad(&q.u, k) + self.dirichlet_strain(t, k) - q.p[k])
            .collect()
    }

    /// Stresses `σ_T = V(z̄_T) ℂ e_T`.
    pub fn stresses(&self, z: &[f64], e: &[SymTensor2]) -> Vec<SymTensor2> {
        e.iter()
            .enumerate()
            .map(|(k, e)| self.material.elastic_apply(self.mesh.element_mean(z, k), *e))
            .collect()
    }

    fn check_z(&self, z: &[f64]) -> Result<()> {
        if let Some(i) = z.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Domain(format!("damage variable z = {} at dof {i} is not positive", z[i])));
        }
        Ok(())
    }

    /// `Q(e, z) = Σ_T |T| ½ V(z̄_T) ℂe_T:e_T`.
    pub fn elastic_energy(&self, z: &[f64], e: &[SymTensor2]) -> f64 {
        e.iter()
            .enumerate()
            .map(|(k, e)| {
                0.5 * self.mesh.area(k) * self.material.v(self.mesh.element_mean(z, k)) * self.material.stiffness_energy(*e)
            })
            .sum()
    }

    /// `Φ(z) = ½ zᵀA_m z + Σ m_i W(z_i)`.
    pub fn phi(&self, z: &[f64]) -> f64 {
        let w: f64 = self.l2.lumped.iter().zip(z).map(|(m, z)| m * self.material.w(*z)).sum();
        0.5 * self.a_m.quad_form(z) + w
    }

    /// `D Φ(z) = A_m z + m ∘ W'(z)`.
    pub fn grad_phi(&self, z: &[f64]) -> Vec<f64> {
        let mut g = self.a_m.mul_vec(z);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi += self.l2.lumped[i] * self.material.dw(z[i]);
        }
        g
    }

    /// Energy split into elastic, stored-damage and load parts.
    pub fn energy_parts(&self, t: f64, q: &State) -> Result<EnergyParts> {
        self.check_z(&q.z)?;
        let e = self.strains(t, q);
        let w = self.dirichlet_field(t);
        let f = self.force(t);
        let load = f.iter().zip(q.u.iter().zip(&w)).map(|(f, (u, w))| f * (u + w)).sum();
        Ok(EnergyParts { elastic: self.elastic_energy(&q.z, &e), phi: self.phi(&q.z), load })
    }

    /// `E(t, q) = Q(e, z) + Φ(z) − ⟨F(t), u + w(t)⟩`.
    pub fn energy(&self, t: f64, q: &State) -> Result<f64> {
        Ok(self.energy_parts(t, q)?.total())
    }

    /// `∂_t E = ⟨σ, E(w')⟩ − ⟨F', u + w⟩ − ⟨F, w'⟩`.
    pub fn d_t_energy(&self, t: f64, q: &State) -> f64 {
        let e = self.strains(t, q);
        let sig = self.stresses(&q.z, &e);
        let rate = self.loads.dirichlet.profile.rate(t);
        let stress_power: f64 = sig
            .iter()
            .enumerate()
            .map(|(k, s)| self.mesh.area(k) * s.ddot(&(rate * self.ew_unit[k])))
            .sum();
        let (w, wp) = (self.dirichlet_field(t), self.dirichlet_rate(t));
        let (f, fp) = (self.force(t), self.force_rate(t));
        let mut load_power = 0.0;
        for i in 0..f.len() {
            load_power += fp[i] * (q.u[i] + w[i]) + f[i] * wp[i];
        }
        stress_power - load_power
    }

    /// Nodal internal forces `Σ_T |T| Bᵀσ_T` on all displacement dofs.
    pub fn internal_force(&self, sig: &[SymTensor2]) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.n_u_full()];
        for (k, tri) in self.mesh.triangles().iter().enumerate() {
            let s = sig[k].to_mandel();
            let b = &self.b[k];
            let a = self.mesh.area(k);
            for (l, &v) in tri.iter().enumerate() {
                for c in 0..2 {
                    let col = 2 * l + c;
                    out[2 * v + c] += a * (b[0][col] * s[0] + b[1][col] * s[1] + b[2][col] * s[2]);
                }
            }
        }
        out
    }

    /// Banded matrix `Σ_T |T| Bᵀ D_T B` on free displacement dofs.
    pub fn assemble_stiffness(&self, d: impl Fn(usize) -> [[f64; 3]; 3]) -> BandedSpd {
        let lay = &self.layout;
        let mut k = BandedSpd::zeros(lay.n_u_free(), lay.u_bandwidth);
        for (el, tri) in self.mesh.triangles().iter().enumerate() {
            let dm = d(el);
            let b = &self.b[el];
            let area = self.mesh.area(el);
            let mut db = [[0.0; 6]; 3];
            for r in 0..3 {
                for c in 0..6 {
                    db[r][c] = dm[r][0] * b[0][c] + dm[r][1] * b[1][c] + dm[r][2] * b[2][c];
                }
            }
            let dofs: [Option<usize>; 6] = core::array::from_fn(|i| lay.u_free[2 * tri[i / 2] + i % 2]);
            for i in 0..6 {
                let Some(gi) = dofs[i] else { continue };
                for j in 0..6 {
                    let Some(gj) = dofs[j] else { continue };
                    if gj > gi {
                        continue;
                    }
                    let v = b[0][i] * db[0][j] + b[1][i] * db[1][j] + b[2][i] * db[2][j];
                    k.add_lower(gi, gj, area * v);
                }
            }
        }
        k
    }

    /// Elastic stiffness `K(z)` on free dofs (unfactored).
    pub fn elastic_stiffness(&self, z: &[f64]) -> Result<BandedSpd> {
        if !self.mesh.has_dirichlet() {
            return Err(Error::Setup("no Dirichlet boundary: the elastic stiffness is singular".into()));
        }
        let c = self.material.stiffness_mandel();
        Ok(self.assemble_stiffness(|k| {
            let v = self.material.v(self.mesh.element_mean(z, k));
            c.map(|row| row.map(|x| v * x))
        }))
    }

    /// Momentum residual `r_u = Σ|T|Bᵀσ − F` on free dofs and its norm
    /// `(r_uᵀ K(z)⁻¹ r_u)^{1/2}`.
    pub fn grad_u_residual(&self, t: f64, q: &State) -> Result<(Vec<f64>, f64)> {
        let mut k = self.elastic_stiffness(&q.z)?;
        let r = self.momentum_residual(t, q);
        k.factor()?;
        let y = k.solve(&r);
        let n = libm::sqrt(dot(&r, &y).max(0.0));
        Ok((r, n))
    }

    /// Momentum residual on free dofs.
    pub fn momentum_residual(&self, t: f64, q: &State) -> Vec<f64> {
        let e = self.strains(t, q);
        let sig = self.stresses(&q.z, &e);
        let fi = self.internal_force(&sig);
        let f = self.force(t);
        self.layout.u_free_to_full.iter().map(|&d| fi[d] - f[d]).collect()
    }

    /// Element values `c_T = ℂe_T : e_T`.
    pub fn stiffness_energies(&self, e: &[SymTensor2]) -> Vec<f64> {
        e.iter().map(|e| self.material.stiffness_energy(*e)).collect()
    }

    /// `∂_z Q = Σ_T |T| z̄_T c_T / 3` per vertex.
    pub fn grad_z_elastic(&self, z: &[f64], c: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; z.len()];
        for (k, tri) in self.mesh.triangles().iter().enumerate() {
            let zbar = self.mesh.element_mean(z, k);
            let v = self.mesh.area(k) * 0.5 * self.material.dv(zbar) * c[k] / 3.0;
            for &i in tri {
                g[i] += v;
            }
        }
        g
    }

    /// `D_zE = A_m z + m ∘ W'(z) + ∂_z Q`.
    pub fn grad_z(&self, t: f64, q: &State) -> Vec<f64> {
        let e = self.strains(t, q);
        let c = self.stiffness_energies(&e);
        let mut g = self.grad_phi(&q.z);
        for (gi, qi) in g.iter_mut().zip(self.grad_z_elastic(&q.z, &c)) {
            *gi += qi;
        }
        g
    }

    /// `d_z = ‖min(ξ + κ, 0)‖` with `ξ = −D_zE / m` (lumped).
    pub fn slope_distance_z(&self, t: f64, q: &State) -> f64 {
        self.slope_distance_z_from(&self.grad_z(t, q))
    }

    pub fn slope_distance_z_from(&self, g: &[f64]) -> f64 {
        let kappa = self.material.kappa;
        let s: f64 = g
            .iter()
            .zip(&self.l2.lumped)
            .map(|(g, m)| {
                let r = (-g / m + kappa).min(0.0);
                m * r * r
            })
            .sum();
        libm::sqrt(s)
    }

    /// `d_p = (Σ_T |T| (|σ_D,T| − σ_y(z̄_T))₊²)^{1/2}`.
    pub fn slope_distance_p(&self, t: f64, q: &State) -> f64 {
        let e = self.strains(t, q);
        let sig = self.stresses(&q.z, &e);
        self.slope_distance_p_from(&q.z, &sig)
    }

    pub fn slope_distance_p_from(&self, z: &[f64], sig: &[SymTensor2]) -> f64 {
        let s: f64 = sig
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let r = (s.deviatoric().norm() - self.material.yield_radius(self.mesh.element_mean(z, k))).max(0.0);
                self.mesh.area(k) * r * r
            })
            .sum();
        libm::sqrt(s)
    }

    /// `(‖r_u‖, d_z, d_p)` at `(t, q)`.
    pub fn slopes(&self, t: f64, q: &State) -> Result<Slopes> {
        let (_, r_u) = self.grad_u_residual(t, q)?;
        Ok(Slopes { r_u, d_z: self.slope_distance_z(t, q), d_p: self.slope_distance_p(t, q) })
    }

    /// Lumped `‖z‖_{L¹}`.
    pub fn z_l1(&self, z: &[f64]) -> f64 {
        self.l2.lumped.iter().zip(z).map(|(m, z)| m * z.abs()).sum()
    }

    /// Lumped `‖z‖_{L²}`.
    pub fn z_l2(&self, z: &[f64]) -> f64 {
        libm::sqrt(self.l2.scalar_norm_sq_lumped(z))
    }

    pub fn p_l1(&self, p: &[SymTensor2]) -> f64 {
        self.l2.tensor_norm_l1(p)
    }

    pub fn p_l2(&self, p: &[SymTensor2]) -> f64 {
        libm::sqrt(self.l2.tensor_norm_sq(p))
    }

    /// `R(Δz)` with the lumped mass.
    pub fn dissipation_r(&self, dz: &[f64]) -> f64 {
        self.material.dissipation_r(&self.l2.lumped, dz)
    }

    /// `H(z, Δp)`.
    pub fn dissipation_h(&self, z: &[f64], dp: &[SymTensor2]) -> Result<f64> {
        self.material.dissipation_h(&self.mesh, z, dp)
    }
}
