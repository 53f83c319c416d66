//! Assembly of the fractional gradient form
//! `a_m(z₁,z₂) = ∬ (∇z₁(x)−∇z₁(y))·(∇z₂(x)−∇z₂(y)) |x−y|^{−2m} dx dy`
//! for P1 fields on a planar mesh.
//!
//! Because `∇z` is constant per element the form reduces to element-pair
//! weights `w_{TT'} = ∬_{T×T'} |x−y|^{−2m}`. The inner integral over `T'`
//! is evaluated in closed form through the divergence theorem and the
//! incomplete beta function; the outer integral uses Gauss rules on `T`,
//! geometrically graded toward the shared vertex or edge for touching pairs.
//!
//! For P1 fields the weight of two elements sharing an edge is finite only
//! when `m < 3/2`; larger exponents are rejected.

use alloc::format;
use alloc::vec::Vec;

use super::quadrature::{Rule1d, TriangleRule};
use super::Mesh;
use crate::linalg::DenseMatrix;
use crate::special::CosPowerIntegral;
use crate::{Error, Result};

/// Quadrature settings for the element-pair weights.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct NonlocalQuadrature {
    /// Collapsed-Gauss order on `T` for pairs without a common vertex.
    pub far_order: usize,
    /// Gauss order per direction for pairs sharing a vertex or an edge.
    pub touch_order: usize,
    /// Largest element count accepted for dense assembly.
    pub max_elements: usize,
}

impl Default for NonlocalQuadrature {
    fn default() -> Self {
        Self { far_order: 3, touch_order: 10, max_elements: 2048 }
    }
}

impl NonlocalQuadrature {
    /// Both orders raised by two.
    pub fn refined(&self) -> Self {
        Self { far_order: self.far_order + 2, touch_order: self.touch_order + 2, ..self.clone() }
    }
}

/// Admissible exponents for P1 fields in two dimensions.
pub fn check_exponent(m: f64) -> Result<()> {
    if !(m > 1.0 && m < 2.0) {
        return Err(Error::Parameter(format!("nonlocal exponent m = {m} outside (1, 2)")));
    }
    if m >= 1.5 {
        return Err(Error::Parameter(format!(
            "nonlocal exponent m = {m} >= 3/2: the form is infinite on P1 fields \
             (edge-adjacent pair weights diverge)"
        )));
    }
    Ok(())
}

/// `∫_{T'} |x−y|^{−2m} dy` for `x` outside the closed triangle `T'`.
///
/// With `div_y((y−x)|y−x|^{−2m}) = (2−2m)|y−x|^{−2m}` the integral becomes
/// a sum of edge terms `h ∫ (h²+σ²)^{−m} dσ`, each reduced to
/// `sign(h)|h|^{2−2m} ∫ cos^{2m−2}θ dθ`.
pub fn inner_potential(x: [f64; 2], tri: [[f64; 2]; 3], m: f64, cpi: &CosPowerIntegral) -> f64 {
    let orient = {
        let (a, b, c) = (tri[0], tri[1], tri[2]);
        (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    };
    let sgn = if orient > 0.0 { 1.0 } else { -1.0 };
    let mut acc = 0.0;
    for i in 0..3 {
        let (a, b) = (tri[i], tri[(i + 1) % 3]);
        let len = libm::hypot(b[0] - a[0], b[1] - a[1]);
        let t = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        // outward normal for counter-clockwise orientation
        let n = [sgn * t[1], -sgn * t[0]];
        let h = (a[0] - x[0]) * n[0] + (a[1] - x[1]) * n[1];
        if h == 0.0 {
            continue;
        }
        let s0 = (x[0] - a[0]) * t[0] + (x[1] - a[1]) * t[1];
        let (s1, s2) = (-s0, len - s0);
        // ∫_{θ1}^{θ2} cos^{2m−2}; when both ends lie on one side of the foot
        // point the difference of tails avoids cancellation.
        let tail = |s: f64| {
            let r2 = h * h + s * s;
            cpi.tail(s * s / r2, h * h / r2)
        };
        let ang = if s1 >= 0.0 {
            tail(s1) - tail(s2)
        } else if s2 <= 0.0 {
            tail(s2) - tail(s1)
        } else {
            let f = |s: f64| {
                let r2 = h * h + s * s;
                cpi.eval(s * s / r2, h * h / r2)
            };
            f(s2) + f(s1)
        };
        acc += h.signum() * libm::pow(h.abs(), 2.0 - 2.0 * m) * ang;
    }
    acc / (2.0 - 2.0 * m)
}

/// Evaluates element-pair weights for one mesh and exponent.
pub struct PairWeights<'a> {
    mesh: &'a Mesh,
    m: f64,
    quad: NonlocalQuadrature,
    cpi: CosPowerIntegral,
    far_xi: Rule1d,
    far_eta: Rule1d,
    touch: Rule1d,
    plain: Rule1d,
}

fn shared_vertices(a: &[usize; 3], b: &[usize; 3]) -> Vec<usize> {
    a.iter().copied().filter(|v| b.contains(v)).collect()
}

impl<'a> PairWeights<'a> {
    pub fn new(mesh: &'a Mesh, m: f64, quad: &NonlocalQuadrature) -> Result<Self> {
        check_exponent(m)?;
        if mesh.n_elements() > quad.max_elements {
            return Err(Error::Parameter(format!(
                "{} elements exceed the dense nonlocal cap of {}",
                mesh.n_elements(),
                quad.max_elements
            )));
        }
        // The inner potential behaves like dist^{2−2m} near a shared edge or
        // vertex; ξ = s^k with k(3 − 2m) = 1 makes the leading term smooth.
        let k = 1.0 / (3.0 - 2.0 * m);
        let touch = Rule1d::gauss(quad.touch_order).power(k);
        Ok(Self {
            mesh,
            m,
            quad: quad.clone(),
            cpi: CosPowerIntegral::new(2.0 * m - 2.0),
            far_xi: Rule1d::gauss(quad.far_order + 1),
            far_eta: Rule1d::gauss(quad.far_order),
            plain: Rule1d::gauss(quad.touch_order),
            touch,
        })
    }

    pub fn exponent(&self) -> f64 {
        self.m
    }

    pub fn quadrature(&self) -> &NonlocalQuadrature {
        &self.quad
    }

    /// Outer rule on element `t` adapted to its relation with `t2`.
    fn outer_rule(&self, t: usize, t2: usize) -> TriangleRule {
        let tri = self.mesh.triangles()[t];
        let p = self.mesh.element_coords(t);
        let shared = shared_vertices(&tri, &self.mesh.triangles()[t2]);
        let local = |v: usize| tri.iter().position(|&w| w == v).unwrap();
        match shared.len() {
            0 => TriangleRule::collapsed(p, &self.far_xi, &self.far_eta),
            1 => {
                let i = local(shared[0]);
                let q = [p[i], p[(i + 1) % 3], p[(i + 2) % 3]];
                TriangleRule::collapsed(q, &self.touch, &self.plain)
            }
            _ => {
                // Split at the midpoint of the shared edge so each half has a
                // shared vertex as Duffy apex and the shared edge at η = 0.
                let (i, j) = (local(shared[0]), local(shared[1]));
                let apex = p[3 - i - j];
                let mid = [0.5 * (p[i][0] + p[j][0]), 0.5 * (p[i][1] + p[j][1])];
                let mut rule = TriangleRule::collapsed([p[i], mid, apex], &self.touch, &self.touch);
                let other = TriangleRule::collapsed([p[j], mid, apex], &self.touch, &self.touch);
                rule.points.extend(other.points);
                rule.weights.extend(other.weights);
                rule
            }
        }
    }

    /// `∬_{T×T'} |x−y|^{−2m} dx dy` for distinct elements.
    pub fn weight(&self, t: usize, t2: usize) -> f64 {
        assert_ne!(t, t2, "same-element pairs carry no weight");
        let rule = self.outer_rule(t, t2);
        let target = self.mesh.element_coords(t2);
        rule.integrate(|x| inner_potential(x, target, self.m, &self.cpi))
    }

    /// Weights `(t2, w_{t,t2})` for all `t2 > t`.
    pub fn row(&self, t: usize) -> Vec<(usize, f64)> {
        (t + 1..self.mesh.n_elements()).map(|t2| (t2, self.weight(t, t2))).collect()
    }
}

/// Accumulates `2 w (G_T − G_T')ᵀ(G_T − G_T')` for the given pair weights,
/// where `G_T` maps nodal values to the element gradient.
pub fn assemble_from_weights<I>(mesh: &Mesh, rows: I) -> DenseMatrix
where
    I: IntoIterator<Item = (usize, Vec<(usize, f64)>)>,
{
    let nv = mesh.n_vertices();
    let mut a = DenseMatrix::zeros(nv);
    for (t, row) in rows {
        let ta = mesh.triangles()[t];
        let ga = mesh.basis_grads(t);
        for (t2, w) in row {
            let tb = mesh.triangles()[t2];
            let gb = mesh.basis_grads(t2);
            for c in 0..2 {
                let mut dofs: [usize; 6] = [0; 6];
                let mut coef: [f64; 6] = [0.0; 6];
                let mut k = 0;
                let mut push = |v: usize, g: f64| {
                    if let Some(j) = dofs[..k].iter().position(|&d| d == v) {
                        coef[j] += g;
                    } else {
                        dofs[k] = v;
                        coef[k] = g;
                        k += 1;
                    }
                };
                for i in 0..3 {
                    push(ta[i], ga[i][c]);
                }
                for i in 0..3 {
                    push(tb[i], -gb[i][c]);
                }
                for i in 0..k {
                    for j in 0..k {
                        a.add(dofs[i], dofs[j], 2.0 * w * coef[i] * coef[j]);
                    }
                }
            }
        }
    }
    a
}

/// Dense matrix `A_m` with `zᵀ A_m z ≈ a_m(z, z)`.
pub fn assemble_nonlocal_form(mesh: &Mesh, m: f64) -> Result<DenseMatrix> {
    assemble_nonlocal_form_with(mesh, m, &NonlocalQuadrature::default())
}

pub fn assemble_nonlocal_form_with(
    mesh: &Mesh,
    m: f64,
    quad: &NonlocalQuadrature,
) -> Result<DenseMatrix> {
    let pw = PairWeights::new(mesh, m, quad)?;
    Ok(assemble_from_weights(mesh, (0..mesh.n_elements()).map(|t| (t, pw.row(t)))))
}

/// `a_m(z₁, z₂)` evaluated directly from pair weights (no matrix).
pub fn form_from_weights(
    mesh: &Mesh,
    pw: &PairWeights<'_>,
    z1: &[f64],
    z2: &[f64],
) -> f64 {
    let ne = mesh.n_elements();
    let g1: Vec<[f64; 2]> = (0..ne).map(|t| mesh.scalar_grad(z1, t)).collect();
    let g2: Vec<[f64; 2]> = (0..ne).map(|t| mesh.scalar_grad(z2, t)).collect();
    let mut s = 0.0;
    for t in 0..ne {
        for t2 in t + 1..ne {
            let d1 = [g1[t][0] - g1[t2][0], g1[t][1] - g1[t2][1]];
            let d2 = [g2[t][0] - g2[t2][0], g2[t][1] - g2[t2][1]];
            s += 2.0 * pw.weight(t, t2) * (d1[0] * d2[0] + d1[1] * d2[1]);
        }
    }
    s
}
