//! L² Gram matrices and lumped weights for the P1 and P0 spaces.

use alloc::vec;
use alloc::vec::Vec;

use super::{Mesh, SymTensor2};
use crate::linalg::CsrMatrix;

/// Mass data of one mesh.
#[derive(Clone, Debug)]
pub struct L2Products {
    /// Consistent P1 scalar mass matrix.
    pub mass: CsrMatrix,
    /// Row sums of `mass` (one third of the patch area per vertex).
    pub lumped: Vec<f64>,
    /// Element areas, the P0 Gram diagonal.
    pub areas: Vec<f64>,
}

impl L2Products {
    /// `‖z‖²` with the consistent mass.
    pub fn scalar_norm_sq(&self, z: &[f64]) -> f64 {
        self.mass.quad_form(z)
    }

    /// `‖z‖²` with the lumped mass.
    pub fn scalar_norm_sq_lumped(&self, z: &[f64]) -> f64 {
        self.lumped.iter().zip(z).map(|(m, v)| m * v * v).sum()
    }

    /// `‖u‖²` for a full nodal P1 vector field `[u0x, u0y, …]`.
    pub fn vector_norm_sq(&self, u: &[f64]) -> f64 {
        let ux: Vec<f64> = u.iter().step_by(2).copied().collect();
        let uy: Vec<f64> = u.iter().skip(1).step_by(2).copied().collect();
        self.mass.quad_form(&ux) + self.mass.quad_form(&uy)
    }

    /// `‖A‖² = Σ_T area(T)|A_T|²` for a P0 tensor field.
    pub fn tensor_norm_sq(&self, a: &[SymTensor2]) -> f64 {
        self.areas.iter().zip(a).map(|(w, t)| w * t.norm_sq()).sum()
    }

    /// `Σ_T area(T)|A_T|`.
    pub fn tensor_norm_l1(&self, a: &[SymTensor2]) -> f64 {
        self.areas.iter().zip(a).map(|(w, t)| w * t.norm()).sum()
    }
}

pub fn l2_products(mesh: &Mesh) -> L2Products {
    let nv = mesh.n_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.n_elements());
    let mut lumped = vec![0.0; nv];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.area(t);
        for i in 0..3 {
            lumped[tri[i]] += a / 3.0;
            for j in 0..3 {
                let v = if i == j { a / 6.0 } else { a / 12.0 };
                trip.push((tri[i], tri[j], v));
            }
        }
    }
    L2Products {
        mass: CsrMatrix::from_triplets(nv, trip),
        lumped,
        areas: mesh.element_areas().to_vec(),
    }
}
