//! Tensor algebra, triangulations, finite-element spaces, quadrature and
//! assembly of local and nonlocal bilinear forms.

mod mesh;
pub mod nonlocal;
pub mod products;
pub mod quadrature;
mod tensor;

pub use mesh::{sym_grad_triangle, BoundaryEdge, BoundaryTag, FieldLayout, Mesh, Side};
pub use nonlocal::{assemble_nonlocal_form, assemble_nonlocal_form_with, NonlocalQuadrature};
pub use products::{l2_products, L2Products};
pub use tensor::{deviatoric, SymTensor2};
