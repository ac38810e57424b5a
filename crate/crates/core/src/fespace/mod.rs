//! Quadrature, hierarchical bases and dof bookkeeping.
//!
//! The concentration field lives in the discontinuous space `P_k` per
//! element; the flux field in an H(div)-conforming hierarchical space whose
//! restriction to an element of flux order `p = k + 1` contains `[P_p]^2`.

pub mod dofmap;
pub mod hdiv;
pub mod l2;
pub mod poly;
pub mod quadrature;

use thiserror::Error;

use crate::mesh::Mesh;

pub use dofmap::{build_dof_map, DofMap, OrderMap};
pub use hdiv::{hdiv_basis, hdiv_reference, BasisEval, FluxLayout};
pub use l2::{l2_basis, l2_basis_jets, l2_tabulated};
pub use quadrature::{quadrature_rule, Domain, QuadratureRule};

/// Largest supported concentration order; flux orders go one higher.
pub const ORDER_MAX: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeError {
    #[error("quadrature degree {degree} exceeds the tabulated cap {cap}")]
    QuadratureDegree { degree: usize, cap: usize },
    #[error("unsupported flux order {0} (supported 1..={max})", max = ORDER_MAX + 1)]
    UnsupportedOrder(usize),
    #[error("invalid order map: {0}")]
    InvalidOrders(String),
}

/// Affine map data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    /// Columns are the images of the reference edge vectors.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// `J^{-T}`, mapping reference gradients to physical gradients.
    pub inv_t: [[f64; 2]; 2],
    pub origin: [f64; 2],
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, e: usize) -> Self {
        let (jac, origin) = mesh.jacobian(e);
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        Self { jac, det, inv_t, origin }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    /// Contravariant Piola transform of a reference vector.
    #[inline]
    pub fn piola(&self, v: [f64; 2]) -> [f64; 2] {
        [
            (self.jac[0][0] * v[0] + self.jac[0][1] * v[1]) / self.det,
            (self.jac[1][0] * v[0] + self.jac[1][1] * v[1]) / self.det,
        ]
    }

    /// Physical gradient from a reference gradient.
    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}

/// Default element quadrature degree for a local flux order.
pub fn element_quadrature_degree(flux_order: usize) -> usize {
    2 * flux_order + 2
}

/// Default edge quadrature degree for an edge order.
pub fn edge_quadrature_degree(edge_order: usize) -> usize {
    2 * edge_order + 2
}
