//! Per-entity orders and global dof numbering.
//!
//! Flux dofs are numbered edge by edge (edge index, then level), followed by
//! element interiors. Mass dofs are element-contiguous.

use super::hdiv::{n_interior, FluxLayout};
use super::poly::dim_p;
use super::{FeError, ORDER_MAX};
use crate::mesh::Mesh;

/// Mass order per element and flux order per edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderMap {
    mass: Vec<usize>,
    edge: Vec<usize>,
}

impl OrderMap {
    pub fn uniform(mesh: &Mesh, k: usize) -> Self {
        Self::from_element_orders(mesh, vec![k; mesh.n_elements()])
    }

    /// Element mass orders; every edge takes the largest adjacent flux order.
    pub fn from_element_orders(mesh: &Mesh, mass: Vec<usize>) -> Self {
        assert_eq!(mass.len(), mesh.n_elements());
        let mut m = Self {
            mass,
            edge: vec![0; mesh.n_edges()],
        };
        m.sync_edges(mesh);
        m
    }

    /// Set every edge order to the max of its neighbours' flux orders.
    pub fn sync_edges(&mut self, mesh: &Mesh) {
        for e in 0..mesh.n_edges() {
            let (a, b) = mesh.edge_elements(e);
            let mut q = self.mass[a] + 1;
            if let Some(b) = b {
                q = q.max(self.mass[b] + 1);
            }
            self.edge[e] = q;
        }
    }

    pub fn mass_order(&self, k: usize) -> usize {
        self.mass[k]
    }

    pub fn flux_order(&self, k: usize) -> usize {
        self.mass[k] + 1
    }

    pub fn edge_order(&self, e: usize) -> usize {
        self.edge[e]
    }

    pub fn mass_orders(&self) -> &[usize] {
        &self.mass
    }

    pub fn edge_orders(&self) -> &[usize] {
        &self.edge
    }

    pub fn max_mass_order(&self) -> usize {
        self.mass.iter().copied().max().unwrap_or(0)
    }

    pub fn set_mass_order(&mut self, k: usize, order: usize) {
        self.mass[k] = order;
    }

    pub fn layout(&self, mesh: &Mesh, k: usize) -> FluxLayout {
        let edges = mesh.element_edges(k);
        FluxLayout {
            edge_orders: edges.map(|e| self.edge[e]),
            interior: self.flux_order(k),
            signs: mesh.orientation_signs(k),
        }
    }

    /// Checks sizes, the order range and the edge-max rule.
    pub fn validate(&self, mesh: &Mesh) -> Result<(), FeError> {
        if self.mass.len() != mesh.n_elements() || self.edge.len() != mesh.n_edges() {
            return Err(FeError::InvalidOrders(format!(
                "sized for {} elements / {} edges, mesh has {} / {}",
                self.mass.len(),
                self.edge.len(),
                mesh.n_elements(),
                mesh.n_edges()
            )));
        }
        if let Some((k, &o)) = self.mass.iter().enumerate().find(|(_, &o)| o > ORDER_MAX) {
            return Err(FeError::InvalidOrders(format!(
                "element {k} has order {o} above {ORDER_MAX}"
            )));
        }
        for e in 0..mesh.n_edges() {
            let (a, b) = mesh.edge_elements(e);
            let want = b.map_or(self.mass[a] + 1, |b| (self.mass[a].max(self.mass[b])) + 1);
            if self.edge[e] != want {
                return Err(FeError::InvalidOrders(format!(
                    "edge {e} has order {}, adjacent maximum is {want}",
                    self.edge[e]
                )));
            }
        }
        Ok(())
    }
}

/// Global numbering of flux and mass dofs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    edge_offset: Vec<usize>,
    edge_count: Vec<usize>,
    interior_offset: Vec<usize>,
    interior_count: Vec<usize>,
    mass_offset: Vec<usize>,
    mass_count: Vec<usize>,
    n_flux: usize,
    n_mass: usize,
}

pub fn build_dof_map(mesh: &Mesh, orders: &OrderMap) -> Result<DofMap, FeError> {
    orders.validate(mesh)?;
    let mut next = 0;
    let mut edge_offset = Vec::with_capacity(mesh.n_edges());
    let mut edge_count = Vec::with_capacity(mesh.n_edges());
    for e in 0..mesh.n_edges() {
        let c = orders.edge_order(e) + 1;
        edge_offset.push(next);
        edge_count.push(c);
        next += c;
    }
    let mut interior_offset = Vec::with_capacity(mesh.n_elements());
    let mut interior_count = Vec::with_capacity(mesh.n_elements());
    for k in 0..mesh.n_elements() {
        let c = n_interior(orders.flux_order(k));
        interior_offset.push(next);
        interior_count.push(c);
        next += c;
    }
    let n_flux = next;
    let mut next = 0;
    let mut mass_offset = Vec::with_capacity(mesh.n_elements());
    let mut mass_count = Vec::with_capacity(mesh.n_elements());
    for k in 0..mesh.n_elements() {
        let c = dim_p(orders.mass_order(k));
        mass_offset.push(next);
        mass_count.push(c);
        next += c;
    }
    Ok(DofMap {
        edge_offset,
        edge_count,
        interior_offset,
        interior_count,
        mass_offset,
        mass_count,
        n_flux,
        n_mass: next,
    })
}

impl DofMap {
    pub fn n_flux(&self) -> usize {
        self.n_flux
    }

    pub fn n_mass(&self) -> usize {
        self.n_mass
    }

    pub fn n_elements(&self) -> usize {
        self.mass_offset.len()
    }

    pub fn edge_dofs(&self, e: usize) -> std::ops::Range<usize> {
        self.edge_offset[e]..self.edge_offset[e] + self.edge_count[e]
    }

    pub fn interior_dofs(&self, k: usize) -> std::ops::Range<usize> {
        self.interior_offset[k]..self.interior_offset[k] + self.interior_count[k]
    }

    pub fn mass_dofs(&self, k: usize) -> std::ops::Range<usize> {
        self.mass_offset[k]..self.mass_offset[k] + self.mass_count[k]
    }

    /// Global flux dofs of an element in local basis order.
    pub fn element_flux_dofs(&self, mesh: &Mesh, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for e in mesh.element_edges(k) {
            out.extend(self.edge_dofs(e));
        }
        out.extend(self.interior_dofs(k));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, parse_native, BBox, Diagonal};

    #[test]
    fn single_element_lowest_order() {
        let m = parse_native("rdmix-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 1\n").unwrap();
        let d = build_dof_map(&m, &OrderMap::uniform(&m, 0)).unwrap();
        assert_eq!((d.n_mass(), d.n_flux()), (1, 6));
    }

    #[test]
    fn two_element_square() {
        let m = generate_structured(1, 1, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Right).unwrap();
        let d = build_dof_map(&m, &OrderMap::uniform(&m, 1)).unwrap();
        assert_eq!(d.n_mass(), 6);
        assert_eq!(d.n_flux(), 21);
        for k in 0..2 {
            let l = OrderMap::uniform(&m, 1).layout(&m, k);
            assert_eq!(d.element_flux_dofs(&m, k).len(), l.n_dofs());
        }
    }

    #[test]
    fn raising_one_element_is_local() {
        let m = generate_structured(3, 3, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Left).unwrap();
        let base = OrderMap::uniform(&m, 2);
        let mut raised = base.clone();
        raised.set_mass_order(4, 3);
        raised.sync_edges(&m);
        let touched = m.element_edges(4);
        for e in 0..m.n_edges() {
            let changed = base.edge_order(e) != raised.edge_order(e);
            assert_eq!(changed, touched.contains(&e));
        }
        let a = build_dof_map(&m, &base).unwrap();
        let b = build_dof_map(&m, &raised).unwrap();
        for k in 0..m.n_elements() {
            assert_eq!(a.mass_dofs(k).len() == b.mass_dofs(k).len(), k != 4);
            assert_eq!(a.interior_dofs(k).len() == b.interior_dofs(k).len(), k != 4);
        }
        assert_eq!(b.n_flux() - a.n_flux(), 3 + (16 - 1) - (9 - 1));
    }

    #[test]
    fn invalid_edge_order_is_rejected() {
        let m = generate_structured(1, 1, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Right).unwrap();
        let mut o = OrderMap::uniform(&m, 1);
        o.set_mass_order(0, 2);
        assert!(matches!(build_dof_map(&m, &o), Err(FeError::InvalidOrders(_))));
    }
}
