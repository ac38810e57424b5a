//! Hierarchical H(div)-conforming vector basis on triangles.
//!
//! Local functions of an element are ordered edge by edge (local edges 0, 1,
//! 2, each by increasing level) followed by the interior functions by
//! increasing level.
//!
//! Edge `e = (a, b)`, oriented from its lower to its higher global vertex:
//!
//! * level 0: `lam_a curl lam_b - lam_b curl lam_a`, constant normal trace;
//! * level `j >= 1`: `curl L_{j+1}(lam_b - lam_a, lam_a + lam_b)` with the scaled
//!   integrated Legendre polynomial `L_{j+1}`; its normal trace on `e` is a
//!   degree-`j` Legendre polynomial and it is divergence free.
//!
//! Both vanish in normal trace on the other two edges. Because the edge
//! direction is the global one, the functions seen from the two adjacent
//! elements have identical normal traces and no sign flip is needed during
//! assembly.
//!
//! Interior functions of level `d = 2..=p` (zero normal trace everywhere):
//! `lam_a lam_b P_{d-2}(lam_b - lam_a, lam_a + lam_b) t_e` for each edge, and
//! `lam_0 lam_1 lam_2 psi e_x`, `... e_y` for the Dubiner functions `psi` of
//! degree exactly `d - 3`. Together with the edge functions of levels `0..=p`
//! they span `[P_p]^2`.

use super::poly::{dim_p, dubiner, scaled_integrated_legendre, scaled_legendre, Jet};
use super::{ElementGeometry, FeError, ORDER_MAX};

/// Reference vertex coordinates.
const VERTS: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Orders and orientation data of the flux space on one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FluxLayout {
    /// Order of each local edge (number of edge functions is order + 1).
    pub edge_orders: [usize; 3],
    /// Interior flux order `p`.
    pub interior: usize,
    /// Orientation signs of the local edges.
    pub signs: [i8; 3],
}

impl FluxLayout {
    pub fn uniform(p: usize, signs: [i8; 3]) -> Self {
        Self {
            edge_orders: [p; 3],
            interior: p,
            signs,
        }
    }

    pub fn n_edge(&self, i: usize) -> usize {
        self.edge_orders[i] + 1
    }

    pub fn n_interior(&self) -> usize {
        n_interior(self.interior)
    }

    pub fn n_dofs(&self) -> usize {
        (0..3).map(|i| self.n_edge(i)).sum::<usize>() + self.n_interior()
    }

    /// Local index of the first function of edge `i`.
    pub fn edge_offset(&self, i: usize) -> usize {
        (0..i).map(|j| self.n_edge(j)).sum()
    }

    pub fn interior_offset(&self) -> usize {
        self.edge_offset(3)
    }

    pub fn max_order(&self) -> usize {
        self.edge_orders.iter().copied().max().unwrap_or(0).max(self.interior)
    }

    pub fn validate(&self) -> Result<(), FeError> {
        let max = ORDER_MAX + 1;
        if self.interior == 0 || self.interior > max {
            return Err(FeError::UnsupportedOrder(self.interior));
        }
        for &q in &self.edge_orders {
            if q == 0 || q > max {
                return Err(FeError::UnsupportedOrder(q));
            }
        }
        Ok(())
    }
}

/// Number of interior functions for interior order `p`.
pub const fn n_interior(p: usize) -> usize {
    if p == 0 {
        0
    } else {
        p * p - 1
    }
}

/// Number of interior functions introduced at level `d`.
pub const fn interior_level_size(d: usize) -> usize {
    if d < 2 {
        0
    } else {
        2 * d - 1
    }
}

#[inline]
fn curl(j: Jet) -> [f64; 2] {
    [j.d[1], -j.d[0]]
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Reference values and reference divergences of all local functions.
pub fn hdiv_reference(
    layout: &FluxLayout,
    xi: [f64; 2],
    values: &mut Vec<[f64; 2]>,
    divs: &mut Vec<f64>,
) {
    values.clear();
    divs.clear();
    let lam = Jet::barycentric(xi);

    for i in 0..3 {
        let (mut a, mut b) = ((i + 1) % 3, (i + 2) % 3);
        if layout.signs[i] < 0 {
            std::mem::swap(&mut a, &mut b);
        }
        let (la, lb) = (lam[a], lam[b]);
        let (ca, cb) = (curl(la), curl(lb));
        values.push([la.v * cb[0] - lb.v * ca[0], la.v * cb[1] - lb.v * ca[1]]);
        divs.push(dot(la.d, cb) - dot(lb.d, ca));
        let q = layout.edge_orders[i];
        for l in scaled_integrated_legendre(lb - la, la + lb, q + 1) {
            values.push(curl(l));
            divs.push(0.0);
        }
    }

    let p = layout.interior;
    if p < 2 {
        return;
    }
    let bubble = lam[0] * lam[1] * lam[2];
    let psi = if p >= 3 { dubiner(xi, p - 3) } else { Vec::new() };
    let edge_legendre: Vec<(Vec<Jet>, Jet, [f64; 2])> = (0..3)
        .map(|i| {
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let (la, lb) = (lam[a], lam[b]);
            let t = [VERTS[b][0] - VERTS[a][0], VERTS[b][1] - VERTS[a][1]];
            (scaled_legendre(lb - la, la + lb, p - 2), la * lb, t)
        })
        .collect();
    for d in 2..=p {
        for (leg, lab, t) in &edge_legendre {
            let s = *lab * leg[d - 2];
            values.push([s.v * t[0], s.v * t[1]]);
            divs.push(dot(s.d, *t));
        }
        if d >= 3 {
            for q in psi.iter().take(dim_p(d - 3)).skip(if d == 3 { 0 } else { dim_p(d - 4) }) {
                let s = bubble * *q;
                values.push([s.v, 0.0]);
                divs.push(s.d[0]);
                values.push([0.0, s.v]);
                divs.push(s.d[1]);
            }
        }
    }
    debug_assert_eq!(values.len(), layout.n_dofs());
}

/// Physical basis data at one point of an element.
#[derive(Debug, Clone, Default)]
pub struct BasisEval {
    pub values: Vec<[f64; 2]>,
    pub divs: Vec<f64>,
    /// Piola factors: `J` and `det J`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

/// Piola-mapped flux basis at reference point `xi` of an element.
pub fn hdiv_basis(
    layout: &FluxLayout,
    xi: [f64; 2],
    geom: &ElementGeometry,
) -> Result<BasisEval, FeError> {
    layout.validate()?;
    let mut values = Vec::new();
    let mut divs = Vec::new();
    hdiv_reference(layout, xi, &mut values, &mut divs);
    for v in values.iter_mut() {
        *v = geom.piola(*v);
    }
    for d in divs.iter_mut() {
        *d /= geom.det;
    }
    Ok(BasisEval {
        values,
        divs,
        jac: geom.jac,
        det: geom.det,
    })
}
