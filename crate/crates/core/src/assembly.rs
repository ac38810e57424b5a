//! Element and global assembly of the bilinear forms
//!
//! * `a(tau, h) = (tau, D^{-1} h)` into `K`,
//! * `b(tau, m) = (div tau, m)` into `B` with `B_IL = -b(tau_I, v_L)`,
//! * `c(m, v) = (m, v)` into the block-diagonal `M`,
//!
//! plus the boundary load `F`, essential flux values and kinetics loads.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::fespace::hdiv::hdiv_reference;
use crate::fespace::{
    edge_quadrature_degree, element_quadrature_degree, l2_basis, l2_basis_jets, l2_tabulated, quadrature_rule, DofMap, Domain,
    ElementGeometry, FeError, FluxLayout, OrderMap, QuadratureRule,
};
use crate::linalg::{CsrMatrix, LinalgError};
use crate::mesh::{Mesh, Tag};
use crate::par::{map_range, Execution};

#[derive(Debug, Error, Clone)]
pub enum AssemblyError {
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("no diffusivity given for region {0}")]
    UnknownRegion(Tag),
    #[error("diffusivity of region {0} is not symmetric positive definite")]
    NotSpd(Tag),
    #[error("boundary tag {0} is not present in the mesh")]
    MissingBoundaryTag(Tag),
    #[error("boundary edge {edge} with tag {tag} has no boundary condition")]
    UnassignedBoundary { edge: usize, tag: Tag },
    #[error("boundary tag {0} is both natural and essential")]
    ConflictingBoundary(Tag),
}

/// Piecewise-constant SPD diffusivity tensor per region tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffusivity {
    by_region: BTreeMap<Tag, [[f64; 2]; 2]>,
    fallback: Option<[[f64; 2]; 2]>,
}

fn check_spd(tag: Tag, d: [[f64; 2]; 2]) -> Result<(), AssemblyError> {
    let sym = (d[0][1] - d[1][0]).abs() <= 1e-12 * (d[0][0].abs() + d[1][1].abs());
    let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
    if sym && d[0][0] > 0.0 && det > 0.0 && det.is_finite() {
        Ok(())
    } else {
        Err(AssemblyError::NotSpd(tag))
    }
}

impl Diffusivity {
    /// `d I` everywhere.
    pub fn isotropic(d: f64) -> Result<Self, AssemblyError> {
        let t = [[d, 0.0], [0.0, d]];
        check_spd(0, t)?;
        Ok(Self {
            by_region: BTreeMap::new(),
            fallback: Some(t),
        })
    }

    pub fn from_regions(
        by_region: BTreeMap<Tag, [[f64; 2]; 2]>,
        fallback: Option<[[f64; 2]; 2]>,
    ) -> Result<Self, AssemblyError> {
        for (&tag, &t) in &by_region {
            check_spd(tag, t)?;
        }
        if let Some(t) = fallback {
            check_spd(0, t)?;
        }
        Ok(Self { by_region, fallback })
    }

    pub fn isotropic_regions(values: impl IntoIterator<Item = (Tag, f64)>) -> Result<Self, AssemblyError> {
        Self::from_regions(
            values.into_iter().map(|(t, d)| (t, [[d, 0.0], [0.0, d]])).collect(),
            None,
        )
    }

    pub fn tensor(&self, tag: Tag) -> Result<[[f64; 2]; 2], AssemblyError> {
        self.by_region
            .get(&tag)
            .copied()
            .or(self.fallback)
            .ok_or(AssemblyError::UnknownRegion(tag))
    }

    pub fn inverse(&self, tag: Tag) -> Result<[[f64; 2]; 2], AssemblyError> {
        let d = self.tensor(tag)?;
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        Ok([[d[1][1] / det, -d[0][1] / det], [-d[1][0] / det, d[0][0] / det]])
    }
}

#[inline]
fn apply(t: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [t[0][0] * v[0] + t[0][1] * v[1], t[1][0] * v[0] + t[1][1] * v[1]]
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Everything needed to integrate over one element.
#[derive(Debug, Clone)]
pub struct ElementContext {
    pub element: usize,
    pub geom: ElementGeometry,
    pub layout: FluxLayout,
    pub mass_order: usize,
    /// Requested degree of `rule`.
    pub degree: usize,
    pub rule: &'static QuadratureRule,
}

impl ElementContext {
    pub fn new(mesh: &Mesh, orders: &OrderMap, element: usize) -> Result<Self, FeError> {
        let layout = orders.layout(mesh, element);
        layout.validate()?;
        let degree = element_quadrature_degree(layout.max_order());
        let rule = quadrature_rule(Domain::Triangle, degree)?;
        Ok(Self {
            element,
            geom: ElementGeometry::new(mesh, element),
            layout,
            mass_order: orders.mass_order(element),
            degree,
            rule,
        })
    }

    /// Same element with an explicit rule degree.
    pub fn with_degree(mut self, degree: usize) -> Result<Self, FeError> {
        self.rule = quadrature_rule(Domain::Triangle, degree)?;
        self.degree = degree;
        Ok(self)
    }

    /// Physical flux values and divergences at a reference point.
    pub fn flux_basis(&self, xi: [f64; 2], values: &mut Vec<[f64; 2]>, divs: &mut Vec<f64>) {
        hdiv_reference(&self.layout, xi, values, divs);
        for v in values.iter_mut() {
            *v = self.geom.piola(*v);
        }
        let inv = 1.0 / self.geom.det;
        for d in divs.iter_mut() {
            *d *= inv;
        }
    }

    /// Mass basis values at the rule points.
    pub fn mass_table(&self) -> Result<&'static [Vec<f64>], FeError> {
        l2_tabulated(self.mass_order, self.degree)
    }

    pub fn mass_value(&self, coeffs: &[f64], xi: [f64; 2]) -> f64 {
        l2_basis(self.mass_order, xi).iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn mass_grad(&self, coeffs: &[f64], xi: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (j, c) in l2_basis_jets(self.mass_order, xi).iter().zip(coeffs) {
            g[0] += c * j.d[0];
            g[1] += c * j.d[1];
        }
        self.geom.grad(g)
    }

    /// Flux value and divergence from local coefficients.
    pub fn flux_value(&self, coeffs: &[f64], xi: [f64; 2]) -> ([f64; 2], f64) {
        let mut v = Vec::new();
        let mut d = Vec::new();
        self.flux_basis(xi, &mut v, &mut d);
        let mut out = [0.0; 2];
        let mut div = 0.0;
        for ((val, dv), c) in v.iter().zip(&d).zip(coeffs) {
            out[0] += c * val[0];
            out[1] += c * val[1];
            div += c * dv;
        }
        (out, div)
    }
}

/// Dense element matrices and their global dof lists.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    /// `a(tau_i, tau_j)`.
    pub k: DMatrix<f64>,
    /// `-b(tau_i, v_l)`.
    pub b: DMatrix<f64>,
    /// `c(v_k, v_l)`.
    pub m: DMatrix<f64>,
    pub flux_dofs: Vec<usize>,
    pub mass_dofs: Range<usize>,
}

pub fn element_matrices(
    mesh: &Mesh,
    orders: &OrderMap,
    dofs: &DofMap,
    diffusivity: &Diffusivity,
    element: usize,
) -> Result<ElementMatrices, AssemblyError> {
    let ctx = ElementContext::new(mesh, orders, element)?;
    let d_inv = diffusivity.inverse(mesh.region(element))?;
    let nf = ctx.layout.n_dofs();
    let mass_dofs = dofs.mass_dofs(element);
    let nm = mass_dofs.len();
    let mut k = DMatrix::zeros(nf, nf);
    let mut b = DMatrix::zeros(nf, nm);
    let mut m = DMatrix::zeros(nm, nm);
    let mut vals = Vec::with_capacity(nf);
    let mut divs = Vec::with_capacity(nf);
    let mut dv = Vec::with_capacity(nf);
    for (xi, w) in ctx.rule.points.iter().zip(&ctx.rule.weights) {
        let wd = w * ctx.geom.det;
        ctx.flux_basis(*xi, &mut vals, &mut divs);
        let psi = l2_basis(ctx.mass_order, *xi);
        dv.clear();
        dv.extend(vals.iter().map(|v| apply(&d_inv, *v)));
        for i in 0..nf {
            for j in i..nf {
                k[(i, j)] += wd * dot(vals[i], dv[j]);
            }
            for l in 0..nm {
                b[(i, l)] -= wd * divs[i] * psi[l];
            }
        }
        for a in 0..nm {
            for c in a..nm {
                m[(a, c)] += wd * psi[a] * psi[c];
            }
        }
    }
    for i in 0..nf {
        for j in 0..i {
            k[(i, j)] = k[(j, i)];
        }
    }
    for a in 0..nm {
        for c in 0..a {
            m[(a, c)] = m[(c, a)];
        }
    }
    Ok(ElementMatrices {
        k,
        b,
        m,
        flux_dofs: dofs.element_flux_dofs(mesh, element),
        mass_dofs,
    })
}

/// Global `K`, `B`, `M` and the element blocks of `M`.
#[derive(Debug, Clone)]
pub struct GlobalMatrices {
    pub k: CsrMatrix,
    pub b: CsrMatrix,
    pub m: CsrMatrix,
    pub mass_blocks: Vec<Range<usize>>,
}

pub fn assemble_global(
    mesh: &Mesh,
    dofs: &DofMap,
    orders: &OrderMap,
    diffusivity: &Diffusivity,
    exec: Execution,
) -> Result<GlobalMatrices, AssemblyError> {
    let locals = map_range(exec, mesh.n_elements(), |e| {
        element_matrices(mesh, orders, dofs, diffusivity, e)
    });
    let (nh, nm) = (dofs.n_flux(), dofs.n_mass());
    let mut tk = Vec::new();
    let mut tb = Vec::new();
    let mut tm = Vec::new();
    let mut mass_blocks = Vec::with_capacity(mesh.n_elements());
    for el in locals {
        let el = el?;
        for (i, &gi) in el.flux_dofs.iter().enumerate() {
            for (j, &gj) in el.flux_dofs.iter().enumerate() {
                tk.push((gi, gj, el.k[(i, j)]));
            }
            for (l, gl) in el.mass_dofs.clone().enumerate() {
                tb.push((gi, gl, el.b[(i, l)]));
            }
        }
        for (a, ga) in el.mass_dofs.clone().enumerate() {
            for (c, gc) in el.mass_dofs.clone().enumerate() {
                tm.push((ga, gc, el.m[(a, c)]));
            }
        }
        mass_blocks.push(el.mass_dofs);
    }
    Ok(GlobalMatrices {
        k: CsrMatrix::from_triplets(nh, nh, tk),
        b: CsrMatrix::from_triplets(nh, nm, tb),
        m: CsrMatrix::from_triplets(nm, nm, tm),
        mass_blocks,
    })
}

/// Normal traces (along the outward normal) of the functions of local edge
/// `i` at edge quadrature points, with the physical points and `|e| w`.
pub struct EdgeTrace {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// `traces[q][j]` for the `j`-th function of the edge.
    pub traces: Vec<Vec<f64>>,
    /// Local index of the first edge function.
    pub offset: usize,
}

pub fn edge_trace(mesh: &Mesh, orders: &OrderMap, element: usize, local: usize) -> Result<EdgeTrace, FeError> {
    let ctx = ElementContext::new(mesh, orders, element)?;
    let edge = mesh.element_edges(element)[local];
    let len = mesh.edge_length(edge);
    let n = mesh.outward_normal(element, local);
    let q = ctx.layout.edge_orders[local];
    let rule = quadrature_rule(Domain::Segment, edge_quadrature_degree(q))?;
    const V: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let a = V[(local + 1) % 3];
    let b = V[(local + 2) % 3];
    let offset = ctx.layout.edge_offset(local);
    let mut out = EdgeTrace {
        points: Vec::new(),
        weights: Vec::new(),
        traces: Vec::new(),
        offset,
    };
    let mut vals = Vec::new();
    let mut divs = Vec::new();
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let s = p[0];
        let xi = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        ctx.flux_basis(xi, &mut vals, &mut divs);
        out.points.push(ctx.geom.to_physical(xi));
        out.weights.push(w * len);
        out.traces.push((0..=q).map(|j| dot(vals[offset + j], n)).collect());
    }
    Ok(out)
}

/// How a boundary portion is treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    /// Prescribed concentration, entering through `F`.
    Natural,
    /// Prescribed normal flux, constraining flux dofs.
    Essential,
}

/// Classifies every boundary edge from tag sets; `default` covers tags in
/// neither set.
pub fn classify_boundary(
    mesh: &Mesh,
    natural: &[Tag],
    essential: &[Tag],
    default: Option<BoundaryKind>,
) -> Result<Vec<(usize, BoundaryKind)>, AssemblyError> {
    let present = mesh.boundary_tags();
    for t in natural.iter().chain(essential) {
        if !present.contains(t) {
            return Err(AssemblyError::MissingBoundaryTag(*t));
        }
    }
    if let Some(t) = natural.iter().find(|t| essential.contains(t)) {
        return Err(AssemblyError::ConflictingBoundary(*t));
    }
    mesh.boundary_edges()
        .map(|e| {
            let tag = mesh.edge_tag(e).unwrap_or_default();
            let kind = if natural.contains(&tag) {
                Some(BoundaryKind::Natural)
            } else if essential.contains(&tag) {
                Some(BoundaryKind::Essential)
            } else {
                default
            };
            kind.map(|k| (e, k)).ok_or(AssemblyError::UnassignedBoundary { edge: e, tag })
        })
        .collect()
}

/// `F_I = -(tau_I . n, mbar)` over the natural boundary edges.
pub fn assemble_f(
    mesh: &Mesh,
    dofs: &DofMap,
    orders: &OrderMap,
    natural_edges: &[usize],
    mbar: impl Fn(usize, [f64; 2]) -> f64,
) -> Result<Vec<f64>, FeError> {
    let mut f = vec![0.0; dofs.n_flux()];
    for &e in natural_edges {
        let (k, _) = mesh.edge_elements(e);
        let local = mesh.local_edge(k, e).expect("edge belongs to its element");
        let tr = edge_trace(mesh, orders, k, local)?;
        let global = dofs.edge_dofs(e);
        for ((x, w), t) in tr.points.iter().zip(&tr.weights).zip(&tr.traces) {
            let mb = mbar(e, *x);
            for (j, gi) in global.clone().enumerate() {
                f[gi] -= w * t[j] * mb;
            }
        }
    }
    Ok(f)
}

/// Flux dof values on essential edges so that `-h . n` is the edge L2
/// projection of `hbar`. Returns the constraint mask and values.
pub fn essential_flux_values(
    mesh: &Mesh,
    dofs: &DofMap,
    orders: &OrderMap,
    essential_edges: &[usize],
    hbar: impl Fn(usize, [f64; 2]) -> f64,
) -> Result<(Vec<bool>, Vec<f64>), FeError> {
    let mut fixed = vec![false; dofs.n_flux()];
    let mut values = vec![0.0; dofs.n_flux()];
    for &e in essential_edges {
        let (k, _) = mesh.edge_elements(e);
        let local = mesh.local_edge(k, e).expect("edge belongs to its element");
        let tr = edge_trace(mesh, orders, k, local)?;
        let n = dofs.edge_dofs(e).len();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        for ((x, w), t) in tr.points.iter().zip(&tr.weights).zip(&tr.traces) {
            let target = -hbar(e, *x);
            for i in 0..n {
                rhs[i] += w * target * t[i];
                for j in 0..n {
                    gram[(i, j)] += w * t[i] * t[j];
                }
            }
        }
        let c = gram
            .cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or(FeError::InvalidOrders(format!("singular trace Gram matrix on edge {e}")))?;
        for (j, gi) in dofs.edge_dofs(e).enumerate() {
            fixed[gi] = true;
            values[gi] = c[j];
        }
    }
    Ok((fixed, values))
}

/// `ell(v_L) = (f, v_L)` for a pointwise `f(element, x, xi)`.
pub fn load_vector(
    mesh: &Mesh,
    dofs: &DofMap,
    orders: &OrderMap,
    exec: Execution,
    f: impl Fn(usize, [f64; 2], [f64; 2]) -> f64 + Sync + Send,
) -> Result<Vec<f64>, FeError> {
    let parts = map_range(exec, mesh.n_elements(), |e| -> Result<Vec<f64>, FeError> {
        let ctx = ElementContext::new(mesh, orders, e)?;
        let mut out = vec![0.0; dofs.mass_dofs(e).len()];
        for (xi, w) in ctx.rule.points.iter().zip(&ctx.rule.weights) {
            let x = ctx.geom.to_physical(*xi);
            let v = w * ctx.geom.det * f(e, x, *xi);
            for (o, p) in out.iter_mut().zip(l2_basis(ctx.mass_order, *xi)) {
                *o += v * p;
            }
        }
        Ok(out)
    });
    let mut l = vec![0.0; dofs.n_mass()];
    for (e, p) in parts.into_iter().enumerate() {
        l[dofs.mass_dofs(e)].copy_from_slice(&p?);
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::build_dof_map;
    use crate::mesh::{generate_structured, parse_native, BBox, Diagonal};

    fn reference() -> Mesh {
        parse_native("rdmix-mesh 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2 1\n").unwrap()
    }

    #[test]
    fn lowest_order_mass_is_area() {
        let m = generate_structured(2, 1, BBox::new(0.0, 0.0, 2.0, 0.5), Diagonal::Right).unwrap();
        let o = OrderMap::uniform(&m, 0);
        let d = build_dof_map(&m, &o).unwrap();
        let diff = Diffusivity::isotropic(1.0).unwrap();
        for e in 0..m.n_elements() {
            let el = element_matrices(&m, &o, &d, &diff, e).unwrap();
            assert!((el.m[(0, 0)] - m.area(e)).abs() < 1e-15);
        }
    }

    /// K on the reference element with p = 1 equals the exact vector mass
    /// matrix computed from monomial coefficients of the basis.
    #[test]
    fn reference_k_matches_exact_integration() {
        let m = reference();
        let o = OrderMap::uniform(&m, 0);
        let d = build_dof_map(&m, &o).unwrap();
        let diff = Diffusivity::isotropic(1.0).unwrap();
        let el = element_matrices(&m, &o, &d, &diff, 0).unwrap();
        // fit each function to span{1, x, y}^2 by interpolation at 3 points
        let layout = o.layout(&m, 0);
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mut coef = vec![[[0.0; 3]; 2]; layout.n_dofs()];
        let mut vals = Vec::new();
        let mut divs = Vec::new();
        let mut at = Vec::new();
        for p in pts {
            hdiv_reference(&layout, p, &mut vals, &mut divs);
            at.push(vals.clone());
        }
        for f in 0..layout.n_dofs() {
            for c in 0..2 {
                // value = a + b x + c y
                let a = at[0][f][c];
                coef[f][c] = [a, at[1][f][c] - a, at[2][f][c] - a];
            }
        }
        // exact moments on the reference triangle
        let mom = |i: usize, j: usize| -> f64 {
            let tab = [[1.0 / 2.0, 1.0 / 6.0, 1.0 / 12.0], [1.0 / 6.0, 1.0 / 24.0, 0.0], [1.0 / 12.0, 0.0, 0.0]];
            tab[i][j]
        };
        let powers = [(0, 0), (1, 0), (0, 1)];
        for f in 0..layout.n_dofs() {
            for g in 0..layout.n_dofs() {
                let mut exact = 0.0;
                for c in 0..2 {
                    for (a, pa) in powers.iter().enumerate() {
                        for (b, pb) in powers.iter().enumerate() {
                            exact += coef[f][c][a] * coef[g][c][b] * mom(pa.0 + pb.0, pa.1 + pb.1);
                        }
                    }
                }
                // det J = 1 on the reference element, so Piola is the identity
                assert!((el.k[(f, g)] - exact).abs() < 1e-12, "({f},{g})");
            }
        }
    }

    #[test]
    fn doubling_d_halves_k() {
        let m = generate_structured(1, 1, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Right).unwrap();
        let o = OrderMap::uniform(&m, 2);
        let d = build_dof_map(&m, &o).unwrap();
        let k1 = element_matrices(&m, &o, &d, &Diffusivity::isotropic(0.7).unwrap(), 1).unwrap().k;
        let k2 = element_matrices(&m, &o, &d, &Diffusivity::isotropic(1.4).unwrap(), 1).unwrap().k;
        assert!((k1 - k2 * 2.0).amax() < 1e-13);
    }

    #[test]
    fn non_spd_diffusivity_rejected() {
        assert!(matches!(Diffusivity::isotropic(-1.0), Err(AssemblyError::NotSpd(_))));
        let bad = BTreeMap::from([(3, [[1.0, 2.0], [2.0, 1.0]])]);
        assert!(matches!(Diffusivity::from_regions(bad, None), Err(AssemblyError::NotSpd(3))));
    }

    #[test]
    fn global_assembly_matches_dense_oracle_and_policies_agree() {
        let m = generate_structured(1, 1, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Right).unwrap();
        let o = OrderMap::uniform(&m, 1);
        let d = build_dof_map(&m, &o).unwrap();
        let diff = Diffusivity::isotropic(0.3).unwrap();
        let g = assemble_global(&m, &d, &o, &diff, Execution::Serial).unwrap();
        let gp = assemble_global(&m, &d, &o, &diff, Execution::Parallel).unwrap();
        assert_eq!(g.k, gp.k);
        assert_eq!(g.b, gp.b);
        let mut kd = DMatrix::zeros(d.n_flux(), d.n_flux());
        let mut md = DMatrix::zeros(d.n_mass(), d.n_mass());
        for e in 0..2 {
            let el = element_matrices(&m, &o, &d, &diff, e).unwrap();
            for (i, gi) in el.flux_dofs.iter().enumerate() {
                for (j, gj) in el.flux_dofs.iter().enumerate() {
                    kd[(*gi, *gj)] += el.k[(i, j)];
                }
            }
            for (a, ga) in el.mass_dofs.clone().enumerate() {
                for (c, gc) in el.mass_dofs.clone().enumerate() {
                    md[(ga, gc)] += el.m[(a, c)];
                }
            }
        }
        assert!((g.k.to_dense() - kd).amax() < 1e-12);
        assert!((g.m.to_dense() - &md).amax() < 1e-12);
        // the shared edge couples both elements in K but not in M
        let shared = m.interior_edges().next().unwrap();
        let row = d.edge_dofs(shared).start;
        let touching: Vec<usize> = (0..2).filter(|&k| d.element_flux_dofs(&m, k).contains(&row)).collect();
        assert_eq!(touching, vec![0, 1]);
        for a in d.mass_dofs(0) {
            for c in d.mass_dofs(1) {
                assert_eq!(g.m.get(a, c), 0.0);
            }
        }
        assert!(g.k.is_symmetric(1e-14));
    }

    #[test]
    fn f_vanishes_for_zero_data_and_matches_edge_oracle() {
        let m = reference();
        let o = OrderMap::uniform(&m, 0);
        let d = build_dof_map(&m, &o).unwrap();
        let edges: Vec<usize> = m.boundary_edges().collect();
        let f0 = assemble_f(&m, &d, &o, &edges, |_, _| 0.0).unwrap();
        assert!(f0.iter().all(|&x| x == 0.0));
        // mbar = 1 on edge 0 only: lowest function has trace +-1/|e|, so the
        // entry is -(+-1)
        let e0 = m.element_edges(0)[0];
        let f1 = assemble_f(&m, &d, &o, &[e0], |_, _| 1.0).unwrap();
        let first = d.edge_dofs(e0).start;
        let sign = m.orientation_signs(0)[0] as f64;
        assert!((f1[first] + sign).abs() < 1e-14);
        for (i, v) in f1.iter().enumerate() {
            if i != first {
                assert!(v.abs() < 1e-14);
            }
        }
        // linear in time-scaled data
        let ft = assemble_f(&m, &d, &o, &edges, |_, x| 0.5 * (1.0 + x[0])).unwrap();
        let f2t = assemble_f(&m, &d, &o, &edges, |_, x| 1.0 * (1.0 + x[0])).unwrap();
        for (a, b) in ft.iter().zip(&f2t) {
            assert!((2.0 * a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn essential_constant_flux_is_reproduced() {
        let m = generate_structured(2, 2, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Left).unwrap();
        let o = OrderMap::uniform(&m, 0);
        let d = build_dof_map(&m, &o).unwrap();
        let edges: Vec<usize> = m.boundary_edges().collect();
        let (fixed, vals) = essential_flux_values(&m, &d, &o, &edges, |_, _| 0.75).unwrap();
        assert_eq!(fixed.iter().filter(|&&f| f).count(), edges.len() * 2);
        for &e in &edges {
            let (k, _) = m.edge_elements(e);
            let local = m.local_edge(k, e).unwrap();
            let tr = edge_trace(&m, &o, k, local).unwrap();
            for t in &tr.traces {
                let hn: f64 = d.edge_dofs(e).enumerate().map(|(j, g)| vals[g] * t[j]).sum();
                assert!((hn + 0.75).abs() < 1e-12);
            }
        }
        let (_, zero) = essential_flux_values(&m, &d, &o, &edges, |_, _| 0.0).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn boundary_classification() {
        use crate::mesh::side;
        let m = generate_structured(2, 2, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Right).unwrap();
        let c = classify_boundary(&m, &[side::LEFT], &[side::RIGHT], Some(BoundaryKind::Essential)).unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(c.iter().filter(|(_, k)| *k == BoundaryKind::Natural).count(), 2);
        assert!(matches!(
            classify_boundary(&m, &[side::LEFT], &[], None),
            Err(AssemblyError::UnassignedBoundary { .. })
        ));
        assert!(matches!(
            classify_boundary(&m, &[], &[99], None),
            Err(AssemblyError::MissingBoundaryTag(99))
        ));
    }
}
