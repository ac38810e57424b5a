//! Residual error estimation and p-adaptation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssemblyError, ElementContext};
use crate::fespace::quadrature::MAX_DEGREE;
use crate::fespace::{
    edge_quadrature_degree, quadrature_rule, DofMap, Domain, FeError, OrderMap, ORDER_MAX,
};
use crate::imex::Simulation;
use crate::mesh::Mesh;
use crate::par::map_range;

#[derive(Debug, Error, Clone)]
pub enum AdaptError {
    #[error("invalid adaptation parameters: {0}")]
    Params(String),
    #[error("{what} has {got} entries for {expected}")]
    Size { what: &'static str, got: usize, expected: usize },
    #[error("edge {0} is on the boundary")]
    BoundaryEdge(usize),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptParams {
    pub theta_min: f64,
    pub theta_max: f64,
    /// Bounds on the mass order `k`.
    pub order_min: usize,
    pub order_max: usize,
    /// Steps between adaptations.
    pub cadence: usize,
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self {
            theta_min: 0.02,
            theta_max: 0.8,
            order_min: 1,
            order_max: 6,
            cadence: 5,
        }
    }
}

impl AdaptParams {
    pub fn validate(&self) -> Result<(), AdaptError> {
        let t_ok = (0.0..=1.0).contains(&self.theta_min)
            && (0.0..=1.0).contains(&self.theta_max)
            && self.theta_min < self.theta_max;
        if !t_ok {
            return Err(AdaptError::Params(format!(
                "need 0 <= theta_min < theta_max <= 1, got {} / {}",
                self.theta_min, self.theta_max
            )));
        }
        if self.order_min > self.order_max || self.order_max > ORDER_MAX {
            return Err(AdaptError::Params(format!(
                "order bounds {}..={} outside 0..={ORDER_MAX}",
                self.order_min, self.order_max
            )));
        }
        if self.cadence == 0 {
            return Err(AdaptError::Params("cadence must be positive".into()));
        }
        Ok(())
    }
}

/// Element residuals, edge jumps and their aggregates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorField {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// Per edge; zero on the boundary.
    pub jumps: Vec<f64>,
    pub eta_k: Vec<f64>,
    pub eta_total: f64,
    pub eta_max: f64,
}

/// Combines components into per-element and global indicators.
pub fn aggregate(mesh: &Mesh, r1: Vec<f64>, r2: Vec<f64>, jumps: Vec<f64>) -> ErrorField {
    let eta_k: Vec<f64> = (0..mesh.n_elements())
        .map(|k| {
            let j: f64 = mesh.element_edges(k).iter().map(|&e| jumps[e] * jumps[e]).sum();
            (r1[k] * r1[k] + r2[k] * r2[k] + j).sqrt()
        })
        .collect();
    let total = r1.iter().chain(&r2).chain(&jumps).map(|x| x * x).sum::<f64>().sqrt();
    let eta_max = eta_k.iter().copied().fold(0.0, f64::max);
    ErrorField {
        r1,
        r2,
        jumps,
        eta_k,
        eta_total: total,
        eta_max,
    }
}

/// Element-local views of the last step's fields for one species.
pub struct ResidualData<'a> {
    pub h: &'a [f64],
    pub m: &'a [f64],
    pub sigma: f64,
    pub g_mass: &'a [f64],
    pub div_terms: Vec<(f64, &'a [f64])>,
}

/// `(||h + D grad m||_K, ||sigma m + div h - g||_K)`.
pub fn element_residuals(
    mesh: &Mesh,
    orders: &OrderMap,
    dofs: &DofMap,
    d: [[f64; 2]; 2],
    k: usize,
    data: &ResidualData<'_>,
) -> Result<(f64, f64), FeError> {
    let ctx = ElementContext::new(mesh, orders, k)?;
    let fl = dofs.element_flux_dofs(mesh, k);
    let ml = dofs.mass_dofs(k);
    let mut vals = Vec::new();
    let mut divs = Vec::new();
    let (mut s1, mut s2) = (0.0, 0.0);
    for (xi, w) in ctx.rule.points.iter().zip(&ctx.rule.weights) {
        ctx.flux_basis(*xi, &mut vals, &mut divs);
        let mut h = [0.0; 2];
        let mut div = 0.0;
        let mut div_old = 0.0;
        for (i, &g) in fl.iter().enumerate() {
            h[0] += data.h[g] * vals[i][0];
            h[1] += data.h[g] * vals[i][1];
            div += data.h[g] * divs[i];
            for (wj, hj) in &data.div_terms {
                div_old += wj * hj[g] * divs[i];
            }
        }
        let m = ctx.mass_value(&data.m[ml.clone()], *xi);
        let gm = ctx.mass_value(&data.g_mass[ml.clone()], *xi);
        let grad = ctx.mass_grad(&data.m[ml.clone()], *xi);
        let dg = [d[0][0] * grad[0] + d[0][1] * grad[1], d[1][0] * grad[0] + d[1][1] * grad[1]];
        let e1 = [h[0] + dg[0], h[1] + dg[1]];
        let e2 = data.sigma * m + div - (gm - div_old);
        let wd = w * ctx.geom.det;
        s1 += wd * (e1[0] * e1[0] + e1[1] * e1[1]);
        s2 += wd * e2 * e2;
    }
    Ok((s1.sqrt(), s2.sqrt()))
}

/// `|e|^{-1/2} ||m+ - m-||_e` on an interior edge.
pub fn jump_error(mesh: &Mesh, orders: &OrderMap, dofs: &DofMap, m: &[f64], edge: usize) -> Result<f64, AdaptError> {
    let (k1, k2) = match mesh.edge_elements(edge) {
        (a, Some(b)) => (a, b),
        _ => return Err(AdaptError::BoundaryEdge(edge)),
    };
    let [a, b] = mesh.edge(edge);
    let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
    let len = mesh.edge_length(edge);
    let deg = edge_quadrature_degree(orders.mass_order(k1).max(orders.mass_order(k2)));
    let rule = quadrature_rule(Domain::Segment, deg)?;
    let c1 = ElementContext::new(mesh, orders, k1)?;
    let c2 = ElementContext::new(mesh, orders, k2)?;
    let (m1, m2) = (&m[dofs.mass_dofs(k1)], &m[dofs.mass_dofs(k2)]);
    let mut s = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let x = [pa[0] + p[0] * (pb[0] - pa[0]), pa[1] + p[0] * (pb[1] - pa[1])];
        let d = c1.mass_value(m1, mesh.to_reference(k1, x)) - c2.mass_value(m2, mesh.to_reference(k2, x));
        s += w * len * d * d;
    }
    Ok((s / len).sqrt())
}

/// Estimator for the last step of a simulation, species combined in
/// quadrature. Without a completed step, the projection residual of the
/// initial condition is used.
pub fn estimate(sim: &Simulation<'_>) -> Result<ErrorField, AdaptError> {
    let Some(rhs) = sim.last_rhs() else {
        return initial_estimate(sim);
    };
    let problem = sim.problem();
    let mesh = &problem.mesh;
    let disc = sim.discretization();
    let cur = sim.current();
    let ns = cur.m.len();
    let exec = sim.options().exec;
    let res = map_range(exec, mesh.n_elements(), |k| -> Result<(f64, f64), AdaptError> {
        let d = problem.diffusivity.tensor(mesh.region(k))?;
        let (mut a, mut b) = (0.0, 0.0);
        for s in 0..ns {
            let data = ResidualData {
                h: &cur.h[s],
                m: &cur.m[s],
                sigma: rhs.sigma,
                g_mass: &rhs.g_mass[s],
                div_terms: rhs.div_terms.iter().map(|(w, h)| (*w, h[s].as_slice())).collect(),
            };
            let (x, y) = element_residuals(mesh, &disc.orders, &disc.dofs, d, k, &data)?;
            a += x * x;
            b += y * y;
        }
        Ok((a.sqrt(), b.sqrt()))
    });
    let (r1, r2): (Vec<f64>, Vec<f64>) = res.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().unzip();
    let jumps = all_jumps(sim, &cur.m)?;
    Ok(aggregate(mesh, r1, r2, jumps))
}

fn all_jumps(sim: &Simulation<'_>, m: &[Vec<f64>]) -> Result<Vec<f64>, AdaptError> {
    let mesh = &sim.problem().mesh;
    let disc = sim.discretization();
    map_range(sim.options().exec, mesh.n_edges(), |e| -> Result<f64, AdaptError> {
        if mesh.is_boundary_edge(e) {
            return Ok(0.0);
        }
        let mut s = 0.0;
        for ms in m {
            let j = jump_error(mesh, &disc.orders, &disc.dofs, ms, e)?;
            s += j * j;
        }
        Ok(s.sqrt())
    })
    .into_iter()
    .collect()
}

/// `||m0 - P m0||_K` in `r2`, jumps of the projection, `r1 = 0`.
pub fn initial_estimate(sim: &Simulation<'_>) -> Result<ErrorField, AdaptError> {
    let problem = sim.problem();
    let mesh = &problem.mesh;
    let disc = sim.discretization();
    let cur = sim.current();
    let init = &sim.initial_condition().species;
    let r2 = map_range(sim.options().exec, mesh.n_elements(), |k| -> Result<f64, AdaptError> {
        let ctx = ElementContext::new(mesh, &disc.orders, k)?;
        let ctx = ctx.clone().with_degree((ctx.degree + 4).min(MAX_DEGREE))?;
        let ml = disc.dofs.mass_dofs(k);
        let mut s = 0.0;
        for (xi, w) in ctx.rule.points.iter().zip(&ctx.rule.weights) {
            let x = ctx.geom.to_physical(*xi);
            for (sp, m) in cur.m.iter().enumerate() {
                let d = init(sp, k, x) - ctx.mass_value(&m[ml.clone()], *xi);
                s += w * ctx.geom.det * d * d;
            }
        }
        Ok(s.sqrt())
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let jumps = all_jumps(sim, &cur.m)?;
    Ok(aggregate(mesh, vec![0.0; mesh.n_elements()], r2, jumps))
}

/// Three-stage order update: mark by relative thresholds, smooth
/// neighbour gaps to at most one, then set edge orders.
pub fn adapt_orders(errors: &ErrorField, params: &AdaptParams, orders: &OrderMap, mesh: &Mesh) -> Result<OrderMap, AdaptError> {
    params.validate()?;
    let n = mesh.n_elements();
    if errors.eta_k.len() != n {
        return Err(AdaptError::Size {
            what: "error field",
            got: errors.eta_k.len(),
            expected: n,
        });
    }
    let mut k: Vec<usize> = orders.mass_orders().to_vec();
    if errors.eta_max > 0.0 {
        for (o, &eta) in k.iter_mut().zip(&errors.eta_k) {
            if eta >= params.theta_max * errors.eta_max {
                if *o < params.order_max {
                    *o += 1;
                }
            } else if eta <= params.theta_min * errors.eta_max && *o > params.order_min {
                *o -= 1;
            }
        }
    }
    smooth_orders(mesh, &mut k);
    Ok(OrderMap::from_element_orders(mesh, k))
}

/// Raises the smaller order of any neighbour pair differing by more than
/// one to the larger minus one, until no such pair remains.
pub fn smooth_orders(mesh: &Mesh, k: &mut [usize]) {
    let pairs: Vec<(usize, usize)> = mesh
        .interior_edges()
        .filter_map(|e| match mesh.edge_elements(e) {
            (a, Some(b)) => Some((a, b)),
            _ => None,
        })
        .collect();
    loop {
        let mut changed = false;
        for &(a, b) in &pairs {
            let (lo, hi) = if k[a] < k[b] { (a, b) } else { (b, a) };
            if k[hi] > k[lo] + 1 {
                k[lo] = k[hi] - 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Hierarchical transfer of a mass vector between dof maps.
pub fn transfer_mass(mesh: &Mesh, from: &DofMap, to: &DofMap, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; to.n_mass()];
    for k in 0..mesh.n_elements() {
        let (a, b) = (from.mass_dofs(k), to.mass_dofs(k));
        let n = a.len().min(b.len());
        out[b.start..b.start + n].copy_from_slice(&v[a.start..a.start + n]);
    }
    out
}

/// Hierarchical transfer of a flux vector between dof maps.
pub fn transfer_flux(mesh: &Mesh, from: &DofMap, to: &DofMap, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; to.n_flux()];
    for e in 0..mesh.n_edges() {
        let (a, b) = (from.edge_dofs(e), to.edge_dofs(e));
        let n = a.len().min(b.len());
        out[b.start..b.start + n].copy_from_slice(&v[a.start..a.start + n]);
    }
    for k in 0..mesh.n_elements() {
        let (a, b) = (from.interior_dofs(k), to.interior_dofs(k));
        let n = a.len().min(b.len());
        out[b.start..b.start + n].copy_from_slice(&v[a.start..a.start + n]);
    }
    out
}

/// Counts of elements per mass order.
pub fn order_histogram(orders: &OrderMap) -> Vec<usize> {
    let mut h = vec![0; ORDER_MAX + 1];
    for &k in orders.mass_orders() {
        h[k] += 1;
    }
    h
}

/// Checks the neighbour-gap and edge-max invariants.
pub fn check_order_invariants(mesh: &Mesh, orders: &OrderMap) -> Result<(), String> {
    for e in 0..mesh.n_edges() {
        let (a, b) = mesh.edge_elements(e);
        let want = match b {
            Some(b) => {
                let (ka, kb) = (orders.mass_order(a), orders.mass_order(b));
                if ka.abs_diff(kb) > 1 {
                    return Err(format!("elements {a} and {b} have orders {ka} and {kb}"));
                }
                orders.flux_order(a).max(orders.flux_order(b))
            }
            None => orders.flux_order(a),
        };
        if orders.edge_order(e) != want {
            return Err(format!("edge {e} has order {} instead of {want}", orders.edge_order(e)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::build_dof_map;
    use crate::mesh::{generate_structured, BBox, Diagonal};
    use crate::fespace::l2_basis;
    use crate::problem::project_l2;
    use proptest::prelude::*;

    fn reference_value(order: usize, xi: [f64; 2], c: &[f64]) -> f64 {
        l2_basis(order, xi).iter().zip(c).map(|(a, b)| a * b).sum()
    }

    fn strip(n: usize) -> Mesh {
        // n x 1 cells with Right diagonals: element 2i and 2i+1 share the
        // diagonal, element 2i+1 and 2i+2 share a vertical edge
        generate_structured(n, 1, BBox::new(0.0, 0.0, n as f64, 1.0), Diagonal::Right).unwrap()
    }

    fn field(eta: &[f64]) -> ErrorField {
        ErrorField {
            eta_k: eta.to_vec(),
            eta_max: eta.iter().copied().fold(0.0, f64::max),
            ..Default::default()
        }
    }

    #[test]
    fn aggregate_pythagorean() {
        let m = generate_structured(1, 1, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Right).unwrap();
        let f = aggregate(&m, vec![3.0, 0.0], vec![4.0, 0.0], vec![0.0; m.n_edges()]);
        assert_eq!(f.eta_k[0], 5.0);
        assert_eq!(f.eta_total, 5.0);
        assert_eq!(f.eta_max, 5.0);
        let z = aggregate(&m, vec![0.0; 2], vec![0.0; 2], vec![0.0; m.n_edges()]);
        assert_eq!(z.eta_total, 0.0);
    }

    proptest! {
        #[test]
        fn aggregate_identities(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = generate_structured(3, 2, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Crossed).unwrap();
            let r1: Vec<f64> = (0..m.n_elements()).map(|_| rng.random()).collect();
            let r2: Vec<f64> = (0..m.n_elements()).map(|_| rng.random()).collect();
            let j: Vec<f64> = (0..m.n_edges()).map(|e| if m.is_boundary_edge(e) { 0.0 } else { rng.random() }).collect();
            let f = aggregate(&m, r1.clone(), r2.clone(), j.clone());
            let mut direct = 0.0;
            for k in 0..m.n_elements() {
                direct += r1[k] * r1[k] + r2[k] * r2[k];
            }
            for e in m.interior_edges() {
                direct += j[e] * j[e];
            }
            prop_assert!((f.eta_total - direct.sqrt()).abs() < 1e-12);
            for k in 0..m.n_elements() {
                let jk: f64 = m.element_edges(k).iter().map(|&e| j[e] * j[e]).sum();
                prop_assert!((f.eta_k[k].powi(2) - (r1[k].powi(2) + r2[k].powi(2) + jk)).abs() < 1e-12);
            }
        }

        #[test]
        fn marking_is_scale_invariant(eta in proptest::collection::vec(0.0f64..1.0, 6), scale in 0.1f64..100.0) {
            let m = strip(3);
            let o = OrderMap::uniform(&m, 3);
            let p = AdaptParams { theta_min: 0.2, theta_max: 0.7, ..Default::default() };
            let a = adapt_orders(&field(&eta), &p, &o, &m).unwrap();
            let scaled: Vec<f64> = eta.iter().map(|x| x * scale).collect();
            let b = adapt_orders(&field(&scaled), &p, &o, &m).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn adapted_orders_satisfy_invariants(eta in proptest::collection::vec(0.0f64..1.0, 12), k0 in proptest::collection::vec(1usize..6, 12)) {
            let m = generate_structured(3, 2, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Left).unwrap();
            let mut start = k0.clone();
            smooth_orders(&m, &mut start);
            let o = OrderMap::from_element_orders(&m, start);
            let p = AdaptParams { order_max: 6, ..Default::default() };
            let a = adapt_orders(&field(&eta), &p, &o, &m).unwrap();
            prop_assert!(check_order_invariants(&m, &a).is_ok());
            prop_assert!(a.validate(&m).is_ok());
        }
    }

    #[test]
    fn stage_one_marks_by_thresholds() {
        // three elements in a chain
        let m = generate_structured(3, 1, BBox::new(0.0, 0.0, 3.0, 1.0), Diagonal::Right).unwrap();
        let n = m.n_elements();
        let mut eta = vec![0.5; n];
        eta[0] = 1.0;
        eta[2] = 0.01;
        let o = OrderMap::uniform(&m, 2);
        let p = AdaptParams {
            theta_min: 0.02,
            theta_max: 0.8,
            ..Default::default()
        };
        let a = adapt_orders(&field(&eta), &p, &o, &m).unwrap();
        assert_eq!(a.mass_order(0), 3);
        assert_eq!(a.mass_order(1), 2);
        assert_eq!(a.mass_order(2), 1);
    }

    #[test]
    fn zero_field_leaves_orders() {
        let m = strip(2);
        let o = OrderMap::uniform(&m, 2);
        let a = adapt_orders(&field(&[0.0; 4]), &AdaptParams::default(), &o, &m).unwrap();
        assert_eq!(a, o);
    }

    #[test]
    fn smoothing_raises_smaller_neighbour() {
        let m = strip(1);
        let mut k = vec![1, 4];
        smooth_orders(&m, &mut k);
        assert_eq!(k, vec![3, 4]);
        let mut chain = vec![1, 1, 1, 1, 1, 6];
        let m3 = strip(3);
        smooth_orders(&m3, &mut chain);
        let o = OrderMap::from_element_orders(&m3, chain.clone());
        assert!(check_order_invariants(&m3, &o).is_ok(), "{chain:?}");
        assert_eq!(chain[5], 6);
    }

    #[test]
    fn edge_order_is_neighbour_max() {
        let m = strip(1);
        let o = OrderMap::from_element_orders(&m, vec![2, 4]);
        let shared = m.interior_edges().next().unwrap();
        assert_eq!(o.edge_order(shared), 5);
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = AdaptParams {
            theta_min: 0.9,
            theta_max: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn transfer_round_trip_and_identity() {
        let m = strip(2);
        let o1 = OrderMap::from_element_orders(&m, vec![2, 2, 3, 2]);
        let o2 = OrderMap::from_element_orders(&m, vec![2, 3, 3, 2]);
        let (d1, d2) = (build_dof_map(&m, &o1).unwrap(), build_dof_map(&m, &o2).unwrap());
        let mv: Vec<f64> = (0..d1.n_mass()).map(|i| i as f64 + 0.5).collect();
        let hv: Vec<f64> = (0..d1.n_flux()).map(|i| (i as f64).sin()).collect();
        assert_eq!(transfer_mass(&m, &d1, &d1, &mv), mv);
        assert_eq!(transfer_flux(&m, &d1, &d1, &hv), hv);
        let up = transfer_mass(&m, &d1, &d2, &mv);
        assert_eq!(transfer_mass(&m, &d2, &d1, &up), mv);
        let hup = transfer_flux(&m, &d1, &d2, &hv);
        assert_eq!(transfer_flux(&m, &d2, &d1, &hup), hv);
    }

    #[test]
    fn transferred_polynomial_evaluates_identically() {
        use rand::{Rng, SeedableRng};
        let m = strip(1);
        let o1 = OrderMap::uniform(&m, 2);
        let o2 = OrderMap::uniform(&m, 3);
        let (d1, d2) = (build_dof_map(&m, &o1).unwrap(), build_dof_map(&m, &o2).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..d1.n_mass()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = transfer_mass(&m, &d1, &d2, &v);
        for _ in 0..10 {
            let a: f64 = rng.random_range(0.0..1.0);
            let b: f64 = rng.random_range(0.0..1.0 - a);
            for k in 0..2 {
                let x = reference_value(2, [a, b], &v[d1.mass_dofs(k)]);
                let y = reference_value(3, [a, b], &w[d2.mass_dofs(k)]);
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jump_of_constant_step() {
        let m = strip(1);
        let o = OrderMap::uniform(&m, 0);
        let d = build_dof_map(&m, &o).unwrap();
        let e = m.interior_edges().next().unwrap();
        let cont = jump_error(&m, &o, &d, &[0.3, 0.3], e).unwrap();
        assert_eq!(cont, 0.0);
        let j = jump_error(&m, &o, &d, &[1.0, 0.0], e).unwrap();
        // diagonal of the unit cell: |e| = sqrt 2, eta = |e|^{-1/2} |e|^{1/2}
        assert!((j - 1.0).abs() < 1e-14);
        let b = m.boundary_edges().next().unwrap();
        assert!(matches!(jump_error(&m, &o, &d, &[1.0, 0.0], b), Err(AdaptError::BoundaryEdge(x)) if x == b));
    }

    #[test]
    fn residual_of_constant_gradient() {
        // h = 0, grad m = c on the unit square split in two, D = I
        let m = strip(1);
        let o = OrderMap::uniform(&m, 1);
        let d = build_dof_map(&m, &o).unwrap();
        let c = [0.6, -0.8];
        let x0 = [0.0, 0.0];
        let mv = project_l2(&m, &o, &d, |_, x| 1.0 + c[0] * (x[0] - x0[0]) + c[1] * (x[1] - x0[1])).unwrap();
        let h = vec![0.0; d.n_flux()];
        let g = vec![0.0; d.n_mass()];
        let mut total = 0.0;
        for k in 0..2 {
            let data = ResidualData {
                h: &h,
                m: &mv,
                sigma: 0.0,
                g_mass: &g,
                div_terms: vec![],
            };
            let (r1, r2) = element_residuals(&m, &o, &d, [[1.0, 0.0], [0.0, 1.0]], k, &data).unwrap();
            assert!(r2.abs() < 1e-14);
            total += r1 * r1;
        }
        assert!((total.sqrt() - 1.0).abs() < 1e-12);
    }
}
