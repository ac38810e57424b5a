//! Error norms, conservation checks, point probes and front tracking.

use thiserror::Error;

use crate::assembly::ElementContext;
use crate::fespace::quadrature::FINE_RULE;
use crate::fespace::{edge_quadrature_degree, quadrature_rule, DofMap, Domain, FeError, OrderMap};
use crate::imex::Simulation;
use crate::mesh::{Mesh, MeshError};
use crate::models::ManufacturedCase;
use crate::par::{map_range, Execution};

#[derive(Debug, Error)]
pub enum DiagError {
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("level {0} is not attained along any sampling line")]
    LevelNotAttained(f64),
    #[error("no step has been taken yet")]
    NoStep,
}

/// A scalar mass-space field on a mesh.
#[derive(Debug, Clone, Copy)]
pub struct FieldView<'a> {
    pub mesh: &'a Mesh,
    pub orders: &'a OrderMap,
    pub dofs: &'a DofMap,
    pub m: &'a [f64],
}

impl<'a> FieldView<'a> {
    pub fn of(sim: &'a Simulation<'_>, species: usize) -> Self {
        let d = sim.discretization();
        Self {
            mesh: &sim.problem().mesh,
            orders: &d.orders,
            dofs: &d.dofs,
            m: &sim.current().m[species],
        }
    }

    fn value_in(&self, ctx: &ElementContext, x: [f64; 2]) -> f64 {
        let k = ctx.element;
        ctx.mass_value(&self.m[self.dofs.mass_dofs(k)], self.mesh.to_reference(k, x))
    }

    /// Value at a physical point; ties on shared edges go to the lowest
    /// element index.
    pub fn value(&self, x: [f64; 2]) -> Result<f64, DiagError> {
        let k = self.mesh.locate(x)?;
        let ctx = ElementContext::new(self.mesh, self.orders, k)?;
        Ok(self.value_in(&ctx, x))
    }

    /// Value at a physical point evaluated in a given element.
    pub fn value_on(&self, k: usize, x: [f64; 2]) -> Result<f64, DiagError> {
        let ctx = ElementContext::new(self.mesh, self.orders, k)?;
        Ok(self.value_in(&ctx, x))
    }

    /// `int_Omega m`.
    pub fn integral(&self) -> f64 {
        (0..self.mesh.n_elements())
            .map(|k| self.mesh.area(k) * self.m[self.dofs.mass_dofs(k).start])
            .sum()
    }
}

/// L2 errors of the mass, the flux and its divergence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub mass_l2: f64,
    pub flux_l2: f64,
    pub div_l2: f64,
}

impl ErrorNorms {
    /// `||h - h_h||_div + ||m - m_h||`.
    pub fn energy(&self) -> f64 {
        self.flux_l2.hypot(self.div_l2) + self.mass_l2
    }

    /// `(||m - m_h||^2 + ||h - h_h||^2)^{1/2}`.
    pub fn combined(&self) -> f64 {
        self.mass_l2.hypot(self.flux_l2)
    }
}

/// Errors of species 0 against a manufactured solution at time `t`.
pub fn error_norms(
    mesh: &Mesh,
    orders: &OrderMap,
    dofs: &DofMap,
    h: &[f64],
    m: &[f64],
    case: &ManufacturedCase,
    t: f64,
    exec: Execution,
) -> Result<ErrorNorms, DiagError> {
    let parts = map_range(exec, mesh.n_elements(), |k| -> Result<[f64; 3], DiagError> {
        let base = ElementContext::new(mesh, orders, k)?;
        let deg = FINE_RULE;
        let ctx = base.with_degree(deg)?;
        let fl = dofs.element_flux_dofs(mesh, k);
        let local: Vec<f64> = fl.iter().map(|&i| h[i]).collect();
        let ml = &m[dofs.mass_dofs(k)];
        let mut acc = [0.0; 3];
        for (xi, w) in ctx.rule.points.iter().zip(&ctx.rule.weights) {
            let x = ctx.geom.to_physical(*xi);
            let wd = w * ctx.geom.det;
            let (hv, dv) = ctx.flux_value(&local, *xi);
            let he = case.flux(x, t);
            let em = case.m(x, t) - ctx.mass_value(ml, *xi);
            acc[0] += wd * em * em;
            acc[1] += wd * ((he[0] - hv[0]).powi(2) + (he[1] - hv[1]).powi(2));
            acc[2] += wd * (case.div_flux(x, t) - dv).powi(2);
        }
        Ok(acc)
    });
    let mut s = [0.0; 3];
    for p in parts {
        let p = p?;
        for i in 0..3 {
            s[i] += p[i];
        }
    }
    Ok(ErrorNorms {
        mass_l2: s[0].sqrt(),
        flux_l2: s[1].sqrt(),
        div_l2: s[2].sqrt(),
    })
}

/// Errors of the current state of a manufactured-solution run.
pub fn simulation_errors(sim: &Simulation<'_>) -> Option<Result<ErrorNorms, DiagError>> {
    let case = sim.problem().model.exact()?;
    let d = sim.discretization();
    let cur = sim.current();
    Some(error_norms(
        &sim.problem().mesh,
        &d.orders,
        &d.dofs,
        &cur.h[0],
        &cur.m[0],
        case,
        cur.t,
        sim.options().exec,
    ))
}

/// `oint_{dK} h . n` for local flux coefficients.
fn outflow(mesh: &Mesh, ctx: &ElementContext, local: &[f64]) -> Result<f64, FeError> {
    const V: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let k = ctx.element;
    let mut total = 0.0;
    let mut vals = Vec::new();
    let mut divs = Vec::new();
    for i in 0..3 {
        let n = mesh.outward_normal(k, i);
        let len = mesh.edge_length(mesh.element_edges(k)[i]);
        let rule = quadrature_rule(Domain::Segment, edge_quadrature_degree(ctx.layout.max_order()))?;
        let (a, b) = (V[(i + 1) % 3], V[(i + 2) % 3]);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let xi = [a[0] + p[0] * (b[0] - a[0]), a[1] + p[0] * (b[1] - a[1])];
            ctx.flux_basis(xi, &mut vals, &mut divs);
            let hn: f64 = vals
                .iter()
                .zip(local)
                .map(|(v, c)| c * (v[0] * n[0] + v[1] * n[1]))
                .sum();
            total += w * len * hn;
        }
    }
    Ok(total)
}

/// Largest relative per-element mass-balance residual of the last step,
/// `sigma int m + oint h.n - int g`, with boundary fluxes integrated on the
/// element edges.
pub fn mass_balance_residual(sim: &Simulation<'_>) -> Result<f64, DiagError> {
    let rhs = sim.last_rhs().ok_or(DiagError::NoStep)?;
    let mesh = &sim.problem().mesh;
    let d = sim.discretization();
    let cur = sim.current();
    let worst = map_range(sim.options().exec, mesh.n_elements(), |k| -> Result<f64, DiagError> {
        let ctx = ElementContext::new(mesh, &d.orders, k)?;
        let fl = d.dofs.element_flux_dofs(mesh, k);
        let first = d.dofs.mass_dofs(k).start;
        let area = mesh.area(k);
        let mut worst: f64 = 0.0;
        for s in 0..cur.m.len() {
            let local = |h: &[f64]| -> Vec<f64> { fl.iter().map(|&i| h[i]).collect() };
            let terms_old: Vec<f64> = rhs
                .div_terms
                .iter()
                .map(|(w, h)| outflow(mesh, &ctx, &local(&h[s])).map(|o| w * o))
                .collect::<Result<_, _>>()?;
            let a = rhs.sigma * area * cur.m[s][first];
            let b = outflow(mesh, &ctx, &local(&cur.h[s]))?;
            let c = area * rhs.g_mass[s][first];
            let r = a + b - c + terms_old.iter().sum::<f64>();
            let scale = a.abs() + b.abs() + c.abs() + terms_old.iter().map(|x| x.abs()).sum::<f64>();
            if scale > 0.0 {
                worst = worst.max(r.abs() / scale);
            }
        }
        Ok(worst)
    });
    worst.into_iter().try_fold(0.0f64, |a, x| Ok(a.max(x?)))
}

/// Largest difference of the flux normal trace seen from the two sides of
/// interior edges, at edge quadrature points.
pub fn max_normal_jump(mesh: &Mesh, orders: &OrderMap, dofs: &DofMap, h: &[f64]) -> Result<f64, DiagError> {
    let mut worst: f64 = 0.0;
    for e in mesh.interior_edges() {
        let (k1, Some(k2)) = mesh.edge_elements(e) else { continue };
        let n = mesh.edge_normal(e);
        let rule = quadrature_rule(Domain::Segment, edge_quadrature_degree(orders.edge_order(e)))?;
        let sides = [k1, k2].map(|k| {
            let ctx = ElementContext::new(mesh, orders, k);
            let local: Vec<f64> = dofs.element_flux_dofs(mesh, k).iter().map(|&i| h[i]).collect();
            (k, ctx, local)
        });
        for p in &rule.points {
            let x = mesh.edge_point(e, p[0]);
            let mut v = [0.0; 2];
            for (slot, (k, ctx, local)) in v.iter_mut().zip(&sides) {
                let ctx = ctx.as_ref().map_err(|e| e.clone())?;
                let (hv, _) = ctx.flux_value(local, mesh.to_reference(*k, x));
                *slot = hv[0] * n[0] + hv[1] * n[1];
            }
            worst = worst.max((v[0] - v[1]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Furthest coordinate along `axis` at which the field crosses `level`,
/// averaged over `lines` sampling lines spread across the transverse
/// extent. Lines on which the level is not attained are skipped.
pub fn track_wavefront(field: &FieldView<'_>, level: f64, axis: Axis, lines: usize) -> Result<f64, DiagError> {
    let mesh = field.mesh;
    let (a, b) = match axis {
        Axis::X => (0, 1),
        Axis::Y => (1, 0),
    };
    let (lo, hi) = (0..mesh.n_vertices()).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        let c = mesh.vertex(v)[b];
        (l.min(c), h.max(c))
    });
    let (mut sum, mut hits) = (0.0, 0usize);
    for line in 0..lines.max(1) {
        let mut best: Option<f64> = None;
        let c = lo + (hi - lo) * (line as f64 + 0.5) / lines.max(1) as f64;
        // (coordinate along the axis, value, element)
        let mut samples: Vec<(f64, f64, usize)> = Vec::new();
        let mut ctxs = Vec::new();
        for k in 0..mesh.n_elements() {
            let xs = mesh.element_coords(k);
            let mut cuts = Vec::new();
            for i in 0..3 {
                let (p, q) = (xs[i], xs[(i + 1) % 3]);
                let (pb, qb) = (p[b] - c, q[b] - c);
                if pb == 0.0 {
                    cuts.push(p[a]);
                }
                if pb * qb < 0.0 {
                    let s = pb / (pb - qb);
                    cuts.push(p[a] + s * (q[a] - p[a]));
                }
            }
            if cuts.len() < 2 {
                continue;
            }
            let s0 = cuts.iter().copied().fold(f64::INFINITY, f64::min);
            let s1 = cuts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if s1 - s0 <= 1e-14 * (1.0 + s1.abs()) {
                continue;
            }
            let ctx = ElementContext::new(mesh, field.orders, k)?;
            let n = 4 * (field.orders.mass_order(k) + 1);
            let pt = |s: f64| {
                let mut x = [0.0; 2];
                x[a] = s;
                x[b] = c;
                x
            };
            // stay strictly inside to avoid evaluating on neighbours
            let eps = 1e-9 * (s1 - s0);
            for j in 0..=n {
                let s = s0 + eps + (s1 - s0 - 2.0 * eps) * j as f64 / n as f64;
                samples.push((s, field.value_in(&ctx, pt(s)), ctxs.len()));
            }
            ctxs.push(ctx);
        }
        samples.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in samples.windows(2) {
            let (s0, v0, k0) = w[0];
            let (s1, v1, k1) = w[1];
            let (d0, d1) = (v0 - level, v1 - level);
            if d0 == 0.0 || d0 * d1 < 0.0 || d1 == 0.0 {
                let root = if d0 == 0.0 {
                    s0
                } else if d1 == 0.0 {
                    s1
                } else if k0 == k1 {
                    let ctx = &ctxs[k0];
                    let f = |s: f64| {
                        let mut x = [0.0; 2];
                        x[a] = s;
                        x[b] = c;
                        field.value_in(ctx, x) - level
                    };
                    let (mut l, mut r, mut fl) = (s0, s1, d0);
                    for _ in 0..60 {
                        let mid = 0.5 * (l + r);
                        let fm = f(mid);
                        if fm * fl <= 0.0 {
                            r = mid;
                        } else {
                            l = mid;
                            fl = fm;
                        }
                    }
                    0.5 * (l + r)
                } else {
                    0.5 * (s0 + s1)
                };
                best = Some(best.map_or(root, |b: f64| b.max(root)));
            }
        }
        if let Some(x) = best {
            sum += x;
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(DiagError::LevelNotAttained(level));
    }
    Ok(sum / hits as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::build_dof_map;
    use crate::mesh::{generate_structured, BBox, Diagonal};
    use crate::problem::project_l2;

    #[test]
    fn sharp_front_position() {
        let mesh = generate_structured(8, 2, BBox::new(0.0, 0.0, 4.0, 1.0), Diagonal::Left).unwrap();
        let o = OrderMap::uniform(&mesh, 1);
        let d = build_dof_map(&mesh, &o).unwrap();
        let m = project_l2(&mesh, &o, &d, |k, _| if mesh.centroid(k)[0] < 2.0 { 1.0 } else { 0.0 }).unwrap();
        let f = FieldView { mesh: &mesh, orders: &o, dofs: &d, m: &m };
        let x = track_wavefront(&f, 0.6, Axis::X, 3).unwrap();
        assert!((x - 2.0).abs() < 1e-6, "{x}");
    }

    #[test]
    fn linear_profile_root() {
        let mesh = generate_structured(3, 3, BBox::new(0.0, 0.0, 1.0, 1.0), Diagonal::Crossed).unwrap();
        let o = OrderMap::uniform(&mesh, 1);
        let d = build_dof_map(&mesh, &o).unwrap();
        let m = project_l2(&mesh, &o, &d, |_, x| 1.0 - x[0]).unwrap();
        let f = FieldView { mesh: &mesh, orders: &o, dofs: &d, m: &m };
        let x = track_wavefront(&f, 0.6, Axis::X, 4).unwrap();
        assert!((x - 0.4).abs() < 1e-10, "{x}");
        let y = track_wavefront(&f, 0.6, Axis::Y, 4);
        assert!(matches!(y, Err(DiagError::LevelNotAttained(_))) || y.is_ok());
        assert!(matches!(track_wavefront(&f, 5.0, Axis::X, 2), Err(DiagError::LevelNotAttained(_))));
    }

    #[test]
    fn integral_and_point_values() {
        let mesh = generate_structured(2, 2, BBox::new(0.0, 0.0, 2.0, 1.0), Diagonal::Right).unwrap();
        let o = OrderMap::uniform(&mesh, 2);
        let d = build_dof_map(&mesh, &o).unwrap();
        let m = project_l2(&mesh, &o, &d, |_, x| x[0] * x[1]).unwrap();
        let f = FieldView { mesh: &mesh, orders: &o, dofs: &d, m: &m };
        assert!((f.integral() - 1.0).abs() < 1e-13);
        assert!((f.value([1.3, 0.4]).unwrap() - 0.52).abs() < 1e-13);
    }
}
