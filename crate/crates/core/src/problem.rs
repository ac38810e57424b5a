//! Problem definition and the discrete operators for one order map.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_f, assemble_global, essential_flux_values, AssemblyError, Diffusivity, ElementContext, GlobalMatrices,
};
use crate::fespace::{build_dof_map, DofMap, FeError, OrderMap};
use crate::linalg::{invert_mass_blocks, CsrMatrix};
use crate::mesh::{Mesh, Tag};
use crate::models::Model;
use crate::par::{map_range, Execution};

/// Prescribed concentration on the natural boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryValue {
    Constant(f64),
    /// Trace of the manufactured solution.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// `m = mbar`, imposed weakly through `F`.
    Natural(BoundaryValue),
    /// `h . n = -hbar`, imposed on the flux dofs.
    Essential(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConditions {
    pub by_tag: BTreeMap<Tag, BoundaryCondition>,
    /// Applies to boundary tags missing from `by_tag`.
    pub default: Option<BoundaryCondition>,
}

impl BoundaryConditions {
    pub fn everywhere(c: BoundaryCondition) -> Self {
        Self {
            by_tag: BTreeMap::new(),
            default: Some(c),
        }
    }

    /// No flux through the whole boundary.
    pub fn insulated() -> Self {
        Self::everywhere(BoundaryCondition::Essential(0.0))
    }
}

/// Initial data as a function of `(species, element, x)`.
pub type FieldFn = Arc<dyn Fn(usize, usize, [f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct InitialCondition {
    pub species: FieldFn,
    /// Internal states, zero when absent.
    pub internal: Option<FieldFn>,
}

impl std::fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InitialCondition")
            .field("internal", &self.internal.is_some())
            .finish()
    }
}

impl InitialCondition {
    pub fn new(f: impl Fn(usize, usize, [f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            species: Arc::new(f),
            internal: None,
        }
    }

    pub fn constant(values: Vec<f64>) -> Self {
        Self::new(move |s, _, _| values[s])
    }

    pub fn with_internal(mut self, f: impl Fn(usize, usize, [f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        self.internal = Some(Arc::new(f));
        self
    }
}

/// Mesh, material, kinetics and boundary data.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub diffusivity: Diffusivity,
    pub model: Model,
    pub bc: BoundaryConditions,
    resolved: Vec<(usize, BoundaryCondition)>,
}

impl Problem {
    pub fn new(mesh: Mesh, diffusivity: Diffusivity, model: Model, bc: BoundaryConditions) -> Result<Self, AssemblyError> {
        let tags = mesh.boundary_tags();
        for t in bc.by_tag.keys() {
            if !tags.contains(t) {
                return Err(AssemblyError::MissingBoundaryTag(*t));
            }
        }
        for k in 0..mesh.n_elements() {
            diffusivity.tensor(mesh.region(k))?;
        }
        let resolved = mesh
            .boundary_edges()
            .map(|e| {
                let tag = mesh.edge_tag(e).unwrap_or_default();
                bc.by_tag
                    .get(&tag)
                    .copied()
                    .or(bc.default)
                    .map(|c| (e, c))
                    .ok_or(AssemblyError::UnassignedBoundary { edge: e, tag })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            mesh,
            diffusivity,
            model,
            bc,
            resolved,
        })
    }

    pub fn n_species(&self) -> usize {
        self.model.n_species()
    }

    /// Boundary edges with their condition.
    pub fn boundary(&self) -> &[(usize, BoundaryCondition)] {
        &self.resolved
    }

    pub fn natural_edges(&self) -> Vec<usize> {
        self.resolved
            .iter()
            .filter(|(_, c)| matches!(c, BoundaryCondition::Natural(_)))
            .map(|(e, _)| *e)
            .collect()
    }

    pub fn essential_edges(&self) -> Vec<usize> {
        self.resolved
            .iter()
            .filter(|(_, c)| matches!(c, BoundaryCondition::Essential(_)))
            .map(|(e, _)| *e)
            .collect()
    }

    fn natural_time_dependent(&self) -> bool {
        self.resolved
            .iter()
            .any(|(_, c)| matches!(c, BoundaryCondition::Natural(BoundaryValue::Exact)))
    }
}

/// Operators, dof layout and boundary data for one order map.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub orders: OrderMap,
    pub dofs: DofMap,
    pub mats: GlobalMatrices,
    /// `B^T`.
    pub bt: CsrMatrix,
    pub m_inv: CsrMatrix,
    pub fixed: Vec<bool>,
    pub fixed_values: Vec<f64>,
    natural: Vec<usize>,
    static_f: Option<Vec<f64>>,
}

impl Discretization {
    pub fn new(problem: &Problem, orders: OrderMap, exec: Execution) -> Result<Self, AssemblyError> {
        orders.validate(&problem.mesh)?;
        let mesh = &problem.mesh;
        let dofs = build_dof_map(mesh, &orders)?;
        let mats = assemble_global(mesh, &dofs, &orders, &problem.diffusivity, exec)?;
        let m_inv = invert_mass_blocks(&mats.m, &mats.mass_blocks)?;
        let hbar: BTreeMap<usize, f64> = problem
            .boundary()
            .iter()
            .filter_map(|(e, c)| match c {
                BoundaryCondition::Essential(v) => Some((*e, *v)),
                BoundaryCondition::Natural(_) => None,
            })
            .collect();
        let ess: Vec<usize> = hbar.keys().copied().collect();
        let (fixed, fixed_values) = essential_flux_values(mesh, &dofs, &orders, &ess, |e, _| hbar[&e])?;
        let mut d = Self {
            orders,
            dofs,
            bt: mats.b.transpose(),
            mats,
            m_inv,
            fixed,
            fixed_values,
            natural: problem.natural_edges(),
            static_f: None,
        };
        if !problem.natural_time_dependent() {
            d.static_f = Some(d.compute_f(problem, 0.0)?);
        }
        Ok(d)
    }

    fn compute_f(&self, problem: &Problem, t: f64) -> Result<Vec<f64>, FeError> {
        let mesh = &problem.mesh;
        let values: BTreeMap<usize, BoundaryValue> = problem
            .boundary()
            .iter()
            .filter_map(|(e, c)| match c {
                BoundaryCondition::Natural(v) => Some((*e, *v)),
                BoundaryCondition::Essential(_) => None,
            })
            .collect();
        assemble_f(mesh, &self.dofs, &self.orders, &self.natural, |e, x| match values[&e] {
            BoundaryValue::Constant(c) => c,
            BoundaryValue::Exact => problem.model.exact().map_or(0.0, |c| c.m(x, t)),
        })
    }

    /// Natural boundary load at time `t`.
    pub fn f_at(&self, problem: &Problem, t: f64) -> Result<Vec<f64>, FeError> {
        match &self.static_f {
            Some(f) => Ok(f.clone()),
            None => self.compute_f(problem, t),
        }
    }

    /// L2 projection of a pointwise function onto the mass space.
    pub fn project(
        &self,
        mesh: &Mesh,
        exec: Execution,
        f: impl Fn(usize, [f64; 2]) -> f64 + Send + Sync,
    ) -> Result<Vec<f64>, FeError> {
        let parts = map_range(exec, mesh.n_elements(), |k| -> Result<Vec<f64>, FeError> {
            let ctx = ElementContext::new(mesh, &self.orders, k)?;
            let tab = ctx.mass_table()?;
            let mut out = vec![0.0; tab[0].len()];
            for ((xi, w), psi) in ctx.rule.points.iter().zip(&ctx.rule.weights).zip(tab) {
                let v = w * ctx.geom.det * f(k, ctx.geom.to_physical(*xi));
                for (o, p) in out.iter_mut().zip(psi) {
                    *o += v * p;
                }
            }
            Ok(out)
        });
        let mut load = vec![0.0; self.dofs.n_mass()];
        for (k, p) in parts.into_iter().enumerate() {
            load[self.dofs.mass_dofs(k)].copy_from_slice(&p?);
        }
        Ok(self.m_inv.matvec(&load))
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_flux() + self.dofs.n_mass()
    }
}

/// L2 projection onto the mass space without assembled operators.
pub fn project_l2(
    mesh: &Mesh,
    orders: &OrderMap,
    dofs: &DofMap,
    f: impl Fn(usize, [f64; 2]) -> f64,
) -> Result<Vec<f64>, FeError> {
    let mut out = vec![0.0; dofs.n_mass()];
    for k in 0..mesh.n_elements() {
        let ctx = ElementContext::new(mesh, orders, k)?;
        let tab = ctx.mass_table()?;
        let n = tab[0].len();
        let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        for ((xi, w), psi) in ctx.rule.points.iter().zip(&ctx.rule.weights).zip(tab) {
            let wd = w * ctx.geom.det;
            let v = f(k, ctx.geom.to_physical(*xi));
            for i in 0..n {
                rhs[i] += wd * v * psi[i];
                for j in 0..n {
                    gram[(i, j)] += wd * psi[i] * psi[j];
                }
            }
        }
        let c = gram
            .cholesky()
            .ok_or_else(|| FeError::InvalidOrders(format!("singular mass matrix on element {k}")))?
            .solve(&rhs);
        out[dofs.mass_dofs(k)].copy_from_slice(c.as_slice());
    }
    Ok(out)
}
