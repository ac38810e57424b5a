//! IMEX multistep time stepping.
//!
//! A step with coefficients `(alpha, beta, gamma)` over `r` previous levels
//! solves
//!
//! ```text
//! sum_j alpha_j / dt (m_j, v) + sum_j beta_j b(h_j, v) = sum_j gamma_j (f_j, v)
//! ```
//!
//! for the newest level, which after division by `beta_r` is the block
//! system `[K B; B^T -sigma M][H; m] = [F; G]` with `sigma = alpha_r / (dt beta_r)`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptivity::{transfer_flux, transfer_mass};
use crate::assembly::{AssemblyError, ElementContext};
use crate::fespace::quadrature::FINE_RULE;
use crate::fespace::{FeError, OrderMap};
use crate::linalg::{CsrMatrix, LinalgError, SchurSolver, SolverOptions};
use crate::models::ModelError;
use crate::par::{map_range, Execution};
use crate::problem::{Discretization, InitialCondition, Problem};

#[derive(Debug, Error, Clone)]
pub enum ImexError {
    #[error("unknown scheme `{0}` (expected bdf2, bdf3, cnab or ark2)")]
    UnknownScheme(String),
    #[error("invalid time step: {0}")]
    InvalidStep(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("linear solve failed at t = {time}: {source}")]
    Solve { time: f64, source: LinalgError },
    #[error("blow-up at t = {time}: max |m| = {max:e}")]
    BlowUp { time: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Bdf2,
    Bdf3,
    Cnab,
    Ark2,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Bdf2, Scheme::Bdf3, Scheme::Cnab, Scheme::Ark2];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bdf2 => "bdf2",
            Scheme::Bdf3 => "bdf3",
            Scheme::Cnab => "cnab",
            Scheme::Ark2 => "ark2",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = ImexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| ImexError::UnknownScheme(s.to_string()))
    }
}

/// Multistep coefficients, oldest level first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImexCoefficients {
    /// Number of previous levels.
    pub r: usize,
    /// `r + 1` entries.
    pub alpha: Vec<Rational64>,
    /// `r + 1` entries.
    pub beta: Vec<Rational64>,
    /// `r` entries.
    pub gamma: Vec<Rational64>,
    pub order: usize,
}

fn q(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn to_f64(x: Rational64) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

impl ImexCoefficients {
    /// Implicit/explicit Euler pair.
    pub fn euler() -> Self {
        Self {
            r: 1,
            alpha: vec![q(-1, 1), q(1, 1)],
            beta: vec![q(0, 1), q(1, 1)],
            gamma: vec![q(1, 1)],
            order: 1,
        }
    }

    pub fn alpha_f64(&self) -> Vec<f64> {
        self.alpha.iter().copied().map(to_f64).collect()
    }

    pub fn beta_f64(&self) -> Vec<f64> {
        self.beta.iter().copied().map(to_f64).collect()
    }

    pub fn gamma_f64(&self) -> Vec<f64> {
        self.gamma.iter().copied().map(to_f64).collect()
    }

    /// Order conditions: `sum alpha_j j^q = q sum beta_j j^(q-1)` for
    /// `q <= order` and `sum gamma_j j^q = sum beta_j j^q` for `q < order`.
    pub fn satisfies_order_conditions(&self, order: usize) -> bool {
        let pw = |j: usize, p: usize| Rational64::from_integer((j as i64).pow(p as u32));
        (0..=order).all(|p| {
            let lhs: Rational64 = self.alpha.iter().enumerate().map(|(j, a)| a * pw(j, p)).sum();
            let rhs: Rational64 = if p == 0 {
                q(0, 1)
            } else {
                self.beta.iter().enumerate().map(|(j, b)| b * pw(j, p - 1)).sum::<Rational64>() * (p as i64)
            };
            let ex: Rational64 = self.gamma.iter().enumerate().map(|(j, g)| g * pw(j, p)).sum();
            let im: Rational64 = self.beta.iter().enumerate().map(|(j, b)| b * pw(j, p)).sum();
            lhs == rhs && (p == order || ex == im)
        })
    }
}

pub fn scheme_coefficients(s: Scheme) -> ImexCoefficients {
    let (alpha, beta, gamma) = match s {
        Scheme::Bdf2 => (
            vec![q(1, 2), q(-2, 1), q(3, 2)],
            vec![q(0, 1), q(0, 1), q(1, 1)],
            vec![q(-1, 1), q(2, 1)],
        ),
        Scheme::Bdf3 => (
            vec![q(1, 24), q(-1, 8), q(-7, 8), q(23, 24)],
            vec![q(1, 16), q(-5, 16), q(15, 16), q(5, 16)],
            vec![q(3, 8), q(-5, 4), q(15, 8)],
        ),
        Scheme::Cnab => (
            vec![q(0, 1), q(-1, 1), q(1, 1)],
            vec![q(0, 1), q(1, 2), q(1, 2)],
            vec![q(-1, 2), q(3, 2)],
        ),
        Scheme::Ark2 => (
            vec![q(-1, 1), q(0, 1), q(1, 1)],
            vec![q(1, 1), q(0, 1), q(1, 1)],
            vec![q(0, 1), q(2, 1)],
        ),
    };
    ImexCoefficients {
        r: gamma.len(),
        order: if s == Scheme::Bdf3 { 3 } else { 2 },
        alpha,
        beta,
        gamma,
    }
}

/// `sigma = alpha_r / (dt beta_r)`.
pub fn shift(c: &ImexCoefficients, dt: f64) -> f64 {
    to_f64(c.alpha[c.r]) / (dt * to_f64(c.beta[c.r]))
}

/// One time level: per-species mass, flux and projected kinetics.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub t: f64,
    pub m: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
}

/// Ring buffer of the most recent levels, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    levels: VecDeque<Level>,
    capacity: usize,
}

impl History {
    pub fn new(capacity: usize) -> Self {
        Self {
            levels: VecDeque::with_capacity(capacity + 1),
            capacity,
        }
    }

    /// Appends a level, returning the evicted oldest one when full.
    pub fn push(&mut self, level: Level) -> Option<Level> {
        debug_assert!(self.levels.back().is_none_or(|l| l.t < level.t));
        self.levels.push_back(level);
        if self.levels.len() > self.capacity {
            self.levels.pop_front()
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.levels.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn levels(&self) -> impl Iterator<Item = &Level> {
        self.levels.iter()
    }

    pub fn levels_mut(&mut self) -> impl Iterator<Item = &mut Level> {
        self.levels.iter_mut()
    }

    pub fn current(&self) -> &Level {
        self.levels.back().expect("history is never empty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.t).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bootstrap {
    /// IMEX Euler with `dt/4` substeps.
    Euler,
    /// Richardson extrapolation of IMEX Euler with `dt/4` and `dt/8`.
    #[default]
    Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub scheme: Scheme,
    pub dt: f64,
    pub solver: SolverOptions,
    pub exec: Execution,
    /// Abort when any mass coefficient exceeds this.
    pub blowup: f64,
    /// Explicit midpoint substeps per step for internal states.
    pub internal_substeps: usize,
    pub bootstrap: Bootstrap,
}

impl StepOptions {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        Self {
            scheme,
            dt,
            solver: SolverOptions::default(),
            exec: Execution::default(),
            blowup: 1e6,
            internal_substeps: 4,
            bootstrap: Bootstrap::default(),
        }
    }
}

/// Data defining the discrete source `g` of the last step, so that
/// `sigma m + div h = g` holds weakly:
/// `g = g_mass - sum_j w_j div h_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRhs {
    pub sigma: f64,
    /// Per-species mass coefficients.
    pub g_mass: Vec<Vec<f64>>,
    /// `(w_j, H_j)` with per-species flux coefficients.
    pub div_terms: Vec<(f64, Vec<Vec<f64>>)>,
}

/// Simulation state: history, internal states and the operators for the
/// current order map.
pub struct Simulation<'a> {
    problem: &'a Problem,
    opts: StepOptions,
    coeffs: ImexCoefficients,
    initial: InitialCondition,
    disc: Discretization,
    solvers: Vec<SchurSolver>,
    history: History,
    internal: Vec<Vec<f64>>,
    t_start: f64,
    level_index: usize,
    last_rhs: Option<StepRhs>,
}

impl fmt::Debug for Simulation<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation")
            .field("scheme", &self.opts.scheme)
            .field("t", &self.time())
            .field("steps", &self.level_index)
            .field("dofs", &self.disc.n_dofs())
            .finish()
    }
}

fn max_abs(v: &[Vec<f64>]) -> f64 {
    v.iter().flatten().fold(0.0f64, |a, x| if x.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

impl<'a> Simulation<'a> {
    pub fn new(
        problem: &'a Problem,
        orders: OrderMap,
        initial: InitialCondition,
        opts: StepOptions,
    ) -> Result<Self, ImexError> {
        if !(opts.dt > 0.0 && opts.dt.is_finite()) {
            return Err(ImexError::InvalidStep(format!("dt = {}", opts.dt)));
        }
        let coeffs = scheme_coefficients(opts.scheme);
        let disc = Discretization::new(problem, orders, opts.exec)?;
        let mut sim = Self {
            problem,
            opts,
            history: History::new(coeffs.r),
            coeffs,
            initial,
            disc,
            solvers: Vec::new(),
            internal: Vec::new(),
            t_start: 0.0,
            level_index: 0,
            last_rhs: None,
        };
        sim.initialize()?;
        Ok(sim)
    }

    /// Replaces the order map before the first step and re-projects the
    /// initial condition.
    pub fn reinitialize(&mut self, orders: OrderMap) -> Result<(), ImexError> {
        self.disc = Discretization::new(self.problem, orders, self.opts.exec)?;
        self.solvers.clear();
        self.history = History::new(self.coeffs.r);
        self.level_index = 0;
        self.last_rhs = None;
        self.initialize()
    }

    fn initialize(&mut self) -> Result<(), ImexError> {
        let mesh = &self.problem.mesh;
        let ns = self.problem.n_species();
        let exec = self.opts.exec;
        let m: Vec<Vec<f64>> = (0..ns)
            .map(|s| {
                let init = &self.initial.species;
                self.disc.project(mesh, exec, |k, x| init(s, k, x))
            })
            .collect::<Result<_, _>>()?;
        self.internal = (0..self.problem.model.n_internal())
            .map(|i| match &self.initial.internal {
                Some(init) => self.disc.project(mesh, exec, |k, x| init(i, k, x)),
                None => Ok(vec![0.0; self.disc.dofs.n_mass()]),
            })
            .collect::<Result<_, _>>()?;
        let h = self.initial_flux(&m)?;
        let f = self.kinetics(&m, &self.internal, self.t_start)?;
        self.history.push(Level {
            t: self.t_start,
            m,
            h,
            f,
        });
        Ok(())
    }

    /// Flux from the constitutive row `K h = F - B m`.
    fn initial_flux(&self, m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ImexError> {
        let nh = self.disc.dofs.n_flux();
        let solver = SchurSolver::new(
            &self.disc.mats.k,
            &CsrMatrix::zeros(nh, 0),
            CsrMatrix::zeros(0, 0),
            1.0,
            self.disc.fixed.clone(),
            &self.opts.solver,
            self.opts.exec,
        )
        .map_err(|source| ImexError::Solve { time: self.t_start, source })?;
        let f = self.disc.f_at(self.problem, self.t_start)?;
        m.iter()
            .map(|ms| {
                let bm = self.disc.mats.b.matvec(ms);
                let rhs: Vec<f64> = f.iter().zip(&bm).map(|(a, b)| a - b).collect();
                solver
                    .solve(&rhs, &[], &self.disc.fixed_values, None)
                    .map(|(h, _)| h)
                    .map_err(|source| ImexError::Solve { time: self.t_start, source })
            })
            .collect()
    }

    pub fn problem(&self) -> &'a Problem {
        self.problem
    }

    pub fn options(&self) -> &StepOptions {
        &self.opts
    }

    pub fn coefficients(&self) -> &ImexCoefficients {
        &self.coeffs
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn orders(&self) -> &OrderMap {
        &self.disc.orders
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn current(&self) -> &Level {
        self.history.current()
    }

    pub fn internal(&self) -> &[Vec<f64>] {
        &self.internal
    }

    pub fn time(&self) -> f64 {
        self.history.current().t
    }

    /// Time levels advanced since the initial condition, bootstrap levels
    /// included, so the current time is `steps() * dt`.
    pub fn steps(&self) -> usize {
        self.level_index
    }

    pub fn last_rhs(&self) -> Option<&StepRhs> {
        self.last_rhs.as_ref()
    }

    pub fn initial_condition(&self) -> &InitialCondition {
        &self.initial
    }

    fn level_time(&self, index: usize) -> f64 {
        self.t_start + index as f64 * self.opts.dt
    }

    fn solver(&mut self, sigma: f64) -> Result<usize, ImexError> {
        if let Some(i) = self.solvers.iter().position(|s| s.sigma() == sigma) {
            return Ok(i);
        }
        let s = SchurSolver::new(
            &self.disc.mats.k,
            &self.disc.mats.b,
            self.disc.m_inv.clone(),
            sigma,
            self.disc.fixed.clone(),
            &self.opts.solver,
            self.opts.exec,
        )
        .map_err(|source| ImexError::Solve { time: self.time(), source })?;
        self.solvers.push(s);
        Ok(self.solvers.len() - 1)
    }

    /// Projected kinetics of a state.
    pub fn kinetics(&self, m: &[Vec<f64>], r: &[Vec<f64>], t: f64) -> Result<Vec<Vec<f64>>, ImexError> {
        let model = &self.problem.model;
        if let crate::models::Model::Zero { species } = model {
            return Ok(vec![vec![0.0; self.disc.dofs.n_mass()]; *species]);
        }
        let mesh = &self.problem.mesh;
        let dofs = &self.disc.dofs;
        let ns = m.len();
        let exact = model.exact().is_some();
        let parts = map_range(self.opts.exec, mesh.n_elements(), |k| -> Result<Vec<Vec<f64>>, ImexError> {
            let mut ctx = ElementContext::new(mesh, &self.disc.orders, k)?;
            if exact {
                ctx = ctx.with_degree(FINE_RULE)?;
            }
            let tab = ctx.mass_table()?;
            let range = dofs.mass_dofs(k);
            let mut out = vec![vec![0.0; range.len()]; ns];
            let mut mv = vec![0.0; ns];
            let mut rv = vec![0.0; r.len()];
            let mut fv = vec![0.0; ns];
            for ((xi, w), psi) in ctx.rule.points.iter().zip(&ctx.rule.weights).zip(tab) {
                for (s, v) in mv.iter_mut().enumerate() {
                    *v = psi.iter().zip(&m[s][range.clone()]).map(|(a, b)| a * b).sum();
                }
                for (i, v) in rv.iter_mut().enumerate() {
                    *v = psi.iter().zip(&r[i][range.clone()]).map(|(a, b)| a * b).sum();
                }
                model.rates(&mv, &rv, ctx.geom.to_physical(*xi), t, &mut fv)?;
                let wd = w * ctx.geom.det;
                for s in 0..ns {
                    for (o, p) in out[s].iter_mut().zip(psi) {
                        *o += wd * fv[s] * p;
                    }
                }
            }
            Ok(out)
        });
        let mut loads = vec![vec![0.0; dofs.n_mass()]; ns];
        for (k, p) in parts.into_iter().enumerate() {
            for (s, part) in p?.into_iter().enumerate() {
                loads[s][dofs.mass_dofs(k)].copy_from_slice(&part);
            }
        }
        Ok(loads.iter().map(|l| self.disc.m_inv.matvec(l)).collect())
    }

    /// Internal states advanced over `dt` along the linear path from `m0`
    /// to `m1`, integrated pointwise and re-projected.
    fn advance_internal(
        &self,
        r: &[Vec<f64>],
        m0: &[Vec<f64>],
        m1: &[Vec<f64>],
        dt: f64,
    ) -> Result<Vec<Vec<f64>>, ImexError> {
        if r.is_empty() {
            return Ok(Vec::new());
        }
        let mesh = &self.problem.mesh;
        let dofs = &self.disc.dofs;
        let model = &self.problem.model;
        let (ns, ni) = (m0.len(), r.len());
        let sub = self.opts.internal_substeps.max(1);
        let parts = map_range(self.opts.exec, mesh.n_elements(), |k| -> Result<Vec<Vec<f64>>, ImexError> {
            let ctx = ElementContext::new(mesh, &self.disc.orders, k)?;
            let tab = ctx.mass_table()?;
            let range = dofs.mass_dofs(k);
            let eval = |c: &[f64], psi: &[f64]| -> f64 { psi.iter().zip(&c[range.clone()]).map(|(a, b)| a * b).sum() };
            let mut out = vec![vec![0.0; range.len()]; ni];
            for ((_, w), psi) in ctx.rule.points.iter().zip(&ctx.rule.weights).zip(tab) {
                let a: Vec<f64> = (0..ns).map(|s| eval(&m0[s], psi)).collect();
                let b: Vec<f64> = (0..ns).map(|s| eval(&m1[s], psi)).collect();
                let mut rv: Vec<f64> = (0..ni).map(|i| eval(&r[i], psi)).collect();
                model.advance_internal(&a, &b, &mut rv, dt, sub)?;
                let wd = w * ctx.geom.det;
                for i in 0..ni {
                    for (o, p) in out[i].iter_mut().zip(psi) {
                        *o += wd * rv[i] * p;
                    }
                }
            }
            Ok(out)
        });
        let mut loads = vec![vec![0.0; dofs.n_mass()]; ni];
        for (k, p) in parts.into_iter().enumerate() {
            for (i, part) in p?.into_iter().enumerate() {
                loads[i][dofs.mass_dofs(k)].copy_from_slice(&part);
            }
        }
        Ok(loads.iter().map(|l| self.disc.m_inv.matvec(l)).collect())
    }

    /// Solves for the newest level of a multistep combination over `levels`
    /// (oldest first), returning `(H, m)` per species and the step data.
    fn solve_combination(
        &mut self,
        c: &ImexCoefficients,
        dt: f64,
        levels: &[&Level],
        t_new: f64,
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, StepRhs), ImexError> {
        debug_assert_eq!(levels.len(), c.r);
        let (alpha, beta, gamma) = (c.alpha_f64(), c.beta_f64(), c.gamma_f64());
        let br = beta[c.r];
        let sigma = shift(c, dt);
        let idx = self.solver(sigma)?;
        let f = self.disc.f_at(self.problem, t_new)?;
        let ns = levels[0].m.len();
        let (nm, nh) = (self.disc.dofs.n_mass(), self.disc.dofs.n_flux());
        let mut hs = Vec::with_capacity(ns);
        let mut ms = Vec::with_capacity(ns);
        let mut g_mass = Vec::with_capacity(ns);
        for s in 0..ns {
            let mut comb = vec![0.0; nm];
            let mut hb = vec![0.0; nh];
            for (j, l) in levels.iter().enumerate() {
                let (a, gm) = (alpha[j] / dt, gamma[j]);
                for ((c, m), fj) in comb.iter_mut().zip(&l.m[s]).zip(&l.f[s]) {
                    *c += a * m - gm * fj;
                }
                if beta[j] != 0.0 {
                    for (x, h) in hb.iter_mut().zip(&l.h[s]) {
                        *x += beta[j] * h;
                    }
                }
            }
            let mc = self.disc.mats.m.matvec(&comb);
            let bth = self.disc.bt.matvec(&hb);
            let g: Vec<f64> = mc.iter().zip(&bth).map(|(a, b)| (a - b) / br).collect();
            let warm = levels.last().map(|l| l.h[s].as_slice());
            let (h, m) = self.solvers[idx]
                .solve(&f, &g, &self.disc.fixed_values, warm)
                .map_err(|source| ImexError::Solve { time: t_new, source })?;
            hs.push(h);
            ms.push(m);
            g_mass.push(comb.iter().map(|x| -x / br).collect());
        }
        let div_terms = levels
            .iter()
            .enumerate()
            .filter(|(j, _)| beta[*j] != 0.0)
            .map(|(j, l)| (beta[j] / br, l.h.clone()))
            .collect();
        Ok((hs, ms, StepRhs { sigma, g_mass, div_terms }))
    }

    /// Chain of IMEX Euler substeps from a level.
    fn euler_chain(&mut self, start: &Level, r0: &[Vec<f64>], dt: f64, n: usize) -> Result<(Level, Vec<Vec<f64>>), ImexError> {
        let c = ImexCoefficients::euler();
        let d = dt / n as f64;
        let mut level = start.clone();
        let mut r = r0.to_vec();
        for i in 0..n {
            let t_new = start.t + (i + 1) as f64 * d;
            let (h, m, _) = self.solve_combination(&c, d, &[&level], t_new)?;
            r = self.advance_internal(&r, &level.m, &m, d)?;
            let f = self.kinetics(&m, &r, t_new)?;
            level = Level { t: t_new, m, h, f };
        }
        Ok((level, r))
    }

    /// Fills the history up to the scheme's step count.
    pub fn bootstrap(&mut self) -> Result<(), ImexError> {
        while !self.history.is_full() {
            let start = self.history.current().clone();
            let dt = self.opts.dt;
            let t_new = self.level_time(self.level_index + 1);
            let r0 = self.internal.clone();
            let (mut level, r) = match self.opts.bootstrap {
                Bootstrap::Euler => self.euler_chain(&start, &r0, dt, 4)?,
                Bootstrap::Richardson => {
                    let (coarse, rc) = self.euler_chain(&start, &r0, dt, 4)?;
                    let (fine, rf) = self.euler_chain(&start, &r0, dt, 8)?;
                    let comb = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| x.iter().zip(y).map(|(f, c)| 2.0 * f - c).collect())
                            .collect()
                    };
                    let m = comb(&fine.m, &coarse.m);
                    let mut h = comb(&fine.h, &coarse.h);
                    for hs in h.iter_mut() {
                        for (i, x) in hs.iter_mut().enumerate() {
                            if self.disc.fixed[i] {
                                *x = self.disc.fixed_values[i];
                            }
                        }
                    }
                    let r = comb(&rf, &rc);
                    let f = self.kinetics(&m, &r, t_new)?;
                    (Level { t: t_new, m, h, f }, r)
                }
            };
            level.t = t_new;
            self.check_blowup(&level)?;
            self.internal = r;
            self.history.push(level);
            self.level_index += 1;
        }
        Ok(())
    }

    fn check_blowup(&self, level: &Level) -> Result<(), ImexError> {
        let max = max_abs(&level.m);
        if !(max <= self.opts.blowup) {
            return Err(ImexError::BlowUp { time: level.t, max });
        }
        Ok(())
    }

    /// One multistep step of size dt, bootstrapping first when needed, so the
    /// first call of an r-step scheme advances r levels.
    pub fn step(&mut self) -> Result<(), ImexError> {
        self.bootstrap()?;
        let c = self.coeffs.clone();
        let t_new = self.level_time(self.level_index + 1);
        let levels: Vec<Level> = self.history.levels().cloned().collect();
        let refs: Vec<&Level> = levels.iter().collect();
        let (h, m, rhs) = self.solve_combination(&c, self.opts.dt, &refs, t_new)?;
        let r = self.advance_internal(&self.internal, &self.history.current().m, &m, self.opts.dt)?;
        let f = self.kinetics(&m, &r, t_new)?;
        let level = Level { t: t_new, m, h, f };
        self.check_blowup(&level)?;
        self.internal = r;
        self.history.push(level);
        self.level_index += 1;
        self.last_rhs = Some(rhs);
        Ok(())
    }

    /// Steps until the time reaches `t_end` (to within a tenth of a step).
    pub fn run_until(&mut self, t_end: f64) -> Result<(), ImexError> {
        while self.time() < t_end - 0.1 * self.opts.dt {
            self.step()?;
        }
        Ok(())
    }

    /// Moves every stored field to a new order map by hierarchical
    /// padding or truncation and rebuilds the operators.
    pub fn set_orders(&mut self, orders: OrderMap) -> Result<(), ImexError> {
        if orders == self.disc.orders {
            return Ok(());
        }
        let mesh = &self.problem.mesh;
        let new = Discretization::new(self.problem, orders, self.opts.exec)?;
        let (od, nd) = (&self.disc, &new);
        let tm = |v: &Vec<f64>| transfer_mass(mesh, &od.dofs, &nd.dofs, v);
        let tf = |v: &Vec<f64>| transfer_flux(mesh, &od.dofs, &nd.dofs, v);
        for l in self.history.levels_mut() {
            l.m = l.m.iter().map(tm).collect();
            l.f = l.f.iter().map(tm).collect();
            l.h = l.h.iter().map(tf).collect();
            for h in l.h.iter_mut() {
                for (i, x) in h.iter_mut().enumerate() {
                    if nd.fixed[i] {
                        *x = nd.fixed_values[i];
                    }
                }
            }
        }
        self.internal = self.internal.iter().map(tm).collect();
        if let Some(rhs) = self.last_rhs.as_mut() {
            rhs.g_mass = rhs.g_mass.iter().map(tm).collect();
            for (_, hs) in rhs.div_terms.iter_mut() {
                *hs = hs.iter().map(tf).collect();
            }
        }
        self.disc = new;
        self.solvers.clear();
        Ok(())
    }
}
