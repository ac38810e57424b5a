use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptivity::{
    adapt_orders, check_order_invariants, estimate, initial_estimate, order_histogram, AdaptParams, ErrorField,
};
use crate::assembly::{Diffusivity, ElementContext};
use crate::diagnostics::{simulation_errors, track_wavefront, DiagError, FieldView};
use crate::fespace::OrderMap;
use crate::imex::{ImexError, Simulation, StepOptions};
use crate::mesh::{generate_structured, load_mesh, BBox, Mesh};
use crate::models::Model;
use crate::problem::{BoundaryCondition, BoundaryConditions, InitialCondition, Problem};

use super::config::{Config, InitialConfig, MeshConfig, ModelConfig};
use super::output::{write_csv, write_vtk};
use super::DriverError;

/// One output step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub step: usize,
    pub time: f64,
    pub n_flux: usize,
    pub n_mass: usize,
    pub n_dofs: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub eta: Option<f64>,
    pub eta_max: Option<f64>,
    pub mass_l2: Option<f64>,
    pub flux_l2: Option<f64>,
    pub div_l2: Option<f64>,
    pub combined: Option<f64>,
    pub energy: Option<f64>,
    /// Sum over species of `int m`.
    pub mass_total: f64,
    /// Extremes over species of nodal samples.
    pub m_min: f64,
    pub m_max: f64,
    pub wavefront: Option<f64>,
}

/// One order adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptRecord {
    pub step: usize,
    pub time: f64,
    pub eta: f64,
    pub eta_max: f64,
    pub dofs_before: usize,
    pub dofs_after: usize,
    /// `order:count` pairs of the new map.
    pub histogram: String,
    pub invariants_ok: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub records: Vec<Record>,
    pub adaptations: Vec<AdaptRecord>,
    /// Step index reached and wall-clock seconds, per call to `step`.
    pub step_seconds: Vec<(usize, f64)>,
    pub seed: u64,
}

/// Observer hook for [`run_with`].
pub enum Event<'s, 'a> {
    Record(&'s Simulation<'a>, &'s Record),
    Adapted(&'s Simulation<'a>, &'s AdaptRecord),
}

/// Problem, initial data and options built from a config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub problem: Problem,
    pub initial: InitialCondition,
    pub options: StepOptions,
    pub orders: OrderMap,
}

impl Setup {
    pub fn new(cfg: &Config) -> Result<Self, DriverError> {
        cfg.validate()?;
        let mut mesh = build_mesh(&cfg.mesh)?;
        if !cfg.regions.is_empty() {
            mesh.assign_regions(|c, old| cfg.regions.iter().fold(old, |t, r| r.tag(c).unwrap_or(t)));
        }
        let model = build_model(&cfg.model)?;
        let diffusivity = build_diffusivity(cfg, &model)?;
        let bc = BoundaryConditions {
            by_tag: cfg.boundary.tags.clone(),
            default: Some(cfg.boundary.default.unwrap_or(BoundaryCondition::Essential(0.0))),
        };
        let problem = Problem::new(mesh, diffusivity, model, bc)?;
        let initial = build_initial(cfg, &problem)?;
        let mut options = StepOptions::new(cfg.time.scheme, cfg.time.dt);
        options.solver = cfg.solver;
        options.exec = cfg.execution;
        options.bootstrap = cfg.time.bootstrap;
        options.internal_substeps = cfg.time.internal_substeps;
        let orders = OrderMap::uniform(&problem.mesh, cfg.orders.initial);
        Ok(Self {
            problem,
            initial,
            options,
            orders,
        })
    }
}

fn build_mesh(m: &MeshConfig) -> Result<Mesh, DriverError> {
    Ok(match m {
        MeshConfig::Structured { nx, ny, bbox, diagonal } => {
            generate_structured(*nx, *ny, BBox::new(bbox[0], bbox[1], bbox[2], bbox[3]), *diagonal)?
        }
        MeshConfig::File { path, format } => load_mesh(path, *format)?,
    })
}

fn build_model(m: &ModelConfig) -> Result<Model, DriverError> {
    Ok(match m {
        ModelConfig::Zero { species } => Model::Zero { species: *species },
        ModelConfig::Fisher => Model::Fisher,
        ModelConfig::Competition { a } => Model::competition(a.clone())?,
        ModelConfig::AlievPanfilov { params, stimuli } => Model::AlievPanfilov {
            params: *params,
            stimuli: stimuli.clone(),
        },
        ModelConfig::Manufactured { case } => Model::Manufactured(*case),
    })
}

fn build_diffusivity(cfg: &Config, model: &Model) -> Result<Diffusivity, DriverError> {
    let Some(dc) = &cfg.diffusivity else {
        return match model.exact() {
            Some(case) => Ok(Diffusivity::isotropic(case.d)?),
            None => Err(DriverError::Config("missing [diffusivity]".into())),
        };
    };
    let iso = |d: f64| [[d, 0.0], [0.0, d]];
    let mut by_region = BTreeMap::new();
    for r in &dc.regions {
        let t = match (r.d, r.tensor) {
            (Some(d), None) => iso(d),
            (None, Some(t)) => t,
            _ => {
                return Err(DriverError::Config(format!(
                    "region {} needs exactly one of `d` and `tensor`",
                    r.tag
                )))
            }
        };
        by_region.insert(r.tag, t);
    }
    Ok(Diffusivity::from_regions(by_region, dc.default.map(iso))?)
}

fn build_initial(cfg: &Config, problem: &Problem) -> Result<InitialCondition, DriverError> {
    let ns = problem.n_species();
    let check = |v: &[f64]| -> Result<(), DriverError> {
        if v.len() == ns {
            Ok(())
        } else {
            Err(DriverError::Config(format!("initial values have {} entries for {ns} species", v.len())))
        }
    };
    Ok(match &cfg.initial {
        InitialConfig::Exact => {
            let case = *problem.model.exact().expect("checked by validate");
            InitialCondition::new(move |_, _, x| case.m(x, 0.0))
        }
        InitialConfig::Constant { values } => {
            check(values)?;
            InitialCondition::constant(values.clone())
        }
        InitialConfig::Patches { background, patches } => {
            check(background)?;
            for p in patches {
                check(&p.values)?;
            }
            let (bg, ps) = (background.clone(), patches.clone());
            InitialCondition::new(move |s, _, x| {
                ps.iter().rev().find(|p| p.rect.contains(x)).map_or(bg[s], |p| p.values[s])
            })
        }
        InitialConfig::Random { low, high } => {
            if !(low < high) {
                return Err(DriverError::Config(format!("empty random range [{low}, {high})")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let n = problem.mesh.n_elements() * ns;
            let draws: Vec<f64> = (0..n).map(|_| rng.random_range(*low..*high)).collect();
            InitialCondition::new(move |s, k, _| draws[k * ns + s])
        }
    })
}

fn n_steps(cfg: &Config) -> usize {
    (cfg.time.t_end / cfg.time.dt * (1.0 - 1e-12)).ceil() as usize
}

fn histogram(orders: &OrderMap) -> String {
    order_histogram(orders)
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(k, c)| format!("{k}:{c}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Nodal extremes over all species at vertices, edge midpoints and
/// centroids.
fn extremes(sim: &Simulation<'_>) -> Result<(f64, f64), DiagError> {
    const NODES: [[f64; 2]; 7] = [
        [0.0, 0.0],
        [1.0, 0.0],
        [0.0, 1.0],
        [0.5, 0.0],
        [0.5, 0.5],
        [0.0, 0.5],
        [1.0 / 3.0, 1.0 / 3.0],
    ];
    let mesh = &sim.problem().mesh;
    let d = sim.discretization();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..mesh.n_elements() {
        let ctx = ElementContext::new(mesh, &d.orders, k)?;
        for m in &sim.current().m {
            let c = &m[d.dofs.mass_dofs(k)];
            for xi in NODES {
                let v = ctx.mass_value(c, xi);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    Ok((lo, hi))
}

fn make_record(sim: &Simulation<'_>, cfg: &Config, errors: Option<&ErrorField>) -> Result<Record, DriverError> {
    let d = sim.discretization();
    let ks = d.orders.mass_orders();
    let norms = simulation_errors(sim).transpose()?;
    let wavefront = match &cfg.output.wavefront {
        Some(w) => match track_wavefront(&FieldView::of(sim, 0), w.level, w.axis, w.lines) {
            Ok(p) => Some(p),
            Err(DiagError::LevelNotAttained(_)) => None,
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    let (m_min, m_max) = extremes(sim)?;
    let mass_total = (0..sim.current().m.len()).map(|s| FieldView::of(sim, s).integral()).sum();
    Ok(Record {
        step: sim.steps(),
        time: sim.time(),
        n_flux: d.dofs.n_flux(),
        n_mass: d.dofs.n_mass(),
        n_dofs: d.n_dofs(),
        k_min: ks.iter().copied().min().unwrap_or(0),
        k_max: ks.iter().copied().max().unwrap_or(0),
        eta: errors.map(|e| e.eta_total),
        eta_max: errors.map(|e| e.eta_max),
        mass_l2: norms.map(|n| n.mass_l2),
        flux_l2: norms.map(|n| n.flux_l2),
        div_l2: norms.map(|n| n.div_l2),
        combined: norms.map(|n| n.combined()),
        energy: norms.map(|n| n.energy()),
        mass_total,
        m_min,
        m_max,
        wavefront,
    })
}

fn current_estimate(sim: &Simulation<'_>) -> Result<ErrorField, DriverError> {
    let r = if sim.steps() == 0 {
        initial_estimate(sim)
    } else {
        estimate(sim)
    };
    r.map_err(|source| DriverError::Adapt {
        step: sim.steps(),
        source,
    })
}

fn step_error(sim: &Simulation<'_>) -> impl Fn(ImexError) -> DriverError {
    let (step, time) = (sim.steps(), sim.time());
    move |source| DriverError::Step { step, time, source }
}

fn adapt(
    sim: &mut Simulation<'_>,
    params: &AdaptParams,
    errors: &ErrorField,
) -> Result<AdaptRecord, DriverError> {
    let step = sim.steps();
    let mesh = &sim.problem().mesh;
    let new = adapt_orders(errors, params, sim.orders(), mesh).map_err(|source| DriverError::Adapt { step, source })?;
    let invariants_ok = check_order_invariants(mesh, &new).is_ok();
    let dofs_before = sim.discretization().n_dofs();
    let histogram = histogram(&new);
    if sim.steps() == 0 {
        sim.reinitialize(new)
    } else {
        sim.set_orders(new)
    }
    .map_err(step_error(sim))?;
    Ok(AdaptRecord {
        step,
        time: sim.time(),
        eta: errors.eta_total,
        eta_max: errors.eta_max,
        dofs_before,
        dofs_after: sim.discretization().n_dofs(),
        histogram,
        invariants_ok,
    })
}

fn snapshot(dir: &Path, sim: &Simulation<'_>, errors: Option<&ErrorField>) -> Result<(), DriverError> {
    let path = dir.join(format!("state_{:06}.vtk", sim.steps()));
    write_vtk(&path, sim, errors.map(|e| e.eta_k.as_slice()))
}

/// Runs a config, calling `observe` at every record and adaptation.
pub fn run_with(
    cfg: &Config,
    setup: &Setup,
    mut observe: impl FnMut(Event<'_, '_>) -> Result<(), DriverError>,
) -> Result<RunReport, DriverError> {
    let out = &cfg.output;
    let dir = out.dir.as_deref();
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| DriverError::Io(d.to_path_buf(), e))?;
    }
    let mut sim = Simulation::new(&setup.problem, setup.orders.clone(), setup.initial.clone(), setup.options)
        .map_err(|source| DriverError::Step {
            step: 0,
            time: 0.0,
            source,
        })?;
    let mut report = RunReport {
        seed: cfg.seed,
        ..RunReport::default()
    };
    if let Some(p) = &cfg.adapt {
        let errors = current_estimate(&sim)?;
        let a = adapt(&mut sim, p, &errors)?;
        observe(Event::Adapted(&sim, &a))?;
        report.adaptations.push(a);
    }
    let total = n_steps(cfg);
    loop {
        let step = sim.steps();
        let last = step >= total;
        let adapt_now = cfg.adapt.filter(|p| step > 0 && step % p.cadence == 0 && !last);
        let record_now = step % out.cadence == 0 || last;
        let vtk_now = dir.is_some() && (out.vtk_cadence.is_some_and(|c| step % c == 0) || (last && out.vtk_cadence.is_some()));
        let errors = if adapt_now.is_some() || (record_now && out.estimate) || vtk_now {
            Some(current_estimate(&sim)?)
        } else {
            None
        };
        if record_now {
            let rec = make_record(&sim, cfg, errors.as_ref().filter(|_| out.estimate))?;
            observe(Event::Record(&sim, &rec))?;
            report.records.push(rec);
        }
        if vtk_now {
            snapshot(dir.expect("checked"), &sim, errors.as_ref())?;
        }
        if let (Some(p), Some(e)) = (adapt_now, &errors) {
            let a = adapt(&mut sim, &p, e)?;
            observe(Event::Adapted(&sim, &a))?;
            report.adaptations.push(a);
        }
        if last {
            break;
        }
        let clock = Instant::now();
        sim.step().map_err(step_error(&sim))?;
        report.step_seconds.push((sim.steps(), clock.elapsed().as_secs_f64()));
    }
    if let Some(d) = dir {
        write_csv(d.join("records.csv"), &report.records)?;
        if !report.adaptations.is_empty() {
            write_csv(d.join("adapt.csv"), &report.adaptations)?;
        }
        let timings: Vec<Timing> = report
            .step_seconds
            .iter()
            .map(|&(step, seconds)| Timing { step, seconds })
            .collect();
        write_csv(d.join("timings.csv"), &timings)?;
    }
    Ok(report)
}

#[derive(Serialize)]
struct Timing {
    step: usize,
    seconds: f64,
}

/// Builds and runs a config.
pub fn run(cfg: &Config) -> Result<RunReport, DriverError> {
    let setup = Setup::new(cfg)?;
    run_with(cfg, &setup, |_| Ok(()))
}
