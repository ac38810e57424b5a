use serde::{Deserialize, Serialize};

use super::config::{Config, MeshConfig};
use super::run::{run_with, Event, Record, Setup};
use super::DriverError;

/// What is refined between rows of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyMode {
    /// Halve the structured mesh spacing.
    Mesh,
    /// Halve the time step.
    Dt,
    /// Raise the uniform mass order by one.
    Order,
}

impl std::str::FromStr for StudyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mesh" => Ok(StudyMode::Mesh),
            "dt" => Ok(StudyMode::Dt),
            "order" => Ok(StudyMode::Order),
            _ => Err(format!("unknown study mode `{s}` (mesh, dt, order)")),
        }
    }
}

/// Final-time errors of one refinement level; slopes are against the
/// previous row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub level: usize,
    /// `h`, `dt` or `k`.
    pub param: f64,
    pub n_dofs: usize,
    pub mass_l2: f64,
    pub flux_l2: f64,
    pub div_l2: f64,
    pub combined: f64,
    pub energy: f64,
    pub eta: f64,
    pub slope_mass: Option<f64>,
    pub slope_combined: Option<f64>,
    pub slope_energy: Option<f64>,
}

/// `log(e1 / e0) / log(p1 / p0)`.
pub fn slope(p0: f64, e0: f64, p1: f64, e1: f64) -> f64 {
    (e1 / e0).ln() / (p1 / p0).ln()
}

fn refine(cfg: &Config, mode: StudyMode, level: usize) -> Result<(Config, f64), DriverError> {
    let mut c = cfg.clone();
    c.output.cadence = usize::MAX;
    c.output.dir = None;
    c.output.vtk_cadence = None;
    c.output.estimate = true;
    let f = 1usize << level;
    let param = match mode {
        StudyMode::Mesh => match &mut c.mesh {
            MeshConfig::Structured { nx, ny, bbox, .. } => {
                *nx *= f;
                *ny *= f;
                (bbox[2] - bbox[0]) / *nx as f64
            }
            MeshConfig::File { .. } => {
                return Err(DriverError::Config("mesh refinement needs a structured mesh".into()));
            }
        },
        StudyMode::Dt => {
            c.time.dt /= f as f64;
            c.time.dt
        }
        StudyMode::Order => {
            c.adapt = None;
            c.orders.initial += level;
            c.orders.initial as f64
        }
    };
    Ok((c, param))
}

/// Runs `levels` refinements of a manufactured-solution config and
/// tabulates the errors at the final time.
pub fn convergence_study(cfg: &Config, levels: usize, mode: StudyMode) -> Result<Vec<StudyRow>, DriverError> {
    if levels < 2 {
        return Err(DriverError::Config("a convergence study needs at least 2 levels".into()));
    }
    let mut rows: Vec<StudyRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let (mut c, param) = refine(cfg, mode, level)?;
        c.output.cadence = usize::MAX;
        let setup = Setup::new(&c)?;
        if setup.problem.model.exact().is_none() {
            return Err(DriverError::Config("a convergence study needs a manufactured model".into()));
        }
        let mut last: Option<Record> = None;
        run_with(&c, &setup, |e| {
            if let Event::Record(_, r) = e {
                last = Some(r.clone());
            }
            Ok(())
        })?;
        let r = last.expect("the final step is always recorded");
        let get = |v: Option<f64>| v.expect("manufactured runs report errors");
        let mut row = StudyRow {
            level,
            param,
            n_dofs: r.n_dofs,
            mass_l2: get(r.mass_l2),
            flux_l2: get(r.flux_l2),
            div_l2: get(r.div_l2),
            combined: get(r.combined),
            energy: get(r.energy),
            eta: get(r.eta),
            slope_mass: None,
            slope_combined: None,
            slope_energy: None,
        };
        if let Some(p) = rows.last() {
            row.slope_mass = Some(slope(p.param, p.mass_l2, param, row.mass_l2));
            row.slope_combined = Some(slope(p.param, p.combined, param, row.combined));
            row.slope_energy = Some(slope(p.param, p.energy, param, row.energy));
        }
        rows.push(row);
    }
    Ok(rows)
}
