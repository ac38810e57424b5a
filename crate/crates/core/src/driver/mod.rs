//! Config-driven runs, convergence studies, benchmark presets and output.

mod config;
mod output;
pub mod presets;
mod run;
mod study;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{
    BoundaryConfig, Config, DiffusivityConfig, InitialConfig, MeshConfig, ModelConfig, OrdersConfig, OutputConfig,
    Patch, RegionDiffusivity, RegionRule, TimeConfig, WavefrontConfig,
};
pub use output::{read_csv, vtk_string, write_csv, write_vtk, VtkFields};
pub use run::{run, run_with, AdaptRecord, Event, Record, RunReport, Setup};
pub use study::{convergence_study, slope, StudyMode, StudyRow};

use crate::adaptivity::AdaptError;
use crate::assembly::AssemblyError;
use crate::diagnostics::DiagError;
use crate::fespace::FeError;
use crate::imex::ImexError;
use crate::mesh::MeshError;
use crate::models::ModelError;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagError),
    #[error("step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: ImexError,
    },
    #[error("adaptation at step {step}: {source}")]
    Adapt {
        step: usize,
        #[source]
        source: AdaptError,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

impl DriverError {
    /// Short stable identifier for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            DriverError::Config(_) => "config",
            DriverError::Io(..) => "io",
            DriverError::Csv(_) => "csv",
            DriverError::Mesh(_) => "mesh",
            DriverError::Fe(_) => "fe",
            DriverError::Assembly(_) => "assembly",
            DriverError::Model(_) => "model",
            DriverError::Diagnostics(_) => "diagnostics",
            DriverError::Step { .. } => "step",
            DriverError::Adapt { .. } => "adapt",
            DriverError::UnknownPreset(_) => "preset",
        }
    }
}
