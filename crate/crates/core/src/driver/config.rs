//! Run configuration, read from TOML.
//!
//! A config has one table per concern. Every table except `mesh`, `model`
//! and `time` may be omitted. See `README.md` for an annotated example.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptivity::AdaptParams;
use crate::diagnostics::Axis;
use crate::imex::{Bootstrap, Scheme};
use crate::linalg::SolverOptions;
use crate::mesh::{Diagonal, MeshFormat, Tag};
use crate::models::{AlievPanfilovParams, ManufacturedCase, Rect, Stimulus};
use crate::par::Execution;
use crate::problem::BoundaryCondition;

use super::DriverError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub mesh: MeshConfig,
    /// Region tagging rules, applied in order to element centroids.
    #[serde(default)]
    pub regions: Vec<RegionRule>,
    /// Omitted for manufactured models, which carry their own `d`.
    #[serde(default)]
    pub diffusivity: Option<DiffusivityConfig>,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub orders: OrdersConfig,
    /// Absent means uniform orders throughout.
    #[serde(default)]
    pub adapt: Option<AdaptParams>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshConfig {
    Structured {
        nx: usize,
        ny: usize,
        /// `[x0, y0, x1, y1]`.
        bbox: [f64; 4],
        #[serde(default)]
        diagonal: Diagonal,
    },
    File {
        path: PathBuf,
        format: MeshFormat,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegionRule {
    Rect {
        tag: Tag,
        rect: Rect,
    },
    /// Square patches of side `size` starting at `origin`, tagged by the
    /// parity of `i + j`.
    Checkerboard {
        origin: [f64; 2],
        size: f64,
        even: Tag,
        odd: Tag,
    },
    /// Vertical strips with boundaries at `breaks` (increasing x).
    Strips {
        breaks: Vec<f64>,
        tags: Vec<Tag>,
    },
}

impl RegionRule {
    pub fn tag(&self, x: [f64; 2]) -> Option<Tag> {
        match self {
            RegionRule::Rect { tag, rect } => rect.contains(x).then_some(*tag),
            RegionRule::Checkerboard { origin, size, even, odd } => {
                let i = ((x[0] - origin[0]) / size).floor() as i64;
                let j = ((x[1] - origin[1]) / size).floor() as i64;
                Some(if (i + j).rem_euclid(2) == 0 { *even } else { *odd })
            }
            RegionRule::Strips { breaks, tags } => {
                let i = breaks.iter().take_while(|b| x[0] > **b).count();
                tags.get(i).copied()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusivityConfig {
    /// Isotropic value for regions without an entry.
    #[serde(default)]
    pub default: Option<f64>,
    #[serde(default)]
    pub regions: Vec<RegionDiffusivity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDiffusivity {
    pub tag: Tag,
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub tensor: Option<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Insulated when absent.
    #[serde(default)]
    pub default: Option<BoundaryCondition>,
    #[serde(default)]
    pub tags: BTreeMap<Tag, BoundaryCondition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Zero {
        #[serde(default = "one")]
        species: usize,
    },
    Fisher,
    Competition {
        a: Vec<Vec<f64>>,
    },
    AlievPanfilov {
        #[serde(default)]
        params: AlievPanfilovParams,
        #[serde(default)]
        stimuli: Vec<Stimulus>,
    },
    Manufactured {
        case: ManufacturedCase,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    /// The manufactured solution at `t = 0`.
    Exact,
    Constant {
        values: Vec<f64>,
    },
    /// `background` everywhere, overridden by the last matching patch.
    Patches {
        background: Vec<f64>,
        patches: Vec<Patch>,
    },
    /// Per-element uniform draws in `[low, high)` from the config seed.
    Random {
        low: f64,
        high: f64,
    },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Constant { values: vec![0.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Patch {
    pub rect: Rect,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default)]
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub bootstrap: Bootstrap,
    #[serde(default = "four")]
    pub internal_substeps: usize,
}

fn four() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersConfig {
    /// Initial uniform mass order.
    pub initial: usize,
}

impl Default for OrdersConfig {
    fn default() -> Self {
        Self { initial: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Steps between records; the final step is always recorded.
    pub cadence: usize,
    pub dir: Option<PathBuf>,
    /// Steps between VTK snapshots; none when absent.
    pub vtk_cadence: Option<usize>,
    pub wavefront: Option<WavefrontConfig>,
    /// Evaluate the estimator at every record.
    pub estimate: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            cadence: 1,
            dir: None,
            vtk_cadence: None,
            wavefront: None,
            estimate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavefrontConfig {
    pub level: f64,
    pub axis: Axis,
    #[serde(default = "four")]
    pub lines: usize,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, DriverError> {
        let cfg: Config = toml::from_str(text).map_err(|e| DriverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DriverError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DriverError::Io(path.to_path_buf(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, DriverError> {
        toml::to_string(self).map_err(|e| DriverError::Config(e.to_string()))
    }

    /// Checks everything that does not need the mesh.
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: String| Err(DriverError::Config(m));
        let t = &self.time;
        if !(t.dt > 0.0 && t.t_end > 0.0 && t.dt <= t.t_end) {
            return bad(format!("need 0 < dt <= t_end, got dt = {}, t_end = {}", t.dt, t.t_end));
        }
        if let Some(a) = &self.adapt {
            a.validate().map_err(|e| DriverError::Config(e.to_string()))?;
            if !(a.order_min..=a.order_max).contains(&self.orders.initial) {
                return bad(format!(
                    "initial order {} outside adaptive bounds {}..={}",
                    self.orders.initial, a.order_min, a.order_max
                ));
            }
        }
        if self.output.cadence == 0 || self.output.vtk_cadence == Some(0) {
            return bad("output cadences must be positive".into());
        }
        if matches!(self.initial, InitialConfig::Exact) && !matches!(self.model, ModelConfig::Manufactured { .. }) {
            return bad("initial kind `exact` needs a manufactured model".into());
        }
        if let MeshConfig::Structured { nx, ny, bbox, .. } = &self.mesh {
            if *nx == 0 || *ny == 0 || bbox[2] <= bbox[0] || bbox[3] <= bbox[1] {
                return bad(format!("degenerate structured mesh {nx}x{ny} on {bbox:?}"));
            }
        }
        if let Some(w) = &self.output.wavefront {
            if w.lines == 0 {
                return bad("wavefront needs at least one sampling line".into());
            }
        }
        Ok(())
    }
}
