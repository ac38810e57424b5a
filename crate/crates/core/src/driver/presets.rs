//! Named configurations for the benchmark experiments.
//!
//! Each builder takes the knobs that the convergence and comparison runs
//! vary; [`preset`] maps a name to the builder's default arguments.

use crate::adaptivity::AdaptParams;
use crate::diagnostics::Axis;
use crate::imex::{Bootstrap, Scheme};
use crate::linalg::SolverOptions;
use crate::mesh::Diagonal;
use crate::models::{
    cyclic_matrix, potential_to_m, segregation_matrix, time_from_ms, AlievPanfilovParams, ManufacturedCase, Profile,
    Rect, Stimulus, TimeProfile,
};
use crate::par::Execution;
use crate::problem::{BoundaryCondition, BoundaryValue};

use super::config::{
    BoundaryConfig, Config, DiffusivityConfig, InitialConfig, MeshConfig, ModelConfig, OrdersConfig, OutputConfig,
    Patch, RegionDiffusivity, RegionRule, TimeConfig, WavefrontConfig,
};
use super::DriverError;

pub const NAMES: [&str; 8] = [
    "smooth",
    "bump",
    "bump-uniform",
    "checkerboard",
    "wave",
    "segregation",
    "cyclic",
    "aliev-panfilov",
];

pub fn preset(name: &str) -> Result<Config, DriverError> {
    Ok(match name {
        "smooth" => smooth(5, 1),
        "bump" => bump(8, 1, Some(AdaptParams::default())),
        "bump-uniform" => bump(8, 4, None),
        "checkerboard" => checkerboard(20),
        "wave" => wave(1),
        "segregation" => segregation(),
        "cyclic" => cyclic(),
        "aliev-panfilov" => aliev_panfilov(AP_DIFFUSIVITY),
        other => return Err(DriverError::UnknownPreset(other.to_string())),
    })
}

fn square(nx: usize, diagonal: Diagonal) -> MeshConfig {
    MeshConfig::Structured {
        nx,
        ny: nx,
        bbox: [-1.0, -1.0, 1.0, 1.0],
        diagonal,
    }
}

fn time(scheme: Scheme, dt: f64, t_end: f64) -> TimeConfig {
    TimeConfig {
        scheme,
        dt,
        t_end,
        bootstrap: Bootstrap::default(),
        internal_substeps: 4,
    }
}

fn iso(d: f64) -> Option<DiffusivityConfig> {
    Some(DiffusivityConfig {
        default: Some(d),
        regions: Vec::new(),
    })
}

fn base(mesh: MeshConfig, model: ModelConfig, initial: InitialConfig, time: TimeConfig, k: usize) -> Config {
    Config {
        mesh,
        regions: Vec::new(),
        diffusivity: None,
        boundary: BoundaryConfig::default(),
        model,
        initial,
        time,
        orders: OrdersConfig { initial: k },
        adapt: None,
        output: OutputConfig::default(),
        solver: SolverOptions::default(),
        execution: Execution::default(),
        seed: 0,
    }
}

fn manufactured(profile: Profile, nx: usize, diagonal: Diagonal, k: usize) -> Config {
    let case = ManufacturedCase {
        profile,
        time: TimeProfile::Ramp { t_star: 1.0 },
        d: 1.0,
    };
    let mut c = base(
        square(nx, diagonal),
        ModelConfig::Manufactured { case },
        InitialConfig::Exact,
        time(Scheme::Bdf2, 0.1, 10.0),
        k,
    );
    c.boundary.default = Some(BoundaryCondition::Natural(BoundaryValue::Exact));
    c.output.cadence = 10;
    c
}

/// Smooth manufactured solution on `[-1, 1]^2` with `nx` cells per side.
pub fn smooth(nx: usize, k: usize) -> Config {
    manufactured(Profile::Smooth, nx, Diagonal::Right, k)
}

/// Bump manufactured solution (`r = 0.75`) on a crossed mesh, adaptive
/// when `adapt` is given.
pub fn bump(nx: usize, k: usize, adapt: Option<AdaptParams>) -> Config {
    let mut c = manufactured(Profile::Bump { radius: 0.75 }, nx, Diagonal::Crossed, k);
    c.adapt = adapt;
    c
}

/// Checkerboard Fisher problem: 5x5 patches of side 0.4, `d = 0.1` on
/// the patches of the centre's colour and `d = 0.001` elsewhere.
pub fn checkerboard(nx: usize) -> Config {
    let centre = Rect {
        x0: -0.2,
        y0: -0.2,
        x1: 0.2,
        y1: 0.2,
    };
    let mut c = base(
        square(nx, Diagonal::Left),
        ModelConfig::Fisher,
        InitialConfig::Patches {
            background: vec![0.0],
            patches: vec![Patch {
                rect: centre,
                values: vec![0.5],
            }],
        },
        time(Scheme::Bdf2, 0.1, 6.0),
        1,
    );
    c.regions = vec![RegionRule::Checkerboard {
        origin: [-1.0, -1.0],
        size: 0.4,
        even: 1,
        odd: 2,
    }];
    c.diffusivity = Some(DiffusivityConfig {
        default: None,
        regions: vec![
            RegionDiffusivity {
                tag: 1,
                d: Some(0.1),
                tensor: None,
            },
            RegionDiffusivity {
                tag: 2,
                d: Some(0.001),
                tensor: None,
            },
        ],
    });
    c.output.estimate = false;
    c
}

/// Patch boundaries and diffusivities of the travelling-wave strip.
pub const WAVE_BREAKS: [f64; 4] = [0.6, 1.0, 1.4, 1.8];
pub const WAVE_D: [f64; 5] = [0.02, 0.05, 0.1, 0.2, 0.5];

/// Fisher front crossing five strips of increasing diffusivity; mesh
/// `level` 0, 1, 2 has spacing 0.2, 0.1, 0.05.
pub fn wave(level: usize) -> Config {
    let f = 1usize << level;
    let mut c = base(
        MeshConfig::Structured {
            nx: 20 * f,
            ny: 4 * f,
            bbox: [0.0, 0.0, 4.0, 0.8],
            diagonal: Diagonal::Right,
        },
        ModelConfig::Fisher,
        InitialConfig::Patches {
            background: vec![0.0],
            patches: vec![Patch {
                rect: Rect {
                    x0: -1.0,
                    y0: -1.0,
                    x1: 0.2,
                    y1: 2.0,
                },
                values: vec![1.0],
            }],
        },
        time(Scheme::Bdf2, 0.05, 7.0),
        1,
    );
    c.regions = vec![RegionRule::Strips {
        breaks: WAVE_BREAKS.to_vec(),
        tags: vec![1, 2, 3, 4, 5],
    }];
    c.diffusivity = Some(DiffusivityConfig {
        default: None,
        regions: WAVE_D
            .iter()
            .zip(1..)
            .map(|(&d, tag)| RegionDiffusivity {
                tag,
                d: Some(d),
                tensor: None,
            })
            .collect(),
    });
    c.output.estimate = false;
    c.output.wavefront = Some(WavefrontConfig {
        level: 0.6,
        axis: Axis::X,
        lines: 4,
    });
    c
}

fn three_species(a: Vec<Vec<f64>>, dt: f64, t_end: f64, adapt: AdaptParams) -> Config {
    let mut c = base(
        square(8, Diagonal::Crossed),
        ModelConfig::Competition { a },
        InitialConfig::Random { low: 0.0, high: 1.0 },
        time(Scheme::Bdf2, dt, t_end),
        adapt.order_min,
    );
    c.diffusivity = iso(0.01);
    c.adapt = Some(adapt);
    c.seed = 7;
    c.output.cadence = 10;
    c
}

/// Three-species segregation from a random state.
pub fn segregation() -> Config {
    three_species(segregation_matrix(), 0.1, 20.0, AdaptParams::default())
}

/// Three-species cyclic competition, 200 steps of 0.2, orders 2 to 6.
/// Each species starts dominant on one of three regions meeting at the
/// origin, which seeds a rotating spiral.
pub fn cyclic() -> Config {
    let mut c = three_species(
        cyclic_matrix(),
        0.2,
        40.0,
        AdaptParams {
            theta_min: 0.1,
            theta_max: 0.6,
            order_min: 2,
            order_max: 6,
            cadence: 5,
        },
    );
    let patch = |x0, y0, x1, y1, s: usize| {
        let mut values = vec![0.1; 3];
        values[s] = 1.0;
        Patch {
            rect: Rect { x0, y0, x1, y1 },
            values,
        }
    };
    c.initial = InitialConfig::Patches {
        background: vec![0.1; 3],
        patches: vec![
            patch(-1.1, -1.1, 0.0, 1.1, 0),
            patch(0.0, 0.0, 1.1, 1.1, 1),
            patch(0.0, -1.1, 1.1, 0.0, 2),
        ],
    };
    c
}

/// Diffusivity (mm^2 per unit model time) of the re-entry preset.
pub const AP_DIFFUSIVITY: f64 = 5.0;

/// Stimulus window in ms.
pub const AP_STIMULUS_MS: [f64; 2] = [565.0, 575.0];

/// Planar Aliev-Panfilov wave on a 100 mm square with a cross stimulus
/// in the refractory tail, run in model time to 1000 ms. Orders are k = 1.
/// The stimulus drives m well above 1, where the explicit cubic needs
/// dt of about 0.01.
pub fn aliev_panfilov(d: f64) -> Config {
    let stimulus = Stimulus {
        magnitude: 40.0,
        start: time_from_ms(AP_STIMULUS_MS[0]),
        end: time_from_ms(AP_STIMULUS_MS[1]),
        region: Rect {
            x0: 50.0,
            y0: 67.0,
            x1: 100.0,
            y1: 70.0,
        },
        species: 0,
    };
    let mut c = base(
        MeshConfig::Structured {
            nx: 20,
            ny: 20,
            bbox: [0.0, 0.0, 100.0, 100.0],
            diagonal: Diagonal::Crossed,
        },
        ModelConfig::AlievPanfilov {
            params: AlievPanfilovParams::default(),
            stimuli: vec![stimulus],
        },
        InitialConfig::Patches {
            background: vec![0.0],
            patches: vec![Patch {
                rect: Rect {
                    x0: -1.0,
                    y0: -1.0,
                    x1: 101.0,
                    y1: 3.0,
                },
                values: vec![potential_to_m(-40.0)],
            }],
        },
        time(Scheme::Bdf2, 0.01, time_from_ms(1000.0)),
        1,
    );
    c.diffusivity = iso(d);
    c.output.cadence = 50;
    c.output.estimate = false;
    c
}
