use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rdmix::adaptivity::AdaptParams;
use rdmix::driver::{convergence_study, presets, run, write_csv, Config, DriverError, Record, StudyMode};
use rdmix::imex::Scheme;

#[derive(Parser)]
#[command(name = "rdmix", version, about = "p-adaptive IMEX mixed FEM reaction-diffusion solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a config file or a named preset.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Refine a manufactured-solution run and print observed slopes.
    Converge {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Refine the mesh (`mesh`), the time step (`dt`) or the order (`order`).
        #[arg(long, default_value = "mesh")]
        mode: StudyMode,
        /// Number of refinement levels.
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Run a benchmark preset; `list` prints the names.
    Bench {
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a preset as a config file.
    Preset { name: String },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset, see `rdmix bench list`.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct Overrides {
    /// Output directory for CSV and VTK files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time scheme: bdf2, bdf3, cnab or ark2.
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    dt: Option<f64>,
    /// Turn p-adaptivity on (default parameters if the config has none) or off.
    #[arg(long)]
    adaptive: Option<Switch>,
    /// Seed for random initial data.
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    fn load(&self) -> Result<Config, DriverError> {
        match (&self.config, &self.preset) {
            (Some(p), _) => Config::load(p),
            (_, Some(n)) => presets::preset(n),
            _ => unreachable!("clap enforces one source"),
        }
    }
}

impl Overrides {
    fn apply(&self, mut c: Config) -> Result<Config, DriverError> {
        if let Some(d) = &self.out {
            c.output.dir = Some(d.clone());
        }
        if let Some(s) = self.scheme {
            c.time.scheme = s;
        }
        if let Some(dt) = self.dt {
            c.time.dt = dt;
        }
        match self.adaptive {
            Some(Switch::On) if c.adapt.is_none() => c.adapt = Some(AdaptParams::default()),
            Some(Switch::Off) => c.adapt = None,
            _ => {}
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4e}"))
}

fn print_records(records: &[Record]) {
    println!(
        "{:>6} {:>10} {:>8} {:>5} {:>11} {:>11} {:>11} {:>11} {:>10}",
        "step", "time", "dofs", "k", "eta", "mass_l2", "energy", "total", "front"
    );
    for r in records {
        println!(
            "{:>6} {:>10.4} {:>8} {:>5} {:>11} {:>11} {:>11} {:>11.5e} {:>10}",
            r.step,
            r.time,
            r.n_dofs,
            format!("{}-{}", r.k_min, r.k_max),
            opt(r.eta),
            opt(r.mass_l2),
            opt(r.energy),
            r.mass_total,
            r.wavefront.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
        );
    }
}

fn simulate(c: &Config) -> Result<(), DriverError> {
    let report = run(c)?;
    print_records(&report.records);
    for a in &report.adaptations {
        println!(
            "adapt step {} t={:.4} eta={:.4e} dofs {} -> {} orders [{}] invariants {}",
            a.step, a.time, a.eta, a.dofs_before, a.dofs_after, a.histogram, a.invariants_ok
        );
    }
    let total: f64 = report.step_seconds.iter().map(|s| s.1).sum();
    let steps = report.step_seconds.last().map_or(0, |s| s.0);
    println!("{steps} steps in {total:.2} s");
    Ok(())
}

fn converge(c: &Config, mode: StudyMode, levels: usize) -> Result<(), DriverError> {
    let rows = convergence_study(c, levels, mode)?;
    println!(
        "{:>5} {:>10} {:>8} {:>11} {:>11} {:>11} {:>11} {:>7} {:>7} {:>7}",
        "level", "param", "dofs", "mass_l2", "combined", "energy", "eta", "s_mass", "s_comb", "s_en"
    );
    let s = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.3}"));
    for r in &rows {
        println!(
            "{:>5} {:>10.4e} {:>8} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>7} {:>7} {:>7}",
            r.level,
            r.param,
            r.n_dofs,
            r.mass_l2,
            r.combined,
            r.energy,
            r.eta,
            s(r.slope_mass),
            s(r.slope_combined),
            s(r.slope_energy)
        );
    }
    if let Some(dir) = &c.output.dir {
        std::fs::create_dir_all(dir).map_err(|e| DriverError::Io(dir.clone(), e))?;
        write_csv(dir.join("convergence.csv"), &rows)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), DriverError> {
    match cli.command {
        Command::Run { source, overrides } => simulate(&overrides.apply(source.load()?)?),
        Command::Converge {
            source,
            overrides,
            mode,
            levels,
        } => converge(&overrides.apply(source.load()?)?, mode, levels),
        Command::Bench { name, overrides } => {
            if name == "list" {
                presets::NAMES.iter().for_each(|n| println!("{n}"));
                return Ok(());
            }
            simulate(&overrides.apply(presets::preset(&name)?)?)
        }
        Command::Preset { name } => {
            print!("{}", presets::preset(&name)?.to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('"', "'").replace('\n', " ");
            eprintln!("error kind={} message=\"{msg}\"", e.kind());
            ExitCode::FAILURE
        }
    }
}
