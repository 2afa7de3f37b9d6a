//! Command-line front end. Each command is one pipeline stage and leaves its
//! artifacts, a copy of the resolved config and a `manifest.json` in `--out`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::linalg::{self, csv, LinalgError};
use crate::linearization::{self, LinearizationError, StateSpace};
use crate::reference;
use crate::simulation::{self, ControlUpdate, Disturbance, NoiseScale, SimulationError};
use crate::synthesis::{self, Gains, SynthesisError};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  I/O or other failure
  2  invalid input (config, flags, design parameters)
  3  synthesis failure (uncontrollable, not stabilizable, unstable closed loop)
  4  simulation diverged (artifacts are still written)";

#[derive(Debug, Parser)]
#[command(name = "qip", version, about = "Cart-mounted n-link inverted pendulum: linearize, synthesize, simulate", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Linearize about the configured equilibrium; writes A, B, C, D and summary.json
    Linearize {
        #[command(flatten)]
        io: Io,
        /// Override plant.cart_mass
        #[arg(long)]
        cart_mass: Option<f64>,
    },
    /// Compute a state-feedback gain and reference gain; writes gains.json
    Synthesize {
        #[command(flatten)]
        io: Io,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Read A.csv, B.csv, C.csv, D.csv from this directory instead of linearizing
        #[arg(long)]
        from: Option<PathBuf>,
        #[command(flatten)]
        design: DesignFlags,
        /// Override lqr.r
        #[arg(long)]
        r: Option<f64>,
    },
    /// Simulate the nonlinear closed loop; writes trace.csv and metrics.json
    Simulate {
        #[command(flatten)]
        io: Io,
        /// gains.json produced by `synthesize`
        #[arg(long)]
        gains: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
    },
    /// Pole-placement design, placement and simulation per settling time; writes sweep.json
    Sweep {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        design: DesignFlags,
        /// Settling times to visit, comma-separated
        #[arg(long, value_delimiter = ',')]
        ts_list: Option<Vec<f64>>,
        #[command(flatten)]
        sim: SimFlags,
    },
    /// Run the full pipeline and compare with the bundled reference results
    CheckPaper {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write check.json and the resolved config here
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sim: SimFlags,
    },
}

#[derive(Debug, Args)]
struct Io {
    /// TOML config; built-in defaults when absent
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Lqr,
    Pp,
}

#[derive(Debug, Args)]
struct DesignFlags {
    /// Percent overshoot
    #[arg(long)]
    po: Option<f64>,
    /// Settling time (s)
    #[arg(long)]
    ts: Option<f64>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    far_pole_spacing: Option<f64>,
}

#[derive(Debug, Args)]
struct SimFlags {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    /// Step amplitude (m)
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    step_time: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Enable disturbances with variances 0.01 N² and 1e-9 N²m²
    #[arg(long)]
    disturbance: bool,
    /// Force disturbance variance (implies --disturbance)
    #[arg(long)]
    force_variance: Option<f64>,
    /// Joint torque disturbance variance (implies --disturbance)
    #[arg(long)]
    torque_variance: Option<f64>,
    /// Evaluate the feedback at every integrator stage instead of holding it per step
    #[arg(long)]
    continuous_control: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Linearization(#[from] LinearizationError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("{path}: {source}")]
    Matrix {
        path: PathBuf,
        #[source]
        source: LinalgError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("simulation diverged at t = {time} s: {reason}")]
    Diverged { time: f64, reason: String },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) => 1,
            CliError::Config(_) | CliError::Matrix { .. } | CliError::Json { .. } => 2,
            CliError::Synthesis(e) => match e {
                SynthesisError::InvalidWeights(_)
                | SynthesisError::InvalidDesign(_)
                | SynthesisError::InvalidPoles(_)
                | SynthesisError::DimensionMismatch(_) => 2,
                _ => 3,
            },
            CliError::Simulation(SimulationError::InvalidConfig(_))
            | CliError::Simulation(SimulationError::DimensionMismatch(_)) => 2,
            CliError::Linearization(LinearizationError::DimensionMismatch(_)) => 2,
            CliError::Diverged { .. } => 4,
            _ => 1,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Linearize { io, cart_mass } => cmd_linearize(&io, cart_mass),
        Command::Synthesize { io, method, from, design, r } => {
            cmd_synthesize(&io, method, from.as_deref(), &design, r)
        }
        Command::Simulate { io, gains, sim } => cmd_simulate(&io, &gains, &sim),
        Command::Sweep { io, design, ts_list, sim } => cmd_sweep(&io, &design, ts_list, &sim),
        Command::CheckPaper { config, out, sim } => cmd_check(config.as_deref(), out.as_deref(), &sim),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn apply_design(cfg: &mut RunConfig, d: &DesignFlags) {
    let s = &mut cfg.pole_placement;
    if let Some(v) = d.po {
        s.overshoot_pct = v;
    }
    if let Some(v) = d.ts {
        s.settling_time = v;
    }
    if let Some(v) = d.spread {
        s.spread = v;
    }
    if let Some(v) = d.far_pole_spacing {
        s.far_pole_spacing = v;
    }
}

fn apply_sim(cfg: &mut RunConfig, f: &SimFlags) {
    let s = &mut cfg.simulation;
    if let Some(v) = f.dt {
        s.dt = v;
    }
    if let Some(v) = f.duration {
        s.duration = v;
    }
    if let Some(v) = f.rho {
        s.reference = v;
    }
    if let Some(v) = f.step_time {
        s.step_time = v;
    }
    if let Some(v) = f.seed {
        s.seed = v;
    }
    if f.disturbance || f.force_variance.is_some() || f.torque_variance.is_some() {
        let mut d = s.disturbance.unwrap_or_else(Disturbance::reference);
        if f.force_variance.is_some() || f.torque_variance.is_some() {
            // flags are variances; convert whatever the file said
            d = Disturbance {
                force: f.force_variance.unwrap_or(d.force_std().powi(2)),
                torque: f.torque_variance.unwrap_or(d.torque_std().powi(2)),
                scale: NoiseScale::Variance,
            };
        }
        s.disturbance = Some(d);
    }
    if f.continuous_control {
        s.control_update = ControlUpdate::Continuous;
    }
}

/// Build the linear model from the config's plant and equilibrium.
fn linear_model(cfg: &RunConfig) -> Result<(crate::dynamics::PlantParams, StateSpace)> {
    let plant = cfg.plant_params()?;
    let eq = linearization::find_equilibrium(&plant, cfg.plant.equilibrium.into())?;
    let ss = linearization::linearize(&plant, &eq)?;
    Ok((plant, ss))
}

fn cmd_linearize(io: &Io, cart_mass: Option<f64>) -> Result<()> {
    let mut cfg = load_config(io.config.as_deref())?;
    if let Some(m) = cart_mass {
        cfg.plant.cart_mass = m;
    }
    let (_, ss) = linear_model(&cfg)?;
    let summary = ss.summary()?;
    let out = Output::create(&io.out, "linearize", io.config.as_deref(), &cfg)?;
    out.write("A.csv", &csv::to_csv(&ss.a))?;
    out.write("B.csv", &csv::to_csv(&ss.b))?;
    out.write("C.csv", &csv::to_csv(&ss.c))?;
    out.write("D.csv", &csv::to_csv(&ss.d))?;
    out.write("summary.json", &to_json(&summary))?;
    println!(
        "{} states, controllability rank {}, wrote {}",
        summary.states,
        summary.controllability_rank,
        io.out.display()
    );
    Ok(())
}

fn read_matrix(dir: &Path, name: &str) -> Result<linalg::Matrix> {
    let path = dir.join(name);
    let text = read(&path)?;
    csv::from_csv(&text).map_err(|source| CliError::Matrix { path, source })
}

fn cmd_synthesize(
    io: &Io,
    method: MethodArg,
    from: Option<&Path>,
    design: &DesignFlags,
    r: Option<f64>,
) -> Result<()> {
    let mut cfg = load_config(io.config.as_deref())?;
    apply_design(&mut cfg, design);
    if let Some(r) = r {
        cfg.lqr.r = r;
    }
    let ss = match from {
        Some(dir) => StateSpace::new(
            read_matrix(dir, "A.csv")?,
            read_matrix(dir, "B.csv")?,
            read_matrix(dir, "C.csv")?,
            read_matrix(dir, "D.csv")?,
        )?,
        None => linear_model(&cfg)?.1,
    };
    let gains = match method {
        MethodArg::Lqr => synthesis::lqr_gain(&ss, &cfg.lqr_weights(ss.states())?)?,
        MethodArg::Pp => synthesis::design_pole_placement(&ss, &cfg.pole_design()?)?,
    };
    let out = Output::create(&io.out, "synthesize", io.config.as_deref(), &cfg)?;
    out.write("gains.json", &gains.to_json())?;
    println!("{} gain, N = {:.6}, wrote {}", gains.method, gains.n, io.out.display());
    if let Some(d) = &gains.placement {
        if d.ill_conditioned {
            eprintln!(
                "warning: controllability matrix is ill-conditioned (κ ≈ {:.2e}); placement error {:.2e}",
                d.controllability_condition.unwrap_or(f64::INFINITY),
                d.placement_error
            );
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    outcome: &'a simulation::Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<simulation::ResponseMetrics>,
}

fn cmd_simulate(io: &Io, gains_path: &Path, flags: &SimFlags) -> Result<()> {
    let mut cfg = load_config(io.config.as_deref())?;
    apply_sim(&mut cfg, flags);
    let sim = cfg.simulation()?;
    let plant = cfg.plant_params()?;
    let text = read(gains_path)?;
    let gains = Gains::from_json(&text)
        .map_err(|e| CliError::Json { path: gains_path.into(), message: e.to_string() })?;
    let trace = simulation::simulate(&plant, &gains, &sim)?;
    let metrics = if sim.reference != 0.0 {
        Some(simulation::metrics(&trace, sim.reference, sim.step_time)?)
    } else {
        None
    };
    let out = Output::create(&io.out, "simulate", io.config.as_deref(), &cfg)?;
    out.write("trace.csv", &trace.to_csv())?;
    out.write("metrics.json", &to_json(&MetricsFile { outcome: &trace.outcome, metrics: metrics.clone() }))?;
    if let simulation::Outcome::Diverged { time, reason } = &trace.outcome {
        return Err(CliError::Diverged { time: *time, reason: reason.clone() });
    }
    match metrics {
        Some(m) => println!(
            "stabilized = {}, settling time = {}, wrote {}",
            m.stabilized,
            m.settling_time.map_or("none".into(), |t| format!("{t:.3} s")),
            io.out.display()
        ),
        None => println!("completed {} samples, wrote {}", trace.len(), io.out.display()),
    }
    Ok(())
}

fn cmd_sweep(io: &Io, design: &DesignFlags, ts_list: Option<Vec<f64>>, flags: &SimFlags) -> Result<()> {
    let mut cfg = load_config(io.config.as_deref())?;
    apply_design(&mut cfg, design);
    apply_sim(&mut cfg, flags);
    if let Some(ts) = ts_list {
        cfg.pole_placement.sweep_settling_times = ts;
    }
    let sim = cfg.simulation()?;
    let base = cfg.pole_design()?;
    let (plant, ss) = linear_model(&cfg)?;
    let rows = simulation::sweep_settling_times(&plant, &ss, &base, &cfg.pole_placement.sweep_settling_times, &sim);
    let out = Output::create(&io.out, "sweep", io.config.as_deref(), &cfg)?;
    out.write("sweep.json", &to_json(&rows))?;
    for r in &rows {
        println!(
            "ts = {:>5} s  stabilized = {:<5} {}",
            r.settling_time_design,
            r.stabilized,
            r.failure.as_deref().unwrap_or("")
        );
    }
    Ok(())
}

fn cmd_check(config: Option<&Path>, out_dir: Option<&Path>, flags: &SimFlags) -> Result<()> {
    let mut cfg = load_config(config)?;
    apply_sim(&mut cfg, flags);
    let sim = cfg.simulation()?;
    let report = reference::check(&sim).map_err(|e| CliError::Other(e.to_string()))?;
    print!("{}", report.render());
    if let Some(dir) = out_dir {
        let out = Output::create(dir, "check-paper", config, &cfg)?;
        out.write("check.json", &to_json(&report))?;
    }
    Ok(())
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes") + "\n"
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Provenance record written next to every set of artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub version: String,
    pub timestamp_unix: u64,
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path, command: &str, config: Option<&Path>, cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
        let out = Self { dir: dir.into() };
        out.write("config.toml", &cfg.to_toml())?;
        let manifest = RunManifest {
            command: command.into(),
            config: config.map(Path::to_path_buf),
            out_dir: dir.into(),
            seed: cfg.simulation.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        out.write("manifest.json", &to_json(&manifest))?;
        Ok(out)
    }

    /// Whole-file replace: write a sibling temp file, then rename over.
    fn write(&self, name: &str, contents: &str) -> Result<()> {
        use std::io::Write;
        let path = self.dir.join(name);
        let io_err = |source| CliError::Io { path: path.clone(), source };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io_err)?;
        tmp.write_all(contents.as_bytes()).map_err(io_err)?;
        tmp.persist(&path).map_err(|e| io_err(e.error))?;
        Ok(())
    }
}
