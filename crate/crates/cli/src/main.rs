//! `quadpilot` command-line experiment runner.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 the guard
//! tripped during a run, 3 runtime failure.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use quadpilot::harness::{
    compute_rmse, latency_sweep, read_state_log, run_experiment, ExperimentConfig, HarnessError,
};
use quadpilot::references::{trajectory_load_file, trajectory_save, LoopShape, LoopTrajectory, SampledTrajectory};
use quadpilot::simulator::IntegratorKind;
use quadpilot::QuadrotorModel;

const GUARD_ABORT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "quadpilot",
    version,
    about = "Closed-loop quadrotor flight-stack experiments",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

/// Overrides shared by `run` and `sweep`.
#[derive(clap::Args)]
struct ExperimentArgs {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for logs and the summary.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration scheme: rk4, euler or symplectic.
    #[arg(long)]
    integrator: Option<IntegratorKind>,
    /// Simulated duration [s].
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one closed-loop experiment and print its summary.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Command transport latency [s].
        #[arg(long, allow_negative_numbers = true)]
        latency: Option<f64>,
    },
    /// Run the experiment once per latency and print the RMSE table (CSV).
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated latencies [s], at least two.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        latency: Vec<f64>,
    },
    /// Generate a circle or lemniscate reference and write it as CSV.
    GenTraj {
        #[arg(value_enum)]
        shape: Shape,
        /// Radius (circle) or half-width (lemniscate) [m].
        #[arg(long)]
        size: f64,
        /// Cruise speed [m/s].
        #[arg(long)]
        speed: f64,
        /// Flight height [m].
        #[arg(long, default_value_t = 2.0)]
        z: f64,
        #[arg(long, default_value_t = 1.0)]
        laps: f64,
        /// Duration of the start and end speed ramps [s].
        #[arg(long, default_value_t = 0.0)]
        ramp: f64,
        /// Constant yaw [rad]; defaults to the shape's heading.
        #[arg(long, allow_negative_numbers = true)]
        yaw: Option<f64>,
        /// Centre as `x,y` [m].
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.0])]
        center: Vec<f64>,
        /// Take the vehicle model from this experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a trajectory file and its feasibility for the vehicle model.
    ValidateTraj {
        file: PathBuf,
        /// Take the vehicle model from this experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Tracking metrics of a state log against a reference.
    Metrics {
        /// State log written by `run`.
        #[arg(long)]
        log: PathBuf,
        /// Reference trajectory file.
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        reference: Option<PathBuf>,
        /// Use the reference of this experiment config instead.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Circle,
    Lemniscate,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn model_from(path: Option<&Path>) -> Result<QuadrotorModel, HarnessError> {
    Ok(load_config(path)?.model)
}

fn experiment_config(args: &ExperimentArgs, latency: Option<f64>) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(kind) = args.integrator {
        cfg.integrator = kind;
    }
    if let Some(d) = args.duration {
        cfg.duration = d;
    }
    if let Some(l) = latency {
        cfg.latency = l;
    }
    cfg.validate().map_err(|e| match e {
        HarnessError::Config { message, .. } => HarnessError::Config {
            path: args.config.clone().unwrap_or_else(|| PathBuf::from("<command line>")),
            message,
        },
        other => other,
    })?;
    Ok(cfg)
}

fn run(exp: &ExperimentArgs, latency: Option<f64>) -> Result<ExitCode, HarnessError> {
    let cfg = experiment_config(exp, latency)?;
    let out = run_experiment(&cfg)?;
    print!("{}", out.summary(&cfg));
    if let Some(dir) = &cfg.output_dir {
        println!("\nlogs written to {}", dir.display());
    }
    if out.guard_aborted() {
        eprintln!("guard tripped: the run finished on the backup pipeline");
        return Ok(ExitCode::from(GUARD_ABORT));
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(exp: &ExperimentArgs, latencies: &[f64]) -> Result<ExitCode, HarnessError> {
    let cfg = experiment_config(exp, None)?;
    if let Some(bad) = latencies.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(HarnessError::Usage(format!("latency must be >= 0, got {bad}")));
    }
    let table = latency_sweep(&cfg, latencies)?;
    print!("{}", table.to_csv());
    if table.rows.iter().any(|r| r.metrics.guard_events > 0) {
        eprintln!("guard tripped in at least one run");
        return Ok(ExitCode::from(GUARD_ABORT));
    }
    Ok(ExitCode::SUCCESS)
}

/// Rotor-thrust range of a trajectory and the number of setpoints outside
/// the model's limits.
fn thrust_check(traj: &SampledTrajectory, model: &QuadrotorModel) -> (f64, f64, usize) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut bad = 0;
    for sp in traj.setpoints() {
        let f = sp.input.single_rotor_thrusts().unwrap_or(sp.state.fd);
        lo = lo.min(f.min());
        hi = hi.max(f.max());
        bad += (f.min() < model.f_min || f.max() > model.f_max) as usize;
    }
    (lo, hi, bad)
}

#[allow(clippy::too_many_arguments)]
fn gen_traj(
    shape: Shape,
    size: f64,
    speed: f64,
    z: f64,
    laps: f64,
    ramp: f64,
    yaw: Option<f64>,
    center: &[f64],
    config: Option<&Path>,
    out: Option<&Path>,
) -> Result<ExitCode, HarnessError> {
    if center.len() != 2 {
        return Err(HarnessError::Usage(format!("--center takes x,y, got {} values", center.len())));
    }
    let model = model_from(config)?;
    let shape_spec = LoopTrajectory {
        shape: match shape {
            Shape::Circle => LoopShape::Circle,
            Shape::Lemniscate => LoopShape::Lemniscate,
        },
        center: [center[0], center[1]],
        size,
        speed,
        z,
        laps,
        ramp_time: ramp,
        yaw,
    };
    let traj = shape_spec.generate(&model)?;
    let (lo, hi, bad) = thrust_check(&traj, &model);
    if bad > 0 {
        eprintln!(
            "warning: {bad} setpoints need rotor thrusts outside [{}, {}] N (range {lo:.3} to {hi:.3} N)",
            model.f_min, model.f_max
        );
    }
    match out {
        Some(path) => {
            trajectory_save(&traj, File::create(path)?)?;
            eprintln!("{} setpoints over {:.3} s written to {}", traj.len(), traj.duration(), path.display());
        }
        None => trajectory_save(&traj, io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn validate_traj(file: &Path, config: Option<&Path>) -> Result<ExitCode, HarnessError> {
    let model = model_from(config)?;
    let traj = trajectory_load_file(file).map_err(|e| HarnessError::Trajectory {
        path: file.to_path_buf(),
        source: e,
    })?;
    let (lo, hi, bad) = thrust_check(&traj, &model);
    let max_speed = traj.setpoints().iter().map(|s| s.state.v.norm()).fold(0.0, f64::max);
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{}: {} setpoints", file.display(), traj.len())?;
    writeln!(stdout, "time span      [{}, {}] s", traj.t_start(), traj.t_end())?;
    writeln!(stdout, "max speed      {max_speed:.4} m/s")?;
    writeln!(stdout, "rotor thrust   [{lo:.4}, {hi:.4}] N (limits [{}, {}] N)", model.f_min, model.f_max)?;
    if bad > 0 {
        writeln!(stdout, "infeasible     {bad} setpoints exceed the rotor limits")?;
        return Ok(ExitCode::from(1));
    }
    writeln!(stdout, "feasible")?;
    Ok(ExitCode::SUCCESS)
}

fn metrics(log: &Path, reference: Option<&Path>, config: Option<&Path>) -> Result<ExitCode, HarnessError> {
    let reference = match (reference, config) {
        (Some(path), _) => trajectory_load_file(path).map_err(|e| HarnessError::Trajectory {
            path: path.to_path_buf(),
            source: e,
        })?,
        (None, Some(cfg)) => ExperimentConfig::load(cfg)?.reference()?,
        (None, None) => return Err(HarnessError::Usage("pass --reference or --config".into())),
    };
    let file = File::open(log).map_err(|e| HarnessError::Usage(format!("{}: {e}", log.display())))?;
    let states = read_state_log(file).map_err(|e| HarnessError::Usage(format!("{}: {e}", log.display())))?;
    let report = compute_rmse(&states, &reference)?;
    println!("{report}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit code 2 is reserved for guard aborts.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Cmd::Run { exp, latency } => run(exp, *latency),
        Cmd::Sweep { exp, latency } => sweep(exp, latency),
        Cmd::GenTraj {
            shape,
            size,
            speed,
            z,
            laps,
            ramp,
            yaw,
            center,
            config,
            out,
        } => gen_traj(*shape, *size, *speed, *z, *laps, *ramp, *yaw, center, config.as_deref(), out.as_deref()),
        Cmd::ValidateTraj { file, config } => validate_traj(file, config.as_deref()),
        Cmd::Metrics { log, reference, config } => metrics(log, reference.as_deref(), config.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
