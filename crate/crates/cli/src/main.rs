//! `hopsim`: runs outage and ASE campaigns and writes CSV results.

mod output;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hopsim_core::experiment::{
    ase_sweep, ccdf_conditional_outage, log_grid, validate_cases, with_workers, AverageMode,
    DEFAULT_BETA_MAX, DEFAULT_BETA_MIN, DEFAULT_BETA_STEPS, DEFAULT_LAMBDA_BS_GRID,
};
use hopsim_core::{parse_config, sample_ucp, stream, Point, Purpose, SystemConfig};

use output::{ase_rows, ccdf_rows, num, Manifest, OutputDir};

/// Share of validation cases that must agree with the oracle.
const VALIDATION_PASS_RATE: f64 = 0.98;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hopsim_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("validation failed: {passed} of {total} cases within tolerance")]
    Validation { passed: usize, total: usize },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        use hopsim_core::Error as E;
        match self {
            CliError::Core(e) => match e.root() {
                E::Config { .. } => 2,
                E::PackingFailure { .. } => 4,
                _ => 3,
            },
            CliError::Validation { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hopsim",
    version,
    about = "Outage and area spectral efficiency of frequency-hopping mmWave networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fraction of trials whose conditional outage is below epsilon_hat, per threshold.
    Ccdf(Common),
    /// Area spectral efficiency against base-station density.
    Ase(AseArgs),
    /// Compare the closed-form outage with the fading oracle on random snapshots.
    Validate(ValidateArgs),
    /// Dump one sampled topology with its sector wedge and zone boundaries.
    Topology(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed; overrides the configuration.
    #[arg(long, env = "HOPSIM_SEED")]
    seed: Option<u64>,
    /// Number of Monte Carlo trials; overrides the configuration.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_BETA_MIN)]
    beta_min: f64,
    #[arg(long, default_value_t = DEFAULT_BETA_MAX)]
    beta_max: f64,
    #[arg(long, default_value_t = DEFAULT_BETA_STEPS)]
    beta_steps: usize,
    /// Worker threads (0 uses every core). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct AseArgs {
    #[command(flatten)]
    common: Common,
    /// Averaging mode: full_mc or semi_analytic.
    #[arg(long, default_value = "full_mc")]
    mode: AverageMode,
    /// Base-station densities, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDA_BS_GRID.to_vec())]
    lambda_bs: Vec<f64>,
}

#[derive(Args, Clone)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Number of randomized snapshots.
    #[arg(long, default_value_t = 200)]
    cases: u64,
}

impl Common {
    fn resolve(&self) -> Result<SystemConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(path, &self.set)?,
            None => SystemConfig::from_kv_str("", &self.set)?,
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.n_trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn betas(&self) -> Result<Vec<f64>, CliError> {
        log_grid(self.beta_min, self.beta_max, self.beta_steps).map_err(|e| {
            CliError::Core(hopsim_core::Error::Config {
                key: "beta".into(),
                reason: e.to_string(),
            })
        })
    }

    fn run_settings(&self) -> serde_json::Value {
        json!({
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
            "beta_steps": self.beta_steps,
        })
    }
}

struct Run {
    command: &'static str,
    config: SystemConfig,
    out: OutputDir,
    run: serde_json::Value,
    started: chrono::DateTime<Utc>,
}

impl Run {
    fn start(command: &'static str, common: &Common) -> Result<Self, CliError> {
        let started = Utc::now();
        let config = common.resolve()?;
        Ok(Self {
            command,
            config,
            out: OutputDir::create(&common.out)?,
            run: common.run_settings(),
            started,
        })
    }

    fn finish(self) -> Result<(), CliError> {
        let manifest = Manifest {
            tool: "hopsim",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.to_string(),
            command_line: std::env::args().collect(),
            master_seed: self.config.master_seed,
            config: self.config.to_kv_string(),
            run: self.run,
            started: self.started,
            finished: Utc::now(),
            outputs: Vec::new(),
        };
        self.out.finish(manifest)
    }
}

fn cmd_ccdf(args: &Common) -> Result<(), CliError> {
    let mut run = Run::start("ccdf", args)?;
    let betas = args.betas()?;
    let cfg = &run.config;
    let table = with_workers(args.workers, || {
        ccdf_conditional_outage(cfg, &betas, cfg.epsilon_hat)
    })??;
    run.out
        .write_csv("ccdf.csv", "beta,ccdf,stderr", &ccdf_rows(&table))?;
    run.finish()
}

fn cmd_ase(args: &AseArgs) -> Result<(), CliError> {
    let mut run = Run::start("ase", &args.common)?;
    run.run["mode"] = json!(args.mode.to_string());
    run.run["lambda_bs"] = json!(args.lambda_bs);
    let betas = args.common.betas()?;
    let cfg = &run.config;
    let curves = with_workers(args.common.workers, || {
        ase_sweep(cfg, &args.lambda_bs, &betas, args.mode)
    })??;
    run.out
        .write_csv("ase.csv", "lambda_bs,beta,ase,stderr", &ase_rows(&curves))?;
    run.finish()
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let mut run = Run::start("validate", &args.common)?;
    run.run = json!({ "cases": args.cases });
    let cfg = &run.config;
    let reports = with_workers(args.common.workers, || validate_cases(cfg, args.cases))??;
    let mut rows = Vec::with_capacity(reports.len());
    for r in &reports {
        println!(
            "case {:>4}: {} L={} m_los={} beta={:.4} n={:>2} closed={:.6} oracle={:.6} |diff|={:.2e} tol={:.2e}",
            r.index,
            if r.passed { "PASS" } else { "FAIL" },
            r.hops,
            r.m_los,
            r.beta,
            r.interferers,
            r.closed_form,
            r.oracle,
            (r.closed_form - r.oracle).abs(),
            r.tolerance
        );
        rows.push(format!(
            "{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.hops,
            r.m_los,
            num(r.beta),
            r.interferers,
            num(r.closed_form),
            num(r.oracle),
            num(r.stderr),
            num(r.tolerance),
            u8::from(r.passed)
        ));
    }
    run.out.write_csv(
        "validate.csv",
        "case,hops,m_los,beta,interferers,closed_form,oracle,stderr,tolerance,pass",
        &rows,
    )?;
    run.finish()?;
    let passed = reports.iter().filter(|r| r.passed).count();
    let total = reports.len();
    println!("{passed}/{total} cases within tolerance");
    if (passed as f64) < VALIDATION_PASS_RATE * total as f64 {
        return Err(CliError::Validation { passed, total });
    }
    Ok(())
}

fn circle(radius: f64, points: usize) -> Vec<Point> {
    (0..=points)
        .map(|i| Point::from_polar(radius, 2.0 * PI * i as f64 / points as f64))
        .collect()
}

fn cmd_topology(args: &Common) -> Result<(), CliError> {
    let mut run = Run::start("topology", args)?;
    let cfg = &run.config;
    let layout = cfg.sector_layout()?;
    let mut rng = stream(cfg.master_seed, 0, Purpose::Topology);
    let topology = sample_ucp(
        cfg.lambda_bs,
        cfg.r_min,
        &cfg.bs_region()?,
        cfg.retry_budget,
        layout,
        &mut rng,
    )?;
    let half = layout.beamwidth() / 2.0;
    let arc = 64;
    let mut wedge = vec![Point::new(0.0, 0.0)];
    wedge.extend((0..=arc).map(|i| {
        let phi = layout.offset - half + 2.0 * half * i as f64 / arc as f64;
        Point::from_polar(cfg.r_nlos, phi)
    }));
    wedge.push(Point::new(0.0, 0.0));
    let (r_los, r_nlos) = (cfg.r_los, cfg.r_nlos);
    run.out.write_points("bs.csv", topology.bs_positions())?;
    run.out.write_points("sector_wedge.csv", &wedge)?;
    run.out
        .write_points("los_boundary.csv", &circle(r_los, 360))?;
    run.out
        .write_points("nlos_boundary.csv", &circle(r_nlos, 360))?;
    run.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ccdf(a) => cmd_ccdf(a),
        Command::Ase(a) => cmd_ase(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Topology(a) => cmd_topology(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hopsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
