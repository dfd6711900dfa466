//! Seeded Monte Carlo campaigns over topologies and mobile snapshots.
//!
//! Every trial draws its randomness from streams keyed by
//! `(master_seed, trial_index, purpose)`, results are gathered in trial
//! order and reduced sequentially, so outputs do not depend on the width of
//! the worker pool. Runs with the same seed share topologies and mobile
//! draws, which makes comparisons across parameter values paired.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{SystemConfig, DEFAULT_SHANNON_LOSS};
use crate::error::{Error, Result};
use crate::geometry::{sample_ppp, sample_ucp, NetworkTopology};
use crate::numeric::MeanAccumulator;
use crate::outage::{
    conditional_outage, InterfererSnapshot, MobileAverages, OutageKind, OutageParams, OutageResult,
};
use crate::rng::{stream, Purpose};

pub const MIN_TRIALS: u64 = 100;
pub const DEFAULT_BETA_MIN: f64 = 0.1;
pub const DEFAULT_BETA_MAX: f64 = 10.0;
pub const DEFAULT_BETA_STEPS: usize = 21;
pub const DEFAULT_LAMBDA_BS_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

/// How the outage is averaged over mobile locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AverageMode {
    /// Mean of the conditional outage over full snapshots.
    #[default]
    FullMc,
    /// Mean over topologies of the outage with mobiles averaged analytically.
    SemiAnalytic,
}

impl FromStr for AverageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_mc" => Ok(Self::FullMc),
            "semi_analytic" => Ok(Self::SemiAnalytic),
            _ => Err(Error::config(
                "mode",
                format!("expected full_mc or semi_analytic, got `{s}`"),
            )),
        }
    }
}

impl fmt::Display for AverageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FullMc => "full_mc",
            Self::SemiAnalytic => "semi_analytic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub x_label: String,
    pub y_label: String,
    /// Parameter held fixed along the curve, if any.
    pub fixed: Option<(String, f64)>,
    pub rows: Vec<CurveRow>,
}

/// Runs `f` on a pool of `workers` threads (0 picks the machine default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    Ok(pool.install(f))
}

/// `steps` log-spaced points from `min` to `max` inclusive.
pub fn log_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && max.is_finite()) {
        return Err(Error::Domain(format!("bad grid bounds [{min}, {max}]")));
    }
    if steps == 0 || (steps == 1 && max > min) {
        return Err(Error::Domain(format!(
            "grid over [{min}, {max}] needs more than {steps} points"
        )));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.log10(), max.log10());
    Ok((0..steps)
        .map(|i| match i {
            0 => min,
            i if i == steps - 1 => max,
            i => 10f64.powf(a + (b - a) * i as f64 / (steps - 1) as f64),
        })
        .collect())
}

pub fn default_beta_grid() -> Vec<f64> {
    log_grid(DEFAULT_BETA_MIN, DEFAULT_BETA_MAX, DEFAULT_BETA_STEPS).expect("valid default grid")
}

fn sorted_grid(values: &[f64], name: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Domain(format!("{name} grid is empty")));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!(
            "{name} grid value {v} must be positive"
        )));
    }
    let mut out = values.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

fn check_trials(config: &SystemConfig) -> Result<()> {
    if config.n_trials < MIN_TRIALS {
        return Err(Error::config(
            "n_trials",
            format!(
                "campaigns need at least {MIN_TRIALS} trials, got {}",
                config.n_trials
            ),
        ));
    }
    Ok(())
}

fn trial_topology(config: &SystemConfig, trial: u64) -> Result<NetworkTopology> {
    let mut rng = stream(config.master_seed, trial, Purpose::Topology);
    sample_ucp(
        config.lambda_bs,
        config.r_min,
        &config.bs_region()?,
        config.retry_budget,
        config.sector_layout()?,
        &mut rng,
    )
}

/// Topology and interferer snapshot of one trial.
pub fn trial_snapshot(
    config: &SystemConfig,
    trial: u64,
) -> Result<(NetworkTopology, InterfererSnapshot)> {
    let build = || {
        let topology = trial_topology(config, trial)?;
        let region = config.mobile_region()?;
        let sets = (0..config.hops)
            .map(|hop| {
                let mut rng = stream(config.master_seed, trial, Purpose::Mobiles(hop));
                sample_ppp(config.lambda_ms, &region, Some(&topology), hop, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let snapshot = InterfererSnapshot::from_mobiles(
            &sets,
            &topology,
            &config.antennas()?,
            &config.channel(),
        )?;
        Ok((topology, snapshot))
    };
    build().map_err(|e: Error| e.in_trial(trial))
}

fn grid_params(config: &SystemConfig, betas: &[f64]) -> Result<Vec<OutageParams>> {
    betas
        .iter()
        .map(|&b| OutageParams::from_config(config, b))
        .collect()
}

/// Conditional outage of trial `trial_index` at every threshold in `betas`.
pub fn run_trial_grid(config: &SystemConfig, trial_index: u64, betas: &[f64]) -> Result<Vec<f64>> {
    let params = grid_params(config, betas)?;
    let (_, snapshot) = trial_snapshot(config, trial_index)?;
    params
        .iter()
        .map(|p| conditional_outage(&snapshot, p).map(|r| r.value))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_trial(trial_index))
}

pub fn run_trial(config: &SystemConfig, trial_index: u64, beta: f64) -> Result<OutageResult> {
    let params = OutageParams::from_config(config, beta)?;
    let (_, snapshot) = trial_snapshot(config, trial_index)?;
    conditional_outage(&snapshot, &params).map_err(|e| e.in_trial(trial_index))
}

/// Outage with mobiles averaged analytically for the topology of one trial.
pub fn run_topology_grid(
    config: &SystemConfig,
    trial_index: u64,
    betas: &[f64],
) -> Result<Vec<f64>> {
    let params = grid_params(config, betas)?;
    let eval = || {
        let topology = trial_topology(config, trial_index)?;
        let mut rng = stream(config.master_seed, trial_index, Purpose::SectorArea);
        let averages = MobileAverages::estimate(&topology, config, &mut rng)?;
        params
            .iter()
            .map(|p| averages.outage(p).map(|r| r.value))
            .collect::<Result<Vec<_>>>()
    };
    eval().map_err(|e: Error| e.in_trial(trial_index))
}

/// Per-trial rows in trial order; the first failing trial wins.
fn map_trials<F>(config: &SystemConfig, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    let rows: Vec<Result<Vec<f64>>> = (0..config.n_trials).into_par_iter().map(&f).collect();
    rows.into_iter().collect()
}

/// Fraction of trials whose conditional outage is below `eps_hat`, per
/// threshold.
pub fn ccdf_conditional_outage(
    config: &SystemConfig,
    betas: &[f64],
    eps_hat: f64,
) -> Result<CurveTable> {
    check_trials(config)?;
    if !(eps_hat > 0.0 && eps_hat <= 1.0) {
        return Err(Error::config(
            "epsilon_hat",
            format!("must lie in (0, 1], got {eps_hat}"),
        ));
    }
    let betas = sorted_grid(betas, "beta")?;
    let trials = map_trials(config, |t| run_trial_grid(config, t, &betas))?;
    let n = trials.len() as f64;
    let rows = betas
        .iter()
        .enumerate()
        .map(|(i, &beta)| {
            let hits = trials.iter().filter(|row| row[i] < eps_hat).count();
            let y = hits as f64 / n;
            CurveRow {
                x: beta,
                y,
                stderr: (y * (1.0 - y) / n).sqrt(),
            }
        })
        .collect();
    Ok(CurveTable {
        x_label: "beta".into(),
        y_label: "ccdf".into(),
        fixed: Some(("epsilon_hat".into(), eps_hat)),
        rows,
    })
}

/// Location-averaged outage at every threshold in `betas` (in the given
/// order).
pub fn spatially_averaged_outage_grid(
    config: &SystemConfig,
    betas: &[f64],
    mode: AverageMode,
) -> Result<Vec<OutageResult>> {
    check_trials(config)?;
    let trials = match mode {
        AverageMode::FullMc => map_trials(config, |t| run_trial_grid(config, t, betas))?,
        AverageMode::SemiAnalytic => map_trials(config, |t| run_topology_grid(config, t, betas))?,
    };
    Ok((0..betas.len())
        .map(|i| {
            let mut acc = MeanAccumulator::default();
            trials.iter().for_each(|row| acc.push(row[i]));
            OutageResult {
                value: acc.mean(),
                kind: OutageKind::SpatiallyAveraged,
                stderr: Some(acc.stderr()),
            }
        })
        .collect())
}

pub fn spatially_averaged_outage(
    config: &SystemConfig,
    beta: f64,
    mode: AverageMode,
) -> Result<OutageResult> {
    Ok(spatially_averaged_outage_grid(config, &[beta], mode)?[0])
}

/// Rate in bits per channel use supported by threshold `beta`.
pub fn rate_from_threshold(beta: f64) -> f64 {
    rate_with_loss(beta, DEFAULT_SHANNON_LOSS)
}

pub fn rate_with_loss(beta: f64, shannon_loss: f64) -> f64 {
    (shannon_loss * beta).ln_1p() / std::f64::consts::LN_2
}

/// Area spectral efficiency `lambda_bs * R * (1 - p_o)`.
pub fn area_spectral_efficiency(lambda_bs: f64, rate: f64, outage: f64) -> f64 {
    lambda_bs * rate * (1.0 - outage)
}

/// ASE against base-station density, one curve per threshold.
pub fn ase_sweep(
    config: &SystemConfig,
    lambda_bs_grid: &[f64],
    betas: &[f64],
    mode: AverageMode,
) -> Result<Vec<CurveTable>> {
    let lambdas = sorted_grid(lambda_bs_grid, "lambda_bs")?;
    let betas = sorted_grid(betas, "beta")?;
    let mut outages = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let mut cfg = config.clone();
        cfg.lambda_bs = lambda;
        cfg.validate()?;
        outages.push(spatially_averaged_outage_grid(&cfg, &betas, mode)?);
    }
    Ok(betas
        .iter()
        .enumerate()
        .map(|(i, &beta)| {
            let rate = rate_with_loss(beta, config.shannon_loss);
            let rows = lambdas
                .iter()
                .zip(&outages)
                .map(|(&lambda, out)| CurveRow {
                    x: lambda,
                    y: area_spectral_efficiency(lambda, rate, out[i].value),
                    stderr: lambda * rate * out[i].stderr.unwrap_or(0.0),
                })
                .collect();
            CurveTable {
                x_label: "lambda_bs".into(),
                y_label: "ase".into(),
                fixed: Some(("beta".into(), beta)),
                rows,
            }
        })
        .collect())
}

/// Randomized snapshot for checking the closed form against the fading
/// oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationCase {
    pub index: u64,
    pub params: OutageParams,
    pub snapshot: InterfererSnapshot,
}

/// Largest number of interferers in a validation case.
pub const MAX_CASE_INTERFERERS: usize = 20;

/// Case `index`: up to 20 interferers spread over the hops, each LOS with
/// probability 1/4, powers log-uniform over `[1e-3, 1) / L`, `m_los` in
/// {1, 3}, `L` in {1, 2, 4} and `beta` log-uniform over `[0.1, 10]`.
pub fn validation_case(config: &SystemConfig, index: u64) -> Result<ValidationCase> {
    use crate::outage::HopInterference;
    use rand::Rng;

    let mut rng = stream(config.master_seed, index, Purpose::Validation);
    let m_los = [1u32, 3][rng.random_range(0..2)];
    let hops = [1u32, 2, 4][rng.random_range(0..3)];
    let beta = 10f64.powf(rng.random_range(-1.0..=1.0));
    let count = rng.random_range(0..=MAX_CASE_INTERFERERS);
    let mut per_hop = vec![HopInterference::default(); hops as usize];
    for _ in 0..count {
        let hop = &mut per_hop[rng.random_range(0..hops as usize)];
        let w = 10f64.powf(rng.random_range(-3.0..0.0)) / hops as f64;
        if rng.random_bool(0.25) {
            hop.los.push(w);
        } else {
            hop.nlos.push(w);
        }
    }
    let mut channel = config.channel();
    channel.m_los = m_los;
    Ok(ValidationCase {
        index,
        params: OutageParams::new(beta, hops, &channel)?,
        snapshot: InterfererSnapshot::new(per_hop)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseReport {
    pub index: u64,
    pub hops: u32,
    pub m_los: u32,
    pub beta: f64,
    pub interferers: usize,
    pub closed_form: f64,
    pub oracle: f64,
    pub stderr: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the closed form with `config.oracle_draws` fading draws on
/// `cases` randomized snapshots.
pub fn validate_cases(config: &SystemConfig, cases: u64) -> Result<Vec<CaseReport>> {
    let reports: Vec<Result<CaseReport>> = (0..cases)
        .into_par_iter()
        .map(|index| {
            let case = validation_case(config, index)?;
            let closed = conditional_outage(&case.snapshot, &case.params)?.value;
            let mut rng = stream(config.master_seed, index, Purpose::Fading);
            let oracle = crate::outage::outage_oracle(
                &case.snapshot,
                &case.params,
                config.oracle_draws,
                &mut rng,
            )?;
            let stderr = oracle.stderr.unwrap_or(0.0);
            let tolerance = (4.0 * stderr).max(0.01);
            Ok(CaseReport {
                index,
                hops: case.params.hops,
                m_los: case.params.m_los,
                beta: case.params.beta,
                interferers: case
                    .snapshot
                    .hops()
                    .iter()
                    .map(|h| h.los.len() + h.nlos.len())
                    .sum(),
                closed_form: closed,
                oracle: oracle.value,
                stderr,
                tolerance,
                passed: (closed - oracle.value).abs() <= tolerance,
            })
        })
        .collect();
    reports.into_iter().collect()
}
