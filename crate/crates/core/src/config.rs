//! System configuration and its flat `key = value` file format.
//!
//! Every key has a default; an empty file yields the canonical settings
//! (10 m faded-zone radius, 2 m LOS radius, hard-core BS process with 1 m
//! exclusion at 0.2 BS per unit area, 1 mobile per unit area, exponents 2/4,
//! fading 3/1, `d0 = 0.01`, 25 dB SNR, 256/16 antenna elements, two hops
//! per codeword and an outage constraint of 0.1).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Region, SectorLayout, SectorModel};
use crate::propagation::{upa_params, AntennaConfig, ChannelParams};

/// Loss of a practical code relative to capacity (1 dB).
pub const DEFAULT_SHANNON_LOSS: f64 = 0.794;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub r_nlos: f64,
    pub r_los: f64,
    pub r_min: f64,
    pub lambda_bs: f64,
    pub lambda_ms: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub m_los: u32,
    pub m_nlos: u32,
    pub d0: f64,
    snr_db: f64,
    snr: f64,
    pub n_bs_elements: u32,
    pub n_ms_elements: u32,
    /// Hops per codeword.
    pub hops: u32,
    pub epsilon_hat: f64,
    pub n_trials: u64,
    /// Extra radius of the BS sampling window beyond `r_nlos`; `None` means
    /// `2 * r_min`.
    pub region_margin: Option<f64>,
    pub sector_model: SectorModel,
    pub psi: f64,
    pub area_samples: usize,
    pub ex_samples: usize,
    pub oracle_draws: usize,
    pub retry_budget: usize,
    pub master_seed: u64,
    pub eq3_literal: bool,
    pub exclude_sector_from_nlos: bool,
    pub shannon_loss: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            r_nlos: 10.0,
            r_los: 2.0,
            r_min: 1.0,
            lambda_bs: 0.2,
            lambda_ms: 1.0,
            alpha_los: 2.0,
            alpha_nlos: 4.0,
            m_los: 3,
            m_nlos: 1,
            d0: 0.01,
            snr_db: 25.0,
            snr: db_to_linear(25.0),
            n_bs_elements: 256,
            n_ms_elements: 16,
            hops: 2,
            epsilon_hat: 0.1,
            n_trials: 10_000,
            region_margin: None,
            sector_model: SectorModel::VoronoiWedge,
            psi: 0.0,
            area_samples: crate::geometry::DEFAULT_AREA_SAMPLES,
            ex_samples: 10_000,
            oracle_draws: 100_000,
            retry_budget: crate::geometry::DEFAULT_RETRY_BUDGET,
            master_seed: 1,
            eq3_literal: false,
            exclude_sector_from_nlos: true,
            shannon_loss: DEFAULT_SHANNON_LOSS,
        }
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

const KEYS: &[&str] = &[
    "r_nlos",
    "r_los",
    "r_min",
    "lambda_bs",
    "lambda_ms",
    "alpha_los",
    "alpha_nlos",
    "m_los",
    "m_nlos",
    "d0",
    "snr_db",
    "n_bs_elements",
    "n_ms_elements",
    "L",
    "epsilon_hat",
    "n_trials",
    "region_margin",
    "sector_model",
    "psi",
    "area_samples",
    "ex_samples",
    "oracle_draws",
    "retry_budget",
    "master_seed",
    "eq3_literal",
    "exclude_sector_from_nlos",
    "shannon_loss",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

impl SystemConfig {
    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    /// Linear SNR, converted once when `snr_db` is set.
    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn set_snr_db(&mut self, db: f64) {
        self.snr_db = db;
        self.snr = db_to_linear(db);
    }

    /// Assigns one key from its textual value. Does not validate
    /// cross-field constraints; see [`SystemConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "r_nlos" => self.r_nlos = parse_num(key, v)?,
            "r_los" => self.r_los = parse_num(key, v)?,
            "r_min" => self.r_min = parse_num(key, v)?,
            "lambda_bs" => self.lambda_bs = parse_num(key, v)?,
            "lambda_ms" => self.lambda_ms = parse_num(key, v)?,
            "alpha_los" => self.alpha_los = parse_num(key, v)?,
            "alpha_nlos" => self.alpha_nlos = parse_num(key, v)?,
            "m_los" => self.m_los = parse_num(key, v)?,
            "m_nlos" => self.m_nlos = parse_num(key, v)?,
            "d0" => self.d0 = parse_num(key, v)?,
            "snr_db" => self.set_snr_db(parse_num(key, v)?),
            "n_bs_elements" => self.n_bs_elements = parse_num(key, v)?,
            "n_ms_elements" => self.n_ms_elements = parse_num(key, v)?,
            "L" => self.hops = parse_num(key, v)?,
            "epsilon_hat" => self.epsilon_hat = parse_num(key, v)?,
            "n_trials" => self.n_trials = parse_num(key, v)?,
            "region_margin" => {
                self.region_margin = if v == "auto" {
                    None
                } else {
                    Some(parse_num(key, v)?)
                }
            }
            "sector_model" => {
                self.sector_model = v.parse().map_err(|e: String| Error::config(key, e))?
            }
            "psi" => self.psi = parse_num(key, v)?,
            "area_samples" => self.area_samples = parse_num(key, v)?,
            "ex_samples" => self.ex_samples = parse_num(key, v)?,
            "oracle_draws" => self.oracle_draws = parse_num(key, v)?,
            "retry_budget" => self.retry_budget = parse_num(key, v)?,
            "master_seed" => self.master_seed = parse_num(key, v)?,
            "eq3_literal" => self.eq3_literal = parse_num(key, v)?,
            "exclude_sector_from_nlos" => self.exclude_sector_from_nlos = parse_num(key, v)?,
            "shannon_loss" => self.shannon_loss = parse_num(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Parses a flat `key = value` document (one pair per line, `#` starts
    /// a comment), then applies `overrides` in order.
    pub fn from_kv_str<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(line, format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(k.trim(), v)?;
        }
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o, "override must look like key=value"))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Flat `key = value` rendering that parses back to an identical config.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let v = match *key {
                "r_nlos" => self.r_nlos.to_string(),
                "r_los" => self.r_los.to_string(),
                "r_min" => self.r_min.to_string(),
                "lambda_bs" => self.lambda_bs.to_string(),
                "lambda_ms" => self.lambda_ms.to_string(),
                "alpha_los" => self.alpha_los.to_string(),
                "alpha_nlos" => self.alpha_nlos.to_string(),
                "m_los" => self.m_los.to_string(),
                "m_nlos" => self.m_nlos.to_string(),
                "d0" => self.d0.to_string(),
                "snr_db" => self.snr_db.to_string(),
                "n_bs_elements" => self.n_bs_elements.to_string(),
                "n_ms_elements" => self.n_ms_elements.to_string(),
                "L" => self.hops.to_string(),
                "epsilon_hat" => self.epsilon_hat.to_string(),
                "n_trials" => self.n_trials.to_string(),
                "region_margin" => self
                    .region_margin
                    .map_or_else(|| "auto".to_string(), |m| m.to_string()),
                "sector_model" => self.sector_model.to_string(),
                "psi" => self.psi.to_string(),
                "area_samples" => self.area_samples.to_string(),
                "ex_samples" => self.ex_samples.to_string(),
                "oracle_draws" => self.oracle_draws.to_string(),
                "retry_budget" => self.retry_budget.to_string(),
                "master_seed" => self.master_seed.to_string(),
                "eq3_literal" => self.eq3_literal.to_string(),
                "exclude_sector_from_nlos" => self.exclude_sector_from_nlos.to_string(),
                "shannon_loss" => self.shannon_loss.to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(s, "{key} = {v}");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(key, reason))
            }
        };
        check(self.d0 > 0.0, "d0", "must be > 0")?;
        check(self.r_los >= self.d0, "r_los", "must be >= d0")?;
        check(self.r_nlos > self.r_los, "r_nlos", "must be > r_los")?;
        check(self.r_min >= 0.0, "r_min", "must be >= 0")?;
        check(self.lambda_bs >= 0.0, "lambda_bs", "must be >= 0")?;
        check(self.lambda_ms >= 0.0, "lambda_ms", "must be >= 0")?;
        check(self.alpha_los > 0.0, "alpha_los", "must be > 0")?;
        check(self.alpha_nlos > 0.0, "alpha_nlos", "must be > 0")?;
        check(self.m_los >= 1, "m_los", "must be >= 1")?;
        check(self.m_nlos >= 1, "m_nlos", "must be >= 1")?;
        check(self.snr_db.is_finite(), "snr_db", "must be finite")?;
        if let Err(Error::Domain(msg)) = upa_params(self.n_bs_elements) {
            return Err(Error::config("n_bs_elements", msg));
        }
        if let Err(Error::Domain(msg)) = upa_params(self.n_ms_elements) {
            return Err(Error::config("n_ms_elements", msg));
        }
        check(self.hops >= 1, "L", "must be >= 1")?;
        check(
            self.epsilon_hat > 0.0 && self.epsilon_hat < 1.0,
            "epsilon_hat",
            "must lie in (0, 1)",
        )?;
        check(self.n_trials >= 1, "n_trials", "must be >= 1")?;
        if let Some(m) = self.region_margin {
            check(m >= 0.0, "region_margin", "must be >= 0 or `auto`")?;
        }
        check(
            (0.0..2.0 * PI).contains(&self.psi),
            "psi",
            "must lie in [0, 2pi)",
        )?;
        check(self.area_samples >= 1, "area_samples", "must be >= 1")?;
        check(self.ex_samples >= 1, "ex_samples", "must be >= 1")?;
        check(self.oracle_draws >= 1, "oracle_draws", "must be >= 1")?;
        check(self.retry_budget >= 1, "retry_budget", "must be >= 1")?;
        check(
            self.shannon_loss > 0.0 && self.shannon_loss <= 1.0,
            "shannon_loss",
            "must lie in (0, 1]",
        )?;
        Ok(())
    }

    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
            r_los: self.r_los,
            r_nlos: self.r_nlos,
            d0: self.d0,
            alpha_los: self.alpha_los,
            alpha_nlos: self.alpha_nlos,
            m_los: self.m_los,
            m_nlos: self.m_nlos,
            snr: self.snr,
        }
    }

    pub fn antennas(&self) -> Result<AntennaConfig> {
        let mut a = AntennaConfig::new(self.n_bs_elements, self.n_ms_elements)?;
        a.literal_azimuth = self.eq3_literal;
        Ok(a)
    }

    pub fn sector_layout(&self) -> Result<SectorLayout> {
        Ok(SectorLayout {
            offset: self.psi,
            sectors_per_bs: self.antennas()?.sectors_per_bs(),
            model: self.sector_model,
            disc_radius: self.r_los,
        })
    }

    /// Window over which base stations are drawn.
    pub fn bs_region(&self) -> Result<Region> {
        Region::disc(self.r_nlos + self.region_margin.unwrap_or(2.0 * self.r_min))
    }

    /// Window over which mobiles are drawn (nothing beyond `r_nlos` reaches
    /// the reference station).
    pub fn mobile_region(&self) -> Result<Region> {
        Region::disc(self.r_nlos)
    }
}

/// Reads `path` and applies `overrides`.
pub fn parse_config<S: AsRef<str>>(path: &Path, overrides: &[S]) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    SystemConfig::from_kv_str(&text, overrides)
}
