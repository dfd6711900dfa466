//! Normalized interferer powers and outage probabilities.
//!
//! The conditional outage is the alternating binomial sum obtained by
//! substituting the Alzer lower bound on the gamma CDF of the combined
//! reference-link fading. That sum is evaluated first with compensated
//! summation and a running error bound. When the bound is not small relative
//! to the result (tiny outage values lose all their digits to cancellation)
//! the same quantity is re-evaluated through a cancellation-free recursion:
//!
//! with `X = 1 - e^-W`, `Y = e^-W` and `W` the total (scaled) interference,
//! the outage equals `E[X^M]`. Adding one gamma-faded interferer `V` maps
//! `X' = X + Y Z`, `Y' = Y (1 - Z)` with `Z = 1 - e^-V`, so every moment
//! `E[X^p Y^(M-p)]` updates through nonnegative weights
//! `E[Z^j (1 - Z)^q]`, which have a closed form in terms of complete
//! homogeneous symmetric polynomials for integer fading order.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{
    in_reference_sector, split_sector_area, Estimate, MobileSet, NetworkTopology, Region,
};
use crate::numeric::{binomial, ln_factorial, order_free_sum, CompensatedSum, MeanAccumulator};
use crate::propagation::{
    receive_gain, transmit_gain, zone_of, AntennaConfig, ChannelParams, Zone,
};
use crate::Point;

/// Relative error bound above which the alternating sum is not trusted.
pub const SUM_TOLERANCE: f64 = 1e-13;
/// Slack allowed outside `[0, 1]` before a result is rejected.
const RANGE_SLACK: f64 = 1e-9;
/// Minimum number of fading draws accepted by [`outage_oracle`].
pub const MIN_ORACLE_DRAWS: usize = 10_000;

/// Normalized powers received during one hop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HopInterference {
    pub los: Vec<f64>,
    pub nlos: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfererSnapshot {
    hops: Vec<HopInterference>,
}

impl InterfererSnapshot {
    pub fn new(hops: Vec<HopInterference>) -> Result<Self> {
        if hops.is_empty() {
            return Err(Error::Domain("a snapshot needs at least one hop".into()));
        }
        let bad = hops
            .iter()
            .flat_map(|h| h.los.iter().chain(&h.nlos))
            .find(|w| !(w.is_finite() && **w >= 0.0));
        if let Some(w) = bad {
            return Err(Error::Domain(format!(
                "normalized power must be finite and >= 0, got {w}"
            )));
        }
        Ok(Self { hops })
    }

    /// `hops` hops without interferers.
    pub fn quiet(hops: u32) -> Self {
        Self {
            hops: vec![HopInterference::default(); hops.max(1) as usize],
        }
    }

    /// Normalized powers of every mobile in `sets` (one set per hop).
    pub fn from_mobiles(
        sets: &[MobileSet],
        topology: &NetworkTopology,
        antennas: &AntennaConfig,
        channel: &ChannelParams,
    ) -> Result<Self> {
        let hops = sets.len() as u32;
        let mut out = Vec::with_capacity(sets.len());
        for set in sets {
            let mut hop = HopInterference::default();
            for &x in &set.positions {
                match zone_of(x.norm(), channel) {
                    Zone::Los => hop
                        .los
                        .push(normalized_power(x, topology, antennas, channel, hops)?),
                    Zone::Nlos => hop
                        .nlos
                        .push(normalized_power(x, topology, antennas, channel, hops)?),
                    Zone::Blocked => {}
                }
            }
            out.push(hop);
        }
        Self::new(out)
    }

    pub fn hops(&self) -> &[HopInterference] {
        &self.hops
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    fn flattened(&self) -> (Vec<f64>, Vec<f64>) {
        let mut los: Vec<f64> = self
            .hops
            .iter()
            .flat_map(|h| h.los.iter().copied())
            .collect();
        let mut nlos: Vec<f64> = self
            .hops
            .iter()
            .flat_map(|h| h.nlos.iter().copied())
            .collect();
        los.sort_unstable_by(f64::total_cmp);
        nlos.sort_unstable_by(f64::total_cmp);
        (los, nlos)
    }
}

/// Threshold and fading orders entering the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageParams {
    pub beta: f64,
    pub hops: u32,
    pub m_los: u32,
    pub m_nlos: u32,
    pub snr: f64,
}

impl OutageParams {
    pub fn new(beta: f64, hops: u32, channel: &ChannelParams) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        if hops == 0 {
            return Err(Error::Domain("hops per codeword must be >= 1".into()));
        }
        channel.validate()?;
        Ok(Self {
            beta,
            hops,
            m_los: channel.m_los,
            m_nlos: channel.m_nlos,
            snr: channel.snr,
        })
    }

    pub fn from_config(config: &SystemConfig, beta: f64) -> Result<Self> {
        Self::new(beta, config.hops, &config.channel())
    }

    /// Gamma order of the reference fading summed over the codeword.
    pub fn order(&self) -> u32 {
        self.m_los * self.hops
    }

    /// `(M!)^(-1/M)`.
    pub fn m_tilde(&self) -> f64 {
        let m = self.order();
        (-ln_factorial(m) / m as f64).exp()
    }

    /// `M * M~ * beta`, the common scale of every exponent.
    fn scale(&self) -> f64 {
        self.order() as f64 * self.m_tilde() * self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutageKind {
    ConditionalOnOmega,
    ConditionalOnBs,
    SpatiallyAveraged,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageResult {
    pub value: f64,
    pub kind: OutageKind,
    /// Standard error, for Monte Carlo kinds.
    pub stderr: Option<f64>,
}

/// Power of the mobile at `x` received by the reference sector, normalized
/// by the mean power its serving station receives.
pub fn normalized_power(
    x: Point,
    topology: &NetworkTopology,
    antennas: &AntennaConfig,
    channel: &ChannelParams,
    hops: u32,
) -> Result<f64> {
    let serving = topology.bs_positions()[topology.serving_index(x, channel)];
    let a = receive_gain(x.arg(), topology.sectors().offset, antennas);
    let b = transmit_gain(x, serving, antennas)?;
    let ratio = channel.gain(x.norm()) / channel.gain((serving - x).norm());
    Ok(a * b / (antennas.bs.main_gain * antennas.ms.main_gain) * ratio / hops as f64)
}

/// Alzer lower bound on the CDF of a unit-mean gamma variable of integer
/// order `m`.
pub fn alzer_cdf(z: f64, m: u32) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let m_f = m as f64;
    let k = m_f * (-ln_factorial(m) / m_f).exp();
    (-(-k * z).exp_m1()).powi(m as i32)
}

/// Result of the compensated alternating sum with its error bound.
struct BoundedSum {
    value: f64,
    error: f64,
}

/// `1 - sum_{l=1}^{M} C(M,l) (-1)^(l+1) exp(-E_l)` for exponents `E_l`.
fn alternating_sum(order: u32, exponents: &[f64]) -> BoundedSum {
    let u = f64::EPSILON;
    let mut acc = CompensatedSum::new();
    acc.add(1.0);
    let mut error = 4.0 * u;
    for l in 1..=order {
        let e = exponents[(l - 1) as usize];
        let sign = if l % 2 == 1 { -1.0 } else { 1.0 };
        let term = sign * binomial(order, l) * (-e).exp();
        error += term.abs() * 8.0 * u * (1.0 + e);
        acc.add(term);
    }
    error += 2.0 * u * acc.abs_total();
    BoundedSum {
        value: acc.value(),
        error,
    }
}

/// Moments `E[X^p Y^(M-p)]`, `p = 0..=M`, for a deterministic exponent.
fn initial_moments(a: f64, order: usize) -> Vec<f64> {
    let x = -(-a).exp_m1();
    let y = (-a).exp();
    (0..=order)
        .map(|p| x.powi(p as i32) * y.powi((order - p) as i32))
        .collect()
}

/// Adds `weight * E[Z^j (1-Z)^q]` into `table[q][j]` for the interferer
/// `V = c G`, `G ~ Gamma(m, 1)`.
fn accumulate_weights(table: &mut [Vec<f64>], c: f64, m: usize, weight: f64) {
    let order = table.len() - 1;
    let mut h = vec![0.0; m];
    for (q, row) in table.iter_mut().enumerate() {
        h.iter_mut().for_each(|v| *v = 0.0);
        h[0] = 1.0;
        // g = j! c^j prod_{r<=j} 1/(1+(q+r)c)
        let mut g = 1.0;
        for (j, cell) in row.iter_mut().enumerate().take(order - q + 1) {
            let y = 1.0 / (1.0 + (q + j) as f64 * c);
            g *= if j == 0 { y } else { j as f64 * c * y };
            for k in 1..m {
                h[k] += y * h[k - 1];
            }
            *cell += weight * g * h[m - 1];
        }
    }
}

fn weight_table(order: usize) -> Vec<Vec<f64>> {
    (0..=order).map(|q| vec![0.0; order - q + 1]).collect()
}

fn step_moments(moments: &[f64], table: &[Vec<f64>], binom: &[Vec<f64>]) -> Vec<f64> {
    let order = moments.len() - 1;
    (0..=order)
        .map(|p| {
            let row = &table[order - p];
            (0..=p).map(|j| binom[p][j] * moments[p - j] * row[j]).sum()
        })
        .collect()
}

fn binomial_rows(order: usize) -> Vec<Vec<f64>> {
    (0..=order)
        .map(|p| (0..=p).map(|j| binomial(p as u32, j as u32)).collect())
        .collect()
}

fn finish(value: f64, kind: OutageKind) -> Result<OutageResult> {
    if !value.is_finite() || !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&value) {
        return Err(Error::NumericalInstability(format!(
            "outage evaluated to {value} outside [0, 1]"
        )));
    }
    Ok(OutageResult {
        value: value.clamp(0.0, 1.0),
        kind,
        stderr: None,
    })
}

/// Outage conditioned on the normalized powers of all interferers.
pub fn conditional_outage(
    snapshot: &InterfererSnapshot,
    params: &OutageParams,
) -> Result<OutageResult> {
    if snapshot.len() != params.hops as usize {
        return Err(Error::Domain(format!(
            "snapshot has {} hops but the codeword spans {}",
            snapshot.len(),
            params.hops
        )));
    }
    let (mut los, nlos) = snapshot.flattened();
    let order = params.order();
    let scale = params.scale();
    let m = params.m_nlos as f64;
    let a = scale * (1.0 / params.snr + order_free_sum(&mut los));
    let c: Vec<f64> = nlos.iter().map(|w| scale * w / m).collect();

    let exponents: Vec<f64> = (1..=order)
        .map(|l| {
            let lf = l as f64;
            let nl: CompensatedSum = c.iter().map(|ci| (lf * ci).ln_1p()).collect();
            lf * a + m * nl.value()
        })
        .collect();
    let direct = alternating_sum(order, &exponents);
    if direct.value > 0.0 && direct.error <= SUM_TOLERANCE * direct.value {
        return finish(direct.value, OutageKind::ConditionalOnOmega);
    }

    let order = order as usize;
    let binom = binomial_rows(order);
    let mut moments = initial_moments(a, order);
    for &ci in &c {
        let mut table = weight_table(order);
        accumulate_weights(&mut table, ci, params.m_nlos as usize, 1.0);
        moments = step_moments(&moments, &table, &binom);
    }
    finish(moments[order], OutageKind::ConditionalOnOmega)
}

/// Monte Carlo over the fading for a fixed snapshot.
pub fn outage_oracle<R: Rng + ?Sized>(
    snapshot: &InterfererSnapshot,
    params: &OutageParams,
    n_draws: usize,
    rng: &mut R,
) -> Result<OutageResult> {
    if n_draws < MIN_ORACLE_DRAWS {
        return Err(Error::Domain(format!(
            "oracle needs at least {MIN_ORACLE_DRAWS} draws, got {n_draws}"
        )));
    }
    if snapshot.len() != params.hops as usize {
        return Err(Error::Domain(
            "snapshot hop count does not match params".into(),
        ));
    }
    let hops = params.hops as f64;
    let m_los = params.m_los as f64;
    let m_nlos = params.m_nlos as f64;
    let reference =
        Gamma::new(m_los, 1.0 / (m_los * hops)).map_err(|e| Error::Domain(e.to_string()))?;
    let faded = Gamma::new(m_nlos, 1.0 / m_nlos).map_err(|e| Error::Domain(e.to_string()))?;
    let noise = 1.0 / params.snr;
    let los_total: f64 = snapshot.hops.iter().flat_map(|h| &h.los).sum();

    let mut outages = 0usize;
    for _ in 0..n_draws {
        let mut signal = 0.0;
        let mut interference = los_total;
        for hop in &snapshot.hops {
            signal += reference.sample(rng);
            for w in &hop.nlos {
                interference += faded.sample(rng) * w;
            }
        }
        if signal / (noise + interference) < params.beta {
            outages += 1;
        }
    }
    let p = outages as f64 / n_draws as f64;
    Ok(OutageResult {
        value: p,
        kind: OutageKind::Oracle,
        stderr: Some((p * (1.0 - p) / n_draws as f64).sqrt()),
    })
}

/// Single-mobile averages over the LOS and NLOS supports of one topology.
///
/// Holds the support areas (reference sector removed) and the normalized
/// powers of uniformly placed mobiles, so that the location averages for any
/// threshold reuse the same samples.
#[derive(Debug, Clone)]
pub struct MobileAverages {
    pub lambda_ms: f64,
    pub hops: u32,
    pub los_area: Estimate,
    pub nlos_area: Estimate,
    pub los_powers: Vec<f64>,
    pub nlos_powers: Vec<f64>,
}

fn support_samples<R: Rng + ?Sized>(
    region: &Region,
    topology: &NetworkTopology,
    exclude_sector: bool,
    wanted: usize,
    rng: &mut R,
    mut power: impl FnMut(Point) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(wanted);
    let budget = wanted.saturating_mul(100).max(1000);
    for _ in 0..budget {
        if out.len() == wanted {
            break;
        }
        let x = region.sample(rng);
        if exclude_sector && in_reference_sector(x, topology) {
            continue;
        }
        out.push(power(x)?);
    }
    Ok(out)
}

impl MobileAverages {
    pub fn estimate<R: Rng + ?Sized>(
        topology: &NetworkTopology,
        config: &SystemConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let channel = config.channel();
        let antennas = config.antennas()?;
        let hops = config.hops;
        let los_region = Region::disc(config.r_los)?;
        let nlos_region = Region::annulus(config.r_los, config.r_nlos)?;
        let power = |x: Point| normalized_power(x, topology, &antennas, &channel, hops);

        if config.lambda_ms == 0.0 {
            let none = Estimate {
                value: 0.0,
                stderr: 0.0,
            };
            return Ok(Self {
                lambda_ms: 0.0,
                hops,
                los_area: none,
                nlos_area: none,
                los_powers: Vec::new(),
                nlos_powers: Vec::new(),
            });
        }
        let (los_sec, nlos_sec) = split_sector_area(
            topology,
            &Region::disc(config.r_nlos)?,
            config.r_los,
            config.area_samples,
            rng,
        );
        let los_area = Estimate {
            value: los_region.area() - los_sec.value,
            stderr: los_sec.stderr,
        };
        let los_powers = if los_area.value > 0.0 {
            support_samples(&los_region, topology, true, config.ex_samples, rng, power)?
        } else {
            Vec::new()
        };
        let exclude = config.exclude_sector_from_nlos;
        let nlos_area = if exclude {
            Estimate {
                value: nlos_region.area() - nlos_sec.value,
                stderr: nlos_sec.stderr,
            }
        } else {
            Estimate {
                value: nlos_region.area(),
                stderr: 0.0,
            }
        };
        let nlos_powers = if nlos_area.value > 0.0 {
            support_samples(
                &nlos_region,
                topology,
                exclude,
                config.ex_samples,
                rng,
                power,
            )?
        } else {
            Vec::new()
        };

        Ok(Self {
            lambda_ms: config.lambda_ms,
            hops,
            los_area,
            nlos_area,
            los_powers,
            nlos_powers,
        })
    }

    /// Mean LOS interference of one hop.
    pub fn epsilon1(&self) -> Estimate {
        if self.los_powers.is_empty() || self.lambda_ms == 0.0 {
            return Estimate {
                value: 0.0,
                stderr: 0.0,
            };
        }
        let mut acc = MeanAccumulator::default();
        self.los_powers.iter().for_each(|&w| acc.push(w));
        let (mean, se) = (acc.mean(), acc.stderr());
        let area = self.los_area.value.max(0.0);
        Estimate {
            value: self.lambda_ms * area * mean,
            stderr: self.lambda_ms
                * ((area * se).powi(2) + (mean * self.los_area.stderr).powi(2)).sqrt(),
        }
    }

    /// `1 - E_X[(1 + l c Omega)^-m]` over the NLOS support, with its
    /// standard error.
    fn nlos_deficit(&self, l: u32, params: &OutageParams) -> (f64, f64) {
        let m = params.m_nlos as f64;
        let c = l as f64 * params.scale() / m;
        let mut acc = MeanAccumulator::default();
        for &w in &self.nlos_powers {
            acc.push(-(-m * (c * w).ln_1p()).exp_m1());
        }
        (acc.mean(), acc.stderr())
    }

    /// Probability generating functional of the NLOS interference for
    /// summation index `l`.
    pub fn epsilon2(&self, l: u32, params: &OutageParams) -> Estimate {
        if self.nlos_powers.is_empty() || self.lambda_ms == 0.0 {
            return Estimate {
                value: 1.0,
                stderr: 0.0,
            };
        }
        let (deficit, se) = self.nlos_deficit(l, params);
        let area = self.nlos_area.value.max(0.0);
        let value = (-self.lambda_ms * area * deficit).exp();
        Estimate {
            value,
            stderr: value
                * self.lambda_ms
                * ((area * se).powi(2) + (deficit * self.nlos_area.stderr).powi(2)).sqrt(),
        }
    }

    /// Outage conditioned on the base-station layout.
    pub fn outage(&self, params: &OutageParams) -> Result<OutageResult> {
        if params.hops != self.hops {
            return Err(Error::Domain(
                "averages were built for a different hop count".into(),
            ));
        }
        let order = params.order();
        let hops = params.hops as f64;
        let scale = params.scale();
        let a = scale * (1.0 / params.snr + hops * self.epsilon1().value);
        let mass = hops * self.lambda_ms * self.nlos_area.value.max(0.0);
        let active = mass > 0.0 && !self.nlos_powers.is_empty();

        let exponents: Vec<f64> = (1..=order)
            .map(|l| {
                let nlos = if active {
                    mass * self.nlos_deficit(l, params).0
                } else {
                    0.0
                };
                l as f64 * a + nlos
            })
            .collect();
        let direct = alternating_sum(order, &exponents);
        if direct.value > 0.0 && direct.error <= SUM_TOLERANCE * direct.value {
            return finish(direct.value, OutageKind::ConditionalOnBs);
        }

        // compound Poisson over the empirical mark distribution
        let order = order as usize;
        let mut moments = initial_moments(a, order);
        if !active {
            return finish(moments[order], OutageKind::ConditionalOnBs);
        }
        let binom = binomial_rows(order);
        let mut table = weight_table(order);
        let m = params.m_nlos as f64;
        let weight = 1.0 / self.nlos_powers.len() as f64;
        for &w in &self.nlos_powers {
            accumulate_weights(&mut table, scale * w / m, params.m_nlos as usize, weight);
        }
        let last = (mass + 15.0 * mass.sqrt() + 40.0).ceil() as usize;
        let ln_mass = mass.ln();
        let mut ln_fact = 0.0;
        let mut total = CompensatedSum::new();
        for n in 0..=last {
            if n > 0 {
                ln_fact += (n as f64).ln();
                moments = step_moments(&moments, &table, &binom);
            }
            let w = (-mass + n as f64 * ln_mass - ln_fact).exp();
            total.add(w * moments[order]);
        }
        finish(total.value(), OutageKind::ConditionalOnBs)
    }
}

/// Mean LOS interference of one hop for `topology`.
pub fn epsilon1<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<Estimate> {
    Ok(MobileAverages::estimate(topology, config, rng)?.epsilon1())
}

pub fn epsilon2<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    config: &SystemConfig,
    l: u32,
    params: &OutageParams,
    rng: &mut R,
) -> Result<Estimate> {
    if l < 1 || l > params.order() {
        return Err(Error::Domain(format!(
            "summation index {l} outside 1..={}",
            params.order()
        )));
    }
    Ok(MobileAverages::estimate(topology, config, rng)?.epsilon2(l, params))
}

pub fn outage_given_bs<R: Rng + ?Sized>(
    topology: &NetworkTopology,
    config: &SystemConfig,
    params: &OutageParams,
    rng: &mut R,
) -> Result<OutageResult> {
    MobileAverages::estimate(topology, config, rng)?.outage(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_ppp, sample_ucp};
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn channel(m_los: u32, m_nlos: u32, snr: f64) -> ChannelParams {
        ChannelParams {
            m_los,
            m_nlos,
            snr,
            ..SystemConfig::default().channel()
        }
    }

    fn params(beta: f64, hops: u32, m_los: u32) -> OutageParams {
        OutageParams::new(beta, hops, &channel(m_los, 1, 10f64.powf(2.5))).unwrap()
    }

    fn snapshot(hops: Vec<(Vec<f64>, Vec<f64>)>) -> InterfererSnapshot {
        InterfererSnapshot::new(
            hops.into_iter()
                .map(|(los, nlos)| HopInterference { los, nlos })
                .collect(),
        )
        .unwrap()
    }

    /// Plain alternating sum without any numerical safeguards.
    fn naive_sum(s: &InterfererSnapshot, p: &OutageParams) -> f64 {
        let order = p.order();
        let k = order as f64 * p.m_tilde() * p.beta;
        let los: f64 = s.hops().iter().flat_map(|h| &h.los).sum();
        let m = p.m_nlos as f64;
        let mut total = 1.0;
        for l in 1..=order {
            let lf = l as f64;
            let mut term = binomial(order, l) * (-lf * k * (1.0 / p.snr + los)).exp();
            for w in s.hops().iter().flat_map(|h| &h.nlos) {
                term *= (1.0 + lf * k * w / m).powf(-m);
            }
            total -= if l % 2 == 1 { term } else { -term };
        }
        total
    }

    fn random_snapshot(rng: &mut ChaCha8Rng, hops: u32, max: usize) -> InterfererSnapshot {
        let mut out = Vec::new();
        for _ in 0..hops {
            let n = rng.random_range(0..=max);
            let mut h = HopInterference::default();
            for _ in 0..n {
                let w = 10f64.powf(rng.random_range(-3.0..0.0)) / hops as f64;
                if rng.random_bool(0.3) {
                    h.los.push(w);
                } else {
                    h.nlos.push(w);
                }
            }
            out.push(h);
        }
        InterfererSnapshot::new(out).unwrap()
    }

    #[test]
    fn m_tilde_values() {
        let p = params(1.0, 2, 3);
        assert_eq!(p.order(), 6);
        assert!((p.m_tilde() - 720f64.powf(-1.0 / 6.0)).abs() < 1e-15);
        assert!((p.m_tilde() - 0.3340).abs() < 1e-4);
        assert_eq!(params(1.0, 1, 1).m_tilde(), 1.0);
    }

    #[test]
    fn alzer_exponential_case_and_limits() {
        for z in [0.0, 0.1, 1.0, 7.5] {
            assert!((alzer_cdf(z, 1) - (1.0 - (-z).exp())).abs() < 1e-15);
        }
        assert_eq!(alzer_cdf(0.0, 6), 0.0);
        assert!((alzer_cdf(1e3, 6) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alzer_below_gamma_cdf_at_one() {
        // oracle: P(6, 6) = 1 - e^-6 sum_{k<6} 6^k/k!
        let mut s = 0.0;
        let mut t = 1.0;
        for k in 0..6 {
            if k > 0 {
                t *= 6.0 / k as f64;
            }
            s += t;
        }
        let exact = 1.0 - (-6.0f64).exp() * s;
        let bound = alzer_cdf(1.0, 6);
        assert!(bound <= exact);
        assert!(exact - bound < 0.2);
    }

    #[test]
    fn noiseless_quiet_snapshot_is_zero() {
        let p = OutageParams::new(1.0, 2, &channel(3, 1, 1e300)).unwrap();
        let r = conditional_outage(&InterfererSnapshot::quiet(2), &p).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn quiet_snapshot_matches_direct_form() {
        let p = params(1.0, 2, 3);
        let r = conditional_outage(&InterfererSnapshot::quiet(2), &p).unwrap();
        let x = 6.0 * p.m_tilde() / 10f64.powf(2.5);
        let expected = (-(-x).exp_m1()).powi(6);
        assert!((r.value - expected).abs() <= 1e-12 * expected);
        assert!((r.value - 6.4e-14).abs() < 0.1e-14, "{}", r.value);
    }

    #[test]
    fn hop_count_mismatch_is_an_error() {
        let p = params(1.0, 2, 3);
        assert!(conditional_outage(&InterfererSnapshot::quiet(3), &p).is_err());
    }

    #[test]
    fn single_los_interferer_degenerate_fading() {
        // with a near-deterministic reference link the outage switches where
        // beta = 1 / (1/SNR + L * Omega)
        let hops = 2;
        let omega = 0.2;
        let snr = 10f64.powf(2.5);
        let s = snapshot(vec![(vec![omega], vec![]), (vec![omega], vec![])]);
        let beta_star = 1.0 / (1.0 / snr + hops as f64 * omega);
        let ch = channel(200, 1, snr);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let below = OutageParams::new(0.8 * beta_star, hops, &ch).unwrap();
        let above = OutageParams::new(1.2 * beta_star, hops, &ch).unwrap();
        assert!(outage_oracle(&s, &below, 20_000, &mut rng).unwrap().value < 0.01);
        assert!(outage_oracle(&s, &above, 20_000, &mut rng).unwrap().value > 0.99);
    }

    #[test]
    fn oracle_small_beta_and_seed_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_snapshot(&mut rng, 2, 10);
        let p = params(1e-6, 2, 3);
        assert_eq!(outage_oracle(&s, &p, 10_000, &mut rng).unwrap().value, 0.0);
        let p = params(2.0, 2, 3);
        let a = outage_oracle(&s, &p, 20_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = outage_oracle(&s, &p, 20_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let se = (a.stderr.unwrap().powi(2) + b.stderr.unwrap().powi(2)).sqrt();
        assert!((a.value - b.value).abs() <= 4.0 * se.max(1e-12));
        assert!(outage_oracle(&s, &p, 9_999, &mut rng).is_err());
    }

    #[test]
    fn oracle_fading_means() {
        // unit-mean conventions of the two fading laws
        let m_los = 3.0;
        let hops = 2.0;
        let reference = Gamma::new(m_los, 1.0 / (m_los * hops)).unwrap();
        let faded = Gamma::new(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut h = MeanAccumulator::default();
        let mut e = MeanAccumulator::default();
        for _ in 0..n {
            h.push(reference.sample(&mut rng) + reference.sample(&mut rng));
            e.push(faded.sample(&mut rng));
        }
        assert!((h.mean() - 1.0).abs() < 3.0 * h.stderr());
        assert!((e.mean() - 1.0).abs() < 3.0 * e.stderr());
    }

    #[test]
    fn stable_route_matches_naive_sum_when_well_conditioned() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut checked = 0;
        for _ in 0..300 {
            let hops = [1, 2, 4][rng.random_range(0..3)];
            let s = random_snapshot(&mut rng, hops, 15);
            let m_nlos = rng.random_range(1..=3);
            let beta = 10f64.powf(rng.random_range(-1.0..1.0));
            let p = OutageParams::new(beta, hops, &channel(rng.random_range(1..=3), m_nlos, 316.0))
                .unwrap();
            let naive = naive_sum(&s, &p);
            if naive < 1e-3 {
                continue;
            }
            // force the recursion by evaluating it directly
            let (mut los, nlos) = s.flattened();
            let order = p.order() as usize;
            let m = p.m_nlos as f64;
            let a = p.scale() * (1.0 / p.snr + order_free_sum(&mut los));
            let binom = binomial_rows(order);
            let mut moments = initial_moments(a, order);
            for w in &nlos {
                let mut table = weight_table(order);
                accumulate_weights(&mut table, p.scale() * w / m, p.m_nlos as usize, 1.0);
                moments = step_moments(&moments, &table, &binom);
            }
            assert!(
                (moments[order] - naive).abs() < 1e-9,
                "{} vs {naive}",
                moments[order]
            );
            checked += 1;
        }
        assert!(checked > 50);
    }

    #[test]
    fn tiny_outage_keeps_relative_accuracy() {
        // the alternating sum alone cannot resolve values this small
        let p = params(0.1, 8, 3);
        let s = snapshot(vec![(vec![1e-4], vec![]); 8]);
        let r = conditional_outage(&s, &p).unwrap();
        let x = p.scale() * (1.0 / p.snr + 8e-4);
        let expected = (-(-x).exp_m1()).powi(24);
        assert!(expected < 1e-50);
        assert!((r.value - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn nlos_exponential_special_case() {
        let s = snapshot(vec![(vec![0.01], vec![0.05, 0.2]), (vec![], vec![0.1])]);
        let p = params(1.5, 2, 3);
        let k = p.scale();
        let mut expect = 1.0;
        for l in 1..=6u32 {
            let lf = l as f64;
            let mut t = binomial(6, l) * (-lf * k * (1.0 / p.snr + 0.01)).exp();
            for w in [0.05, 0.2, 0.1] {
                t /= 1.0 + lf * k * w;
            }
            expect += if l % 2 == 1 { -t } else { t };
        }
        let r = conditional_outage(&s, &p).unwrap();
        assert!((r.value - expect).abs() < 1e-12);
    }

    #[test]
    fn huge_threshold_saturates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_snapshot(&mut rng, 2, 10);
        let r = conditional_outage(&s, &params(1e6, 2, 3)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
    }

    fn table_topology(seed: u64) -> (NetworkTopology, SystemConfig) {
        let cfg = SystemConfig::default();
        let mut rng = stream(seed, 0, Purpose::Topology);
        let t = sample_ucp(
            cfg.lambda_bs,
            cfg.r_min,
            &cfg.bs_region().unwrap(),
            cfg.retry_budget,
            cfg.sector_layout().unwrap(),
            &mut rng,
        )
        .unwrap();
        (t, cfg)
    }

    #[test]
    fn normalized_power_cases() {
        let cfg = SystemConfig::default();
        let ant = cfg.antennas().unwrap();
        let ch = cfg.channel();
        let layout = cfg.sector_layout().unwrap();
        // equidistant from origin and serving station, aligned beams
        let serving = Point::new(2.0, 0.0);
        let t = NetworkTopology::new(vec![Point::new(0.0, 0.0), serving], 0, layout).unwrap();
        let x = Point::new(1.0, 1e-9);
        // serving station index 0 wins the tie; use a point nearer station 1
        let x2 = Point::new(1.0 + 1e-12, 0.0);
        let w = normalized_power(x2, &t, &ant, &ch, 2).unwrap();
        // transmit beam points away from the origin: side lobe at the mobile
        let expected = ant.ms.side_gain / ant.ms.main_gain / 2.0;
        assert!((w - expected).abs() < 1e-9 * expected);
        // served by the reference station from another sector
        let y = Point::from_polar(1.0, std::f64::consts::PI);
        let w = normalized_power(y, &t, &ant, &ch, 1).unwrap();
        assert!((w - ant.bs.side_gain / ant.bs.main_gain).abs() < 1e-15);
        // served by the reference station inside the beam: both main lobes
        let w = normalized_power(x, &t, &ant, &ch, 2).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normalized_power_sidelobe_ratio() {
        let cfg = SystemConfig::default();
        let ant = cfg.antennas().unwrap();
        let ch = cfg.channel();
        let layout = cfg.sector_layout().unwrap();
        // mobile served by a station directly across the origin's beam
        let t = NetworkTopology::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 3.0)], 0, layout)
            .unwrap();
        let main = normalized_power(Point::new(0.5, 2.5), &t, &ant, &ch, 1).unwrap();
        let back = normalized_power(Point::new(-0.5, 2.5), &t, &ant, &ch, 1).unwrap();
        assert!(main > 0.0 && back > 0.0);
        let a_main = receive_gain(Point::new(0.5, 2.5).arg(), 0.0, &ant);
        let a_back = receive_gain(Point::new(-0.5, 2.5).arg(), 0.0, &ant);
        assert!(a_main == a_back || main != back);
    }

    #[test]
    fn averages_without_mobiles() {
        let (t, mut cfg) = table_topology(1);
        cfg.lambda_ms = 0.0;
        let avg = MobileAverages::estimate(&t, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(avg.epsilon1().value, 0.0);
        let p = OutageParams::from_config(&cfg, 1.0).unwrap();
        assert_eq!(avg.epsilon2(3, &p).value, 1.0);
        let direct = conditional_outage(&InterfererSnapshot::quiet(cfg.hops), &p).unwrap();
        let r = avg.outage(&p).unwrap();
        assert!((r.value - direct.value).abs() <= 1e-12 * direct.value);
    }

    #[test]
    fn epsilon2_small_threshold_is_one() {
        let (t, mut cfg) = table_topology(2);
        cfg.ex_samples = 2000;
        cfg.area_samples = 20_000;
        let avg = MobileAverages::estimate(&t, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let p = OutageParams::from_config(&cfg, 1e-12).unwrap();
        assert!((avg.epsilon2(1, &p).value - 1.0).abs() < 1e-9);
        assert!(epsilon2(&t, &cfg, 0, &p, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn epsilon1_vanishes_inside_sector() {
        // LOS disc entirely inside the reference sector of a lone station
        let mut cfg = SystemConfig::default();
        cfg.r_los = 0.5;
        cfg.n_bs_elements = 1;
        cfg.sector_model = crate::geometry::SectorModel::DiscWedge;
        cfg.ex_samples = 100;
        cfg.area_samples = 1000;
        let t = NetworkTopology::new(vec![Point::new(0.0, 0.0)], 0, cfg.sector_layout().unwrap())
            .unwrap();
        let e = epsilon1(&t, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn bs_outage_stable_route_matches_sum() {
        let (t, mut cfg) = table_topology(3);
        cfg.ex_samples = 2000;
        cfg.area_samples = 20_000;
        let avg = MobileAverages::estimate(&t, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        for beta in [0.3, 1.0, 3.0] {
            let p = OutageParams::from_config(&cfg, beta).unwrap();
            let direct = avg.outage(&p).unwrap().value;
            // recompute through the compound-Poisson recursion
            let order = p.order() as usize;
            let hops = p.hops as f64;
            let a = p.scale() * (1.0 / p.snr + hops * avg.epsilon1().value);
            let mass = hops * avg.lambda_ms * avg.nlos_area.value;
            let binom = binomial_rows(order);
            let mut table = weight_table(order);
            let wgt = 1.0 / avg.nlos_powers.len() as f64;
            for &w in &avg.nlos_powers {
                accumulate_weights(&mut table, p.scale() * w, 1, wgt);
            }
            let mut moments = initial_moments(a, order);
            let mut total = 0.0;
            let mut ln_fact = 0.0;
            for n in 0..=((mass + 15.0 * mass.sqrt() + 40.0) as usize) {
                if n > 0 {
                    ln_fact += (n as f64).ln();
                    moments = step_moments(&moments, &table, &binom);
                }
                total += (-mass + n as f64 * mass.ln() - ln_fact).exp() * moments[order];
            }
            assert!(
                (total - direct).abs() < 1e-9,
                "beta {beta}: {total} vs {direct}"
            );
        }
    }

    #[test]
    fn snapshot_from_mobiles_skips_blocked() {
        let (t, cfg) = table_topology(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = sample_ppp(1.0, &Region::disc(12.0).unwrap(), Some(&t), 0, &mut rng).unwrap();
        let inside = set
            .positions
            .iter()
            .filter(|p| p.norm() <= cfg.r_nlos)
            .count();
        let s =
            InterfererSnapshot::from_mobiles(&[set], &t, &cfg.antennas().unwrap(), &cfg.channel())
                .unwrap();
        assert_eq!(s.hops()[0].los.len() + s.hops()[0].nlos.len(), inside);
        assert!(s.hops()[0]
            .los
            .iter()
            .chain(&s.hops()[0].nlos)
            .all(|&w| w <= 1.0));
    }

    proptest! {
        #[test]
        fn monotone_in_beta_omega_snr(seed in 0u64..10_000, bump in 1.01f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let hops = [1u32, 2, 4][rng.random_range(0..3)];
            let s = random_snapshot(&mut rng, hops, 8);
            let beta = 10f64.powf(rng.random_range(-1.0..1.0));
            let base = conditional_outage(&s, &params(beta, hops, 3)).unwrap().value;
            let slack = 1e-12;
            let up = conditional_outage(&s, &params(beta * bump, hops, 3)).unwrap().value;
            prop_assert!(up + slack >= base);
            // raise one interferer
            let mut hops_v: Vec<HopInterference> = s.hops().to_vec();
            if let Some(h) = hops_v.iter_mut().find(|h| !h.los.is_empty() || !h.nlos.is_empty()) {
                if let Some(w) = h.nlos.first_mut() { *w *= bump } else { h.los[0] *= bump }
                let s2 = InterfererSnapshot::new(hops_v).unwrap();
                let v = conditional_outage(&s2, &params(beta, hops, 3)).unwrap().value;
                prop_assert!(v + slack >= base);
            }
            let ch = channel(3, 1, 10f64.powf(2.5) * bump);
            let louder = conditional_outage(&s, &OutageParams::new(beta, hops, &ch).unwrap()).unwrap().value;
            prop_assert!(louder <= base + slack);
        }

        #[test]
        fn hop_permutation_is_bit_identical(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_snapshot(&mut rng, 4, 10);
            let mut hops: Vec<HopInterference> = s.hops().to_vec();
            hops.reverse();
            hops.swap(0, 2);
            let s2 = InterfererSnapshot::new(hops).unwrap();
            let p = params(10f64.powf(rng.random_range(-1.0..1.0)), 4, 3);
            let a = conditional_outage(&s, &p).unwrap().value;
            let b = conditional_outage(&s2, &p).unwrap().value;
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }

        #[test]
        fn result_is_a_probability(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let hops = rng.random_range(1..=8);
            let s = random_snapshot(&mut rng, hops, 20);
            let p = params(10f64.powf(rng.random_range(-2.0..3.0)), hops, rng.random_range(1..=3));
            let v = conditional_outage(&s, &p).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
