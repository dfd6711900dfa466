//! Path law, zone classification and the two-level planar-array antenna model.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Point;

/// Link-level channel parameters shared by every link in the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub r_los: f64,
    pub r_nlos: f64,
    pub d0: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub m_los: u32,
    pub m_nlos: u32,
    /// Linear signal-to-noise ratio.
    pub snr: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0 && self.d0 <= self.r_los && self.r_los < self.r_nlos) {
            return Err(Error::Domain(format!(
                "radii must satisfy 0 < d0 <= r_los < r_nlos (d0 = {}, r_los = {}, r_nlos = {})",
                self.d0, self.r_los, self.r_nlos
            )));
        }
        if !(self.alpha_los > 0.0 && self.alpha_nlos > 0.0) {
            return Err(Error::Domain("path-loss exponents must be positive".into()));
        }
        if self.m_los < 1 || self.m_nlos < 1 {
            return Err(Error::Domain("fading parameters must be >= 1".into()));
        }
        if !(self.snr > 0.0) {
            return Err(Error::Domain("snr must be positive".into()));
        }
        Ok(())
    }

    /// Path gain with the near-field clamp applied to any `d < d0`
    /// (including zero). Hot-loop variant of [`path_loss`].
    #[inline]
    pub fn gain(&self, d: f64) -> f64 {
        let d = d.max(self.d0);
        if d <= self.r_los {
            (self.d0 / d).powf(self.alpha_los)
        } else {
            d.powf(-self.alpha_nlos) * self.d0.powf(self.alpha_los)
        }
    }

    /// True when the path law never increases with distance, so the serving
    /// base station is always the nearest one.
    pub fn is_monotone(&self) -> bool {
        (self.alpha_nlos - self.alpha_los) * self.r_los.ln() >= 0.0
    }
}

/// Normalized path gain `d^-a(d) / d0^-a(d0)`.
pub fn path_loss(d: f64, params: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(params.gain(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zone {
    Los,
    Nlos,
    Blocked,
}

pub fn zone_of(d: f64, params: &ChannelParams) -> Zone {
    if d <= params.r_los {
        Zone::Los
    } else if d <= params.r_nlos {
        Zone::Nlos
    } else {
        Zone::Blocked
    }
}

/// Beamwidth and gains of one side of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayPattern {
    pub elements: u32,
    pub beamwidth: f64,
    pub main_gain: f64,
    pub side_gain: f64,
}

impl ArrayPattern {
    pub fn new(elements: u32) -> Result<Self> {
        let (beamwidth, main_gain, side_gain) = upa_params(elements)?;
        Ok(Self {
            elements,
            beamwidth,
            main_gain,
            side_gain,
        })
    }

    #[inline]
    fn gain_for_offset(&self, offset: f64) -> f64 {
        if wrap_angle(offset).abs() <= self.beamwidth / 2.0 {
            self.main_gain
        } else {
            self.side_gain
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaConfig {
    pub bs: ArrayPattern,
    pub ms: ArrayPattern,
    /// Compare the mobile's azimuth seen from the origin, rather than the
    /// direction from the mobile toward the origin, with its steering
    /// direction when deciding the transmit gain.
    pub literal_azimuth: bool,
}

impl AntennaConfig {
    pub fn new(n_bs: u32, n_ms: u32) -> Result<Self> {
        Ok(Self {
            bs: ArrayPattern::new(n_bs)?,
            ms: ArrayPattern::new(n_ms)?,
            literal_azimuth: false,
        })
    }

    /// Number of fixed sectors per base station, one per main-lobe width.
    pub fn sectors_per_bs(&self) -> u32 {
        (2.0 * PI / self.bs.beamwidth).round() as u32
    }
}

fn perfect_square_root(n: u32) -> Option<u32> {
    let r = (n as f64).sqrt().round() as u32;
    (r.checked_mul(r) == Some(n)).then_some(r)
}

/// `(beamwidth, main-lobe gain, side-lobe gain)` of an `n`-element square
/// planar array.
pub fn upa_params(n: u32) -> Result<(f64, f64, f64)> {
    let side = match perfect_square_root(n) {
        Some(r) if n >= 1 => r as f64,
        _ => {
            return Err(Error::Domain(format!(
                "element count {n} is not a positive perfect square"
            )))
        }
    };
    let beamwidth = 2.0 * PI / side;
    let s = (3.0 * PI / (2.0 * side)).sin();
    Ok((beamwidth, n as f64, 1.0 / (s * s)))
}

/// Wraps an angle into `(-pi, pi]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    if a > -3.0 * PI && a <= 3.0 * PI {
        return if a > PI { a - 2.0 * PI } else { a + 2.0 * PI };
    }
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Gain of the reference sector's receive beam toward azimuth `phi`.
pub fn receive_gain(phi: f64, psi: f64, antenna: &AntennaConfig) -> f64 {
    antenna.bs.gain_for_offset(phi - psi)
}

/// Gain of the transmit beam of a mobile at `x`, steered at its serving
/// base station, in the direction of the reference base station at the
/// origin.
///
/// See [`AntennaConfig::literal_azimuth`] for the alternative rule.
pub fn transmit_gain(x: Point, serving_bs_pos: Point, antenna: &AntennaConfig) -> Result<f64> {
    let to_serving = serving_bs_pos - x;
    if to_serving.norm_sqr() == 0.0 || x.norm_sqr() == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "mobile at ({}, {}) coincides with a base station",
            x.re, x.im
        )));
    }
    let toward_reference = if antenna.literal_azimuth {
        x.arg()
    } else {
        (-x).arg()
    };
    Ok(antenna
        .ms
        .gain_for_offset(toward_reference - to_serving.arg()))
}
