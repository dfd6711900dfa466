//! Outage and area spectral efficiency of frequency-hopping mmWave ad hoc
//! networks with blockage, directional antennas and Nakagami fading.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod numeric;
pub mod outage;
pub mod propagation;
pub mod rng;

/// Position in the plane, with the reference base station at the origin.
pub type Point = num_complex::Complex64;

pub use config::{parse_config, SystemConfig};
pub use error::{Error, Result};
pub use experiment::{
    ase_sweep, ccdf_conditional_outage, rate_from_threshold, run_trial, spatially_averaged_outage,
    validate_cases, with_workers, AverageMode, CaseReport, CurveRow, CurveTable,
};
pub use geometry::{
    in_reference_sector, sample_ppp, sample_ucp, sector_area, serving_bs, split_sector_area,
    Estimate, MobileSet, NetworkTopology, Region, SectorLayout, SectorModel,
};
pub use outage::{
    alzer_cdf, conditional_outage, epsilon1, epsilon2, normalized_power, outage_given_bs,
    outage_oracle, HopInterference, InterfererSnapshot, MobileAverages, OutageKind, OutageParams,
    OutageResult,
};
pub use propagation::{path_loss, AntennaConfig, ArrayPattern, ChannelParams, Zone};
pub use rng::{stream, Purpose, StreamRng};
