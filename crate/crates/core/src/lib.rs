//! Discrete-event ride-pooling fleet simulator and optimization library.
//!
//! The crate covers the full control loop of an on-demand ride-pooling
//! operator: network routing and zoning, request ingestion and demand
//! forecasting, schedule feasibility and insertion, batch trip assignment
//! through vehicle-to-request-bundle enumeration, and idle-vehicle
//! rebalancing (a predictive sampling strategy plus reactive, queueing and
//! horizon baselines). The [`engine`] module runs scenarios end to end and
//! [`reporting`] turns event logs into KPI tables.
//!
//! Simulation time is integer milliseconds and distance integer millimeters
//! throughout, which keeps tie-breaking and seeded runs exactly reproducible.

pub mod assignment;
pub mod demand;
pub mod engine;
pub mod network;
pub mod rebalancing;
pub mod reporting;
pub mod scheduling;

use std::fmt;

/// Simulation time / duration in milliseconds.
pub type TimeMs = i64;
/// Distance in millimeters.
pub type DistMm = i64;

/// Converts seconds to the internal millisecond scale (nearest integer).
pub fn ms_from_s(seconds: f64) -> TimeMs {
    (seconds * 1000.0).round() as TimeMs
}

/// Converts internal milliseconds back to seconds.
pub fn s_from_ms(ms: TimeMs) -> f64 {
    ms as f64 / 1000.0
}

/// Converts meters to millimeters (nearest integer).
pub fn mm_from_m(meters: f64) -> DistMm {
    (meters * 1000.0).round() as DistMm
}

/// Converts millimeters to kilometers.
pub fn km_from_mm(mm: DistMm) -> f64 {
    mm as f64 / 1_000_000.0
}

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident, $inner:ty) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// External identifier of a network node.
    NodeId,
    u32
);
id_type!(
    /// Identifier of a zone (index into the zone list).
    ZoneId,
    u32
);
id_type!(
    /// Identifier of a fleet vehicle.
    VehicleId,
    u32
);
id_type!(
    /// Identifier of a customer request.
    RequestId,
    u64
);

/// Derives an independent RNG seed from a master seed and a stream tag.
/// SplitMix64-style mixing; used so that e.g. the per-sample generators of a
/// rebalancing call do not depend on how many samples run before them.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
