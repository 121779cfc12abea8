//! Discrete-time traffic simulation: queue dynamics on directional lane
//! groups, fixed-cycle signals, lane-clearing mechanics and the travel-time
//! metrics.
//!
//! The tick is one second. A vehicle on an edge first *transmits* (drives the
//! edge length at free-flow speed), then waits in the directional queue at
//! the far intersection and is discharged through the stop line at the
//! saturation rate while its approach has green. A trip completes when the
//! vehicle is discharged off its final edge.

mod metrics;
mod signal;
mod world;

pub use metrics::{att, dfft, EmptyWindow, MetricsAccumulator};
pub use signal::{IntersectionSignal, SignalPhase};
pub use world::{
    Counters, EdgeObservation, IntersectionObservation, TraceRow, UnknownNode, World,
};

/// Physical and signal-timing constants of the simulation.
///
/// The defaults are ordinary traffic-engineering values: 7.5 m of storage per
/// queued vehicle, a saturation headway of 2 s per lane (about 1800 vehicles
/// per hour per lane) and two 30 s signal phases aligned across the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Storage length one queued vehicle occupies, in meters.
    pub vehicle_spacing_m: f64,
    /// Seconds between consecutive discharges per green lane.
    pub saturation_headway_s: f64,
    /// Duration of each of the two signal phases, in seconds.
    pub phase_duration_s: u32,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            vehicle_spacing_m: 7.5,
            saturation_headway_s: 2.0,
            phase_duration_s: 30,
        }
    }
}
