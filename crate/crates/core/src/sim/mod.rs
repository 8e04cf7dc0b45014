//! Deterministic fixed-timestep world.
//!
//! [`run`] flies every drone along its plan, steps each radio, evaluates every
//! frame against every other drone (protocol gate, then link budget with
//! shadowing), feeds decoded beacons to the conflict managers and records
//! delay, safety and RSSI metrics. Identical scenario and seed give identical
//! output.

mod metrics;
mod output;
mod rng;
mod scenario;
mod world;

pub use metrics::{percentile, BinStats, DelayMetrics, Encounter, PairDelays, SafetyMetrics, ZERO_SEPARATION_VOLUME};
pub use output::{
    build_report, delay_csv, events_csv, parse_rssi_csv, protocol_fits, rssi_csv, write_outputs, OutputFiles,
    ProtocolFit, RunReport, DELAY_FILE, DELAY_HEADER, EVENTS_FILE, REPORT_FILE, RSSI_FILE, RSSI_HEADER,
};
pub use rng::{link_stream, node_stream, stream, StreamRng};
pub use scenario::{
    AdsbConfig, DroneConfig, LinkConfig, LoraConfig, PresetConfig, ProtocolChoice, RadioConfig, Scenario, SimConfig,
    Violation, ViolationCode, WaypointConfig, WifiConfig, DEFAULT_DELAY_BINS_M, DEFAULT_TIMESTEP_S,
};
pub use world::{run, Counters, RssiRecord, RunOutput};

use crate::channel::{fit_path_loss, PathLossModel, RssiSample};
use crate::error::{Error, Result};

/// Trace and regression of a two-node flight measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightMeasurement {
    /// Frames from the mobile node to the fixed one.
    pub trace: Vec<RssiRecord>,
    pub model: PathLossModel,
}

/// Runs a scenario with one fixed and one mobile node and fits the path-loss
/// model to the mobile-to-fixed frames. Every frame that reached the link
/// budget is used, lost ones included: fitting received frames alone censors
/// the weak tail near the cutoff and flattens the fitted slope.
pub fn measure_flight(scenario: &Scenario) -> Result<FlightMeasurement> {
    let [a, b] = scenario.drones.as_slice() else {
        return Err(Error::InvalidParameter(format!(
            "flight measurement needs 2 nodes, got {}",
            scenario.drones.len()
        )));
    };
    let moves = |d: &DroneConfig| {
        d.waypoints.windows(2).any(|w| (w[0].east, w[0].north, w[0].up) != (w[1].east, w[1].north, w[1].up))
    };
    let (mobile, fixed) = match (moves(a), moves(b)) {
        (true, false) => (a, b),
        (false, true) => (b, a),
        _ => return Err(Error::InvalidParameter("flight measurement needs exactly one mobile node".into())),
    };
    let Some(protocol) = mobile.protocol.protocol() else {
        return Err(Error::InvalidParameter("the mobile node has no radio".into()));
    };
    let mut s = scenario.clone();
    s.sim.record_rssi = true;
    let out = run(&s)?;
    let trace: Vec<RssiRecord> = out.rssi.into_iter().filter(|r| r.tx_id == mobile.id && r.rx_id == fixed.id).collect();
    let samples: Vec<RssiSample> =
        trace.iter().map(|r| RssiSample { distance: r.distance_m, rssi: r.rssi_dbm }).collect();
    let link = scenario.radio.link(protocol);
    let budget = link.budget.with_power_offset(mobile.protocol.adsb_variant().map_or(0.0, |v| v.power_offset_db()));
    let model = fit_path_loss(&samples, &budget, link.path_loss.d0)?;
    Ok(FlightMeasurement { trace, model })
}
