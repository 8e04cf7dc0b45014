//! Output files of a run. Nothing written here depends on wall-clock time,
//! so identical runs produce identical bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beacon::Protocol;
use crate::channel::{fit_path_loss, PathLossModel, RssiSample};
use crate::conflict::EVENT_LOG_HEADER;
use crate::error::{Error, Result};

use super::metrics::{DelayMetrics, SafetyMetrics};
use super::scenario::{ProtocolChoice, Scenario};
use super::world::{Counters, RssiRecord, RunOutput};

pub const RSSI_HEADER: &str = "time_s,tx_id,rx_id,distance_m,rssi_dbm,received";
pub const DELAY_HEADER: &str = "pair,bin_low_m,bin_high_m,n,mean_delay_s,p95_delay_s";

pub const RSSI_FILE: &str = "rssi.csv";
pub const DELAY_FILE: &str = "delay.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const REPORT_FILE: &str = "report.json";

pub fn rssi_csv(rows: &[RssiRecord]) -> String {
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(RSSI_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.3},{},{},{:.3},{:.3},{}\n",
            r.time_s, r.tx_id, r.rx_id, r.distance_m, r.rssi_dbm, r.received as u8
        ));
    }
    out
}

#[derive(Deserialize)]
struct RssiRow {
    time_s: f64,
    tx_id: u32,
    rx_id: u32,
    distance_m: f64,
    rssi_dbm: f64,
    received: u8,
}

/// Reads a trace written by [`rssi_csv`]. The header must match exactly and
/// at least one row must be present.
pub fn parse_rssi_csv(text: &str) -> Result<Vec<RssiRecord>> {
    let bad = |msg: String| Error::InvalidParameter(format!("rssi csv: {msg}"));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != RSSI_HEADER {
        return Err(bad(format!("expected header `{RSSI_HEADER}`")));
    }
    let mut out = Vec::new();
    for (k, row) in reader.deserialize::<RssiRow>().enumerate() {
        let r = row.map_err(|e| bad(e.to_string()))?;
        if r.received > 1 {
            return Err(bad(format!("row {}: received must be 0 or 1", k + 1)));
        }
        out.push(RssiRecord {
            time_s: r.time_s,
            tx_id: r.tx_id,
            rx_id: r.rx_id,
            distance_m: r.distance_m,
            rssi_dbm: r.rssi_dbm,
            received: r.received == 1,
        });
    }
    if out.is_empty() {
        return Err(bad("no rows".into()));
    }
    Ok(out)
}

/// Empty bins leave the mean and percentile fields blank.
pub fn delay_csv(delay: &DelayMetrics) -> String {
    let mut out = String::from(DELAY_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for p in &delay.pairs {
        for b in &p.bins {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.label(),
                b.low_m,
                b.high_m,
                b.n,
                opt(b.mean_delay_s),
                opt(b.p95_delay_s)
            ));
        }
    }
    out
}

pub fn events_csv(run: &RunOutput) -> String {
    let mut out = String::from(EVENT_LOG_HEADER);
    out.push('\n');
    for e in &run.events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolFit {
    pub protocol: String,
    pub samples: usize,
    pub model: PathLossModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFiles {
    pub rssi: Option<String>,
    pub delay: String,
    pub events: String,
}

/// Run summary written as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario_digest: String,
    pub seed: u64,
    pub counters: Counters,
    pub delay: DelayMetrics,
    pub safety: SafetyMetrics,
    /// Path-loss fits over every frame that reached the link budget, per
    /// protocol with enough data.
    pub fits: Vec<ProtocolFit>,
    pub files: OutputFiles,
}

/// Regression over the link-budget frames of each protocol in the run.
pub fn protocol_fits(scenario: &Scenario, run: &RunOutput) -> Vec<ProtocolFit> {
    let protocol_of = |id: u32| scenario.drones.iter().find(|d| d.id == id).and_then(|d| d.protocol.protocol());
    // Reduced-power ADS-B frames would bias a shared fit.
    let rp = |id: u32| scenario.drones.iter().any(|d| d.id == id && d.protocol == ProtocolChoice::RpAdsb);
    let mut out = Vec::new();
    for protocol in [Protocol::WifiSsid, Protocol::LoRa, Protocol::AdsB] {
        let samples: Vec<RssiSample> = run
            .rssi
            .iter()
            .filter(|r| protocol_of(r.tx_id) == Some(protocol) && !rp(r.tx_id))
            .map(|r| RssiSample { distance: r.distance_m, rssi: r.rssi_dbm })
            .collect();
        let link = scenario.radio.link(protocol);
        if let Ok(model) = fit_path_loss(&samples, &link.budget, link.path_loss.d0) {
            out.push(ProtocolFit { protocol: protocol.to_string(), samples: samples.len(), model });
        }
    }
    out
}

pub fn build_report(scenario: &Scenario, scenario_digest: &str, run: &RunOutput, files: OutputFiles) -> RunReport {
    RunReport {
        scenario_digest: scenario_digest.to_string(),
        seed: scenario.sim.seed,
        counters: run.counters,
        delay: run.delay.clone(),
        safety: run.safety.clone(),
        fits: protocol_fits(scenario, run),
        files,
    }
}

/// Writes every output file into `dir`, creating it if needed. File paths in
/// the report are relative to `dir`.
pub fn write_outputs(
    dir: &Path,
    scenario: &Scenario,
    scenario_digest: &str,
    run: &RunOutput,
) -> io::Result<(RunReport, PathBuf)> {
    fs::create_dir_all(dir)?;
    let rssi = scenario.sim.record_rssi.then(|| RSSI_FILE.to_string());
    if rssi.is_some() {
        fs::write(dir.join(RSSI_FILE), rssi_csv(&run.rssi))?;
    }
    fs::write(dir.join(DELAY_FILE), delay_csv(&run.delay))?;
    fs::write(dir.join(EVENTS_FILE), events_csv(run))?;
    let files = OutputFiles { rssi, delay: DELAY_FILE.into(), events: EVENTS_FILE.into() };
    let report = build_report(scenario, scenario_digest, run, files);
    let mut json = serde_json::to_string_pretty(&report).map_err(io::Error::other)?;
    json.push('\n');
    let report_path = dir.join(REPORT_FILE);
    fs::write(&report_path, json)?;
    Ok((report, report_path))
}
