//! Scenario files: TOML with `preset`, `sim`, `radio` and `drones` sections.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beacon::{AdsbVariant, Protocol, WifiParams, LORA_DUTY_CYCLE_GAP_S, LORA_UPDATE_FLOOR_S};
use crate::channel::{LinkBudget, PathLossModel};
use crate::geometry::{
    EnuPosition, Environment, EnvironmentPreset, FlightPlan, SeparationVolume, Waypoint, DEFAULT_MAX_SPEED,
};

pub const DEFAULT_TIMESTEP_S: f64 = 0.001;
pub const DEFAULT_DELAY_BINS_M: [f64; 6] = [0.0, 150.0, 300.0, 450.0, 600.0, 800.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub preset: PresetConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub drones: Vec<DroneConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetConfig {
    pub environment: Environment,
    /// Overrides the built-in well-clear volume.
    pub well_clear: Option<SeparationVolume>,
    /// Overrides the built-in collision volume.
    pub collision: Option<SeparationVolume>,
}

impl PresetConfig {
    /// The effective preset, without checking the nesting rule.
    pub fn resolve(&self) -> EnvironmentPreset {
        let base = EnvironmentPreset::builtin(self.environment);
        EnvironmentPreset {
            name: self.environment,
            well_clear: self.well_clear.unwrap_or(base.well_clear),
            collision: self.collision.unwrap_or(base.collision),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub timestep_s: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub control_tick_s: f64,
    pub max_speed: f64,
    /// Conflict look-ahead; defaults by environment.
    pub horizon_s: Option<f64>,
    pub delay_bins_m: Vec<f64>,
    pub record_rssi: bool,
    /// Deconflict all plans before the run starts.
    pub strategic: bool,
    pub strategic_sample_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            timestep_s: DEFAULT_TIMESTEP_S,
            duration_s: 60.0,
            seed: 0,
            control_tick_s: crate::conflict::CONTROL_TICK_S,
            max_speed: DEFAULT_MAX_SPEED,
            horizon_s: None,
            delay_bins_m: DEFAULT_DELAY_BINS_M.to_vec(),
            record_rssi: true,
            strategic: false,
            strategic_sample_s: 1.0,
        }
    }
}

/// Channel model and link budget for one radio family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub path_loss: PathLossModel,
    pub budget: LinkBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WifiConfig {
    pub path_loss: PathLossModel,
    pub budget: LinkBudget,
    pub protocol: WifiParams,
}

impl Default for WifiConfig {
    fn default() -> Self {
        Self { path_loss: PathLossModel::wifi_air(), budget: LinkBudget::wifi(), protocol: WifiParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoraConfig {
    pub path_loss: PathLossModel,
    pub budget: LinkBudget,
    pub min_interval_s: f64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        Self { path_loss: PathLossModel::lora(), budget: LinkBudget::lora_sf7(), min_interval_s: LORA_UPDATE_FLOOR_S }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdsbConfig {
    pub path_loss: PathLossModel,
    pub budget: LinkBudget,
}

impl Default for AdsbConfig {
    fn default() -> Self {
        Self { path_loss: PathLossModel::adsb(), budget: LinkBudget::adsb() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub wifi: WifiConfig,
    pub lora: LoraConfig,
    pub adsb: AdsbConfig,
}

impl RadioConfig {
    pub fn link(&self, protocol: Protocol) -> LinkConfig {
        let (path_loss, budget) = match protocol {
            Protocol::WifiSsid => (self.wifi.path_loss, self.wifi.budget),
            Protocol::LoRa => (self.lora.path_loss, self.lora.budget),
            Protocol::AdsB => (self.adsb.path_loss, self.adsb.budget),
        };
        LinkConfig { path_loss, budget }
    }
}

/// Which beaconing radio a drone carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolChoice {
    Wifi,
    Lora,
    Adsb,
    RpAdsb,
    /// Beacons disabled.
    None,
}

impl ProtocolChoice {
    pub fn protocol(self) -> Option<Protocol> {
        match self {
            ProtocolChoice::Wifi => Some(Protocol::WifiSsid),
            ProtocolChoice::Lora => Some(Protocol::LoRa),
            ProtocolChoice::Adsb | ProtocolChoice::RpAdsb => Some(Protocol::AdsB),
            ProtocolChoice::None => None,
        }
    }

    pub fn adsb_variant(self) -> Option<AdsbVariant> {
        match self {
            ProtocolChoice::Adsb => Some(AdsbVariant::Standard),
            ProtocolChoice::RpAdsb => Some(AdsbVariant::ReducedPower),
            _ => None,
        }
    }

    /// Worst-case measured update interval of the matching catalog row.
    pub fn nominal_update_s(self) -> f64 {
        match self {
            ProtocolChoice::Wifi => 0.8,
            ProtocolChoice::Lora => 30.0,
            ProtocolChoice::Adsb => 0.5,
            ProtocolChoice::RpAdsb => 3.0,
            ProtocolChoice::None => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointConfig {
    pub t: f64,
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneConfig {
    pub id: u32,
    pub protocol: ProtocolChoice,
    /// Non-cooperative drones beacon but never maneuver.
    #[serde(default = "yes")]
    pub cooperative: bool,
    /// Defaults to three times the protocol's nominal update interval.
    pub staleness_limit_s: Option<f64>,
    pub waypoints: Vec<WaypointConfig>,
}

fn yes() -> bool {
    true
}

impl DroneConfig {
    pub fn staleness_limit(&self) -> f64 {
        self.staleness_limit_s.unwrap_or(3.0 * self.protocol.nominal_update_s())
    }

    pub fn flight_plan(&self, max_speed: f64) -> crate::error::Result<FlightPlan> {
        let wps = self.waypoints.iter().map(|w| Waypoint::new(EnuPosition::new(w.east, w.north, w.up), w.t)).collect();
        FlightPlan::new(self.id, wps, max_speed)
    }
}

/// Machine-readable validation codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    #[serde(rename = "E_PARSE")]
    Parse,
    #[serde(rename = "E_DUP_ID")]
    DuplicateId,
    #[serde(rename = "E_PLAN")]
    Plan,
    #[serde(rename = "E_SPEED")]
    Speed,
    #[serde(rename = "E_NEG_ALT")]
    NegativeAltitude,
    #[serde(rename = "E_TIMESTEP")]
    Timestep,
    #[serde(rename = "E_DURATION")]
    Duration,
    #[serde(rename = "E_BINS")]
    Bins,
    #[serde(rename = "E_PRESET")]
    Preset,
    #[serde(rename = "E_RADIO")]
    Radio,
    #[serde(rename = "E_PROTOCOL")]
    Protocol,
    #[serde(rename = "E_SIM")]
    Sim,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::Parse => "E_PARSE",
            ViolationCode::DuplicateId => "E_DUP_ID",
            ViolationCode::Plan => "E_PLAN",
            ViolationCode::Speed => "E_SPEED",
            ViolationCode::NegativeAltitude => "E_NEG_ALT",
            ViolationCode::Timestep => "E_TIMESTEP",
            ViolationCode::Duration => "E_DURATION",
            ViolationCode::Bins => "E_BINS",
            ViolationCode::Preset => "E_PRESET",
            ViolationCode::Radio => "E_RADIO",
            ViolationCode::Protocol => "E_PROTOCOL",
            ViolationCode::Sim => "E_SIM",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, Violation> {
        toml::from_str(text).map_err(|e| Violation { code: ViolationCode::Parse, message: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 over the canonical JSON form, so formatting and comments in the
    /// source file do not affect it.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn preset(&self) -> EnvironmentPreset {
        self.preset.resolve()
    }

    pub fn horizon(&self) -> f64 {
        self.sim.horizon_s.unwrap_or_else(|| crate::conflict::default_horizon(self.preset.environment))
    }

    /// Every invariant breach, in a stable order. Empty iff the scenario can run.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |code, message: String| out.push(Violation { code, message });
        let sim = &self.sim;

        let p = self.preset();
        if let Err(e) = SeparationVolume::new(p.well_clear.d_h, p.well_clear.d_v)
            .and_then(|_| SeparationVolume::new(p.collision.d_h, p.collision.d_v))
            .and_then(|_| EnvironmentPreset::new(p.name, p.well_clear, p.collision))
        {
            push(ViolationCode::Preset, e.to_string());
        }

        if !(sim.duration_s > 0.0 && sim.duration_s.is_finite()) {
            push(ViolationCode::Duration, format!("duration_s must be positive, got {}", sim.duration_s));
        }
        if !(sim.timestep_s > 0.0 && sim.timestep_s.is_finite()) {
            push(ViolationCode::Timestep, format!("timestep_s must be positive, got {}", sim.timestep_s));
        } else {
            let uses_wifi = self.drones.iter().any(|d| d.protocol == ProtocolChoice::Wifi);
            if uses_wifi && sim.timestep_s > self.radio.wifi.protocol.airtime_s + 1e-12 {
                push(
                    ViolationCode::Timestep,
                    format!(
                        "timestep_s {} exceeds the Wi-Fi beacon airtime {}",
                        sim.timestep_s, self.radio.wifi.protocol.airtime_s
                    ),
                );
            }
            if !(sim.control_tick_s >= sim.timestep_s && sim.control_tick_s.is_finite()) {
                push(
                    ViolationCode::Sim,
                    format!("control_tick_s {} must be at least one timestep", sim.control_tick_s),
                );
            }
        }
        if !(sim.max_speed > 0.0 && sim.max_speed.is_finite()) {
            push(ViolationCode::Sim, format!("max_speed must be positive, got {}", sim.max_speed));
        }
        if let Some(h) = sim.horizon_s {
            if !(h > 0.0 && h.is_finite()) {
                push(ViolationCode::Sim, format!("horizon_s must be positive, got {h}"));
            }
        }
        if !(sim.strategic_sample_s > 0.0 && sim.strategic_sample_s.is_finite()) {
            push(ViolationCode::Sim, format!("strategic_sample_s must be positive, got {}", sim.strategic_sample_s));
        }
        let bins = &sim.delay_bins_m;
        if bins.len() < 2 || bins.iter().any(|b| !b.is_finite() || *b < 0.0) || bins.windows(2).any(|w| w[1] <= w[0]) {
            push(ViolationCode::Bins, format!("delay_bins_m must be >= 2 increasing non-negative edges, got {bins:?}"));
        }

        for (name, protocol) in [("wifi", Protocol::WifiSsid), ("lora", Protocol::LoRa), ("adsb", Protocol::AdsB)] {
            let link = self.radio.link(protocol);
            if let Err(e) = link.path_loss.validate().and_then(|_| link.budget.validate()) {
                push(ViolationCode::Radio, format!("radio.{name}: {e}"));
            }
        }
        if let Err(e) = self.radio.wifi.protocol.validate() {
            push(ViolationCode::Protocol, format!("radio.wifi.protocol: {e}"));
        }
        let lora_gap = self.radio.lora.min_interval_s;
        if !(lora_gap >= LORA_DUTY_CYCLE_GAP_S && lora_gap.is_finite()) {
            push(
                ViolationCode::Protocol,
                format!("radio.lora.min_interval_s {lora_gap} is below {LORA_DUTY_CYCLE_GAP_S} s"),
            );
        }

        let mut seen = BTreeSet::new();
        for d in &self.drones {
            if !seen.insert(d.id) {
                push(ViolationCode::DuplicateId, format!("drone id {} appears more than once", d.id));
            }
            if let Some(s) = d.staleness_limit_s {
                if s.is_nan() || s <= 0.0 {
                    push(ViolationCode::Sim, format!("drone {}: staleness_limit_s must be positive", d.id));
                }
            }
            if d.waypoints.iter().any(|w| w.up < 0.0) {
                push(ViolationCode::NegativeAltitude, format!("drone {}: waypoint below ground", d.id));
            }
            let wps = &d.waypoints;
            if wps.len() < 2 {
                push(ViolationCode::Plan, format!("drone {}: at least 2 waypoints required", d.id));
                continue;
            }
            if wps.iter().any(|w| ![w.t, w.east, w.north, w.up].iter().all(|x| x.is_finite()) || w.t < 0.0) {
                push(ViolationCode::Plan, format!("drone {}: waypoint values must be finite with t >= 0", d.id));
                continue;
            }
            if wps.windows(2).any(|w| w[1].t <= w[0].t) {
                push(ViolationCode::Plan, format!("drone {}: waypoint times must strictly increase", d.id));
                continue;
            }
            for (k, w) in wps.windows(2).enumerate() {
                let a = EnuPosition::new(w[0].east, w[0].north, w[0].up);
                let b = EnuPosition::new(w[1].east, w[1].north, w[1].up);
                let speed = a.distance(&b) / (w[1].t - w[0].t);
                if speed > sim.max_speed {
                    push(
                        ViolationCode::Speed,
                        format!(
                            "drone {}: segment {k} implies {speed:.1} m/s, above the {} m/s cap",
                            d.id, sim.max_speed
                        ),
                    );
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PRISTINE: &str = r#"
        [preset]
        environment = "suburban"

        [sim]
        duration_s = 10.0

        [[drones]]
        id = 1
        protocol = "wifi"
        waypoints = [
            { t = 0.0, east = 0.0, north = 0.0, up = 50.0 },
            { t = 10.0, east = 100.0, north = 0.0, up = 50.0 },
        ]

        [[drones]]
        id = 2
        protocol = "wifi"
        waypoints = [
            { t = 0.0, east = 500.0, north = 0.0, up = 50.0 },
            { t = 10.0, east = 400.0, north = 0.0, up = 50.0 },
        ]
    "#;

    fn codes(s: &Scenario) -> Vec<ViolationCode> {
        s.validate().into_iter().map(|v| v.code).collect()
    }

    #[test]
    fn pristine_scenario_is_clean() {
        let s = Scenario::from_toml(PRISTINE).unwrap();
        assert!(s.validate().is_empty(), "{:?}", s.validate());
        assert_eq!(s.sim.timestep_s, DEFAULT_TIMESTEP_S);
        assert_eq!(s.radio.wifi.protocol, WifiParams::default());
        assert_eq!(s.preset(), EnvironmentPreset::SUBURBAN);
        assert!((s.drones[0].staleness_limit() - 2.4).abs() < 1e-12);
    }

    #[test]
    fn duplicate_id_is_one_violation() {
        let mut s = Scenario::from_toml(PRISTINE).unwrap();
        s.drones[1].id = 1;
        assert_eq!(codes(&s), [ViolationCode::DuplicateId]);
    }

    #[test]
    fn fast_segment_is_speed_violation() {
        let mut s = Scenario::from_toml(PRISTINE).unwrap();
        s.drones[0].waypoints[1].east = 2000.0;
        let v = s.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::Speed);
        assert!(v[0].message.contains("200.0 m/s"), "{}", v[0].message);
    }

    #[test]
    fn other_breaches_are_reported() {
        let mut s = Scenario::from_toml(PRISTINE).unwrap();
        s.sim.timestep_s = 0.01;
        s.sim.delay_bins_m = vec![0.0, 100.0, 50.0];
        s.drones[0].waypoints[0].up = -1.0;
        s.radio.lora.min_interval_s = 1.0;
        s.preset.collision = Some(SeparationVolume { d_h: 900.0, d_v: 30.0 });
        let mut got = codes(&s);
        got.sort();
        assert_eq!(
            got,
            [
                ViolationCode::NegativeAltitude,
                ViolationCode::Timestep,
                ViolationCode::Bins,
                ViolationCode::Preset,
                ViolationCode::Protocol
            ]
        );
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = Scenario::from_toml("[preset]\nenvironment = \"urban\"\ncolour = 3\n").unwrap_err();
        assert_eq!(err.code, ViolationCode::Parse);
    }

    #[test]
    fn digest_tracks_content_not_formatting() {
        let a = Scenario::from_toml(PRISTINE).unwrap();
        let reformatted = PRISTINE.replace("duration_s = 10.0", "duration_s   =   10.0   # seconds");
        let b = Scenario::from_toml(&reformatted).unwrap();
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.sim.duration_s = 11.0;
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn toml_round_trip() {
        let a = Scenario::from_toml(PRISTINE).unwrap();
        assert_eq!(Scenario::from_toml(&a.to_toml()).unwrap(), a);
    }
}
