use std::path::PathBuf;

use skypuck::channel::PathLossModel;
use skypuck::sim::{
    delay_csv, events_csv, measure_flight, rssi_csv, run, DroneConfig, ProtocolChoice, Scenario, ViolationCode,
    WaypointConfig, DELAY_HEADER, RSSI_HEADER,
};
use skypuck::Error;

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenarios_dir().join(name)).unwrap();
    Scenario::from_toml(&text).unwrap()
}

fn hover(id: u32, protocol: ProtocolChoice, east: f64, until: f64) -> DroneConfig {
    DroneConfig {
        id,
        protocol,
        cooperative: false,
        staleness_limit_s: None,
        waypoints: vec![
            WaypointConfig { t: 0.0, east, north: 0.0, up: 30.0 },
            WaypointConfig { t: until, east, north: 0.0, up: 30.0 },
        ],
    }
}

fn static_pair(separation: f64, duration: f64) -> Scenario {
    let mut s = Scenario::from_toml("[preset]\nenvironment = \"suburban\"\n").unwrap();
    s.sim.duration_s = duration;
    s.drones =
        vec![hover(1, ProtocolChoice::Wifi, 0.0, duration), hover(2, ProtocolChoice::Wifi, separation, duration)];
    s
}

#[test]
fn every_bundled_scenario_validates() {
    let mut seen = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "scn") {
            let s = Scenario::from_toml(&std::fs::read_to_string(&path).unwrap()).unwrap();
            assert!(s.validate().is_empty(), "{}: {:?}", path.display(), s.validate());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn zero_drone_scenario_runs_empty() {
    let s = Scenario::from_toml("[preset]\nenvironment = \"urban\"\n[sim]\nduration_s = 1.0\n").unwrap();
    let out = run(&s).unwrap();
    assert!(out.events.is_empty() && out.rssi.is_empty() && out.delay.pairs.is_empty());
    assert_eq!(out.counters.transmissions, 0);
    assert_eq!(out.safety.wc_violations, 0);
    assert_eq!(delay_csv(&out.delay), format!("{DELAY_HEADER}\n"));
}

#[test]
fn nodes_beyond_range_hear_nothing() {
    let mut s = static_pair(2000.0, 600.0);
    s.radio.wifi.path_loss.shadowing_sigma_db = 0.0;
    let out = run(&s).unwrap();
    assert!(out.counters.link_attempts > 0);
    assert_eq!(out.counters.receptions, 0);
    assert!(out.delay.pairs.is_empty());
}

#[test]
fn shadowing_tail_reaches_past_the_cutoff_rarely() {
    // At 2 km the mean RSSI sits 13.3 dB (3.3 sigma) under the sensitivity.
    let out = run(&static_pair(2000.0, 600.0)).unwrap();
    let rate = out.counters.receptions as f64 / out.counters.link_attempts as f64;
    assert!(rate < 1.5e-3, "rate {rate}");
}

#[test]
fn receptions_are_conserved() {
    let s = load("urban-crossing.scn");
    let out = run(&s).unwrap();
    let c = out.counters;
    assert!(c.receptions <= c.link_attempts);
    assert!(c.link_attempts <= c.transmissions * (s.drones.len() as u64 - 1));
    assert_eq!(out.rssi.iter().filter(|r| r.received).count() as u64, c.receptions);
    // Every trace row names a real, distinct tx/rx pair.
    assert!(out.rssi.iter().all(|r| r.tx_id != r.rx_id));
}

#[test]
fn safety_counts_nest() {
    for name in ["urban-crossing.scn", "suburban-two-drone.scn", "wifi-static-100m.scn"] {
        let out = run(&load(name)).unwrap();
        assert!(out.safety.is_nested(), "{name}: {:?}", out.safety);
    }
    let mut silent = load("suburban-two-drone.scn");
    silent.drones.iter_mut().for_each(|d| d.protocol = ProtocolChoice::None);
    let out = run(&silent).unwrap();
    assert!(out.safety.zero_separation_events >= 1);
    assert!(out.safety.is_nested());
    let kinds: Vec<String> =
        events_csv(&out).lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect();
    assert_eq!(kinds, ["wc-violation", "ca-violation", "zero-separation"]);
}

#[test]
fn invalid_scenarios_fail_before_stepping() {
    let mut s = static_pair(100.0, 10.0);
    s.drones[1].id = 1;
    match run(&s) {
        Err(Error::InvalidScenario(msg)) => assert!(msg.contains("E_DUP_ID"), "{msg}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
    let codes: Vec<ViolationCode> = s.validate().iter().map(|v| v.code).collect();
    assert_eq!(codes, [ViolationCode::DuplicateId]);
}

#[test]
fn a_distant_third_drone_does_not_perturb_a_pair() {
    let base = static_pair(100.0, 30.0);
    let mut wider = base.clone();
    wider.drones.push(hover(3, ProtocolChoice::Wifi, 50_000.0, 30.0));
    let (a, b) = (run(&base).unwrap(), run(&wider).unwrap());
    assert_eq!(a.delay.pair(1, 2), b.delay.pair(1, 2));
    assert_eq!(a.delay.pair(2, 1), b.delay.pair(2, 1));
}

#[test]
fn seed_changes_the_draws() {
    let mut s = static_pair(100.0, 30.0);
    let a = rssi_csv(&run(&s).unwrap().rssi);
    s.sim.seed = 99;
    let b = rssi_csv(&run(&s).unwrap().rssi);
    assert!(a.starts_with(RSSI_HEADER));
    assert_ne!(a, b);
}

#[test]
fn noiseless_flight_fit_is_exact() {
    let mut s = load("wifi-fit-air.scn");
    s.radio.wifi.path_loss = PathLossModel { shadowing_sigma_db: 0.0, ..s.radio.wifi.path_loss };
    let m = measure_flight(&s).unwrap().model;
    // Trace distances are unrounded in memory, so recovery is exact.
    assert!((m.exponent - 2.4).abs() < 1e-9, "{}", m.exponent);
    assert!((m.pl0_db - 40.05).abs() < 1e-9, "{}", m.pl0_db);
}

#[test]
fn flight_measurement_preconditions() {
    let both_static = static_pair(100.0, 10.0);
    assert!(matches!(measure_flight(&both_static), Err(Error::InvalidParameter(_))));
    let mut three = load("wifi-fit-air.scn");
    three.drones.push(hover(9, ProtocolChoice::Wifi, 10.0, 520.0));
    assert!(matches!(measure_flight(&three), Err(Error::InvalidParameter(_))));
}

#[test]
fn strategic_pass_separates_coincident_plans() {
    let mut s = load("suburban-two-drone.scn");
    s.drones[1].waypoints = s.drones[0].waypoints.clone();
    s.drones.iter_mut().for_each(|d| d.protocol = ProtocolChoice::None);
    assert!(run(&s).unwrap().safety.wc_violations >= 1);
    s.sim.strategic = true;
    let out = run(&s).unwrap();
    assert_eq!(out.safety.wc_violations, 0);
    assert_ne!(out.plans[0], out.plans[1]);
}

#[test]
fn lora_and_adsb_links_deliver() {
    let mut s = static_pair(300.0, 20.0);
    s.sim.delay_bins_m = vec![0.0, 1000.0];
    for p in [ProtocolChoice::Lora, ProtocolChoice::Adsb, ProtocolChoice::RpAdsb] {
        s.drones.iter_mut().for_each(|d| d.protocol = p);
        let out = run(&s).unwrap();
        assert!(out.counters.receptions > 0, "{p:?}");
    }
    // Mixed families never hear each other.
    s.drones[0].protocol = ProtocolChoice::Lora;
    s.drones[1].protocol = ProtocolChoice::Adsb;
    assert_eq!(run(&s).unwrap().counters.link_attempts, 0);
}

#[test]
fn late_departure_stays_silent_until_take_off() {
    let mut s = static_pair(100.0, 20.0);
    s.drones[1].waypoints = vec![
        WaypointConfig { t: 10.0, east: 100.0, north: 0.0, up: 30.0 },
        WaypointConfig { t: 20.0, east: 100.0, north: 0.0, up: 30.0 },
    ];
    let out = run(&s).unwrap();
    assert!(out.rssi.iter().all(|r| r.time_s >= 10.0 - 1e-9), "frames before departure");
    assert!(out.counters.receptions > 0);
}
