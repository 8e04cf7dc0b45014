use std::collections::BTreeMap;

use serde::Serialize;

use crate::beacon::{
    decode_ssid, encode_ssid, AdsBNode, LoRaNode, PositionBeacon, Protocol, Transmission, WifiSsidNode,
};
use crate::channel::{reception_success, rssi};
use crate::conflict::{
    strategic_deconflict, ConflictManager, EventRecord, Guidance, ManagerConfig, DEFAULT_CLIMB_RATE,
};
use crate::error::{Error, Result};
use crate::geometry::{sample_plan, EnuPosition, FlightPlan, VelocityVector};

use super::metrics::{DelayMetrics, DelayRecorder, SafetyMetrics, SafetyRecorder};
use super::rng::{link_stream, node_stream, StreamRng};
use super::scenario::{ProtocolChoice, Scenario};

/// Distances are floored here before the path-loss model sees them, meters.
const MIN_LINK_DISTANCE_M: f64 = 1e-3;

/// One evaluated link attempt: the receiver was listening on the right
/// channel, so the frame reached the link-budget check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RssiRecord {
    pub time_s: f64,
    pub tx_id: u32,
    pub rx_id: u32,
    pub distance_m: f64,
    pub rssi_dbm: f64,
    pub received: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counters {
    pub steps: u64,
    pub transmissions: u64,
    /// Frames that passed the protocol gate and reached the link budget.
    pub link_attempts: u64,
    pub receptions: u64,
    /// Track-ticks skipped because the track was stale, summed over drones.
    pub stale_exclusions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub events: Vec<EventRecord>,
    pub delay: DelayMetrics,
    pub safety: SafetyMetrics,
    pub rssi: Vec<RssiRecord>,
    pub counters: Counters,
    /// Flight plans as flown, after any strategic amendment.
    pub plans: Vec<FlightPlan>,
}

#[derive(Debug, Clone)]
enum Radio {
    Wifi(WifiSsidNode),
    LoRa(LoRaNode),
    AdsB(AdsBNode),
    Silent,
}

impl Radio {
    fn protocol(&self) -> Option<Protocol> {
        match self {
            Radio::Wifi(_) => Some(Protocol::WifiSsid),
            Radio::LoRa(_) => Some(Protocol::LoRa),
            Radio::AdsB(_) => Some(Protocol::AdsB),
            Radio::Silent => None,
        }
    }

    fn step(&mut self, now: f64, airborne: bool, rng: &mut StreamRng) -> Vec<Transmission> {
        match self {
            // The Wi-Fi state machine keeps running on the ground so its
            // phase does not depend on departure times.
            Radio::Wifi(node) => {
                let txs = node.step(now, rng);
                if airborne {
                    txs
                } else {
                    Vec::new()
                }
            }
            Radio::LoRa(node) if airborne => node.step(now).into_iter().collect(),
            Radio::AdsB(node) if airborne => node.step(now).into_iter().collect(),
            _ => Vec::new(),
        }
    }

    fn hears(&self, tx: &Transmission) -> bool {
        match self {
            Radio::Wifi(node) => node.can_receive(tx),
            Radio::LoRa(node) => tx.protocol == Protocol::LoRa && tx.tx_id != node.id(),
            Radio::AdsB(node) => tx.protocol == Protocol::AdsB && tx.tx_id != node.id(),
            Radio::Silent => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Waiting,
    Airborne,
    Landed,
}

#[derive(Debug, Clone)]
struct Drone {
    id: u32,
    plan: FlightPlan,
    radio: Radio,
    manager: Option<ConflictManager>,
    rng: StreamRng,
    status: Status,
    /// Progress along the plan, seconds of plan time.
    tau: f64,
    altitude_offset: f64,
    position: EnuPosition,
    velocity: VelocityVector,
    guidance: Guidance,
    sequence: u16,
}

impl Drone {
    fn plan_state(&self) -> (EnuPosition, VelocityVector) {
        sample_plan(&self.plan, self.tau).expect("tau is clamped to the plan span")
    }

    fn update_status(&mut self, now: f64) {
        match self.status {
            Status::Waiting if now >= self.plan.departure_time() => self.status = Status::Airborne,
            Status::Airborne if self.tau >= self.plan.arrival_time() => self.status = Status::Landed,
            _ => {}
        }
    }

    /// Point-mass step toward the plan position at the advanced plan clock.
    fn advance(&mut self, dt: f64, max_speed: f64, climb_rate: f64) {
        if self.status != Status::Airborne {
            return;
        }
        let before = self.position;
        self.tau = (self.tau + dt * self.guidance.speed_scale).min(self.plan.arrival_time());
        let (target, plan_v) = self.plan_state();

        let (de, dn) = (target.east - before.east, target.north - before.north);
        let dh = de.hypot(dn);
        let cap = max_speed * dt;
        let k = if dh <= cap { 1.0 } else { cap / dh };
        let mut next = EnuPosition::new(before.east + k * de, before.north + k * dn, before.up);

        next.up = match self.guidance.vertical_rate {
            Some(rate) => before.up + rate * dt,
            None => {
                let goal = (target.up + self.altitude_offset).max(0.0);
                let cap = (climb_rate + plan_v.v_up.abs()) * dt;
                before.up + (goal - before.up).clamp(-cap, cap)
            }
        }
        .max(0.0);

        self.velocity = VelocityVector::new(
            (next.east - before.east) / dt,
            (next.north - before.north) / dt,
            (next.up - before.up) / dt,
        );
        self.position = next;
    }

    fn apply(&mut self, g: Guidance) {
        if self.guidance.vertical_rate.is_some() && g.vertical_rate.is_none() {
            // Hold the altitude reached during the evasion.
            let (plan_pos, _) = self.plan_state();
            self.altitude_offset = self.position.up - plan_pos.up;
        }
        self.altitude_offset += g.climb_by;
        self.guidance = g;
    }
}

fn build_drones(scenario: &Scenario, plans: Vec<FlightPlan>) -> Result<Vec<Drone>> {
    let seed = scenario.sim.seed;
    let mut cfg = ManagerConfig::new(scenario.preset(), 0.0);
    cfg.horizon_s = scenario.horizon();
    let mut drones: Vec<Drone> = scenario
        .drones
        .iter()
        .zip(plans)
        .map(|(d, plan)| {
            let mut rng = node_stream(seed, d.id);
            let radio = match d.protocol {
                ProtocolChoice::Wifi => {
                    Radio::Wifi(WifiSsidNode::new(d.id, scenario.radio.wifi.protocol.clone(), 0.0, &mut rng)?)
                }
                ProtocolChoice::Lora => Radio::LoRa(LoRaNode::new(d.id, scenario.radio.lora.min_interval_s)?),
                ProtocolChoice::Adsb | ProtocolChoice::RpAdsb => {
                    Radio::AdsB(AdsBNode::new(d.id, d.protocol.adsb_variant().expect("ads-b choice")))
                }
                ProtocolChoice::None => Radio::Silent,
            };
            let manager = (d.cooperative && !matches!(radio, Radio::Silent))
                .then(|| ConflictManager::new(d.id, ManagerConfig { staleness_limit_s: d.staleness_limit(), ..cfg }));
            let tau = plan.departure_time();
            let (position, velocity) = sample_plan(&plan, tau)?;
            Ok(Drone {
                id: d.id,
                plan,
                radio,
                manager,
                rng,
                status: Status::Waiting,
                tau,
                altitude_offset: 0.0,
                position,
                velocity,
                guidance: Guidance::default(),
                sequence: 0,
            })
        })
        .collect::<Result<_>>()?;
    drones.sort_by_key(|d| d.id);
    Ok(drones)
}

/// Steps the world from t = 0 to the scenario duration.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    let violations = scenario.validate();
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Error::InvalidScenario(text.join("; ")));
    }
    let sim = &scenario.sim;
    let preset = scenario.preset();
    let mut plans = scenario.drones.iter().map(|d| d.flight_plan(sim.max_speed)).collect::<Result<Vec<_>>>()?;
    if sim.strategic {
        plans = strategic_deconflict(&plans, &preset, sim.strategic_sample_s)?;
    }
    let flown = plans.clone();
    let mut drones = build_drones(scenario, plans)?;

    let dt = sim.timestep_s;
    let n_steps = (sim.duration_s / dt).round() as u64;
    let tick_every = ((sim.control_tick_s / dt).round() as u64).max(1);

    let mut events = Vec::new();
    let mut rssi_trace = Vec::new();
    let mut counters = Counters::default();
    let mut delays = DelayRecorder::new(&sim.delay_bins_m);
    let mut safety = SafetyRecorder::new(preset);
    let mut links: BTreeMap<(u32, u32), StreamRng> = BTreeMap::new();

    for k in 0..=n_steps {
        let now = k as f64 * dt;
        for d in drones.iter_mut() {
            if k > 0 {
                d.advance(dt, sim.max_speed, DEFAULT_CLIMB_RATE);
            }
            d.update_status(now);
        }

        let mut frames = Vec::new();
        for d in drones.iter_mut() {
            let airborne = d.status == Status::Airborne;
            for tx in d.radio.step(now, airborne, &mut d.rng) {
                let beacon =
                    PositionBeacon { drone_id: d.id, position: d.position, sequence: d.sequence, timestamp: tx.start };
                d.sequence = d.sequence.wrapping_add(1);
                // A position outside the encodable range cannot be sent.
                let Ok(frame) = encode_ssid(&beacon) else { continue };
                counters.transmissions += 1;
                frames.push((tx, d.position, frame));
            }
        }

        for (tx, tx_pos, frame) in &frames {
            let link = scenario.radio.link(tx.protocol);
            let budget = link.budget.with_power_offset(tx.power_offset_db);
            for r in drones.iter_mut() {
                if r.status != Status::Airborne || r.radio.protocol() != Some(tx.protocol) || !r.radio.hears(tx) {
                    continue;
                }
                counters.link_attempts += 1;
                let distance = tx_pos.distance(&r.position);
                let rng = links.entry((tx.tx_id, r.id)).or_insert_with(|| link_stream(sim.seed, tx.tx_id, r.id));
                let level = rssi(&link.path_loss, &budget, distance.max(MIN_LINK_DISTANCE_M), rng)?;
                let received = reception_success(level, &budget);
                if sim.record_rssi {
                    rssi_trace.push(RssiRecord {
                        time_s: tx.start,
                        tx_id: tx.tx_id,
                        rx_id: r.id,
                        distance_m: distance,
                        rssi_dbm: level,
                        received,
                    });
                }
                if !received {
                    continue;
                }
                let Ok(decoded) = decode_ssid(frame) else { continue };
                counters.receptions += 1;
                delays.record(tx.tx_id, r.id, tx.start, distance);
                if let Some(m) = r.manager.as_mut() {
                    m.receive(&decoded);
                }
            }
        }

        for i in 0..drones.len() {
            for j in i + 1..drones.len() {
                let (a, b) = (&drones[i], &drones[j]);
                if a.status == Status::Airborne && b.status == Status::Airborne {
                    safety.observe((a.id, &a.position), (b.id, &b.position), now, dt, &mut events);
                } else {
                    safety.close(a.id, b.id);
                }
            }
        }

        if k % tick_every == 0 {
            for d in drones.iter_mut().filter(|d| d.status == Status::Airborne) {
                let Some(m) = d.manager.as_mut() else { continue };
                let g = m.tick(now, d.position, d.velocity);
                events.extend(m.drain_log());
                d.apply(g);
            }
        }
        counters.steps += 1;
    }

    counters.stale_exclusions = drones.iter().filter_map(|d| d.manager.as_ref()).map(|m| m.stale_exclusions()).sum();
    Ok(RunOutput { events, delay: delays.finish(), safety: safety.finish(), rssi: rssi_trace, counters, plans: flown })
}
