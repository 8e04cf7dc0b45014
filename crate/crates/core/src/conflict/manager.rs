//! Per-drone separation loop: detect, formulate, implement, monitor.

use std::collections::{BTreeMap, BTreeSet};

use crate::beacon::PositionBeacon;
use crate::geometry::{closing_speed, puck_violation, CmLayer, EnuPosition, EnvironmentPreset, VelocityVector};

use super::detect::{default_horizon, first_violation, ConflictEvent};
use super::log::{EventKind, EventRecord};
use super::resolve::{
    collision_avoid, formulate_for, maneuvered_position, Resolution, ResolutionManeuver, ResolveOptions,
    DEFAULT_CLIMB_RATE,
};
use super::track::TrackEstimate;

/// Default control period, seconds.
pub const CONTROL_TICK_S: f64 = 0.1;
/// A pair whose formulation failed is retried after this long, seconds.
const ESCALATION_RETRY_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManagerConfig {
    pub preset: EnvironmentPreset,
    pub horizon_s: f64,
    pub staleness_limit_s: f64,
    pub climb_rate: f64,
}

impl ManagerConfig {
    pub fn new(preset: EnvironmentPreset, staleness_limit_s: f64) -> Self {
        Self { preset, horizon_s: default_horizon(preset.name), staleness_limit_s, climb_rate: DEFAULT_CLIMB_RATE }
    }
}

/// What the ownship controller should do until the next tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guidance {
    /// Multiplier on progress along the flight plan.
    pub speed_scale: f64,
    /// Signed vertical rate while evading, overriding altitude tracking.
    pub vertical_rate: Option<f64>,
    /// One-shot change to the altitude offset, meters.
    pub climb_by: f64,
}

impl Default for Guidance {
    fn default() -> Self {
        Self { speed_scale: 1.0, vertical_rate: None, climb_by: 0.0 }
    }
}

#[derive(Debug, Clone)]
struct Active {
    /// `None` once formulation failed and the pair was escalated.
    resolution: Option<Resolution>,
    started: f64,
    intruder_at_start: TrackEstimate,
}

#[derive(Debug, Clone)]
pub struct ConflictManager {
    ownship: u32,
    config: ManagerConfig,
    tracks: BTreeMap<u32, TrackEstimate>,
    active: BTreeMap<u32, Active>,
    evading: BTreeMap<u32, ResolutionManeuver>,
    self_assigned: BTreeSet<u32>,
    stale_exclusions: u64,
    log: Vec<EventRecord>,
}

impl ConflictManager {
    pub fn new(ownship: u32, config: ManagerConfig) -> Self {
        Self {
            ownship,
            config,
            tracks: BTreeMap::new(),
            active: BTreeMap::new(),
            evading: BTreeMap::new(),
            self_assigned: BTreeSet::new(),
            stale_exclusions: 0,
            log: Vec::new(),
        }
    }

    pub fn ownship(&self) -> u32 {
        self.ownship
    }

    pub fn config(&self) -> &ManagerConfig {
        &self.config
    }

    pub fn track(&self, id: u32) -> Option<&TrackEstimate> {
        self.tracks.get(&id)
    }

    /// Track-ticks skipped because the track was stale.
    pub fn stale_exclusions(&self) -> u64 {
        self.stale_exclusions
    }

    pub fn drain_log(&mut self) -> Vec<EventRecord> {
        std::mem::take(&mut self.log)
    }

    /// Folds a decoded beacon into the tracks. The beacon time is the sender's clock.
    pub fn receive(&mut self, beacon: &PositionBeacon) {
        if beacon.drone_id == self.ownship {
            return;
        }
        let limit = self.config.staleness_limit_s;
        self.tracks
            .entry(beacon.drone_id)
            .and_modify(|t| t.update(beacon.position, beacon.timestamp))
            .or_insert_with(|| TrackEstimate::new(beacon.drone_id, beacon.position, beacon.timestamp, limit));
    }

    fn record(&mut self, time_s: f64, kind: EventKind, other: u32, layer: CmLayer, detail: String) {
        self.log.push(EventRecord { time_s, kind, drone_a: self.ownship, drone_b: other, layer, detail });
    }

    /// One pass of the loop at `now` given the ownship's true state.
    pub fn tick(&mut self, now: f64, position: EnuPosition, velocity: VelocityVector) -> Guidance {
        let own = TrackEstimate::with_velocity(self.ownship, position, velocity, now);
        let stale = self.tracks.values().filter(|t| t.is_stale(now)).count();
        self.stale_exclusions += stale as u64;
        let fresh: Vec<TrackEstimate> = self.tracks.values().filter(|t| !t.is_stale(now)).cloned().collect();
        let mut all = Vec::with_capacity(fresh.len() + 1);
        all.push(own.clone());
        all.extend(fresh.iter().cloned());

        let mut guidance = Guidance::default();
        self.collision_layer(now, &own, &fresh, &all);
        self.monitor(now, &own, &fresh);
        guidance.climb_by = self.separation_layer(now, &own, &fresh, &all);

        for act in self.active.values() {
            if let Some(Resolution { assignee, maneuver: ResolutionManeuver::SpeedScale(k), .. }) = act.resolution {
                if assignee == self.ownship {
                    guidance.speed_scale = guidance.speed_scale.min(k);
                }
            }
        }
        for m in self.evading.values() {
            if let ResolutionManeuver::VerticalEvade { horizontal_scale, .. } = m {
                guidance.speed_scale = guidance.speed_scale.min(*horizontal_scale);
            }
        }
        guidance.vertical_rate = self.evading.values().next().and_then(|m| match m {
            ResolutionManeuver::VerticalEvade { direction, rate, .. } => Some(direction.sign() * rate),
            _ => None,
        });
        guidance
    }

    fn collision_layer(&mut self, now: f64, own: &TrackEstimate, fresh: &[TrackEstimate], all: &[TrackEstimate]) {
        let collision = self.config.preset.collision;
        let lost: Vec<u32> =
            self.evading.keys().copied().filter(|id| !fresh.iter().any(|t| t.drone_id == *id)).collect();
        for id in lost {
            self.evading.remove(&id);
            self.record(now, EventKind::EvadeEnd, id, CmLayer::CollisionAvoidance, "track lost".into());
        }
        for intruder in fresh {
            let id = intruder.drone_id;
            let inside = puck_violation(&own.last_position, &intruder.predict(now), &collision);
            if inside && !self.evading.contains_key(&id) {
                let pair = (self.ownship.min(id), self.ownship.max(id));
                let event = ConflictEvent {
                    pair,
                    detected_at: now,
                    predicted_violation_time: now,
                    layer: CmLayer::CollisionAvoidance,
                };
                let Ok((lo, hi)) = collision_avoid(&event, all, self.config.climb_rate) else { continue };
                let mine = if self.ownship < id { lo } else { hi };
                self.evading.insert(id, mine);
                self.record(now, EventKind::CollisionAvoid, id, CmLayer::CollisionAvoidance, mine.to_string());
            } else if !inside && self.evading.remove(&id).is_some() {
                self.record(now, EventKind::EvadeEnd, id, CmLayer::CollisionAvoidance, "collision puck clear".into());
            }
        }
    }

    fn monitor(&mut self, now: f64, own: &TrackEstimate, fresh: &[TrackEstimate]) {
        let preset = self.config.preset;
        let ids: Vec<u32> = self.active.keys().copied().collect();
        for id in ids {
            // Without a fresh track there is nothing to compare against.
            let Some(intruder) = fresh.iter().find(|t| t.drone_id == id) else { continue };
            let act = &self.active[&id];
            let p = intruder.predict(now);
            let closing = closing_speed(&own.last_position, &own.last_velocity, &p, &intruder.last_velocity)
                .unwrap_or(f64::INFINITY);
            let in_well_clear = puck_violation(&own.last_position, &p, &preset.well_clear);
            if closing <= 0.0 && !in_well_clear {
                self.active.remove(&id);
                self.self_assigned.remove(&id);
                self.record(now, EventKind::Resolved, id, CmLayer::WellClear, "pair diverging".into());
                continue;
            }
            let Some(res) = act.resolution else {
                if now - act.started >= ESCALATION_RETRY_S {
                    self.active.remove(&id);
                }
                continue;
            };
            let breached = puck_violation(&own.last_position, &p, &res.guard);
            let error = if now - act.started <= self.config.horizon_s {
                let expected_maneuver = if res.assignee == id { res.maneuver } else { ResolutionManeuver::Hold };
                let expected = maneuvered_position(
                    &act.intruder_at_start,
                    &expected_maneuver,
                    act.started,
                    now,
                    self.config.climb_rate,
                );
                expected.distance(&p)
            } else {
                0.0
            };
            if breached || error > preset.well_clear.d_h / 2.0 {
                self.active.remove(&id);
                self.self_assigned.insert(id);
                let why = if breached {
                    "guard volume breached".to_string()
                } else {
                    format!("prediction error {error:.1} m")
                };
                self.record(now, EventKind::MonitorRetrigger, id, CmLayer::WellClear, why);
            }
        }
    }

    /// Returns the altitude change to command this tick.
    fn separation_layer(
        &mut self,
        now: f64,
        own: &TrackEstimate,
        fresh: &[TrackEstimate],
        all: &[TrackEstimate],
    ) -> f64 {
        let preset = self.config.preset;
        let opts = ResolveOptions { horizon: self.config.horizon_s, climb_rate: self.config.climb_rate };
        let mut climb_by = 0.0;
        for intruder in fresh {
            let id = intruder.drone_id;
            if self.active.contains_key(&id) || self.evading.contains_key(&id) {
                continue;
            }
            let Some(t_violation) = first_violation(own, intruder, now, self.config.horizon_s, &preset) else {
                continue;
            };
            let pair = (self.ownship.min(id), self.ownship.max(id));
            let event = ConflictEvent {
                pair,
                detected_at: now,
                predicted_violation_time: t_violation,
                layer: CmLayer::WellClear,
            };
            self.record(
                now,
                EventKind::Detect,
                id,
                CmLayer::WellClear,
                format!("violation in {:.1} s", t_violation - now),
            );
            let assignee = if self.self_assigned.contains(&id) { self.ownship } else { pair.1 };
            match formulate_for(&event, all, &preset, &opts, assignee) {
                Ok(res) => {
                    let scope = if res.is_degraded(&preset) { "collision puck" } else { "well-clear puck" };
                    self.record(
                        now,
                        EventKind::Formulate,
                        id,
                        CmLayer::WellClear,
                        format!("{} by {} guarding {scope}", res.maneuver, res.assignee),
                    );
                    if res.assignee == self.ownship {
                        if let ResolutionManeuver::AltitudeOffset(d) = res.maneuver {
                            climb_by += d;
                        }
                        self.record(now, EventKind::Implement, id, CmLayer::WellClear, res.maneuver.to_string());
                    }
                    self.active.insert(
                        id,
                        Active { resolution: Some(res), started: now, intruder_at_start: intruder.clone() },
                    );
                }
                Err(e) => {
                    self.record(now, EventKind::Escalate, id, CmLayer::WellClear, e.to_string());
                    self.active
                        .insert(id, Active { resolution: None, started: now, intruder_at_start: intruder.clone() });
                }
            }
        }
        climb_by
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beacon(id: u32, p: (f64, f64, f64), t: f64) -> PositionBeacon {
        PositionBeacon { drone_id: id, position: EnuPosition::new(p.0, p.1, p.2), sequence: 0, timestamp: t }
    }

    fn urban() -> ManagerConfig {
        ManagerConfig::new(EnvironmentPreset::URBAN, 2.4)
    }

    /// Feeds two fixes so the track has a velocity.
    fn feed(m: &mut ConflictManager, id: u32, p0: (f64, f64, f64), v: (f64, f64, f64), t0: f64, t1: f64) {
        m.receive(&beacon(id, p0, t0));
        let dt = t1 - t0;
        m.receive(&beacon(id, (p0.0 + v.0 * dt, p0.1 + v.1 * dt, p0.2 + v.2 * dt), t1));
    }

    #[test]
    fn higher_id_climbs_lower_id_holds() {
        let mut m2 = ConflictManager::new(2, urban());
        feed(&mut m2, 1, (-1.0, 0.0, 30.0), (2.0, 0.0, 0.0), 0.0, 0.5);
        let g = m2.tick(0.5, EnuPosition::new(20.0, 0.0, 30.0), VelocityVector::new(-2.0, 0.0, 0.0));
        assert_eq!(g.climb_by, 7.3);
        assert_eq!(g.speed_scale, 1.0);
        let kinds: Vec<_> = m2.drain_log().iter().map(|r| r.kind).collect();
        assert_eq!(kinds, [EventKind::Detect, EventKind::Formulate, EventKind::Implement]);

        let mut m1 = ConflictManager::new(1, urban());
        feed(&mut m1, 2, (21.0, 0.0, 30.0), (-2.0, 0.0, 0.0), 0.0, 0.5);
        let g = m1.tick(0.5, EnuPosition::new(0.0, 0.0, 30.0), VelocityVector::new(2.0, 0.0, 0.0));
        assert_eq!(g, Guidance::default());
        // Re-detection is suppressed while the resolution is active.
        m1.drain_log();
        m1.tick(0.6, EnuPosition::new(0.2, 0.0, 30.0), VelocityVector::new(2.0, 0.0, 0.0));
        assert!(m1.drain_log().is_empty());
    }

    #[test]
    fn collision_puck_triggers_evasion() {
        let mut m = ConflictManager::new(1, urban());
        m.receive(&beacon(2, (2.0, 0.0, 30.0), 0.0));
        let g = m.tick(0.0, EnuPosition::new(0.0, 0.0, 30.0), VelocityVector::ZERO);
        assert_eq!(g.vertical_rate, Some(5.0));
        let log = m.drain_log();
        assert_eq!(log[0].kind, EventKind::CollisionAvoid);
        // The evasion ends once the collision puck is clear.
        let g = m.tick(1.0, EnuPosition::new(0.0, 0.0, 35.0), VelocityVector::ZERO);
        assert_eq!(g.vertical_rate, None);
        assert!(m.drain_log().iter().any(|r| r.kind == EventKind::EvadeEnd));
    }

    #[test]
    fn no_beacons_no_action() {
        let mut m = ConflictManager::new(1, urban());
        for k in 0..100 {
            let g = m.tick(k as f64 * 0.1, EnuPosition::new(0.0, 0.0, 30.0), VelocityVector::new(2.0, 0.0, 0.0));
            assert_eq!(g, Guidance::default());
        }
        assert!(m.drain_log().is_empty());
    }

    #[test]
    fn monitoring_retriggers_when_intruder_ignores_maneuver() {
        let mut m1 = ConflictManager::new(1, urban());
        let own_v = VelocityVector::new(1.0, 0.0, 0.0);
        feed(&mut m1, 2, (30.5, 0.0, 30.0), (-1.0, 0.0, 0.0), 0.0, 0.5);
        let mut climbed = 0.0;
        let mut t = 0.5;
        while t < 10.0 {
            let own_p = EnuPosition::new(t, 0.0, 30.0);
            // The intruder keeps flying level.
            m1.receive(&beacon(2, (30.5 - t, 0.0, 30.0), t));
            climbed += m1.tick(t, own_p, own_v).climb_by;
            t += 0.1;
        }
        let log = m1.drain_log();
        let retrigger = log.iter().position(|r| r.kind == EventKind::MonitorRetrigger).expect("retrigger");
        assert!(log[retrigger..].iter().any(|r| r.kind == EventKind::Implement));
        assert_eq!(climbed, 7.3);
    }

    #[test]
    fn stale_tracks_are_counted_not_used() {
        let mut m = ConflictManager::new(1, urban());
        m.receive(&beacon(2, (2.0, 0.0, 30.0), 0.0));
        let g = m.tick(5.0, EnuPosition::new(0.0, 0.0, 30.0), VelocityVector::ZERO);
        assert_eq!(g, Guidance::default());
        assert_eq!(m.stale_exclusions(), 1);
    }

    #[test]
    fn identical_inputs_identical_logs() {
        let run = || {
            let mut m = ConflictManager::new(2, urban());
            feed(&mut m, 1, (-1.0, 0.0, 30.0), (2.0, 0.0, 0.0), 0.0, 0.5);
            let mut lines = Vec::new();
            for k in 0..50 {
                let t = 0.5 + k as f64 * 0.1;
                m.tick(t, EnuPosition::new(20.0 - 2.0 * (t - 0.5), 0.0, 30.0), VelocityVector::new(-2.0, 0.0, 0.0));
                lines.extend(m.drain_log().iter().map(|r| r.to_string()));
            }
            lines
        };
        assert_eq!(run(), run());
    }
}
