//! Airspace geometry: local ENU kinematics, hockey-puck separation volumes and
//! the time- and distance-based conflict-management layer classifiers.
//!
//! All types are plain values and every operation is a pure function.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Top speed of the small-UAV population (m/s).
pub const DEFAULT_MAX_SPEED: f64 = 74.0;

/// Upper edge of the collision-avoidance time band (s).
pub const CA_TIME_LIMIT: f64 = 30.0;
/// Upper edge of the well-clear time band (s).
pub const WC_TIME_LIMIT: f64 = 120.0;
/// Upper edge of the strategic time band (s).
pub const STRATEGIC_TIME_LIMIT: f64 = 86_400.0;

/// Position in a local East-North-Up frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnuPosition {
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

impl EnuPosition {
    pub const fn new(east: f64, north: f64, up: f64) -> Self {
        Self { east, north, up }
    }

    pub fn is_finite(&self) -> bool {
        self.east.is_finite() && self.north.is_finite() && self.up.is_finite()
    }

    /// Displacement `other - self`.
    pub fn to(&self, other: &EnuPosition) -> [f64; 3] {
        [other.east - self.east, other.north - self.north, other.up - self.up]
    }

    pub fn distance(&self, other: &EnuPosition) -> f64 {
        let [de, dn, du] = self.to(other);
        (de * de + dn * dn + du * du).sqrt()
    }

    /// Position after moving with `v` for `dt` seconds.
    pub fn advanced(&self, v: &VelocityVector, dt: f64) -> EnuPosition {
        EnuPosition { east: self.east + v.v_east * dt, north: self.north + v.v_north * dt, up: self.up + v.v_up * dt }
    }
}

impl fmt::Display for EnuPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.2}, {:.2}, {:.2})", self.east, self.north, self.up)
    }
}

/// Velocity in the ENU frame, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityVector {
    pub v_east: f64,
    pub v_north: f64,
    pub v_up: f64,
}

impl VelocityVector {
    pub const ZERO: VelocityVector = VelocityVector::new(0.0, 0.0, 0.0);

    pub const fn new(v_east: f64, v_north: f64, v_up: f64) -> Self {
        Self { v_east, v_north, v_up }
    }

    pub fn speed(&self) -> f64 {
        (self.v_east * self.v_east + self.v_north * self.v_north + self.v_up * self.v_up).sqrt()
    }

    pub fn horizontal_speed(&self) -> f64 {
        self.v_east.hypot(self.v_north)
    }

    pub fn scaled(&self, k: f64) -> VelocityVector {
        VelocityVector::new(self.v_east * k, self.v_north * k, self.v_up * k)
    }

    pub fn is_finite(&self) -> bool {
        self.v_east.is_finite() && self.v_north.is_finite() && self.v_up.is_finite()
    }
}

/// A 4D waypoint: where the drone should be and when.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: EnuPosition,
    pub time: f64,
}

impl Waypoint {
    pub const fn new(position: EnuPosition, time: f64) -> Self {
        Self { position, time }
    }
}

/// Time-ordered list of waypoints flown with piecewise-constant velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    drone_id: u32,
    waypoints: Vec<Waypoint>,
}

impl FlightPlan {
    /// Builds a plan, checking waypoint count, ordering and implied segment speeds.
    pub fn new(drone_id: u32, waypoints: Vec<Waypoint>, max_speed: f64) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidPlan(format!(
                "drone {drone_id}: at least 2 waypoints required, got {}",
                waypoints.len()
            )));
        }
        for (i, wp) in waypoints.iter().enumerate() {
            if !wp.position.is_finite() || !wp.time.is_finite() {
                return Err(Error::InvalidPlan(format!("drone {drone_id}: waypoint {i} is not finite")));
            }
            if wp.time < 0.0 {
                return Err(Error::InvalidPlan(format!("drone {drone_id}: waypoint {i} has negative time")));
            }
        }
        for (i, pair) in waypoints.windows(2).enumerate() {
            let dt = pair[1].time - pair[0].time;
            if dt <= 0.0 {
                return Err(Error::InvalidPlan(format!(
                    "drone {drone_id}: waypoint times must strictly increase (segment {i})"
                )));
            }
            let speed = pair[0].position.distance(&pair[1].position) / dt;
            if speed > max_speed {
                return Err(Error::InvalidPlan(format!(
                    "drone {drone_id}: segment {i} implies {speed:.2} m/s > {max_speed} m/s"
                )));
            }
        }
        Ok(Self { drone_id, waypoints })
    }

    pub fn drone_id(&self) -> u32 {
        self.drone_id
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn departure_time(&self) -> f64 {
        self.waypoints[0].time
    }

    pub fn arrival_time(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].time
    }

    /// Same route, every waypoint shifted later by `delay` seconds.
    pub fn delayed(&self, delay: f64) -> FlightPlan {
        let waypoints = self.waypoints.iter().map(|wp| Waypoint::new(wp.position, wp.time + delay)).collect();
        FlightPlan { drone_id: self.drone_id, waypoints }
    }

    /// Same schedule, every waypoint raised by `delta_up` meters.
    pub fn raised(&self, delta_up: f64) -> FlightPlan {
        let waypoints = self
            .waypoints
            .iter()
            .map(|wp| {
                let p = wp.position;
                Waypoint::new(EnuPosition::new(p.east, p.north, p.up + delta_up), wp.time)
            })
            .collect();
        FlightPlan { drone_id: self.drone_id, waypoints }
    }
}

/// Hockey-puck volume: horizontal radius `d_h` and vertical half-height `d_v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationVolume {
    pub d_h: f64,
    pub d_v: f64,
}

impl SeparationVolume {
    pub fn new(d_h: f64, d_v: f64) -> Result<Self> {
        if !(d_h > 0.0 && d_h.is_finite()) || !(d_v > 0.0 && d_v.is_finite()) {
            return Err(Error::InvalidVolume(format!("d_h={d_h}, d_v={d_v}; both must be positive")));
        }
        Ok(Self { d_h, d_v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Suburban,
    Urban,
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Environment::Suburban => "suburban",
            Environment::Urban => "urban",
        })
    }
}

/// Well-clear and collision-avoidance volumes for one deployment environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentPreset {
    pub name: Environment,
    pub well_clear: SeparationVolume,
    pub collision: SeparationVolume,
}

impl EnvironmentPreset {
    /// Sub-urban volumes; well-clear pinned to the lower bound of 600-1500 m / 75-90 m.
    pub const SUBURBAN: EnvironmentPreset = EnvironmentPreset {
        name: Environment::Suburban,
        well_clear: SeparationVolume { d_h: 600.0, d_v: 75.0 },
        collision: SeparationVolume { d_h: 150.0, d_v: 30.0 },
    };

    pub const URBAN: EnvironmentPreset = EnvironmentPreset {
        name: Environment::Urban,
        well_clear: SeparationVolume { d_h: 6.0, d_v: 7.3 },
        collision: SeparationVolume { d_h: 3.0, d_v: 3.7 },
    };

    /// Custom preset; the collision puck must nest inside the well-clear puck.
    pub fn new(name: Environment, well_clear: SeparationVolume, collision: SeparationVolume) -> Result<Self> {
        if well_clear.d_h < collision.d_h || well_clear.d_v < collision.d_v {
            return Err(Error::InvalidVolume("collision volume must fit inside the well-clear volume".into()));
        }
        Ok(Self { name, well_clear, collision })
    }

    pub fn builtin(name: Environment) -> Self {
        match name {
            Environment::Suburban => Self::SUBURBAN,
            Environment::Urban => Self::URBAN,
        }
    }
}

/// Conflict-management layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmLayer {
    StrategicDeconfliction,
    WellClear,
    CollisionAvoidance,
    NoConflict,
}

impl CmLayer {
    pub fn as_str(&self) -> &'static str {
        match self {
            CmLayer::StrategicDeconfliction => "strategic",
            CmLayer::WellClear => "well-clear",
            CmLayer::CollisionAvoidance => "collision-avoidance",
            CmLayer::NoConflict => "none",
        }
    }
}

impl fmt::Display for CmLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn horizontal_separation(a: &EnuPosition, b: &EnuPosition) -> f64 {
    (a.east - b.east).hypot(a.north - b.north)
}

pub fn vertical_separation(a: &EnuPosition, b: &EnuPosition) -> f64 {
    (a.up - b.up).abs()
}

/// True iff `b` lies strictly inside the puck centred on `a`.
pub fn puck_violation(a: &EnuPosition, b: &EnuPosition, vol: &SeparationVolume) -> bool {
    horizontal_separation(a, b) < vol.d_h && vertical_separation(a, b) < vol.d_v
}

/// Rate at which the range between two constant-velocity points shrinks.
/// Positive when closing, negative when receding.
pub fn closing_speed(pa: &EnuPosition, va: &VelocityVector, pb: &EnuPosition, vb: &VelocityVector) -> Result<f64> {
    let r = pa.to(pb);
    let range = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if range == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    let v = [vb.v_east - va.v_east, vb.v_north - va.v_north, vb.v_up - va.v_up];
    let range_rate = (r[0] * v[0] + r[1] * v[1] + r[2] * v[2]) / range;
    Ok(-range_rate)
}

/// Range divided by closing speed, using instantaneous velocities.
/// Returns `f64::INFINITY` when the pair is not closing.
pub fn time_to_collision(pa: &EnuPosition, va: &VelocityVector, pb: &EnuPosition, vb: &VelocityVector) -> Result<f64> {
    let closing = closing_speed(pa, va, pb, vb)?;
    if closing > 0.0 {
        Ok(pa.distance(pb) / closing)
    } else {
        Ok(f64::INFINITY)
    }
}

/// Maps a time-to-collision onto a layer. Band edges belong to the more urgent layer.
pub fn classify_layer_time(ttc: f64) -> Result<CmLayer> {
    if ttc.is_nan() || ttc < 0.0 {
        return Err(Error::NegativeTime(ttc));
    }
    Ok(if ttc <= CA_TIME_LIMIT {
        CmLayer::CollisionAvoidance
    } else if ttc <= WC_TIME_LIMIT {
        CmLayer::WellClear
    } else if ttc <= STRATEGIC_TIME_LIMIT {
        CmLayer::StrategicDeconfliction
    } else {
        CmLayer::NoConflict
    })
}

/// Distance-based layer from the preset's nested pucks. Never returns the strategic layer.
pub fn classify_layer_distance(a: &EnuPosition, b: &EnuPosition, preset: &EnvironmentPreset) -> CmLayer {
    if puck_violation(a, b, &preset.collision) {
        CmLayer::CollisionAvoidance
    } else if puck_violation(a, b, &preset.well_clear) {
        CmLayer::WellClear
    } else {
        CmLayer::NoConflict
    }
}

/// Position and velocity on the plan at time `t` by linear interpolation.
///
/// At an interior waypoint the velocity of the outgoing segment is reported.
pub fn sample_plan(plan: &FlightPlan, t: f64) -> Result<(EnuPosition, VelocityVector)> {
    let wps = plan.waypoints();
    let (start, end) = (plan.departure_time(), plan.arrival_time());
    if !(t >= start && t <= end) {
        return Err(Error::OutsidePlan { t, start, end });
    }
    // Index of the segment whose start time is the last one <= t, capped at the final segment.
    let seg = wps[1..wps.len() - 1].partition_point(|wp| wp.time <= t);
    let (a, b) = (&wps[seg], &wps[seg + 1]);
    let span = b.time - a.time;
    let d = a.position.to(&b.position);
    let vel = VelocityVector::new(d[0] / span, d[1] / span, d[2] / span);
    let frac = (t - a.time) / span;
    let pos =
        EnuPosition::new(a.position.east + d[0] * frac, a.position.north + d[1] * frac, a.position.up + d[2] * frac);
    Ok((pos, vel))
}
