use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{puck_violation, CmLayer, EnuPosition, EnvironmentPreset, SeparationVolume};

use super::detect::{ConflictEvent, DETECTION_STEP_S};
use super::track::TrackEstimate;

/// Default climb and descent rate limit, m/s.
pub const DEFAULT_CLIMB_RATE: f64 = 5.0;
/// Below this altitude nobody is sent downwards, meters.
pub const GROUND_PROXIMITY_M: f64 = 10.0;
/// Separations this close to a threshold count as meeting it, so that a
/// climb of exactly d_V is not undone by rounding, meters.
const SEPARATION_TOLERANCE_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerticalDirection {
    Up,
    Down,
}

impl VerticalDirection {
    pub fn sign(self) -> f64 {
        match self {
            VerticalDirection::Up => 1.0,
            VerticalDirection::Down => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolutionManeuver {
    AltitudeOffset(f64),
    DepartureDelay(f64),
    SpeedScale(f64),
    /// `horizontal_scale` multiplies horizontal progress; 0 stops it.
    VerticalEvade {
        direction: VerticalDirection,
        rate: f64,
        horizontal_scale: f64,
    },
    /// Keep the current trajectory.
    Hold,
}

impl fmt::Display for ResolutionManeuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResolutionManeuver::AltitudeOffset(d) => write!(f, "altitude-offset({d:+.2} m)"),
            ResolutionManeuver::DepartureDelay(d) => write!(f, "departure-delay({d:.1} s)"),
            ResolutionManeuver::SpeedScale(k) => write!(f, "speed-scale({k})"),
            ResolutionManeuver::VerticalEvade { direction, rate, horizontal_scale } => {
                let dir = match direction {
                    VerticalDirection::Up => "up",
                    VerticalDirection::Down => "down",
                };
                write!(f, "vertical-evade({dir} {rate} m/s")?;
                if *horizontal_scale != 1.0 {
                    write!(f, " speed-scale {horizontal_scale}")?;
                }
                f.write_str(")")
            }
            ResolutionManeuver::Hold => f.write_str("hold"),
        }
    }
}

/// A maneuver and the drone that flies it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub assignee: u32,
    pub maneuver: ResolutionManeuver,
    /// The volume the maneuver is proven to keep clear. Equals the well-clear
    /// puck unless only the collision puck could be protected.
    pub guard: SeparationVolume,
}

impl Resolution {
    pub fn is_degraded(&self, preset: &EnvironmentPreset) -> bool {
        self.guard != preset.well_clear
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveOptions {
    pub horizon: f64,
    pub climb_rate: f64,
}

/// Position of a tracked drone at `t` if it starts `maneuver` at `t0`.
pub fn maneuvered_position(
    track: &TrackEstimate,
    maneuver: &ResolutionManeuver,
    t0: f64,
    t: f64,
    climb_rate: f64,
) -> EnuPosition {
    let base = track.predict(t0);
    let v = track.last_velocity;
    let dt = (t - t0).max(0.0);
    match *maneuver {
        ResolutionManeuver::Hold => base.advanced(&v, dt),
        ResolutionManeuver::AltitudeOffset(delta) => {
            let mut p = base.advanced(&v, dt);
            p.up += delta.signum() * delta.abs().min(climb_rate * dt);
            p
        }
        ResolutionManeuver::SpeedScale(k) => base.advanced(&v.scaled(k), dt),
        ResolutionManeuver::DepartureDelay(d) => base.advanced(&v, (dt - d).max(0.0)),
        ResolutionManeuver::VerticalEvade { direction, rate, horizontal_scale } => {
            let mut p = base;
            p.east += v.v_east * horizontal_scale * dt;
            p.north += v.v_north * horizontal_scale * dt;
            p.up = (p.up + direction.sign() * rate * dt).max(0.0);
            p
        }
    }
}

/// Whether `mover` flying `maneuver` stays outside `guard` against every
/// other fresh track over the horizon.
fn clear_of_all(
    mover: &TrackEstimate,
    maneuver: &ResolutionManeuver,
    others: &[&TrackEstimate],
    now: f64,
    opts: &ResolveOptions,
    guard: &SeparationVolume,
) -> bool {
    let guard = &SeparationVolume { d_h: guard.d_h - SEPARATION_TOLERANCE_M, d_v: guard.d_v - SEPARATION_TOLERANCE_M };
    let steps = (opts.horizon / DETECTION_STEP_S).round() as usize;
    (0..=steps).all(|k| {
        let t = now + k as f64 * DETECTION_STEP_S;
        let p = maneuvered_position(mover, maneuver, now, t, opts.climb_rate);
        others.iter().all(|o| !puck_violation(&p, &o.predict(t), guard))
    })
}

/// Picks a maneuver for `assignee` from the ordered menu. An already clear
/// pair gets `Hold`. When no entry keeps the well-clear puck intact, the menu
/// is retried against the collision puck so the pair is at least kept out of
/// collision-avoidance territory.
pub(crate) fn formulate_for(
    event: &ConflictEvent,
    tracks: &[TrackEstimate],
    preset: &EnvironmentPreset,
    opts: &ResolveOptions,
    assignee: u32,
) -> Result<Resolution> {
    let (a, b) = event.pair;
    if event.layer != CmLayer::WellClear {
        return Err(Error::InvalidParameter(format!("formulation needs a well-clear event, got {}", event.layer)));
    }
    let now = event.detected_at;
    let mover = tracks
        .iter()
        .find(|t| t.drone_id == assignee)
        .ok_or_else(|| Error::InvalidParameter(format!("no track for drone {assignee}")))?;
    let others: Vec<&TrackEstimate> = tracks.iter().filter(|t| t.drone_id != assignee && !t.is_stale(now)).collect();

    let hold = ResolutionManeuver::Hold;
    if clear_of_all(mover, &hold, &others, now, opts, &preset.well_clear) {
        return Ok(Resolution { assignee, maneuver: hold, guard: preset.well_clear });
    }
    let menu = [ResolutionManeuver::AltitudeOffset(preset.well_clear.d_v), ResolutionManeuver::SpeedScale(0.5), hold];
    for guard in [preset.well_clear, preset.collision] {
        if let Some(m) = menu.iter().find(|m| clear_of_all(mover, m, &others, now, opts, &guard)) {
            return Ok(Resolution { assignee, maneuver: *m, guard });
        }
    }
    Err(Error::NoResolution { a, b })
}

/// Formulates a resolution for a well-clear event. The higher drone id yields.
pub fn formulate_solution(
    event: &ConflictEvent,
    tracks: &[TrackEstimate],
    preset: &EnvironmentPreset,
    opts: &ResolveOptions,
) -> Result<Resolution> {
    formulate_for(event, tracks, preset, opts, event.pair.1)
}

/// Paired last-resort maneuvers, lower id first. The lower id climbs and the
/// higher descends, unless either is near the ground; then both climb and the
/// lower id also stops horizontally.
pub fn collision_avoid(
    event: &ConflictEvent,
    tracks: &[TrackEstimate],
    climb_rate: f64,
) -> Result<(ResolutionManeuver, ResolutionManeuver)> {
    if event.layer != CmLayer::CollisionAvoidance {
        return Err(Error::InvalidParameter(format!(
            "collision avoidance needs a collision event, got {}",
            event.layer
        )));
    }
    let (a, b) = event.pair;
    let altitude = |id: u32| {
        tracks
            .iter()
            .find(|t| t.drone_id == id)
            .map(|t| t.predict(event.detected_at).up)
            .ok_or_else(|| Error::InvalidParameter(format!("no track for drone {id}")))
    };
    let near_ground = altitude(a)?.min(altitude(b)?) < GROUND_PROXIMITY_M;
    let evade = |direction, horizontal_scale| ResolutionManeuver::VerticalEvade {
        direction,
        rate: climb_rate,
        horizontal_scale,
    };
    Ok(if near_ground {
        (evade(VerticalDirection::Up, 0.0), evade(VerticalDirection::Up, 1.0))
    } else {
        (evade(VerticalDirection::Up, 1.0), evade(VerticalDirection::Down, 1.0))
    })
}
