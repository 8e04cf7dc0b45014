use crate::geometry::{EnuPosition, VelocityVector};

/// Shortest beacon spacing used for finite-differenced velocity, seconds.
/// Shorter baselines amplify the 0.1 m position quantization.
pub const MIN_VELOCITY_BASELINE_S: f64 = 0.5;

/// A drone's belief about another drone, built from received beacons.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackEstimate {
    pub drone_id: u32,
    pub last_position: EnuPosition,
    pub last_velocity: VelocityVector,
    pub last_update: f64,
    pub staleness_limit: f64,
    anchor: (EnuPosition, f64),
}

impl TrackEstimate {
    /// A track from a single fix; velocity is unknown and taken as zero.
    pub fn new(drone_id: u32, position: EnuPosition, time: f64, staleness_limit: f64) -> Self {
        Self {
            drone_id,
            last_position: position,
            last_velocity: VelocityVector::ZERO,
            last_update: time,
            staleness_limit,
            anchor: (position, time),
        }
    }

    /// A track with known state, used for ownship.
    pub fn with_velocity(drone_id: u32, position: EnuPosition, velocity: VelocityVector, time: f64) -> Self {
        Self { last_velocity: velocity, ..Self::new(drone_id, position, time, f64::INFINITY) }
    }

    /// Folds in a beacon fix. Out-of-order or duplicate fixes are ignored.
    pub fn update(&mut self, position: EnuPosition, time: f64) {
        if time <= self.last_update {
            return;
        }
        let (anchor_pos, anchor_time) = self.anchor;
        let dt = time - anchor_time;
        if dt >= MIN_VELOCITY_BASELINE_S {
            let d = anchor_pos.to(&position);
            self.last_velocity = VelocityVector::new(d[0] / dt, d[1] / dt, d[2] / dt);
            self.anchor = (position, time);
        }
        self.last_position = position;
        self.last_update = time;
    }

    pub fn is_stale(&self, now: f64) -> bool {
        now - self.last_update > self.staleness_limit
    }

    /// Constant-velocity extrapolation to time `t`.
    pub fn predict(&self, t: f64) -> EnuPosition {
        self.last_position.advanced(&self.last_velocity, t - self.last_update)
    }
}
