//! Conflict management: strategic plan deconfliction before departure, the
//! tactical separation loop fed by beacon tracks, and collision avoidance.

mod detect;
mod log;
mod manager;
mod resolve;
mod strategic;
mod track;

pub use detect::{default_horizon, detect_conflicts, ConflictEvent, DETECTION_STEP_S};
pub use log::{EventKind, EventRecord, EVENT_LOG_HEADER};
pub use manager::{ConflictManager, Guidance, ManagerConfig, CONTROL_TICK_S};
pub use resolve::{
    collision_avoid, formulate_solution, maneuvered_position, Resolution, ResolutionManeuver, ResolveOptions,
    VerticalDirection, DEFAULT_CLIMB_RATE, GROUND_PROXIMITY_M,
};
pub use strategic::{first_plan_violation, strategic_deconflict, MAX_ALTITUDE_OFFSET_M, MAX_DEPARTURE_DELAY_S};
pub use track::{TrackEstimate, MIN_VELOCITY_BASELINE_S};
