use crate::geometry::{puck_violation, CmLayer, Environment, EnvironmentPreset};

use super::track::TrackEstimate;

/// Extrapolation resolution for conflict prediction, seconds.
pub const DETECTION_STEP_S: f64 = 0.1;

/// Look-ahead: the upper end of the urban 6-8 s horizon, and the outer
/// well-clear time bound in suburban airspace.
pub fn default_horizon(env: Environment) -> f64 {
    match env {
        Environment::Urban => 8.0,
        Environment::Suburban => 120.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConflictEvent {
    /// Lower id first.
    pub pair: (u32, u32),
    pub detected_at: f64,
    pub predicted_violation_time: f64,
    pub layer: CmLayer,
}

/// Earliest predicted well-clear violation of a pair, if any.
pub(crate) fn first_violation(
    a: &TrackEstimate,
    b: &TrackEstimate,
    now: f64,
    horizon: f64,
    preset: &EnvironmentPreset,
) -> Option<f64> {
    let steps = (horizon / DETECTION_STEP_S).round() as usize;
    (0..=steps)
        .map(|k| now + k as f64 * DETECTION_STEP_S)
        .find(|&t| puck_violation(&a.predict(t), &b.predict(t), &preset.well_clear))
}

/// Pairwise constant-velocity conflict probe over `[now, now + horizon]`.
/// Stale tracks are skipped.
pub fn detect_conflicts(
    tracks: &[TrackEstimate],
    now: f64,
    horizon: f64,
    preset: &EnvironmentPreset,
) -> Vec<ConflictEvent> {
    let fresh: Vec<&TrackEstimate> = tracks.iter().filter(|t| !t.is_stale(now)).collect();
    let mut events = Vec::new();
    for (i, a) in fresh.iter().enumerate() {
        for b in &fresh[i + 1..] {
            let Some(t) = first_violation(a, b, now, horizon, preset) else { continue };
            let layer = if puck_violation(&a.predict(now), &b.predict(now), &preset.collision) {
                CmLayer::CollisionAvoidance
            } else {
                CmLayer::WellClear
            };
            let pair = (a.drone_id.min(b.drone_id), a.drone_id.max(b.drone_id));
            events.push(ConflictEvent { pair, detected_at: now, predicted_violation_time: t, layer });
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EnuPosition, VelocityVector};

    fn track(id: u32, p: (f64, f64, f64), v: (f64, f64, f64)) -> TrackEstimate {
        TrackEstimate::with_velocity(id, EnuPosition::new(p.0, p.1, p.2), VelocityVector::new(v.0, v.1, v.2), 0.0)
    }

    #[test]
    fn urban_head_on_predicts_well_clear() {
        let tracks = [track(1, (0.0, 0.0, 30.0), (2.0, 0.0, 0.0)), track(2, (20.0, 0.0, 30.0), (-2.0, 0.0, 0.0))];
        let ev = detect_conflicts(&tracks, 0.0, 8.0, &EnvironmentPreset::URBAN);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].layer, CmLayer::WellClear);
        assert_eq!(ev[0].pair, (1, 2));
        // Range reaches 6 m at 3.5 s; strict inequality puts the first sample just after.
        assert!((3.5..=3.6 + 1e-9).contains(&ev[0].predicted_violation_time), "{:?}", ev[0]);
    }

    #[test]
    fn inside_collision_puck_now() {
        let tracks = [track(4, (0.0, 0.0, 30.0), (0.0, 0.0, 0.0)), track(3, (2.0, 0.0, 30.0), (0.0, 0.0, 0.0))];
        let ev = detect_conflicts(&tracks, 0.0, 8.0, &EnvironmentPreset::URBAN);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].layer, CmLayer::CollisionAvoidance);
        assert_eq!(ev[0].pair, (3, 4));
        assert_eq!(ev[0].predicted_violation_time, 0.0);
    }

    #[test]
    fn diverging_pair_is_quiet() {
        let tracks = [track(1, (0.0, 0.0, 30.0), (-2.0, 0.0, 0.0)), track(2, (20.0, 0.0, 30.0), (2.0, 0.0, 0.0))];
        assert!(detect_conflicts(&tracks, 0.0, 8.0, &EnvironmentPreset::URBAN).is_empty());
    }

    #[test]
    fn stale_tracks_excluded() {
        let mut a = TrackEstimate::new(1, EnuPosition::new(0.0, 0.0, 30.0), 0.0, 1.0);
        a.update(EnuPosition::new(0.0, 0.0, 30.0), 0.1);
        let b = track(2, (2.0, 0.0, 30.0), (0.0, 0.0, 0.0));
        assert_eq!(detect_conflicts(&[a.clone(), b.clone()], 1.0, 8.0, &EnvironmentPreset::URBAN).len(), 1);
        assert!(detect_conflicts(&[a, b], 1.2, 8.0, &EnvironmentPreset::URBAN).is_empty());
    }

    #[test]
    fn prediction_matches_fine_stepping_oracle() {
        // Independent 1 ms brute force for the first violation instant.
        let a = track(1, (0.0, -40.0, 30.0), (0.0, 5.0, 0.0));
        let b = track(2, (30.0, 0.0, 33.0), (-4.0, 0.0, 0.0));
        let ev = detect_conflicts(&[a.clone(), b.clone()], 0.0, 8.0, &EnvironmentPreset::URBAN);
        let exact = (0..8000)
            .map(|k| k as f64 * 0.001)
            .find(|&t| puck_violation(&a.predict(t), &b.predict(t), &EnvironmentPreset::URBAN.well_clear))
            .unwrap();
        assert_eq!(ev.len(), 1);
        let t = ev[0].predicted_violation_time;
        assert!(t >= exact && t - exact < DETECTION_STEP_S + 1e-9, "{t} vs {exact}");
    }
}
