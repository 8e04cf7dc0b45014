use crate::error::{Error, Result};
use crate::geometry::{puck_violation, sample_plan, EnvironmentPreset, FlightPlan, SeparationVolume};

pub const MAX_DEPARTURE_DELAY_S: f64 = 3600.0;
pub const MAX_ALTITUDE_OFFSET_M: f64 = 120.0;

/// Margin added to altitude offsets so co-altitude plans end strictly outside
/// the puck despite interpolation rounding, meters.
const OFFSET_MARGIN_M: f64 = 0.01;
/// Delay candidates are this many sample intervals apart.
const DELAY_STEP_SAMPLES: f64 = 10.0;

/// First sample time at which two plans violate `vol`, sampling from the start
/// of their common span every `sample_dt` and at its end.
pub fn first_plan_violation(a: &FlightPlan, b: &FlightPlan, vol: &SeparationVolume, sample_dt: f64) -> Option<f64> {
    let start = a.departure_time().max(b.departure_time());
    let end = a.arrival_time().min(b.arrival_time());
    if start > end {
        return None;
    }
    let n = ((end - start) / sample_dt).floor() as usize;
    let times = (0..=n).map(|k| start + k as f64 * sample_dt).chain(std::iter::once(end));
    for t in times {
        let (Ok((pa, _)), Ok((pb, _))) = (sample_plan(a, t), sample_plan(b, t)) else { continue };
        if puck_violation(&pa, &pb, vol) {
            return Some(t);
        }
    }
    None
}

/// Greedy pre-departure deconfliction. Plans are taken in departure order
/// (ties by id); each keeps priority over every later one. A later plan is
/// amended by the smallest departure delay, then the smallest climb, that
/// clears it of all earlier plans. The result is in input order.
pub fn strategic_deconflict(
    plans: &[FlightPlan],
    preset: &EnvironmentPreset,
    sample_dt: f64,
) -> Result<Vec<FlightPlan>> {
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("sample_dt must be positive, got {sample_dt}")));
    }
    let vol = &preset.well_clear;
    let mut order: Vec<usize> = (0..plans.len()).collect();
    order.sort_by(|&i, &j| {
        plans[i]
            .departure_time()
            .total_cmp(&plans[j].departure_time())
            .then(plans[i].drone_id().cmp(&plans[j].drone_id()))
    });

    let delay_step = DELAY_STEP_SAMPLES * sample_dt;
    let n_delays = (MAX_DEPARTURE_DELAY_S / delay_step).floor() as usize;
    let n_offsets = ((MAX_ALTITUDE_OFFSET_M - OFFSET_MARGIN_M) / vol.d_v).floor() as usize;

    let mut accepted: Vec<(usize, FlightPlan)> = Vec::with_capacity(plans.len());
    for &i in &order {
        let plan = &plans[i];
        let blocker = |candidate: &FlightPlan| {
            accepted
                .iter()
                .find(|(_, p)| first_plan_violation(candidate, p, vol, sample_dt).is_some())
                .map(|(_, p)| p.drone_id())
        };
        let Some(first_blocker) = blocker(plan) else {
            accepted.push((i, plan.clone()));
            continue;
        };
        let amended = (0..=n_delays).find_map(|kd| {
            let delayed = plan.delayed(kd as f64 * delay_step);
            (0..=n_offsets).find_map(|ko| {
                let candidate =
                    if ko == 0 { delayed.clone() } else { delayed.raised(ko as f64 * vol.d_v + OFFSET_MARGIN_M) };
                blocker(&candidate).is_none().then_some(candidate)
            })
        });
        match amended {
            Some(p) => accepted.push((i, p)),
            None => {
                let (a, b) = (first_blocker.min(plan.drone_id()), first_blocker.max(plan.drone_id()));
                return Err(Error::Unresolvable { a, b });
            }
        }
    }
    accepted.sort_by_key(|(i, _)| *i);
    Ok(accepted.into_iter().map(|(_, p)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EnuPosition, Waypoint, DEFAULT_MAX_SPEED};

    fn straight(id: u32, from: (f64, f64, f64), to: (f64, f64, f64), t0: f64, t1: f64) -> FlightPlan {
        FlightPlan::new(
            id,
            vec![
                Waypoint::new(EnuPosition::new(from.0, from.1, from.2), t0),
                Waypoint::new(EnuPosition::new(to.0, to.1, to.2), t1),
            ],
            DEFAULT_MAX_SPEED,
        )
        .unwrap()
    }

    #[test]
    fn laterally_separated_urban_plans_untouched() {
        let plans = [
            straight(1, (0.0, 0.0, 30.0), (500.0, 0.0, 30.0), 0.0, 100.0),
            straight(2, (0.0, 10.0, 30.0), (500.0, 10.0, 30.0), 0.0, 100.0),
        ];
        let out = strategic_deconflict(&plans, &EnvironmentPreset::URBAN, 1.0).unwrap();
        assert_eq!(out, plans);
    }

    #[test]
    fn coincident_suburban_plans_amend_the_second() {
        let plans = [
            straight(1, (0.0, 0.0, 50.0), (3000.0, 0.0, 50.0), 0.0, 300.0),
            straight(2, (0.0, 0.0, 50.0), (3000.0, 0.0, 50.0), 0.0, 300.0),
        ];
        let out = strategic_deconflict(&plans, &EnvironmentPreset::SUBURBAN, 1.0).unwrap();
        assert_eq!(out[0], plans[0]);
        assert_ne!(out[1], plans[1]);
        // Independent 0.25 s sweep over the amended pair.
        let vol = EnvironmentPreset::SUBURBAN.well_clear;
        let start = out[0].departure_time().max(out[1].departure_time());
        let end = out[0].arrival_time().min(out[1].arrival_time());
        let mut t = start;
        while t <= end {
            let (a, _) = sample_plan(&out[0], t).unwrap();
            let (b, _) = sample_plan(&out[1], t).unwrap();
            assert!(!puck_violation(&a, &b, &vol), "violation at {t}");
            t += 0.25;
        }
    }

    #[test]
    fn single_plan_unchanged() {
        let plans = [straight(1, (0.0, 0.0, 50.0), (100.0, 0.0, 50.0), 0.0, 10.0)];
        assert_eq!(strategic_deconflict(&plans, &EnvironmentPreset::SUBURBAN, 1.0).unwrap(), plans);
    }

    #[test]
    fn earlier_departure_keeps_priority() {
        let plans = [
            straight(1, (0.0, 0.0, 50.0), (3000.0, 0.0, 50.0), 5.0, 305.0),
            straight(2, (0.0, 0.0, 50.0), (3000.0, 0.0, 50.0), 0.0, 300.0),
        ];
        let out = strategic_deconflict(&plans, &EnvironmentPreset::SUBURBAN, 1.0).unwrap();
        assert_eq!(out[1], plans[1]);
        assert_ne!(out[0], plans[0]);
    }

    #[test]
    fn unresolvable_names_the_pair() {
        // A hover outlasting the delay bound, with both candidate altitudes inside its puck.
        let hover = straight(3, (0.0, 0.0, 80.0), (0.0, 0.0, 80.0), 0.0, 8000.0);
        let crossing = straight(9, (-200.0, 0.0, 40.0), (200.0, 0.0, 40.0), 10.0, 60.0);
        let err = strategic_deconflict(&[hover, crossing], &EnvironmentPreset::SUBURBAN, 1.0).unwrap_err();
        assert_eq!(err, Error::Unresolvable { a: 3, b: 9 });
    }

    #[test]
    fn bad_sample_interval() {
        assert!(strategic_deconflict(&[], &EnvironmentPreset::URBAN, 0.0).is_err());
    }
}
