use std::collections::BTreeMap;

use serde::Serialize;

use crate::conflict::{EventKind, EventRecord};
use crate::geometry::{puck_violation, CmLayer, EnuPosition, EnvironmentPreset, SeparationVolume};

/// Proxy volume for "zero separation": the airframes effectively touch.
pub const ZERO_SEPARATION_VOLUME: SeparationVolume = SeparationVolume { d_h: 1.0, d_v: 1.0 };

/// Inter-update delays of one distance bin. Empty bins carry `None`, never zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinStats {
    pub low_m: f64,
    pub high_m: f64,
    pub n: usize,
    pub mean_delay_s: Option<f64>,
    pub p95_delay_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDelays {
    pub tx_id: u32,
    pub rx_id: u32,
    pub bins: Vec<BinStats>,
}

impl PairDelays {
    pub fn label(&self) -> String {
        format!("{}->{}", self.tx_id, self.rx_id)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DelayMetrics {
    pub edges_m: Vec<f64>,
    /// Ordered pairs with at least one reception, sorted by (tx, rx).
    pub pairs: Vec<PairDelays>,
}

impl DelayMetrics {
    pub fn pair(&self, tx_id: u32, rx_id: u32) -> Option<&PairDelays> {
        self.pairs.iter().find(|p| p.tx_id == tx_id && p.rx_id == rx_id)
    }
}

/// Nearest-rank percentile of a non-empty slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Collects gaps between consecutive updates per ordered pair, binned by the
/// tx-rx distance at the moment the later update was sent.
#[derive(Debug, Clone)]
pub(crate) struct DelayRecorder {
    edges: Vec<f64>,
    last: BTreeMap<(u32, u32), f64>,
    gaps: BTreeMap<(u32, u32), Vec<Vec<f64>>>,
}

impl DelayRecorder {
    pub fn new(edges: &[f64]) -> Self {
        Self { edges: edges.to_vec(), last: BTreeMap::new(), gaps: BTreeMap::new() }
    }

    fn bin(&self, distance: f64) -> Option<usize> {
        let k = self.edges.partition_point(|e| *e <= distance);
        if k == 0 {
            return None;
        }
        // The top edge is inclusive.
        if k == self.edges.len() {
            return (distance == self.edges[k - 1]).then_some(k - 2);
        }
        Some(k - 1)
    }

    pub fn record(&mut self, tx: u32, rx: u32, time: f64, distance: f64) {
        let bins = self.edges.len() - 1;
        let bin = self.bin(distance);
        let gaps = self.gaps.entry((tx, rx)).or_insert_with(|| vec![Vec::new(); bins]);
        if let (Some(prev), Some(b)) = (self.last.insert((tx, rx), time), bin) {
            gaps[b].push(time - prev);
        }
    }

    pub fn finish(self) -> DelayMetrics {
        let edges = self.edges;
        let pairs = self
            .gaps
            .into_iter()
            .map(|((tx_id, rx_id), bins)| PairDelays {
                tx_id,
                rx_id,
                bins: bins
                    .into_iter()
                    .enumerate()
                    .map(|(k, mut g)| {
                        g.sort_by(f64::total_cmp);
                        let n = g.len();
                        BinStats {
                            low_m: edges[k],
                            high_m: edges[k + 1],
                            n,
                            mean_delay_s: (n > 0).then(|| g.iter().sum::<f64>() / n as f64),
                            p95_delay_s: (n > 0).then(|| percentile(&g, 0.95)),
                        }
                    })
                    .collect(),
            })
            .collect();
        DelayMetrics { edges_m: edges, pairs }
    }
}

/// One continuous stay of a pair inside the well-clear puck.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Encounter {
    pub drone_a: u32,
    pub drone_b: u32,
    pub start_s: f64,
    pub well_clear_s: f64,
    /// Time spent inside the collision puck during the encounter.
    pub collision_s: f64,
    pub zero_separation_s: f64,
    pub min_horizontal_m: f64,
}

/// Ground-truth separation losses, counted per encounter. An encounter with a
/// collision-puck breach also counts as a well-clear breach, and so on, so the
/// counts are always ordered zero <= collision <= well-clear.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SafetyMetrics {
    pub wc_violations: usize,
    pub ca_violations: usize,
    pub zero_separation_events: usize,
    pub encounters: Vec<Encounter>,
}

impl SafetyMetrics {
    pub fn is_nested(&self) -> bool {
        self.zero_separation_events <= self.ca_violations && self.ca_violations <= self.wc_violations
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SafetyRecorder {
    preset: EnvironmentPreset,
    open: BTreeMap<(u32, u32), Encounter>,
    metrics: SafetyMetrics,
}

impl SafetyRecorder {
    pub fn new(preset: EnvironmentPreset) -> Self {
        Self { preset, open: BTreeMap::new(), metrics: SafetyMetrics::default() }
    }

    /// Samples one pair (`a < b`) for a step of length `dt` ending at `now`.
    /// Onsets are appended to `log`.
    pub fn observe(
        &mut self,
        (a, pa): (u32, &EnuPosition),
        (b, pb): (u32, &EnuPosition),
        now: f64,
        dt: f64,
        log: &mut Vec<EventRecord>,
    ) {
        let in_wc = puck_violation(pa, pb, &self.preset.well_clear);
        if !in_wc {
            if let Some(done) = self.open.remove(&(a, b)) {
                self.metrics.encounters.push(done);
            }
            return;
        }
        let in_ca = puck_violation(pa, pb, &self.preset.collision);
        let in_zero = puck_violation(pa, pb, &ZERO_SEPARATION_VOLUME);
        let horizontal = crate::geometry::horizontal_separation(pa, pb);
        let mut onset = |kind, layer, detail: String| {
            log.push(EventRecord { time_s: now, kind, drone_a: a, drone_b: b, layer, detail });
        };
        let enc = self.open.entry((a, b)).or_insert_with(|| {
            onset(EventKind::WellClearViolation, CmLayer::WellClear, format!("horizontal {horizontal:.1} m"));
            Encounter {
                drone_a: a,
                drone_b: b,
                start_s: now,
                well_clear_s: 0.0,
                collision_s: 0.0,
                zero_separation_s: 0.0,
                min_horizontal_m: horizontal,
            }
        });
        if enc.well_clear_s == 0.0 {
            self.metrics.wc_violations += 1;
        }
        if in_ca && enc.collision_s == 0.0 {
            self.metrics.ca_violations += 1;
            onset(EventKind::CollisionViolation, CmLayer::CollisionAvoidance, format!("horizontal {horizontal:.1} m"));
        }
        if in_zero && enc.zero_separation_s == 0.0 {
            self.metrics.zero_separation_events += 1;
            onset(EventKind::ZeroSeparation, CmLayer::CollisionAvoidance, format!("horizontal {horizontal:.1} m"));
        }
        enc.well_clear_s += dt;
        if in_ca {
            enc.collision_s += dt;
        }
        if in_zero {
            enc.zero_separation_s += dt;
        }
        enc.min_horizontal_m = enc.min_horizontal_m.min(horizontal);
    }

    /// Closes a pair's encounter when one of the drones leaves the airspace.
    pub fn close(&mut self, a: u32, b: u32) {
        if let Some(done) = self.open.remove(&(a, b)) {
            self.metrics.encounters.push(done);
        }
    }

    pub fn finish(mut self) -> SafetyMetrics {
        let open = std::mem::take(&mut self.open);
        self.metrics.encounters.extend(open.into_values());
        self.metrics
            .encounters
            .sort_by(|x, y| x.start_s.total_cmp(&y.start_s).then((x.drone_a, x.drone_b).cmp(&(y.drone_a, y.drone_b))));
        self.metrics
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_binned_by_distance_of_later_update() {
        let mut r = DelayRecorder::new(&[0.0, 150.0, 300.0]);
        r.record(1, 2, 0.0, 100.0);
        r.record(1, 2, 0.1, 100.0);
        r.record(1, 2, 0.4, 200.0);
        r.record(1, 2, 0.5, 300.0);
        r.record(1, 2, 0.9, 301.0);
        let m = r.finish();
        let p = m.pair(1, 2).unwrap();
        assert_eq!(p.bins[0].n, 1);
        assert!((p.bins[0].mean_delay_s.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(p.bins[1].n, 2);
        assert!((p.bins[1].mean_delay_s.unwrap() - 0.2).abs() < 1e-12);
        assert!((p.bins[1].p95_delay_s.unwrap() - 0.3).abs() < 1e-12);
        assert!(m.pair(2, 1).is_none());
    }

    #[test]
    fn empty_bins_are_flagged() {
        let mut r = DelayRecorder::new(&[0.0, 150.0, 300.0]);
        r.record(1, 2, 0.0, 10.0);
        r.record(1, 2, 1.0, 10.0);
        let m = r.finish();
        let b = &m.pair(1, 2).unwrap().bins[1];
        assert_eq!((b.n, b.mean_delay_s, b.p95_delay_s), (0, None, None));
    }

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&[4.0], 0.95), 4.0);
    }

    #[test]
    fn one_pass_through_the_pucks_counts_once_each() {
        let mut s = SafetyRecorder::new(EnvironmentPreset::URBAN);
        let mut log = Vec::new();
        let a = EnuPosition::new(0.0, 0.0, 30.0);
        for k in -100..=100 {
            let b = EnuPosition::new(k as f64 * 0.1, 0.0, 30.0);
            s.observe((1, &a), (2, &b), k as f64, 0.1, &mut log);
        }
        let m = s.finish();
        assert_eq!((m.wc_violations, m.ca_violations, m.zero_separation_events), (1, 1, 1));
        assert!(m.is_nested());
        let e = &m.encounters[0];
        assert!((e.well_clear_s - 11.9).abs() < 1e-9, "{}", e.well_clear_s);
        assert_eq!(log.len(), 3);
    }
}
