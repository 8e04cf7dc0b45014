//! Periodic ADS-B and reduced-power ADS-B beaconing.

use serde::{Deserialize, Serialize};

use super::{Protocol, Transmission};

pub const ADSB_PERIOD_S: f64 = 0.5;
/// Extended squitter duration, seconds.
pub const ADSB_SQUITTER_AIRTIME_S: f64 = 120e-6;
pub const RP_ADSB_POWER_OFFSET_DB: f64 = -20.0;

/// Tolerance for landing on a grid tick despite accumulated step rounding.
const TICK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdsbVariant {
    Standard,
    ReducedPower,
}

impl AdsbVariant {
    pub fn power_offset_db(self) -> f64 {
        match self {
            AdsbVariant::Standard => 0.0,
            AdsbVariant::ReducedPower => RP_ADSB_POWER_OFFSET_DB,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdsBNode {
    id: u32,
    variant: AdsbVariant,
    next_tick: u64,
}

impl AdsBNode {
    pub fn new(id: u32, variant: AdsbVariant) -> Self {
        Self { id, variant, next_tick: 0 }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn power_offset_db(&self) -> f64 {
        self.variant.power_offset_db()
    }

    /// Emits at the latest grid tick not yet emitted, if `now` has reached it.
    /// Ticks skipped by a coarse caller are dropped, not replayed.
    pub fn step(&mut self, now: f64) -> Option<Transmission> {
        if now < 0.0 {
            return None;
        }
        let tick = ((now + TICK_EPS) / ADSB_PERIOD_S).floor() as u64;
        if tick < self.next_tick {
            return None;
        }
        self.next_tick = tick + 1;
        Some(Transmission {
            tx_id: self.id,
            protocol: Protocol::AdsB,
            channel: None,
            start: tick as f64 * ADSB_PERIOD_S,
            airtime: ADSB_SQUITTER_AIRTIME_S,
            power_offset_db: self.variant.power_offset_db(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_on_half_second_grid() {
        let mut node = AdsBNode::new(1, AdsbVariant::Standard);
        let starts: Vec<f64> = [0.0, 0.5, 1.0].into_iter().filter_map(|t| node.step(t)).map(|tx| tx.start).collect();
        assert_eq!(starts, [0.0, 0.5, 1.0]);
    }

    #[test]
    fn fine_stepping_emits_exact_multiples() {
        let mut node = AdsBNode::new(1, AdsbVariant::Standard);
        let starts: Vec<f64> = (0..10_000).filter_map(|k| node.step(k as f64 * 0.001)).map(|tx| tx.start).collect();
        assert_eq!(starts.len(), 20);
        for (k, s) in starts.iter().enumerate() {
            assert_eq!(*s, k as f64 * 0.5);
        }
    }

    #[test]
    fn reduced_power_offset() {
        let mut node = AdsBNode::new(1, AdsbVariant::ReducedPower);
        assert_eq!(node.step(0.0).unwrap().power_offset_db, -20.0);
        assert_eq!(AdsbVariant::Standard.power_offset_db(), 0.0);
    }
}
