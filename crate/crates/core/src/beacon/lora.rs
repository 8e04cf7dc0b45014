//! Duty-cycled peer-to-peer LoRa beaconing.

use serde::{Deserialize, Serialize};

use super::{Protocol, Transmission, FRAME_LEN};
use crate::error::{Error, Result};

/// Regulatory minimum spacing between transmission starts, seconds.
pub const LORA_DUTY_CYCLE_GAP_S: f64 = 5.0;
/// Default beacon spacing, the catalog's LoRa update floor.
pub const LORA_UPDATE_FLOOR_S: f64 = 5.16;

const BANDWIDTH_HZ: f64 = 125_000.0;
const PREAMBLE_SYMBOLS: f64 = 8.0;
/// Coding rate 4/5.
const CODING_RATE: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpreadingFactor {
    Sf7,
}

impl SpreadingFactor {
    pub fn value(self) -> u32 {
        match self {
            SpreadingFactor::Sf7 => 7,
        }
    }
}

/// Semtech time-on-air for an explicit-header packet with CRC at 125 kHz.
pub fn lora_time_on_air(sf: SpreadingFactor, payload_len: usize) -> f64 {
    let sf = sf.value() as f64;
    let t_sym = 2f64.powf(sf) / BANDWIDTH_HZ;
    let low_data_rate = if sf >= 11.0 { 1.0 } else { 0.0 };
    let num = 8.0 * payload_len as f64 - 4.0 * sf + 28.0 + 16.0;
    let den = 4.0 * (sf - 2.0 * low_data_rate);
    let payload_symbols = 8.0 + ((num / den).ceil() * (CODING_RATE + 4) as f64).max(0.0);
    (PREAMBLE_SYMBOLS + 4.25 + payload_symbols) * t_sym
}

#[derive(Debug, Clone)]
pub struct LoRaNode {
    id: u32,
    spreading_factor: SpreadingFactor,
    min_interval: f64,
    airtime: f64,
    last_tx_time: f64,
}

impl LoRaNode {
    pub fn new(id: u32, min_interval: f64) -> Result<Self> {
        if !(min_interval >= LORA_DUTY_CYCLE_GAP_S && min_interval.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lora min_interval {min_interval} is below the {LORA_DUTY_CYCLE_GAP_S} s duty-cycle gap"
            )));
        }
        let spreading_factor = SpreadingFactor::Sf7;
        Ok(Self {
            id,
            spreading_factor,
            min_interval,
            airtime: lora_time_on_air(spreading_factor, FRAME_LEN),
            last_tx_time: f64::NEG_INFINITY,
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn spreading_factor(&self) -> SpreadingFactor {
        self.spreading_factor
    }

    pub fn min_interval(&self) -> f64 {
        self.min_interval
    }

    pub fn airtime(&self) -> f64 {
        self.airtime
    }

    pub fn last_tx_time(&self) -> f64 {
        self.last_tx_time
    }

    pub fn step(&mut self, now: f64) -> Option<Transmission> {
        if now - self.last_tx_time < self.min_interval {
            return None;
        }
        self.last_tx_time = now;
        Some(Transmission {
            tx_id: self.id,
            protocol: Protocol::LoRa,
            channel: None,
            start: now,
            airtime: self.airtime,
            power_offset_db: 0.0,
        })
    }
}
