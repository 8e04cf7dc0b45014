//! Position-beaconing protocols: the SSID payload codec, the per-drone radio
//! state machines and the technology catalog.

mod adsb;
mod catalog;
mod codec;
mod lora;
mod wifi;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use adsb::{AdsBNode, AdsbVariant, ADSB_PERIOD_S, ADSB_SQUITTER_AIRTIME_S, RP_ADSB_POWER_OFFSET_DB};
pub use catalog::{
    builtin_catalog, catalog_to_csv, parse_catalog, suitable_technologies, LinkMode, TechnologyProfile, CATALOG_CSV,
};
pub use codec::{
    decode_ssid, encode_ssid, DecodeError, PositionBeacon, SsidFrame, COORDINATE_LIMIT_M, FRAME_LEN, SSID_MAX_LEN,
};
pub use lora::{lora_time_on_air, LoRaNode, SpreadingFactor, LORA_DUTY_CYCLE_GAP_S, LORA_UPDATE_FLOOR_S};
pub use wifi::{WifiParams, WifiSsidNode, WifiState};

/// Radio family a node speaks. Standard and reduced-power ADS-B share a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    WifiSsid,
    LoRa,
    AdsB,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::WifiSsid => "wifi-ssid",
            Protocol::LoRa => "lora",
            Protocol::AdsB => "adsb",
        })
    }
}

/// One over-the-air beacon emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub tx_id: u32,
    pub protocol: Protocol,
    /// Wi-Fi channel number; `None` for single-channel radios.
    pub channel: Option<u8>,
    /// Start of the emission, seconds.
    pub start: f64,
    pub airtime: f64,
    /// Added to the link budget's transmit power.
    pub power_offset_db: f64,
}

impl Transmission {
    pub fn end(&self) -> f64 {
        self.start + self.airtime
    }
}
