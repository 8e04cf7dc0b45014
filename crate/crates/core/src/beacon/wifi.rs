//! Single-RF-chain Wi-Fi SSID beaconing.
//!
//! A node alternates between scanning one fixed channel and broadcasting its
//! beacon SSID across the channel list. Both state durations are drawn from the
//! same uniform range, so the long-run time share is 50/50 without any
//! coordination between nodes.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Protocol, Transmission};
use crate::error::{Error, Result};

/// How far back state intervals are retained for reception checks, seconds.
const HISTORY_S: f64 = 2.0;
/// Slack on the slot-count floor so exact multiples are not lost to rounding.
const SLOT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WifiParams {
    pub channels: Vec<u8>,
    pub scan_channel: u8,
    /// Lower bound of the uniform state duration, seconds.
    pub state_min_s: f64,
    /// Upper bound of the uniform state duration, seconds.
    pub state_max_s: f64,
    /// Broadcast time per channel slot, seconds.
    pub dwell_s: f64,
    /// Time on air of one beacon, seconds.
    pub airtime_s: f64,
}

impl Default for WifiParams {
    fn default() -> Self {
        Self {
            channels: vec![1, 6, 11],
            scan_channel: 6,
            state_min_s: 0.100,
            state_max_s: 0.200,
            dwell_s: 0.008,
            airtime_s: 0.003,
        }
    }
}

impl WifiParams {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::InvalidParameter("wifi channel list is empty".into()));
        }
        if !self.channels.contains(&self.scan_channel) {
            return Err(Error::InvalidParameter(format!(
                "scan channel {} is not in the channel list",
                self.scan_channel
            )));
        }
        if !(self.state_min_s > 0.0 && self.state_min_s <= self.state_max_s && self.state_max_s.is_finite()) {
            return Err(Error::InvalidParameter("wifi state durations must satisfy 0 < min <= max".into()));
        }
        if !(self.airtime_s > 0.0 && self.airtime_s <= self.dwell_s && self.dwell_s.is_finite()) {
            return Err(Error::InvalidParameter("wifi airtime must be positive and fit in one dwell".into()));
        }
        Ok(())
    }

    /// Fraction of broadcast slots that land on the scan channel.
    pub fn scan_channel_fraction(&self) -> f64 {
        self.channels.iter().filter(|&&c| c == self.scan_channel).count() as f64 / self.channels.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Scan,
    Broadcast,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval {
    mode: Mode,
    start: f64,
    end: f64,
}

/// Observable state of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WifiState {
    Scan {
        channel: u8,
    },
    /// `channel_index` is the position in the channel list of the next slot.
    Broadcast {
        channel_index: usize,
    },
}

#[derive(Debug, Clone)]
pub struct WifiSsidNode {
    id: u32,
    params: WifiParams,
    current: Interval,
    history: VecDeque<Interval>,
    pending: VecDeque<Transmission>,
    sweep_index: usize,
    origin: f64,
    last_now: f64,
    scan_accum: f64,
}

impl WifiSsidNode {
    /// Starts a node at `t0` in a random state with a random phase, so that
    /// independently seeded nodes are unsynchronised.
    pub fn new<R: Rng + ?Sized>(id: u32, params: WifiParams, t0: f64, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let mode = if rng.random_bool(0.5) { Mode::Scan } else { Mode::Broadcast };
        let sweep_index = rng.random_range(0..params.channels.len());
        let mut node = Self {
            id,
            params,
            current: Interval { mode, start: t0, end: t0 },
            history: VecDeque::new(),
            pending: VecDeque::new(),
            sweep_index,
            origin: t0,
            last_now: t0,
            scan_accum: 0.0,
        };
        let duration = node.draw_duration(rng);
        let elapsed = rng.random::<f64>() * duration;
        node.current = Interval { mode, start: t0 - elapsed, end: t0 - elapsed + duration };
        if mode == Mode::Broadcast {
            node.schedule_slots();
            node.pending.retain(|tx| tx.start >= t0);
        }
        Ok(node)
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn params(&self) -> &WifiParams {
        &self.params
    }

    pub fn scan_channel(&self) -> u8 {
        self.params.scan_channel
    }

    pub fn state(&self) -> WifiState {
        match self.current.mode {
            Mode::Scan => WifiState::Scan { channel: self.params.scan_channel },
            Mode::Broadcast => WifiState::Broadcast { channel_index: self.sweep_index },
        }
    }

    /// Time at which the current state ends.
    pub fn state_deadline(&self) -> f64 {
        self.current.end
    }

    fn draw_duration<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = (self.params.state_min_s, self.params.state_max_s);
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    }

    /// Queues one beacon per dwell slot of the current broadcast interval,
    /// continuing the channel rotation where the previous sweep stopped.
    fn schedule_slots(&mut self) {
        let duration = self.current.end - self.current.start;
        let slots = ((duration / self.params.dwell_s) + SLOT_EPS).floor() as usize;
        let n = self.params.channels.len();
        for k in 0..slots {
            let channel = self.params.channels[(self.sweep_index + k) % n];
            self.pending.push_back(Transmission {
                tx_id: self.id,
                protocol: Protocol::WifiSsid,
                channel: Some(channel),
                start: self.current.start + k as f64 * self.params.dwell_s,
                airtime: self.params.airtime_s,
                power_offset_db: 0.0,
            });
        }
        self.sweep_index = (self.sweep_index + slots) % n;
    }

    fn flip<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let done = self.current;
        if done.mode == Mode::Scan {
            self.scan_accum += done.end - done.start.max(self.origin);
        }
        self.history.push_back(done);
        let mode = match done.mode {
            Mode::Scan => Mode::Broadcast,
            Mode::Broadcast => Mode::Scan,
        };
        let duration = self.draw_duration(rng);
        self.current = Interval { mode, start: done.end, end: done.end + duration };
        if mode == Mode::Broadcast {
            self.schedule_slots();
        }
    }

    /// Advances the node to `now`, flipping state at each deadline, and returns
    /// the beacons whose start time is at or before `now`, in time order.
    pub fn step<R: Rng + ?Sized>(&mut self, now: f64, rng: &mut R) -> Vec<Transmission> {
        debug_assert!(now >= self.last_now, "wifi node stepped backwards");
        let now = now.max(self.last_now);
        while self.current.end <= now {
            self.flip(rng);
        }
        self.last_now = now;
        while self.history.front().is_some_and(|iv| iv.end < now - HISTORY_S) {
            self.history.pop_front();
        }
        let mut out = Vec::new();
        while self.pending.front().is_some_and(|tx| tx.start <= now) {
            out.extend(self.pending.pop_front());
        }
        out
    }

    /// Whether this node hears `tx`: it must be scanning the transmission's
    /// channel for the whole airtime. The link budget is checked separately.
    ///
    /// Exact as long as the node has been stepped to at least `tx.start`.
    pub fn can_receive(&self, tx: &Transmission) -> bool {
        if tx.tx_id == self.id || tx.channel != Some(self.params.scan_channel) {
            return false;
        }
        std::iter::once(&self.current)
            .chain(self.history.iter().rev())
            .find(|iv| iv.start <= tx.start && tx.start < iv.end)
            .is_some_and(|iv| iv.mode == Mode::Scan && tx.end() <= iv.end)
    }

    /// Fraction of time since construction spent scanning, up to the last step.
    pub fn scan_fraction(&self) -> f64 {
        let span = self.last_now - self.origin;
        if span <= 0.0 {
            return 0.0;
        }
        let mut scan = self.scan_accum;
        if self.current.mode == Mode::Scan {
            scan += self.last_now - self.current.start.max(self.origin);
        }
        scan / span
    }
}
