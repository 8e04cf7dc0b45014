//! Log-distance path loss with lognormal shadowing, threshold reception and
//! least-squares model fitting.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-distance attenuation `pl0 + 10 n log10(d / d0)` plus i.i.d. shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub pl0_db: f64,
    pub d0: f64,
    pub exponent: f64,
    pub shadowing_sigma_db: f64,
}

impl PathLossModel {
    /// Free-space loss at 1 m for 2.4 GHz.
    pub const WIFI_PL0_DB: f64 = 40.05;
    pub const AIR_EXPONENT: f64 = 2.4;
    pub const GROUND_EXPONENT: f64 = 2.6;

    pub fn new(pl0_db: f64, d0: f64, exponent: f64, shadowing_sigma_db: f64) -> Result<Self> {
        let model = Self { pl0_db, d0, exponent, shadowing_sigma_db };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.pl0_db.is_finite() {
            return Err(Error::InvalidModel("pl0_db must be finite".into()));
        }
        if !(self.d0 > 0.0 && self.d0.is_finite()) {
            return Err(Error::InvalidModel(format!("d0 must be positive, got {}", self.d0)));
        }
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(Error::InvalidModel(format!("exponent must be positive, got {}", self.exponent)));
        }
        if !(self.shadowing_sigma_db >= 0.0 && self.shadowing_sigma_db.is_finite()) {
            return Err(Error::InvalidModel(format!("shadowing sigma must be >= 0, got {}", self.shadowing_sigma_db)));
        }
        Ok(())
    }

    /// Wi-Fi between two airborne nodes.
    pub fn wifi_air() -> Self {
        Self { pl0_db: Self::WIFI_PL0_DB, d0: 1.0, exponent: Self::AIR_EXPONENT, shadowing_sigma_db: 4.0 }
    }

    /// Wi-Fi between an airborne and a ground node.
    pub fn wifi_ground() -> Self {
        Self { exponent: Self::GROUND_EXPONENT, ..Self::wifi_air() }
    }

    /// 868 MHz peer-to-peer link. Intercept and exponent anchor P(success) to
    /// about 0.2 at 2 km and above 0.99 at 1 km with the default LoRa budget.
    pub fn lora() -> Self {
        Self { pl0_db: 39.65, d0: 1.0, exponent: 3.0, shadowing_sigma_db: 2.0 }
    }

    /// 1090 MHz link; places the reduced-power deterministic range near 1.2 km.
    pub fn adsb() -> Self {
        Self { pl0_db: 33.2, d0: 1.0, exponent: 2.5, shadowing_sigma_db: 2.0 }
    }
}

/// Transmit power, receiver threshold and combined antenna gain of a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub rx_sensitivity_dbm: f64,
    /// Sum of both ends, net of cable and mounting losses.
    pub antenna_gain_db: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !self.tx_power_dbm.is_finite() || !self.rx_sensitivity_dbm.is_finite() || !self.antenna_gain_db.is_finite() {
            return Err(Error::InvalidModel("link budget values must be finite".into()));
        }
        Ok(())
    }

    /// ESP32-class module: 20 dBm, -92 dBm sensitivity, 6 dB of net antenna/mounting loss.
    pub fn wifi() -> Self {
        Self { tx_power_dbm: 20.0, rx_sensitivity_dbm: -92.0, antenna_gain_db: -6.0 }
    }

    /// SF7 peer-to-peer.
    pub fn lora_sf7() -> Self {
        Self { tx_power_dbm: 14.0, rx_sensitivity_dbm: -123.0, antenna_gain_db: 0.0 }
    }

    /// Full-power (40 W) 1090 MHz transponder.
    pub fn adsb() -> Self {
        Self { tx_power_dbm: 46.0, rx_sensitivity_dbm: -84.0, antenna_gain_db: 0.0 }
    }

    /// Budget with the transmit power shifted by `offset_db`.
    pub fn with_power_offset(&self, offset_db: f64) -> Self {
        Self { tx_power_dbm: self.tx_power_dbm + offset_db, ..*self }
    }

    /// Largest mean margin, `tx + gain - sensitivity`, the path loss may consume.
    pub fn max_path_loss_db(&self) -> f64 {
        self.tx_power_dbm + self.antenna_gain_db - self.rx_sensitivity_dbm
    }
}

/// One received-signal observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiSample {
    pub distance: f64,
    pub rssi: f64,
}

pub fn path_loss_db(model: &PathLossModel, d: f64) -> Result<f64> {
    if d.is_nan() || d <= 0.0 {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(model.pl0_db + 10.0 * model.exponent * (d / model.d0).log10())
}

/// Mean received power, no shadowing.
pub fn mean_rssi(model: &PathLossModel, budget: &LinkBudget, d: f64) -> Result<f64> {
    Ok(budget.tx_power_dbm + budget.antenna_gain_db - path_loss_db(model, d)?)
}

/// Received power with one lognormal shadowing draw.
pub fn rssi<R: Rng + ?Sized>(model: &PathLossModel, budget: &LinkBudget, d: f64, rng: &mut R) -> Result<f64> {
    let mean = mean_rssi(model, budget, d)?;
    if model.shadowing_sigma_db == 0.0 {
        return Ok(mean);
    }
    let shadow =
        Normal::new(0.0, model.shadowing_sigma_db).map_err(|e| Error::InvalidModel(e.to_string()))?.sample(rng);
    Ok(mean - shadow)
}

pub fn reception_success(rssi_value: f64, budget: &LinkBudget) -> bool {
    rssi_value >= budget.rx_sensitivity_dbm
}

/// Distance at which the mean RSSI equals the receiver sensitivity.
pub fn deterministic_range(model: &PathLossModel, budget: &LinkBudget) -> f64 {
    model.d0 * 10f64.powf((budget.max_path_loss_db() - model.pl0_db) / (10.0 * model.exponent))
}

/// Ordinary least squares of observed loss against `10 log10(d / d0)`.
///
/// Intercept is `pl0_db`, slope is the exponent and the residual standard
/// deviation (n - 2 degrees of freedom) becomes the shadowing sigma.
pub fn fit_path_loss(samples: &[RssiSample], budget: &LinkBudget, d0: f64) -> Result<PathLossModel> {
    if d0.is_nan() || d0 <= 0.0 {
        return Err(Error::NonPositiveDistance(d0));
    }
    if samples.len() < 2 {
        return Err(Error::SingularFit(format!("need at least 2 samples, got {}", samples.len())));
    }
    if let Some(bad) = samples.iter().find(|s| s.distance.is_nan() || s.distance <= 0.0) {
        return Err(Error::NonPositiveDistance(bad.distance));
    }
    if samples.iter().all(|s| s.distance == samples[0].distance) {
        return Err(Error::SingularFit("all samples share one distance".into()));
    }

    let eirp = budget.tx_power_dbm + budget.antenna_gain_db;
    let points: Vec<(f64, f64)> = samples.iter().map(|s| (10.0 * (s.distance / d0).log10(), eirp - s.rssi)).collect();
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx.is_nan() || sxx <= 0.0 {
        return Err(Error::SingularFit("distances carry no spread".into()));
    }
    let exponent = sxy / sxx;
    let pl0_db = mean_y - exponent * mean_x;
    let sigma = if points.len() > 2 {
        let sse: f64 = points.iter().map(|p| (p.1 - pl0_db - exponent * p.0).powi(2)).sum();
        (sse / (n - 2.0)).sqrt()
    } else {
        0.0
    };
    if exponent.is_nan() || exponent <= 0.0 {
        return Err(Error::InvalidModel(format!("fitted exponent {exponent} is not positive")));
    }
    PathLossModel::new(pl0_db, d0, exponent, sigma)
}
