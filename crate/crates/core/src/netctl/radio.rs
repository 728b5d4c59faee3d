// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

/// Log-distance path loss plus the rssi-to-hop-delay mapping used for
/// wireless links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioModel {
    /// Received power at the reference distance.
    pub p0_dbm: f64,
    pub d0_m: f64,
    /// Path-loss exponent.
    pub eta: f64,
    pub attach_threshold_dbm: f64,
    /// At or above this level the wireless hop costs `hop_delay_good_ms`.
    pub good_rssi_dbm: f64,
    pub hop_delay_good_ms: f64,
    /// Hop delay reached at the attach threshold.
    pub hop_delay_edge_ms: f64,
    pub wireless_mbps: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        Self {
            p0_dbm: -40.0,
            d0_m: 1.0,
            eta: 3.0,
            attach_threshold_dbm: -75.0,
            good_rssi_dbm: -65.0,
            hop_delay_good_ms: 2.0,
            hop_delay_edge_ms: 20.0,
            wireless_mbps: 100.0,
        }
    }
}

impl RadioModel {
    pub fn rssi_dbm(&self, dist_m: f64) -> f64 {
        self.p0_dbm - 10.0 * self.eta * (dist_m.max(self.d0_m) / self.d0_m).log10()
    }

    pub fn rssi_between(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.rssi_dbm(distance(a, b))
    }

    pub fn in_range(&self, rssi_dbm: f64) -> bool {
        rssi_dbm >= self.attach_threshold_dbm
    }

    /// Piecewise-linear: flat above `good_rssi_dbm`, rising linearly to
    /// `hop_delay_edge_ms` at the attach threshold (and beyond it).
    pub fn hop_delay_ms(&self, rssi_dbm: f64) -> f64 {
        if rssi_dbm >= self.good_rssi_dbm {
            return self.hop_delay_good_ms;
        }
        let span = self.good_rssi_dbm - self.attach_threshold_dbm;
        let frac = (self.good_rssi_dbm - rssi_dbm) / span;
        self.hop_delay_good_ms + frac * (self.hop_delay_edge_ms - self.hop_delay_good_ms)
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.p0_dbm,
            self.d0_m,
            self.eta,
            self.attach_threshold_dbm,
            self.good_rssi_dbm,
            self.hop_delay_good_ms,
            self.hop_delay_edge_ms,
            self.wireless_mbps,
        ];
        if !all.iter().all(|v| v.is_finite()) {
            return Err("radio constants must be finite".into());
        }
        if self.d0_m <= 0.0 {
            return Err("d0_m must be > 0".into());
        }
        if self.eta <= 0.0 {
            return Err("eta must be > 0".into());
        }
        if self.good_rssi_dbm <= self.attach_threshold_dbm {
            return Err("good_rssi_dbm must exceed attach_threshold_dbm".into());
        }
        if self.hop_delay_good_ms < 0.0 || self.hop_delay_edge_ms < self.hop_delay_good_ms {
            return Err("hop delays must satisfy 0 <= good <= edge".into());
        }
        if self.wireless_mbps < 0.0 {
            return Err("wireless_mbps must be >= 0".into());
        }
        Ok(())
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
