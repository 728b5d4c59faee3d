// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

/// Base link measurements plus emulation shaping factors.
///
/// `psi` multiplies the delay and `delta` divides the throughput; both are
/// `>= 1`, and `psi = delta = 1` leaves the link unshaped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub d_ms: f64,
    pub lambda_mbps: f64,
    pub psi: f64,
    pub delta: f64,
}

impl LinkMetrics {
    pub fn new(d_ms: f64, lambda_mbps: f64) -> Self {
        Self {
            d_ms,
            lambda_mbps,
            psi: 1.0,
            delta: 1.0,
        }
    }

    #[inline]
    pub fn effective_delay_ms(&self) -> f64 {
        self.psi * self.d_ms
    }

    #[inline]
    pub fn effective_throughput_mbps(&self) -> f64 {
        self.lambda_mbps / self.delta
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.d_ms.is_finite() && self.d_ms >= 0.0) {
            return Err(format!("delay must be finite and >= 0, got {}", self.d_ms));
        }
        if !(self.lambda_mbps.is_finite() && self.lambda_mbps >= 0.0) {
            return Err(format!("throughput must be finite and >= 0, got {}", self.lambda_mbps));
        }
        if !(self.psi.is_finite() && self.psi >= 1.0) {
            return Err(format!("psi must be >= 1, got {}", self.psi));
        }
        if !(self.delta.is_finite() && self.delta >= 1.0) {
            return Err(format!("delta must be >= 1, got {}", self.delta));
        }
        Ok(())
    }
}

/// Result of [`super::NetControl::measure_link`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMeasurement {
    pub d_ms: f64,
    pub lambda_mbps: f64,
    pub eff_d_ms: f64,
    pub eff_lambda_mbps: f64,
}

impl From<&LinkMetrics> for LinkMeasurement {
    fn from(m: &LinkMetrics) -> Self {
        Self {
            d_ms: m.d_ms,
            lambda_mbps: m.lambda_mbps,
            eff_d_ms: m.effective_delay_ms(),
            eff_lambda_mbps: m.effective_throughput_mbps(),
        }
    }
}
