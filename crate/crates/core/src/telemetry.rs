//! Energy and emissions estimates derived from backend token usage.
//!
//! `joules = tokens * joules_per_token` and
//! `gco2e = joules / 3.6e6 * grid_intensity`. Both factors are supplied by
//! the operator; there are no built-in defaults.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::backends::UsageRecord;
use crate::error::{Error, Result};

pub const JOULES_PER_KWH: f64 = 3.6e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    /// J per processed token.
    pub joules_per_token: f64,
    /// g CO2e per kWh.
    pub grid_intensity: f64,
}

impl EnergyConfig {
    pub fn new(joules_per_token: f64, grid_intensity: f64) -> Result<Self> {
        let cfg = Self {
            joules_per_token,
            grid_intensity,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("joules_per_token", self.joules_per_token),
            ("grid_intensity", self.grid_intensity),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Configuration(format!(
                    "{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTelemetry {
    pub tokens_total: u64,
    pub wall_ms: u64,
    pub joules: f64,
    pub gco2e: f64,
}

impl RunTelemetry {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn combine(&self, other: &RunTelemetry) -> RunTelemetry {
        RunTelemetry {
            tokens_total: self.tokens_total + other.tokens_total,
            wall_ms: self.wall_ms + other.wall_ms,
            joules: self.joules + other.joules,
            gco2e: self.gco2e + other.gco2e,
        }
    }
}

pub fn joules_to_gco2e(joules: f64, cfg: &EnergyConfig) -> f64 {
    joules / JOULES_PER_KWH * cfg.grid_intensity
}

pub fn record(usage: &UsageRecord, cfg: &EnergyConfig) -> RunTelemetry {
    let tokens_total = usage.tokens_total();
    let joules = tokens_total as f64 * cfg.joules_per_token;
    RunTelemetry {
        tokens_total,
        wall_ms: usage.wall_ms,
        joules,
        gco2e: joules_to_gco2e(joules, cfg),
    }
}

/// Component-wise sum.
pub fn aggregate<'a>(items: impl IntoIterator<Item = &'a RunTelemetry>) -> RunTelemetry {
    items
        .into_iter()
        .fold(RunTelemetry::zero(), |acc, t| acc.combine(t))
}

/// Process-wide running total.
#[derive(Debug, Default)]
pub struct TelemetryAggregator {
    total: Mutex<RunTelemetry>,
}

impl TelemetryAggregator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, t: &RunTelemetry) {
        let mut total = self.total.lock().unwrap_or_else(|e| e.into_inner());
        *total = total.combine(t);
    }

    pub fn snapshot(&self) -> RunTelemetry {
        *self.total.lock().unwrap_or_else(|e| e.into_inner())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(tokens: u64) -> UsageRecord {
        UsageRecord {
            tokens_in: tokens,
            tokens_out: 0,
            wall_ms: 3,
        }
    }

    #[test]
    fn record_examples() {
        let cfg = EnergyConfig::new(0.5, 400.0).unwrap();
        let zero = record(&usage(0), &cfg);
        assert_eq!((zero.joules, zero.gco2e), (0.0, 0.0));
        assert_eq!(record(&usage(1000), &cfg).joules, 500.0);

        let kwh = EnergyConfig::new(1.0, 400.0).unwrap();
        let t = record(&usage(3_600_000), &kwh);
        assert_eq!(t.joules, 3.6e6);
        assert_eq!(t.gco2e, 400.0);
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[]), RunTelemetry::zero());
        let a = RunTelemetry { tokens_total: 1, wall_ms: 2, joules: 100.0, gco2e: 0.1 };
        let b = RunTelemetry { tokens_total: 3, wall_ms: 4, joules: 250.0, gco2e: 0.2 };
        assert_eq!(aggregate(&[a, b]), aggregate(&[b, a]));
        assert_eq!(aggregate(&[a, b]).joules, 350.0);

        let agg = TelemetryAggregator::new();
        agg.add(&a);
        agg.add(&b);
        assert_eq!(agg.snapshot().tokens_total, 4);
    }

    #[test]
    fn config_requires_valid_factors() {
        assert!(EnergyConfig::new(-1.0, 1.0).is_err());
        assert!(EnergyConfig::new(1.0, f64::NAN).is_err());
    }
}
