use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Power drawn by the backscatter receiver while the MCU listens (µW).
/// Reported only; it is not deducted from node energy.
pub const LISTENING_POWER_UW: f64 = 36.2;

/// Per-run counters and derived rates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mode: String,
    pub duration_min: f64,
    pub tx_actions: u64,
    pub successful_receptions: u64,
    /// `successful_receptions / tx_actions`; null when nothing was sent.
    pub success_rate: Option<f64>,
    pub throughput_per_min: f64,
    pub failure_breakdown: BTreeMap<String, u64>,
    pub listening_time_s: f64,
    pub listening_energy_uj: f64,
    pub postponements: BTreeMap<String, u64>,
    pub csma_aborts: u64,
    pub automod_fires: u64,
    pub burst_overlaps: u64,
    pub receptions: u64,
    pub corrupted_receptions: u64,
    pub misdecoded_receptions: u64,
    pub decode_error_rate: Option<f64>,
    pub false_engages: u64,
    pub power_failures: u64,
}

impl Metrics {
    pub(crate) fn finalize(&mut self, duration_us: u64, listening_us: u64) {
        self.duration_min = duration_us as f64 / 60e6;
        self.success_rate = (self.tx_actions > 0)
            .then(|| self.successful_receptions as f64 / self.tx_actions as f64);
        self.throughput_per_min = if duration_us > 0 {
            self.successful_receptions as f64 / self.duration_min
        } else {
            0.0
        };
        self.listening_time_s = listening_us as f64 / 1e6;
        self.listening_energy_uj = self.listening_time_s * LISTENING_POWER_UW;
        self.decode_error_rate = (self.receptions > 0).then(|| {
            (self.corrupted_receptions + self.misdecoded_receptions) as f64 / self.receptions as f64
        });
    }

    pub fn failures(&self, reason: &str) -> u64 {
        self.failure_breakdown.get(reason).copied().unwrap_or(0)
    }

    /// Named scalar columns used by sweeps and reports.
    pub fn scalar(&self, name: &str) -> Option<f64> {
        Some(match name {
            "tx_actions" => self.tx_actions as f64,
            "successful_receptions" => self.successful_receptions as f64,
            "success_rate" => self.success_rate?,
            "throughput_per_min" => self.throughput_per_min,
            "listening_time_s" => self.listening_time_s,
            "burst_overlaps" => self.burst_overlaps as f64,
            "decode_error_rate" => self.decode_error_rate?,
            "false_engages" => self.false_engages as f64,
            "power_failures" => self.power_failures as f64,
            "receiver_low" => self.failures("receiver_low") as f64,
            "collision" => self.failures("collision") as f64,
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_follow_counts() {
        let mut m = Metrics {
            tx_actions: 4,
            successful_receptions: 3,
            receptions: 10,
            corrupted_receptions: 1,
            ..Metrics::default()
        };
        m.finalize(120_000_000, 30_000_000);
        assert_eq!(m.success_rate, Some(0.75));
        assert_eq!(m.throughput_per_min, 1.5);
        assert_eq!(m.listening_time_s, 30.0);
        assert!((m.listening_energy_uj - 1_086.0).abs() < 1e-9);
        assert_eq!(m.decode_error_rate, Some(0.1));
    }

    #[test]
    fn zero_duration() {
        let mut m = Metrics::default();
        m.finalize(0, 0);
        assert_eq!(m.success_rate, None);
        assert_eq!(m.throughput_per_min, 0.0);
    }
}
