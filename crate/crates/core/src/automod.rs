//! Auto-modulator: the MCU-independent circuit that quantizes stored energy
//! against fixed thresholds and fires a status burst every period.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelEvent;
use crate::codec::{encode, CodecError, EnergyLevel, Micros, NodeId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutoModError {
    #[error("thresholds must satisfy 0 < t1 < t2 < t3 <= 1, got {0:?}")]
    Thresholds([f64; 3]),
    #[error("period {period_us} µs does not exceed the longest burst ({burst_us} µs)")]
    PeriodTooShort { period_us: u64, burst_us: u64 },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoModConfig {
    /// Ascending energy fractions separating Charging/Low/High/Full.
    pub thresholds: [f64; 3],
    pub period_ms: f64,
    #[serde(default)]
    pub drift_ppm: f64,
    #[serde(default)]
    pub phase_offset_ms: f64,
}

impl Default for AutoModConfig {
    fn default() -> Self {
        Self {
            thresholds: [0.30, 0.70, 0.99],
            period_ms: 100.0,
            drift_ppm: 0.0,
            phase_offset_ms: 0.0,
        }
    }
}

impl AutoModConfig {
    pub fn validate(&self, freq_hz: f64) -> Result<(), AutoModError> {
        let [t1, t2, t3] = self.thresholds;
        if !(0.0 < t1 && t1 < t2 && t2 < t3 && t3 <= 1.0) {
            return Err(AutoModError::Thresholds(self.thresholds));
        }
        let longest = encode(EnergyLevel::Full, freq_hz, 0)?.duration();
        let period_us = self.period_us();
        if !(self.period_ms.is_finite() && period_us > longest) {
            return Err(AutoModError::PeriodTooShort {
                period_us,
                burst_us: longest,
            });
        }
        Ok(())
    }

    /// Nominal period in µs, without drift.
    pub fn period_us(&self) -> u64 {
        (self.period_ms * 1_000.0).round().max(0.0) as u64
    }

    /// Period including clock drift, rounded to the µs quantum.
    pub fn drifted_period_us(&self) -> u64 {
        (self.period_ms * 1_000.0 * (1.0 + self.drift_ppm * 1e-6)).round() as u64
    }

    pub fn first_fire(&self) -> Micros {
        (self.phase_offset_ms * 1_000.0).round().max(0.0) as Micros
    }
}

/// Threshold quantizer.
pub fn quantize(energy_fraction: f64, cfg: &AutoModConfig) -> EnergyLevel {
    let [t1, t2, t3] = cfg.thresholds;
    if energy_fraction >= t3 {
        EnergyLevel::Full
    } else if energy_fraction >= t2 {
        EnergyLevel::High
    } else if energy_fraction >= t1 {
        EnergyLevel::Low
    } else {
        EnergyLevel::Charging
    }
}

pub fn next_fire_time(last_fire: Micros, cfg: &AutoModConfig) -> Micros {
    last_fire + cfg.drifted_period_us()
}

/// Per-node auto-modulator instance.
#[derive(Debug, Clone)]
pub struct AutoModulator {
    node: NodeId,
    freq_hz: f64,
    cfg: AutoModConfig,
    next_fire: Micros,
}

impl AutoModulator {
    pub fn new(node: NodeId, freq_hz: f64, cfg: AutoModConfig) -> Result<Self, AutoModError> {
        cfg.validate(freq_hz)?;
        Ok(Self {
            node,
            freq_hz,
            next_fire: cfg.first_fire(),
            cfg,
        })
    }

    pub fn config(&self) -> &AutoModConfig {
        &self.cfg
    }

    pub fn freq_hz(&self) -> f64 {
        self.freq_hz
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn next_fire(&self) -> Micros {
        self.next_fire
    }

    /// Fires the burst due at `now` and advances the timekeeper. Only the
    /// stored energy is read, never the MCU state.
    pub fn emit(&mut self, energy_fraction: f64, now: Micros) -> ChannelEvent {
        debug_assert_eq!(now, self.next_fire);
        let level = quantize(energy_fraction, &self.cfg);
        let train = encode(level, self.freq_hz, now).expect("frequency validated at construction");
        self.next_fire = next_fire_time(now, &self.cfg);
        ChannelEvent::new(train, self.node, self.freq_hz)
    }
}
