//! Storage-capacitor energy model, expressed as a fraction of full storage.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Micros;

const PPM: u32 = 1_000_000;

/// Stored energy in parts-per-million of full storage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Energy(u32);

impl Energy {
    pub const EMPTY: Energy = Energy(0);
    pub const FULL: Energy = Energy(PPM);

    /// Rounds and clamps `fraction` into `[0, 1]`.
    pub fn from_fraction(fraction: f64) -> Self {
        if fraction.is_nan() {
            return Self::EMPTY;
        }
        Energy((fraction.clamp(0.0, 1.0) * f64::from(PPM)).round() as u32)
    }

    pub fn from_ppm(ppm: u32) -> Self {
        Energy(ppm.min(PPM))
    }

    pub fn ppm(self) -> u32 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        f64::from(self.0) / f64::from(PPM)
    }

    pub fn saturating_add(self, other: Energy) -> Energy {
        Energy((self.0 + other.0).min(PPM))
    }

    pub fn checked_sub(self, other: Energy) -> Option<Energy> {
        self.0.checked_sub(other.0).map(Energy)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.fraction())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapacitorState {
    pub energy: Energy,
    pub mcu_on: bool,
    pub last_update: Micros,
}

impl CapacitorState {
    /// Initial state; the MCU is running if the storage already holds at
    /// least `boot_threshold`.
    pub fn new(energy: Energy, boot_threshold: Energy, now: Micros) -> Self {
        Self {
            energy,
            mcu_on: !energy.is_empty() && energy >= boot_threshold,
            last_update: now,
        }
    }

    pub fn fraction(&self) -> f64 {
        self.energy.fraction()
    }
}

/// Random harvesting profile. Increments are quoted per minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestParams {
    pub mean_per_min: f64,
    pub std_per_min: f64,
    #[serde(default = "default_interval_ms")]
    pub interval_ms: u64,
}

fn default_interval_ms() -> u64 {
    60_000
}

impl Default for HarvestParams {
    fn default() -> Self {
        Self {
            mean_per_min: 0.25,
            std_per_min: 0.22,
            interval_ms: default_interval_ms(),
        }
    }
}

impl HarvestParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mean_per_min >= 0.0 && self.mean_per_min.is_finite()) {
            return Err(format!("mean_per_min must be >= 0, got {}", self.mean_per_min));
        }
        if !(self.std_per_min >= 0.0 && self.std_per_min.is_finite()) {
            return Err(format!("std_per_min must be >= 0, got {}", self.std_per_min));
        }
        if self.interval_ms == 0 {
            return Err("interval_ms must be positive".into());
        }
        Ok(())
    }

    /// Mean and standard deviation of one tick's increment; the mean scales
    /// with the tick length and the deviation with its square root.
    pub fn per_tick(&self) -> (f64, f64) {
        let minutes = self.interval_ms as f64 / 60_000.0;
        (self.mean_per_min * minutes, self.std_per_min * minutes.sqrt())
    }

    /// Draws one increment from a normal distribution rectified at zero.
    pub fn draw_increment<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (mean, std) = self.per_tick();
        // Always consume one normal sample, even when std == 0.
        let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
        (mean + std * z).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskCosts {
    pub tx_cost: f64,
    pub rx_cost: f64,
}

impl Default for TaskCosts {
    fn default() -> Self {
        Self {
            tx_cost: 1.0,
            rx_cost: 0.7,
        }
    }
}

impl TaskCosts {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rx_cost > 0.0 && self.rx_cost <= self.tx_cost && self.tx_cost <= 1.0) {
            return Err(format!(
                "costs must satisfy 0 < rx_cost <= tx_cost <= 1 (rx {}, tx {})",
                self.rx_cost, self.tx_cost
            ));
        }
        Ok(())
    }

    pub fn tx(&self) -> Energy {
        Energy::from_fraction(self.tx_cost)
    }

    pub fn rx(&self) -> Energy {
        Energy::from_fraction(self.rx_cost)
    }
}

/// Adds a harvested increment, clamping at full storage. The MCU boots when
/// the stored energy reaches `boot_threshold`.
pub fn apply_harvest(
    state: CapacitorState,
    increment: f64,
    boot_threshold: Energy,
    now: Micros,
) -> CapacitorState {
    let energy = state.energy.saturating_add(Energy::from_fraction(increment.max(0.0)));
    CapacitorState {
        energy,
        mcu_on: state.mcu_on || (!energy.is_empty() && energy >= boot_threshold),
        last_update: now,
    }
}

/// One harvest tick: draw an increment and apply it.
pub fn harvest_step<R: Rng + ?Sized>(
    state: CapacitorState,
    params: &HarvestParams,
    boot_threshold: Energy,
    rng: &mut R,
    now: Micros,
) -> CapacitorState {
    let inc = params.draw_increment(rng);
    apply_harvest(state, inc, boot_threshold, now)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("insufficient energy: have {have}, need {need}")]
pub struct InsufficientEnergy {
    pub have: Energy,
    pub need: Energy,
}

/// Spends `cost` atomically. Draining the storage to zero is a power failure
/// and turns the MCU off.
pub fn consume(state: CapacitorState, cost: Energy) -> Result<CapacitorState, InsufficientEnergy> {
    let energy = state.energy.checked_sub(cost).ok_or(InsufficientEnergy {
        have: state.energy,
        need: cost,
    })?;
    Ok(CapacitorState {
        energy,
        mcu_on: state.mcu_on && !energy.is_empty(),
        last_update: state.last_update,
    })
}
