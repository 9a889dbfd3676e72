//! The auto-modulator keeps its schedule while the MCU browns out.

use trapsim::automod::{AutoModConfig, AutoModulator};
use trapsim::codec::NodeId;
use trapsim::energy::{consume, CapacitorState, Energy};

fn main() {
    let cfg = AutoModConfig {
        period_ms: 100.0,
        drift_ppm: 250.0,
        phase_offset_ms: 20.0,
        ..AutoModConfig::default()
    };
    let mut m = AutoModulator::new(NodeId(0), 20_000.0, cfg).expect("valid config");
    let boot = Energy::from_fraction(cfg.thresholds[0]);
    let mut cap = CapacitorState::new(Energy::from_fraction(0.9), boot, 0);
    let mut last = None;
    for i in 0..12 {
        let now = m.next_fire();
        if i % 4 == 3 {
            cap = consume(cap, cap.energy).expect("draining to zero");
        } else {
            cap.energy = cap.energy.saturating_add(Energy::from_fraction(0.2));
            cap.mcu_on |= cap.energy >= boot;
        }
        let ev = m.emit(cap.fraction(), now);
        let gap = last.map(|l| now - l).unwrap_or(0);
        last = Some(now);
        println!(
            "t={:>8} us  gap={:>6}  energy={}  mcu_on={:<5}  pulses={}",
            now,
            gap,
            cap.energy,
            cap.mcu_on,
            ev.train.pulses().len()
        );
    }
}
