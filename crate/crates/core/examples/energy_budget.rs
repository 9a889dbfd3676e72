//! Harvests into a capacitor, boots the MCU and spends on transmissions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trapsim::energy::{consume, harvest_step, CapacitorState, Energy, HarvestParams, TaskCosts};

fn main() {
    let params = HarvestParams::default();
    let costs = TaskCosts::default();
    let boot = Energy::from_fraction(0.30);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cap = CapacitorState::new(Energy::EMPTY, boot, 0);
    for minute in 1..=20u64 {
        let now = minute * params.interval_ms * 1_000;
        cap = harvest_step(cap, &params, boot, &mut rng, now);
        let mut action = "";
        if cap.energy >= costs.tx() {
            cap = consume(cap, costs.tx()).expect("checked above");
            action = "transmit";
        }
        println!("min {minute:>2}  energy={}  mcu_on={:<5}  {action}", cap.energy, cap.mcu_on);
    }
}
