//! Encodes every level at a few slot frequencies and decodes it back.

use trapsim::codec::{decode, encode, estimate_frequency, EnergyLevel, NodeId, Slot};

fn main() {
    let roster: Vec<Slot> = [14_000.0, 20_000.0, 26_000.0, 31_000.0]
        .iter()
        .enumerate()
        .map(|(i, &f)| Slot {
            node: NodeId(i as u16),
            freq_hz: f,
        })
        .collect();
    for slot in &roster {
        for level in EnergyLevel::ALL {
            let train = encode(level, slot.freq_hz, 1_000).expect("in-band frequency");
            let est = estimate_frequency(&train).expect("enough pulses");
            println!(
                "node {} @ {:>6.0} Hz  {:<8} {:>3} pulses  {:>6} us  est {:>9.2} Hz  q={:.2}  -> {:?}",
                slot.node,
                slot.freq_hz,
                level.as_str(),
                train.pulses().len(),
                train.duration(),
                est.freq_hz,
                est.quality,
                decode(&train, &roster)
            );
        }
    }
}
