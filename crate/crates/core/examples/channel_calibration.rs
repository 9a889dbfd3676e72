//! Received pulse counts through the default channel at three frequencies.
//!
//! Usage: `channel_calibration [trials]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trapsim::channel::{calibrate_defaults, impair};
use trapsim::codec::encode_pulses;

fn main() {
    let trials: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1_000);
    let params = calibrate_defaults();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("{:>6} {:>8} {:>6} {:>6} {:>8}", "tx", "freq", "min", "max", "mean");
    for freq in [12_000.0, 31_000.0, 39_000.0] {
        for tx in [32u32, 256] {
            let train = encode_pulses(tx, freq, 0).expect("valid burst");
            let counts: Vec<usize> = (0..trials)
                .map(|_| impair(&train, freq, &params, &mut rng).pulses().len())
                .collect();
            let mean = counts.iter().sum::<usize>() as f64 / trials as f64;
            println!(
                "{tx:>6} {freq:>8.0} {:>6} {:>6} {mean:>8.1}",
                counts.iter().min().unwrap(),
                counts.iter().max().unwrap()
            );
        }
    }
}
