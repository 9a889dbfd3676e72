//! Decode error rate against status frequency, and burst overlaps against drift.

use trapsim::scenario::load_scenario;
use trapsim::sweep::{sweep, GridAxis};

fn main() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    let bench = load_scenario(format!("{dir}/codec_bench.json")).expect("shipped scenario");
    let freq: GridAxis = "ook_freq_hz=12000,31000,39000".parse().expect("axis");
    print!("{}", sweep(&bench, &[freq], 4).expect("sweep").render());

    let collide = load_scenario(format!("{dir}/collision.json")).expect("shipped scenario");
    let drift: GridAxis = "drift_max_ppm=0,500".parse().expect("axis");
    print!("{}", sweep(&collide, &[drift], 4).expect("sweep").render());
}
