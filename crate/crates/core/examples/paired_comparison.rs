//! Runs the shipped three-node ring with and without status coordination.
//!
//! Usage: `paired_comparison [seeds]`

use trapsim::engine::run_paired;
use trapsim::report::{report_table4, PairedRun};
use trapsim::scenario::load_scenario;

fn main() {
    let seeds: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(30);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/table3.json");
    let scenario = load_scenario(path).expect("shipped scenario");
    let runs: Vec<PairedRun> = (0..seeds)
        .map(|seed| PairedRun::from(&run_paired(&scenario, seed).expect("simulation")))
        .collect();
    print!("{}", report_table4(&runs));
}
