//! Two nodes whose status bursts always overlap, and what a third node hears.

use trapsim::engine::run;
use trapsim::scenario::load_scenario;
use trapsim::trace::EventKind;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/collision.json");
    let scenario = load_scenario(path).expect("shipped scenario");
    let out = run(&scenario, 0).expect("simulation");
    for r in out.trace.of_kind(EventKind::DecodeComplete).take(12) {
        println!("t={:>11} us  node {}  {}", r.time_us, r.node, r.detail);
    }
    let m = &out.metrics;
    println!(
        "overlaps={} corrupted={}/{} misdecoded={} false_engages={}",
        m.burst_overlaps, m.corrupted_receptions, m.receptions, m.misdecoded_receptions, m.false_engages
    );
}
