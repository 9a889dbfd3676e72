use std::path::PathBuf;

use trapsim::codec::encode;
use trapsim::engine::{resolve_nodes, run};
use trapsim::scenario::{load_scenario, Scenario};
use trapsim::sweep::{apply, sweep, GridAxis};
use trapsim::EnergyLevel;

fn shipped(name: &str) -> Scenario {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", name].iter().collect();
    load_scenario(path).unwrap()
}

fn axis(s: &str) -> GridAxis {
    s.parse().unwrap()
}

#[test]
fn decode_errors_grow_with_frequency() {
    let t = sweep(&shipped("codec_bench.json"), &[axis("ook_freq_hz=12000,31000,39000")], 4).unwrap();
    let rate = |f: f64| t.row(&[("ook_freq_hz", f)]).unwrap().metrics["decode_error_rate"].mean;
    assert_eq!(rate(12_000.0), 0.0);
    assert!(rate(12_000.0) < rate(31_000.0));
    assert!(rate(31_000.0) < rate(39_000.0));
}

#[test]
fn single_seed_has_zero_spread() {
    let t = sweep(&shipped("table3.json"), &[axis("data_tx_ms=5,20")], 1).unwrap();
    assert_eq!(t.rows.len(), 2);
    for row in &t.rows {
        assert_eq!(row.seeds, 1);
        assert!(row.metrics.values().all(|s| s.std == 0.0));
    }
}

#[test]
fn grid_is_cartesian_in_order() {
    let t = sweep(
        &shipped("codec_bench.json"),
        &[axis("period_ms=500,1000"), axis("harvest_mean_per_min=0,0.5")],
        1,
    )
    .unwrap();
    let cells: Vec<(f64, f64)> = t
        .rows
        .iter()
        .map(|r| (r.params["period_ms"], r.params["harvest_mean_per_min"]))
        .collect();
    assert_eq!(cells, vec![(500.0, 0.0), (500.0, 0.5), (1000.0, 0.0), (1000.0, 0.5)]);
}

#[test]
fn sweep_is_repeatable() {
    let s = shipped("collision.json");
    let g = [axis("drift_max_ppm=0,500")];
    assert_eq!(sweep(&s, &g, 3).unwrap(), sweep(&s, &g, 3).unwrap());
}

#[test]
fn empty_grid_and_bad_cells_are_errors() {
    let s = shipped("table3.json");
    assert!(sweep(&s, &[], 2).is_err());
    assert!(sweep(&s, &[axis("ook_freq_hz=500")], 1).is_err());
}

#[test]
fn frequency_axis_keeps_slots_apart() {
    let mut s = shipped("table3.json");
    apply(&mut s, "ook_freq_hz", 39_000.0).unwrap();
    let f: Vec<f64> = s.nodes.iter().map(|n| n.freq_hz).collect();
    assert_eq!(f, vec![39_000.0, 37_000.0, 35_000.0]);
    assert!(s.validate().is_ok());
}

/// Overlap count of two periodic burst sequences, bracketed by the shortest
/// and longest burst either node can emit.
fn overlap_bounds(s: &Scenario, seed: u64) -> (u64, u64) {
    let nodes = resolve_nodes(s, seed);
    let horizon = s.duration.as_micros() as u64;
    let times = |i: usize| -> Vec<u64> {
        let cfg = &nodes[i].automod;
        let step = cfg.drifted_period_us();
        (0..).map(|k| cfg.first_fire() + k * step).take_while(|&t| t < horizon).collect()
    };
    let len = |i: usize, l: EnergyLevel| encode(l, nodes[i].freq_hz, 0).unwrap().duration();
    let (a, b) = (times(0), times(1));
    let (mut lo, mut hi) = (0, 0);
    for (ta, tb) in a.iter().zip(&b) {
        let (first, second, i) = if ta <= tb { (ta, tb, 0) } else { (tb, ta, 1) };
        let gap = second - first;
        if gap < len(i, EnergyLevel::Charging) {
            lo += 1;
        }
        if gap < len(i, EnergyLevel::Full) {
            hi += 1;
        }
    }
    (lo, hi)
}

#[test]
fn drift_changes_overlap_count() {
    let base = shipped("collision.json");
    let t = sweep(&base, &[axis("drift_max_ppm=0,500")], 3).unwrap();
    let overlaps = |d: f64| t.row(&[("drift_max_ppm", d)]).unwrap().metrics["burst_overlaps"];
    assert_ne!(overlaps(0.0).mean, overlaps(500.0).mean);

    for (drift, seed) in [(0.0, 0), (0.0, 1), (500.0, 0), (500.0, 1), (500.0, 2)] {
        let mut s = base.clone();
        apply(&mut s, "drift_max_ppm", drift).unwrap();
        let (lo, hi) = overlap_bounds(&s, seed);
        let got = run(&s, seed).unwrap().metrics.burst_overlaps;
        assert!(lo <= got && got <= hi, "drift {drift} seed {seed}: {got} not in [{lo}, {hi}]");
        if drift == 0.0 {
            assert_eq!(got, 90);
        }
    }
}
