use std::io::Write;
use std::path::PathBuf;

use trapsim::scenario::{load_scenario, ScenarioError};

fn path(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "scenarios", name].iter().collect()
}

#[test]
fn table3_parameters() {
    let s = load_scenario(path("table3.json")).unwrap();
    assert_eq!(s.nodes.len(), 3);
    assert_eq!(s.costs.tx_cost, 1.0);
    assert_eq!(s.costs.rx_cost, 0.7);
    assert_eq!(s.automod.period_ms, 60_000.0);
    assert_eq!(s.harvest.mean_per_min, 0.25);
    assert_eq!(s.harvest.std_per_min, 0.22);
    assert_eq!(s.duration.as_secs(), 3_600);
    assert_eq!(s.traffic.len(), 3);
}

#[test]
fn shipped_files_round_trip() {
    for name in ["table3.json", "codec_bench.json", "collision.json"] {
        let s = load_scenario(path(name)).unwrap();
        let text = s.to_json();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        std::fs::write(&p, &text).unwrap();
        let again = load_scenario(&p).unwrap();
        assert_eq!(again, s, "{name}");
        assert_eq!(again.to_json(), text, "{name}");
    }
}

#[test]
fn close_slots_in_a_file_are_rejected() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(
        f,
        r#"{{"duration": "1m", "nodes": [{{"id": 0, "freq_hz": 26000}}, {{"id": 1, "freq_hz": 26500}}]}}"#
    )
    .unwrap();
    match load_scenario(f.path()) {
        Err(ScenarioError::Validation(msg)) => assert!(msg.contains("spacing"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_scenario("no/such/file.json"), Err(ScenarioError::Io { .. })));
}
