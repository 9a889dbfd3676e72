//! Summary files and the paired comparison table.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{PairedOutput, SimOutput};
use crate::metrics::Metrics;

/// Summary written by a single `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub metrics: Metrics,
}

impl RunSummary {
    pub fn new(scenario: &str, out: &SimOutput) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed: out.seed,
            metrics: out.metrics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRun {
    pub seed: u64,
    pub trap: Metrics,
    pub baseline: Metrics,
}

impl From<&PairedOutput> for PairedRun {
    fn from(p: &PairedOutput) -> Self {
        Self {
            seed: p.trap.seed,
            trap: p.trap.metrics.clone(),
            baseline: p.baseline.metrics.clone(),
        }
    }
}

/// Summary written by `paired`, one entry per seed in ascending seed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub scenario: String,
    pub runs: Vec<PairedRun>,
}

impl PairedSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Stat {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

/// Reference testbed values: (tx actions, success rate, packets per minute).
pub const REFERENCE_BASELINE: (f64, f64, f64) = (29.0, 0.31, 0.15);
pub const REFERENCE_TRAP: (f64, f64, f64) = (21.0, 1.00, 0.35);

struct ArmStats {
    tx: Stat,
    success: Option<Stat>,
    throughput: Stat,
}

fn arm(runs: &[PairedRun], pick: fn(&PairedRun) -> &Metrics) -> ArmStats {
    let tx: Vec<f64> = runs.iter().map(|r| pick(r).tx_actions as f64).collect();
    let success: Vec<f64> = runs.iter().filter_map(|r| pick(r).success_rate).collect();
    let thr: Vec<f64> = runs.iter().map(|r| pick(r).throughput_per_min).collect();
    ArmStats {
        tx: Stat::of(&tx).unwrap_or(Stat { mean: 0.0, std: 0.0, n: 0 }),
        success: Stat::of(&success),
        throughput: Stat::of(&thr).unwrap_or(Stat { mean: 0.0, std: 0.0, n: 0 }),
    }
}

/// Renders the with/without-coordination comparison over paired runs.
pub fn report_table4(runs: &[PairedRun]) -> String {
    let base = arm(runs, |r| &r.baseline);
    let trap = arm(runs, |r| &r.trap);
    let wins = runs
        .iter()
        .filter(|r| r.baseline.throughput_per_min < r.trap.throughput_per_min)
        .count();
    let pct = |s: &Option<Stat>| match s {
        Some(s) => format!("{:.1}% ± {:.1}", s.mean * 100.0, s.std * 100.0),
        None => "n/a".to_string(),
    };
    let mut out = String::new();
    let _ = writeln!(out, "paired runs: {}", runs.len());
    let _ = writeln!(
        out,
        "{:<22} {:>18} {:>10} {:>18} {:>10}",
        "", "without (sim)", "reference", "with (sim)", "reference"
    );
    let _ = writeln!(
        out,
        "{:<22} {:>18} {:>10} {:>18} {:>10}",
        "transmission actions",
        format!("{:.1} ± {:.1}", base.tx.mean, base.tx.std),
        format!("{:.0}", REFERENCE_BASELINE.0),
        format!("{:.1} ± {:.1}", trap.tx.mean, trap.tx.std),
        format!("{:.0}", REFERENCE_TRAP.0),
    );
    let _ = writeln!(
        out,
        "{:<22} {:>18} {:>10} {:>18} {:>10}",
        "success rate",
        pct(&base.success),
        format!("{:.0}%", REFERENCE_BASELINE.1 * 100.0),
        pct(&trap.success),
        format!("{:.0}%", REFERENCE_TRAP.1 * 100.0),
    );
    let _ = writeln!(
        out,
        "{:<22} {:>18} {:>10} {:>18} {:>10}",
        "throughput (p/min)",
        format!("{:.3} ± {:.3}", base.throughput.mean, base.throughput.std),
        format!("{:.2}", REFERENCE_BASELINE.2),
        format!("{:.3} ± {:.3}", trap.throughput.mean, trap.throughput.std),
        format!("{:.2}", REFERENCE_TRAP.2),
    );
    let _ = writeln!(out, "throughput higher with coordination in {wins}/{} runs", runs.len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(tx: u64, ok: u64) -> Metrics {
        let mut m = Metrics {
            tx_actions: tx,
            successful_receptions: ok,
            ..Metrics::default()
        };
        m.finalize(3_600_000_000, 0);
        m
    }

    #[test]
    fn single_run_has_zero_spread() {
        let runs = vec![PairedRun {
            seed: 0,
            trap: metrics(20, 20),
            baseline: metrics(30, 9),
        }];
        let text = report_table4(&runs);
        assert!(text.contains("100.0% ± 0.0"), "{text}");
        assert!(text.contains("30.0% ± 0.0"), "{text}");
        assert!(text.contains("in 1/1 runs"), "{text}");
    }

    #[test]
    fn population_std() {
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert!(Stat::of(&[]).is_none());
    }
}
