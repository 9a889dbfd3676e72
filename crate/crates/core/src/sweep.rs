//! Parameter grids over a scenario template.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run, SimError};
use crate::report::Stat;
use crate::scenario::Scenario;

/// Keys accepted by [`GridAxis`].
pub const SWEEP_KEYS: &[&str] = &[
    "ook_freq_hz",
    "drift_max_ppm",
    "harvest_mean_per_min",
    "harvest_std_per_min",
    "data_tx_ms",
    "period_ms",
    "tx_cost",
    "rx_cost",
];

/// Metric columns aggregated per cell.
pub const SWEEP_METRICS: &[&str] = &[
    "tx_actions",
    "successful_receptions",
    "success_rate",
    "throughput_per_min",
    "listening_time_s",
    "burst_overlaps",
    "decode_error_rate",
    "false_engages",
    "power_failures",
    "receiver_low",
    "collision",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<f64>,
}

impl std::str::FromStr for GridAxis {
    type Err = String;

    /// Parses `key=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (key, list) = s.split_once('=').ok_or_else(|| format!("expected key=v1,v2: {s}"))?;
        let key = key.trim();
        if !SWEEP_KEYS.contains(&key) {
            return Err(format!("unknown sweep key {key:?}; expected one of {}", SWEEP_KEYS.join(", ")));
        }
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{key}: {v:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(format!("{key}: no values"));
        }
        Ok(GridAxis {
            key: key.to_string(),
            values,
        })
    }
}

/// Sets one grid parameter on a scenario.
///
/// `ook_freq_hz` places node `i` at `value + i·spacing`, or `value − i·spacing`
/// when that would leave the node band. `drift_max_ppm` also drops per-node
/// drift overrides so the bound takes effect.
pub fn apply(scenario: &mut Scenario, key: &str, value: f64) -> Result<(), String> {
    match key {
        "ook_freq_hz" => {
            let spacing = scenario.freq_slot_spacing_hz;
            let n = scenario.nodes.len() as f64;
            let up = value + (n - 1.0) * spacing <= scenario.node_band_hz[1];
            for (i, node) in scenario.nodes.iter_mut().enumerate() {
                let step = i as f64 * spacing;
                node.freq_hz = if up { value + step } else { value - step };
            }
        }
        "drift_max_ppm" => {
            scenario.drift_max_ppm = value;
            for node in &mut scenario.nodes {
                node.drift_ppm = None;
            }
        }
        "harvest_mean_per_min" => {
            scenario.harvest.mean_per_min = value;
            for h in scenario.nodes.iter_mut().filter_map(|n| n.harvest.as_mut()) {
                h.mean_per_min = value;
            }
        }
        "harvest_std_per_min" => {
            scenario.harvest.std_per_min = value;
            for h in scenario.nodes.iter_mut().filter_map(|n| n.harvest.as_mut()) {
                h.std_per_min = value;
            }
        }
        "data_tx_ms" => scenario.data_tx_ms = value,
        "period_ms" => scenario.automod.period_ms = value,
        "tx_cost" => scenario.costs.tx_cost = value,
        "rx_cost" => scenario.costs.rx_cost = value,
        other => return Err(format!("unknown sweep key {other:?}")),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: BTreeMap<String, f64>,
    pub seeds: usize,
    /// Metrics that were defined in at least one run of the cell.
    pub metrics: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub scenario: String,
    pub keys: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, params: &[(&str, f64)]) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| params.iter().all(|(k, v)| r.params.get(*k) == Some(v)))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sweep serializes");
        s.push('\n');
        s
    }

    /// Plain-text table with `mean±std` per metric.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = self.keys.clone();
        header.extend(SWEEP_METRICS.iter().map(|m| m.to_string()));
        let _ = writeln!(out, "{}", header.join("\t"));
        for row in &self.rows {
            let mut cells: Vec<String> = self.keys.iter().map(|k| format!("{}", row.params[k])).collect();
            for m in SWEEP_METRICS {
                cells.push(match row.metrics.get(*m) {
                    Some(s) => format!("{:.4}±{:.4}", s.mean, s.std),
                    None => "n/a".into(),
                });
            }
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }
}

/// Runs every grid cell for seeds `0..seeds` and aggregates per cell.
///
/// Cells and seeds run in parallel; rows come out in grid order and the
/// aggregation is taken in seed order, so the result does not depend on
/// scheduling.
pub fn sweep(template: &Scenario, grid: &[GridAxis], seeds: u64) -> Result<SweepTable, SimError> {
    if grid.is_empty() {
        return Err(SimError::InvalidScenario("sweep grid is empty".into()));
    }
    if seeds == 0 {
        return Err(SimError::InvalidScenario("sweep needs at least one seed".into()));
    }
    let mut cells: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for axis in grid {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push((axis.key.clone(), *v));
                    c
                })
            })
            .collect();
    }

    let rows = cells
        .par_iter()
        .map(|cell| {
            let mut scenario = template.clone();
            for (k, v) in cell {
                apply(&mut scenario, k, *v).map_err(SimError::InvalidScenario)?;
            }
            scenario
                .validate()
                .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
            let runs = (0..seeds)
                .into_par_iter()
                .map(|seed| run(&scenario, seed).map(|o| o.metrics))
                .collect::<Result<Vec<_>, _>>()?;
            let metrics = SWEEP_METRICS
                .iter()
                .filter_map(|m| {
                    let vals: Vec<f64> = runs.iter().filter_map(|r| r.scalar(m)).collect();
                    Stat::of(&vals).map(|s| (m.to_string(), s))
                })
                .collect();
            Ok(SweepRow {
                params: cell.iter().cloned().collect(),
                seeds: seeds as usize,
                metrics,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    Ok(SweepTable {
        scenario: template.name.clone(),
        keys: grid.iter().map(|a| a.key.clone()).collect(),
        rows,
    })
}
