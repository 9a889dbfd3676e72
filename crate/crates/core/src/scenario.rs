//! Scenario files: JSON description of a network, its energy profile and the
//! protocol under test. Omitted fields take the documented defaults.

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::automod::AutoModConfig;
use crate::channel::ChannelParams;
use crate::codec::{DecoderConfig, NodeId};
use crate::energy::{HarvestParams, TaskCosts};
use crate::protocol::{BackoffRange, ProtocolMode};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}, field `{field}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Trap,
    Baseline,
    Csma,
}

impl std::str::FromStr for ModeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trap" => Ok(ModeName::Trap),
            "baseline" => Ok(ModeName::Baseline),
            "csma" => Ok(ModeName::Csma),
            other => Err(format!("unknown mode `{other}` (expected trap|baseline|csma)")),
        }
    }
}

/// Auto-modulator settings shared by all nodes unless overridden.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoModDefaults {
    #[serde(default = "default_thresholds")]
    pub thresholds: [f64; 3],
    #[serde(default = "default_period_ms")]
    pub period_ms: f64,
}

fn default_thresholds() -> [f64; 3] {
    [0.30, 0.70, 0.99]
}

fn default_period_ms() -> f64 {
    100.0
}

impl Default for AutoModDefaults {
    fn default() -> Self {
        Self {
            thresholds: default_thresholds(),
            period_ms: default_period_ms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub freq_hz: f64,
    #[serde(default)]
    pub initial_energy: f64,
    /// Sampled uniformly in `±drift_max_ppm` when absent.
    #[serde(default)]
    pub drift_ppm: Option<f64>,
    /// Sampled uniformly in `[0, period)` when absent.
    #[serde(default)]
    pub phase_offset_ms: Option<f64>,
    /// First harvest tick; sampled uniformly in `[0, interval)` when absent.
    #[serde(default)]
    pub harvest_phase_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harvest: Option<HarvestParams>,
}

impl NodeSpec {
    pub fn node_id(&self) -> NodeId {
        NodeId(self.id)
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.id.to_string())
    }
}

/// When a node wants to send.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficPolicy {
    /// Whenever the node holds enough energy for a transmission.
    #[default]
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub from: u16,
    pub to: u16,
    #[serde(default)]
    pub when: TrafficPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(with = "human_duration")]
    pub duration: Duration,
    #[serde(default)]
    pub mode: ModeName,
    /// Carrier-sense back-off window `[min, max]` in ms (csma mode only).
    #[serde(default = "default_backoff")]
    pub backoff_ms: [f64; 2],
    /// Data packet airtime.
    #[serde(default = "default_data_tx_ms")]
    pub data_tx_ms: f64,
    #[serde(default = "default_spacing")]
    pub freq_slot_spacing_hz: f64,
    #[serde(default = "default_band")]
    pub node_band_hz: [f64; 2],
    #[serde(default = "default_drift_max")]
    pub drift_max_ppm: f64,
    /// Status entries older than this many periods are stale.
    #[serde(default = "default_freshness")]
    pub freshness_periods: f64,
    #[serde(default)]
    pub costs: TaskCosts,
    #[serde(default)]
    pub automod: AutoModDefaults,
    #[serde(default)]
    pub harvest: HarvestParams,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub decoder: DecoderConfig,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub traffic: Vec<TrafficSpec>,
}

fn default_backoff() -> [f64; 2] {
    [0.0, 10.0]
}
fn default_data_tx_ms() -> f64 {
    10.0
}
fn default_spacing() -> f64 {
    2_000.0
}
fn default_band() -> [f64; 2] {
    [12_000.0, 40_000.0]
}
fn default_drift_max() -> f64 {
    500.0
}
fn default_freshness() -> f64 {
    2.0
}

mod human_duration {
    use super::*;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        if d.is_zero() {
            return s.serialize_str("0s");
        }
        s.serialize_str(&humantime::format_duration(*d).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_duration(&raw).map_err(serde::de::Error::custom)
    }
}

/// Parses durations such as `60m`, `1h 30m`, `250ms` or `0m`.
pub fn parse_duration(raw: &str) -> Result<Duration, String> {
    humantime::parse_duration(raw.trim()).map_err(|e| format!("bad duration `{raw}`: {e}"))
}

impl Scenario {
    /// Minimal scenario over `nodes` with every other field at its default.
    pub fn with_nodes(nodes: Vec<NodeSpec>, duration: Duration) -> Self {
        Self {
            name: String::new(),
            duration,
            mode: ModeName::default(),
            backoff_ms: default_backoff(),
            data_tx_ms: default_data_tx_ms(),
            freq_slot_spacing_hz: default_spacing(),
            node_band_hz: default_band(),
            drift_max_ppm: default_drift_max(),
            freshness_periods: default_freshness(),
            costs: TaskCosts::default(),
            automod: AutoModDefaults::default(),
            harvest: HarvestParams::default(),
            channel: ChannelParams::default(),
            decoder: DecoderConfig::default(),
            nodes,
            traffic: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|err| {
            let field = err.path().to_string();
            let inner = err.into_inner();
            ScenarioError::Parse {
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn protocol_mode(&self) -> ProtocolMode {
        match self.mode {
            ModeName::Trap => ProtocolMode::Trap,
            ModeName::Baseline => ProtocolMode::Baseline,
            ModeName::Csma => ProtocolMode::TrapWithCsma {
                backoff: BackoffRange::from_ms(self.backoff_ms[0], self.backoff_ms[1])
                    .expect("validated backoff"),
            },
        }
    }

    pub fn node(&self, id: u16) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn automod_for(&self, node: &NodeSpec) -> AutoModConfig {
        AutoModConfig {
            thresholds: node.thresholds.unwrap_or(self.automod.thresholds),
            period_ms: self.automod.period_ms,
            drift_ppm: node.drift_ppm.unwrap_or(0.0),
            phase_offset_ms: node.phase_offset_ms.unwrap_or(0.0),
        }
    }

    pub fn harvest_for(&self, node: &NodeSpec) -> HarvestParams {
        node.harvest.unwrap_or(self.harvest)
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Validation(msg));
        if self.nodes.is_empty() {
            return fail("nodes list is empty".into());
        }
        let [band_lo, band_hi] = self.node_band_hz;
        if !(band_lo < band_hi) {
            return fail(format!("node_band_hz must be ascending, got {:?}", self.node_band_hz));
        }
        if !(self.freq_slot_spacing_hz > 0.0) {
            return fail("freq_slot_spacing_hz must be positive".into());
        }
        for (i, a) in self.nodes.iter().enumerate() {
            if !(band_lo..=band_hi).contains(&a.freq_hz) {
                return fail(format!(
                    "node {} frequency {} Hz outside band [{band_lo}, {band_hi}] Hz",
                    a.id, a.freq_hz
                ));
            }
            if !(0.0..=1.0).contains(&a.initial_energy) {
                return fail(format!("node {} initial_energy must be in [0, 1]", a.id));
            }
            for b in &self.nodes[i + 1..] {
                if a.id == b.id {
                    return fail(format!("duplicate node id {}", a.id));
                }
                if (a.freq_hz - b.freq_hz).abs() < self.freq_slot_spacing_hz {
                    return fail(format!(
                        "nodes {} and {} at {} Hz and {} Hz violate the {} Hz slot spacing",
                        a.id, b.id, a.freq_hz, b.freq_hz, self.freq_slot_spacing_hz
                    ));
                }
            }
            let cfg = self.automod_for(a);
            if let Err(e) = cfg.validate(a.freq_hz) {
                return fail(format!("node {}: {e}", a.id));
            }
            if let Err(e) = self.harvest_for(a).validate() {
                return fail(format!("node {}: {e}", a.id));
            }
        }
        for t in &self.traffic {
            for end in [t.from, t.to] {
                if self.node(end).is_none() {
                    return fail(format!("traffic references undeclared node {end}"));
                }
            }
            if t.from == t.to {
                return fail(format!("traffic from node {} to itself", t.from));
            }
        }
        if let Err(e) = self.costs.validate() {
            return fail(e);
        }
        if let Err(e) = self.channel.validate() {
            return fail(e.to_string());
        }
        if !(self.data_tx_ms > 0.0) {
            return fail("data_tx_ms must be positive".into());
        }
        if BackoffRange::from_ms(self.backoff_ms[0], self.backoff_ms[1]).is_none() {
            return fail(format!("backoff_ms must be a non-empty range, got {:?}", self.backoff_ms));
        }
        if !(self.drift_max_ppm >= 0.0) || !(self.freshness_periods > 0.0) {
            return fail("drift_max_ppm must be >= 0 and freshness_periods > 0".into());
        }
        Ok(())
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: u16, freq_hz: f64) -> NodeSpec {
        NodeSpec {
            id,
            name: None,
            freq_hz,
            initial_energy: 0.0,
            drift_ppm: None,
            phase_offset_ms: None,
            harvest_phase_ms: None,
            thresholds: None,
            harvest: None,
        }
    }

    #[test]
    fn minimal_json_gets_defaults() {
        let s = Scenario::from_json(r#"{"duration": "5m", "nodes": [{"id": 0, "freq_hz": 20000}]}"#).unwrap();
        assert_eq!(s.duration, Duration::from_secs(300));
        assert_eq!(s.mode, ModeName::Trap);
        assert_eq!(s.costs, TaskCosts::default());
        assert_eq!(s.automod.period_ms, 100.0);
        assert_eq!(s.data_tx_ms, 10.0);
    }

    #[test]
    fn close_slots_rejected() {
        let s = Scenario::with_nodes(vec![node(0, 26_000.0), node(1, 26_500.0)], Duration::from_secs(60));
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("slot spacing"), "{err}");
    }

    #[test]
    fn empty_nodes_rejected() {
        let err = Scenario::from_json(r#"{"duration": "5m", "nodes": []}"#).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(_)));
    }

    #[test]
    fn parse_error_names_field_and_line() {
        let text = "{\n  \"duration\": \"5m\",\n  \"nodes\": [{\"id\": 0, \"freq_hz\": \"fast\"}]\n}";
        match Scenario::from_json(text).unwrap_err() {
            ScenarioError::Parse { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field, "nodes[0].freq_hz");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let err = Scenario::from_json(r#"{"duration": "5m", "nodez": []}"#).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }));
    }

    #[test]
    fn traffic_must_reference_nodes() {
        let mut s = Scenario::with_nodes(vec![node(0, 20_000.0), node(1, 26_000.0)], Duration::from_secs(60));
        s.traffic.push(TrafficSpec {
            from: 0,
            to: 7,
            when: TrafficPolicy::Always,
        });
        assert!(s.validate().is_err());
        s.traffic[0].to = 0;
        assert!(s.validate().is_err());
        s.traffic[0].to = 1;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn out_of_band_node_rejected() {
        let s = Scenario::with_nodes(vec![node(0, 8_000.0)], Duration::from_secs(60));
        assert!(s.validate().is_err());
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration("60m").unwrap(), Duration::from_secs(3_600));
        assert_eq!(parse_duration("0m").unwrap(), Duration::ZERO);
        assert!(parse_duration("soon").is_err());
    }

    #[test]
    fn serialize_reload_is_fixed_point() {
        let mut s = Scenario::with_nodes(vec![node(0, 20_000.0), node(1, 26_000.0)], Duration::from_secs(90));
        s.nodes[1].drift_ppm = Some(12.5);
        s.mode = ModeName::Csma;
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.to_json(), s.to_json());
    }
}
