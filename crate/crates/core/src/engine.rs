//! Deterministic discrete-event engine.
//!
//! Events are processed in `(time, node, kind, insertion)` order. Each node
//! owns independent random streams for harvesting, burst reception and
//! back-off, all derived from the run seed, so two protocol modes run with the
//! same seed see the same harvested increments.
//!
//! Two channels are simulated: the energy-status channel carrying auto-
//! modulator bursts, and a data channel on which overlapping packets collide.
//! They do not interfere with each other.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::automod::{quantize, AutoModConfig, AutoModulator};
use crate::channel::{impair, overlap, ChannelEvent};
use crate::codec::{decode_with, DecodeOutcome, EnergyLevel, Micros, NodeId, Slot};
use crate::energy::{apply_harvest, CapacitorState, Energy, HarvestParams, TaskCosts};
use crate::metrics::Metrics;
use crate::protocol::{
    begin_data_tx, carrier_sense, complete_data_tx, decide_transmit, CsmaOutcome, DataChannel, Decision,
    Delivery, NeighborTable, ProtocolMode,
};
use crate::scenario::Scenario;
use crate::trace::{EventKind, Trace, TraceRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Node parameters after drift, phase and harvest offsets are resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedNode {
    pub id: NodeId,
    pub name: String,
    pub freq_hz: f64,
    pub automod: AutoModConfig,
    pub harvest: HarvestParams,
    pub harvest_phase_us: Micros,
    pub initial_energy: Energy,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub seed: u64,
    pub trace: Trace,
    pub metrics: Metrics,
    pub nodes: Vec<ResolvedNode>,
}

#[derive(Debug, Clone)]
pub struct PairedOutput {
    pub trap: SimOutput,
    pub baseline: SimOutput,
}

// Random stream tags.
const STREAM_SETUP: u64 = 1;
const STREAM_HARVEST: u64 = 0x100;
const STREAM_RX: u64 = 0x200;
const STREAM_MAC: u64 = 0x300;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream(seed: u64, salt: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(salt)));
    rng.set_stream(id);
    rng
}

/// Resolves per-node drift, phase and harvest offsets for `seed`.
///
/// Draws happen in node order and whether or not a value is overridden, so
/// the resolution of one node never shifts another's.
pub fn resolve_nodes(scenario: &Scenario, seed: u64) -> Vec<ResolvedNode> {
    let mut rng = stream(seed, 0, STREAM_SETUP);
    scenario
        .nodes
        .iter()
        .map(|spec| {
            let mut automod = scenario.automod_for(spec);
            let harvest = scenario.harvest_for(spec);
            let drift_draw = rng.gen_range(-1.0..=1.0) * scenario.drift_max_ppm;
            let phase_draw = rng.gen::<f64>() * automod.period_ms;
            let harvest_draw = rng.gen::<f64>() * harvest.interval_ms as f64;
            automod.drift_ppm = spec.drift_ppm.unwrap_or(drift_draw);
            automod.phase_offset_ms = spec.phase_offset_ms.unwrap_or(phase_draw);
            let harvest_phase_ms = spec.harvest_phase_ms.unwrap_or(harvest_draw);
            ResolvedNode {
                id: spec.node_id(),
                name: spec.label(),
                freq_hz: spec.freq_hz,
                automod,
                harvest,
                harvest_phase_us: (harvest_phase_ms * 1_000.0).round().max(0.0) as Micros,
                initial_energy: Energy::from_fraction(spec.initial_energy),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Harvest,
    Fire,
    BurstEnd { emission: u64 },
    Decide,
    TxStart { target: usize, sensed_from: Option<Micros> },
    TxEnd { handle: u64, target: usize },
}

impl Action {
    fn kind(&self) -> EventKind {
        match self {
            Action::Harvest => EventKind::HarvestTick,
            Action::Fire => EventKind::AutoModFire,
            Action::BurstEnd { .. } => EventKind::BurstArrival,
            Action::Decide => EventKind::TxDecision,
            Action::TxStart { .. } => EventKind::DataTxStart,
            Action::TxEnd { .. } => EventKind::DataTxEnd,
        }
    }
}

#[derive(Debug)]
struct Scheduled {
    time: Micros,
    node: u16,
    kind: EventKind,
    seq: u64,
    index: usize,
    action: Action,
}

impl Scheduled {
    fn key(&self) -> (Micros, u16, EventKind, u64) {
        (self.time, self.node, self.kind, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

struct Emission {
    id: u64,
    source: usize,
    event: ChannelEvent,
    level: EnergyLevel,
    done: bool,
}

struct NodeState {
    id: NodeId,
    automod: AutoModulator,
    boot: Energy,
    cap: CapacitorState,
    harvest: HarvestParams,
    harvest_rng: ChaCha8Rng,
    rx_rng: ChaCha8Rng,
    mac_rng: ChaCha8Rng,
    table: NeighborTable,
    /// Whether each table entry matches what the neighbour actually sent.
    truthful: BTreeMap<NodeId, bool>,
    roster: Vec<Slot>,
    targets: Vec<usize>,
    listening_since: Option<Micros>,
    listening_us: u64,
    decide_queued: bool,
    tx_pending: bool,
}

struct Engine<'a> {
    scenario: &'a Scenario,
    mode: ProtocolMode,
    costs: TaskCosts,
    horizon: Micros,
    airtime: Micros,
    nodes: Vec<NodeState>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    air: Vec<Emission>,
    next_emission: u64,
    data: DataChannel,
    trace: Trace,
    metrics: Metrics,
    now: Micros,
    open_tx: i64,
}

/// Runs one simulation with the scenario's own protocol mode.
pub fn run(scenario: &Scenario, seed: u64) -> Result<SimOutput, SimError> {
    scenario
        .validate()
        .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    run_with_mode(scenario, scenario.protocol_mode(), seed)
}

pub fn run_with_mode(scenario: &Scenario, mode: ProtocolMode, seed: u64) -> Result<SimOutput, SimError> {
    scenario
        .validate()
        .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    let nodes = resolve_nodes(scenario, seed);
    let mut engine = Engine::new(scenario, mode, seed, &nodes)?;
    engine.run()?;
    let (trace, metrics) = engine.finish()?;
    Ok(SimOutput {
        seed,
        trace,
        metrics,
        nodes,
    })
}

/// Runs the coordinated arm (the scenario's mode, or plain TRAP if the
/// scenario is a baseline) and the baseline arm on the same seed, hence on the
/// same harvested energy increments.
pub fn run_paired(scenario: &Scenario, seed: u64) -> Result<PairedOutput, SimError> {
    scenario
        .validate()
        .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    let coordinated = match scenario.protocol_mode() {
        ProtocolMode::Baseline => ProtocolMode::Trap,
        m => m,
    };
    Ok(PairedOutput {
        trap: run_with_mode(scenario, coordinated, seed)?,
        baseline: run_with_mode(scenario, ProtocolMode::Baseline, seed)?,
    })
}

impl<'a> Engine<'a> {
    fn new(scenario: &'a Scenario, mode: ProtocolMode, seed: u64, resolved: &[ResolvedNode]) -> Result<Self, SimError> {
        let channel_salt = scenario.channel.rng_seed;
        let mut nodes = Vec::with_capacity(resolved.len());
        for (i, r) in resolved.iter().enumerate() {
            let automod = AutoModulator::new(r.id, r.freq_hz, r.automod)
                .map_err(|e| SimError::InvalidScenario(format!("node {}: {e}", r.id)))?;
            let boot = Energy::from_fraction(r.automod.thresholds[0]);
            let roster = resolved
                .iter()
                .filter(|o| o.id != r.id)
                .map(|o| Slot {
                    node: o.id,
                    freq_hz: o.freq_hz,
                })
                .collect();
            let targets = scenario
                .traffic
                .iter()
                .filter(|t| t.from == r.id.0)
                .filter_map(|t| resolved.iter().position(|o| o.id.0 == t.to))
                .collect();
            let i = i as u64;
            nodes.push(NodeState {
                id: r.id,
                automod,
                boot,
                cap: CapacitorState::new(r.initial_energy, boot, 0),
                harvest: r.harvest,
                harvest_rng: stream(seed, 0, STREAM_HARVEST + i),
                rx_rng: stream(seed, channel_salt, STREAM_RX + i),
                mac_rng: stream(seed, 0, STREAM_MAC + i),
                table: NeighborTable::with_period(r.automod.period_us(), scenario.freshness_periods),
                truthful: BTreeMap::new(),
                roster,
                targets,
                listening_since: None,
                listening_us: 0,
                decide_queued: false,
                tx_pending: false,
            });
        }
        let mut engine = Self {
            scenario,
            mode,
            costs: scenario.costs,
            horizon: scenario.duration.as_micros().min(u128::from(u64::MAX)) as Micros,
            airtime: ((scenario.data_tx_ms * 1_000.0).round() as Micros).max(1),
            nodes,
            queue: BinaryHeap::new(),
            seq: 0,
            air: Vec::new(),
            next_emission: 0,
            data: DataChannel::new(),
            trace: Trace::new(),
            metrics: Metrics {
                mode: mode.name().to_string(),
                ..Metrics::default()
            },
            now: 0,
            open_tx: 0,
        };
        for (i, r) in resolved.iter().enumerate() {
            engine.schedule(r.harvest_phase_us, i, Action::Harvest);
            let first = engine.nodes[i].automod.next_fire();
            engine.schedule(first, i, Action::Fire);
        }
        Ok(engine)
    }

    fn schedule(&mut self, time: Micros, index: usize, action: Action) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            node: self.nodes[index].id.0,
            kind: action.kind(),
            seq: self.seq,
            index,
            action,
        });
    }

    fn record(&mut self, kind: EventKind, index: usize, peer: Option<NodeId>, level: Option<EnergyLevel>, detail: String) {
        let n = &self.nodes[index];
        self.trace.push(TraceRecord {
            time_us: self.now,
            kind,
            node: n.id,
            peer,
            level,
            energy: Some(n.cap.energy),
            detail,
        });
    }

    fn run(&mut self) -> Result<(), SimError> {
        while let Some(ev) = self.queue.pop() {
            if ev.time < self.now {
                return Err(SimError::Invariant(format!(
                    "event at {} µs processed after {} µs",
                    ev.time, self.now
                )));
            }
            // In-flight data packets always complete so every start has an end.
            if ev.time >= self.horizon && !matches!(ev.action, Action::TxEnd { .. }) {
                continue;
            }
            self.now = ev.time;
            match ev.action {
                Action::Harvest => self.on_harvest(ev.index),
                Action::Fire => self.on_fire(ev.index),
                Action::BurstEnd { emission } => self.on_burst_end(emission)?,
                Action::Decide => self.on_decide(ev.index),
                Action::TxStart { target, sensed_from } => self.on_tx_start(ev.index, target, sensed_from)?,
                Action::TxEnd { handle, target } => self.on_tx_end(ev.index, handle, target),
            }
        }
        Ok(())
    }

    fn on_harvest(&mut self, i: usize) {
        let n = &mut self.nodes[i];
        let inc = n.harvest.draw_increment(&mut n.harvest_rng);
        let was_on = n.cap.mcu_on;
        n.cap = apply_harvest(n.cap, inc, n.boot, self.now);
        let booted = !was_on && n.cap.mcu_on;
        let next = self.now + n.harvest.interval_ms * 1_000;
        self.record(EventKind::HarvestTick, i, None, None, format!("increment={inc:.6}"));
        if booted {
            self.record(EventKind::Boot, i, None, None, String::new());
        }
        self.schedule(next, i, Action::Harvest);
        self.want_to_send(i);
    }

    /// Queues a decision when a node newly holds enough energy to transmit.
    fn want_to_send(&mut self, i: usize) {
        let tx = self.costs.tx();
        let n = &mut self.nodes[i];
        if n.targets.is_empty()
            || n.tx_pending
            || n.decide_queued
            || n.listening_since.is_some()
            || !n.cap.mcu_on
            || n.cap.energy < tx
        {
            return;
        }
        n.decide_queued = true;
        self.schedule(self.now, i, Action::Decide);
    }

    fn on_fire(&mut self, i: usize) {
        let now = self.now;
        let n = &mut self.nodes[i];
        let level = quantize(n.cap.fraction(), n.automod.config());
        let event = n.automod.emit(n.cap.fraction(), now);
        let next = n.automod.next_fire();
        let end = event.end;
        let mcu = if n.cap.mcu_on { "mcu_on" } else { "mcu_off" };
        self.record(EventKind::AutoModFire, i, None, Some(level), mcu.to_string());
        self.metrics.automod_fires += 1;
        let id = self.next_emission;
        self.next_emission += 1;
        self.air.push(Emission {
            id,
            source: i,
            event,
            level,
            done: false,
        });
        self.schedule(end, i, Action::BurstEnd { emission: id });
        self.schedule(next, i, Action::Fire);
    }

    fn on_burst_end(&mut self, emission: u64) -> Result<(), SimError> {
        let pos = self
            .air
            .iter()
            .position(|e| e.id == emission)
            .ok_or_else(|| SimError::Invariant(format!("unknown emission {emission}")))?;
        self.air[pos].done = true;

        // Connected component of time-overlapping emissions.
        let mut members = vec![pos];
        let mut k = 0;
        while k < members.len() {
            let cur = &self.air[members[k]].event;
            let found: Vec<usize> = (0..self.air.len())
                .filter(|j| !members.contains(j) && self.air[*j].event.overlaps(cur))
                .collect();
            members.extend(found);
            k += 1;
        }
        if members.iter().any(|&m| !self.air[m].done) {
            return Ok(());
        }
        members.sort_unstable();
        let mut cluster: Vec<Emission> = Vec::with_capacity(members.len());
        for &m in members.iter().rev() {
            cluster.push(self.air.remove(m));
        }
        cluster.sort_by_key(|e| (e.event.start, e.source));
        let collision = cluster.len() > 1;
        if collision {
            self.metrics.burst_overlaps += 1;
        }
        for e in &cluster {
            let detail = format!("sources={}", cluster.len());
            self.record(EventKind::BurstArrival, e.source, None, Some(e.level), detail);
        }

        for r in 0..self.nodes.len() {
            // A node reflecting its own burst cannot listen to the channel.
            if cluster.iter().any(|e| e.source == r) {
                continue;
            }
            let outcome = {
                self.metrics.receptions += 1;
                let n = &mut self.nodes[r];
                let received: Vec<ChannelEvent> = cluster
                    .iter()
                    .map(|e| {
                        let train = impair(&e.event.train, e.event.freq_hz, &self.scenario.channel, &mut n.rx_rng);
                        ChannelEvent { train, ..e.event.clone() }
                    })
                    .collect();
                let merged = overlap(&received);
                if merged.len() != 1 {
                    return Err(SimError::Invariant(format!(
                        "overlapping cluster split into {} receptions",
                        merged.len()
                    )));
                }
                let outcome = decode_with(&merged[0].train, &n.roster, &self.scenario.decoder);
                match outcome {
                    DecodeOutcome::Corrupted(_) => self.metrics.corrupted_receptions += 1,
                    DecodeOutcome::Decoded { node, level } => {
                        let truth = &cluster[0];
                        let matches = !collision && node == self.nodes[truth.source].id && level == truth.level;
                        if !matches {
                            self.metrics.misdecoded_receptions += 1;
                        }
                    }
                }
                outcome
            };
            self.deliver_status(r, &cluster, outcome);
        }
        Ok(())
    }

    /// Hands a decoded (or corrupted) burst to a listening MCU.
    fn deliver_status(&mut self, r: usize, cluster: &[Emission], outcome: DecodeOutcome) {
        if self.nodes[r].listening_since.is_none() {
            return;
        }
        let sources = cluster.len();
        let (peer, level, detail) = match outcome {
            DecodeOutcome::Decoded { node, level } => (Some(node), Some(level), format!("decoded;sources={sources}")),
            DecodeOutcome::Corrupted(reason) => (None, None, format!("corrupted:{};sources={sources}", reason.as_str())),
        };
        self.record(EventKind::DecodeComplete, r, peer, level, detail);
        let now = self.now;
        let n = &mut self.nodes[r];
        n.table.on_burst_received(&outcome, now);
        if let DecodeOutcome::Decoded { node, level } = outcome {
            let truthful = sources == 1 && self.nodes[cluster[0].source].id == node && cluster[0].level == level;
            self.nodes[r].truthful.insert(node, truthful);
            let wanted = self.nodes[r].targets.iter().any(|&t| self.nodes[t].id == node);
            if wanted && !self.nodes[r].decide_queued && !self.nodes[r].tx_pending {
                self.nodes[r].decide_queued = true;
                self.schedule(now, r, Action::Decide);
            }
        }
    }

    fn start_listening(&mut self, i: usize) {
        let now = self.now;
        let n = &mut self.nodes[i];
        if n.listening_since.is_none() {
            n.listening_since = Some(now);
        }
    }

    fn stop_listening(&mut self, i: usize) {
        let now = self.now;
        let n = &mut self.nodes[i];
        if let Some(since) = n.listening_since.take() {
            n.listening_us += now - since;
        }
    }

    fn on_decide(&mut self, i: usize) {
        self.nodes[i].decide_queued = false;
        if self.nodes[i].tx_pending {
            return;
        }
        let now = self.now;
        let mut chosen: Option<usize> = None;
        let mut last = None;
        for &t in &self.nodes[i].targets {
            let n = &self.nodes[i];
            let d = decide_transmit(n.cap.energy, self.nodes[t].id, &n.table, &self.mode, &self.costs, now);
            last = Some((t, d));
            if d == Decision::Engage {
                chosen = Some(t);
                break;
            }
        }
        let Some((t, decision)) = last else { return };
        let target_id = self.nodes[t].id;
        match (chosen, decision) {
            (Some(target), _) => {
                self.record(EventKind::TxDecision, i, Some(target_id), None, "engage".into());
                if self.mode.uses_status_channel() {
                    let truthful = self.nodes[i].truthful.get(&target_id).copied().unwrap_or(false);
                    if !truthful {
                        self.metrics.false_engages += 1;
                    }
                }
                self.stop_listening(i);
                self.nodes[i].tx_pending = true;
                match self.mode {
                    ProtocolMode::TrapWithCsma { backoff } => {
                        let wait = backoff.draw(&mut self.nodes[i].mac_rng);
                        self.schedule(
                            now + wait,
                            i,
                            Action::TxStart {
                                target,
                                sensed_from: Some(now),
                            },
                        );
                    }
                    _ => self.schedule(
                        now,
                        i,
                        Action::TxStart {
                            target,
                            sensed_from: None,
                        },
                    ),
                }
            }
            (None, Decision::Postpone(reason)) => {
                self.record(
                    EventKind::TxDecision,
                    i,
                    Some(target_id),
                    None,
                    format!("postpone:{}", reason.as_str()),
                );
                *self.metrics.postponements.entry(reason.as_str().to_string()).or_default() += 1;
                if self.mode.uses_status_channel() && self.nodes[i].cap.energy >= self.costs.tx() {
                    self.start_listening(i);
                } else {
                    self.stop_listening(i);
                }
            }
            (None, Decision::Engage) => unreachable!("engage always selects a target"),
        }
    }

    fn on_tx_start(&mut self, i: usize, target: usize, sensed_from: Option<Micros>) -> Result<(), SimError> {
        let now = self.now;
        let target_id = self.nodes[target].id;
        if self.nodes[i].cap.energy < self.costs.tx() {
            self.nodes[i].tx_pending = false;
            self.record(EventKind::TxDecision, i, Some(target_id), None, "abort:self_low".into());
            return Ok(());
        }
        if let Some(from) = sensed_from {
            if carrier_sense(&self.data, from, now) == CsmaOutcome::Abort {
                self.nodes[i].tx_pending = false;
                self.metrics.csma_aborts += 1;
                self.record(EventKind::TxDecision, i, Some(target_id), None, "abort:carrier_busy".into());
                self.start_listening(i);
                return Ok(());
            }
        }
        let after = begin_data_tx(self.nodes[i].cap, &self.costs)
            .map_err(|e| SimError::Invariant(format!("transmission without energy: {e}")))?;
        self.nodes[i].cap = after;
        self.metrics.tx_actions += 1;
        self.open_tx += 1;
        let handle = self.data.begin(now, now + self.airtime);
        self.record(EventKind::DataTxStart, i, Some(target_id), None, String::new());
        if !after.mcu_on {
            self.power_fail(i);
        }
        self.schedule(now + self.airtime, i, Action::TxEnd { handle, target });
        Ok(())
    }

    fn on_tx_end(&mut self, i: usize, handle: u64, target: usize) {
        let collided = self.data.finish(handle);
        let receiver = self.nodes[target].cap;
        let (after, delivery) = complete_data_tx(receiver, &self.costs, collided);
        self.nodes[target].cap = after;
        self.open_tx -= 1;
        let detail = match delivery {
            Delivery::Success => {
                self.metrics.successful_receptions += 1;
                "success".to_string()
            }
            Delivery::Failure(reason) => {
                *self
                    .metrics
                    .failure_breakdown
                    .entry(reason.as_str().to_string())
                    .or_default() += 1;
                format!("failure:{}", reason.as_str())
            }
        };
        let target_id = self.nodes[target].id;
        self.record(EventKind::DataTxEnd, i, Some(target_id), None, detail);
        if receiver.mcu_on && !after.mcu_on {
            self.power_fail(target);
        } else if after.energy < self.costs.tx() {
            self.stop_listening(target);
        }
        self.nodes[i].tx_pending = false;
        self.data.prune(self.now.saturating_sub(1_000_000));
        self.want_to_send(i);
    }

    fn power_fail(&mut self, i: usize) {
        self.stop_listening(i);
        let n = &mut self.nodes[i];
        n.table.clear();
        n.truthful.clear();
        self.metrics.power_failures += 1;
        self.record(EventKind::PowerFail, i, None, None, String::new());
    }

    fn finish(mut self) -> Result<(Trace, Metrics), SimError> {
        self.now = self.now.max(self.horizon);
        let horizon = self.horizon;
        let mut listening = 0;
        for n in &mut self.nodes {
            if let Some(since) = n.listening_since.take() {
                n.listening_us += horizon.saturating_sub(since);
            }
            listening += n.listening_us;
            if n.cap.energy > Energy::FULL || (n.cap.energy.is_empty() && n.cap.mcu_on) {
                return Err(SimError::Invariant(format!("node {} has inconsistent energy state", n.id)));
            }
        }
        if self.open_tx != 0 {
            return Err(SimError::Invariant(format!("{} data transmissions never ended", self.open_tx)));
        }
        for reason in ["collision", "receiver_low"] {
            self.metrics.failure_breakdown.entry(reason.to_string()).or_default();
        }
        self.metrics.finalize(horizon, listening);
        Ok((self.trace, self.metrics))
    }
}
