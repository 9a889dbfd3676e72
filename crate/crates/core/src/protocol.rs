//! MCU-side protocol logic: neighbour status tracking and the engage/postpone
//! rule, the no-coordination baseline, and optional carrier sensing.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{DecodeOutcome, EnergyLevel, Micros, NodeId};
use crate::energy::{consume, CapacitorState, Energy, InsufficientEnergy, TaskCosts};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborEntry {
    pub level: EnergyLevel,
    pub heard_at: Micros,
}

/// Last decoded status per neighbour. An entry is stale once it is older
/// than the freshness horizon and can never justify an engage decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    horizon_us: Micros,
    entries: BTreeMap<NodeId, NeighborEntry>,
}

impl NeighborTable {
    pub fn new(horizon_us: Micros) -> Self {
        Self {
            horizon_us,
            entries: BTreeMap::new(),
        }
    }

    /// Horizon of `periods` status periods.
    pub fn with_period(period_us: Micros, periods: f64) -> Self {
        Self::new((period_us as f64 * periods).round() as Micros)
    }

    pub fn horizon_us(&self) -> Micros {
        self.horizon_us
    }

    pub fn get(&self, node: NodeId) -> Option<&NeighborEntry> {
        self.entries.get(&node)
    }

    pub fn is_stale(&self, entry: &NeighborEntry, now: Micros) -> bool {
        now.saturating_sub(entry.heard_at) > self.horizon_us
    }

    /// `Some((level, stale))` for a known neighbour.
    pub fn lookup(&self, node: NodeId, now: Micros) -> Option<(EnergyLevel, bool)> {
        self.get(node).map(|e| (e.level, self.is_stale(e, now)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Volatile state is lost on power failure.
    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Records a decoded burst; corrupted receptions are ignored.
    pub fn on_burst_received(&mut self, decoded: &DecodeOutcome, now: Micros) {
        if let DecodeOutcome::Decoded { node, level } = *decoded {
            self.entries.insert(
                node,
                NeighborEntry {
                    level,
                    heard_at: now,
                },
            );
        }
    }
}

/// Functional form of [`NeighborTable::on_burst_received`].
pub fn on_burst_received(decoded: &DecodeOutcome, table: &NeighborTable, now: Micros) -> NeighborTable {
    let mut next = table.clone();
    next.on_burst_received(decoded, now);
    next
}

/// Uniform back-off window for carrier sensing, in µs. `min <= max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffRange {
    pub min_us: Micros,
    pub max_us: Micros,
}

impl BackoffRange {
    pub fn from_ms(min_ms: f64, max_ms: f64) -> Option<Self> {
        let r = Self {
            min_us: (min_ms * 1_000.0).round().max(0.0) as Micros,
            max_us: (max_ms * 1_000.0).round().max(0.0) as Micros,
        };
        (min_ms <= max_ms && min_ms >= 0.0).then_some(r)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Micros {
        rng.gen_range(self.min_us..=self.max_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolMode {
    Trap,
    Baseline,
    TrapWithCsma { backoff: BackoffRange },
}

impl ProtocolMode {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolMode::Trap => "trap",
            ProtocolMode::Baseline => "baseline",
            ProtocolMode::TrapWithCsma { .. } => "csma",
        }
    }

    pub fn uses_status_channel(&self) -> bool {
        !matches!(self, ProtocolMode::Baseline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostponeReason {
    SelfLow,
    NeighborUnknown,
    NeighborLow,
    Stale,
}

impl PostponeReason {
    pub fn as_str(self) -> &'static str {
        match self {
            PostponeReason::SelfLow => "self_low",
            PostponeReason::NeighborUnknown => "neighbor_unknown",
            PostponeReason::NeighborLow => "neighbor_low",
            PostponeReason::Stale => "stale",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Engage,
    Postpone(PostponeReason),
}

/// The engage/postpone rule.
///
/// Trap modes engage only with enough energy of our own and a fresh status of
/// at least `High` from the target. Baseline checks only our own energy.
pub fn decide_transmit(
    self_energy: Energy,
    target: NodeId,
    table: &NeighborTable,
    mode: &ProtocolMode,
    costs: &TaskCosts,
    now: Micros,
) -> Decision {
    if self_energy < costs.tx() {
        return Decision::Postpone(PostponeReason::SelfLow);
    }
    if !mode.uses_status_channel() {
        return Decision::Engage;
    }
    match table.lookup(target, now) {
        None => Decision::Postpone(PostponeReason::NeighborUnknown),
        Some((_, true)) => Decision::Postpone(PostponeReason::Stale),
        Some((level, false)) if level < EnergyLevel::High => Decision::Postpone(PostponeReason::NeighborLow),
        Some(_) => Decision::Engage,
    }
}

/// Whether the data channel showed any activity during a time window.
pub trait CarrierSense {
    fn busy_during(&self, from: Micros, to: Micros) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsmaOutcome {
    Transmit { at: Micros },
    Abort,
}

/// Draws a back-off and senses the data channel over it.
pub fn csma_schedule<R: Rng + ?Sized, C: CarrierSense + ?Sized>(
    backoff: &BackoffRange,
    rng: &mut R,
    now: Micros,
    channel: &C,
) -> CsmaOutcome {
    let at = now + backoff.draw(rng);
    carrier_sense(channel, now, at)
}

/// Second half of [`csma_schedule`], evaluated once the back-off elapsed.
pub fn carrier_sense<C: CarrierSense + ?Sized>(channel: &C, from: Micros, at: Micros) -> CsmaOutcome {
    if channel.busy_during(from, at) {
        CsmaOutcome::Abort
    } else {
        CsmaOutcome::Transmit { at }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    ReceiverLow,
    Collision,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::ReceiverLow => "receiver_low",
            FailureReason::Collision => "collision",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Success,
    Failure(FailureReason),
}

/// Sender side of a data transmission: the cost is paid whatever the outcome.
pub fn begin_data_tx(sender: CapacitorState, costs: &TaskCosts) -> Result<CapacitorState, InsufficientEnergy> {
    consume(sender, costs.tx())
}

/// Receiver side: a collided packet is lost; otherwise the receiver needs
/// `rx_cost` to take it.
pub fn complete_data_tx(receiver: CapacitorState, costs: &TaskCosts, collided: bool) -> (CapacitorState, Delivery) {
    if collided {
        return (receiver, Delivery::Failure(FailureReason::Collision));
    }
    match consume(receiver, costs.rx()) {
        Ok(after) if receiver.mcu_on => (after, Delivery::Success),
        _ => (receiver, Delivery::Failure(FailureReason::ReceiverLow)),
    }
}

/// Whole data exchange in one step.
pub fn execute_data_tx(
    sender: CapacitorState,
    receiver: CapacitorState,
    costs: &TaskCosts,
    collided: bool,
) -> Result<(CapacitorState, CapacitorState, Delivery), InsufficientEnergy> {
    let sender = begin_data_tx(sender, costs)?;
    let (receiver, delivery) = complete_data_tx(receiver, costs, collided);
    Ok((sender, receiver, delivery))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Transmission {
    id: u64,
    start: Micros,
    end: Micros,
    collided: bool,
}

/// Shared data channel. Any two transmissions that overlap in time collide.
#[derive(Debug, Clone, Default)]
pub struct DataChannel {
    log: Vec<Transmission>,
    next_id: u64,
}

impl DataChannel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a transmission over `[start, end)` and returns its handle.
    /// Overlapping in-flight transmissions are marked collided, as is this one.
    pub fn begin(&mut self, start: Micros, end: Micros) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let mut collided = false;
        for t in self.log.iter_mut().filter(|t| t.start < end && start < t.end) {
            t.collided = true;
            collided = true;
        }
        self.log.push(Transmission {
            id,
            start,
            end,
            collided,
        });
        id
    }

    /// Closes a transmission, reporting whether it collided.
    pub fn finish(&mut self, id: u64) -> bool {
        let collided = self.log.iter().find(|t| t.id == id).is_some_and(|t| t.collided);
        collided
    }

    /// Drops records that ended before `horizon`.
    pub fn prune(&mut self, horizon: Micros) {
        self.log.retain(|t| t.end >= horizon);
    }
}

impl CarrierSense for DataChannel {
    fn busy_during(&self, from: Micros, to: Micros) -> bool {
        self.log
            .iter()
            .any(|t| t.start <= to && from < t.end)
    }
}

impl<F: Fn(Micros, Micros) -> bool> CarrierSense for F {
    fn busy_during(&self, from: Micros, to: Micros) -> bool {
        self(from, to)
    }
}
