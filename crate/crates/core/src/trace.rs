//! Event trace records and their CSV form.

use std::io;

use serde::Serialize;

use crate::codec::{EnergyLevel, Micros, NodeId};
use crate::energy::Energy;

/// Event kinds, in tie-break order for simultaneous events of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    HarvestTick,
    AutoModFire,
    BurstArrival,
    DecodeComplete,
    TxDecision,
    DataTxStart,
    DataTxEnd,
    PowerFail,
    Boot,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::HarvestTick => "harvest_tick",
            EventKind::AutoModFire => "automod_fire",
            EventKind::BurstArrival => "burst_arrival",
            EventKind::DecodeComplete => "decode_complete",
            EventKind::TxDecision => "tx_decision",
            EventKind::DataTxStart => "data_tx_start",
            EventKind::DataTxEnd => "data_tx_end",
            EventKind::PowerFail => "power_fail",
            EventKind::Boot => "boot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time_us: Micros,
    pub kind: EventKind,
    pub node: NodeId,
    pub peer: Option<NodeId>,
    pub level: Option<EnergyLevel>,
    /// The node's stored energy after the event.
    pub energy: Option<Energy>,
    pub detail: String,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    time_us: Micros,
    kind: &'static str,
    node: u16,
    peer: Option<u16>,
    level: Option<&'static str>,
    energy: Option<String>,
    detail: &'a str,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    /// One row per event: `time_us,kind,node,peer,level,energy,detail`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(CsvRow {
                time_us: r.time_us,
                kind: r.kind.as_str(),
                node: r.node.0,
                peer: r.peer.map(|p| p.0),
                level: r.level.map(EnergyLevel::as_str),
                energy: r.energy.map(|e| e.to_string()),
                detail: &r.detail,
            })?;
        }
        if self.records.is_empty() {
            w.write_record(["time_us", "kind", "node", "peer", "level", "energy", "detail"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
