//! Burst codec: energy level + OOK frequency <-> pulse train.
//!
//! A status burst is a run of 50% duty-cycle OOK pulses. The number of pulses
//! carries the sender's energy level and the modulation frequency identifies
//! the sender. Timestamps are integer microseconds.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulation time in integer microseconds.
pub type Micros = u64;

/// Lowest OOK modulation frequency accepted by the encoder.
pub const MIN_OOK_FREQ_HZ: f64 = 1_000.0;
/// Hard upper limit of the receiver front-end.
pub const MAX_OOK_FREQ_HZ: f64 = 40_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("OOK frequency {0} Hz outside [1000, 40000] Hz")]
    InvalidFrequency(f64),
    #[error("need at least {MIN_PULSES_FOR_ESTIMATE} pulses to estimate frequency, got {0}")]
    TooFewPulses(usize),
    #[error("no pulses received")]
    NoBurst,
    #[error("malformed pulse train: {0}")]
    MalformedTrain(String),
}

/// Quantized energy status. Ordered `Charging < Low < High < Full`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyLevel {
    /// Charging transient.
    Charging,
    /// Enough for small tasks.
    Low,
    /// Enough for a reliable data reception.
    High,
    /// Storage full.
    Full,
}

impl EnergyLevel {
    pub const ALL: [EnergyLevel; 4] = [
        EnergyLevel::Charging,
        EnergyLevel::Low,
        EnergyLevel::High,
        EnergyLevel::Full,
    ];

    pub const fn nominal_pulses(self) -> u32 {
        match self {
            EnergyLevel::Charging => 32,
            EnergyLevel::Low => 64,
            EnergyLevel::High => 128,
            EnergyLevel::Full => 256,
        }
    }

    pub fn from_nominal_pulses(pulses: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.nominal_pulses() == pulses)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnergyLevel::Charging => "charging",
            EnergyLevel::Low => "low",
            EnergyLevel::High => "high",
            EnergyLevel::Full => "full",
        }
    }
}

impl fmt::Display for EnergyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Network identity of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u16);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A node together with the OOK frequency slot it modulates at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub node: NodeId,
    pub freq_hz: f64,
}

/// Logical burst descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub level: EnergyLevel,
    pub ook_freq_hz: f64,
    pub node: NodeId,
}

impl Burst {
    pub fn new(level: EnergyLevel, ook_freq_hz: f64, node: NodeId) -> Result<Self, CodecError> {
        check_band(ook_freq_hz)?;
        Ok(Self {
            level,
            ook_freq_hz,
            node,
        })
    }

    pub fn encode(&self, start: Micros) -> Result<PulseTrain, CodecError> {
        encode(self.level, self.ook_freq_hz, start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub time: Micros,
    pub polarity: Polarity,
}

/// One closed ON interval, `rise < fall`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pulse {
    pub rise: Micros,
    pub fall: Micros,
}

impl Pulse {
    pub fn width(&self) -> Micros {
        self.fall - self.rise
    }
}

/// Timestamped ON/OFF sequence observed (or emitted) over the window
/// `[origin, end]`.
///
/// Stored as closed pulses, so edges always alternate starting with a rising
/// edge and the edge count is even.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseTrain {
    origin: Micros,
    end: Micros,
    pulses: Vec<Pulse>,
}

impl PulseTrain {
    pub fn empty(origin: Micros, end: Micros) -> Self {
        Self {
            origin,
            end: end.max(origin),
            pulses: Vec::new(),
        }
    }

    /// Builds a train from pulses, checking that they are strictly ordered,
    /// non-touching and inside the window.
    pub fn from_pulses(origin: Micros, end: Micros, pulses: Vec<Pulse>) -> Result<Self, CodecError> {
        if end < origin {
            return Err(CodecError::MalformedTrain(format!(
                "window end {end} before origin {origin}"
            )));
        }
        let mut last_fall: Option<Micros> = None;
        for p in &pulses {
            if p.rise >= p.fall {
                return Err(CodecError::MalformedTrain(format!(
                    "pulse rise {} not before fall {}",
                    p.rise, p.fall
                )));
            }
            if p.rise < origin || p.fall > end {
                return Err(CodecError::MalformedTrain(format!(
                    "pulse [{}, {}] outside window [{origin}, {end}]",
                    p.rise, p.fall
                )));
            }
            if let Some(prev) = last_fall {
                if p.rise <= prev {
                    return Err(CodecError::MalformedTrain(format!(
                        "rise {} not after previous fall {prev}",
                        p.rise
                    )));
                }
            }
            last_fall = Some(p.fall);
        }
        Ok(Self { origin, end, pulses })
    }

    /// Builds a train from a raw edge list. Edges must strictly increase and
    /// alternate starting with a rising edge.
    pub fn from_edges(origin: Micros, end: Micros, edges: &[Edge]) -> Result<Self, CodecError> {
        if !edges.len().is_multiple_of(2) {
            return Err(CodecError::MalformedTrain("odd edge count".into()));
        }
        let mut pulses = Vec::with_capacity(edges.len() / 2);
        for pair in edges.chunks_exact(2) {
            if pair[0].polarity != Polarity::Rising || pair[1].polarity != Polarity::Falling {
                return Err(CodecError::MalformedTrain("edges do not alternate".into()));
            }
            pulses.push(Pulse {
                rise: pair[0].time,
                fall: pair[1].time,
            });
        }
        Self::from_pulses(origin, end, pulses)
    }

    pub(crate) fn from_parts_unchecked(origin: Micros, end: Micros, pulses: Vec<Pulse>) -> Self {
        debug_assert!(Self::from_pulses(origin, end, pulses.clone()).is_ok());
        Self { origin, end, pulses }
    }

    pub fn origin(&self) -> Micros {
        self.origin
    }

    pub fn end(&self) -> Micros {
        self.end
    }

    pub fn duration(&self) -> Micros {
        self.end - self.origin
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.pulses.iter().flat_map(|p| {
            [
                Edge {
                    time: p.rise,
                    polarity: Polarity::Rising,
                },
                Edge {
                    time: p.fall,
                    polarity: Polarity::Falling,
                },
            ]
        })
    }
}

fn check_band(freq_hz: f64) -> Result<(), CodecError> {
    if freq_hz.is_finite() && (MIN_OOK_FREQ_HZ..=MAX_OOK_FREQ_HZ).contains(&freq_hz) {
        Ok(())
    } else {
        Err(CodecError::InvalidFrequency(freq_hz))
    }
}

/// Encodes `count` OOK pulses at `freq_hz` starting at `start`.
///
/// Pulse `k` rises at `start + round(k / f)` and falls half a period later;
/// the window closes at `start + round(count / f)`.
pub fn encode_pulses(count: u32, freq_hz: f64, start: Micros) -> Result<PulseTrain, CodecError> {
    check_band(freq_hz)?;
    let period = 1e6 / freq_hz;
    let at = |x: f64| start + x.round() as Micros;
    let pulses = (0..count)
        .map(|k| {
            let k = f64::from(k);
            Pulse {
                rise: at(k * period),
                fall: at((k + 0.5) * period),
            }
        })
        .collect();
    let end = at(f64::from(count) * period);
    Ok(PulseTrain::from_parts_unchecked(start, end, pulses))
}

/// Encodes an energy level as its nominal number of pulses.
pub fn encode(level: EnergyLevel, freq_hz: f64, start: Micros) -> Result<PulseTrain, CodecError> {
    encode_pulses(level.nominal_pulses(), freq_hz, start)
}

/// Number of received pulses (rising edges).
pub fn count_pulses(train: &PulseTrain) -> usize {
    train.pulses.len()
}

pub const MIN_PULSES_FOR_ESTIMATE: usize = 4;

/// Deviation, as a fraction of the fitted period, beyond which a pulse is
/// incoherent with the fitted OOK grid.
const COHERENCE_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEstimate {
    pub freq_hz: f64,
    /// `1 - (IQR - 1 µs) / median` of the inter-rising-edge periods, in `[0, 1]`.
    pub quality: f64,
    /// Median inter-rising-edge period in µs.
    pub median_period_us: f64,
    /// Pulses off the fitted grid or with a width far from half a period.
    pub incoherent_pulses: usize,
}

/// Linear-interpolated quantile of sorted data (`q` in `[0, 1]`).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Estimates the OOK frequency of a received burst.
///
/// The median period unwraps every rising edge onto an integer pulse index
/// (dropped pulses advance the index by more than one); the frequency is the
/// reciprocal of the least-squares slope of edge time against index.
pub fn estimate_frequency(train: &PulseTrain) -> Result<FrequencyEstimate, CodecError> {
    let pulses = train.pulses();
    if pulses.len() < MIN_PULSES_FOR_ESTIMATE {
        return Err(CodecError::TooFewPulses(pulses.len()));
    }

    let mut periods: Vec<f64> = pulses
        .windows(2)
        .map(|w| (w[1].rise - w[0].rise) as f64)
        .collect();
    periods.sort_by(f64::total_cmp);
    let median = quantile(&periods, 0.5);
    let iqr = quantile(&periods, 0.75) - quantile(&periods, 0.25);
    let quality = (1.0 - (iqr - 1.0).max(0.0) / median).clamp(0.0, 1.0);

    // Unwrap indices. An edge closer than half a median period to the last
    // accepted edge cannot be a grid point and is set aside.
    let mut grid: Vec<(f64, f64, &Pulse)> = Vec::with_capacity(pulses.len());
    let mut off_grid: Vec<&Pulse> = Vec::new();
    let mut index = 0.0;
    let mut last_rise = pulses[0].rise;
    grid.push((0.0, last_rise as f64, &pulses[0]));
    for p in &pulses[1..] {
        let steps = ((p.rise - last_rise) as f64 / median).round();
        if steps < 1.0 {
            off_grid.push(p);
            continue;
        }
        index += steps;
        last_rise = p.rise;
        grid.push((index, p.rise as f64, p));
    }

    let n = grid.len() as f64;
    let mean_k = grid.iter().map(|g| g.0).sum::<f64>() / n;
    let mean_t = grid.iter().map(|g| g.1).sum::<f64>() / n;
    let sxx: f64 = grid.iter().map(|g| (g.0 - mean_k).powi(2)).sum();
    let sxy: f64 = grid.iter().map(|g| (g.0 - mean_k) * (g.1 - mean_t)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { median };
    let intercept = mean_t - slope * mean_k;

    let tol = COHERENCE_TOLERANCE * slope;
    let bad_width = |p: &Pulse| (p.width() as f64 - slope / 2.0).abs() > tol;
    let incoherent = grid
        .iter()
        .filter(|(k, t, p)| (t - (slope * k + intercept)).abs() > tol || bad_width(p))
        .count()
        + off_grid.len();

    Ok(FrequencyEstimate {
        freq_hz: 1e6 / slope,
        quality,
        median_period_us: median,
        incoherent_pulses: incoherent,
    })
}

/// Maps a received pulse count to the nearest nominal level.
///
/// Boundaries sit at the rounded geometric midpoints of the nominal counts:
/// `1..=45` Charging, `46..=91` Low, `92..=181` High, `182..` Full.
pub fn classify_level(pulse_count: usize) -> Result<EnergyLevel, CodecError> {
    match pulse_count {
        0 => Err(CodecError::NoBurst),
        1..=45 => Ok(EnergyLevel::Charging),
        46..=91 => Ok(EnergyLevel::Low),
        92..=181 => Ok(EnergyLevel::High),
        _ => Ok(EnergyLevel::Full),
    }
}

/// Acceptance thresholds applied by [`decode_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub min_quality: f64,
    pub slot_tolerance_hz: f64,
    pub max_incoherent_pulses: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            min_quality: 0.8,
            slot_tolerance_hz: 1_000.0,
            max_incoherent_pulses: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptReason {
    NoBurst,
    TooFewPulses,
    LowQuality,
    Incoherent,
    NoSlotMatch,
    AmbiguousSlot,
}

impl CorruptReason {
    pub fn as_str(self) -> &'static str {
        match self {
            CorruptReason::NoBurst => "no_burst",
            CorruptReason::TooFewPulses => "too_few_pulses",
            CorruptReason::LowQuality => "low_quality",
            CorruptReason::Incoherent => "incoherent",
            CorruptReason::NoSlotMatch => "no_slot_match",
            CorruptReason::AmbiguousSlot => "ambiguous_slot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeOutcome {
    Decoded { node: NodeId, level: EnergyLevel },
    Corrupted(CorruptReason),
}

impl DecodeOutcome {
    pub fn is_corrupted(&self) -> bool {
        matches!(self, DecodeOutcome::Corrupted(_))
    }
}

/// Decodes a received burst against the roster of known slots with the
/// default thresholds.
pub fn decode(train: &PulseTrain, roster: &[Slot]) -> DecodeOutcome {
    decode_with(train, roster, &DecoderConfig::default())
}

pub fn decode_with(train: &PulseTrain, roster: &[Slot], cfg: &DecoderConfig) -> DecodeOutcome {
    let count = count_pulses(train);
    if count == 0 {
        return DecodeOutcome::Corrupted(CorruptReason::NoBurst);
    }
    let est = match estimate_frequency(train) {
        Ok(est) => est,
        Err(_) => return DecodeOutcome::Corrupted(CorruptReason::TooFewPulses),
    };
    if est.quality < cfg.min_quality {
        return DecodeOutcome::Corrupted(CorruptReason::LowQuality);
    }
    if est.incoherent_pulses > cfg.max_incoherent_pulses {
        return DecodeOutcome::Corrupted(CorruptReason::Incoherent);
    }
    let mut matches = roster
        .iter()
        .filter(|s| (s.freq_hz - est.freq_hz).abs() <= cfg.slot_tolerance_hz);
    let node = match (matches.next(), matches.next()) {
        (Some(slot), None) => slot.node,
        (None, _) => return DecodeOutcome::Corrupted(CorruptReason::NoSlotMatch),
        (Some(_), Some(_)) => return DecodeOutcome::Corrupted(CorruptReason::AmbiguousSlot),
    };
    match classify_level(count) {
        Ok(level) => DecodeOutcome::Decoded { node, level },
        Err(_) => DecodeOutcome::Corrupted(CorruptReason::NoBurst),
    }
}
