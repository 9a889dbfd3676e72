//! Discrete-event simulator for energy-aware data exchange among batteryless
//! backscatter nodes.
//!
//! Each node periodically broadcasts a coarse energy level as an on-off keyed
//! burst whose frequency identifies the sender. Neighbours decode these
//! bursts, keep a small table of their peers' energy, and only start a data
//! transfer when the receiver is known to hold enough charge.
//!
//! The runnable programs in `examples/` are the main entry point:
//!
//! | example | shows |
//! |---|---|
//! | `codec_roundtrip` | encoding a level as pulses and decoding it back |
//! | `channel_calibration` | received pulse counts through the default channel |
//! | `automod_schedule` | the auto-modulator's fire times across power failures |
//! | `energy_budget` | harvesting, booting and spending a capacitor |
//! | `paired_comparison` | the three-node ring with and without coordination |
//! | `collision_demo` | overlapping bursts being rejected |
//! | `parameter_sweep` | grid runs aggregated over seeds |

pub mod automod;
pub mod channel;
pub mod codec;
pub mod energy;
pub mod engine;
pub mod metrics;
pub mod protocol;
pub mod report;
pub mod scenario;
pub mod sweep;
pub mod trace;

pub use automod::{AutoModConfig, AutoModulator};
pub use channel::{calibrate_defaults, impair, overlap, ChannelEvent, ChannelParams};
pub use codec::{decode, encode, Burst, DecodeOutcome, EnergyLevel, NodeId, PulseTrain, Slot};
pub use energy::{CapacitorState, Energy, HarvestParams, TaskCosts};
pub use engine::{run, run_paired, run_with_mode, PairedOutput, SimError, SimOutput};
pub use metrics::Metrics;
pub use protocol::{decide_transmit, Decision, NeighborTable, ProtocolMode};
pub use report::{report_table4, PairedRun, PairedSummary, RunSummary};
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use sweep::{sweep, GridAxis, SweepTable};
pub use trace::{EventKind, Trace};
