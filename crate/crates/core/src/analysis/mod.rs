//! Where was the photon: two-state-vector weak values and consistent histories.

pub mod histories;
pub mod tsvf;

pub use histories::{
    chain_ket, history_probabilities, history_probability, is_consistent, BuiltinFamily, ChainKet, ConsistencyReport,
    Family, History, NamedProjector, Slot,
};
pub use tsvf::{
    backward_state, channel_probe, forward_state, paradox_report, simulate_probe, simulate_weak_probe, weak_trace_map,
    weak_value, BoundaryPair, CyclePost, ParadoxReport, PostSelection, WeakCell, WeakTraceMap,
};
