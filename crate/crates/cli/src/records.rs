//! JSON documents written by the CLI. Each one deserializes back to itself.

use serde::{Deserialize, Serialize};

use counterport_core::analysis::{history_probabilities, is_consistent, chain_ket, Family};
use counterport_core::counterport::CounterportResult;
use counterport_core::cqze::{BobQubit, ProtocolConfig};
use counterport_core::optics::CircuitSchedule;
use counterport_core::qstate::{Sink, StateVector};
use counterport_core::Complex64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeRecord {
    pub label: String,
    pub amplitude: Complex64,
}

/// Live amplitudes at one protocol stage; `lost` is the probability already in sinks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    pub stage: String,
    pub amplitudes: Vec<AmplitudeRecord>,
    pub lost: f64,
}

impl StageRecord {
    pub fn new(stage: &str, s: &StateVector) -> Self {
        Self {
            stage: stage.to_owned(),
            amplitudes: s
                .live()
                .map(|(l, a)| AmplitudeRecord {
                    label: l.to_string(),
                    amplitude: *a,
                })
                .collect(),
            lost: s.sink_norm_sqr(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkRecord {
    pub sink: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterportRecord {
    pub config: ProtocolConfig,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub stages: Vec<StageRecord>,
    /// Final loss split by sink; sums to `p_lost`.
    pub losses: Vec<SinkRecord>,
    pub p_port1: f64,
    pub p_port2: f64,
    pub p_lost: f64,
    pub fidelity: f64,
    pub fidelity_postselected: f64,
    pub polarization_purity: f64,
}

impl CounterportRecord {
    pub fn new(config: &ProtocolConfig, bob: &BobQubit, r: &CounterportResult) -> Self {
        Self {
            config: config.clone(),
            alpha: bob.alpha,
            beta: bob.beta,
            stages: r.dumps.iter().map(|d| StageRecord::new(d.stage, &d.state)).collect(),
            losses: Sink::ALL
                .iter()
                .map(|&s| SinkRecord {
                    sink: s.name().to_owned(),
                    probability: r.joint.sink_probability(s),
                })
                .collect(),
            p_port1: r.p_port1,
            p_port2: r.p_port2,
            p_lost: r.p_lost,
            fidelity: r.fidelity,
            fidelity_postselected: r.fidelity_postselected,
            polarization_purity: r.polarization_purity(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub first: String,
    pub second: String,
    pub overlap: Complex64,
}

/// `probability` is present only for consistent families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryRecord {
    pub history: String,
    pub weight: f64,
    pub probability: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyRecord {
    pub name: String,
    pub consistent: bool,
    /// Off-diagonal overlaps above tolerance, largest first.
    pub offending: Vec<PairRecord>,
    pub histories: Vec<HistoryRecord>,
}

impl FamilyRecord {
    pub fn evaluate(f: &Family, c: &CircuitSchedule) -> counterport_core::Result<Self> {
        let report = is_consistent(f, c)?;
        let probabilities = if report.consistent {
            Some(history_probabilities(f, c)?)
        } else {
            None
        };
        let mut offending: Vec<PairRecord> = report
            .all_offending
            .iter()
            .map(|p| PairRecord {
                first: f.describe(&p.first),
                second: f.describe(&p.second),
                overlap: p.overlap,
            })
            .collect();
        offending.sort_by(|a, b| b.overlap.norm().total_cmp(&a.overlap.norm()));
        let histories = f
            .histories()
            .into_iter()
            .map(|h| {
                let weight = chain_ket(&h, f, c)?.weight();
                let probability = probabilities
                    .as_ref()
                    .and_then(|ps| ps.iter().find(|(g, _)| *g == h).map(|(_, p)| *p));
                Ok(HistoryRecord {
                    history: f.describe(&h),
                    weight,
                    probability,
                })
            })
            .collect::<counterport_core::Result<_>>()?;
        Ok(Self {
            name: f.name.clone(),
            consistent: report.consistent,
            offending,
            histories,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoriesReport {
    pub m: usize,
    pub n: usize,
    pub families: Vec<FamilyRecord>,
}
