//! Consistent histories over a circuit schedule.
//!
//! A family fixes a pre-selected basis state, a post-selection projector and, at each
//! of a list of intermediate time-stamps, a set of mutually orthogonal projectors. Its
//! histories are the cartesian product of those sets. The chain-ket of a history is
//! `P_post · T · Π_k · T ⋯ Π_1 · T |pre⟩`, with `T` the evolution between stamps.
//!
//! Families serialize to JSON:
//!
//! ```json
//! {"name": "...", "pre": {"time": "t0", "label": {...}},
//!  "slots": [{"time": "t1", "options": [{"name": "A", "projector": {"paths": [...]}}]}],
//!  "post": {"time": "t4", "projector": {...}}}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{Boundary, CircuitSchedule, PostBoundary, TimeLabel};
use crate::qstate::{inner, Arm, BasisLabel, Bob, Pol, Projector, StateVector, C64};

/// Chain-kets overlapping by more than this break consistency.
pub const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedProjector {
    pub name: String,
    pub projector: Projector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub time: TimeLabel,
    pub options: Vec<NamedProjector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Family {
    pub name: String,
    pub pre: Boundary,
    pub slots: Vec<Slot>,
    pub post: PostBoundary,
}

/// One choice of projector per slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct History(pub Vec<usize>);

/// Disjoint on at least one tensor factor.
fn orthogonal(a: &Projector, b: &Projector) -> bool {
    fn disjoint<T: Ord>(x: &Option<std::collections::BTreeSet<T>>, y: &Option<std::collections::BTreeSet<T>>) -> bool {
        match (x, y) {
            (Some(x), Some(y)) => x.is_disjoint(y),
            _ => false,
        }
    }
    disjoint(&a.paths, &b.paths) || disjoint(&a.pols, &b.pols) || disjoint(&a.bobs, &b.bobs)
}

impl Family {
    /// Validates structure: at least one slot, no empty slot, orthogonal options.
    pub fn new(name: impl Into<String>, pre: Boundary, slots: Vec<Slot>, post: PostBoundary) -> Result<Self> {
        let f = Family {
            name: name.into(),
            pre,
            slots,
            post,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::EmptyFamily(format!("family `{}` has no intermediate times", self.name)));
        }
        for s in &self.slots {
            if s.options.is_empty() {
                return Err(Error::EmptyFamily(format!(
                    "family `{}` offers no projector at `{}`",
                    self.name, s.time
                )));
            }
            for (i, a) in s.options.iter().enumerate() {
                for b in &s.options[i + 1..] {
                    if !orthogonal(&a.projector, &b.projector) {
                        return Err(Error::InvalidParameter(format!(
                            "projectors {} and {} at `{}` are not orthogonal",
                            a.name, b.name, s.time
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that the times exist in `c` and increase strictly from pre to post.
    pub fn check_times(&self, c: &CircuitSchedule) -> Result<Vec<usize>> {
        let mut idx = vec![c.index_of(&self.pre.time)?];
        for s in &self.slots {
            idx.push(c.index_of(&s.time)?);
        }
        idx.push(c.index_of(&self.post.time)?);
        for w in idx.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::TimeOrder {
                    earlier: c.steps()[w[0]].time.0.clone(),
                    later: c.steps()[w[1]].time.0.clone(),
                });
            }
        }
        Ok(idx)
    }

    /// All histories, first slot varying slowest.
    pub fn histories(&self) -> Vec<History> {
        let mut out = vec![History(Vec::new())];
        for s in &self.slots {
            out = out
                .into_iter()
                .flat_map(|h| {
                    (0..s.options.len()).map(move |i| {
                        let mut v = h.0.clone();
                        v.push(i);
                        History(v)
                    })
                })
                .collect();
        }
        out
    }

    /// Finds the history whose projector names match `names` slot by slot.
    pub fn history_named(&self, names: &[&str]) -> Option<History> {
        if names.len() != self.slots.len() {
            return None;
        }
        self.slots
            .iter()
            .zip(names)
            .map(|(s, n)| s.options.iter().position(|o| o.name == *n))
            .collect::<Option<Vec<_>>>()
            .map(History)
    }

    /// Readable label such as `(D1, C2, B3)`.
    pub fn describe(&self, h: &History) -> String {
        let parts: Vec<String> = self
            .slots
            .iter()
            .zip(&h.0)
            .map(|(s, &i)| format!("{}{}", s.options[i].name, s.time.as_str().trim_start_matches('t')))
            .collect();
        format!("({})", parts.join(", "))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("families serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Family = serde_json::from_str(text).map_err(|e| Error::Parse(format!("family: {e}")))?;
        f.validate()?;
        Ok(f)
    }
}

/// Unnormalized chain-ket; its squared norm is the history's weight.
#[derive(Clone, Debug)]
pub struct ChainKet(pub StateVector);

impl ChainKet {
    pub fn weight(&self) -> f64 {
        self.0.norm_sqr()
    }
}

pub fn chain_ket(h: &History, f: &Family, c: &CircuitSchedule) -> Result<ChainKet> {
    if h.0.len() != f.slots.len() || h.0.iter().zip(&f.slots).any(|(&i, s)| i >= s.options.len()) {
        return Err(Error::InvalidParameter(format!("history {:?} is not in family `{}`", h.0, f.name)));
    }
    let idx = f.check_times(c)?;
    let mut s = StateVector::basis(f.pre.label);
    for (k, (slot, &choice)) in f.slots.iter().zip(&h.0).enumerate() {
        s = c.evolve_between(s, idx[k], idx[k + 1], false)?;
        s = slot.options[choice].projector.apply(&s).live_part();
    }
    s = c.evolve_between(s, idx[idx.len() - 2], idx[idx.len() - 1], false)?;
    Ok(ChainKet(f.post.projector.apply(&s).live_part()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffendingPair {
    pub first: History,
    pub second: History,
    pub overlap: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    /// Largest off-diagonal overlap, if above tolerance.
    pub offending: Option<OffendingPair>,
    /// Every pair above tolerance.
    pub all_offending: Vec<OffendingPair>,
}

fn all_chain_kets(f: &Family, c: &CircuitSchedule) -> Result<Vec<(History, ChainKet)>> {
    f.histories()
        .into_iter()
        .map(|h| chain_ket(&h, f, c).map(|k| (h, k)))
        .collect()
}

pub fn is_consistent(f: &Family, c: &CircuitSchedule) -> Result<ConsistencyReport> {
    let kets = all_chain_kets(f, c)?;
    let mut all = Vec::new();
    for i in 0..kets.len() {
        for j in i + 1..kets.len() {
            let o = inner(&kets[i].1 .0, &kets[j].1 .0);
            if o.norm() >= CONSISTENCY_TOL {
                all.push(OffendingPair {
                    first: kets[i].0.clone(),
                    second: kets[j].0.clone(),
                    overlap: o,
                });
            }
        }
    }
    let offending = all
        .iter()
        .max_by(|a, b| a.overlap.norm().total_cmp(&b.overlap.norm()))
        .cloned();
    Ok(ConsistencyReport {
        consistent: all.is_empty(),
        offending,
        all_offending: all,
    })
}

/// `‖chain-ket‖²` normalized over the family. Only meaningful for consistent families.
pub fn history_probability(h: &History, f: &Family, c: &CircuitSchedule) -> Result<f64> {
    Ok(history_probabilities(f, c)?
        .into_iter()
        .find(|(x, _)| x == h)
        .map(|(_, p)| p)
        .unwrap_or(0.0))
}

/// Probabilities of every history; errors on inconsistent families.
pub fn history_probabilities(f: &Family, c: &CircuitSchedule) -> Result<Vec<(History, f64)>> {
    let report = is_consistent(f, c)?;
    if let Some(o) = report.offending {
        return Err(Error::InconsistentFamily(format!(
            "family `{}`: chain-kets {} and {} overlap by {:.3e}",
            f.name,
            f.describe(&o.first),
            f.describe(&o.second),
            o.overlap.norm()
        )));
    }
    let kets = all_chain_kets(f, c)?;
    let total: f64 = kets.iter().map(|(_, k)| k.weight()).sum();
    if total == 0.0 {
        return Err(Error::OrthogonalBoundaries(format!("family `{}` has zero total weight", f.name)));
    }
    Ok(kets.into_iter().map(|(h, k)| (h, k.weight() / total)).collect())
}

/// The four families of the nested-interferometer analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinFamily {
    /// First outer cycle, per-cycle boundaries (`S⊗H` at `t0` and at its end).
    FirstCycle = 7,
    /// Second outer cycle, per-cycle boundaries.
    SecondCycle = 8,
    /// Source to detector D0, asking about the second outer cycle.
    EndToEndSecond = 9,
    /// Source to detector D0, asking about the first outer cycle.
    EndToEndFirst = 10,
}

impl BuiltinFamily {
    pub const ALL: [BuiltinFamily; 4] = [
        BuiltinFamily::FirstCycle,
        BuiltinFamily::SecondCycle,
        BuiltinFamily::EndToEndSecond,
        BuiltinFamily::EndToEndFirst,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.number() == n)
    }

    /// The family on a nested circuit with `inner` inner cycles per outer cycle:
    /// `{A, D}` after the outer splitter, `{A, B, C}` at each inner-cycle stamp.
    pub fn build(self, c: &CircuitSchedule, inner: usize) -> Result<Family> {
        let outer = match self {
            BuiltinFamily::FirstCycle | BuiltinFamily::EndToEndFirst => 0,
            BuiltinFamily::SecondCycle | BuiltinFamily::EndToEndSecond => 1,
        };
        let bob = c.bobs().first().copied().unwrap_or(Bob::Absent);
        let sh = BasisLabel::new(Arm::S, Pol::H, bob);
        let option = |a: Arm| NamedProjector {
            name: a.name().into(),
            projector: Projector::arm(a),
        };
        let mut slots = vec![Slot {
            time: TimeLabel::cycle(outer, 1),
            options: vec![option(Arm::A), option(Arm::D)],
        }];
        for j in 0..inner {
            slots.push(Slot {
                time: TimeLabel::cycle(outer, 2 + j),
                options: vec![option(Arm::A), option(Arm::B), option(Arm::C)],
            });
        }
        let (pre_time, post) = match self {
            BuiltinFamily::FirstCycle | BuiltinFamily::SecondCycle => (
                TimeLabel::cycle(outer, 0),
                PostBoundary {
                    time: TimeLabel::cycle(outer, 2 + inner),
                    projector: Projector::arm_pol(Arm::S, Pol::H),
                },
            ),
            BuiltinFamily::EndToEndFirst | BuiltinFamily::EndToEndSecond => (
                TimeLabel::cycle(0, 0),
                c.post()
                    .cloned()
                    .ok_or_else(|| Error::InvalidParameter(format!("schedule `{}` has no post-selection", c.name())))?,
            ),
        };
        let f = Family::new(
            format!("family ({})", self.number()),
            Boundary {
                time: pre_time,
                label: sh,
            },
            slots,
            post,
        )?;
        f.check_times(c)?;
        Ok(f)
    }
}
