//! Optical elements and time-stamped circuit schedules.
//!
//! Switchable mirrors are compiled away: a schedule is fully unrolled, so every
//! on/off state of a switchable mirror becomes plain routing between arms. The
//! Michelson geometry is simulated in its unfolded Mach-Zehnder form.
//!
//! # Record format
//!
//! [`CircuitSchedule::to_records`] writes JSON lines. The first line is the header:
//!
//! ```text
//! {"schedule":"paradox M=2 N=2","arms":["S","A",...],"bobs":["Absent"],"pre":{...},"post":{...}}
//! ```
//!
//! followed by one record per time-stamp, in order:
//!
//! ```text
//! {"time":"t1","elements":[{"kind":"hwp","arm":"S","axis":0.39269908169872414},{"kind":"pbs","input":"S","r_out":"A","l_out":"D"}]}
//! ```
//!
//! `elements` are the elements applied between the previous time-stamp and this one.
//! Field names are stable; [`CircuitSchedule::from_records`] parses the same text.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{
    product_basis, Arm, BasisLabel, Bob, LinearMap, Path, Pol, Projector, Sink, StateVector, C64,
    ONE, PRUNE_THRESHOLD, ZERO,
};
use crate::CONSERVATION_TOL;

/// Fixed single-qubit gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Hadamard,
    X,
    Z,
}

impl Gate {
    /// Column `i` of the gate matrix in the `{0, 1}` basis.
    fn column(self, i: usize) -> [C64; 2] {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match (self, i) {
            (Gate::Hadamard, 0) => [h, h],
            (Gate::Hadamard, _) => [h, -h],
            (Gate::X, 0) => [ZERO, ONE],
            (Gate::X, _) => [ONE, ZERO],
            (Gate::Z, 0) => [ONE, ZERO],
            (Gate::Z, _) => [ZERO, -ONE],
        }
    }
}

/// When Bob's blocking mode-mismatch error acts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockScope {
    /// On every blocking event (once per inner cycle).
    #[default]
    PerInnerCycle,
    /// Only on the first inner cycle of each outer cycle.
    PerOuterCycle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Element {
    /// Half-wave plate with fast axis at `axis`; rotates the polarization by `2·axis`
    /// in the `{H, V}` plane (`H → cos 2a H + sin 2a V`).
    Hwp { arm: Arm, axis: f64 },
    /// Switchable polarization rotator: `R → cos θ R + sin θ L`, `L → cos θ L − sin θ R`.
    Spr { arm: Arm, angle: f64 },
    /// Polarizing beam splitter: `R` on `input` goes to `r_out`, `L` to `l_out`.
    /// Acts as the matching swap on the output arms, so it is its own inverse.
    Pbs { input: Arm, r_out: Arm, l_out: Arm },
    /// Recombining PBS: `R` from `r_in` and `L` from `l_in` leave on `out`; the
    /// wrong-polarization components go to `exhaust`.
    Merge {
        r_in: Arm,
        l_in: Arm,
        out: Arm,
        exhaust: Sink,
    },
    /// 50:50 beam splitter: `a → (sum + diff)/√2`, `b → (sum − diff)/√2`.
    Bs50 {
        a_in: Arm,
        b_in: Arm,
        sum_out: Arm,
        diff_out: Arm,
    },
    /// Pockels cell flipping `R ↔ L`.
    PockelsFlip { arm: Arm },
    PolGate { arm: Arm, gate: Gate },
    BobGate { gate: Gate },
    /// Routes `from` to `to` (and back).
    Mirror { from: Arm, to: Arm },
    /// Bob's end of the channel. `|0⟩` reflects with amplitude `√(1−eps_reflect)` (the
    /// rest is lost to DB); `|1⟩` blocks, except for an erroneous reflection of
    /// amplitude `√eps_block`. Without a control qubit the channel end is a mirror.
    Channel {
        arm: Arm,
        eps_reflect: f64,
        eps_block: f64,
    },
    /// Absorbs everything on `arm`.
    Block { arm: Arm, sink: Sink },
}

impl Element {
    pub fn arms(&self) -> Vec<Arm> {
        match *self {
            Element::Hwp { arm, .. }
            | Element::Spr { arm, .. }
            | Element::PockelsFlip { arm }
            | Element::PolGate { arm, .. }
            | Element::Channel { arm, .. }
            | Element::Block { arm, .. } => vec![arm],
            Element::Pbs {
                input,
                r_out,
                l_out,
            } => vec![input, r_out, l_out],
            Element::Merge { r_in, l_in, out, .. } => vec![r_in, l_in, out],
            Element::Bs50 {
                a_in,
                b_in,
                sum_out,
                diff_out,
            } => vec![a_in, b_in, sum_out, diff_out],
            Element::Mirror { from, to } => vec![from, to],
            Element::BobGate { .. } => vec![],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Element::Hwp { .. } => "hwp",
            Element::Spr { .. } => "spr",
            Element::Pbs { .. } => "pbs",
            Element::Merge { .. } => "merge",
            Element::Bs50 { .. } => "bs50",
            Element::PockelsFlip { .. } => "pockels_flip",
            Element::PolGate { .. } => "pol_gate",
            Element::BobGate { .. } => "bob_gate",
            Element::Mirror { .. } => "mirror",
            Element::Channel { .. } => "channel",
            Element::Block { .. } => "block",
        }
    }

    /// The element's linear map on `domain` (identity away from its arms).
    pub fn to_map(&self, domain: &[BasisLabel]) -> Result<LinearMap> {
        let on = |l: &BasisLabel, a: Arm| l.path == Path::Arm(a);
        match *self {
            Element::Hwp { arm, axis } => rotation_map(domain, arm, 2.0 * axis),
            Element::Spr { arm, angle } => rotation_map(domain, arm, angle),
            Element::Pbs {
                input,
                r_out,
                l_out,
            } => LinearMap::local(domain, |l| {
                let to = match l.pol {
                    Pol::R => r_out,
                    Pol::L => l_out,
                };
                if on(l, input) {
                    Some(vec![(l.with_path(to), ONE)])
                } else if on(l, to) {
                    Some(vec![(l.with_path(input), ONE)])
                } else {
                    None
                }
            }),
            Element::Merge {
                r_in,
                l_in,
                out,
                exhaust,
            } => LinearMap::local(domain, |l| {
                let matched = match l.pol {
                    Pol::R => r_in,
                    Pol::L => l_in,
                };
                if on(l, matched) {
                    Some(vec![(l.with_path(out), ONE)])
                } else if on(l, out) {
                    Some(vec![(l.with_path(matched), ONE)])
                } else if on(l, r_in) || on(l, l_in) {
                    Some(vec![(l.with_path(exhaust), ONE)])
                } else {
                    None
                }
            }),
            Element::Bs50 {
                a_in,
                b_in,
                sum_out,
                diff_out,
            } => {
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                LinearMap::local(domain, |l| {
                    if on(l, a_in) {
                        Some(vec![(l.with_path(sum_out), h), (l.with_path(diff_out), h)])
                    } else if on(l, b_in) {
                        Some(vec![(l.with_path(sum_out), h), (l.with_path(diff_out), -h)])
                    } else if on(l, sum_out) {
                        Some(vec![(l.with_path(a_in), h), (l.with_path(b_in), h)])
                    } else if on(l, diff_out) {
                        Some(vec![(l.with_path(a_in), h), (l.with_path(b_in), -h)])
                    } else {
                        None
                    }
                })
            }
            Element::PockelsFlip { arm } => pol_gate_map(domain, arm, Gate::X),
            Element::PolGate { arm, gate } => pol_gate_map(domain, arm, gate),
            Element::BobGate { gate } => LinearMap::local(domain, |l| {
                let i = match l.bob {
                    Bob::Absent => return None,
                    Bob::Zero => 0,
                    Bob::One => 1,
                };
                let col = gate.column(i);
                Some(vec![
                    (l.with_bob(Bob::Zero), col[0]),
                    (l.with_bob(Bob::One), col[1]),
                ])
            }),
            Element::Mirror { from, to } => LinearMap::local(domain, |l| {
                if on(l, from) {
                    Some(vec![(l.with_path(to), ONE)])
                } else if on(l, to) {
                    Some(vec![(l.with_path(from), ONE)])
                } else {
                    None
                }
            }),
            Element::Channel {
                arm,
                eps_reflect,
                eps_block,
            } => {
                check_unit("eps_reflect", eps_reflect)?;
                check_unit("eps_block", eps_block)?;
                let (keep_r, lose_r) = unit_pair((1.0 - eps_reflect).sqrt(), eps_reflect.sqrt());
                let (leak_b, absorb_b) = unit_pair(eps_block.sqrt(), (1.0 - eps_block).sqrt());
                LinearMap::local(domain, |l| {
                    if !on(l, arm) {
                        return None;
                    }
                    match l.bob {
                        Bob::Absent => None,
                        Bob::Zero => Some(vec![
                            (*l, C64::new(keep_r, 0.0)),
                            (l.with_path(Sink::Db), C64::new(lose_r, 0.0)),
                        ]),
                        Bob::One => Some(vec![
                            (*l, C64::new(leak_b, 0.0)),
                            (l.with_path(Sink::Block), C64::new(absorb_b, 0.0)),
                        ]),
                    }
                })
            }
            Element::Block { arm, sink } => LinearMap::local(domain, |l| {
                on(l, arm).then(|| vec![(l.with_path(sink), ONE)])
            }),
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} is outside [0, 1]")))
    }
}

/// Nudges `(c, s)` by a few ulps to the float pair closest to `c² + s² = 1`, so that
/// maps applied ~10⁵ times do not drift the norm systematically.
pub(crate) fn unit_pair(c: f64, s: f64) -> (f64, f64) {
    fn step(x: f64, k: i64) -> f64 {
        if x == 0.0 {
            return x;
        }
        let m = f64::from_bits((x.abs().to_bits() as i64 + k) as u64);
        m.copysign(x)
    }
    let defect = |c: f64, s: f64| s.mul_add(s, c.mul_add(c, -1.0)).abs();
    let mut best = (c, s);
    for i in -4..=4 {
        for j in -4..=4 {
            let cand = (step(c, i), step(s, j));
            if defect(cand.0, cand.1) < defect(best.0, best.1) {
                best = cand;
            }
        }
    }
    best
}

fn rotation_map(domain: &[BasisLabel], arm: Arm, theta: f64) -> Result<LinearMap> {
    let (s, c) = theta.sin_cos();
    let (c, s) = unit_pair(c, s);
    let (s, c) = (C64::new(s, 0.0), C64::new(c, 0.0));
    LinearMap::local(domain, |l| {
        if l.path != Path::Arm(arm) {
            return None;
        }
        Some(match l.pol {
            Pol::R => vec![(*l, c), (l.with_pol(Pol::L), s)],
            Pol::L => vec![(*l, c), (l.with_pol(Pol::R), -s)],
        })
    })
}

fn pol_gate_map(domain: &[BasisLabel], arm: Arm, gate: Gate) -> Result<LinearMap> {
    LinearMap::local(domain, |l| {
        if l.path != Path::Arm(arm) {
            return None;
        }
        let col = gate.column(l.pol.index());
        Some(vec![(l.with_pol(Pol::R), col[0]), (l.with_pol(Pol::L), col[1])])
    })
}

/// Switchable polarization rotator by `theta`.
pub fn spr(arm: Arm, theta: f64) -> Element {
    Element::Spr { arm, angle: theta }
}

/// Half-wave plate with fast axis at `axis`.
pub fn hwp(arm: Arm, axis: f64) -> Element {
    Element::Hwp { arm, axis }
}

/// Named instant in a schedule, e.g. `t2`, `t'2` or `t_final`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeLabel(pub String);

impl TimeLabel {
    pub fn new(s: impl Into<String>) -> Self {
        TimeLabel(s.into())
    }

    /// `t{primes}{index}` for outer cycles 0 to 2 (`t2`, `t'2`, `t''2`), then
    /// `t{outer}.{index}`.
    pub fn cycle(outer: usize, index: usize) -> Self {
        if outer < 3 {
            TimeLabel(format!("t{}{}", "'".repeat(outer), index))
        } else {
            TimeLabel(format!("t{outer}.{index}"))
        }
    }

    pub fn final_() -> Self {
        TimeLabel("t_final".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TimeLabel {
    fn from(s: &str) -> Self {
        TimeLabel(s.into())
    }
}

/// Elements applied since the previous time-stamp, then the time-stamp itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub time: TimeLabel,
    pub elements: Vec<Element>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    schedule: String,
    arms: Vec<Arm>,
    bobs: Vec<Bob>,
    #[serde(default)]
    pre: Option<Boundary>,
    #[serde(default)]
    post: Option<PostBoundary>,
}

/// Declared pre-selection: a basis state at a time-stamp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub time: TimeLabel,
    pub label: BasisLabel,
}

/// Declared post-selection projector at a time-stamp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostBoundary {
    pub time: TimeLabel,
    pub projector: Projector,
}

/// An unrolled, time-stamped circuit with its element maps compiled.
#[derive(Clone, Debug)]
pub struct CircuitSchedule {
    name: String,
    arms: Vec<Arm>,
    bobs: Vec<Bob>,
    steps: Vec<Step>,
    pre: Option<Boundary>,
    post: Option<PostBoundary>,
    basis: Vec<BasisLabel>,
    maps: Vec<LinearMap>,
    ops: Vec<Vec<usize>>,
    index: HashMap<TimeLabel, usize>,
}

/// The state at every time-stamp of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<(TimeLabel, StateVector)>,
}

impl Trajectory {
    pub fn at(&self, t: &TimeLabel) -> Option<&StateVector> {
        self.records.iter().find(|(l, _)| l == t).map(|(_, s)| s)
    }

    pub fn last(&self) -> &StateVector {
        &self.records.last().expect("trajectory is never empty").1
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Allowed conservation defect after `stamps` time-stamps: [`CONSERVATION_TOL`], or
/// `ε/4` per stamp once that is larger (beyond ~18k stamps), which absorbs the
/// rounding bias of very long runs.
pub fn conservation_bound(stamps: usize) -> f64 {
    CONSERVATION_TOL.max(stamps as f64 * f64::EPSILON / 4.0)
}

impl CircuitSchedule {
    /// Validates and compiles a schedule. The first step's elements act before the
    /// first time-stamp is recorded; builders leave it empty.
    pub fn new(
        name: impl Into<String>,
        arms: Vec<Arm>,
        bobs: Vec<Bob>,
        steps: Vec<Step>,
        pre: Option<Boundary>,
        post: Option<PostBoundary>,
    ) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidParameter("a schedule needs at least one time-stamp".into()));
        }
        let basis = product_basis(&arms, &bobs);
        let mut index = HashMap::new();
        for (i, s) in steps.iter().enumerate() {
            if index.insert(s.time.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate time-stamp `{}`", s.time)));
            }
        }
        let mut cache: HashMap<String, usize> = HashMap::new();
        let mut maps = Vec::new();
        let mut ops = Vec::with_capacity(steps.len());
        for s in &steps {
            let mut step_ops = Vec::with_capacity(s.elements.len());
            for e in &s.elements {
                if let Some(a) = e.arms().into_iter().find(|a| !arms.contains(a)) {
                    return Err(Error::InvalidParameter(format!(
                        "element {} at `{}` references arm {} outside the basis",
                        e.kind_name(),
                        s.time,
                        a.name()
                    )));
                }
                let key = serde_json::to_string(e).expect("elements serialize");
                let id = match cache.get(&key) {
                    Some(&id) => id,
                    None => {
                        maps.push(e.to_map(&basis)?);
                        cache.insert(key, maps.len() - 1);
                        maps.len() - 1
                    }
                };
                step_ops.push(id);
            }
            ops.push(step_ops);
        }
        let sched = CircuitSchedule {
            name: name.into(),
            arms,
            bobs,
            steps,
            pre,
            post,
            basis,
            maps,
            ops,
            index,
        };
        if let Some(p) = &sched.pre {
            sched.index_of(&p.time)?;
            sched.check_support(&StateVector::basis(p.label))?;
        }
        if let Some(p) = &sched.post {
            sched.index_of(&p.time)?;
        }
        Ok(sched)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn bobs(&self) -> &[Bob] {
        &self.bobs
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn pre(&self) -> Option<&Boundary> {
        self.pre.as_ref()
    }

    pub fn post(&self) -> Option<&PostBoundary> {
        self.post.as_ref()
    }

    pub fn times(&self) -> impl Iterator<Item = &TimeLabel> {
        self.steps.iter().map(|s| &s.time)
    }

    pub fn index_of(&self, t: &TimeLabel) -> Result<usize> {
        self.index
            .get(t)
            .copied()
            .ok_or_else(|| Error::UnknownTime(t.0.clone()))
    }

    /// Number of element maps after deduplication.
    pub fn distinct_maps(&self) -> usize {
        self.maps.len()
    }

    fn check_support(&self, s: &StateVector) -> Result<()> {
        for (l, _) in s.live() {
            if !self.basis.contains(l) {
                return Err(Error::LabelMismatch(*l));
            }
        }
        Ok(())
    }

    /// Applies the elements of step `i`.
    fn apply_step(&self, i: usize, mut s: StateVector) -> Result<StateVector> {
        for &m in &self.ops[i] {
            s = self.maps[m].apply_owned(s)?;
        }
        Ok(s)
    }

    /// Adjoint of step `i` on a backward (live-only) state.
    fn apply_step_adjoint(&self, i: usize, mut s: StateVector) -> Result<StateVector> {
        for &m in self.ops[i].iter().rev() {
            s = self.maps[m].apply_adjoint(&s)?;
        }
        Ok(s)
    }

    fn conservation(&self, i: usize, s: &StateVector, reference: f64) -> Result<()> {
        let total = s.norm_sqr();
        let deviation = (total - reference).abs();
        if deviation > conservation_bound(i) * reference.max(1.0) {
            return Err(Error::ConservationBreach {
                time: self.steps[i].time.0.clone(),
                total,
                deviation,
            });
        }
        Ok(())
    }

    /// Evolves `s`, given at time-stamp index `from`, forward to index `to`. Checks
    /// probability conservation at every time-stamp. With `prune`, live amplitudes
    /// below [`PRUNE_THRESHOLD`] are dropped after each step.
    pub fn evolve_between(&self, mut s: StateVector, from: usize, to: usize, prune: bool) -> Result<StateVector> {
        if to < from {
            return Err(Error::TimeOrder {
                earlier: self.steps[from].time.0.clone(),
                later: self.steps[to].time.0.clone(),
            });
        }
        self.check_support(&s)?;
        let reference = s.norm_sqr();
        let mut pruned = 0.0;
        for i in from + 1..=to {
            s = self.apply_step(i, s)?;
            if prune {
                pruned += s.prune(PRUNE_THRESHOLD);
            }
            self.conservation(i, &s, reference - pruned)?;
        }
        Ok(s)
    }

    /// Adjoint evolution of a backward state from index `from` back to index `to`.
    pub fn evolve_back_between(&self, s: &StateVector, from: usize, to: usize) -> Result<StateVector> {
        if to > from {
            return Err(Error::TimeOrder {
                earlier: self.steps[to].time.0.clone(),
                later: self.steps[from].time.0.clone(),
            });
        }
        let mut s = s.live_part();
        self.check_support(&s)?;
        for i in (to + 1..=from).rev() {
            s = self.apply_step_adjoint(i, s)?;
        }
        Ok(s)
    }

    /// Forward evolution between two named time-stamps.
    pub fn evolve_from_to(&self, s: StateVector, from: &TimeLabel, to: &TimeLabel) -> Result<StateVector> {
        let (a, b) = (self.index_of(from)?, self.index_of(to)?);
        self.evolve_between(s, a, b, false)
    }

    /// Runs the whole schedule, recording the state at every time-stamp. The input is
    /// taken to be the state at the first time-stamp.
    pub fn run(&self, input: &StateVector) -> Result<Trajectory> {
        self.check_support(input)?;
        let reference = input.norm_sqr();
        let mut s = self.apply_step(0, input.clone())?;
        self.conservation(0, &s, reference)?;
        let mut records = Vec::with_capacity(self.steps.len());
        records.push((self.steps[0].time.clone(), s.clone()));
        for i in 1..self.steps.len() {
            s = self.apply_step(i, s)?;
            self.conservation(i, &s, reference)?;
            records.push((self.steps[i].time.clone(), s.clone()));
        }
        Ok(Trajectory { records })
    }

    /// Runs the whole schedule keeping only the final state.
    pub fn evolve(&self, input: &StateVector, prune: bool) -> Result<StateVector> {
        let reference = input.norm_sqr();
        let s = self.apply_step(0, input.clone())?;
        self.conservation(0, &s, reference)?;
        self.evolve_between(s, 0, self.steps.len() - 1, prune)
    }

    /// Product of all step maps restricted to live labels, checked for isometry with
    /// sinks included: every basis column is evolved and the Gram matrix compared to
    /// the identity. Returns the largest deviation.
    pub fn isometry_deviation(&self) -> Result<f64> {
        let outs: Vec<StateVector> = self
            .basis
            .iter()
            .map(|l| self.evolve(&StateVector::basis(*l), false))
            .collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for i in 0..outs.len() {
            for j in i..outs.len() {
                let d = crate::qstate::inner(&outs[i], &outs[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - C64::new(target, 0.0)).norm());
            }
        }
        Ok(worst)
    }

    /// JSON-lines serialization (see the module docs).
    pub fn to_records(&self) -> String {
        let header = Header {
            schedule: self.name.clone(),
            arms: self.arms.clone(),
            bobs: self.bobs.clone(),
            pre: self.pre.clone(),
            post: self.post.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("step serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_records(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Header = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| Error::Parse("empty schedule".into()))?,
        )
        .map_err(|e| Error::Parse(format!("header: {e}")))?;
        let steps = lines
            .enumerate()
            .map(|(i, l)| serde_json::from_str::<Step>(l).map_err(|e| Error::Parse(format!("record {}: {e}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        CircuitSchedule::new(header.schedule, header.arms, header.bobs, steps, header.pre, header.post)
    }
}

/// Which rotator marks the outer and inner loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlateStyle {
    /// Half-wave plates (nested-interferometer drawing).
    HalfWave,
    /// Switchable polarization rotators (gate module).
    Switchable,
}

/// Parameters of the nested outer/inner interferometer layout.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedLayout {
    pub outer: usize,
    pub inner: usize,
    /// Number of channel-block-plus-`inner`-cycles suppression rounds per outer cycle.
    pub av_rounds: usize,
    pub bobs: Vec<Bob>,
    pub eps_reflect: f64,
    pub eps_block: f64,
    pub block_scope: BlockScope,
    pub plates: PlateStyle,
    /// Route `S → F` after the last outer cycle and stamp `t_final`.
    pub final_arm: bool,
}

impl NestedLayout {
    pub fn inner_cycles_per_outer(&self) -> usize {
        self.inner * (1 + self.av_rounds)
    }
}

fn plate(style: PlateStyle, arm: Arm, theta: f64) -> Element {
    match style {
        PlateStyle::HalfWave => hwp(arm, theta / 2.0),
        PlateStyle::Switchable => spr(arm, theta),
    }
}

/// Builds the unrolled nested-interferometer schedule.
///
/// Outer cycle `k` (primes = `k`) is stamped `t0` (photon on S), `t1` (after the outer
/// rotator and PBS: arms A and D), `t2 … t{1+n}` (inside inner cycle `1 … n`, after
/// the inner rotator and PBS: arms A, B, C) and `t{2+n}` (back on S, exhaust in DA),
/// with `n` the inner cycles per outer cycle. With `av_rounds > 0`, Alice blocks the
/// channel entrance right after the rotator of inner cycles `N, 2N, …`.
pub fn build_nested(layout: &NestedLayout, name: impl Into<String>) -> Result<CircuitSchedule> {
    if layout.outer < 1 || layout.inner < 1 {
        return Err(Error::InvalidParameter(format!(
            "need M >= 1 and N >= 1 (got M = {}, N = {})",
            layout.outer, layout.inner
        )));
    }
    let theta_outer = PI / (2.0 * layout.outer as f64);
    let theta_inner = PI / (2.0 * layout.inner as f64);
    let cycles = layout.inner_cycles_per_outer();
    let mut arms = vec![Arm::S, Arm::A, Arm::B, Arm::C, Arm::D];
    if layout.final_arm {
        arms.push(Arm::F);
    }
    let channel = |first: bool| Element::Channel {
        arm: Arm::C,
        eps_reflect: layout.eps_reflect,
        eps_block: match layout.block_scope {
            BlockScope::PerInnerCycle => layout.eps_block,
            BlockScope::PerOuterCycle if first => layout.eps_block,
            BlockScope::PerOuterCycle => 0.0,
        },
    };
    let inner_merge = Element::Merge {
        r_in: Arm::C,
        l_in: Arm::B,
        out: Arm::D,
        exhaust: Sink::Stray,
    };
    let mut steps = Vec::with_capacity(layout.outer * (cycles + 3) + 1);
    for k in 0..layout.outer {
        steps.push(Step {
            time: TimeLabel::cycle(k, 0),
            elements: vec![],
        });
        steps.push(Step {
            time: TimeLabel::cycle(k, 1),
            elements: vec![
                plate(layout.plates, Arm::S, theta_outer),
                Element::Pbs {
                    input: Arm::S,
                    r_out: Arm::A,
                    l_out: Arm::D,
                },
            ],
        });
        let mut pending: Vec<Element> = Vec::new();
        for j in 0..cycles {
            let mut elements = std::mem::take(&mut pending);
            elements.push(plate(layout.plates, Arm::D, theta_inner));
            elements.push(Element::Pbs {
                input: Arm::D,
                r_out: Arm::C,
                l_out: Arm::B,
            });
            let av_block = (j + 1) % layout.inner == 0 && (j + 1) / layout.inner <= layout.av_rounds;
            if av_block {
                elements.push(Element::Block {
                    arm: Arm::C,
                    sink: Sink::AliceBlock,
                });
            } else {
                pending.push(channel(j == 0));
            }
            pending.push(inner_merge.clone());
            steps.push(Step {
                time: TimeLabel::cycle(k, 2 + j),
                elements,
            });
        }
        pending.push(Element::Merge {
            r_in: Arm::A,
            l_in: Arm::D,
            out: Arm::S,
            exhaust: Sink::Da,
        });
        steps.push(Step {
            time: TimeLabel::cycle(k, 2 + cycles),
            elements: pending,
        });
    }
    let first_bob = layout.bobs.first().copied().unwrap_or(Bob::Absent);
    let mut post = None;
    if layout.final_arm {
        steps.push(Step {
            time: TimeLabel::final_(),
            elements: vec![Element::Mirror {
                from: Arm::S,
                to: Arm::F,
            }],
        });
        post = Some(PostBoundary {
            time: TimeLabel::final_(),
            projector: Projector::arm_pol(Arm::F, Pol::H),
        });
    }
    let pre = (layout.bobs == [Bob::Absent]).then(|| Boundary {
        time: TimeLabel::cycle(0, 0),
        label: BasisLabel::new(Arm::S, Pol::H, first_bob),
    });
    CircuitSchedule::new(name, arms, layout.bobs.clone(), steps, pre, post)
}

/// The two-outer / two-inner nested interferometer generalised to `M` outer and `N`
/// inner cycles: source `|S, H⟩` at `t0`, detector D0 behind arm F at `t_final`. The
/// outer half-wave plates rotate by `π/2M`, the inner ones by `π/2N`; the channel end
/// is a plain mirror.
pub fn build_paradox_circuit(m: usize, n: usize) -> Result<CircuitSchedule> {
    build_paradox_circuit_av(m, n, 0)
}

/// [`build_paradox_circuit`] with `av_rounds` channel-block suppression rounds.
pub fn build_paradox_circuit_av(m: usize, n: usize, av_rounds: usize) -> Result<CircuitSchedule> {
    let layout = NestedLayout {
        outer: m,
        inner: n,
        av_rounds,
        bobs: vec![Bob::Absent],
        eps_reflect: 0.0,
        eps_block: 0.0,
        block_scope: BlockScope::PerInnerCycle,
        plates: PlateStyle::HalfWave,
        final_arm: true,
    };
    let name = if av_rounds == 0 {
        format!("paradox M={m} N={n}")
    } else {
        format!("paradox M={m} N={n} av={av_rounds}")
    };
    build_nested(&layout, name)
}

/// Forward run of a schedule (alias of [`CircuitSchedule::run`]).
pub fn run_schedule(c: &CircuitSchedule, input: &StateVector) -> Result<Trajectory> {
    c.run(input)
}
