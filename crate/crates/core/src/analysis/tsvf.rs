//! Two-state-vector analysis: forward and backward states, weak values, weak probes.
//!
//! A projector post-selection `P` at time `T` is handled through its backward state
//! `U(T, t)† P U(T, t) |ψ(t)⟩`, which gives the weak value
//! `⟨ψ|U†PU Π|ψ⟩ / ⟨ψ|U†PU|ψ⟩` and coincides with the pure-state formula when `P` is
//! rank one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{build_paradox_circuit, build_paradox_circuit_av, CircuitSchedule, TimeLabel};
use crate::qstate::{inner, Arm, BasisLabel, Bob, Pol, Projector, StateVector, C64};

/// Below this `|⟨backward|forward⟩|` the boundaries count as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostSelection {
    /// Post-selection onto a normalized pure state.
    State(StateVectorRecord),
    Projector(Projector),
}

/// Serializable list of live amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVectorRecord(pub Vec<(BasisLabel, C64)>);

impl From<&StateVector> for StateVectorRecord {
    fn from(s: &StateVector) -> Self {
        StateVectorRecord(s.live().map(|(l, a)| (*l, *a)).collect())
    }
}

impl StateVectorRecord {
    pub fn to_state(&self) -> StateVector {
        StateVector::from_entries(self.0.iter().copied())
    }
}

/// Pre-selected state and post-selection, each at a schedule time-stamp.
#[derive(Clone, Debug)]
pub struct BoundaryPair {
    pub pre_time: TimeLabel,
    pub pre: StateVector,
    pub post_time: TimeLabel,
    pub post: PostSelection,
}

/// Post-selection used at the end of a single outer cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CyclePost {
    /// `|S, H⟩`, what the detector-D3 projection leaves in the ideal case.
    #[default]
    H,
    /// The normalized forward state on arm S, including any residual V component.
    Exact,
}

fn check_normalized(s: &StateVector) -> Result<()> {
    let n = s.norm_sqr();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

impl BoundaryPair {
    pub fn new(
        c: &CircuitSchedule,
        pre_time: TimeLabel,
        pre: StateVector,
        post_time: TimeLabel,
        post: PostSelection,
    ) -> Result<Self> {
        let (a, b) = (c.index_of(&pre_time)?, c.index_of(&post_time)?);
        if a >= b {
            return Err(Error::TimeOrder {
                earlier: pre_time.0,
                later: post_time.0,
            });
        }
        check_normalized(&pre)?;
        if let PostSelection::State(s) = &post {
            check_normalized(&s.to_state())?;
        }
        Ok(BoundaryPair {
            pre_time,
            pre,
            post_time,
            post,
        })
    }

    /// The schedule's declared pre-selection and post-selection projector.
    pub fn end_to_end(c: &CircuitSchedule) -> Result<Self> {
        let pre = c
            .pre()
            .ok_or_else(|| Error::InvalidParameter(format!("schedule `{}` declares no pre-selection", c.name())))?;
        let post = c
            .post()
            .ok_or_else(|| Error::InvalidParameter(format!("schedule `{}` declares no post-selection", c.name())))?;
        BoundaryPair::new(
            c,
            pre.time.clone(),
            StateVector::basis(pre.label),
            post.time.clone(),
            PostSelection::Projector(post.projector.clone()),
        )
    }

    /// `|S, H⟩` at the start of outer cycle `outer`, post-selected on arm S at its end.
    pub fn per_cycle(c: &CircuitSchedule, outer: usize, post: CyclePost) -> Result<Self> {
        let bob = c.bobs().first().copied().unwrap_or(Bob::Absent);
        let start = TimeLabel::cycle(outer, 0);
        let start_index = c.index_of(&start)?;
        // The cycle ends at the last stamp before the next cycle (or the final routing).
        let end_index = c
            .index_of(&TimeLabel::cycle(outer + 1, 0))
            .or_else(|_| c.index_of(&TimeLabel::final_()))
            .unwrap_or(c.steps().len())
            - 1;
        let end = c.steps()[end_index].time.clone();
        let pre = StateVector::basis(BasisLabel::new(Arm::S, Pol::H, bob));
        let post_state = match post {
            CyclePost::H => StateVector::basis(BasisLabel::new(Arm::S, Pol::H, bob)),
            CyclePost::Exact => {
                let f = c.evolve_between(pre.clone(), start_index, end_index, false)?;
                let on_s = f.filtered(|l| l.path == Arm::S.into());
                if on_s.norm_sqr() == 0.0 {
                    return Err(Error::OrthogonalBoundaries(format!("nothing reaches S at `{end}`")));
                }
                on_s.normalized()
            }
        };
        BoundaryPair::new(c, start, pre, end, PostSelection::State((&post_state).into()))
    }

    /// Applies the post-selection to a state given at the post time.
    pub fn post_project(&self, s: &StateVector) -> StateVector {
        match &self.post {
            PostSelection::Projector(p) => p.apply(s).live_part(),
            PostSelection::State(r) => {
                let phi = r.to_state();
                phi.clone().scaled(inner(&phi, s))
            }
        }
    }

    pub fn forward(&self, c: &CircuitSchedule, t: &TimeLabel) -> Result<StateVector> {
        forward_state(c, (&self.pre_time, &self.pre), t)
    }

    pub fn backward(&self, c: &CircuitSchedule, t: &TimeLabel) -> Result<StateVector> {
        backward_state(c, (&self.post_time, &self.backward_at_post(c)?), t)
    }

    /// Backward state at the post time.
    fn backward_at_post(&self, c: &CircuitSchedule) -> Result<StateVector> {
        Ok(match &self.post {
            PostSelection::State(r) => r.to_state(),
            PostSelection::Projector(_) => self.post_project(&self.forward(c, &self.post_time)?),
        })
    }

    /// `⟨backward(t)|forward(t)⟩`, the same at every `t`.
    pub fn transition_amplitude(&self, c: &CircuitSchedule) -> Result<C64> {
        let t = &self.post_time;
        Ok(inner(&self.backward(c, t)?, &self.forward(c, t)?.live_part()))
    }

    fn window(&self, c: &CircuitSchedule) -> Result<(usize, usize)> {
        Ok((c.index_of(&self.pre_time)?, c.index_of(&self.post_time)?))
    }
}

/// Forward evolution of `pre` (given at its time) to `t`.
pub fn forward_state(c: &CircuitSchedule, pre: (&TimeLabel, &StateVector), t: &TimeLabel) -> Result<StateVector> {
    let (a, b) = (c.index_of(pre.0)?, c.index_of(t)?);
    c.evolve_between(pre.1.clone(), a, b, false)
}

/// Adjoint evolution of `post` (given at its time) back to `t`. Sinks carry no
/// backward amplitude.
pub fn backward_state(c: &CircuitSchedule, post: (&TimeLabel, &StateVector), t: &TimeLabel) -> Result<StateVector> {
    let (a, b) = (c.index_of(post.0)?, c.index_of(t)?);
    c.evolve_back_between(post.1, a, b)
}

fn ratio(num: C64, den: C64, what: impl FnOnce() -> String) -> Result<C64> {
    if den.norm() < ORTHOGONALITY_TOL {
        return Err(Error::OrthogonalBoundaries(what()));
    }
    Ok(num / den)
}

/// `⟨backward(t)|Π|forward(t)⟩ / ⟨backward(t)|forward(t)⟩`.
pub fn weak_value(pi: &Projector, b: &BoundaryPair, t: &TimeLabel, c: &CircuitSchedule) -> Result<C64> {
    let f = b.forward(c, t)?.live_part();
    let back = b.backward(c, t)?;
    ratio(inner(&back, &pi.apply(&f)), inner(&back, &f), || {
        format!("pre at `{}` and post at `{}`", b.pre_time, b.post_time)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakCell {
    Value(C64),
    /// The boundaries are orthogonal; no weak value exists.
    Orthogonal,
}

impl WeakCell {
    pub fn value(&self) -> Option<C64> {
        match self {
            WeakCell::Value(v) => Some(*v),
            WeakCell::Orthogonal => None,
        }
    }
}

/// Weak values of every arm projector at every time-stamp between the boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTraceMap {
    pub arms: Vec<Arm>,
    pub times: Vec<TimeLabel>,
    /// `cells[time][arm]`.
    pub cells: Vec<Vec<WeakCell>>,
}

impl WeakTraceMap {
    pub fn get(&self, arm: Arm, t: &TimeLabel) -> Option<WeakCell> {
        let i = self.times.iter().position(|x| x == t)?;
        let j = self.arms.iter().position(|&a| a == arm)?;
        Some(self.cells[i][j])
    }

    /// Sum over all arms at the `i`-th time.
    pub fn row_sum(&self, i: usize) -> Option<C64> {
        self.cells[i].iter().map(|c| c.value()).sum()
    }
}

/// One forward and one backward sweep; cells are filled from the stored states.
pub fn weak_trace_map(c: &CircuitSchedule, b: &BoundaryPair) -> Result<WeakTraceMap> {
    let (from, to) = b.window(c)?;
    let mut forward = Vec::with_capacity(to - from + 1);
    let mut s = b.pre.clone();
    forward.push(s.live_part());
    for i in from..to {
        s = c.evolve_between(s, i, i + 1, false)?;
        forward.push(s.live_part());
    }
    let mut backward = vec![StateVector::new(); to - from + 1];
    let mut back = b.backward_at_post(c)?;
    backward[to - from] = back.clone();
    for i in (from..to).rev() {
        back = c.evolve_back_between(&back, i + 1, i)?;
        backward[i - from] = back.clone();
    }
    let arms = c.arms().to_vec();
    let times: Vec<TimeLabel> = c.steps()[from..=to].iter().map(|s| s.time.clone()).collect();
    let cells = forward
        .iter()
        .zip(&backward)
        .map(|(f, bk)| {
            let den = inner(bk, f);
            arms.iter()
                .map(|&a| {
                    if den.norm() < ORTHOGONALITY_TOL {
                        WeakCell::Orthogonal
                    } else {
                        WeakCell::Value(inner(bk, &Projector::arm(a).apply(f)) / den)
                    }
                })
                .collect()
        })
        .collect();
    Ok(WeakTraceMap { arms, times, cells })
}

/// D0-conditioned pointer signal for a two-level pointer rotated by `epsilon` whenever
/// the photon occupies `arm` at any of `times`. The pointer starts in `|0⟩`; the signal
/// is `Re⟨A|B⟩ / (|A|² + |B|²)` with `A`, `B` the post-selected pointer-0 and pointer-1
/// branches, which is `epsilon · Re Σ_t w(arm, t)` to first order.
pub fn simulate_probe(
    c: &CircuitSchedule,
    b: &BoundaryPair,
    arm: Arm,
    times: &[TimeLabel],
    epsilon: f64,
) -> Result<f64> {
    let (from, to) = b.window(c)?;
    let mut couple = vec![false; c.steps().len()];
    for t in times {
        let i = c.index_of(t)?;
        if i < from || i > to {
            return Err(Error::TimeOrder {
                earlier: b.pre_time.0.clone(),
                later: t.0.clone(),
            });
        }
        couple[i] = true;
    }
    let pi = Projector::arm(arm);
    let (sin, cos) = epsilon.sin_cos();
    let mut r0 = b.pre.clone();
    let mut r1 = StateVector::new();
    for i in from..=to {
        if i > from {
            r0 = c.evolve_between(r0, i - 1, i, false)?;
            r1 = c.evolve_between(r1, i - 1, i, false)?;
        }
        if couple[i] {
            let (p0, p1) = (pi.apply(&r0), pi.apply(&r1));
            let (q0, q1) = (sub(&r0, &p0), sub(&r1, &p1));
            r0 = add(&q0, &combine(&p0, cos, &p1, -sin));
            r1 = add(&q1, &combine(&p0, sin, &p1, cos));
        }
    }
    let (a, bb) = (b.post_project(&r0), b.post_project(&r1));
    let den = a.norm_sqr() + bb.norm_sqr();
    Ok(if den > 0.0 { inner(&a, &bb).re / den } else { 0.0 })
}

/// [`simulate_probe`] at a single time-stamp.
pub fn simulate_weak_probe(c: &CircuitSchedule, b: &BoundaryPair, arm: Arm, t: &TimeLabel, epsilon: f64) -> Result<f64> {
    simulate_probe(c, b, arm, std::slice::from_ref(t), epsilon)
}

fn combine(a: &StateVector, x: f64, b: &StateVector, y: f64) -> StateVector {
    let mut out = a.live_part().scaled(C64::new(x, 0.0));
    for (l, v) in b.live() {
        out.add_amplitude(*l, v * y);
    }
    out
}

fn add(a: &StateVector, b: &StateVector) -> StateVector {
    combine(a, 1.0, b, 1.0)
}

fn sub(a: &StateVector, b: &StateVector) -> StateVector {
    combine(a, 1.0, b, -1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParadoxRow {
    /// `end-to-end`, `per-cycle` or `per-cycle-exact`.
    pub boundaries: String,
    pub arm: Arm,
    pub time: TimeLabel,
    /// `None` when the boundaries are orthogonal.
    pub weak_value: Option<C64>,
    pub probe_signal: f64,
}

/// Channel probe on the suppression-extended circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuppressionRow {
    pub av_rounds: usize,
    /// Probe on arm C at every time-stamp, end-to-end boundaries.
    pub channel_signal: f64,
    /// Sum of the end-to-end arm-C weak values over all time-stamps.
    pub channel_weak_value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParadoxReport {
    pub m: usize,
    pub n: usize,
    pub epsilon: f64,
    pub transition_amplitude: C64,
    pub rows: Vec<ParadoxRow>,
    pub suppression: Vec<SuppressionRow>,
}

impl ParadoxReport {
    pub fn row(&self, boundaries: &str, arm: Arm, time: &str) -> Option<&ParadoxRow> {
        self.rows
            .iter()
            .find(|r| r.boundaries == boundaries && r.arm == arm && r.time.as_str() == time)
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "nested interferometer M = {}, N = {}, probe strength {:e}\n{:<16} {:<4} {:<8} {:>24} {:>14}\n",
            self.m, self.n, self.epsilon, "boundaries", "arm", "time", "weak value", "probe signal"
        );
        for r in &self.rows {
            let w = match r.weak_value {
                Some(w) => format!("{:+.6}{:+.6}i", w.re, w.im),
                None => "orthogonal".to_string(),
            };
            out.push_str(&format!(
                "{:<16} {:<4} {:<8} {:>24} {:>14.6e}\n",
                r.boundaries,
                r.arm.name(),
                r.time.as_str(),
                w,
                r.probe_signal
            ));
        }
        out.push_str(&format!("\n{:<10} {:>24} {:>14}\n", "av rounds", "channel weak value", "probe signal"));
        for s in &self.suppression {
            out.push_str(&format!(
                "{:<10} {:>24} {:>14.6e}\n",
                s.av_rounds,
                format!("{:+.6}{:+.6}i", s.channel_weak_value.re, s.channel_weak_value.im),
                s.channel_signal
            ));
        }
        out
    }
}

/// Probe strength used by [`paradox_report`].
pub const REPORT_EPSILON: f64 = 1e-3;

/// Contrasts end-to-end and per-cycle weak values and probe signals in arm C during
/// the first inner cycle of the first two outer cycles, plus channel probes on the
/// suppression-extended circuit for 0, 1 and 2 rounds.
pub fn paradox_report(m: usize, n: usize) -> Result<ParadoxReport> {
    let c = build_paradox_circuit(m, n)?;
    let eps = REPORT_EPSILON;
    let e2e = BoundaryPair::end_to_end(&c)?;
    let mut rows = Vec::new();
    let mut push = |label: &str, b: &BoundaryPair, arm: Arm, t: TimeLabel| -> Result<()> {
        let w = match weak_value(&Projector::arm(arm), b, &t, &c) {
            Ok(w) => Some(w),
            Err(Error::OrthogonalBoundaries(_)) => None,
            Err(e) => return Err(e),
        };
        rows.push(ParadoxRow {
            boundaries: label.into(),
            arm,
            probe_signal: simulate_weak_probe(&c, b, arm, &t, eps)?,
            weak_value: w,
            time: t,
        });
        Ok(())
    };
    push("end-to-end", &e2e, Arm::S, TimeLabel::cycle(0, 0))?;
    for k in 0..m.min(2) {
        push("end-to-end", &e2e, Arm::C, TimeLabel::cycle(k, 2))?;
    }
    for k in 0..m.min(2) {
        push("per-cycle", &BoundaryPair::per_cycle(&c, k, CyclePost::H)?, Arm::C, TimeLabel::cycle(k, 2))?;
    }
    for k in 0..m.min(2) {
        push(
            "per-cycle-exact",
            &BoundaryPair::per_cycle(&c, k, CyclePost::Exact)?,
            Arm::C,
            TimeLabel::cycle(k, 2),
        )?;
    }
    for k in 0..m.min(2) {
        push("end-to-end", &e2e, Arm::A, TimeLabel::cycle(k, 2))?;
    }
    let suppression = (0..=2)
        .map(|av| suppression_row(m, n, av, eps))
        .collect::<Result<_>>()?;
    Ok(ParadoxReport {
        m,
        n,
        epsilon: eps,
        transition_amplitude: e2e.transition_amplitude(&c)?,
        rows,
        suppression,
    })
}

/// Channel probe (arm C at every time-stamp) with end-to-end boundaries.
pub fn channel_probe(c: &CircuitSchedule, epsilon: f64) -> Result<f64> {
    let b = BoundaryPair::end_to_end(c)?;
    let times: Vec<TimeLabel> = c.times().cloned().collect();
    simulate_probe(c, &b, Arm::C, &times, epsilon)
}

fn suppression_row(m: usize, n: usize, av_rounds: usize, eps: f64) -> Result<SuppressionRow> {
    let c = build_paradox_circuit_av(m, n, av_rounds)?;
    let b = BoundaryPair::end_to_end(&c)?;
    let map = weak_trace_map(&c, &b)?;
    let j = map.arms.iter().position(|&a| a == Arm::C).expect("arm C is in every nested circuit");
    let channel_weak_value = map.cells.iter().filter_map(|row| row[j].value()).sum::<C64>();
    Ok(SuppressionRow {
        av_rounds,
        channel_signal: channel_probe(&c, eps)?,
        channel_weak_value,
    })
}
