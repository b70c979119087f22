use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use counterport_core::analysis::tsvf::{PostSelection, ORTHOGONALITY_TOL, REPORT_EPSILON};
use counterport_core::analysis::{
    backward_state, chain_ket, channel_probe, forward_state, history_probabilities, is_consistent, paradox_report,
    simulate_probe, simulate_weak_probe, weak_trace_map, weak_value, BoundaryPair, BuiltinFamily, CyclePost, Family,
    NamedProjector, Slot, WeakCell,
};
use counterport_core::optics::{build_paradox_circuit, build_paradox_circuit_av, Boundary, PostBoundary, TimeLabel};
use counterport_core::qstate::{inner, Arm, BasisLabel, Bob, Pol, Projector, StateVector, C64};
use counterport_core::Error;

/// Dense real model of the nested interferometer with a reflecting channel.
/// Coordinates are `(arm, pol)` with H = 0, V = 1; lost light is dropped.
mod dense {
    use super::PI;

    pub const ARMS: [char; 6] = ['S', 'A', 'B', 'C', 'D', 'F'];
    pub const DIM: usize = 12;
    pub type V = [f64; DIM];
    pub type M = [[f64; DIM]; DIM];

    fn ix(arm: char, pol: usize) -> usize {
        2 * ARMS.iter().position(|&a| a == arm).unwrap() + pol
    }

    fn identity() -> M {
        let mut m = [[0.0; DIM]; DIM];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        m
    }

    fn mul(a: &M, b: &M) -> M {
        let mut out = [[0.0; DIM]; DIM];
        for i in 0..DIM {
            for k in 0..DIM {
                if a[i][k] != 0.0 {
                    for j in 0..DIM {
                        out[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
        }
        out
    }

    /// Matrix whose column `x` is the image of basis vector `x`.
    fn local(f: impl Fn(char, usize) -> Vec<(char, usize, f64)>) -> M {
        let mut m = [[0.0; DIM]; DIM];
        for &a in &ARMS {
            for p in 0..2 {
                for (b, q, v) in f(a, p) {
                    m[ix(b, q)][ix(a, p)] += v;
                }
            }
        }
        m
    }

    fn rotate(arm: char, theta: f64) -> M {
        let (s, c) = theta.sin_cos();
        local(|a, p| match (a == arm, p) {
            (false, _) => vec![(a, p, 1.0)],
            (true, 0) => vec![(a, 0, c), (a, 1, s)],
            (true, _) => vec![(a, 1, c), (a, 0, -s)],
        })
    }

    /// Splitters and joins swap the matched modes, so they are unitary on the
    /// full space and the adjoint is defined off the forward support too.
    fn split(input: char, h_out: char, v_out: char) -> M {
        local(|a, p| {
            let to = if p == 0 { h_out } else { v_out };
            if a == input {
                vec![(to, p, 1.0)]
            } else if a == to {
                vec![(input, p, 1.0)]
            } else {
                vec![(a, p, 1.0)]
            }
        })
    }

    fn join(h_in: char, v_in: char, out: char) -> M {
        local(|a, p| {
            let matched = if p == 0 { h_in } else { v_in };
            if a == matched {
                vec![(out, p, 1.0)]
            } else if a == out {
                vec![(matched, p, 1.0)]
            } else if a == h_in || a == v_in {
                vec![]
            } else {
                vec![(a, p, 1.0)]
            }
        })
    }

    fn absorb(arm: char) -> M {
        local(|a, p| if a == arm { vec![] } else { vec![(a, p, 1.0)] })
    }

    /// One matrix per stamp; the first stamp's matrix is the identity.
    pub fn steps(m: usize, n: usize, av: usize) -> Vec<M> {
        let (to, ti) = (PI / (2.0 * m as f64), PI / (2.0 * n as f64));
        let cycles = n * (1 + av);
        let mut out = Vec::new();
        for _ in 0..m {
            out.push(identity());
            out.push(mul(&split('S', 'A', 'D'), &rotate('S', to)));
            let mut pending = identity();
            for j in 0..cycles {
                let mut step = mul(&split('D', 'C', 'B'), &mul(&rotate('D', ti), &pending));
                if (j + 1) % n == 0 && (j + 1) / n <= av {
                    step = mul(&absorb('C'), &step);
                }
                out.push(step);
                pending = join('C', 'B', 'D');
            }
            out.push(mul(&join('A', 'D', 'S'), &pending));
        }
        out.push(local(|a, p| {
            let to = match a {
                'S' => 'F',
                'F' => 'S',
                x => x,
            };
            vec![(to, p, 1.0)]
        }));
        out
    }

    pub fn apply(m: &M, v: &V) -> V {
        let mut out = [0.0; DIM];
        for i in 0..DIM {
            out[i] = (0..DIM).map(|j| m[i][j] * v[j]).sum();
        }
        out
    }

    pub fn apply_t(m: &M, v: &V) -> V {
        let mut out = [0.0; DIM];
        for j in 0..DIM {
            out[j] = (0..DIM).map(|i| m[i][j] * v[i]).sum();
        }
        out
    }

    /// Forward and backward vectors at every stamp, source `S⊗H`, detector `F⊗H`.
    pub fn two_states(m: usize, n: usize, av: usize) -> (Vec<V>, Vec<V>) {
        let steps = steps(m, n, av);
        let mut f = vec![[0.0; DIM]; steps.len()];
        f[0][ix('S', 0)] = 1.0;
        for i in 1..steps.len() {
            f[i] = apply(&steps[i], &f[i - 1]);
        }
        let mut b = vec![[0.0; DIM]; steps.len()];
        let last = steps.len() - 1;
        b[last][ix('F', 0)] = 1.0;
        for i in (0..last).rev() {
            b[i] = apply_t(&steps[i + 1], &b[i + 1]);
        }
        (f, b)
    }

    pub fn weak(f: &V, b: &V, arm: char) -> Option<f64> {
        let den: f64 = (0..DIM).map(|i| b[i] * f[i]).sum();
        let k = ix(arm, 0);
        (den.abs() >= 1e-12).then(|| (b[k] * f[k] + b[k + 1] * f[k + 1]) / den)
    }

    pub fn amp(v: &V, arm: char, pol: usize) -> f64 {
        v[ix(arm, pol)]
    }
}

fn arm_char(a: Arm) -> char {
    a.name().chars().next().unwrap()
}

fn sh() -> StateVector {
    StateVector::basis(BasisLabel::new(Arm::S, Pol::H, Bob::Absent))
}

#[test]
fn weak_trace_maps_match_the_dense_model() {
    for (m, n, av) in [(2, 2, 0), (3, 2, 0), (2, 3, 0), (2, 2, 1), (3, 3, 2)] {
        let c = build_paradox_circuit_av(m, n, av).unwrap();
        let map = weak_trace_map(&c, &BoundaryPair::end_to_end(&c).unwrap()).unwrap();
        let (f, b) = dense::two_states(m, n, av);
        assert_eq!(map.times.len(), f.len(), "M = {m}, N = {n}, av = {av}");
        for (i, t) in map.times.iter().enumerate() {
            for &arm in &map.arms {
                let expected = dense::weak(&f[i], &b[i], arm_char(arm));
                match (map.get(arm, t).unwrap(), expected) {
                    (WeakCell::Value(w), Some(x)) => {
                        assert!((w - C64::new(x, 0.0)).norm() < 1e-10, "{arm:?} at {t}: {w} vs {x}");
                    }
                    (WeakCell::Orthogonal, None) => {}
                    (got, want) => panic!("{arm:?} at {t}: {got:?} vs {want:?}"),
                }
            }
        }
    }
}

#[test]
fn forward_and_backward_states_match_the_dense_model() {
    let c = build_paradox_circuit(2, 2).unwrap();
    let (f, b) = dense::two_states(2, 2, 0);
    let t0 = TimeLabel::cycle(0, 0);
    let fin = TimeLabel::final_();
    let post = StateVector::basis(BasisLabel::new(Arm::F, Pol::H, Bob::Absent));
    for (i, t) in c.times().enumerate() {
        let fw = forward_state(&c, (&t0, &sh()), t).unwrap();
        let bw = backward_state(&c, (&fin, &post), t).unwrap();
        assert_eq!(bw.sink_norm_sqr(), 0.0);
        for arm in [Arm::S, Arm::A, Arm::B, Arm::C, Arm::D, Arm::F] {
            for (p, pol) in [(0, Pol::H), (1, Pol::V)] {
                let l = BasisLabel::new(arm, pol, Bob::Absent);
                assert_abs_diff_eq!(fw.amplitude(&l).re, dense::amp(&f[i], arm_char(arm), p), epsilon = 1e-12);
                assert!((bw.amplitude(&l).re - dense::amp(&b[i], arm_char(arm), p)).abs() < 1e-12, "{t} {arm:?} {pol:?}: {} vs {}", bw.amplitude(&l), dense::amp(&b[i], arm_char(arm), p));
            }
        }
    }
    // After the first splitter: cos(π/4) on A in H, sin(π/4) on D in V.
    let t1 = forward_state(&c, (&t0, &sh()), &TimeLabel::cycle(0, 1)).unwrap();
    let r = (PI / 4.0).cos();
    assert_abs_diff_eq!(t1.amplitude(&BasisLabel::new(Arm::A, Pol::H, Bob::Absent)).re, r, epsilon = 1e-15);
    assert_abs_diff_eq!(t1.amplitude(&BasisLabel::new(Arm::D, Pol::V, Bob::Absent)).re, r, epsilon = 1e-15);
}

#[test]
fn transition_amplitude_is_the_same_at_every_stamp() {
    for (m, n) in [(2, 2), (3, 4)] {
        let c = build_paradox_circuit(m, n).unwrap();
        let b = BoundaryPair::end_to_end(&c).unwrap();
        let expected = b.transition_amplitude(&c).unwrap();
        for t in c.times() {
            let a = inner(&b.backward(&c, t).unwrap(), &b.forward(&c, t).unwrap());
            assert!((a - expected).norm() < 1e-12, "at {t}");
        }
        assert_abs_diff_eq!(expected.re, (PI / (2.0 * m as f64)).cos().powi(2 * m as i32), epsilon = 1e-12);
    }
}

#[test]
fn weak_values_sum_to_one_at_every_stamp() {
    for (m, n, av) in [(2, 2, 0), (4, 3, 0), (2, 2, 2)] {
        let c = build_paradox_circuit_av(m, n, av).unwrap();
        let map = weak_trace_map(&c, &BoundaryPair::end_to_end(&c).unwrap()).unwrap();
        for i in 0..map.times.len() {
            let s = map.row_sum(i).expect("end-to-end boundaries overlap at every stamp");
            assert!((s - C64::new(1.0, 0.0)).norm() < 1e-10, "at {}", map.times[i]);
        }
    }
}

#[test]
fn end_to_end_and_per_cycle_weak_values_disagree_in_the_channel() {
    let r = paradox_report(2, 2).unwrap();
    let w = |b: &str, arm: Arm, t: &str| r.row(b, arm, t).unwrap().weak_value.unwrap();
    assert!((w("end-to-end", Arm::S, "t0") - C64::new(1.0, 0.0)).norm() < 1e-12);
    assert!((w("end-to-end", Arm::C, "t2") - C64::new(0.5, 0.0)).norm() < 1e-12);
    assert!(w("end-to-end", Arm::C, "t'2").norm() < 1e-12);
    assert!((w("end-to-end", Arm::A, "t2") - C64::new(1.0, 0.0)).norm() < 1e-12);
    assert!((w("end-to-end", Arm::A, "t'2") - C64::new(1.0, 0.0)).norm() < 1e-12);
    for b in ["per-cycle", "per-cycle-exact"] {
        for t in ["t2", "t'2"] {
            assert!(w(b, Arm::C, t).norm() < 1e-12, "{b} at {t}");
        }
    }
    assert!((r.transition_amplitude - C64::new(0.25, 0.0)).norm() < 1e-12);
    assert_eq!(r.epsilon, REPORT_EPSILON);
    let table = r.to_table();
    assert!(table.contains("per-cycle-exact"));
    assert_eq!(table.lines().filter(|l| l.starts_with("end-to-end")).count(), 5);
}

#[test]
fn probe_signals_track_weak_values_to_second_order() {
    let c = build_paradox_circuit(2, 2).unwrap();
    let b = BoundaryPair::end_to_end(&c).unwrap();
    for (arm, t) in [(Arm::C, "t2"), (Arm::C, "t'2"), (Arm::A, "t2"), (Arm::S, "t0"), (Arm::D, "t'1")] {
        let t = TimeLabel::new(t);
        let w = weak_value(&Projector::arm(arm), &b, &t, &c).unwrap().re;
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let err = (simulate_weak_probe(&c, &b, arm, &t, eps).unwrap() / eps - w).abs();
            assert!(err <= eps, "{arm:?} at {t}, eps {eps}: error {err}");
            assert!(err <= last);
            last = err;
        }
    }
    // Several coupled stamps add up.
    let times = [TimeLabel::new("t2"), TimeLabel::new("t3")];
    let sum: f64 = times
        .iter()
        .map(|t| weak_value(&Projector::arm(Arm::C), &b, t, &c).unwrap().re)
        .sum();
    let s = simulate_probe(&c, &b, Arm::C, &times, 1e-4).unwrap();
    assert!((s / 1e-4 - sum).abs() < 1e-3);
}

#[test]
fn per_cycle_probes_see_nothing_in_the_channel() {
    let c = build_paradox_circuit(2, 2).unwrap();
    for k in 0..2 {
        for post in [CyclePost::H, CyclePost::Exact] {
            let b = BoundaryPair::per_cycle(&c, k, post).unwrap();
            let s = simulate_weak_probe(&c, &b, Arm::C, &TimeLabel::cycle(k, 2), 1e-3).unwrap();
            assert!(s.abs() < 1e-9, "cycle {k}, {post:?}: {s}");
        }
    }
}

#[test]
fn blocking_rounds_suppress_the_channel_signal() {
    let signals: Vec<f64> = (0..=3)
        .map(|av| channel_probe(&build_paradox_circuit_av(2, 2, av).unwrap(), 1e-3).unwrap())
        .collect();
    assert!((signals[0] / 1e-3 - 0.5).abs() < 1e-3);
    for w in signals.windows(2) {
        assert!(w[1].abs() < w[0].abs(), "{signals:?}");
    }
    // The first-order term vanishes once Alice blocks.
    assert!(signals[1].abs() < 1e-3 * 1e-3);
    let r = paradox_report(2, 2).unwrap();
    assert_eq!(r.suppression.len(), 3);
    assert!(r.suppression[1].channel_weak_value.norm() < 1e-12);
}

#[test]
fn boundary_pairs_are_validated() {
    let c = build_paradox_circuit(2, 2).unwrap();
    let (t0, t3) = (TimeLabel::cycle(0, 0), TimeLabel::cycle(0, 3));
    let post = || PostSelection::State((&sh()).into());
    assert!(matches!(
        BoundaryPair::new(&c, t3.clone(), sh(), t0.clone(), post()),
        Err(Error::TimeOrder { .. })
    ));
    assert!(matches!(
        BoundaryPair::new(&c, t0.clone(), sh().scaled(C64::new(2.0, 0.0)), t3.clone(), post()),
        Err(Error::NotNormalized(_))
    ));
    assert!(matches!(
        BoundaryPair::new(&c, TimeLabel::new("t9"), sh(), t3.clone(), post()),
        Err(Error::UnknownTime(_))
    ));
    // |S,V⟩ at the end of the cycle is orthogonal to everything that arrives.
    let sv = StateVector::basis(BasisLabel::new(Arm::S, Pol::V, Bob::Absent));
    let end = TimeLabel::cycle(0, 4);
    let b = BoundaryPair::new(&c, t0, sh(), end, PostSelection::State((&sv).into())).unwrap();
    assert!(b.transition_amplitude(&c).unwrap().norm() < ORTHOGONALITY_TOL);
    assert!(matches!(
        weak_value(&Projector::arm(Arm::C), &b, &TimeLabel::cycle(0, 2), &c),
        Err(Error::OrthogonalBoundaries(_))
    ));
    let map = weak_trace_map(&c, &b).unwrap();
    assert!(map.cells.iter().flatten().all(|w| *w == WeakCell::Orthogonal));
}

#[test]
fn builtin_families_have_the_expected_consistency() {
    let c = build_paradox_circuit(2, 2).unwrap();
    for fam in BuiltinFamily::ALL {
        let f = fam.build(&c, 2).unwrap();
        assert_eq!(f.histories().len(), 18);
        let report = is_consistent(&f, &c).unwrap();
        assert_eq!(report.consistent, fam != BuiltinFamily::EndToEndFirst, "{}", f.name);
        if report.consistent {
            let p = history_probabilities(&f, &c).unwrap();
            assert_abs_diff_eq!(p.iter().map(|(_, x)| x).sum::<f64>(), 1.0, epsilon = 1e-12);
            let aaa = f.history_named(&["A", "A", "A"]).unwrap();
            let p_aaa = p.iter().find(|(h, _)| *h == aaa).unwrap().1;
            assert_abs_diff_eq!(p_aaa, 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn the_first_cycle_end_to_end_family_is_inconsistent() {
    let c = build_paradox_circuit(2, 2).unwrap();
    let f = BuiltinFamily::EndToEndFirst.build(&c, 2).unwrap();
    let weight = |names: &[&str]| chain_ket(&f.history_named(names).unwrap(), &f, &c).unwrap().weight();
    assert_abs_diff_eq!(weight(&["A", "A", "A"]), 0.25, epsilon = 1e-12);
    assert_abs_diff_eq!(weight(&["D", "B", "B"]), 0.0625, epsilon = 1e-12);
    assert_abs_diff_eq!(weight(&["D", "C", "B"]), 0.0625, epsilon = 1e-12);
    let report = is_consistent(&f, &c).unwrap();
    assert_eq!(report.all_offending.len(), 3);
    let worst = report.offending.unwrap();
    assert_abs_diff_eq!(worst.overlap.norm(), 0.125, epsilon = 1e-12);
    assert_eq!(f.describe(&worst.first), "(A1, A2, A3)");
    match history_probabilities(&f, &c) {
        Err(Error::InconsistentFamily(msg)) => assert!(msg.contains("(A1, A2, A3)"), "{msg}"),
        other => panic!("expected an inconsistent family, got {other:?}"),
    }
}

/// The options at each slot cover the support of the state, so the chain-kets of a
/// family add up to the post-selected forward state.
#[test]
fn chain_kets_add_up_to_the_forward_state() {
    let c = build_paradox_circuit(2, 2).unwrap();
    for fam in BuiltinFamily::ALL {
        let f = fam.build(&c, 2).unwrap();
        let mut sum = StateVector::new();
        for h in f.histories() {
            for (l, v) in chain_ket(&h, &f, &c).unwrap().0.live() {
                sum.add_amplitude(*l, *v);
            }
        }
        let fw = forward_state(&c, (&f.pre.time, &StateVector::basis(f.pre.label)), &f.post.time).unwrap();
        let direct = f.post.projector.apply(&fw).live_part();
        let diff: f64 = direct
            .live()
            .map(|(l, v)| (v - sum.amplitude(l)).norm())
            .chain(sum.live().map(|(l, v)| (v - direct.amplitude(l)).norm()))
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{}", f.name);
    }
}

#[test]
fn families_round_trip_through_json() {
    let c = build_paradox_circuit(2, 2).unwrap();
    let f = BuiltinFamily::SecondCycle.build(&c, 2).unwrap();
    let back = Family::from_json(&f.to_json()).unwrap();
    assert_eq!(back, f);
    assert_eq!(f.describe(&f.history_named(&["D", "C", "B"]).unwrap()), "(D'1, C'2, B'3)");
    let mut v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
    v["extra"] = serde_json::json!(1);
    assert!(matches!(Family::from_json(&v.to_string()), Err(Error::Parse(_))));
}

#[test]
fn malformed_families_are_rejected() {
    let pre = Boundary {
        time: TimeLabel::cycle(0, 0),
        label: BasisLabel::new(Arm::S, Pol::H, Bob::Absent),
    };
    let post = PostBoundary {
        time: TimeLabel::final_(),
        projector: Projector::arm_pol(Arm::F, Pol::H),
    };
    assert!(matches!(
        Family::new("none", pre.clone(), vec![], post.clone()),
        Err(Error::EmptyFamily(_))
    ));
    let empty_slot = Slot {
        time: TimeLabel::cycle(0, 1),
        options: vec![],
    };
    assert!(matches!(
        Family::new("hollow", pre.clone(), vec![empty_slot], post.clone()),
        Err(Error::EmptyFamily(_))
    ));
    let named = |name: &str, projector: Projector| NamedProjector {
        name: name.into(),
        projector,
    };
    let overlapping = Slot {
        time: TimeLabel::cycle(0, 1),
        options: vec![named("A", Projector::arm(Arm::A)), named("AH", Projector::arm_pol(Arm::A, Pol::H))],
    };
    assert!(matches!(
        Family::new("overlap", pre.clone(), vec![overlapping], post.clone()),
        Err(Error::InvalidParameter(_))
    ));
    let backwards = Family::new(
        "backwards",
        pre,
        vec![
            Slot {
                time: TimeLabel::cycle(0, 3),
                options: vec![named("C", Projector::arm(Arm::C))],
            },
            Slot {
                time: TimeLabel::cycle(0, 2),
                options: vec![named("C", Projector::arm(Arm::C))],
            },
        ],
        post,
    )
    .unwrap();
    let c = build_paradox_circuit(2, 2).unwrap();
    assert!(matches!(backwards.check_times(&c), Err(Error::TimeOrder { .. })));
}
