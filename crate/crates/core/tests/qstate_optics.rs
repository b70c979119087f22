use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use counterport_core::cqze::{CqzeModule, ProtocolConfig};
use counterport_core::optics::{
    build_nested, build_paradox_circuit, hwp, spr, BlockScope, CircuitSchedule, Element, Gate, NestedLayout, PlateStyle,
    Step, TimeLabel,
};
use counterport_core::qstate::{
    distance, inner, product_basis, Arm, BasisLabel, Bob, Path, Pol, Projector, Sink, StateVector,
};
use counterport_core::Complex64 as C64;
use proptest::prelude::*;

const ARMS: [Arm; 4] = [Arm::S, Arm::A, Arm::B, Arm::C];

fn arm() -> impl Strategy<Value = Arm> {
    prop::sample::select(ARMS.to_vec())
}

fn element() -> impl Strategy<Value = Element> {
    let gate = prop::sample::select(vec![Gate::Hadamard, Gate::X, Gate::Z]);
    prop_oneof![
        (arm(), -PI..PI).prop_map(|(a, t)| spr(a, t)),
        (arm(), -PI..PI).prop_map(|(a, t)| hwp(a, t)),
        (arm(), gate.clone()).prop_map(|(arm, gate)| Element::PolGate { arm, gate }),
        gate.prop_map(|gate| Element::BobGate { gate }),
        arm().prop_map(|arm| Element::PockelsFlip { arm }),
        (arm(), 0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(arm, eps_reflect, eps_block)| Element::Channel {
            arm,
            eps_reflect,
            eps_block
        }),
        Just(Element::Pbs {
            input: Arm::S,
            r_out: Arm::A,
            l_out: Arm::B
        }),
        Just(Element::Merge {
            r_in: Arm::A,
            l_in: Arm::B,
            out: Arm::C,
            exhaust: Sink::Stray
        }),
        Just(Element::Bs50 {
            a_in: Arm::A,
            b_in: Arm::B,
            sum_out: Arm::S,
            diff_out: Arm::C
        }),
        Just(Element::Mirror { from: Arm::B, to: Arm::C }),
        arm().prop_map(|arm| Element::Block { arm, sink: Sink::Block }),
    ]
}

fn state() -> impl Strategy<Value = StateVector> {
    let labels = product_basis(&ARMS, &Bob::QUBIT);
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), labels.len()).prop_filter_map("nonzero", move |amps| {
        let s = StateVector::from_entries(labels.iter().zip(&amps).map(|(l, (re, im))| (*l, C64::new(*re, *im))));
        (s.norm_sqr() > 1e-6).then(|| s.normalized())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn every_element_is_an_isometry(e in element()) {
        let map = e.to_map(&product_basis(&ARMS, &Bob::QUBIT)).unwrap();
        prop_assert!(map.isometry_deviation() < 1e-12);
    }

    #[test]
    fn random_schedules_conserve_probability(elements in prop::collection::vec(element(), 1..12), s in state()) {
        let steps: Vec<Step> = std::iter::once(Step { time: "start".into(), elements: vec![] })
            .chain(elements.into_iter().enumerate().map(|(i, e)| Step { time: TimeLabel::new(format!("s{i}")), elements: vec![e] }))
            .collect();
        let c = CircuitSchedule::new("random", ARMS.to_vec(), Bob::QUBIT.to_vec(), steps, None, None).unwrap();
        let traj = c.run(&s).unwrap();
        for (_, st) in &traj.records {
            prop_assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
        }
        prop_assert!(c.isometry_deviation().unwrap() < 1e-12);
    }

    #[test]
    fn adjoint_is_the_inverse_on_unitaries(e in element(), s in state()) {
        let map = e.to_map(&product_basis(&ARMS, &Bob::QUBIT)).unwrap();
        let forward = map.apply(&s).unwrap();
        // Exact inverse only when no sink is involved.
        if forward.sink_norm_sqr() == 0.0 {
            let back = map.apply_adjoint(&forward).unwrap();
            prop_assert!(distance(&back, &s) < 1e-12);
        }
        // ⟨φ|Mψ⟩ = ⟨M†φ|ψ⟩ for any live φ.
        let phi = s.clone();
        let lhs = inner(&phi, &forward);
        let rhs = inner(&map.apply_adjoint(&phi).unwrap(), &s);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn inner_product_is_hermitian(a in state(), b in state()) {
        prop_assert!((inner(&a, &b) - inner(&b, &a).conj()).norm() < 1e-15);
        prop_assert!((inner(&a, &a).re - a.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn projectors_are_idempotent_and_complete(s in state(), a in arm(), pol in prop::sample::select(Pol::BOTH.to_vec())) {
        let p = Projector::arm_pol(a, pol);
        let once = p.apply(&s);
        prop_assert!(distance(&p.apply(&once), &once) < 1e-15);
        let total: f64 = ARMS.iter().map(|&x| Projector::arm(x).apply(&s).norm_sqr()).sum();
        prop_assert!((total - s.norm_sqr()).abs() < 1e-12);
    }
}

#[test]
fn paradox_circuit_is_an_isometry() {
    for (m, n) in [(1, 1), (2, 2), (3, 4)] {
        let c = build_paradox_circuit(m, n).unwrap();
        assert!(c.isometry_deviation().unwrap() < 1e-12, "M = {m}, N = {n}");
    }
}

#[test]
fn paradox_end_state_accounts_for_everything() {
    let c = build_paradox_circuit(2, 2).unwrap();
    let input = StateVector::basis(BasisLabel::new(Arm::S, Pol::H, Bob::Absent));
    let end = c.run(&input).unwrap().last().clone();
    let f = end.arm_probability(Arm::F);
    let sinks: f64 = Sink::ALL.iter().map(|&k| end.sink_probability(k)).sum();
    assert_abs_diff_eq!(f + sinks, 1.0, epsilon = 1e-12);
    // Closed form: each outer cycle keeps cos(π/2M) of the amplitude.
    assert_abs_diff_eq!(f, (PI / 4.0).cos().powi(4), epsilon = 1e-12);
}

#[test]
fn paradox_cycle_exit_matches_the_outer_factor() {
    for (m, n) in [(2, 2), (3, 5), (4, 3)] {
        let c = build_paradox_circuit(m, n).unwrap();
        let input = StateVector::basis(BasisLabel::new(Arm::S, Pol::H, Bob::Absent));
        let traj = c.run(&input).unwrap();
        let exit = traj.at(&TimeLabel::cycle(0, 2 + n)).unwrap();
        let h = exit.amplitude(&BasisLabel::new(Arm::S, Pol::H, Bob::Absent));
        assert_abs_diff_eq!(h.re, (PI / (2.0 * m as f64)).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(exit.amplitude(&BasisLabel::new(Arm::S, Pol::V, Bob::Absent)).norm(), 0.0, epsilon = 1e-12);
    }
}

/// The nested circuit with plates and an open channel is the gate module with a
/// reflecting control, stamp by stamp.
#[test]
fn paradox_circuit_equals_the_reflecting_module() {
    let paradox = build_paradox_circuit(2, 2).unwrap();
    let module = CqzeModule::new(&ProtocolConfig::ideal(2, 2)).unwrap();
    let a = paradox
        .run(&StateVector::basis(BasisLabel::new(Arm::S, Pol::H, Bob::Absent)))
        .unwrap();
    let b = module
        .schedule()
        .run(&StateVector::basis(BasisLabel::new(Arm::S, Pol::R, Bob::Zero)))
        .unwrap();
    assert_eq!(b.len() + 1, a.len());
    for ((ta, sa), (tb, sb)) in a.records.iter().zip(&b.records) {
        assert_eq!(ta, tb);
        let relabelled = sb.live_part().map_live(|l| l.with_bob(Bob::Absent));
        assert!(distance(&sa.live_part(), &relabelled) < 1e-12, "at {ta}");
        for k in Sink::ALL {
            assert_abs_diff_eq!(sa.sink_probability(k), sb.sink_probability(k), epsilon = 1e-12);
        }
    }
    let f = a.last().amplitude(&BasisLabel::new(Arm::F, Pol::H, Bob::Absent));
    let s = b.last().amplitude(&BasisLabel::new(Arm::S, Pol::R, Bob::Zero));
    assert_abs_diff_eq!((f - s).norm(), 0.0, epsilon = 1e-12);
}

#[test]
fn schedules_round_trip_through_records() {
    let layout = NestedLayout {
        outer: 3,
        inner: 2,
        av_rounds: 1,
        bobs: Bob::QUBIT.to_vec(),
        eps_reflect: 0.1,
        eps_block: 0.05,
        block_scope: BlockScope::PerOuterCycle,
        plates: PlateStyle::Switchable,
        final_arm: true,
    };
    let c = build_nested(&layout, "roundtrip").unwrap();
    let text = c.to_records();
    assert_eq!(text.lines().count(), c.steps().len() + 1);
    let back = CircuitSchedule::from_records(&text).unwrap();
    assert_eq!(back.to_records(), text);
    assert!(CircuitSchedule::from_records("").is_err());
    assert!(CircuitSchedule::from_records("{\"schedule\": 3}").is_err());
}

#[test]
fn late_outer_cycles_use_numbered_stamps() {
    let c = build_paradox_circuit(4, 1).unwrap();
    let names: Vec<&str> = c.times().map(|t| t.as_str()).collect();
    assert!(names.contains(&"t''0"));
    assert!(names.contains(&"t3.0"));
    assert_eq!(names.last(), Some(&"t_final"));
}

#[test]
fn sink_paths_are_not_arms() {
    assert!(Path::Sink(Sink::Da).is_sink());
    assert!(!Path::Arm(Arm::C).is_sink());
}
