//! Chained quantum Zeno evolution and the counterfactual CNOT.
//!
//! The evolution is literal element-by-element state-vector propagation through the
//! unrolled module: `M` outer cycles, each containing `N` inner cycles (plus `N` more
//! per weak-trace suppression round). Closed forms are only used as test oracles.
//!
//! Imperfections act per channel event:
//! * Bob reflecting (`|0⟩`): the returning amplitude is damped by `√(1 − eps_reflect)`,
//!   the remainder is lost to DB.
//! * Bob blocking (`|1⟩`): amplitude `√eps_block` is erroneously reflected back
//!   (mode mismatch), the remainder is absorbed by the block. [`BlockScope`] selects
//!   whether this happens on every inner cycle or once per outer cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{build_nested, conservation_bound, BlockScope, CircuitSchedule, Element, Gate, NestedLayout, PlateStyle};
use crate::qstate::{
    product_basis, Arm, BasisLabel, Bob, LinearMap, Path, Pol, Polarization, Sink, StateVector, C64, ZERO,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Outer cycles.
    pub m: usize,
    /// Inner cycles per outer cycle.
    pub n: usize,
    /// Loss coefficient when Bob reflects.
    pub eps_reflect: f64,
    /// Erroneous-reflection coefficient when Bob blocks.
    pub eps_block: f64,
    /// Channel-block suppression rounds per outer cycle.
    #[serde(default)]
    pub av_rounds: usize,
    #[serde(default)]
    pub block_scope: BlockScope,
}

impl ProtocolConfig {
    pub fn ideal(m: usize, n: usize) -> Self {
        ProtocolConfig {
            m,
            n,
            eps_reflect: 0.0,
            eps_block: 0.0,
            av_rounds: 0,
            block_scope: BlockScope::PerInnerCycle,
        }
    }

    pub fn with_errors(mut self, eps_reflect: f64, eps_block: f64) -> Self {
        self.eps_reflect = eps_reflect;
        self.eps_block = eps_block;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < 1 {
            return Err(Error::InvalidParameter(format!(
                "need M >= 1 and N >= 1 (got M = {}, N = {})",
                self.m, self.n
            )));
        }
        for (name, v) in [("eps_reflect", self.eps_reflect), ("eps_block", self.eps_block)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Layout of one gate module for this configuration.
    pub fn layout(&self) -> NestedLayout {
        NestedLayout {
            outer: self.m,
            inner: self.n,
            av_rounds: self.av_rounds,
            bobs: Bob::QUBIT.to_vec(),
            eps_reflect: self.eps_reflect,
            eps_block: self.eps_block,
            block_scope: self.block_scope,
            plates: PlateStyle::Switchable,
            final_arm: false,
        }
    }
}

/// Bob's control qubit `α|0⟩ + β|1⟩` (`|0⟩` reflect, `|1⟩` block).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BobQubit {
    pub alpha: C64,
    pub beta: C64,
}

impl BobQubit {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(n));
        }
        Ok(BobQubit { alpha, beta })
    }

    pub fn zero() -> Self {
        BobQubit {
            alpha: C64::new(1.0, 0.0),
            beta: ZERO,
        }
    }

    pub fn one() -> Self {
        BobQubit {
            alpha: ZERO,
            beta: C64::new(1.0, 0.0),
        }
    }

    /// Point on the Bloch sphere with polar angle `theta` and azimuth `phi`.
    pub fn from_bloch(theta: f64, phi: f64) -> Self {
        BobQubit {
            alpha: C64::new((theta / 2.0).cos(), 0.0),
            beta: C64::from_polar((theta / 2.0).sin(), phi),
        }
    }

    pub fn amp(&self, b: Bob) -> C64 {
        match b {
            Bob::Zero => self.alpha,
            Bob::One => self.beta,
            Bob::Absent => ZERO,
        }
    }

    /// The polarization `α|R⟩ + β|L⟩` the protocol should deliver.
    pub fn as_polarization(&self) -> Polarization {
        Polarization::new(self.alpha, self.beta)
    }

    /// `pol ⊗ bob` on one arm.
    pub fn product_state(&self, arm: Arm, pol: &Polarization) -> StateVector {
        let mut s = StateVector::new();
        for p in Pol::BOTH {
            for b in Bob::QUBIT {
                let a = pol.amp(p) * self.amp(b);
                if a != ZERO {
                    s.add_amplitude(BasisLabel::new(arm, p, b), a);
                }
            }
        }
        s
    }
}

/// Result of one module run.
#[derive(Clone, Debug)]
pub struct CqzeOutcome {
    /// Photon ⊗ Bob on the module's exit arm S, plus sink records.
    pub joint: StateVector,
    pub p_success: f64,
    pub p_loss_da: f64,
    /// Bob's detector: failed reflections and blocked photons.
    pub p_loss_db: f64,
    /// Part of `p_loss_db` absorbed by the blocking device.
    pub p_block: f64,
    /// Absorbed by Alice's channel-entrance block (suppression rounds only).
    pub p_alice_block: f64,
}

impl CqzeOutcome {
    fn from_state(joint: StateVector) -> Self {
        let db = joint.sink_probability(Sink::Db);
        let block = joint.sink_probability(Sink::Block);
        CqzeOutcome {
            p_success: joint.live_norm_sqr(),
            p_loss_da: joint.sink_probability(Sink::Da) + joint.sink_probability(Sink::Stray),
            p_loss_db: db + block,
            p_block: block,
            p_alice_block: joint.sink_probability(Sink::AliceBlock),
            joint,
        }
    }

    /// Amplitude of `|S, pol⟩|bob⟩` at the exit.
    pub fn amplitude(&self, pol: Pol, bob: Bob) -> C64 {
        self.joint.amplitude(&BasisLabel::new(Arm::S, pol, bob))
    }

    pub fn total_probability(&self) -> f64 {
        self.p_success + self.p_loss_da + self.p_loss_db + self.p_alice_block
    }
}

/// One compiled gate module.
#[derive(Clone, Debug)]
pub struct CqzeModule {
    cfg: ProtocolConfig,
    schedule: CircuitSchedule,
}

impl CqzeModule {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let name = format!("cqze M={} N={}", cfg.m, cfg.n);
        let schedule = build_nested(&cfg.layout(), name)?;
        Ok(CqzeModule {
            cfg: cfg.clone(),
            schedule,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &CircuitSchedule {
        &self.schedule
    }

    /// Runs the module on a photon ⊗ Bob state supported on arm S.
    pub fn run(&self, input: &StateVector) -> Result<CqzeOutcome> {
        let out = self.schedule.evolve(input, true)?;
        Ok(CqzeOutcome::from_state(out))
    }
}

fn inner_basis() -> Vec<BasisLabel> {
    product_basis(&[Arm::B, Arm::C, Arm::D], &Bob::QUBIT)
}

fn inner_cycle_maps(cfg: &ProtocolConfig) -> Result<Vec<LinearMap>> {
    let theta = std::f64::consts::PI / (2.0 * cfg.n as f64);
    let basis = inner_basis();
    [
        Element::Spr { arm: Arm::D, angle: theta },
        Element::Pbs {
            input: Arm::D,
            r_out: Arm::C,
            l_out: Arm::B,
        },
        Element::Channel {
            arm: Arm::C,
            eps_reflect: cfg.eps_reflect,
            eps_block: cfg.eps_block,
        },
        Element::Merge {
            r_in: Arm::C,
            l_in: Arm::B,
            out: Arm::D,
            exhaust: Sink::Stray,
        },
    ]
    .iter()
    .map(|e| e.to_map(&basis))
    .collect()
}

/// One inner cycle on a state inside the inner loop (arm D ⊗ Bob): rotate by
/// `π/2N`, send `R` into the channel, let Bob act, recombine.
pub fn inner_cycle(s: &StateVector, cfg: &ProtocolConfig) -> Result<StateVector> {
    cfg.validate()?;
    let mut s = s.clone();
    for m in inner_cycle_maps(cfg)? {
        s = m.apply_owned(s)?;
    }
    Ok(s)
}

/// `N` consecutive inner cycles.
pub fn run_inner(s: &StateVector, cfg: &ProtocolConfig) -> Result<StateVector> {
    cfg.validate()?;
    let maps = inner_cycle_maps(cfg)?;
    let mut s = s.clone();
    for _ in 0..cfg.n {
        for m in &maps {
            s = m.apply_owned(s)?;
        }
    }
    Ok(s)
}

/// A single module fed with `pol_in ⊗ bob` on arm S.
pub fn run_cqze(pol_in: &Polarization, bob: &BobQubit, cfg: &ProtocolConfig) -> Result<CqzeOutcome> {
    let bob = BobQubit::new(bob.alpha, bob.beta)?;
    CqzeModule::new(cfg)?.run(&bob.product_state(Arm::S, pol_in))
}

/// Where the photon left the gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GatePort {
    Port1,
    Port2,
    Lost,
}

#[derive(Clone, Debug)]
pub struct CnotOutcome {
    /// Photon ⊗ Bob on Port1/Port2, plus sink records.
    pub joint: StateVector,
    pub p_port1: f64,
    pub p_port2: f64,
    pub p_lost: f64,
    /// Port1 output carries a pending phase flip on the polarization. It is tracked as
    /// metadata and consumed by the caller.
    pub port1_z_pending: bool,
}

impl CnotOutcome {
    pub fn probability(&self, port: GatePort) -> f64 {
        match port {
            GatePort::Port1 => self.p_port1,
            GatePort::Port2 => self.p_port2,
            GatePort::Lost => self.p_lost,
        }
    }
}

/// Two-rail counterfactual CNOT: PBS1 sends `R` to module 1 and `L` (flipped to `R` by a
/// Pockels cell) to module 2; the outputs meet at a 50:50 beam splitter whose sum port
/// is Port2 and difference port Port1.
#[derive(Clone, Debug)]
pub struct CnotGate {
    module: CqzeModule,
    ports: Vec<BasisLabel>,
    split: LinearMap,
    flip_rail2: LinearMap,
    combine: LinearMap,
}

impl CnotGate {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        let module = CqzeModule::new(cfg)?;
        let ports = port_basis();
        let split = Element::Pbs {
            input: Arm::In,
            r_out: Arm::A,
            l_out: Arm::B,
        }
        .to_map(&ports)?;
        let flip_rail2 = Element::PockelsFlip { arm: Arm::B }.to_map(&ports)?;
        let combine = Element::Bs50 {
            a_in: Arm::A,
            b_in: Arm::B,
            sum_out: Arm::Port2,
            diff_out: Arm::Port1,
        }
        .to_map(&ports)?;
        Ok(CnotGate {
            module,
            ports,
            split,
            flip_rail2,
            combine,
        })
    }

    pub fn module(&self) -> &CqzeModule {
        &self.module
    }

    pub fn port_basis(&self) -> &[BasisLabel] {
        &self.ports
    }

    fn run_rail(&self, rails: &StateVector, rail: Arm) -> Result<Option<CqzeOutcome>> {
        let on_rail = StateVector::from_entries(
            rails
                .live()
                .filter(|(l, _)| l.path == Path::Arm(rail))
                .map(|(l, a)| (l.with_path(Arm::S), *a)),
        );
        if on_rail.is_empty() {
            return Ok(None);
        }
        self.module.run(&on_rail).map(Some)
    }

    /// Applies the gate to a photon ⊗ Bob state on arm `In`. Sink records already in
    /// `input` are kept.
    pub fn apply(&self, input: &StateVector) -> Result<CnotOutcome> {
        let reference = input.norm_sqr();
        let rails = self.flip_rail2.apply_owned(self.split.apply(input)?)?;
        let mut joint = rails.filtered(|l| l.is_sink());
        let mut exits = StateVector::new();
        for (rail, module_out) in [Arm::A, Arm::B]
            .into_iter()
            .map(|r| (r, self.run_rail(&rails, r)))
        {
            let Some(out) = module_out? else { continue };
            for (l, a) in out.joint.live() {
                exits.add_amplitude(l.with_path(rail), *a);
            }
            joint = joint.join_disjoint(&out.joint.filtered(|l| l.is_sink()));
        }
        let exits = self.combine.apply_owned(self.flip_rail2.apply_owned(exits)?)?;
        for (l, a) in exits.live() {
            joint.add_amplitude(*l, *a);
        }
        let p_port1 = joint.arm_probability(Arm::Port1);
        let p_port2 = joint.arm_probability(Arm::Port2);
        let total = joint.norm_sqr();
        let bound = conservation_bound(self.module.schedule().steps().len());
        if (total - reference).abs() > bound * reference.max(1.0) {
            return Err(Error::ConservationBreach {
                time: "cnot output".into(),
                total,
                deviation: (total - reference).abs(),
            });
        }
        Ok(CnotOutcome {
            p_lost: joint.sink_norm_sqr(),
            p_port1,
            p_port2,
            port1_z_pending: true,
            joint,
        })
    }
}

/// Labels used around the gate: input, the two rails, and the two output ports.
pub fn port_basis() -> Vec<BasisLabel> {
    product_basis(&[Arm::In, Arm::A, Arm::B, Arm::Port1, Arm::Port2], &Bob::QUBIT)
}

/// The gate applied to `pol_in ⊗ bob`.
pub fn counterfactual_cnot(pol_in: &Polarization, bob: &BobQubit, cfg: &ProtocolConfig) -> Result<CnotOutcome> {
    let n = pol_in.norm_sqr();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n));
    }
    let bob = BobQubit::new(bob.alpha, bob.beta)?;
    CnotGate::new(cfg)?.apply(&bob.product_state(Arm::In, pol_in))
}

/// Adds `rounds` channel-block suppression rounds to a layout: after the `N`-th inner
/// rotator of each outer cycle Alice blocks the channel entrance and the inner loop
/// runs `N` more cycles, repeated `rounds` times. The extra time is compensated by
/// optical delays, which need no modelling.
pub fn av_extension(layout: &NestedLayout, rounds: usize) -> NestedLayout {
    NestedLayout {
        av_rounds: layout.av_rounds + rounds,
        ..layout.clone()
    }
}

/// Generic single-qubit gate on Bob, for use with [`port_basis`] states.
pub fn bob_gate(gate: Gate) -> Result<LinearMap> {
    Element::BobGate { gate }.to_map(&port_basis())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn l_with(bob: &BobQubit) -> StateVector {
        bob.product_state(Arm::D, &Polarization::L)
    }

    #[test]
    fn one_inner_cycle_matches_the_ideal_map() {
        let cfg = ProtocolConfig::ideal(1, 5);
        let bob = BobQubit::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap();
        let out = inner_cycle(&l_with(&bob), &cfg).unwrap();
        let (s, c) = (PI / 10.0).sin_cos();
        let amp = |p, b| out.amplitude(&BasisLabel::new(Arm::D, p, b));
        assert_abs_diff_eq!((amp(Pol::L, Bob::Zero) - bob.alpha * c).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((amp(Pol::R, Bob::Zero) + bob.alpha * s).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((amp(Pol::L, Bob::One) - bob.beta * c).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(amp(Pol::R, Bob::One), ZERO);
        let deficit = 1.0 - out.live_norm_sqr();
        assert_abs_diff_eq!(deficit, bob.beta.norm_sqr() * s * s, epsilon = 1e-15);
        assert_abs_diff_eq!(out.sink_probability(Sink::Block), deficit, epsilon = 1e-15);
    }

    #[test]
    fn one_inner_cycle_is_nearly_identity_for_large_n() {
        let cfg = ProtocolConfig::ideal(1, 10_000);
        let bob = BobQubit::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)).unwrap();
        let input = l_with(&bob);
        let out = inner_cycle(&input, &cfg).unwrap();
        assert!(crate::qstate::distance(&out.live_part(), &input) < 2.0 * PI / 20_000.0);
    }

    #[test]
    fn total_mode_mismatch_turns_blocking_into_reflecting() {
        let cfg = ProtocolConfig::ideal(1, 3).with_errors(0.0, 1.0);
        let zero = run_inner(&l_with(&BobQubit::zero()), &cfg).unwrap();
        let one = run_inner(&l_with(&BobQubit::one()), &cfg).unwrap();
        for p in Pol::BOTH {
            let a = zero.amplitude(&BasisLabel::new(Arm::D, p, Bob::Zero));
            let b = one.amplitude(&BasisLabel::new(Arm::D, p, Bob::One));
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn reflecting_inner_loop_turns_l_into_r() {
        // Sign follows the rotator convention: L → −R after a quarter turn.
        let cfg = ProtocolConfig::ideal(1, 2);
        let out = run_inner(&l_with(&BobQubit::zero()), &cfg).unwrap();
        let r = out.amplitude(&BasisLabel::new(Arm::D, Pol::R, Bob::Zero));
        assert_abs_diff_eq!(r.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitude(&BasisLabel::new(Arm::D, Pol::L, Bob::Zero)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = ProtocolConfig::ideal(2, 2);
        let bad = BobQubit {
            alpha: C64::new(1.0, 0.0),
            beta: C64::new(1.0, 0.0),
        };
        assert!(matches!(run_cqze(&Polarization::R, &bad, &cfg), Err(Error::NotNormalized(_))));
        assert!(BobQubit::new(C64::new(0.6, 0.0), C64::new(0.8, 0.0)).is_ok());
        let mut bad_cfg = cfg.clone();
        bad_cfg.m = 0;
        assert!(bad_cfg.validate().is_err());
        bad_cfg = cfg.with_errors(-0.1, 0.0);
        assert!(bad_cfg.validate().is_err());
    }

    #[test]
    fn r_input_uses_only_rail_one() {
        let cfg = ProtocolConfig::ideal(3, 4);
        let bob = BobQubit::new(C64::new(0.6, 0.0), C64::new(0.8, 0.0)).unwrap();
        let gate = counterfactual_cnot(&Polarization::R, &bob, &cfg).unwrap();
        let single = run_cqze(&Polarization::R, &bob, &cfg).unwrap();
        for p in Pol::BOTH {
            for b in Bob::QUBIT {
                let m = single.amplitude(p, b) * FRAC_1_SQRT_2;
                let p1 = gate.joint.amplitude(&BasisLabel::new(Arm::Port1, p, b));
                let p2 = gate.joint.amplitude(&BasisLabel::new(Arm::Port2, p, b));
                assert_abs_diff_eq!((p1 - m).norm(), 0.0, epsilon = 1e-14);
                assert_abs_diff_eq!((p2 - m).norm(), 0.0, epsilon = 1e-14);
            }
        }
        assert_abs_diff_eq!(gate.p_lost, 1.0 - single.p_success, epsilon = 1e-12);
    }

    #[test]
    fn av_extension_zero_rounds_is_identity() {
        let layout = ProtocolConfig::ideal(3, 4).layout();
        assert_eq!(av_extension(&layout, 0), layout);
        assert_eq!(av_extension(&layout, 2).inner_cycles_per_outer(), 12);
    }
}
