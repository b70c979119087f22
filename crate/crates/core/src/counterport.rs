//! Counterfactual transport of Bob's qubit onto Alice's photon, Bloch-sphere sampling
//! and the `(M, N)` fidelity sweep.
//!
//! Protocol, with every photon-side operation applied to the live state:
//! 1. `|R⟩` runs through one gate module and is routed to Port1. Hadamards on the
//!    photon polarization and on Bob's qubit.
//! 2. The photon re-enters through the two-rail CNOT. Hadamard on Bob, Hadamards on
//!    the polarization at both ports, NOT on Port1 (absorbing the gate's pending
//!    phase flip). Ideally the photon leaves either port as `α|R⟩ + β|L⟩`.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cqze::{BobQubit, CnotGate, ProtocolConfig};
use crate::error::{Error, Result};
use crate::optics::{conservation_bound, Element, Gate};
use crate::qstate::{fidelity, postselected_fidelity, Arm, Bob, LinearMap, Path, Polarization, StateVector, C64, ZERO};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityMode {
    /// Photon loss scores zero.
    #[default]
    LossInclusive,
    /// Conditioned on the photon leaving a port.
    PostSelected,
}

/// A labelled snapshot of the joint state.
#[derive(Clone, Debug)]
pub struct RoundDump {
    pub stage: &'static str,
    pub state: StateVector,
}

#[derive(Clone, Debug)]
pub struct CounterportResult {
    /// Final photon ⊗ Bob state on Port1/Port2 plus sink records.
    pub joint: StateVector,
    pub dumps: Vec<RoundDump>,
    pub p_port1: f64,
    pub p_port2: f64,
    pub p_lost: f64,
    pub fidelity: f64,
    pub fidelity_postselected: f64,
}

impl CounterportResult {
    pub fn fidelity(&self, mode: FidelityMode) -> f64 {
        match mode {
            FidelityMode::LossInclusive => self.fidelity,
            FidelityMode::PostSelected => self.fidelity_postselected,
        }
    }

    pub fn p_success(&self) -> f64 {
        self.p_port1 + self.p_port2
    }

    /// Normalized photon polarization at `port` for a given Bob value, if populated.
    pub fn port_polarization(&self, port: Arm, bob: Bob) -> Option<Polarization> {
        let r = self.joint.amplitude(&crate::qstate::BasisLabel::new(port, crate::qstate::Pol::R, bob));
        let l = self.joint.amplitude(&crate::qstate::BasisLabel::new(port, crate::qstate::Pol::L, bob));
        let n = (r.norm_sqr() + l.norm_sqr()).sqrt();
        (n > 0.0).then(|| Polarization::new(r / n, l / n))
    }

    /// Purity `Tr ρ²` of the polarization reduced state, conditioned on the photon
    /// leaving a port. 1 when the photon is disentangled from Bob and the port.
    pub fn polarization_purity(&self) -> f64 {
        polarization_purity(&self.joint, &[Path::Arm(Arm::Port1), Path::Arm(Arm::Port2)])
    }
}

/// `Tr ρ²` of the polarization reduced state over the live entries on `paths`.
pub fn polarization_purity(s: &StateVector, paths: &[Path]) -> f64 {
    let mut rho = [[ZERO; 2]; 2];
    let mut groups: std::collections::BTreeMap<(Path, Bob), [C64; 2]> = Default::default();
    for (l, a) in s.live() {
        if paths.contains(&l.path) {
            groups.entry((l.path, l.bob)).or_insert([ZERO; 2])[l.pol.index()] += *a;
        }
    }
    let mut total = 0.0;
    for v in groups.values() {
        for i in 0..2 {
            total += v[i].norm_sqr();
            for j in 0..2 {
                rho[i][j] += v[i] * v[j].conj();
            }
        }
    }
    if total == 0.0 {
        return 0.0;
    }
    let mut p = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            p += (rho[i][j] * rho[j][i]).re;
        }
    }
    p / (total * total)
}

/// The two-round protocol compiled for one configuration.
#[derive(Clone, Debug)]
pub struct Counterporter {
    cnot: CnotGate,
    round1: Vec<LinearMap>,
    reenter: LinearMap,
    round2: Vec<LinearMap>,
}

impl Counterporter {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        let cnot = CnotGate::new(cfg)?;
        let basis = cnot.port_basis().to_vec();
        let maps = |elements: &[Element]| -> Result<Vec<LinearMap>> { elements.iter().map(|e| e.to_map(&basis)).collect() };
        let round1 = maps(&[
            Element::PolGate {
                arm: Arm::Port1,
                gate: Gate::Hadamard,
            },
            Element::BobGate { gate: Gate::Hadamard },
        ])?;
        let reenter = Element::Mirror {
            from: Arm::Port1,
            to: Arm::In,
        }
        .to_map(&basis)?;
        let round2 = maps(&[
            Element::BobGate { gate: Gate::Hadamard },
            Element::PolGate {
                arm: Arm::Port1,
                gate: Gate::Hadamard,
            },
            Element::PolGate {
                arm: Arm::Port2,
                gate: Gate::Hadamard,
            },
            Element::PolGate {
                arm: Arm::Port1,
                gate: Gate::X,
            },
        ])?;
        Ok(Counterporter {
            cnot,
            round1,
            reenter,
            round2,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        self.cnot.module().config()
    }

    /// Runs the protocol; `keep_dumps` records the joint state after each stage.
    pub fn run(&self, bob: &BobQubit, keep_dumps: bool) -> Result<CounterportResult> {
        let bob = BobQubit::new(bob.alpha, bob.beta)?;
        let mut dumps = Vec::new();
        let mut dump = |stage, s: &StateVector| {
            if keep_dumps {
                dumps.push(RoundDump {
                    stage,
                    state: s.clone(),
                })
            }
        };
        let input = bob.product_state(Arm::S, &Polarization::R);
        dump("input", &input);

        let module_out = self.cnot.module().run(&input)?.joint;
        let mut s = module_out.map_live(|l| l.with_path(Arm::Port1));
        dump("round 1 gate", &s);
        for m in &self.round1 {
            s = m.apply_owned(s)?;
        }
        dump("round 1 hadamards", &s);

        let gate = self.cnot.apply(&self.reenter.apply_owned(s)?)?;
        let mut s = gate.joint;
        dump("round 2 gate", &s);
        for m in &self.round2 {
            s = m.apply_owned(s)?;
        }
        dump("round 2 corrections", &s);

        let total = s.norm_sqr();
        if (total - 1.0).abs() > conservation_bound(2 * self.cnot.module().schedule().steps().len()) {
            return Err(Error::ConservationBreach {
                time: "counterport output".into(),
                total,
                deviation: (total - 1.0).abs(),
            });
        }
        let target = bob.as_polarization();
        let ports = [Path::Arm(Arm::Port1), Path::Arm(Arm::Port2)];
        Ok(CounterportResult {
            p_port1: s.arm_probability(Arm::Port1),
            p_port2: s.arm_probability(Arm::Port2),
            p_lost: s.sink_norm_sqr(),
            fidelity: fidelity(&target, &s, &ports)?,
            fidelity_postselected: postselected_fidelity(&target, &s, &ports)?,
            joint: s,
            dumps,
        })
    }
}

pub fn counterport(bob: &BobQubit, cfg: &ProtocolConfig) -> Result<CounterportResult> {
    Counterporter::new(cfg)?.run(bob, true)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "scheme")]
pub enum SampleScheme {
    /// Fibonacci lattice: `z_i = 1 − 2i/(n−1)`, azimuth advancing by the golden angle.
    #[default]
    Fibonacci,
    /// Independent uniform points from a seeded ChaCha8 stream.
    SeededUniform { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochSample {
    pub scheme: SampleScheme,
    pub qubits: Vec<BobQubit>,
}

impl BlochSample {
    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    /// Smallest angle between two Bloch vectors in the set.
    pub fn min_angular_distance(&self) -> f64 {
        let v: Vec<[f64; 3]> = self.qubits.iter().map(bloch_vector).collect();
        let mut best = std::f64::consts::PI;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let d = (v[i][0] * v[j][0] + v[i][1] * v[j][1] + v[i][2] * v[j][2]).clamp(-1.0, 1.0);
                best = best.min(d.acos());
            }
        }
        best
    }
}

/// Bloch vector `(x, y, z)` of a qubit; `|0⟩` is `+z`.
pub fn bloch_vector(q: &BobQubit) -> [f64; 3] {
    let c = q.alpha.conj() * q.beta;
    [2.0 * c.re, 2.0 * c.im, q.alpha.norm_sqr() - q.beta.norm_sqr()]
}

fn from_z_phi(z: f64, phi: f64) -> BobQubit {
    BobQubit::from_bloch(z.clamp(-1.0, 1.0).acos(), phi)
}

pub fn sample_bloch(count: usize, scheme: SampleScheme) -> Result<BlochSample> {
    if count < 1 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    let qubits = match scheme {
        SampleScheme::Fibonacci => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = if count == 1 {
                        1.0
                    } else {
                        1.0 - 2.0 * i as f64 / (count - 1) as f64
                    };
                    from_z_phi(z, golden * i as f64)
                })
                .collect()
        }
        SampleScheme::SeededUniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    let z: f64 = rng.gen_range(-1.0..=1.0);
                    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    from_z_phi(z, phi)
                })
                .collect()
        }
    };
    Ok(BlochSample { scheme, qubits })
}

/// Rectangular `(M, N)` range of a sweep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRange {
    pub m: RangeInclusive<usize>,
    pub n: RangeInclusive<usize>,
}

impl GridRange {
    pub fn up_to(m_max: usize, n_max: usize) -> Self {
        GridRange { m: 1..=m_max, n: 1..=n_max }
    }

    pub fn single(m: usize, n: usize) -> Self {
        GridRange { m: m..=m, n: n..=n }
    }

    fn validate(&self) -> Result<()> {
        if self.m.is_empty() || self.n.is_empty() || *self.m.start() < 1 || *self.n.start() < 1 {
            return Err(Error::InvalidParameter(format!(
                "grid ranges must be non-empty and start at 1 or above (M {:?}, N {:?})",
                self.m, self.n
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub m: usize,
    pub n: usize,
    /// Average fidelity under the grid's mode.
    pub avg_fidelity: f64,
    pub avg_success_prob: f64,
    pub avg_fidelity_loss_inclusive: f64,
    pub avg_fidelity_postselected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityGrid {
    pub mode: FidelityMode,
    pub eps_reflect: f64,
    pub eps_block: f64,
    pub av_rounds: usize,
    pub sample_count: usize,
    pub scheme: SampleScheme,
    pub m_values: Vec<usize>,
    pub n_values: Vec<usize>,
    /// Row-major: `M` outer, `N` inner.
    pub cells: Vec<GridCell>,
}

impl FidelityGrid {
    pub fn cell(&self, m: usize, n: usize) -> Option<&GridCell> {
        let i = self.m_values.iter().position(|&v| v == m)?;
        let j = self.n_values.iter().position(|&v| v == n)?;
        self.cells.get(i * self.n_values.len() + j)
    }

    /// Rectangular, fully populated, all values finite and in `[0, 1]`.
    pub fn is_well_formed(&self) -> bool {
        self.cells.len() == self.m_values.len() * self.n_values.len()
            && self.cells.iter().enumerate().all(|(k, c)| {
                c.m == self.m_values[k / self.n_values.len()]
                    && c.n == self.n_values[k % self.n_values.len()]
                    && [
                        c.avg_fidelity,
                        c.avg_success_prob,
                        c.avg_fidelity_loss_inclusive,
                        c.avg_fidelity_postselected,
                    ]
                    .iter()
                    .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
            })
    }
}

/// Sum in a fixed binary-tree order, independent of how values were produced.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

struct Sample {
    loss_inclusive: f64,
    postselected: f64,
    success: f64,
}

fn run_point(p: &Counterporter, q: &BobQubit) -> Result<Sample> {
    let r = p.run(q, false)?;
    Ok(Sample {
        loss_inclusive: r.fidelity,
        postselected: r.fidelity_postselected,
        success: r.p_success(),
    })
}

#[cfg(feature = "parallel")]
fn evaluate(points: &[(usize, usize)], porters: &[Counterporter], sample: &BlochSample) -> Result<Vec<Sample>> {
    use rayon::prelude::*;
    points
        .par_iter()
        .map(|&(c, q)| run_point(&porters[c], &sample.qubits[q]))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn evaluate(points: &[(usize, usize)], porters: &[Counterporter], sample: &BlochSample) -> Result<Vec<Sample>> {
    points
        .iter()
        .map(|&(c, q)| run_point(&porters[c], &sample.qubits[q]))
        .collect()
}

#[cfg(feature = "parallel")]
fn compile(configs: &[ProtocolConfig]) -> Result<Vec<Counterporter>> {
    use rayon::prelude::*;
    configs.par_iter().map(Counterporter::new).collect()
}

#[cfg(not(feature = "parallel"))]
fn compile(configs: &[ProtocolConfig]) -> Result<Vec<Counterporter>> {
    configs.iter().map(Counterporter::new).collect()
}

/// Average fidelity and success probability over `sample` for every `(M, N)` in
/// `range`; `M` and `N` of `template` are ignored. Averages are pairwise sums in
/// sample order, so results do not depend on the worker count.
pub fn sweep(range: &GridRange, template: &ProtocolConfig, sample: &BlochSample, mode: FidelityMode) -> Result<FidelityGrid> {
    range.validate()?;
    if sample.is_empty() {
        return Err(Error::InvalidParameter("empty Bloch sample".into()));
    }
    let m_values: Vec<usize> = range.m.clone().collect();
    let n_values: Vec<usize> = range.n.clone().collect();
    let configs: Vec<ProtocolConfig> = m_values
        .iter()
        .flat_map(|&m| {
            n_values.iter().map(move |&n| ProtocolConfig {
                m,
                n,
                ..template.clone()
            })
        })
        .collect();
    let porters = compile(&configs)?;
    let points: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..sample.len()).map(move |q| (c, q)))
        .collect();
    let results = evaluate(&points, &porters, sample)?;
    let k = sample.len() as f64;
    let cells = configs
        .iter()
        .zip(results.chunks(sample.len()))
        .map(|(cfg, chunk)| {
            let avg = |f: fn(&Sample) -> f64| pairwise_sum(&chunk.iter().map(f).collect::<Vec<_>>()) / k;
            let li = avg(|s| s.loss_inclusive);
            let ps = avg(|s| s.postselected);
            GridCell {
                m: cfg.m,
                n: cfg.n,
                avg_fidelity: match mode {
                    FidelityMode::LossInclusive => li,
                    FidelityMode::PostSelected => ps,
                },
                avg_success_prob: avg(|s| s.success),
                avg_fidelity_loss_inclusive: li,
                avg_fidelity_postselected: ps,
            }
        })
        .collect();
    Ok(FidelityGrid {
        mode,
        eps_reflect: template.eps_reflect,
        eps_block: template.eps_block,
        av_rounds: template.av_rounds,
        sample_count: sample.len(),
        scheme: sample.scheme,
        m_values,
        n_values,
        cells,
    })
}
