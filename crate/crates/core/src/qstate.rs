//! Sparse complex amplitudes over an explicitly labelled tensor-product basis.
//!
//! A basis label is `path ⊗ polarization ⊗ control`. Paths are either live arms,
//! which take part in unitary evolution, or sinks (detectors and absorbers). Sink
//! amplitudes are frozen: maps never act on them, and every emission into a sink is
//! stamped with a fresh time bin so that losses at different times never interfere.
//!
//! Polarization uses a single two-level basis with two display names: `R`/`L` for the
//! circular convention of the gate, `H`/`V` for the linear convention of the nested
//! interferometer (`H ≡ R`, `V ≡ L`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Amplitudes below this magnitude may be dropped by [`StateVector::prune`].
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Tolerance of the isometry audit performed when a [`LinearMap`] is built.
pub const AUDIT_TOL: f64 = 1e-12;

/// A live optical arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    /// Outer-loop entry/exit arm (source side).
    S,
    /// Outer interferometer arm that stays on Alice's side.
    A,
    /// Inner interferometer arm that stays on Alice's side.
    B,
    /// Channel arm leading to Bob.
    C,
    /// Outer interferometer arm feeding the inner loop.
    D,
    /// Final arm towards D0.
    F,
    /// Gate input, in front of the rail-splitting PBS.
    In,
    Port1,
    Port2,
}

impl Arm {
    pub const ALL: [Arm; 9] = [
        Arm::S,
        Arm::A,
        Arm::B,
        Arm::C,
        Arm::D,
        Arm::F,
        Arm::In,
        Arm::Port1,
        Arm::Port2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arm::S => "S",
            Arm::A => "A",
            Arm::B => "B",
            Arm::C => "C",
            Arm::D => "D",
            Arm::F => "F",
            Arm::In => "In",
            Arm::Port1 => "Port1",
            Arm::Port2 => "Port2",
        }
    }

    pub fn parse(s: &str) -> Option<Arm> {
        Arm::ALL.into_iter().find(|a| a.name() == s)
    }
}

/// Detectors and absorbers. Amplitude routed here never evolves again.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sink {
    /// Alice's exhaust detector behind the outer PBS (`D_A`; `D3` of the nested
    /// interferometer).
    Da,
    /// Bob's detector, reached when his cavity fails to reflect.
    Db,
    /// Bob's blocking device.
    Block,
    /// Alice's channel-entrance block used by the weak-trace suppression rounds.
    AliceBlock,
    /// Wrong-polarization output of an inner recombination (never populated ideally).
    Stray,
}

impl Sink {
    pub const ALL: [Sink; 5] = [Sink::Da, Sink::Db, Sink::Block, Sink::AliceBlock, Sink::Stray];

    pub fn name(self) -> &'static str {
        match self {
            Sink::Da => "DA",
            Sink::Db => "DB",
            Sink::Block => "Block",
            Sink::AliceBlock => "AliceBlock",
            Sink::Stray => "Stray",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Path {
    Arm(Arm),
    Sink(Sink),
}

impl Path {
    pub fn is_sink(self) -> bool {
        matches!(self, Path::Sink(_))
    }
}

impl From<Arm> for Path {
    fn from(a: Arm) -> Self {
        Path::Arm(a)
    }
}

impl From<Sink> for Path {
    fn from(s: Sink) -> Self {
        Path::Sink(s)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Path::Arm(a) => f.write_str(a.name()),
            Path::Sink(s) => write!(f, "Sink{}", s.name()),
        }
    }
}

/// Photon polarization. `R ≡ H` and `L ≡ V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pol {
    #[serde(alias = "H")]
    R,
    #[serde(alias = "V")]
    L,
}

impl Pol {
    pub const BOTH: [Pol; 2] = [Pol::R, Pol::L];

    pub const H: Pol = Pol::R;
    pub const V: Pol = Pol::L;

    pub fn index(self) -> usize {
        match self {
            Pol::R => 0,
            Pol::L => 1,
        }
    }

    pub fn from_index(i: usize) -> Pol {
        if i == 0 {
            Pol::R
        } else {
            Pol::L
        }
    }

    pub fn linear_name(self) -> &'static str {
        match self {
            Pol::R => "H",
            Pol::L => "V",
        }
    }
}

/// Bob's control qubit: `Zero` reflects, `One` blocks. `Absent` is used by circuits
/// without a control qubit, where the channel end is a plain mirror.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bob {
    Absent,
    Zero,
    One,
}

impl Bob {
    pub const QUBIT: [Bob; 2] = [Bob::Zero, Bob::One];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisLabel {
    pub path: Path,
    pub pol: Pol,
    pub bob: Bob,
    /// Time bin of a sink record; always 0 for live labels.
    pub bin: u32,
}

impl BasisLabel {
    pub fn new(path: impl Into<Path>, pol: Pol, bob: Bob) -> Self {
        BasisLabel {
            path: path.into(),
            pol,
            bob,
            bin: 0,
        }
    }

    pub fn is_sink(&self) -> bool {
        self.path.is_sink()
    }

    pub fn with_path(self, path: impl Into<Path>) -> Self {
        BasisLabel {
            path: path.into(),
            ..self
        }
    }

    pub fn with_pol(self, pol: Pol) -> Self {
        BasisLabel { pol, ..self }
    }

    pub fn with_bob(self, bob: Bob) -> Self {
        BasisLabel { bob, ..self }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pol = match self.pol {
            Pol::R => "R",
            Pol::L => "L",
        };
        let bob = match self.bob {
            Bob::Absent => "",
            Bob::Zero => ",0",
            Bob::One => ",1",
        };
        if self.is_sink() {
            write!(f, "|{},{}{}@{}>", self.path, pol, bob, self.bin)
        } else {
            write!(f, "|{},{}{}>", self.path, pol, bob)
        }
    }
}

/// Live labels spanned by `arms × {R, L} × bobs`.
pub fn product_basis(arms: &[Arm], bobs: &[Bob]) -> Vec<BasisLabel> {
    let mut out = Vec::with_capacity(arms.len() * 2 * bobs.len());
    for &arm in arms {
        for pol in Pol::BOTH {
            for &bob in bobs {
                out.push(BasisLabel::new(arm, pol, bob));
            }
        }
    }
    out
}

/// Complex amplitudes over basis labels.
///
/// Live amplitudes and frozen sink records are stored separately; the running sink
/// norm is tracked so conservation checks stay O(live support).
/// Neumaier-compensated running sum; keeps the sink norm exact to rounding over
/// long runs with many small emissions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.comp *= f;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateVector {
    live: BTreeMap<BasisLabel, C64>,
    sinks: BTreeMap<BasisLabel, C64>,
    sink_norm: CompensatedSum,
    epoch: u32,
}

impl StateVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// The single basis state `|label⟩`.
    pub fn basis(label: BasisLabel) -> Self {
        let mut s = Self::new();
        s.add_amplitude(label, ONE);
        s
    }

    pub fn from_entries<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (BasisLabel, C64)>,
    {
        let mut s = Self::new();
        for (label, amp) in entries {
            s.add_amplitude(label, amp);
        }
        s
    }

    /// Adds `amp` to the amplitude at `label`.
    pub fn add_amplitude(&mut self, label: BasisLabel, amp: C64) {
        if label.is_sink() {
            let slot = self.sinks.entry(label).or_insert(ZERO);
            let before = slot.norm_sqr();
            *slot += amp;
            self.sink_norm.add(slot.norm_sqr() - before);
            self.epoch = self.epoch.max(label.bin + 1);
        } else {
            let label = BasisLabel { bin: 0, ..label };
            *self.live.entry(label).or_insert(ZERO) += amp;
        }
    }

    pub fn amplitude(&self, label: &BasisLabel) -> C64 {
        if label.is_sink() {
            self.sinks.get(label).copied().unwrap_or(ZERO)
        } else {
            self.live.get(label).copied().unwrap_or(ZERO)
        }
    }

    /// Live (non-sink) entries in label order.
    pub fn live(&self) -> impl Iterator<Item = (&BasisLabel, &C64)> {
        self.live.iter()
    }

    pub fn sinks(&self) -> impl Iterator<Item = (&BasisLabel, &C64)> {
        self.sinks.iter()
    }

    /// All entries: live first, then sink records.
    pub fn entries(&self) -> impl Iterator<Item = (&BasisLabel, &C64)> {
        self.live.iter().chain(self.sinks.iter())
    }

    pub fn len(&self) -> usize {
        self.live.len() + self.sinks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty() && self.sinks.is_empty()
    }

    /// Number of distinct sink time bins issued so far.
    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn live_norm_sqr(&self) -> f64 {
        self.live.values().fold(0.0, |acc, a| acc + a.norm_sqr())
    }

    pub fn sink_norm_sqr(&self) -> f64 {
        self.sink_norm.value()
    }

    /// Total squared norm, sinks included.
    pub fn norm_sqr(&self) -> f64 {
        self.live_norm_sqr() + self.sink_norm.value()
    }

    /// Probability collected by one kind of sink.
    pub fn sink_probability(&self, sink: Sink) -> f64 {
        self.sinks
            .iter()
            .filter(|(l, _)| l.path == Path::Sink(sink))
            .fold(0.0, |acc, (_, a)| acc + a.norm_sqr())
    }

    /// Probability found on one live arm.
    pub fn arm_probability(&self, arm: Arm) -> f64 {
        self.live
            .iter()
            .filter(|(l, _)| l.path == Path::Arm(arm))
            .fold(0.0, |acc, (_, a)| acc + a.norm_sqr())
    }

    pub fn scaled(mut self, c: C64) -> Self {
        for a in self.live.values_mut() {
            *a *= c;
        }
        for a in self.sinks.values_mut() {
            *a *= c;
        }
        self.sink_norm.scale(c.norm_sqr());
        self
    }

    /// Returns the state divided by its total norm. A zero state is returned unchanged.
    pub fn normalized(self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            self
        } else {
            self.scaled(C64::new(1.0 / n, 0.0))
        }
    }

    /// Coherent sum of live parts; sink records of `other` are appended in fresh bins.
    pub fn join_disjoint(mut self, other: &StateVector) -> Self {
        let shift = self.epoch;
        for (l, a) in &other.live {
            self.add_amplitude(*l, *a);
        }
        for (l, a) in &other.sinks {
            let moved = BasisLabel {
                bin: l.bin + shift,
                ..*l
            };
            self.add_amplitude(moved, *a);
        }
        self.epoch = shift + other.epoch;
        self
    }

    /// Keeps only the live part.
    pub fn live_part(&self) -> Self {
        StateVector {
            live: self.live.clone(),
            ..Default::default()
        }
    }

    /// Keeps the entries for which `keep` is true (sinks included in the test).
    pub fn filtered(&self, mut keep: impl FnMut(&BasisLabel) -> bool) -> Self {
        let mut out = StateVector::new();
        for (l, a) in self.entries() {
            if keep(l) {
                out.add_amplitude(*l, *a);
            }
        }
        out.epoch = out.epoch.max(self.epoch);
        out
    }

    /// Relabels live entries through `f` (sinks untouched). Amplitudes landing on the
    /// same label add coherently.
    pub fn map_live(&self, mut f: impl FnMut(BasisLabel) -> BasisLabel) -> Self {
        let mut out = StateVector {
            sinks: self.sinks.clone(),
            sink_norm: self.sink_norm,
            epoch: self.epoch,
            ..Default::default()
        };
        for (l, a) in &self.live {
            out.add_amplitude(f(*l), *a);
        }
        out
    }

    /// Drops live amplitudes with magnitude below `threshold`. Returns the squared
    /// norm removed.
    pub fn prune(&mut self, threshold: f64) -> f64 {
        let mut removed = 0.0;
        self.live.retain(|_, a| {
            if a.norm() < threshold {
                removed += a.norm_sqr();
                false
            } else {
                true
            }
        });
        removed
    }

    /// Moves live amplitude into the sinks of a single time bin. Used by the maps.
    fn emit_sink(&mut self, label: BasisLabel, amp: C64, bin: u32) {
        self.add_amplitude(BasisLabel { bin, ..label }, amp);
    }
}

/// `⟨a|b⟩`: conjugate-linear in `a`, linear in `b`. Sink records contribute only when
/// both states carry the same bin.
pub fn inner(a: &StateVector, b: &StateVector) -> C64 {
    let (small, large, conj_small) = if a.len() <= b.len() {
        (a, b, true)
    } else {
        (b, a, false)
    };
    let mut acc = ZERO;
    for (l, x) in small.entries() {
        let y = large.amplitude(l);
        if y != ZERO {
            acc += if conj_small { x.conj() * y } else { y.conj() * *x };
        }
    }
    acc
}

/// Distance `‖a − b‖` over live and sink entries.
pub fn distance(a: &StateVector, b: &StateVector) -> f64 {
    let labels: BTreeSet<&BasisLabel> = a.entries().chain(b.entries()).map(|(l, _)| l).collect();
    labels
        .into_iter()
        .map(|l| (a.amplitude(l) - b.amplitude(l)).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    /// `M†M = I` on the declared domain, no sink rows.
    Unitary,
    /// Columns orthonormal once sink rows are included.
    IsometryToSinks,
}

impl MapKind {
    fn name(self) -> &'static str {
        match self {
            MapKind::Unitary => "unitary",
            MapKind::IsometryToSinks => "isometry-to-sinks",
        }
    }
}

/// Sparse column-stored linear map over basis labels.
///
/// Sink rows are written with bin 0 and re-stamped with the state's next bin when the
/// map is applied. Every application of a map with sink rows opens a new bin, whatever
/// the input, so equal schedules stamp equal bins.
#[derive(Clone, Debug)]
pub struct LinearMap {
    kind: MapKind,
    columns: HashMap<BasisLabel, Vec<(BasisLabel, C64)>>,
    /// Live rows only, for adjoint (backward) application.
    rows: HashMap<BasisLabel, Vec<(BasisLabel, C64)>>,
    emits: bool,
}

impl LinearMap {
    /// Builds and audits a map. Zero entries are dropped.
    pub fn new<I>(kind: MapKind, columns: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BasisLabel, Vec<(BasisLabel, C64)>)>,
    {
        let mut cols: HashMap<BasisLabel, Vec<(BasisLabel, C64)>> = HashMap::new();
        for (col, entries) in columns {
            let merged = cols.entry(col).or_default();
            for (row, v) in entries {
                if v == ZERO {
                    continue;
                }
                let row = BasisLabel { bin: 0, ..row };
                match merged.iter_mut().find(|(r, _)| *r == row) {
                    Some((_, x)) => *x += v,
                    None => merged.push((row, v)),
                }
            }
        }
        let mut rows: HashMap<BasisLabel, Vec<(BasisLabel, C64)>> = HashMap::new();
        for (col, entries) in &cols {
            for (row, v) in entries {
                if !row.is_sink() {
                    rows.entry(*row).or_default().push((*col, *v));
                }
            }
        }
        let emits = cols.values().flatten().any(|(r, _)| r.is_sink());
        let map = LinearMap {
            kind,
            columns: cols,
            rows,
            emits,
        };
        map.audit()?;
        Ok(map)
    }

    /// Identity on `domain`.
    pub fn identity(domain: &[BasisLabel]) -> Self {
        Self::local(domain, |_| None).expect("identity is unitary")
    }

    /// Builds a map on `domain` from a per-column rule; `None` means identity on that
    /// column. The kind is inferred from whether any sink rows appear.
    pub fn local<F>(domain: &[BasisLabel], mut rule: F) -> Result<Self>
    where
        F: FnMut(&BasisLabel) -> Option<Vec<(BasisLabel, C64)>>,
    {
        let mut any_sink = false;
        let cols: Vec<_> = domain
            .iter()
            .map(|l| {
                let col = rule(l).unwrap_or_else(|| vec![(*l, ONE)]);
                any_sink |= col.iter().any(|(r, _)| r.is_sink());
                (*l, col)
            })
            .collect();
        let kind = if any_sink {
            MapKind::IsometryToSinks
        } else {
            MapKind::Unitary
        };
        Self::new(kind, cols)
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn domain(&self) -> impl Iterator<Item = &BasisLabel> {
        self.columns.keys()
    }

    pub fn entry(&self, row: &BasisLabel, col: &BasisLabel) -> C64 {
        self.columns
            .get(col)
            .and_then(|c| c.iter().find(|(r, _)| r == row).map(|(_, v)| *v))
            .unwrap_or(ZERO)
    }

    /// Largest deviation of `M†M` from the identity on the domain.
    pub fn isometry_deviation(&self) -> f64 {
        let cols: Vec<_> = self.columns.iter().collect();
        let mut worst: f64 = 0.0;
        for (i, (_, ci)) in cols.iter().enumerate() {
            for (j, (_, cj)) in cols.iter().enumerate().skip(i) {
                let mut dot = ZERO;
                for (ri, vi) in ci.iter() {
                    for (rj, vj) in cj.iter() {
                        if ri == rj {
                            dot += vi.conj() * vj;
                        }
                    }
                }
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    fn audit(&self) -> Result<()> {
        let has_sink_rows = self
            .columns
            .values()
            .any(|c| c.iter().any(|(r, _)| r.is_sink()));
        let deviation = self.isometry_deviation();
        if deviation > AUDIT_TOL || (self.kind == MapKind::Unitary && has_sink_rows) {
            return Err(Error::NotIsometric {
                kind: self.kind.name(),
                deviation,
            });
        }
        Ok(())
    }

    /// `map · s`. Sink records of `s` are carried over untouched.
    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        self.apply_owned(s.clone())
    }

    /// `map · s`, consuming `s` so sink records are moved rather than copied.
    pub fn apply_owned(&self, s: StateVector) -> Result<StateVector> {
        let StateVector {
            live,
            sinks,
            sink_norm,
            epoch,
        } = s;
        let mut out = StateVector {
            live: BTreeMap::new(),
            sinks,
            sink_norm,
            epoch,
        };
        let bin = epoch;
        for (label, amp) in live {
            let col = self
                .columns
                .get(&label)
                .ok_or(Error::LabelMismatch(label))?;
            for (row, v) in col {
                if row.is_sink() {
                    out.emit_sink(*row, v * amp, bin);
                } else {
                    *out.live.entry(*row).or_insert(ZERO) += v * amp;
                }
            }
        }
        if self.emits {
            out.epoch = bin + 1;
        }
        Ok(out)
    }

    /// `(P_live · map)† · s` on the live part of `s`: the backward (adjoint) step. Sink
    /// rows have no adjoint image, so backward states never carry sink amplitude.
    pub fn apply_adjoint(&self, s: &StateVector) -> Result<StateVector> {
        let mut out = StateVector::new();
        for (label, amp) in &s.live {
            if let Some(entries) = self.rows.get(label) {
                for (col, v) in entries {
                    out.add_amplitude(*col, v.conj() * amp);
                }
            } else if !self.columns.contains_key(label) {
                return Err(Error::LabelMismatch(*label));
            }
        }
        Ok(out)
    }
}

/// Product projector `paths ⊗ pols ⊗ bobs`; `None` on a factor means identity there.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<BTreeSet<Path>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pols: Option<BTreeSet<Pol>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bobs: Option<BTreeSet<Bob>>,
}

impl Projector {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Projector onto one arm, identity on polarization and control.
    pub fn arm(arm: Arm) -> Self {
        Projector {
            paths: Some([Path::Arm(arm)].into()),
            ..Default::default()
        }
    }

    pub fn arms(arms: &[Arm]) -> Self {
        Projector {
            paths: Some(arms.iter().map(|a| Path::Arm(*a)).collect()),
            ..Default::default()
        }
    }

    /// Arm ⊗ polarization, e.g. `S ⊗ H`.
    pub fn arm_pol(arm: Arm, pol: Pol) -> Self {
        Projector {
            paths: Some([Path::Arm(arm)].into()),
            pols: Some([pol].into()),
            bobs: None,
        }
    }

    pub fn with_bobs(mut self, bobs: &[Bob]) -> Self {
        self.bobs = Some(bobs.iter().copied().collect());
        self
    }

    pub fn contains(&self, l: &BasisLabel) -> bool {
        self.paths.as_ref().is_none_or(|p| p.contains(&l.path))
            && self.pols.as_ref().is_none_or(|p| p.contains(&l.pol))
            && self.bobs.as_ref().is_none_or(|b| b.contains(&l.bob))
    }

    /// Projector onto the complement within the same product structure is not a
    /// product in general, so only the membership test is exposed.
    pub fn apply(&self, s: &StateVector) -> StateVector {
        s.filtered(|l| self.contains(l))
    }

    /// Compact display like `S⊗H` or `C⊗I`.
    pub fn describe(&self) -> String {
        let paths = match &self.paths {
            None => "I".to_string(),
            Some(p) => p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("+"),
        };
        let pols = match &self.pols {
            None => "I".to_string(),
            Some(p) => p.iter().map(|x| x.linear_name()).collect::<Vec<_>>().join("+"),
        };
        match &self.bobs {
            None => format!("{paths}⊗{pols}"),
            Some(b) => format!(
                "{paths}⊗{pols}⊗{}",
                b.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join("+")
            ),
        }
    }
}

/// `(p·s, ‖p·s‖²)`. Renormalization is left to the caller.
pub fn project(p: &Projector, s: &StateVector) -> (StateVector, f64) {
    let out = p.apply(s);
    let prob = out.norm_sqr();
    (out, prob)
}

pub fn apply(map: &LinearMap, s: &StateVector) -> Result<StateVector> {
    map.apply(s)
}

/// A pure polarization state `r|R⟩ + l|L⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polarization {
    pub r: C64,
    pub l: C64,
}

impl Polarization {
    pub const R: Polarization = Polarization { r: ONE, l: ZERO };
    pub const L: Polarization = Polarization { r: ZERO, l: ONE };

    pub fn new(r: C64, l: C64) -> Self {
        Polarization { r, l }
    }

    pub fn amp(&self, pol: Pol) -> C64 {
        match pol {
            Pol::R => self.r,
            Pol::L => self.l,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.r.norm_sqr() + self.l.norm_sqr()
    }
}

/// Fidelity of the photon polarization on `paths` with `target`:
/// `Σ_{path, bob} |⟨target| s(path, ·, bob)⟩|²`.
///
/// For a normalized `s` this is the loss-inclusive fidelity: amplitude outside
/// `paths` (including sinks) scores zero. When the photon sits on a single path in a
/// product state it reduces to `|⟨target|s_pol⟩|²`.
pub fn fidelity(target: &Polarization, s: &StateVector, paths: &[Path]) -> Result<f64> {
    let n = target.norm_sqr();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n));
    }
    let mut overlaps: BTreeMap<(Path, Bob, u32), C64> = BTreeMap::new();
    for (l, a) in s.entries() {
        if paths.contains(&l.path) {
            *overlaps.entry((l.path, l.bob, l.bin)).or_insert(ZERO) += target.amp(l.pol).conj() * a;
        }
    }
    let f: f64 = overlaps.values().fold(0.0, |acc, o| acc + o.norm_sqr());
    Ok(f.clamp(0.0, 1.0))
}

/// Fidelity conditioned on the photon being found on `paths`.
pub fn postselected_fidelity(target: &Polarization, s: &StateVector, paths: &[Path]) -> Result<f64> {
    let f = fidelity(target, s, paths)?;
    let p: f64 = s
        .entries()
        .filter(|(l, _)| paths.contains(&l.path))
        .fold(0.0, |acc, (_, a)| acc + a.norm_sqr());
    Ok(if p > 0.0 { (f / p).clamp(0.0, 1.0) } else { 0.0 })
}
