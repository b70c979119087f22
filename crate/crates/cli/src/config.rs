//! Run configuration.
//!
//! Each subcommand reads its optional table from a TOML file (`--config`) and then
//! applies its command-line flags on top: flags win over the file, the file wins
//! over the defaults. Unknown keys are rejected. Keys are the flag names with `_`
//! in place of `-`:
//!
//! ```toml
//! [sweep]
//! m = "1:20"
//! n = "1:20"
//! eps_reflect = 0.10
//! eps_block = 0.05
//! samples = 100
//! scheme = "fibonacci"
//! out = "out/sweep"
//!
//! [counterport]
//! alpha = "0.6"
//! beta = "0.8i"
//! ```

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Deserializer};

use counterport_core::analysis::{BuiltinFamily, CyclePost};
use counterport_core::counterport::{FidelityMode, GridRange, SampleScheme};
use counterport_core::cqze::{BobQubit, ProtocolConfig};
use counterport_core::optics::BlockScope;
use counterport_core::Complex64;

use crate::CliError;

pub const DEFAULT_EPS_REFLECT: f64 = 0.10;
pub const DEFAULT_EPS_BLOCK: f64 = 0.05;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_SEED: u64 = 1;
/// Accepted deviation of `|α|² + |β|²` from 1 before the input is renormalized.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// Inclusive range `lo:hi`, or a single value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span(pub RangeInclusive<usize>);

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
        let (lo, hi) = match s.split_once(':') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let a = parse(s)?;
                (a, a)
            }
        };
        if lo < 1 || hi < lo {
            return Err(format!("`{s}` is not a range `lo:hi` with 1 <= lo <= hi"));
        }
        Ok(Span(lo..=hi))
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::One(n) => Span::from_str(&n.to_string()),
            Raw::Text(s) => Span::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Complex amplitude written as `0.6`, `0.8i` or `0.6+0.8i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Amp(pub Complex64);

impl FromStr for Amp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Complex64::from_str(s.trim())
            .map(Amp)
            .map_err(|e| format!("`{s}` is not a complex number: {e}"))
    }
}

impl<'de> Deserialize<'de> for Amp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Real(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Real(x) => Ok(Amp(Complex64::new(x, 0.0))),
            Raw::Text(s) => Amp::from_str(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Fibonacci,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fidelity {
    LossInclusive,
    PostSelected,
}

impl From<Fidelity> for FidelityMode {
    fn from(f: Fidelity) -> Self {
        match f {
            Fidelity::LossInclusive => FidelityMode::LossInclusive,
            Fidelity::PostSelected => FidelityMode::PostSelected,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    PerInnerCycle,
    PerOuterCycle,
}

impl From<Scope> for BlockScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::PerInnerCycle => BlockScope::PerInnerCycle,
            Scope::PerOuterCycle => BlockScope::PerOuterCycle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundaries {
    /// Source `S⊗H` to detector D0.
    EndToEnd,
    /// One outer cycle, post-selected on `S⊗H`.
    PerCycle,
    /// One outer cycle, post-selected on the exact state leaving on S.
    PerCycleExact,
}

/// Tables of the configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub sweep: Option<SweepArgs>,
    pub counterport: Option<CounterportArgs>,
    pub paradox: Option<ParadoxArgs>,
    pub weakvalues: Option<WeakValuesArgs>,
    pub histories: Option<HistoriesArgs>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Error coefficients from flags over file; `ideal` zeroes any coefficient not given
/// as a flag.
fn resolve_eps(
    flag: (Option<f64>, Option<f64>, bool),
    file: (Option<f64>, Option<f64>, bool),
) -> Result<(f64, f64), CliError> {
    if file.2 && (file.0.is_some() || file.1.is_some()) {
        return Err(config_err("`ideal = true` cannot be combined with eps values in the same table"));
    }
    let zero = (flag.2 || file.2).then_some(0.0);
    Ok((
        flag.0.or(zero).or(file.0).unwrap_or(DEFAULT_EPS_REFLECT),
        flag.1.or(zero).or(file.1).unwrap_or(DEFAULT_EPS_BLOCK),
    ))
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// Outer cycles, `lo:hi` or a single value [default: 1:20]
    #[arg(long)]
    pub m: Option<Span>,
    /// Inner cycles per outer cycle, `lo:hi` or a single value [default: 1:20]
    #[arg(long)]
    pub n: Option<Span>,
    /// Loss coefficient when Bob reflects [default: 0.10]
    #[arg(long, conflicts_with = "ideal")]
    pub eps_reflect: Option<f64>,
    /// Erroneous-reflection coefficient when Bob blocks [default: 0.05]
    #[arg(long, conflicts_with = "ideal")]
    pub eps_block: Option<f64>,
    /// Error-free channel (both coefficients 0)
    #[arg(long)]
    #[serde(default)]
    pub ideal: bool,
    /// Number of Bloch-sphere qubits averaged per cell [default: 100]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Bloch-sphere sampling scheme [default: fibonacci]
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    /// Seed of the uniform scheme [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Channel-block suppression rounds per outer cycle [default: 0]
    #[arg(long)]
    pub av_rounds: Option<usize>,
    /// When the blocking error acts [default: per-inner-cycle]
    #[arg(long, value_enum)]
    pub block_scope: Option<Scope>,
    /// Fidelity reported as `avg_fidelity` [default: loss-inclusive]
    #[arg(long, value_enum)]
    pub fidelity: Option<Fidelity>,
    /// Output prefix; writes PREFIX.csv, PREFIX.json and PREFIX.svg [default: sweep]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub range: GridRange,
    pub template: ProtocolConfig,
    pub samples: usize,
    pub scheme: SampleScheme,
    pub mode: FidelityMode,
    pub out: PathBuf,
}

impl SweepArgs {
    pub fn resolve(self, file: Option<SweepArgs>) -> Result<SweepConfig, CliError> {
        let f = file.unwrap_or_default();
        let (eps_reflect, eps_block) = resolve_eps(
            (self.eps_reflect, self.eps_block, self.ideal),
            (f.eps_reflect, f.eps_block, f.ideal),
        )?;
        let m = self.m.or(f.m).unwrap_or(Span(1..=20)).0;
        let n = self.n.or(f.n).unwrap_or(Span(1..=20)).0;
        let template = ProtocolConfig {
            m: *m.start(),
            n: *n.start(),
            eps_reflect,
            eps_block,
            av_rounds: self.av_rounds.or(f.av_rounds).unwrap_or(0),
            block_scope: self.block_scope.or(f.block_scope).map_or(BlockScope::default(), Into::into),
        };
        template.validate()?;
        let samples = self.samples.or(f.samples).unwrap_or(DEFAULT_SAMPLES);
        if samples < 1 {
            return Err(config_err("samples must be at least 1"));
        }
        let scheme = match self.scheme.or(f.scheme).unwrap_or(Scheme::Fibonacci) {
            Scheme::Fibonacci => SampleScheme::Fibonacci,
            Scheme::Uniform => SampleScheme::SeededUniform {
                seed: self.seed.or(f.seed).unwrap_or(DEFAULT_SEED),
            },
        };
        Ok(SweepConfig {
            range: GridRange { m, n },
            template,
            samples,
            scheme,
            mode: self.fidelity.or(f.fidelity).map_or(FidelityMode::default(), Into::into),
            out: self.out.or(f.out).unwrap_or_else(|| PathBuf::from("sweep")),
        })
    }
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterportArgs {
    /// Amplitude of Bob's |0⟩, e.g. `0.6` or `0.6+0.2i`
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<Amp>,
    /// Amplitude of Bob's |1⟩, e.g. `0.8` or `-0.8i`
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<Amp>,
    /// Outer cycles [default: 10]
    #[arg(long)]
    pub m: Option<usize>,
    /// Inner cycles per outer cycle [default: 20]
    #[arg(long)]
    pub n: Option<usize>,
    /// Loss coefficient when Bob reflects [default: 0.10]
    #[arg(long, conflicts_with = "ideal")]
    pub eps_reflect: Option<f64>,
    /// Erroneous-reflection coefficient when Bob blocks [default: 0.05]
    #[arg(long, conflicts_with = "ideal")]
    pub eps_block: Option<f64>,
    /// Error-free channel (both coefficients 0)
    #[arg(long)]
    #[serde(default)]
    pub ideal: bool,
    /// Channel-block suppression rounds per outer cycle [default: 0]
    #[arg(long)]
    pub av_rounds: Option<usize>,
    /// When the blocking error acts [default: per-inner-cycle]
    #[arg(long, value_enum)]
    pub block_scope: Option<Scope>,
    /// JSON output path [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterportConfig {
    pub bob: BobQubit,
    pub protocol: ProtocolConfig,
    pub out: Option<PathBuf>,
}

impl CounterportArgs {
    pub fn resolve(self, file: Option<CounterportArgs>) -> Result<CounterportConfig, CliError> {
        let f = file.unwrap_or_default();
        let (eps_reflect, eps_block) = resolve_eps(
            (self.eps_reflect, self.eps_block, self.ideal),
            (f.eps_reflect, f.eps_block, f.ideal),
        )?;
        let (Some(alpha), Some(beta)) = (self.alpha.or(f.alpha), self.beta.or(f.beta)) else {
            return Err(config_err("both --alpha and --beta are required"));
        };
        let norm = alpha.0.norm_sqr() + beta.0.norm_sqr();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(counterport_core::Error::NotNormalized(norm).into());
        }
        let s = norm.sqrt();
        let bob = BobQubit::new(alpha.0 / s, beta.0 / s)?;
        let protocol = ProtocolConfig {
            m: self.m.or(f.m).unwrap_or(10),
            n: self.n.or(f.n).unwrap_or(20),
            eps_reflect,
            eps_block,
            av_rounds: self.av_rounds.or(f.av_rounds).unwrap_or(0),
            block_scope: self.block_scope.or(f.block_scope).map_or(BlockScope::default(), Into::into),
        };
        protocol.validate()?;
        Ok(CounterportConfig {
            bob,
            protocol,
            out: self.out.or(f.out),
        })
    }
}

fn cycles(m: Option<usize>, n: Option<usize>) -> Result<(usize, usize), CliError> {
    let (m, n) = (m.unwrap_or(2), n.unwrap_or(2));
    if m < 1 || n < 1 {
        return Err(config_err(format!("need M >= 1 and N >= 1 (got M = {m}, N = {n})")));
    }
    Ok((m, n))
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParadoxArgs {
    /// Outer cycles of the nested interferometer [default: 2]
    #[arg(long)]
    pub m: Option<usize>,
    /// Inner cycles per outer cycle [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Also write the report as JSON to this path
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParadoxConfig {
    pub m: usize,
    pub n: usize,
    pub json: Option<PathBuf>,
}

impl ParadoxArgs {
    pub fn resolve(self, file: Option<ParadoxArgs>) -> Result<ParadoxConfig, CliError> {
        let f = file.unwrap_or_default();
        let (m, n) = cycles(self.m.or(f.m), self.n.or(f.n))?;
        Ok(ParadoxConfig {
            m,
            n,
            json: self.json.or(f.json),
        })
    }
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakValuesArgs {
    /// Outer cycles of the nested interferometer [default: 2]
    #[arg(long)]
    pub m: Option<usize>,
    /// Inner cycles per outer cycle [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Channel-block suppression rounds per outer cycle [default: 0]
    #[arg(long)]
    pub av_rounds: Option<usize>,
    /// Pre- and post-selection [default: end-to-end]
    #[arg(long, value_enum)]
    pub boundaries: Option<Boundaries>,
    /// Outer cycle (from 0) for the per-cycle boundaries [default: 0]
    #[arg(long)]
    pub cycle: Option<usize>,
    /// CSV output path [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryChoice {
    EndToEnd,
    PerCycle { cycle: usize, post: CyclePost },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakValuesConfig {
    pub m: usize,
    pub n: usize,
    pub av_rounds: usize,
    pub boundaries: BoundaryChoice,
    pub out: Option<PathBuf>,
}

impl WeakValuesArgs {
    pub fn resolve(self, file: Option<WeakValuesArgs>) -> Result<WeakValuesConfig, CliError> {
        let f = file.unwrap_or_default();
        let (m, n) = cycles(self.m.or(f.m), self.n.or(f.n))?;
        let cycle = self.cycle.or(f.cycle);
        let boundaries = match self.boundaries.or(f.boundaries).unwrap_or(Boundaries::EndToEnd) {
            Boundaries::EndToEnd if cycle.is_some() => {
                return Err(config_err("`cycle` only applies to per-cycle boundaries"));
            }
            Boundaries::EndToEnd => BoundaryChoice::EndToEnd,
            b => {
                let cycle = cycle.unwrap_or(0);
                if cycle >= m {
                    return Err(config_err(format!("cycle {cycle} does not exist for M = {m}")));
                }
                let post = if b == Boundaries::PerCycle {
                    CyclePost::H
                } else {
                    CyclePost::Exact
                };
                BoundaryChoice::PerCycle { cycle, post }
            }
        };
        Ok(WeakValuesConfig {
            m,
            n,
            av_rounds: self.av_rounds.or(f.av_rounds).unwrap_or(0),
            boundaries,
            out: self.out.or(f.out),
        })
    }
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoriesArgs {
    /// Outer cycles of the nested interferometer [default: 2]
    #[arg(long)]
    pub m: Option<usize>,
    /// Inner cycles per outer cycle [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Built-in families by number, e.g. `7,10` [default: 7,8,9,10]
    #[arg(long = "family", value_delimiter = ',')]
    pub families: Option<Vec<u8>>,
    /// Family in JSON form, evaluated instead of the built-in ones
    #[arg(long)]
    pub family_file: Option<PathBuf>,
    /// JSON output path [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FamilySource {
    Builtin(Vec<BuiltinFamily>),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoriesConfig {
    pub m: usize,
    pub n: usize,
    pub source: FamilySource,
    pub out: Option<PathBuf>,
}

impl HistoriesArgs {
    pub fn resolve(self, file: Option<HistoriesArgs>) -> Result<HistoriesConfig, CliError> {
        let f = file.unwrap_or_default();
        let (m, n) = cycles(self.m.or(f.m), self.n.or(f.n))?;
        // A family given on the command line replaces one given in the file.
        let (families, family_file) = if self.families.is_some() || self.family_file.is_some() {
            (self.families, self.family_file)
        } else {
            (f.families, f.family_file)
        };
        let source = match (families, family_file) {
            (Some(_), Some(_)) => return Err(config_err("give either built-in families or a family file, not both")),
            (None, Some(path)) => FamilySource::File(path),
            (numbers, None) => {
                let numbers = numbers.unwrap_or_else(|| BuiltinFamily::ALL.iter().map(|f| f.number()).collect());
                if numbers.is_empty() {
                    return Err(config_err("no family selected"));
                }
                let families = numbers
                    .iter()
                    .map(|&k| {
                        BuiltinFamily::from_number(k)
                            .ok_or_else(|| config_err(format!("unknown family {k}; the built-in families are 7, 8, 9 and 10")))
                    })
                    .collect::<Result<_, _>>()?;
                FamilySource::Builtin(families)
            }
        };
        Ok(HistoriesConfig {
            m,
            n,
            source,
            out: self.out.or(f.out),
        })
    }
}
