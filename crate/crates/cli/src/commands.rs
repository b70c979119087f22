//! One function per subcommand. Each takes a resolved configuration.

use std::io::Write;
use std::path::{Path, PathBuf};

use counterport_core::analysis::{paradox_report, weak_trace_map, BoundaryPair, BuiltinFamily, Family};
use counterport_core::counterport::{sample_bloch, sweep as run_sweep, Counterporter, FidelityMode};
use counterport_core::export::{grid_to_csv, grid_to_json, grid_to_svg, weak_map_to_csv};
use counterport_core::optics::{build_paradox_circuit, build_paradox_circuit_av};

use crate::config::{
    BoundaryChoice, CounterportConfig, FamilySource, HistoriesConfig, ParadoxConfig, SweepConfig, WeakValuesConfig,
};
use crate::records::{CounterportRecord, FamilyRecord, HistoriesReport};
use crate::CliError;

/// Fidelity that beats any classical measure-and-prepare strategy.
pub const CLASSICAL_LIMIT: f64 = 2.0 / 3.0;

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

/// Writes `text` to `path`, or to `out` when no path is given.
fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            write_file(p, text)?;
            writeln!(out, "wrote {}", p.display()).map_err(stdout_err)
        }
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

pub fn sweep(cfg: &SweepConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let sample = sample_bloch(cfg.samples, cfg.scheme)?;
    let grid = run_sweep(&cfg.range, &cfg.template, &sample, cfg.mode)?;
    let mode = match cfg.mode {
        FidelityMode::LossInclusive => "loss-inclusive",
        FidelityMode::PostSelected => "post-selected",
    };
    let title = format!(
        "Average {mode} fidelity, eps_reflect = {}, eps_block = {}, {} qubits",
        cfg.template.eps_reflect, cfg.template.eps_block, cfg.samples
    );
    let files = [
        (".csv", grid_to_csv(&grid)),
        (".json", grid_to_json(&grid)),
        (".svg", grid_to_svg(&grid, &title)),
    ];
    for (ext, text) in &files {
        let p = with_suffix(&cfg.out, ext);
        write_file(&p, text)?;
        writeln!(out, "wrote {}", p.display()).map_err(stdout_err)?;
    }
    let above = grid.cells.iter().filter(|c| c.avg_fidelity > CLASSICAL_LIMIT).count();
    let best = grid
        .cells
        .iter()
        .max_by(|a, b| a.avg_fidelity.total_cmp(&b.avg_fidelity))
        .expect("a validated range has at least one cell");
    writeln!(
        out,
        "{mode} fidelity: best {:.6} at (M, N) = ({}, {}); {above} of {} cells above 2/3",
        best.avg_fidelity,
        best.m,
        best.n,
        grid.cells.len()
    )
    .map_err(stdout_err)
}

pub fn counterport(cfg: &CounterportConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let r = Counterporter::new(&cfg.protocol)?.run(&cfg.bob, true)?;
    let record = CounterportRecord::new(&cfg.protocol, &cfg.bob, &r);
    let mut text = serde_json::to_string_pretty(&record).expect("records serialize");
    text.push('\n');
    emit(cfg.out.as_deref(), &text, out)
}

pub fn paradox(cfg: &ParadoxConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let report = paradox_report(cfg.m, cfg.n)?;
    out.write_all(report.to_table().as_bytes()).map_err(stdout_err)?;
    if let Some(p) = &cfg.json {
        let mut text = serde_json::to_string_pretty(&report).expect("reports serialize");
        text.push('\n');
        write_file(p, &text)?;
        writeln!(out, "wrote {}", p.display()).map_err(stdout_err)?;
    }
    Ok(())
}

pub fn weakvalues(cfg: &WeakValuesConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let c = build_paradox_circuit_av(cfg.m, cfg.n, cfg.av_rounds)?;
    let b = match cfg.boundaries {
        BoundaryChoice::EndToEnd => BoundaryPair::end_to_end(&c)?,
        BoundaryChoice::PerCycle { cycle, post } => BoundaryPair::per_cycle(&c, cycle, post)?,
    };
    let map = weak_trace_map(&c, &b)?;
    emit(cfg.out.as_deref(), &weak_map_to_csv(&map), out)
}

pub fn histories(cfg: &HistoriesConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let c = build_paradox_circuit(cfg.m, cfg.n)?;
    let families: Vec<Family> = match &cfg.source {
        FamilySource::Builtin(list) => list
            .iter()
            .map(|f: &BuiltinFamily| f.build(&c, cfg.n))
            .collect::<Result<_, _>>()?,
        FamilySource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            vec![Family::from_json(&text)?]
        }
    };
    let report = HistoriesReport {
        m: cfg.m,
        n: cfg.n,
        families: families
            .iter()
            .map(|f| FamilyRecord::evaluate(f, &c))
            .collect::<Result<_, _>>()?,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("reports serialize");
    text.push('\n');
    emit(cfg.out.as_deref(), &text, out)
}
