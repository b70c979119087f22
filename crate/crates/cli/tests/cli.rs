use std::path::Path;
use std::process::{Command, Output};

use counterport_cli::records::{CounterportRecord, HistoriesReport};
use counterport_core::analysis::{paradox_report, BuiltinFamily, ParadoxReport};
use counterport_core::counterport::{counterport, FidelityGrid};
use counterport_core::cqze::{BobQubit, ProtocolConfig};
use counterport_core::export::{grid_from_csv, grid_from_json, weak_map_from_csv};
use counterport_core::optics::build_paradox_circuit;
use counterport_core::qstate::Arm;
use counterport_core::Complex64;

fn counterport_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_counterport"))
        .args(args)
        .output()
        .expect("the binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = counterport_bin(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    counterport_bin(args).status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn sweep_grid(dir: &Path, name: &str, extra: &[&str]) -> FidelityGrid {
    let prefix = dir.join(name);
    let mut args = vec!["sweep", "--out", path_str(&prefix)];
    args.extend_from_slice(extra);
    ok(&args);
    grid_from_json(&read(dir.join(format!("{name}.json")))).unwrap()
}

#[test]
fn sweeps_are_deterministic_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--m", "1:3", "--n", "1:4", "--samples", "8"];
    let grid = sweep_grid(dir.path(), "a", &args);
    sweep_grid(dir.path(), "nested/b", &args);
    for ext in ["csv", "json", "svg"] {
        let a = std::fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("nested/b.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext} differs between identical runs");
    }
    assert_eq!(grid.cells.len(), 12);
    assert_eq!(grid.sample_count, 8);
    let rows = grid_from_csv(&read(dir.path().join("a.csv"))).unwrap();
    for (r, c) in rows.iter().zip(&grid.cells) {
        assert_eq!((r.m, r.n), (c.m, c.n));
        assert_eq!(r.avg_fidelity.to_bits(), c.avg_fidelity.to_bits());
        assert_eq!(r.avg_success_prob.to_bits(), c.avg_success_prob.to_bits());
    }
    let svg = read(dir.path().join("a.svg"));
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[sweep]\nm = \"2:3\"\nn = 2\nsamples = 4\neps_reflect = 0.3\nscheme = \"uniform\"\nseed = 9\n",
    )
    .unwrap();
    let grid = sweep_grid(dir.path(), "s", &["--config", path_str(&cfg), "--eps-reflect", "0"]);
    assert_eq!(grid.m_values, vec![2, 3]);
    assert_eq!(grid.n_values, vec![2]);
    assert_eq!(grid.sample_count, 4);
    assert_eq!(grid.eps_reflect, 0.0);
    assert_eq!(grid.eps_block, 0.05);
    assert_eq!(grid.scheme, counterport_core::counterport::SampleScheme::SeededUniform { seed: 9 });
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[sweep]\nsample = 3\n").unwrap();
    assert_eq!(code(&["--config", path_str(&cfg), "sweep"]), 2);
    std::fs::write(&cfg, "[sweep]\nideal = true\neps_block = 0.1\n").unwrap();
    assert_eq!(code(&["--config", path_str(&cfg), "sweep"]), 2);
    assert_eq!(code(&["--config", path_str(&dir.path().join("missing.toml")), "paradox"]), 2);
    assert_eq!(code(&["sweep", "--m", "0:3"]), 2);
    assert_eq!(code(&["sweep", "--eps-reflect", "1.5", "--m", "1", "--n", "1"]), 2);
    assert_eq!(code(&["sweep", "--ideal", "--eps-block", "0.1"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
}

#[test]
fn counterport_rejects_unnormalized_qubits() {
    assert_eq!(code(&["counterport", "--alpha", "0.6", "--beta", "0.6"]), 2);
    assert_eq!(code(&["counterport", "--alpha", "1"]), 2);
    assert_eq!(code(&["counterport", "--alpha", "one", "--beta", "0"]), 2);
}

#[test]
fn counterport_reports_match_the_library() {
    let text = ok(&["counterport", "--alpha", "0.6", "--beta", "-0.8i", "--m", "4", "--n", "9"]);
    let record: CounterportRecord = serde_json::from_str(&text).unwrap();
    let bob = BobQubit::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, -0.8)).unwrap();
    let cfg = ProtocolConfig::ideal(4, 9).with_errors(0.10, 0.05);
    let r = counterport(&bob, &cfg).unwrap();
    assert_eq!(record.config, cfg);
    assert_eq!(record.fidelity, r.fidelity);
    assert_eq!(record.fidelity_postselected, r.fidelity_postselected);
    assert_eq!(record.p_port1, r.p_port1);
    let stages: Vec<&str> = record.stages.iter().map(|s| s.stage.as_str()).collect();
    assert_eq!(
        stages,
        ["input", "round 1 gate", "round 1 hadamards", "round 2 gate", "round 2 corrections"]
    );
    assert!((record.p_port1 + record.p_port2 + record.p_lost - 1.0).abs() < 1e-12);
    let lost: f64 = record.losses.iter().map(|l| l.probability).sum();
    assert!((lost - record.p_lost).abs() < 1e-12);
    assert_eq!(serde_json::from_str::<CounterportRecord>(&serde_json::to_string(&record).unwrap()).unwrap(), record);
}

#[test]
fn ideal_channels_improve_with_more_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let cell = |m: &str, name: &str| {
        sweep_grid(dir.path(), name, &["--ideal", "--m", m, "--n", m, "--samples", "20"]).cells[0].clone()
    };
    let (small, large) = (cell("2", "small"), cell("20", "large"));
    assert!(large.avg_fidelity > small.avg_fidelity, "{large:?} vs {small:?}");
    assert_eq!(read(dir.path().join("small.csv")).lines().count(), 2);
}

/// At (M, N) = (10, 20) with the default error coefficients the post-selected
/// fidelity beats the classical 2/3; the loss-inclusive one does not.
#[test]
fn the_default_cell_beats_the_classical_limit_when_post_selected() {
    let dir = tempfile::tempdir().unwrap();
    let ps = sweep_grid(dir.path(), "ps", &["--m", "10", "--n", "20", "--fidelity", "post-selected"]);
    let cell = &ps.cells[0];
    assert!(cell.avg_fidelity > 2.0 / 3.0, "{cell:?}");
    assert!(cell.avg_fidelity_loss_inclusive < 2.0 / 3.0, "{cell:?}");
    assert_eq!(cell.avg_fidelity, cell.avg_fidelity_postselected);
}

#[test]
fn per_cycle_weak_values_vanish_in_the_channel() {
    let text = ok(&["weakvalues", "--boundaries", "per-cycle", "--cycle", "1"]);
    let map = weak_map_from_csv(&text).unwrap();
    let c = map.arms.iter().position(|&a| a == Arm::C).unwrap();
    assert!(map.cells.iter().all(|row| row[c].value().is_none_or(|w| w.norm() < 1e-12)));
    let e2e = weak_map_from_csv(&ok(&["weakvalues", "--m", "3", "--n", "2"])).unwrap();
    for i in 0..e2e.times.len() {
        assert!((e2e.row_sum(i).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }
    assert_eq!(code(&["weakvalues", "--boundaries", "per-cycle", "--cycle", "2"]), 2);
    assert_eq!(code(&["weakvalues", "--cycle", "0"]), 2);
}

#[test]
fn paradox_json_matches_the_library_report() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("paradox.json");
    let table = ok(&["paradox", "--json", path_str(&json)]);
    assert!(table.contains("per-cycle-exact"));
    let report: ParadoxReport = serde_json::from_str(&read(&json)).unwrap();
    assert_eq!(report, paradox_report(2, 2).unwrap());
}

#[test]
fn history_families_are_classified() {
    let report: HistoriesReport = serde_json::from_str(&ok(&["histories"])).unwrap();
    assert_eq!(report.families.len(), 4);
    let consistent: Vec<bool> = report.families.iter().map(|f| f.consistent).collect();
    assert_eq!(consistent, [true, true, true, false]);
    let inconsistent = &report.families[3];
    assert!(inconsistent.histories.iter().all(|h| h.probability.is_none()));
    assert!((inconsistent.offending[0].overlap.norm() - 0.125).abs() < 1e-12);
    let first: HistoriesReport = serde_json::from_str(&ok(&["histories", "--family", "7"])).unwrap();
    let p: f64 = first.families[0].histories.iter().filter_map(|h| h.probability).sum();
    assert!((p - 1.0).abs() < 1e-12);
    assert_eq!(code(&["histories", "--family", "6"]), 2);
}

#[test]
fn family_files_are_evaluated_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let c = build_paradox_circuit(2, 2).unwrap();
    let family = BuiltinFamily::SecondCycle.build(&c, 2).unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, family.to_json()).unwrap();
    let report: HistoriesReport = serde_json::from_str(&ok(&["histories", "--family-file", path_str(&good)])).unwrap();
    assert_eq!(report.families.len(), 1);
    assert!(report.families[0].consistent);

    let mut v: serde_json::Value = serde_json::from_str(&family.to_json()).unwrap();
    v["slots"] = serde_json::json!([]);
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, v.to_string()).unwrap();
    assert_eq!(code(&["histories", "--family-file", path_str(&empty)]), 2);
    assert_eq!(code(&["histories", "--family-file", path_str(&dir.path().join("none.json"))]), 1);
}

#[test]
fn unwritable_outputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sweep");
    assert_eq!(code(&["sweep", "--m", "1", "--n", "1", "--samples", "1", "--out", path_str(&out)]), 1);
}
