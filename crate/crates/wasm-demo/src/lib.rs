//! Browser bindings for three interactive views: an `(M, N)` fidelity heat map,
//! the nested-interferometer weak-value table, and the Zeno module's transfer
//! amplitudes for each control state.
//!
//! The [`demo`] functions are plain Rust so they run and test natively; the
//! `#[wasm_bindgen]` wrappers only convert errors and encode results as JSON.

use wasm_bindgen::prelude::*;

pub mod demo {
    use serde::Serialize;

    use counterport_core::analysis::{weak_trace_map, BoundaryPair, CyclePost, WeakCell};
    use counterport_core::counterport::{sample_bloch, sweep, FidelityMode, GridRange, SampleScheme};
    use counterport_core::cqze::{run_cqze, BobQubit, ProtocolConfig};
    use counterport_core::optics::build_paradox_circuit;
    use counterport_core::qstate::{Bob, Pol, Polarization};
    use counterport_core::{Error, Result};

    /// Largest M or N accepted, so one call stays interactive.
    pub const MAX_CYCLES: usize = 40;
    pub const MAX_SAMPLES: usize = 200;

    fn check_cycles(m: usize, n: usize) -> Result<()> {
        if m > MAX_CYCLES || n > MAX_CYCLES {
            return Err(Error::InvalidParameter(format!(
                "the demo is limited to M, N <= {MAX_CYCLES} (got M = {m}, N = {n})"
            )));
        }
        Ok(())
    }

    /// Average fidelities for `M ∈ 1..=m_max`, `N ∈ 1..=n_max`, row-major in M.
    pub fn fidelity_grid(
        m_max: usize,
        n_max: usize,
        eps_reflect: f64,
        eps_block: f64,
        samples: usize,
        postselected: bool,
    ) -> Result<Vec<f64>> {
        check_cycles(m_max, n_max)?;
        if samples > MAX_SAMPLES {
            return Err(Error::InvalidParameter(format!("at most {MAX_SAMPLES} samples")));
        }
        let sample = sample_bloch(samples, SampleScheme::Fibonacci)?;
        let mode = if postselected {
            FidelityMode::PostSelected
        } else {
            FidelityMode::LossInclusive
        };
        let template = ProtocolConfig::ideal(1, 1).with_errors(eps_reflect, eps_block);
        let grid = sweep(&GridRange::up_to(m_max, n_max), &template, &sample, mode)?;
        Ok(grid.cells.iter().map(|c| c.avg_fidelity).collect())
    }

    #[derive(Clone, Debug, PartialEq, Serialize)]
    pub struct WeakRow {
        pub time: String,
        /// `[re, im]` per arm; `None` where the boundaries are orthogonal.
        pub values: Vec<Option<[f64; 2]>>,
    }

    #[derive(Clone, Debug, PartialEq, Serialize)]
    pub struct WeakTable {
        pub arms: Vec<String>,
        pub rows: Vec<WeakRow>,
    }

    /// Weak values of every arm at every stamp. `boundaries` is `end-to-end`,
    /// `per-cycle` or `per-cycle-exact`; `cycle` picks the outer cycle of the latter two.
    pub fn weak_table(m: usize, n: usize, boundaries: &str, cycle: usize) -> Result<WeakTable> {
        check_cycles(m, n)?;
        let c = build_paradox_circuit(m, n)?;
        let b = match boundaries {
            "end-to-end" => BoundaryPair::end_to_end(&c)?,
            "per-cycle" => BoundaryPair::per_cycle(&c, cycle, CyclePost::H)?,
            "per-cycle-exact" => BoundaryPair::per_cycle(&c, cycle, CyclePost::Exact)?,
            other => return Err(Error::InvalidParameter(format!("unknown boundaries `{other}`"))),
        };
        let map = weak_trace_map(&c, &b)?;
        Ok(WeakTable {
            arms: map.arms.iter().map(|a| a.name().to_owned()).collect(),
            rows: map
                .times
                .iter()
                .zip(&map.cells)
                .map(|(t, row)| WeakRow {
                    time: t.to_string(),
                    values: row
                        .iter()
                        .map(|w| match w {
                            WeakCell::Value(v) => Some([v.re, v.im]),
                            WeakCell::Orthogonal => None,
                        })
                        .collect(),
                })
                .collect(),
        })
    }

    /// One module run with an R-polarized photon: the photon leaves as
    /// `transmitted·R + flipped·L`, the rest is lost.
    #[derive(Clone, Debug, PartialEq, Serialize)]
    pub struct ModuleRun {
        pub control: &'static str,
        pub transmitted: [f64; 2],
        pub flipped: [f64; 2],
        pub p_success: f64,
        pub p_loss_da: f64,
        pub p_loss_db: f64,
        pub p_block: f64,
    }

    /// Module amplitudes for Bob reflecting (`|0⟩`) and Bob blocking (`|1⟩`).
    pub fn cqze_amplitudes(m: usize, n: usize, eps_reflect: f64, eps_block: f64) -> Result<Vec<ModuleRun>> {
        check_cycles(m, n)?;
        let cfg = ProtocolConfig::ideal(m, n).with_errors(eps_reflect, eps_block);
        [("reflect |0>", BobQubit::zero(), Bob::Zero), ("block |1>", BobQubit::one(), Bob::One)]
            .into_iter()
            .map(|(control, q, bob)| {
                let o = run_cqze(&Polarization::R, &q, &cfg)?;
                let (t, u) = (o.amplitude(Pol::R, bob), o.amplitude(Pol::L, bob));
                Ok(ModuleRun {
                    control,
                    transmitted: [t.re, t.im],
                    flipped: [u.re, u.im],
                    p_success: o.p_success,
                    p_loss_da: o.p_loss_da,
                    p_loss_db: o.p_loss_db,
                    p_block: o.p_block,
                })
            })
            .collect()
    }
}

fn js_err(e: counterport_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo records serialize")
}

/// Row-major `m_max × n_max` fidelities.
#[wasm_bindgen(js_name = fidelityGrid)]
pub fn fidelity_grid(
    m_max: usize,
    n_max: usize,
    eps_reflect: f64,
    eps_block: f64,
    samples: usize,
    postselected: bool,
) -> Result<Vec<f64>, JsError> {
    demo::fidelity_grid(m_max, n_max, eps_reflect, eps_block, samples, postselected).map_err(js_err)
}

/// JSON `{arms, rows: [{time, values}]}`.
#[wasm_bindgen(js_name = weakTable)]
pub fn weak_table(m: usize, n: usize, boundaries: &str, cycle: usize) -> Result<String, JsError> {
    demo::weak_table(m, n, boundaries, cycle).map(|t| to_json(&t)).map_err(js_err)
}

/// JSON array with one module run per control state.
#[wasm_bindgen(js_name = cqzeAmplitudes)]
pub fn cqze_amplitudes(m: usize, n: usize, eps_reflect: f64, eps_block: f64) -> Result<String, JsError> {
    demo::cqze_amplitudes(m, n, eps_reflect, eps_block).map(|r| to_json(&r)).map_err(js_err)
}
