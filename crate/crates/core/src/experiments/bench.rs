use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::data::{derive_seed, gen_dictionary, gen_sparse_vector, recovery_error, sample_std};
use super::noise::{corrupt, NoiseSpec};
use crate::error::{invalid, Result};
use crate::model::{Dictionary, Signal};
use crate::pursuit::{pursuit_solve, PursuitConfig, Preset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

impl Dims {
    pub const PAPER: Dims = Dims { m: 200, n: 400, k: 10 };
    pub const SMALL: Dims = Dims { m: 50, n: 100, k: 5 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedSolver {
    pub name: String,
    pub config: PursuitConfig,
}

impl NamedSolver {
    pub fn new(name: impl Into<String>, config: PursuitConfig) -> Self {
        NamedSolver {
            name: name.into(),
            config,
        }
    }

    /// Preset with sparsity `l`, no residual threshold.
    pub fn preset(preset: Preset, l: usize, p: f64) -> Self {
        Self::new(preset.name(), preset.config(l, p).with_eps(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub solver_name: String,
    pub noise_kind: String,
    pub trial_index: usize,
    /// NaN when the solve failed.
    pub recovery_error: f64,
    pub support_exact: bool,
    pub runtime_ms: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// One generated problem instance.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub dict: Dictionary,
    pub x_true: DVector<f64>,
    pub clean: Signal,
    pub observed: Signal,
}

/// Seed of the problem instance for `(noise, trial)`. Solvers share instances.
pub fn trial_seed(seed: u64, noise_index: usize, trial_index: usize) -> u64 {
    derive_seed(seed, &[noise_index as u64, trial_index as u64])
}

pub fn make_trial(dims: Dims, noise: &NoiseSpec, seed: u64) -> Result<TrialData> {
    let dict = gen_dictionary(dims.m, dims.n, derive_seed(seed, &[0]))?;
    let x_true = gen_sparse_vector(dims.n, dims.k, derive_seed(seed, &[1]))?;
    let clean = Signal::from_vector(dict.atoms() * &x_true)?;
    let observed = corrupt(&clean, noise, derive_seed(seed, &[2]))?;
    Ok(TrialData {
        dict,
        x_true,
        clean,
        observed,
    })
}

fn run_one(solver: &NamedSolver, noise: &NoiseSpec, trial: usize, dims: Dims, seed: u64) -> TrialReport {
    let mut report = TrialReport {
        solver_name: solver.name.clone(),
        noise_kind: noise.kind.label().to_string(),
        trial_index: trial,
        recovery_error: f64::NAN,
        support_exact: false,
        runtime_ms: 0.0,
        seed,
        failure: None,
    };
    let data = match make_trial(dims, noise, seed) {
        Ok(d) => d,
        Err(e) => {
            report.failure = Some(e.to_string());
            return report;
        }
    };
    let start = Instant::now();
    let solved = pursuit_solve(&data.observed, &data.dict, &solver.config);
    report.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    match solved.and_then(|sol| Ok((recovery_error(&sol.x, &data.x_true)?, sol))) {
        Ok((err, sol)) => {
            let truth: Vec<usize> = (0..dims.n).filter(|&i| data.x_true[i] != 0.0).collect();
            report.recovery_error = err;
            report.support_exact = sol.support.sorted() == truth;
        }
        Err(e) => report.failure = Some(e.to_string()),
    }
    report
}

/// Runs every `(solver, noise, trial)` cell on the current rayon pool.
///
/// Reports come back in canonical solver-major order regardless of thread
/// count. Solver failures are recorded in the report, not propagated.
pub fn run_benchmark(
    solvers: &[NamedSolver],
    noises: &[NoiseSpec],
    trials: usize,
    dims: Dims,
    seed: u64,
) -> Result<Vec<TrialReport>> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    if dims.m == 0 || dims.n == 0 || dims.k == 0 || dims.k > dims.n {
        return Err(invalid("dims", format!("need m, n >= 1 and 1 <= k <= n, got {dims:?}")));
    }
    for s in solvers {
        s.config.validate()?;
    }
    for n in noises {
        n.validate()?;
    }
    let cells: Vec<(usize, usize, usize)> = (0..solvers.len())
        .flat_map(|s| (0..noises.len()).flat_map(move |n| (0..trials).map(move |t| (s, n, t))))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(s, n, t)| run_one(&solvers[s], &noises[n], t, dims, trial_seed(seed, n, t)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub solver: String,
    pub noise: String,
    pub trials: usize,
    pub failures: usize,
    pub mean_error: f64,
    /// Unbiased (n − 1) standard deviation.
    pub std_error: f64,
    pub support_exact: usize,
}

/// Mean and standard deviation per `(solver, noise)` cell, in first-seen order.
pub fn summarize(reports: &[TrialReport]) -> Vec<CellSummary> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in reports {
        let key = (r.solver_name.as_str(), r.noise_kind.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(solver, noise)| {
            let cell: Vec<&TrialReport> = reports
                .iter()
                .filter(|r| r.solver_name == solver && r.noise_kind == noise)
                .collect();
            let errs: Vec<f64> = cell
                .iter()
                .filter(|r| r.failure.is_none())
                .map(|r| r.recovery_error)
                .collect();
            let mean = if errs.is_empty() {
                f64::NAN
            } else {
                errs.iter().sum::<f64>() / errs.len() as f64
            };
            CellSummary {
                solver: solver.to_string(),
                noise: noise.to_string(),
                trials: cell.len(),
                failures: cell.len() - errs.len(),
                mean_error: mean,
                std_error: sample_std(&errs),
                support_exact: cell.iter().filter(|r| r.support_exact).count(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PSweepPoint {
    pub p: f64,
    pub noise: String,
    pub mean_error: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Mean recovery error of the ITL/NOK pursuit for each `p` and noise kind.
pub fn p_sweep(ps: &[f64], noises: &[NoiseSpec], trials: usize, dims: Dims, seed: u64) -> Result<Vec<PSweepPoint>> {
    let solvers: Vec<NamedSolver> = ps
        .iter()
        .map(|&p| NamedSolver::new(format!("inok:{p}"), Preset::Inok.config(dims.k, p).with_eps(0.0)))
        .collect();
    let reports = run_benchmark(&solvers, noises, trials, dims, seed)?;
    let cells = summarize(&reports);
    let mut out = Vec::with_capacity(cells.len());
    for (i, &p) in ps.iter().enumerate() {
        for c in cells.iter().filter(|c| c.solver == solvers[i].name) {
            out.push(PSweepPoint {
                p,
                noise: c.noise.clone(),
                mean_error: c.mean_error,
                std_error: c.std_error,
                trials: c.trials,
            });
        }
    }
    Ok(out)
}
