//! End-to-end composition — solve, rearrange, round, audit, grade — plus
//! the batch experiment harness that aggregates fairness counts and stage
//! timings over randomly generated markets.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fairness::{fairness_profile, FairnessProfile};
use crate::forest::{rearrange_to_forest, ForestError};
use crate::generate::{generate_instance, GeneratorConfig};
use crate::model::{Market, ModelError, ToleranceConfig};
use crate::rounding::{certify_rounding, round_to_pure, RoundingCertificate, RoundingError, RoundingResult};
use crate::solver::{solve_equilibrium, Outcome, SolverConfig, SolverError};
use crate::model::FractionalAllocation;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Rounding(#[from] RoundingError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Wall-clock cost of each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageTimings {
    pub solve: Duration,
    pub forest: Duration,
    pub round: Duration,
    pub certify: Duration,
    pub fairness: Duration,
}

/// Everything one instance produces on its way through the pipeline.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    /// Converged fractional equilibrium.
    pub outcome: Outcome,
    /// Same equilibrium with an acyclic spending graph.
    pub forest_alloc: FractionalAllocation,
    pub rounding: RoundingResult,
    pub certificate: RoundingCertificate,
    /// Fairness of the integral allocation under the original budgets.
    pub fairness: FairnessProfile,
    pub timings: StageTimings,
}

/// Runs solve -> rearrange-to-forest -> round -> certify -> fairness and
/// times each stage. Solver non-convergence propagates; a failed
/// certificate does not error (it is the caller's signal to investigate)
/// but is carried in the run.
pub fn run_pipeline(
    market: &Market,
    solver_config: &SolverConfig,
    tol: &ToleranceConfig,
) -> Result<PipelineRun, PipelineError> {
    let start = Instant::now();
    let outcome = solve_equilibrium(market, solver_config, tol)?;
    let solve = start.elapsed();

    let start = Instant::now();
    let forest_alloc = rearrange_to_forest(market, &outcome.alloc, &outcome.prices, tol)?;
    let forest = start.elapsed();

    let start = Instant::now();
    let rounding = round_to_pure(market, &forest_alloc, &outcome.prices, tol)?;
    let round = start.elapsed();

    let start = Instant::now();
    let certificate = certify_rounding(market, &rounding, tol);
    let certify = start.elapsed();

    let start = Instant::now();
    let fairness = fairness_profile(market, &rounding.alloc)?;
    let fairness_time = start.elapsed();

    Ok(PipelineRun {
        outcome,
        forest_alloc,
        rounding,
        certificate,
        fairness,
        timings: StageTimings {
            solve,
            forest,
            round,
            certify,
            fairness: fairness_time,
        },
    })
}

/// Which market sizes the experiment sweeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub agent_counts: Vec<usize>,
    pub goods_factor: usize,
    pub seed: u64,
    pub value_exponent_levels: u32,
    pub trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            agent_counts: vec![2, 4, 8, 16, 32, 64],
            goods_factor: 5,
            seed: 0,
            value_exponent_levels: 5,
            trials: 100,
        }
    }
}

/// One market size's aggregate: fairness counts over the successful trials,
/// stage timing statistics, and budget-perturbation ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub n: usize,
    pub m: usize,
    /// Successful trials; the fairness counts are out of this number.
    pub trials: usize,
    pub ef: usize,
    pub ef1: usize,
    pub ef11: usize,
    pub prop: usize,
    pub prop1: usize,
    pub mean_solver_s: f64,
    pub max_solver_s: f64,
    pub mean_forest_s: f64,
    pub max_forest_s: f64,
    pub mean_round_s: f64,
    pub max_round_s: f64,
    /// Mean and max of `perturbation_inf / price_inf` (Theorem 1 caps the
    /// ratio at 1).
    pub mean_pert_ratio: f64,
    pub max_pert_ratio: f64,
    /// Trials dropped from the counts: solver non-convergence or a failed
    /// rounding audit.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
}

struct TrialStats {
    fairness: FairnessProfile,
    solve_s: f64,
    forest_s: f64,
    round_s: f64,
    pert_ratio: f64,
}

/// Runs `config.trials` pipelines per agent count and aggregates. Trials
/// run in parallel but are reduced in trial order, so the report is
/// deterministic for a fixed config. Trials whose solver fails to converge
/// (or whose audit fails, which would be a bug) count as `failed` and are
/// excluded from every statistic.
pub fn run_experiment(
    config: &ExperimentConfig,
    solver_config: &SolverConfig,
    tol: &ToleranceConfig,
) -> ExperimentReport {
    let mut rows = Vec::new();
    if config.trials == 0 {
        return ExperimentReport { rows };
    }
    for &n in &config.agent_counts {
        let gen_config = GeneratorConfig {
            n_agents: n,
            goods_factor: config.goods_factor,
            seed: config.seed,
            value_exponent_levels: config.value_exponent_levels,
            trials: config.trials,
        };
        let outcomes: Vec<Option<TrialStats>> = (0..config.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let market = generate_instance(&gen_config, trial);
                let run = run_pipeline(&market, solver_config, tol).ok()?;
                if !run.certificate.pass {
                    return None;
                }
                Some(TrialStats {
                    fairness: run.fairness,
                    solve_s: run.timings.solve.as_secs_f64(),
                    forest_s: run.timings.forest.as_secs_f64(),
                    round_s: run.timings.round.as_secs_f64(),
                    pert_ratio: run.rounding.perturbation_inf / run.rounding.price_inf,
                })
            })
            .collect();

        let mut row = ExperimentRow {
            n,
            m: n * config.goods_factor,
            trials: 0,
            ef: 0,
            ef1: 0,
            ef11: 0,
            prop: 0,
            prop1: 0,
            mean_solver_s: 0.0,
            max_solver_s: 0.0,
            mean_forest_s: 0.0,
            max_forest_s: 0.0,
            mean_round_s: 0.0,
            max_round_s: 0.0,
            mean_pert_ratio: 0.0,
            max_pert_ratio: 0.0,
            failed: 0,
        };
        for outcome in &outcomes {
            let Some(stats) = outcome else {
                row.failed += 1;
                continue;
            };
            row.trials += 1;
            row.ef += stats.fairness.ef as usize;
            row.ef1 += stats.fairness.ef1 as usize;
            row.ef11 += stats.fairness.ef11 as usize;
            row.prop += stats.fairness.prop as usize;
            row.prop1 += stats.fairness.prop1 as usize;
            row.mean_solver_s += stats.solve_s;
            row.max_solver_s = row.max_solver_s.max(stats.solve_s);
            row.mean_forest_s += stats.forest_s;
            row.max_forest_s = row.max_forest_s.max(stats.forest_s);
            row.mean_round_s += stats.round_s;
            row.max_round_s = row.max_round_s.max(stats.round_s);
            row.mean_pert_ratio += stats.pert_ratio;
            row.max_pert_ratio = row.max_pert_ratio.max(stats.pert_ratio);
        }
        if row.trials > 0 {
            let count = row.trials as f64;
            row.mean_solver_s /= count;
            row.mean_forest_s /= count;
            row.mean_round_s /= count;
            row.mean_pert_ratio /= count;
        }
        rows.push(row);
    }
    ExperimentReport { rows }
}
