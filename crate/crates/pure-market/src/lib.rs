//! Fisher-market equilibria for additive valuations, and their rounding
//! into integral equilibria of nearby markets.
//!
//! The pipeline: [`solve_equilibrium`] finds a fractional equilibrium by
//! projected gradient ascent on the Eisenberg-Gale program;
//! [`rearrange_to_forest`] cancels cycles in its spending graph without
//! disturbing the equilibrium; [`round_to_pure`] walks the resulting forest
//! and produces an integral allocation together with perturbed budgets it
//! exhausts exactly — moving each budget by at most the highest good price;
//! [`certify_rounding`] re-derives every claimed property from scratch; and
//! [`fairness_profile`] grades the integral allocation (envy-freeness and
//! proportionality, exact and up-to-one-good). Under equal incomes the
//! rounded allocation is always Prop1 and EF1,1, and as an equilibrium it
//! is fractionally Pareto-efficient.
//!
//! Supporting casts: [`generate`] draws the random markets the experiment
//! harness sweeps, [`pipeline`] composes and times the stages, [`oracles`]
//! provides exact ground truth (a partition-problem reduction family,
//! brute-force Pareto domination, and a comparative family with closed-form
//! prices), and [`io`] reads and writes the flat-file formats.

pub mod fairness;
pub mod forest;
pub mod generate;
pub mod io;
pub mod model;
pub mod oracles;
pub mod pipeline;
pub mod rounding;
pub mod solver;

pub use fairness::{fairness_profile, FairnessProfile, PairEnvy, PropShortfall};
pub use forest::{
    build_spending_graph, cancel_cycle, find_cycle, rearrange_to_forest, ForestError, GraphNode,
    SpendingGraph,
};
pub use generate::{generate_instance, value_level_set, GeneratorConfig};
pub use model::{
    check_equilibrium, EquilibriumReport, FractionalAllocation, IntegralAllocation, Market,
    MbbResult, ModelError, PriceVector, ToleranceConfig,
};
pub use oracles::{
    brute_force_integral_po, comparative_expected_prices, comparative_instance, partition_market,
    purity_oracle_partition_family, OracleError, PartitionInstance, PurityVerdict, PurityWitness,
};
pub use pipeline::{
    run_experiment, run_pipeline, ExperimentConfig, ExperimentReport, ExperimentRow,
    PipelineError, PipelineRun, StageTimings,
};
pub use rounding::{
    certify_rounding, root_forest, round_to_pure, BudgetWitness, RootedForest, RoundingCertificate,
    RoundingError, RoundingResult,
};
pub use solver::{solve_equilibrium, Outcome, SolverConfig, SolverError};
