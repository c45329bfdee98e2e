//! Thin command-line front end. All real work lives in the library; this
//! file parses arguments, shuttles documents, and maps failures onto the
//! documented exit codes: 0 success, 1 validation/parse error, 2 solver
//! non-convergence, 3 failed rounding audit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pure_market::io::{
    parse_market, parse_outcome, render_report_csv, render_report_json, render_report_markdown,
    serialize_market, serialize_outcome, serialize_pipeline, serialize_rounding,
};
use pure_market::{
    certify_rounding, check_equilibrium, comparative_expected_prices, comparative_instance,
    generate_instance, purity_oracle_partition_family, rearrange_to_forest, round_to_pure,
    run_experiment, run_pipeline, solve_equilibrium, ExperimentConfig, GeneratorConfig,
    PartitionInstance, PipelineError, SolverConfig, SolverError, ToleranceConfig,
};

/// Share-sum slack when reading allocation documents; real validation
/// happens in the equilibrium checks downstream.
const PARSE_COLUMN_TOL: f64 = 1e-6;

const EXIT_INVALID: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_CERTIFICATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pure-market",
    version,
    about = "Fisher-market equilibria: solve, round to integral, certify, and grade fairness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// RNG seed for generation commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Absolute tolerance for equilibrium checks.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol_abs: f64,
    /// Relative tolerance for budget and MBB checks.
    #[arg(long, global = true, default_value_t = 1e-5)]
    tol_rel: f64,
    /// Solver iteration budget.
    #[arg(long, global = true, default_value_t = 20_000)]
    max_iters: usize,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for experiment reports (other commands emit JSON).
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
    JsonDoc,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one random market document.
    Gen {
        /// Number of agents.
        #[arg(long)]
        n: usize,
        /// Goods per agent.
        #[arg(long, default_value_t = 5)]
        goods_factor: usize,
        /// Depth of the valuation ladder {2, 4, 16, 256, ...} (1..=10).
        #[arg(long, default_value_t = 5)]
        levels: u32,
        /// Trial index within the seed's stream.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Compute a fractional equilibrium of a market document.
    Solve { market: PathBuf },
    /// Cancel spending-graph cycles of an outcome, preserving equilibrium.
    Forest { market: PathBuf, outcome: PathBuf },
    /// Round a forest-structured outcome to an integral equilibrium.
    Round { market: PathBuf, outcome: PathBuf },
    /// Report how close an outcome is to an equilibrium.
    Check {
        market: PathBuf,
        outcome: PathBuf,
        /// Check against these budgets instead of the market's own
        /// (comma-separated, e.g. for rounded budget vectors).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        budgets: Option<Vec<f64>>,
    },
    /// Solve, forest, round, certify, and grade fairness in one run.
    Pipeline { market: PathBuf },
    /// Sweep random markets and aggregate fairness counts and timings.
    Experiment {
        /// Agent counts to sweep (comma-separated).
        #[arg(long, value_delimiter = ',', default_values_t = vec![2, 4, 8, 16, 32, 64])]
        agents: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 5)]
        goods_factor: usize,
        /// Depth of the valuation ladder (1..=10).
        #[arg(long, default_value_t = 5)]
        levels: u32,
    },
    /// Exact ground-truth oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Decide whether the two-agent market built from these integers has an
    /// integral equilibrium (an equal-sum split).
    Partition {
        /// Positive integers, comma-separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<u64>,
    },
    /// Emit the closed-form comparative family: market, its documented
    /// equilibrium prices, and optionally the solver's prices.
    Comparative {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Also run the solver and include its prices.
        #[arg(long)]
        solve: bool,
    },
}

fn main() -> ExitCode {
    // Parse failures are validation errors (exit 1); clap's default exit 2
    // is reserved for solver non-convergence here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let is_help = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INVALID)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }
}

fn invalid<E: std::fmt::Display>(err: E) -> Failure {
    Failure::invalid(format!("{err}"))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    let text = if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    };
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solver_failure(err: SolverError) -> Failure {
    let code = match &err {
        SolverError::DidNotConverge { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_INVALID,
    };
    Failure {
        code,
        message: err.to_string(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let tol = ToleranceConfig {
        abs: cli.tol_abs,
        rel: cli.tol_rel,
        ..ToleranceConfig::default()
    };
    let solver_config = SolverConfig {
        max_iters: cli.max_iters,
        ..SolverConfig::default()
    };

    match cli.command {
        Command::Gen {
            n,
            goods_factor,
            levels,
            trial,
        } => {
            if n == 0 || goods_factor == 0 || !(1..=10).contains(&levels) {
                return Err(Failure::invalid(
                    "gen needs n >= 1, goods-factor >= 1, and levels in 1..=10",
                ));
            }
            let config = GeneratorConfig {
                n_agents: n,
                goods_factor,
                seed: cli.seed,
                value_exponent_levels: levels,
                trials: 1,
            };
            let market = generate_instance(&config, trial);
            emit(&cli.out, &serialize_market(&market))
        }
        Command::Solve { market } => {
            let market = parse_market(&read(&market)?).map_err(invalid)?;
            let outcome = solve_equilibrium(&market, &solver_config, &tol).map_err(solver_failure)?;
            emit(&cli.out, &serialize_outcome(&outcome))
        }
        Command::Forest { market, outcome } => {
            let market = parse_market(&read(&market)?).map_err(invalid)?;
            let mut outcome =
                parse_outcome(&read(&outcome)?, PARSE_COLUMN_TOL).map_err(invalid)?;
            outcome.alloc = rearrange_to_forest(&market, &outcome.alloc, &outcome.prices, &tol)
                .map_err(invalid)?;
            emit(&cli.out, &serialize_outcome(&outcome))
        }
        Command::Round { market, outcome } => {
            let market = parse_market(&read(&market)?).map_err(invalid)?;
            let outcome = parse_outcome(&read(&outcome)?, PARSE_COLUMN_TOL).map_err(invalid)?;
            let result =
                round_to_pure(&market, &outcome.alloc, &outcome.prices, &tol).map_err(invalid)?;
            let certificate = certify_rounding(&market, &result, &tol);
            emit(&cli.out, &serialize_rounding(&result, &certificate))?;
            if certificate.pass {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_CERTIFICATION,
                    message: "rounding audit failed; see the certificate in the output".into(),
                })
            }
        }
        Command::Check {
            market,
            outcome,
            budgets,
        } => {
            let mut market = parse_market(&read(&market)?).map_err(invalid)?;
            if let Some(budgets) = budgets {
                market = market.with_budgets(budgets).map_err(invalid)?;
            }
            let outcome = parse_outcome(&read(&outcome)?, PARSE_COLUMN_TOL).map_err(invalid)?;
            let report = check_equilibrium(&market, &outcome.alloc, &outcome.prices, &tol)
                .map_err(invalid)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            emit(&cli.out, &text)
        }
        Command::Pipeline { market } => {
            let market = parse_market(&read(&market)?).map_err(invalid)?;
            let run = run_pipeline(&market, &solver_config, &tol).map_err(|err| match err {
                PipelineError::Solver(e) => solver_failure(e),
                other => invalid(other),
            })?;
            emit(&cli.out, &serialize_pipeline(&run))?;
            if run.certificate.pass {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_CERTIFICATION,
                    message: "rounding audit failed; see the certificate in the output".into(),
                })
            }
        }
        Command::Experiment {
            agents,
            trials,
            goods_factor,
            levels,
        } => {
            if agents.is_empty() || agents.contains(&0) || goods_factor == 0
                || !(1..=10).contains(&levels)
            {
                return Err(Failure::invalid(
                    "experiment needs nonzero agent counts, goods-factor >= 1, and levels in 1..=10",
                ));
            }
            let config = ExperimentConfig {
                agent_counts: agents,
                goods_factor,
                seed: cli.seed,
                value_exponent_levels: levels,
                trials,
            };
            let report = run_experiment(&config, &solver_config, &tol);
            let text = match cli.format {
                Format::Csv => render_report_csv(&report),
                Format::Md => render_report_markdown(&report),
                Format::JsonDoc => render_report_json(&report),
            };
            emit(&cli.out, &text)
        }
        Command::Oracle(OracleCommand::Partition { values }) => {
            let instance = PartitionInstance::new(values).map_err(invalid)?;
            let verdict = purity_oracle_partition_family(&instance).map_err(invalid)?;
            let text = serde_json::to_string_pretty(&verdict).expect("verdict serializes");
            emit(&cli.out, &text)
        }
        Command::Oracle(OracleCommand::Comparative { n, eps, solve }) => {
            if n == 0 || !(eps > 0.0 && eps < 1.0) {
                return Err(Failure::invalid(
                    "comparative family needs n >= 1 and eps in (0, 1)",
                ));
            }
            let market = comparative_instance(n, eps).map_err(invalid)?;
            let expected = comparative_expected_prices(n);
            let solved = if solve {
                Some(
                    solve_equilibrium(&market, &solver_config, &tol)
                        .map_err(solver_failure)?
                        .prices,
                )
            } else {
                None
            };
            let doc = serde_json::json!({
                "market": serde_json::from_str::<serde_json::Value>(&serialize_market(&market))
                    .expect("fresh doc"),
                "expected_prices": expected.as_slice(),
                "solved_prices": solved.as_ref().map(|p| p.as_slice()),
            });
            let text = serde_json::to_string_pretty(&doc).expect("doc serializes");
            emit(&cli.out, &text)
        }
    }
}
