//! Flat-file formats: JSON documents for markets, solver outcomes, and
//! rounded results, plus CSV/Markdown renderings of experiment reports.
//! Floats serialize with shortest round-trip precision, so
//! serialize-then-parse is bit-exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fairness::FairnessProfile;
use crate::model::{FractionalAllocation, Market, ModelError, PriceVector};
use crate::pipeline::{ExperimentReport, PipelineRun};
use crate::rounding::{BudgetWitness, RoundingCertificate, RoundingResult};
use crate::solver::Outcome;

#[derive(Debug, Error)]
pub enum IoError {
    /// Syntactic problems; the underlying error carries line/column.
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    /// Structurally valid JSON describing an invalid object; the underlying
    /// error names the offending entry.
    #[error("invalid document: {0}")]
    Invalid(#[from] ModelError),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MarketDoc {
    pub n_agents: usize,
    pub n_goods: usize,
    pub valuations: Vec<Vec<f64>>,
    pub budgets: Vec<f64>,
}

pub fn serialize_market(market: &Market) -> String {
    let doc = MarketDoc {
        n_agents: market.n_agents(),
        n_goods: market.n_goods(),
        valuations: (0..market.n_agents())
            .map(|i| market.valuation_row(i).to_vec())
            .collect(),
        budgets: market.budgets().to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("market doc serializes")
}

pub fn parse_market(text: &str) -> Result<Market, IoError> {
    let doc: MarketDoc = serde_json::from_str(text)?;
    if doc.valuations.len() != doc.n_agents {
        return Err(ModelError::Dimension {
            what: "valuation rows",
            got: doc.valuations.len(),
            expected: doc.n_agents,
        }
        .into());
    }
    if let Some(row) = doc.valuations.iter().find(|r| r.len() != doc.n_goods) {
        return Err(ModelError::Dimension {
            what: "valuation row length",
            got: row.len(),
            expected: doc.n_goods,
        }
        .into());
    }
    Ok(Market::new(doc.valuations, doc.budgets)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OutcomeDoc {
    pub allocation: Vec<Vec<f64>>,
    pub prices: Vec<f64>,
    pub residual: f64,
    pub iterations_used: usize,
}

pub fn serialize_outcome(outcome: &Outcome) -> String {
    let doc = OutcomeDoc {
        allocation: (0..outcome.alloc.n_agents())
            .map(|i| outcome.alloc.row(i).to_vec())
            .collect(),
        prices: outcome.prices.as_slice().to_vec(),
        residual: outcome.residual,
        iterations_used: outcome.iterations_used,
    };
    serde_json::to_string_pretty(&doc).expect("outcome doc serializes")
}

/// Parses an outcome document. `column_tol` is the slack allowed on
/// per-good share sums; parsed outcomes face the real equilibrium checks
/// downstream, so this only rejects structurally bad data.
pub fn parse_outcome(text: &str, column_tol: f64) -> Result<Outcome, IoError> {
    let doc: OutcomeDoc = serde_json::from_str(text)?;
    let alloc = FractionalAllocation::new(doc.allocation, column_tol)?;
    let prices = PriceVector::new(doc.prices)?;
    if prices.len() != alloc.n_goods() {
        return Err(ModelError::Dimension {
            what: "price entries",
            got: prices.len(),
            expected: alloc.n_goods(),
        }
        .into());
    }
    Ok(Outcome {
        alloc,
        prices,
        residual: doc.residual,
        iterations_used: doc.iterations_used,
    })
}

#[derive(Debug, Serialize)]
pub struct RoundingDoc<'a> {
    /// Owner per good; rounding always assigns every good.
    pub owners: Vec<Option<usize>>,
    pub budgets_new: &'a [f64],
    pub prices: &'a [f64],
    pub perturbation_inf: f64,
    pub price_inf: f64,
    pub budget_sum_delta: f64,
    pub witnesses: &'a [BudgetWitness],
    pub certificate: &'a RoundingCertificate,
}

pub fn serialize_rounding(result: &RoundingResult, certificate: &RoundingCertificate) -> String {
    let doc = RoundingDoc {
        owners: result.alloc.owners().to_vec(),
        budgets_new: &result.budgets_new,
        prices: result.prices.as_slice(),
        perturbation_inf: result.perturbation_inf,
        price_inf: result.price_inf,
        budget_sum_delta: result.budget_sum_delta,
        witnesses: &result.witnesses,
        certificate,
    };
    serde_json::to_string_pretty(&doc).expect("rounding doc serializes")
}

#[derive(Debug, Serialize)]
struct TimingsDoc {
    solve_s: f64,
    forest_s: f64,
    round_s: f64,
    certify_s: f64,
    fairness_s: f64,
}

#[derive(Debug, Serialize)]
struct PipelineDoc<'a> {
    outcome: serde_json::Value,
    forest_allocation: Vec<Vec<f64>>,
    rounding: serde_json::Value,
    fairness: &'a FairnessProfile,
    timings: TimingsDoc,
}

pub fn serialize_pipeline(run: &PipelineRun) -> String {
    let doc = PipelineDoc {
        outcome: serde_json::from_str(&serialize_outcome(&run.outcome)).expect("fresh doc"),
        forest_allocation: (0..run.forest_alloc.n_agents())
            .map(|i| run.forest_alloc.row(i).to_vec())
            .collect(),
        rounding: serde_json::from_str(&serialize_rounding(&run.rounding, &run.certificate))
            .expect("fresh doc"),
        fairness: &run.fairness,
        timings: TimingsDoc {
            solve_s: run.timings.solve.as_secs_f64(),
            forest_s: run.timings.forest.as_secs_f64(),
            round_s: run.timings.round.as_secs_f64(),
            certify_s: run.timings.certify.as_secs_f64(),
            fairness_s: run.timings.fairness.as_secs_f64(),
        },
    };
    serde_json::to_string_pretty(&doc).expect("pipeline doc serializes")
}

/// Fixed column set; changing it breaks downstream consumers.
const CSV_HEADER: &str = "n,m,trials,ef,ef1,ef11,prop,prop1,mean_solver_s,max_solver_s,\
mean_forest_s,max_forest_s,mean_round_s,max_round_s,mean_pert_ratio,max_pert_ratio";

pub fn render_report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.m,
            r.trials,
            r.ef,
            r.ef1,
            r.ef11,
            r.prop,
            r.prop1,
            r.mean_solver_s,
            r.max_solver_s,
            r.mean_forest_s,
            r.max_forest_s,
            r.mean_round_s,
            r.max_round_s,
            r.mean_pert_ratio,
            r.max_pert_ratio,
        ));
    }
    out
}

/// Markdown table with one column per market size, metrics as rows — the
/// transposed layout usual for fairness-count tables. The `failed` row
/// appears only when some trial actually failed.
pub fn render_report_markdown(report: &ExperimentReport) -> String {
    let fmt_s = |v: f64| format!("{v:.4}");
    let mut metrics: Vec<(&str, Vec<String>)> = vec![
        ("goods (m)", report.rows.iter().map(|r| r.m.to_string()).collect()),
        ("trials", report.rows.iter().map(|r| r.trials.to_string()).collect()),
        ("EF", report.rows.iter().map(|r| r.ef.to_string()).collect()),
        ("EF1", report.rows.iter().map(|r| r.ef1.to_string()).collect()),
        ("EF1,1", report.rows.iter().map(|r| r.ef11.to_string()).collect()),
        ("Prop", report.rows.iter().map(|r| r.prop.to_string()).collect()),
        ("Prop1", report.rows.iter().map(|r| r.prop1.to_string()).collect()),
        ("mean solver (s)", report.rows.iter().map(|r| fmt_s(r.mean_solver_s)).collect()),
        ("max solver (s)", report.rows.iter().map(|r| fmt_s(r.max_solver_s)).collect()),
        ("mean forest (s)", report.rows.iter().map(|r| fmt_s(r.mean_forest_s)).collect()),
        ("max forest (s)", report.rows.iter().map(|r| fmt_s(r.max_forest_s)).collect()),
        ("mean rounding (s)", report.rows.iter().map(|r| fmt_s(r.mean_round_s)).collect()),
        ("max rounding (s)", report.rows.iter().map(|r| fmt_s(r.max_round_s)).collect()),
        ("mean pert ratio", report.rows.iter().map(|r| fmt_s(r.mean_pert_ratio)).collect()),
        ("max pert ratio", report.rows.iter().map(|r| fmt_s(r.max_pert_ratio)).collect()),
    ];
    if report.rows.iter().any(|r| r.failed > 0) {
        metrics.push((
            "failed",
            report.rows.iter().map(|r| r.failed.to_string()).collect(),
        ));
    }

    let mut widths = vec!["metric".len()];
    widths.extend(report.rows.iter().map(|r| format!("n={}", r.n).len()));
    for (name, cells) in &metrics {
        widths[0] = widths[0].max(name.len());
        for (k, cell) in cells.iter().enumerate() {
            widths[k + 1] = widths[k + 1].max(cell.len());
        }
    }

    let render_row = |cells: &[String]| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = String::new();
    let header: Vec<String> = std::iter::once("metric".to_string())
        .chain(report.rows.iter().map(|r| format!("n={}", r.n)))
        .collect();
    out.push_str(&render_row(&header));
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&render_row(&rule));
    for (name, cells) in &metrics {
        let mut row = vec![name.to_string()];
        row.extend(cells.iter().cloned());
        out.push_str(&render_row(&row));
    }
    out
}

pub fn render_report_json(report: &ExperimentReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_instance, GeneratorConfig};
    use crate::pipeline::ExperimentRow;

    #[test]
    fn market_round_trip_is_exact() {
        let config = GeneratorConfig {
            n_agents: 3,
            seed: 11,
            ..Default::default()
        };
        let market = generate_instance(&config, 2);
        let parsed = parse_market(&serialize_market(&market)).unwrap();
        assert_eq!(parsed, market);

        // Irrational-ish values survive bit-exactly too.
        let awkward = Market::new(
            vec![vec![0.1, 2.0 / 3.0], vec![1e-300, 65536.0 + 1e-9]],
            vec![1.0 / 3.0, 0.7],
        )
        .unwrap();
        assert_eq!(parse_market(&serialize_market(&awkward)).unwrap(), awkward);
    }

    #[test]
    fn parse_market_diagnoses_bad_documents() {
        assert!(matches!(
            parse_market("{not json"),
            Err(IoError::Json(_))
        ));
        let negative = r#"{"n_agents":1,"n_goods":2,"valuations":[[1.0,-2.0]],"budgets":[1.0]}"#;
        let err = parse_market(negative).unwrap_err();
        assert!(
            matches!(err, IoError::Invalid(ModelError::BadValuation { agent: 0, good: 1, .. })),
            "got {err:?}"
        );
        let missing_budgets = r#"{"n_agents":1,"n_goods":1,"valuations":[[1.0]]}"#;
        let err = parse_market(missing_budgets).unwrap_err();
        assert!(matches!(err, IoError::Json(_)), "got {err:?}");
        let wrong_shape = r#"{"n_agents":2,"n_goods":1,"valuations":[[1.0]],"budgets":[1.0,1.0]}"#;
        assert!(matches!(
            parse_market(wrong_shape),
            Err(IoError::Invalid(ModelError::Dimension { .. }))
        ));
    }

    #[test]
    fn outcome_round_trip() {
        let outcome = Outcome {
            alloc: FractionalAllocation::new(vec![vec![0.5, 0.1], vec![0.5, 0.9]], 1e-9).unwrap(),
            prices: PriceVector::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
            residual: 1e-9,
            iterations_used: 321,
        };
        let parsed = parse_outcome(&serialize_outcome(&outcome), 1e-9).unwrap();
        assert_eq!(parsed.alloc, outcome.alloc);
        assert_eq!(parsed.prices, outcome.prices);
        assert_eq!(parsed.residual.to_bits(), outcome.residual.to_bits());
        assert_eq!(parsed.iterations_used, 321);
    }

    fn sample_report() -> ExperimentReport {
        ExperimentReport {
            rows: vec![ExperimentRow {
                n: 2,
                m: 10,
                trials: 100,
                ef: 99,
                ef1: 100,
                ef11: 100,
                prop: 99,
                prop1: 100,
                mean_solver_s: 0.012345,
                max_solver_s: 0.05,
                mean_forest_s: 0.0001,
                max_forest_s: 0.0002,
                mean_round_s: 0.00005,
                max_round_s: 0.0001,
                mean_pert_ratio: 0.4,
                max_pert_ratio: 0.9,
                failed: 0,
            }],
        }
    }

    #[test]
    fn csv_has_exactly_the_documented_columns() {
        let csv = render_report_csv(&sample_report());
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), 16);
        assert!(header.starts_with("n,m,trials,ef,"));
        assert!(!header.contains("failed"));
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 16);
        assert!(row.starts_with("2,10,100,99,100,100,99,100,"));
    }

    #[test]
    fn markdown_shows_failures_only_when_present() {
        let mut report = sample_report();
        let md = render_report_markdown(&report);
        assert!(md.contains("| metric"));
        assert!(md.contains("n=2"));
        assert!(!md.contains("failed"));
        report.rows[0].failed = 3;
        assert!(render_report_markdown(&report).contains("failed"));
    }
}
