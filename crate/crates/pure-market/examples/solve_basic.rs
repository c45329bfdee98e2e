//! Solve one small market by hand and inspect the equilibrium.
//!
//! Two agents with opposed tastes over three goods: the solver finds the
//! fractional equilibrium, extracts prices from the optimality conditions,
//! and reports how exactly the result satisfies market clearing, budget
//! exhaustion, and maximal bang-per-buck spending.

use pure_market::{check_equilibrium, solve_equilibrium, Market, SolverConfig, ToleranceConfig};

fn main() {
    // Agent 0 mostly wants good 0, agent 1 mostly wants good 2, and both
    // care a little about the middle good. Budgets are 1 and 2.
    let market = Market::new(
        vec![vec![8.0, 2.0, 1.0], vec![1.0, 3.0, 6.0]],
        vec![1.0, 2.0],
    )
    .unwrap();
    let tol = ToleranceConfig::default();

    let outcome = solve_equilibrium(&market, &SolverConfig::default(), &tol).unwrap();

    println!(
        "converged in {} iterations, residual {:.3e}\n",
        outcome.iterations_used, outcome.residual
    );

    println!("allocation (rows = agents, columns = goods):");
    for i in 0..market.n_agents() {
        let row: Vec<String> = outcome
            .alloc
            .row(i)
            .iter()
            .map(|s| format!("{s:.6}"))
            .collect();
        println!("  agent {i}: [{}]", row.join(", "));
    }

    println!("\nprices:");
    for j in 0..market.n_goods() {
        println!("  good {j}: {:.6}", outcome.prices.get(j));
    }
    println!(
        "  sum {:.6} (equals the total budget {:.6})",
        outcome.prices.total(),
        market.total_budget()
    );

    println!("\nper-agent position:");
    for i in 0..market.n_agents() {
        let value = market.fractional_value(i, outcome.alloc.row(i)).unwrap();
        let spend = outcome.alloc.agent_spend(i, &outcome.prices);
        println!(
            "  agent {i}: bundle value {value:.6}, spend {spend:.6} of budget {:.6}",
            market.budget(i)
        );
    }

    // The same report the solver used as its convergence measure.
    let report = check_equilibrium(&market, &outcome.alloc, &outcome.prices, &tol).unwrap();
    println!("\nequilibrium check:");
    println!("  is_equilibrium:      {}", report.is_equilibrium);
    println!(
        "  clearing violation:  {:.3e}",
        report.worst_clearing_violation
    );
    println!("  budget residual:     {:.3e}", report.worst_budget_residual);
    println!("  bang-per-buck gap:   {:.3e}", report.worst_mbb_gap);
}
