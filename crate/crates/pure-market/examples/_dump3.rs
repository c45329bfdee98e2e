// Scratch diagnostic: compute a high-accuracy reference equilibrium for one
// generated instance via proportional-response iteration, then print its
// structure (prices, utilities, support) for comparison with a stuck state.
use pure_market::generate::{generate_instance, GeneratorConfig};
use pure_market::model::check_equilibrium;
use pure_market::{FractionalAllocation, Market, PriceVector, ToleranceConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args[1].parse().unwrap();
    let seed: u64 = args[2].parse().unwrap();
    let trial: usize = args[3].parse().unwrap();
    let gc = GeneratorConfig {
        n_agents: n,
        goods_factor: 5,
        value_exponent_levels: 5,
        seed,
        trials: 100,
    };
    let market = generate_instance(&gc, trial.try_into().unwrap());
    let (n, m) = (market.n_agents(), market.n_goods());
    let mut norm = Vec::with_capacity(n * m);
    for i in 0..n {
        let row_max = market
            .valuation_row(i)
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));
        for j in 0..m {
            norm.push(market.value(i, j) / row_max);
        }
    }
    let market = Market::from_flat(n, m, norm, market.budgets().to_vec()).unwrap();

    println!("valuations (normalized):");
    for i in 0..n {
        let row: Vec<String> = market
            .valuation_row(i)
            .iter()
            .map(|v| format!("{v:.3e}"))
            .collect();
        println!("  a{i}: [{}]", row.join(", "));
    }

    // Proportional response on spending b_ij.
    let mut b = vec![0.0f64; n * m];
    for i in 0..n {
        let pos: usize = market.valuation_row(i).iter().filter(|&&v| v > 0.0).count();
        for j in 0..m {
            if market.value(i, j) > 0.0 {
                b[i * m + j] = market.budget(i) / pos as f64;
            }
        }
    }
    let mut p = vec![0.0f64; m];
    let mut x = vec![0.0f64; n * m];
    for it in 0..4_000_000u64 {
        for j in 0..m {
            p[j] = (0..n).map(|i| b[i * m + j]).sum();
        }
        for i in 0..n {
            for j in 0..m {
                x[i * m + j] = if p[j] > 0.0 { b[i * m + j] / p[j] } else { 0.0 };
            }
        }
        let mut delta = 0.0f64;
        for i in 0..n {
            let u: f64 = (0..m).map(|j| market.value(i, j) * x[i * m + j]).sum();
            for j in 0..m {
                let nb = market.budget(i) * market.value(i, j) * x[i * m + j] / u;
                delta = delta.max((nb - b[i * m + j]).abs());
                b[i * m + j] = nb;
            }
        }
        if delta < 1e-15 {
            println!("PR converged at iteration {it} (delta {delta:.2e})");
            break;
        }
        if it == 3_999_999 {
            println!("PR hit iteration cap (delta {delta:.2e})");
        }
    }
    for j in 0..m {
        p[j] = (0..n).map(|i| b[i * m + j]).sum();
    }
    for i in 0..n {
        for j in 0..m {
            x[i * m + j] = if p[j] > 0.0 { b[i * m + j] / p[j] } else { 0.0 };
        }
    }
    // Residual of the PR reference under our own checker.
    let alloc = FractionalAllocation::from_flat(n, m, x.clone(), 1e-6).unwrap();
    let prices = PriceVector::new(p.clone()).unwrap();
    let tol = ToleranceConfig::default();
    let report = check_equilibrium(&market, &alloc, &prices, &tol).unwrap();
    println!(
        "PR reference residual: {:.3e} (clear {:.3e} budget {:.3e} mbb {:.3e})",
        report.worst_violation(),
        report.worst_clearing_violation,
        report.worst_budget_residual,
        report.worst_mbb_gap
    );
    println!("prices:");
    for j in 0..m {
        println!("  g{j}: p {:.12e}", p[j]);
    }
    println!("utilities and spend:");
    for i in 0..n {
        let u: f64 = (0..m).map(|j| market.value(i, j) * x[i * m + j]).sum();
        let spend: f64 = (0..m).map(|j| p[j] * x[i * m + j]).sum();
        println!("  a{i}: u {u:.12e} spend {spend:.12e}");
    }
    println!("support (share > 1e-9):");
    for i in 0..n {
        let goods: Vec<String> = (0..m)
            .filter(|&j| x[i * m + j] > 1e-9)
            .map(|j| format!("g{j}:{:.6e}", x[i * m + j]))
            .collect();
        println!("  a{i}: {}", goods.join(" "));
    }
}
