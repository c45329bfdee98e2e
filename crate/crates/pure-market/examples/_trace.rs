use pure_market::generate::{generate_instance, GeneratorConfig};
use pure_market::model::check_equilibrium;
use pure_market::solver::{eg_objective, extract_prices, project_feasible};
use pure_market::{FractionalAllocation, Market, PriceVector, ToleranceConfig};

fn rescaled(market: &Market, alloc: &FractionalAllocation) -> PriceVector {
    let raw = extract_prices(market, alloc).unwrap();
    let factor = market.total_budget() / raw.total();
    PriceVector::new(raw.as_slice().iter().map(|p| p * factor).collect()).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args[1].parse().unwrap();
    let seed: u64 = args[2].parse().unwrap();
    let trial: u64 = args[3].parse().unwrap();
    let warm: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(50_000);

    let gc = GeneratorConfig { n_agents: n, goods_factor: 5, value_exponent_levels: 5, seed, trials: 100 };
    let market = generate_instance(&gc, trial);
    let tol = ToleranceConfig::default();
    let m = market.n_goods();
    let mut norm = Vec::with_capacity(n * m);
    for i in 0..n {
        let row_max = market.valuation_row(i).iter().fold(0.0f64, |a, &b| a.max(b));
        for j in 0..m {
            norm.push(market.value(i, j) / row_max);
        }
    }
    let market = Market::from_flat(n, m, norm, market.budgets().to_vec()).unwrap();

    let mut x = vec![1.0 / n as f64; n * m];
    let mut eta: f64 = 1.0;
    let mut objective = eg_objective(
        &market,
        &FractionalAllocation::from_flat(n, m, x.clone(), 1e-9).unwrap(),
    );
    let mut report_next = 1usize;
    for iter in 1..=warm {
        let mut g = vec![0.0; n * m];
        for i in 0..n {
            let v: f64 = market.valuation_row(i).iter().zip(&x[i * m..(i + 1) * m]).map(|(v, s)| v * s).sum();
            let scale = market.budget(i) / v;
            for j in 0..m {
                g[i * m + j] = scale * market.value(i, j);
            }
        }
        let slack = 16.0 * f64::EPSILON * objective.abs();
        let try_eta = |eta: f64| -> (FractionalAllocation, f64) {
            let raw: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + eta * gi).collect();
            let alloc = project_feasible(&raw, n, m);
            let obj = eg_objective(&market, &alloc);
            (alloc, obj)
        };
        let (mut ca, mut co) = try_eta(eta);
        while co < objective - slack && eta > 1e-12 {
            eta *= 0.5;
            let r = try_eta(eta);
            ca = r.0;
            co = r.1;
        }
        while eta * 2.0 <= 1e12 {
            let r = try_eta(eta * 2.0);
            if r.1 > co + slack {
                eta *= 2.0;
                ca = r.0;
                co = r.1;
            } else {
                break;
            }
        }
        x = (0..n).flat_map(|i| ca.row(i).to_vec()).collect();
        objective = co;
        if iter == report_next || iter == warm {
            let alloc = FractionalAllocation::from_flat(n, m, x.clone(), 1e-9).unwrap();
            let prices = rescaled(&market, &alloc);
            let rep = check_equilibrium(&market, &alloc, &prices, &tol).unwrap();
            println!(
                "iter {iter:>6} eta {eta:>9.2e} obj {objective:.14} clear {:.2e} budget {:.2e} mbb {:.2e}",
                rep.worst_clearing_violation, rep.worst_budget_residual, rep.worst_mbb_gap
            );
            report_next *= 2;
        }
    }
    // Decompose the stuck point: per-agent budget residuals and per-(agent,
    // good) mbb offenders.
    let alloc = FractionalAllocation::from_flat(n, m, x.clone(), 1e-9).unwrap();
    let prices = rescaled(&market, &alloc);
    let rep = check_equilibrium(&market, &alloc, &prices, &tol).unwrap();
    println!("final: clear {:.3e} budget {:.3e} mbb {:.3e}", rep.worst_clearing_violation, rep.worst_budget_residual, rep.worst_mbb_gap);
    for (i, br) in rep.budget_residuals.iter().enumerate() {
        if *br > 1e-7 {
            println!("  agent {i}: budget residual {br:.3e}");
        }
    }
    let mut bang_max = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..m {
            if prices.get(j) > 0.0 {
                bang_max[i] = bang_max[i].max(market.value(i, j) / prices.get(j));
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            let s = alloc.share(i, j);
            if s > 1e-8 && prices.get(j) > 0.0 {
                let gap = 1.0 - (market.value(i, j) / prices.get(j)) / bang_max[i];
                if gap > 1e-6 {
                    println!(
                        "  agent {i} good {j}: share {s:.3e} v {:.3e} p {:.3e} gap {gap:.3e}",
                        market.value(i, j),
                        prices.get(j)
                    );
                }
            }
        }
    }
}
// appended ladder scan runs in main via env var LADDER=1
