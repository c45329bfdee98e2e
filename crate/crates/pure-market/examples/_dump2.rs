use pure_market::generate::{generate_instance, GeneratorConfig};
use pure_market::model::check_equilibrium;
use pure_market::solver::{eg_objective, extract_prices, project_feasible};
use pure_market::{FractionalAllocation, Market, PriceVector, ToleranceConfig};

fn main() {
    let gc = GeneratorConfig { n_agents: 4, goods_factor: 5, value_exponent_levels: 5, seed: 42, trials: 100 };
    let market = generate_instance(&gc, 29);
    let tol = ToleranceConfig::default();
    let (n, m) = (market.n_agents(), market.n_goods());
    let mut norm = Vec::with_capacity(n * m);
    for i in 0..n {
        let row_max = market.valuation_row(i).iter().fold(0.0f64, |a, &b| a.max(b));
        for j in 0..m {
            norm.push(market.value(i, j) / row_max);
        }
    }
    let market = Market::from_flat(n, m, norm, market.budgets().to_vec()).unwrap();

    let mut x = vec![1.0 / n as f64; n * m];
    let mut eta = 1.0f64;
    let mut objective = eg_objective(&market, &FractionalAllocation::from_flat(n, m, x.clone(), 1e-9).unwrap());
    for _ in 0..50_000 {
        let mut g = vec![0.0; n * m];
        for i in 0..n {
            let v: f64 = market.valuation_row(i).iter().zip(&x[i * m..(i + 1) * m]).map(|(v, s)| v * s).sum();
            let scale = market.budget(i) / v;
            for j in 0..m {
                g[i * m + j] = scale * market.value(i, j);
            }
        }
        let slack = 16.0 * f64::EPSILON * objective.abs();
        let try_eta = |eta: f64| {
            let raw: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + eta * gi).collect();
            let alloc = project_feasible(&raw, n, m);
            let obj = eg_objective(&market, &alloc);
            (alloc, obj)
        };
        let (mut ca, mut co) = try_eta(eta);
        let mut h = 0;
        while co < objective - slack && h < 60 {
            eta *= 0.5;
            h += 1;
            let r = try_eta(eta);
            ca = r.0;
            co = r.1;
        }
        if co < objective - slack {
            break;
        }
        let mut probe = eta;
        for _ in 0..60 {
            probe *= 2.0;
            if probe > 1e12 { break; }
            let (a, o) = try_eta(probe);
            if o < objective - slack { break; }
            if o > co + slack {
                eta = probe;
                ca = a;
                co = o;
            }
        }
        x = (0..n).flat_map(|i| ca.row(i).to_vec()).collect();
        objective = co;
    }
    let alloc = FractionalAllocation::from_flat(n, m, x.clone(), 1e-9).unwrap();
    let raw = extract_prices(&market, &alloc).unwrap();
    let factor = market.total_budget() / raw.total();
    let prices = PriceVector::new(raw.as_slice().iter().map(|p| p * factor).collect()).unwrap();
    let rep = check_equilibrium(&market, &alloc, &prices, &tol).unwrap();
    println!("obj {objective:.14}");
    println!("clear {:.6e} budget {:.6e} mbb {:.6e}", rep.worst_clearing_violation, rep.worst_budget_residual, rep.worst_mbb_gap);
    println!("budget residuals: {:?}", rep.budget_residuals);
    for i in 0..n {
        let v: f64 = market.valuation_row(i).iter().zip(alloc.row(i)).map(|(v, s)| v * s).sum();
        println!("agent {i} bundle value {v:.8e} spend {:.8e}", alloc.agent_spend(i, &prices));
    }
    for j in 0..m {
        let col = alloc.column_sum(j);
        if (col - 1.0).abs() > 1e-9 {
            println!("good {j}: colsum {col:.8} price {:.6e}", prices.get(j));
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
                    let v = market.value(i, j);
                    let p = prices.get(j);
                    println!("offender: agent {i} good {j} share {s:.4e} v {v:.4e} p {p:.4e} gap {gap:.4e}");
                }
            }
        }
    }
}
