// Scratch: sweep the production solve_equilibrium over the same grid as the
// _probe sweep and print the same summary lines, to confirm the port
// reproduces the validated policy (iteration counts should match exactly).
use pure_market::generate::{generate_instance, GeneratorConfig};
use pure_market::solver::{solve_equilibrium, SolverConfig};
use pure_market::ToleranceConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let cap: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(400_000);
    let tol = ToleranceConfig::default();
    let config = SolverConfig {
        max_iters: cap,
        ..SolverConfig::default()
    };
    for seed in [0u64, 7, 13, 42, 1234] {
        for n in [2usize, 4, 8, 16] {
            let gc = GeneratorConfig {
                n_agents: n,
                goods_factor: 5,
                value_exponent_levels: 5,
                seed,
                trials: 100,
            };
            let mut iters_used: Vec<usize> = Vec::new();
            let mut failures = 0usize;
            for trial in 0..100u64 {
                let mkt = generate_instance(&gc, trial);
                match solve_equilibrium(&mkt, &config, &tol) {
                    Ok(out) => iters_used.push(out.iterations_used),
                    Err(e) => {
                        failures += 1;
                        println!("  seed {seed} n {n} trial {trial}: FAIL {e}");
                    }
                }
            }
            iters_used.sort_unstable();
            let max = iters_used.last().copied().unwrap_or(0);
            let p50 = iters_used.get(iters_used.len() / 2).copied().unwrap_or(0);
            let p90 = iters_used.get((iters_used.len() * 90) / 100).copied().unwrap_or(0);
            println!("seed {seed} n {n}: p50 {p50} p90 {p90} max {max} failures {failures}");
        }
    }
}
