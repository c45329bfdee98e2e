use pure_market::generate::{generate_instance, GeneratorConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args[1].parse().unwrap();
    let seed: u64 = args[2].parse().unwrap();
    let trial: u64 = args[3].parse().unwrap();
    let gc = GeneratorConfig { n_agents: n, goods_factor: 5, value_exponent_levels: 5, seed, trials: 100 };
    let m = generate_instance(&gc, trial);
    println!("budgets {:?}", m.budgets());
    for i in 0..m.n_agents() {
        println!("agent {i}: {:?}", m.valuation_row(i));
    }
}
