//! Grade integral allocations: the five fairness predicates and the
//! evidence behind a failing one.
//!
//! Rounding a divisible equilibrium into whole goods cannot keep everyone
//! envy-free, but the one-good relaxations always survive: removing one
//! good from the envied bundle (EF1), or swapping one good each way
//! (EF one-out-one-in), repairs every envious pair.

use pure_market::{fairness_profile, IntegralAllocation, Market};

fn show(market: &Market, alloc: &IntegralAllocation, label: &str) {
    let f = fairness_profile(market, alloc).unwrap();
    println!("{label}:");
    for i in 0..market.n_agents() {
        println!("  agent {i} holds {:?}", alloc.bundle(i));
    }
    println!(
        "  ef {} | ef1 {} | ef11 {} | prop {} | prop1 {}",
        f.ef, f.ef1, f.ef11, f.prop, f.prop1
    );
    for envy in &f.envy {
        println!(
            "  envy: agent {} values own bundle {:.2}, agent {}'s bundle {:.2}{}",
            envy.envious,
            envy.own_value,
            envy.envied,
            envy.envied_value,
            match envy.removed_good {
                Some(g) if envy.ef1_ok => format!(" (removing good {g} repairs it)"),
                _ => String::new(),
            }
        );
    }
    for s in &f.shortfalls {
        println!(
            "  below fair share: agent {} has {:.2} of {:.2}{}",
            s.agent,
            s.bundle_value,
            s.fair_share,
            match s.added_good {
                Some(g) if s.prop1_ok => format!(" (adding good {g} repairs it)"),
                _ => String::new(),
            }
        );
    }
    println!();
}

fn main() {
    // Two identical agents, one valuable good and one crumb. Whoever gets
    // the big good is envied, but EF1 holds: remove it and envy vanishes.
    let market = Market::new(
        vec![vec![10.0, 1.0], vec![10.0, 1.0]],
        vec![1.0, 1.0],
    )
    .unwrap();
    let lopsided = IntegralAllocation::new(2, vec![Some(0), Some(1)]).unwrap();
    show(&market, &lopsided, "contested big good");

    // A balanced split of four goods: envy-free outright.
    let market = Market::new(
        vec![
            vec![5.0, 1.0, 5.0, 1.0],
            vec![1.0, 5.0, 1.0, 5.0],
        ],
        vec![1.0, 1.0],
    )
    .unwrap();
    let balanced =
        IntegralAllocation::new(2, vec![Some(0), Some(1), Some(0), Some(1)]).unwrap();
    show(&market, &balanced, "each agent gets what it loves");

    // Everything to one agent: with three identical goods even the
    // relaxations give out — removing one good from the envied bundle, or
    // swapping one each way, still leaves envy. Allocations rounded from an
    // equilibrium never look like this; this failure needs a genuinely
    // unbalanced split.
    let market = Market::new(
        vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ],
        vec![1.0, 1.0],
    )
    .unwrap();
    let grabby = IntegralAllocation::new(2, vec![Some(0), Some(0), Some(0)]).unwrap();
    show(&market, &grabby, "one agent takes all three");
}
