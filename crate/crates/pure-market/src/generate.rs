//! Random instance generation for the experiment harness: equal-income
//! markets whose valuations are drawn uniformly from a doubly-exponential
//! value ladder, deterministic per (seed, trial).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Market;

/// How experiment instances are drawn. `m = n_agents * goods_factor` goods,
/// all budgets 1, and each valuation sampled uniformly from
/// `{2^(2^(k-1)) : k = 1..=value_exponent_levels}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub n_agents: usize,
    pub goods_factor: usize,
    pub seed: u64,
    /// Ladder depth K. At K <= 6 every bundle value stays under 2^53, so
    /// fairness comparisons are exact; K up to 10 stays finite but large
    /// bundle sums absorb small terms.
    pub value_exponent_levels: u32,
    pub trials: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_agents: 2,
            goods_factor: 5,
            seed: 0,
            value_exponent_levels: 5,
            trials: 100,
        }
    }
}

/// The value ladder `{2^(2^(k-1)) : k = 1..=levels}` = {2, 4, 16, 256, ...}.
/// Every entry is a power of two, hence exact in floating point up to
/// `levels = 10` (2^512).
///
/// Panics if `levels` is 0 or exceeds 10 (2^1024 overflows to infinity).
pub fn value_level_set(levels: u32) -> Vec<f64> {
    assert!(
        (1..=10).contains(&levels),
        "value ladder depth must be in 1..=10, got {levels}"
    );
    (1..=levels).map(|k| 2.0f64.powi(1 << (k - 1))).collect()
}

/// Draws the instance for one trial. Deterministic: the RNG is seeded from
/// `config.seed` with `trial` as the stream, so trials are independent and
/// reproducible in any order.
pub fn generate_instance(config: &GeneratorConfig, trial: u64) -> Market {
    assert!(config.n_agents >= 1, "need at least one agent");
    assert!(config.goods_factor >= 1, "need at least one good per agent");
    let levels = value_level_set(config.value_exponent_levels);
    let n = config.n_agents;
    let m = config.n_agents * config.goods_factor;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial);
    let flat: Vec<f64> = (0..n * m)
        .map(|_| levels[rng.random_range(0..levels.len())])
        .collect();
    Market::from_flat(n, m, flat, vec![1.0; n]).expect("generated values are positive")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_values() {
        assert_eq!(value_level_set(1), vec![2.0]);
        assert_eq!(value_level_set(5), vec![2.0, 4.0, 16.0, 256.0, 65536.0]);
        let ten = value_level_set(10);
        assert_eq!(ten[9], 2.0f64.powi(512));
        assert!(ten[9].is_finite());
    }

    #[test]
    #[should_panic(expected = "value ladder depth")]
    fn ladder_rejects_zero() {
        value_level_set(0);
    }

    #[test]
    #[should_panic(expected = "value ladder depth")]
    fn ladder_rejects_overflow_depth() {
        value_level_set(11);
    }

    #[test]
    fn instance_shape() {
        let config = GeneratorConfig {
            n_agents: 2,
            ..Default::default()
        };
        let market = generate_instance(&config, 0);
        assert_eq!(market.n_agents(), 2);
        assert_eq!(market.n_goods(), 10);
        assert_eq!(market.budgets(), &[1.0, 1.0]);
        let levels = value_level_set(config.value_exponent_levels);
        for i in 0..2 {
            for &v in market.valuation_row(i) {
                assert!(levels.contains(&v), "value {v} is off the ladder");
            }
        }
    }

    #[test]
    fn single_level_is_constant() {
        let config = GeneratorConfig {
            n_agents: 3,
            value_exponent_levels: 1,
            ..Default::default()
        };
        let market = generate_instance(&config, 7);
        for i in 0..3 {
            assert!(market.valuation_row(i).iter().all(|&v| v == 2.0));
        }
    }

    #[test]
    fn deterministic_per_seed_and_trial() {
        let config = GeneratorConfig {
            n_agents: 4,
            seed: 42,
            ..Default::default()
        };
        assert_eq!(generate_instance(&config, 3), generate_instance(&config, 3));
        assert_ne!(generate_instance(&config, 3), generate_instance(&config, 4));
        let reseeded = GeneratorConfig {
            seed: 43,
            ..config.clone()
        };
        assert_ne!(generate_instance(&config, 3), generate_instance(&reseeded, 3));
    }
}
