//! Independent ground-truth machinery: a two-agent reduction from integer
//! partitioning whose markets have integral equilibria exactly when the
//! integers split into two equal-sum halves, an exhaustive purity oracle on
//! that family, brute-force integral Pareto domination, and a comparative
//! instance family with a closed-form equilibrium.
//!
//! Everything here favors exactness over speed: the partition oracle works
//! in integer arithmetic end-to-end, and the enumeration sizes are guarded
//! by explicit limits that error rather than truncate.

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    check_equilibrium, IntegralAllocation, Market, ModelError, PriceVector, ToleranceConfig,
};

/// Largest good count the subset-sum oracle will enumerate (2^m subsets).
pub const PARTITION_GOODS_GUARD: usize = 24;
/// Largest assignment count (n^m) brute-force domination will enumerate.
pub const DOMINATION_GUARD: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance needs {needed} enumeration steps, over the guard {guard}")]
    TooLarge { needed: u128, guard: u128 },
    #[error("partition instance must be a nonempty list of positive integers")]
    BadInstance,
    #[error("partition values sum to {total}, too large for exact float prices")]
    ValuesTooLarge { total: u128 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A multiset of positive integers to be split into two equal-sum halves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionInstance {
    values: Vec<u64>,
}

impl PartitionInstance {
    /// Validates that the values are positive and their total small enough
    /// (≤ 2^53) that budgets and prices stay exact in floats.
    pub fn new(values: Vec<u64>) -> Result<Self, OracleError> {
        if values.is_empty() || values.iter().any(|&s| s == 0) {
            return Err(OracleError::BadInstance);
        }
        let total: u128 = values.iter().map(|&s| s as u128).sum();
        if total > (1u128 << 53) {
            return Err(OracleError::ValuesTooLarge { total });
        }
        Ok(PartitionInstance { values })
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn total(&self) -> u128 {
        self.values.iter().map(|&s| s as u128).sum()
    }
}

/// The reduction market: two agents, one good per integer, both agents
/// valuing good `j` at `s_j`, each with budget `(sum s)/2`.
pub fn partition_market(instance: &PartitionInstance) -> Market {
    let row: Vec<f64> = instance.values.iter().map(|&s| s as f64).collect();
    let half = instance.total() as f64 / 2.0;
    Market::new(vec![row.clone(), row], vec![half, half])
        .expect("positive integers make a valid market")
}

/// An equal-sum split, as ascending good-index sets; good 0 always sits in
/// `first`, which makes the witness canonical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PurityWitness {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

/// Whether the reduction market of an instance admits an integral
/// equilibrium, decided exactly by subset-sum enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PurityVerdict {
    pub is_pure: bool,
    pub witness: Option<PurityWitness>,
}

/// Decides purity of `partition_market(instance)` by exhausting equal-sum
/// 2-partitions in integer arithmetic. A found split is returned as a
/// witness after verifying — exactly and via the float equilibrium check —
/// that it induces an integral equilibrium at prices `p_j = s_j`.
pub fn purity_oracle_partition_family(
    instance: &PartitionInstance,
) -> Result<PurityVerdict, OracleError> {
    purity_oracle_with_guard(instance, PARTITION_GOODS_GUARD)
}

/// As [`purity_oracle_partition_family`] with an explicit good-count guard.
pub fn purity_oracle_with_guard(
    instance: &PartitionInstance,
    max_goods: usize,
) -> Result<PurityVerdict, OracleError> {
    let m = instance.values.len();
    if m > max_goods {
        return Err(OracleError::TooLarge {
            needed: 1u128 << m,
            guard: 1u128 << max_goods,
        });
    }
    let total = instance.total();
    if total % 2 == 1 {
        return Ok(PurityVerdict {
            is_pure: false,
            witness: None,
        });
    }
    let target = total / 2;

    // Good 0 goes to the first side; the remaining m-1 membership bits run
    // in increasing numeric order, so the first hit is canonical.
    for mask in 0u64..(1u64 << (m - 1)) {
        let mut sum = instance.values[0] as u128;
        for (offset, &s) in instance.values[1..].iter().enumerate() {
            if mask >> offset & 1 == 1 {
                sum += s as u128;
            }
        }
        if sum != target {
            continue;
        }
        let first: Vec<usize> = std::iter::once(0)
            .chain((1..m).filter(|j| mask >> (j - 1) & 1 == 1))
            .collect();
        let second: Vec<usize> = (1..m).filter(|j| mask >> (j - 1) & 1 == 0).collect();

        // Exact re-verification of the split and of the induced integral
        // equilibrium at prices p = s: sides partition the goods, sums
        // match, each agent's spending equals her budget.
        let side_sum = |side: &[usize]| -> u128 {
            side.iter().map(|&j| instance.values[j] as u128).sum()
        };
        assert_eq!(side_sum(&first), target, "first side sums to half");
        assert_eq!(side_sum(&second), target, "second side sums to half");
        assert_eq!(first.len() + second.len(), m, "sides partition the goods");

        let market = partition_market(instance);
        let mut owner = vec![None; m];
        for &j in &first {
            owner[j] = Some(0);
        }
        for &j in &second {
            owner[j] = Some(1);
        }
        let alloc = IntegralAllocation::new(2, owner).expect("valid owners");
        let prices =
            PriceVector::new(instance.values.iter().map(|&s| s as f64).collect::<Vec<_>>())
                .expect("positive integer prices");
        let report = check_equilibrium(
            &market,
            &alloc.to_fractional(),
            &prices,
            &ToleranceConfig::default(),
        )
        .expect("dimensions agree");
        assert!(
            report.is_equilibrium,
            "witness split must induce an equilibrium: {report:?}"
        );

        return Ok(PurityVerdict {
            is_pure: true,
            witness: Some(PurityWitness { first, second }),
        });
    }
    Ok(PurityVerdict {
        is_pure: false,
        witness: None,
    })
}

/// Searches every complete integral allocation for one that Pareto-
/// dominates `alloc`; returns the first dominator in lexicographic owner
/// order, or `None` when `alloc` is integrally Pareto-optimal.
pub fn brute_force_integral_po(
    market: &Market,
    alloc: &IntegralAllocation,
) -> Result<Option<IntegralAllocation>, OracleError> {
    brute_force_integral_po_with_guard(market, alloc, DOMINATION_GUARD)
}

/// As [`brute_force_integral_po`] with an explicit n^m enumeration guard.
pub fn brute_force_integral_po_with_guard(
    market: &Market,
    alloc: &IntegralAllocation,
    guard: u128,
) -> Result<Option<IntegralAllocation>, OracleError> {
    let n = market.n_agents();
    let m = market.n_goods();
    let needed = (n as u128)
        .checked_pow(m as u32)
        .filter(|&c| c <= guard)
        .ok_or(OracleError::TooLarge {
            needed: u128::MAX,
            guard,
        })?;

    let base_values: Vec<f64> = (0..n)
        .map(|i| market.bundle_value(i, &alloc.bundle(i)))
        .collect::<Result<_, _>>()?;

    let mut owners = vec![0usize; m];
    let mut candidate_values = vec![0.0f64; n];
    for step in 0..needed {
        if step > 0 {
            // Lexicographic successor: owner[0] is the most significant
            // digit, so increment from the right.
            let mut j = m - 1;
            loop {
                owners[j] += 1;
                if owners[j] < n {
                    break;
                }
                owners[j] = 0;
                j -= 1;
            }
        }
        candidate_values.iter_mut().for_each(|v| *v = 0.0);
        for (j, &owner) in owners.iter().enumerate() {
            candidate_values[owner] += market.value(owner, j);
        }
        let weakly_better = (0..n).all(|i| candidate_values[i] >= base_values[i]);
        let strictly_for_one = (0..n).any(|i| candidate_values[i] > base_values[i]);
        if weakly_better && strictly_for_one {
            let dominator =
                IntegralAllocation::new(n, owners.iter().map(|&o| Some(o)).collect())
                    .expect("owners in range");
            return Ok(Some(dominator));
        }
    }
    Ok(None)
}

/// The comparative family: `2n` unit-budget agents and `4n-1` goods. The
/// first `n` agents value the first `2n` goods at `n` and nothing else; the
/// last `n` value the first `2n` goods at `1-eps` and the remaining `2n-1`
/// goods at 1.
pub fn comparative_instance(n: usize, eps: f64) -> Result<Market, ModelError> {
    assert!(n >= 1, "family is defined for n >= 1");
    assert!(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
    let agents = 2 * n;
    let goods = 4 * n - 1;
    let mut valuations = Vec::with_capacity(agents);
    for _ in 0..n {
        let mut row = vec![0.0; goods];
        row[..2 * n].fill(n as f64);
        valuations.push(row);
    }
    for _ in 0..n {
        let mut row = vec![1.0; goods];
        row[..2 * n].fill(1.0 - eps);
        valuations.push(row);
    }
    Market::new(valuations, vec![1.0; agents])
}

/// The family's documented equilibrium prices: 1/2 for each of the first
/// `2n` goods and `n/(2n-1)` for each of the last `2n-1`. Valid for eps
/// large enough that the two agent groups separate cleanly; see the
/// boundary analysis in the comparative-family tests.
pub fn comparative_expected_prices(n: usize) -> PriceVector {
    assert!(n >= 1, "family is defined for n >= 1");
    let mut p = vec![0.5; 2 * n];
    p.extend(std::iter::repeat(n as f64 / (2.0 * n as f64 - 1.0)).take(2 * n - 1));
    PriceVector::new(p).expect("positive prices")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(values: &[u64]) -> PartitionInstance {
        PartitionInstance::new(values.to_vec()).unwrap()
    }

    #[test]
    fn partition_market_construction() {
        let m = partition_market(&instance(&[1, 1]));
        assert_eq!(m.n_agents(), 2);
        assert_eq!(m.n_goods(), 2);
        assert_eq!(m.budgets(), &[1.0, 1.0]);
        assert_eq!(m.valuation_row(0), &[1.0, 1.0]);
        assert_eq!(m.valuation_row(1), &[1.0, 1.0]);

        let m = partition_market(&instance(&[3, 1, 2]));
        assert_eq!(m.budgets(), &[3.0, 3.0]);
        assert_eq!(m.valuation_row(0), &[3.0, 1.0, 2.0]);

        // Odd totals give fractional budgets.
        let m = partition_market(&instance(&[5]));
        assert_eq!(m.budgets(), &[2.5, 2.5]);
    }

    #[test]
    fn purity_examples() {
        let v = purity_oracle_partition_family(&instance(&[1, 1])).unwrap();
        assert!(v.is_pure);
        assert_eq!(
            v.witness,
            Some(PurityWitness {
                first: vec![0],
                second: vec![1],
            })
        );

        let v = purity_oracle_partition_family(&instance(&[1, 2])).unwrap();
        assert!(!v.is_pure);
        assert!(v.witness.is_none());

        let v = purity_oracle_partition_family(&instance(&[3, 1, 2])).unwrap();
        assert!(v.is_pure);
        assert_eq!(
            v.witness,
            Some(PurityWitness {
                first: vec![0],
                second: vec![1, 2],
            })
        );
    }

    #[test]
    fn purity_even_total_may_still_fail() {
        // Total 6 is even but {1,1,4} has no equal split.
        let v = purity_oracle_partition_family(&instance(&[1, 1, 4])).unwrap();
        assert!(!v.is_pure);
    }

    #[test]
    fn purity_guard() {
        let big = instance(&vec![1; 25]);
        assert!(matches!(
            purity_oracle_partition_family(&big),
            Err(OracleError::TooLarge { .. })
        ));
        assert!(purity_oracle_with_guard(&big, 25).is_ok());
    }

    #[test]
    fn instance_validation() {
        assert!(matches!(
            PartitionInstance::new(vec![]),
            Err(OracleError::BadInstance)
        ));
        assert!(matches!(
            PartitionInstance::new(vec![1, 0]),
            Err(OracleError::BadInstance)
        ));
        assert!(matches!(
            PartitionInstance::new(vec![u64::MAX, u64::MAX]),
            Err(OracleError::ValuesTooLarge { .. })
        ));
    }

    #[test]
    fn domination_examples() {
        let market = Market::new(vec![vec![2.0, 1.0], vec![1.0, 2.0]], vec![1.0, 1.0]).unwrap();
        let good_alloc = IntegralAllocation::new(2, vec![Some(0), Some(1)]).unwrap();
        assert_eq!(brute_force_integral_po(&market, &good_alloc).unwrap(), None);

        // The swapped allocation is dominated by swapping back.
        let bad_alloc = IntegralAllocation::new(2, vec![Some(1), Some(0)]).unwrap();
        let dominator = brute_force_integral_po(&market, &bad_alloc)
            .unwrap()
            .expect("swap dominates");
        assert_eq!(dominator.owners(), &[Some(0), Some(1)]);
    }

    #[test]
    fn domination_single_agent_never_dominated() {
        let market = Market::new(vec![vec![1.0, 2.0, 3.0]], vec![1.0]).unwrap();
        let all_mine = IntegralAllocation::new(1, vec![Some(0); 3]).unwrap();
        assert_eq!(brute_force_integral_po(&market, &all_mine).unwrap(), None);
    }

    #[test]
    fn domination_guard() {
        let market = Market::new(
            vec![vec![1.0; 20], vec![1.0; 20], vec![1.0; 20]],
            vec![1.0; 3],
        )
        .unwrap();
        let alloc = IntegralAllocation::new(3, vec![Some(0); 20]).unwrap();
        assert!(matches!(
            brute_force_integral_po(&market, &alloc),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn comparative_family_construction() {
        let m = comparative_instance(1, 0.1).unwrap();
        assert_eq!(m.n_agents(), 2);
        assert_eq!(m.n_goods(), 3);
        assert_eq!(m.valuation_row(0), &[1.0, 1.0, 0.0]);
        assert_eq!(m.valuation_row(1), &[0.9, 0.9, 1.0]);
        assert_eq!(m.budgets(), &[1.0, 1.0]);

        let m = comparative_instance(2, 0.01).unwrap();
        assert_eq!(m.n_agents(), 4);
        assert_eq!(m.n_goods(), 7);
        assert_eq!(m.valuation_row(1)[..4], [2.0, 2.0, 2.0, 2.0]);
        assert_eq!(m.valuation_row(2)[..4], [0.99, 0.99, 0.99, 0.99]);
        assert_eq!(m.valuation_row(2)[4..], [1.0, 1.0, 1.0]);
    }

    #[test]
    fn comparative_price_formulas() {
        let p = comparative_expected_prices(1);
        assert_eq!(p.as_slice(), &[0.5, 0.5, 1.0]);

        let p = comparative_expected_prices(2);
        assert_eq!(&p.as_slice()[..4], &[0.5; 4]);
        for &q in &p.as_slice()[4..] {
            assert!((q - 2.0 / 3.0).abs() < 1e-15);
        }

        let p = comparative_expected_prices(4);
        assert_eq!(p.len(), 15);
        assert!((p.get(8) - 4.0 / 7.0).abs() < 1e-15);
        assert!((p.get(14) - 4.0 / 7.0).abs() < 1e-15);
    }
}
