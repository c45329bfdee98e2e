//! Fairness predicates for integral allocations: envy-freeness (EF), its
//! one-good relaxations (EF1 and EF11), proportionality (Prop), and
//! proportionality up to one good (Prop1).
//!
//! Fairness is a budget-free notion: only the valuation matrix matters.
//! All comparisons are exact (no epsilon) — these predicates run on integral
//! allocations where no solver noise enters.

use serde::Serialize;

use crate::model::{IntegralAllocation, Market, ModelError};

/// One ordered pair `(envious, envied)` where plain envy-freeness fails,
/// with the relaxations evaluated on the same pair:
///
/// - EF1 removes the best good from the envied bundle
///   (`v_i(x_i) >= v_i(x_k \ {g})`);
/// - EF11 additionally adds the best good outside the envious bundle
///   (`v_i(x_i u {g1}) >= v_i(x_k \ {g2})`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEnvy {
    pub envious: usize,
    pub envied: usize,
    /// `v_i(x_i)`.
    pub own_value: f64,
    /// `v_i(x_k)`.
    pub envied_value: f64,
    /// Good in the envied bundle maximizing `v_i` (lowest index on ties).
    pub removed_good: Option<usize>,
    /// Good outside the envious bundle maximizing `v_i` (lowest index on
    /// ties); `None` when the envious agent already holds every good.
    pub added_good: Option<usize>,
    pub ef1_ok: bool,
    pub ef11_ok: bool,
}

/// One agent below her proportional share `v_i([m])/n`, with the best
/// single-good addition evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropShortfall {
    pub agent: usize,
    /// `v_i(x_i)`.
    pub bundle_value: f64,
    /// `v_i([m])/n`.
    pub fair_share: f64,
    /// Good outside the bundle maximizing `v_i` (lowest index on ties).
    pub added_good: Option<usize>,
    pub prop1_ok: bool,
}

/// The five fairness flags plus the evidence behind them. `envy` holds one
/// entry per ordered pair where EF fails; `shortfalls` one entry per agent
/// below her proportional share.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessProfile {
    pub ef: bool,
    pub ef1: bool,
    pub ef11: bool,
    pub prop: bool,
    pub prop1: bool,
    pub envy: Vec<PairEnvy>,
    pub shortfalls: Vec<PropShortfall>,
}

/// Evaluates all five predicates by exhaustive check over agent pairs.
///
/// An empty envied bundle is vacuously fair for EF1/EF11 (and can never be
/// envied under nonnegative valuations, so it never appears in `envy`).
/// Unassigned goods still count toward `v_i([m])` and are eligible as the
/// added good.
pub fn fairness_profile(
    market: &Market,
    alloc: &IntegralAllocation,
) -> Result<FairnessProfile, ModelError> {
    let n = market.n_agents();
    let m = market.n_goods();
    if alloc.n_agents() != n {
        return Err(ModelError::Dimension {
            what: "allocation agents",
            got: alloc.n_agents(),
            expected: n,
        });
    }
    if alloc.n_goods() != m {
        return Err(ModelError::Dimension {
            what: "allocation goods",
            got: alloc.n_goods(),
            expected: m,
        });
    }

    let bundles: Vec<Vec<usize>> = (0..n).map(|i| alloc.bundle(i)).collect();
    let own_values: Vec<f64> = (0..n)
        .map(|i| market.bundle_value(i, &bundles[i]).unwrap())
        .collect();

    // Best single good outside each agent's own bundle, by her valuation.
    let best_addition: Vec<Option<usize>> = (0..n)
        .map(|i| {
            let mut best: Option<usize> = None;
            for j in 0..m {
                if alloc.owner(j) == Some(i) {
                    continue;
                }
                if best.is_none_or(|b| market.value(i, j) > market.value(i, b)) {
                    best = Some(j);
                }
            }
            best
        })
        .collect();

    let mut envy = Vec::new();
    let mut ef1 = true;
    let mut ef11 = true;
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let envied_value = market.bundle_value(i, &bundles[k]).unwrap();
            if own_values[i] >= envied_value {
                continue; // no envy; the relaxations hold a fortiori
            }
            // v_i(x_k) > v_i(x_i) >= 0 forces x_k nonempty here.
            let removed = bundles[k]
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    market
                        .value(i, a)
                        .partial_cmp(&market.value(i, b))
                        .unwrap()
                        .then(b.cmp(&a)) // prefer the lowest index on ties
                })
                .expect("envied bundle is nonempty");
            let removed_value = market.value(i, removed);
            let added_value = best_addition[i].map_or(0.0, |g| market.value(i, g));
            let ef1_ok = own_values[i] >= envied_value - removed_value;
            let ef11_ok = own_values[i] + added_value >= envied_value - removed_value;
            ef1 &= ef1_ok;
            ef11 &= ef11_ok;
            envy.push(PairEnvy {
                envious: i,
                envied: k,
                own_value: own_values[i],
                envied_value,
                removed_good: Some(removed),
                added_good: best_addition[i],
                ef1_ok,
                ef11_ok,
            });
        }
    }
    let ef = envy.is_empty();

    let mut shortfalls = Vec::new();
    let mut prop1 = true;
    for i in 0..n {
        let fair_share = market.grand_bundle_value(i) / n as f64;
        if own_values[i] >= fair_share {
            continue;
        }
        let added_value = best_addition[i].map_or(0.0, |g| market.value(i, g));
        let prop1_ok = own_values[i] + added_value >= fair_share;
        prop1 &= prop1_ok;
        shortfalls.push(PropShortfall {
            agent: i,
            bundle_value: own_values[i],
            fair_share,
            added_good: best_addition[i],
            prop1_ok,
        });
    }
    let prop = shortfalls.is_empty();

    Ok(FairnessProfile {
        ef,
        ef1,
        ef11,
        prop,
        prop1,
        envy,
        shortfalls,
    })
}
