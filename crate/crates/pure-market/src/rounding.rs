//! Rounds a forest-structured fractional equilibrium into an integral
//! equilibrium of a nearby market.
//!
//! The spending forest is rooted at agents, leaf goods go to their holders,
//! and then agents are processed top-down: each parentless agent greedily
//! keeps child goods while its original budget covers them; child goods it
//! cannot afford pass to one of their own child agents. The output bundles
//! define perturbed budgets `e'_i = p(x'_i)`, and `(x', p)` is an integral
//! equilibrium of the market with budgets `e'`. The perturbation obeys
//! `max_i |e'_i - e_i| <= max_j p_j` and `sum e' = sum e`, and every
//! perturbed budget comes with a witness good certifying the bound.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::forest::{build_spending_graph, find_cycle, GraphNode, SpendingGraph};
use crate::model::{
    check_equilibrium, EquilibriumReport, FractionalAllocation, IntegralAllocation, Market,
    ModelError, PriceVector, ToleranceConfig,
};

/// Relative bound on `|sum e' - sum e|`; the sums agree up to float
/// reassociation, so violations signal a logic bug rather than noise.
pub const BUDGET_SUM_RTOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RoundingError {
    #[error("input graph contains a cycle and cannot be rooted")]
    CyclicInput,
    #[error("spending graph is not a forest; cancel its cycles first")]
    NotAForest,
    #[error("input is not an equilibrium (worst violation {})", report.worst_violation())]
    NotAnEquilibrium { report: Box<EquilibriumReport> },
    #[error("agent {agent} has budget 0; rounding perturbs positive budgets")]
    NonPositiveBudget { agent: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A spending forest rooted at agents: parent/child links for both node
/// kinds, children in ascending index order. Goods with no edges (zero-
/// priced ones) belong to no tree: no parent, no children, not a root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedForest {
    /// One agent per component that contains an agent, ascending.
    pub roots: Vec<usize>,
    /// Parent good of each agent (`None` for roots and isolated agents).
    pub agent_parent: Vec<Option<usize>>,
    /// Parent agent of each good (`None` only for edgeless goods).
    pub good_parent: Vec<Option<usize>>,
    /// Child goods of each agent, ascending.
    pub agent_children: Vec<Vec<usize>>,
    /// Child agents of each good, ascending.
    pub good_children: Vec<Vec<usize>>,
}

/// Roots every tree of the forest at its lowest-index agent node.
pub fn root_forest(graph: &SpendingGraph) -> Result<RootedForest, RoundingError> {
    let n = graph.n_agents();
    let m = graph.n_goods();
    let mut forest = RootedForest {
        roots: Vec::new(),
        agent_parent: vec![None; n],
        good_parent: vec![None; m],
        agent_children: vec![Vec::new(); n],
        good_children: vec![Vec::new(); m],
    };
    let mut agent_seen = vec![false; n];
    let mut good_seen = vec![false; m];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if agent_seen[root] {
            continue;
        }
        agent_seen[root] = true;
        forest.roots.push(root);
        queue.push_back(GraphNode::Agent(root));
        while let Some(node) = queue.pop_front() {
            match node {
                GraphNode::Agent(i) => {
                    for &(j, _) in graph.agent_goods(i) {
                        if forest.agent_parent[i] == Some(j) {
                            continue;
                        }
                        if good_seen[j] {
                            return Err(RoundingError::CyclicInput);
                        }
                        good_seen[j] = true;
                        forest.good_parent[j] = Some(i);
                        forest.agent_children[i].push(j);
                        queue.push_back(GraphNode::Good(j));
                    }
                }
                GraphNode::Good(j) => {
                    for &k in graph.good_agents(j) {
                        if forest.good_parent[j] == Some(k) {
                            continue;
                        }
                        if agent_seen[k] {
                            return Err(RoundingError::CyclicInput);
                        }
                        agent_seen[k] = true;
                        forest.agent_parent[k] = Some(j);
                        forest.good_children[j].push(k);
                        queue.push_back(GraphNode::Agent(k));
                    }
                }
            }
        }
    }
    Ok(forest)
}

/// Evidence that a perturbed budget stayed within one good's price of the
/// original, with the good in question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BudgetWitness {
    /// `e'_agent < e_agent`: a good the agent spent on but did not receive,
    /// priced high enough that `e_agent <= e'_agent + p_good`.
    Deficit { agent: usize, good: usize },
    /// `e'_agent > e_agent`: a good in the agent's bundle with
    /// `e'_agent <= e_agent + p_good`.
    Surplus { agent: usize, good: usize },
}

impl BudgetWitness {
    pub fn agent(&self) -> usize {
        match *self {
            BudgetWitness::Deficit { agent, .. } | BudgetWitness::Surplus { agent, .. } => agent,
        }
    }

    pub fn good(&self) -> usize {
        match *self {
            BudgetWitness::Deficit { good, .. } | BudgetWitness::Surplus { good, .. } => good,
        }
    }
}

/// The rounded outcome: integral allocation, the budgets it exhausts at the
/// unchanged prices, and the perturbation metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundingResult {
    pub alloc: IntegralAllocation,
    /// `e'_i`: the exact price of agent `i`'s bundle, summed in ascending
    /// good order.
    pub budgets_new: Vec<f64>,
    /// Unchanged input prices.
    pub prices: PriceVector,
    /// `max_i |e'_i - e_i|`.
    pub perturbation_inf: f64,
    /// `max_j p_j`; always an upper bound for `perturbation_inf`.
    pub price_inf: f64,
    /// `|sum e' - sum e|`; zero up to float reassociation.
    pub budget_sum_delta: f64,
    /// One witness per agent whose budget moved beyond the check slack.
    pub witnesses: Vec<BudgetWitness>,
}

/// Rounds an equilibrium whose spending graph is a forest into an integral
/// allocation plus the perturbed budgets it exhausts.
///
/// Shares within `tol.spend` of 1 are treated as integral when building the
/// working graph, so solver crumbs on an essentially-settled good do not
/// register as contested edges. The allocation itself is not modified.
pub fn round_to_pure(
    market: &Market,
    alloc: &FractionalAllocation,
    prices: &PriceVector,
    tol: &ToleranceConfig,
) -> Result<RoundingResult, RoundingError> {
    let n = market.n_agents();
    let m = market.n_goods();
    if let Some(agent) = (0..n).find(|&i| market.budget(i) == 0.0) {
        return Err(RoundingError::NonPositiveBudget { agent });
    }
    let report = check_equilibrium(market, alloc, prices, tol)?;
    if !report.is_equilibrium {
        return Err(RoundingError::NotAnEquilibrium {
            report: Box::new(report),
        });
    }

    // Near-integral snap: when one agent holds essentially all of a good,
    // drop the other agents' crumb shares from the working copy so the good
    // is a leaf of the graph. Only the graph sees this copy.
    let mut working = alloc.clone();
    for j in 0..m {
        if prices.get(j) <= 0.0 {
            continue;
        }
        let holder = (0..n)
            .max_by(|&a, &b| {
                working
                    .share(a, j)
                    .partial_cmp(&working.share(b, j))
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .expect("market has agents");
        if working.share(holder, j) >= 1.0 - tol.spend {
            for i in (0..n).filter(|&i| i != holder) {
                working.set_share(i, j, 0.0);
            }
        }
    }
    let graph = build_spending_graph(&working, prices, tol.spend);
    if find_cycle(&graph).is_some() {
        return Err(RoundingError::NotAForest);
    }
    let forest = root_forest(&graph).expect("acyclic graph roots cleanly");

    let mut owners = IntegralAllocation::unassigned(n, m);
    let mut alive_agent = vec![true; n];
    // Goods outside the graph (zero-priced or crumb-consumed) are handled
    // after the main loop.
    let mut alive_good: Vec<bool> = (0..m).map(|j| graph.good_degree(j) > 0).collect();
    // Running price of each agent's bundle, in assignment order; used only
    // for the budget-cap test. The returned budgets are recomputed from the
    // final bundles in ascending good order.
    let mut bundle_price = vec![0.0f64; n];

    let assign = |owners: &mut IntegralAllocation,
                  bundle_price: &mut Vec<f64>,
                  good: usize,
                  agent: usize| {
        owners.assign(good, agent).expect("indices are in range");
        bundle_price[agent] += prices.get(good);
    };

    // Leaf goods are held integrally; they go straight to their holders.
    for j in 0..m {
        if alive_good[j] && forest.good_children[j].is_empty() {
            let holder = forest.good_parent[j].expect("a good with an edge has a parent");
            assign(&mut owners, &mut bundle_price, j, holder);
            alive_good[j] = false;
        }
    }

    let mut agent_parent = forest.agent_parent.clone();
    let mut parentless: BTreeSet<usize> = (0..n).filter(|&i| agent_parent[i].is_none()).collect();

    while let Some(i) = parentless.pop_first() {
        debug_assert!(alive_agent[i] && agent_parent[i].is_none());
        // Keep child goods while the original budget covers them; the +abs
        // slack keeps exact-equality cases from flipping on round-off.
        for &j in &forest.agent_children[i] {
            if alive_good[j] && bundle_price[i] + prices.get(j) <= market.budget(i) + tol.abs {
                assign(&mut owners, &mut bundle_price, j, i);
                alive_good[j] = false;
                for &k in &forest.good_children[j] {
                    debug_assert!(alive_agent[k], "children of a live good are unprocessed");
                    agent_parent[k] = None;
                    parentless.insert(k);
                }
            }
        }
        // Unaffordable child goods pass to their lowest-index child agent.
        // Such a child exists: goods never become leaves while their parent
        // agent is alive, so a still-live child good has live children.
        for &j in &forest.agent_children[i] {
            if !alive_good[j] {
                continue;
            }
            let heir = forest.good_children[j]
                .iter()
                .copied()
                .find(|&k| alive_agent[k])
                .expect("live non-leaf good keeps a live child agent");
            assign(&mut owners, &mut bundle_price, j, heir);
            alive_good[j] = false;
            for &k in &forest.good_children[j] {
                agent_parent[k] = None;
                parentless.insert(k);
            }
        }
        alive_agent[i] = false;
    }
    debug_assert!(alive_agent.iter().all(|&a| !a), "every agent is processed");
    debug_assert!(alive_good.iter().all(|&g| !g), "every graph good is assigned");

    // Goods no one spends on (zero-priced, or priced below the clearing
    // exemption with only crumb shares) default to the first agent; at
    // price ~0 they change no budget and satisfy MBB by the zero-price
    // convention.
    for j in 0..m {
        if owners.owner(j).is_none() {
            assign(&mut owners, &mut bundle_price, j, 0);
        }
    }

    let budgets_new: Vec<f64> = (0..n)
        .map(|i| {
            owners
                .bundle(i)
                .iter()
                .map(|&j| prices.get(j))
                .sum::<f64>()
        })
        .collect();
    let perturbation_inf = (0..n)
        .map(|i| (budgets_new[i] - market.budget(i)).abs())
        .fold(0.0f64, f64::max);
    let price_inf = prices.max_price();
    let budget_sum_delta = (budgets_new.iter().sum::<f64>() - market.total_budget()).abs();

    let mut witnesses = Vec::new();
    for i in 0..n {
        let slack = tol.abs + tol.rel * market.budget(i);
        let delta = budgets_new[i] - market.budget(i);
        if delta < -slack {
            let found = (0..m).find(|&g| {
                alloc.share(i, g) > 0.0
                    && owners.owner(g) != Some(i)
                    && market.budget(i) <= budgets_new[i] + prices.get(g) + slack
            });
            if let Some(good) = found {
                witnesses.push(BudgetWitness::Deficit { agent: i, good });
            }
        } else if delta > slack {
            let found = owners
                .bundle(i)
                .into_iter()
                .find(|&g| budgets_new[i] <= market.budget(i) + prices.get(g) + slack);
            if let Some(good) = found {
                witnesses.push(BudgetWitness::Surplus { agent: i, good });
            }
        }
    }

    Ok(RoundingResult {
        alloc: owners,
        budgets_new,
        prices: prices.clone(),
        perturbation_inf,
        price_inf,
        budget_sum_delta,
        witnesses,
    })
}

/// Independent audit of a `RoundingResult` against the original market.
#[derive(Debug, Clone, Serialize)]
pub struct RoundingCertificate {
    /// Equilibrium check of `(x', p)` in the market with budgets `e'`.
    pub report: EquilibriumReport,
    /// Recomputed `max|e'-e|` and `max p` match the recorded fields and
    /// obey `perturbation_inf <= price_inf`.
    pub perturbation_ok: bool,
    /// `|sum e' - sum e| <= BUDGET_SUM_RTOL * sum e`.
    pub budget_sum_ok: bool,
    /// Each `e'_i` is bit-for-bit the ascending-order price of bundle `i`.
    pub exact_budgets_ok: bool,
    pub all_goods_assigned: bool,
    /// Every out-of-slack budget has a witness of the right kind whose good
    /// passes the membership and price-bound tests.
    pub witnesses_ok: bool,
    /// Equilibria are fractionally Pareto-efficient (first welfare
    /// theorem), so this mirrors `report.is_equilibrium`.
    pub fpo_certified: bool,
    pub pass: bool,
}

/// Re-derives every claimed property of `result` from scratch. Never
/// errors: unverifiable inputs (wrong dimensions, non-finite budgets)
/// produce a failing certificate.
pub fn certify_rounding(
    market: &Market,
    result: &RoundingResult,
    tol: &ToleranceConfig,
) -> RoundingCertificate {
    let n = market.n_agents();
    let m = market.n_goods();
    let dims_ok = result.alloc.n_agents() == n
        && result.alloc.n_goods() == m
        && result.prices.len() == m
        && result.budgets_new.len() == n;

    let report = if dims_ok {
        market
            .with_budgets(result.budgets_new.clone())
            .ok()
            .and_then(|pure| {
                check_equilibrium(&pure, &result.alloc.to_fractional(), &result.prices, tol).ok()
            })
    } else {
        None
    };
    let report = report.unwrap_or_else(|| EquilibriumReport::failed(n));

    if !dims_ok {
        return RoundingCertificate {
            report,
            perturbation_ok: false,
            budget_sum_ok: false,
            exact_budgets_ok: false,
            all_goods_assigned: false,
            witnesses_ok: false,
            fpo_certified: false,
            pass: false,
        };
    }

    let pert = (0..n)
        .map(|i| (result.budgets_new[i] - market.budget(i)).abs())
        .fold(0.0f64, f64::max);
    let price_inf = result.prices.max_price();
    let perturbation_ok = pert.to_bits() == result.perturbation_inf.to_bits()
        && price_inf.to_bits() == result.price_inf.to_bits()
        && pert <= price_inf;

    let total = market.total_budget();
    let sum_delta = (result.budgets_new.iter().sum::<f64>() - total).abs();
    let budget_sum_ok = sum_delta.to_bits() == result.budget_sum_delta.to_bits()
        && sum_delta <= BUDGET_SUM_RTOL * total;

    let exact_budgets_ok = (0..n).all(|i| {
        let recomputed: f64 = result
            .alloc
            .bundle(i)
            .iter()
            .map(|&j| result.prices.get(j))
            .sum();
        recomputed.to_bits() == result.budgets_new[i].to_bits()
    });

    let all_goods_assigned = result.alloc.fully_assigned();

    let witness_for = |agent: usize| result.witnesses.iter().find(|w| w.agent() == agent);
    let witnesses_ok = (0..n).all(|i| {
        let slack = tol.abs + tol.rel * market.budget(i);
        let delta = result.budgets_new[i] - market.budget(i);
        if delta < -slack {
            matches!(
                witness_for(i),
                Some(&BudgetWitness::Deficit { good, .. })
                    if good < m
                        && result.alloc.owner(good) != Some(i)
                        && market.budget(i)
                            <= result.budgets_new[i] + result.prices.get(good) + slack
            )
        } else if delta > slack {
            matches!(
                witness_for(i),
                Some(&BudgetWitness::Surplus { good, .. })
                    if good < m
                        && result.alloc.owner(good) == Some(i)
                        && result.budgets_new[i]
                            <= market.budget(i) + result.prices.get(good) + slack
            )
        } else {
            true
        }
    });

    let fpo_certified = report.is_equilibrium;
    let pass = report.is_equilibrium
        && perturbation_ok
        && budget_sum_ok
        && exact_budgets_ok
        && all_goods_assigned
        && witnesses_ok;
    RoundingCertificate {
        report,
        perturbation_ok,
        budget_sum_ok,
        exact_budgets_ok,
        all_goods_assigned,
        witnesses_ok,
        fpo_certified,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alloc(rows: Vec<Vec<f64>>) -> FractionalAllocation {
        FractionalAllocation::new(rows, 1e-9).unwrap()
    }

    fn prices(p: Vec<f64>) -> PriceVector {
        PriceVector::new(p).unwrap()
    }

    fn graph_of(x: &FractionalAllocation, p: &PriceVector) -> SpendingGraph {
        build_spending_graph(x, p, 1e-9)
    }

    #[test]
    fn root_forest_path() {
        // a0 - g0 - a1: rooted at a0.
        let g = graph_of(&alloc(vec![vec![0.5], vec![0.5]]), &prices(vec![2.0]));
        let f = root_forest(&g).unwrap();
        assert_eq!(f.roots, vec![0]);
        assert_eq!(f.agent_parent, vec![None, Some(0)]);
        assert_eq!(f.good_parent, vec![Some(0)]);
        assert_eq!(f.agent_children, vec![vec![0], vec![]]);
        assert_eq!(f.good_children, vec![vec![1]]);
    }

    #[test]
    fn root_forest_isolated_agent_and_star() {
        // Agent 1 spends nothing: a singleton tree.
        let g = graph_of(&alloc(vec![vec![1.0], vec![0.0]]), &prices(vec![1.0]));
        let f = root_forest(&g).unwrap();
        assert_eq!(f.roots, vec![0, 1]);
        assert_eq!(f.agent_parent, vec![None, None]);

        // Star: one agent holding three goods.
        let g = graph_of(
            &alloc(vec![vec![1.0, 1.0, 1.0]]),
            &prices(vec![1.0, 2.0, 3.0]),
        );
        let f = root_forest(&g).unwrap();
        assert_eq!(f.roots, vec![0]);
        assert_eq!(f.agent_children, vec![vec![0, 1, 2]]);
        assert!(f.good_children.iter().all(Vec::is_empty));
    }

    #[test]
    fn root_forest_skips_edgeless_goods() {
        let g = graph_of(&alloc(vec![vec![1.0, 1.0]]), &prices(vec![1.0, 0.0]));
        let f = root_forest(&g).unwrap();
        assert_eq!(f.good_parent, vec![Some(0), None]);
        assert_eq!(f.agent_children, vec![vec![0]]);
    }

    #[test]
    fn root_forest_rejects_cycles() {
        let g = graph_of(
            &alloc(vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            &prices(vec![1.0, 1.0]),
        );
        assert!(matches!(root_forest(&g), Err(RoundingError::CyclicInput)));
    }

    #[test]
    fn round_symmetric_three_goods() {
        // Two identical agents, three goods at price 2/3, middle good split.
        // The first agent cannot afford the contested good on top of its
        // leaf good, so the second inherits it.
        let market = Market::new(
            vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]],
            vec![1.0, 1.0],
        )
        .unwrap();
        let third = 1.0 / 3.0;
        let x = alloc(vec![vec![1.0, 0.5, 0.0], vec![0.0, 0.5, 1.0]]);
        let p = prices(vec![2.0 * third, 2.0 * third, 2.0 * third]);
        let tol = ToleranceConfig::default();
        let result = round_to_pure(&market, &x, &p, &tol).unwrap();

        assert_eq!(result.alloc.bundle(0), vec![0]);
        assert_eq!(result.alloc.bundle(1), vec![1, 2]);
        assert!((result.budgets_new[0] - 2.0 * third).abs() < 1e-15);
        assert!((result.budgets_new[1] - 4.0 * third).abs() < 1e-15);
        assert!((result.perturbation_inf - third).abs() < 1e-15);
        assert!((result.price_inf - 2.0 * third).abs() < 1e-15);
        assert!(result.budget_sum_delta <= 1e-9 * 2.0);
        assert_eq!(
            result.witnesses,
            vec![
                BudgetWitness::Deficit { agent: 0, good: 1 },
                BudgetWitness::Surplus { agent: 1, good: 1 },
            ]
        );

        let cert = certify_rounding(&market, &result, &tol);
        assert!(cert.pass, "audit fails: {cert:?}");
        assert!(cert.report.is_equilibrium && cert.fpo_certified);
    }

    #[test]
    fn round_single_contested_good() {
        // One good at price 2 split between two unit-budget agents: neither
        // can afford it from the root position, so the child inherits it
        // and ends with budget 2 while the root drops to 0.
        let market = Market::new(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        let x = alloc(vec![vec![0.5], vec![0.5]]);
        let p = prices(vec![2.0]);
        let tol = ToleranceConfig::default();
        let result = round_to_pure(&market, &x, &p, &tol).unwrap();

        assert_eq!(result.alloc.bundle(0), Vec::<usize>::new());
        assert_eq!(result.alloc.bundle(1), vec![0]);
        assert_eq!(result.budgets_new, vec![0.0, 2.0]);
        assert_eq!(result.perturbation_inf, 1.0);
        assert_eq!(result.price_inf, 2.0);
        assert_eq!(
            result.witnesses,
            vec![
                BudgetWitness::Deficit { agent: 0, good: 0 },
                BudgetWitness::Surplus { agent: 1, good: 0 },
            ]
        );
        assert!(certify_rounding(&market, &result, &tol).pass);
    }

    #[test]
    fn round_integral_input_is_fixpoint() {
        let market = Market::new(vec![vec![2.0, 1.0], vec![1.0, 2.0]], vec![1.0, 1.0]).unwrap();
        let x = alloc(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let p = prices(vec![1.0, 1.0]);
        let tol = ToleranceConfig::default();
        let result = round_to_pure(&market, &x, &p, &tol).unwrap();
        assert_eq!(result.alloc.bundle(0), vec![0]);
        assert_eq!(result.alloc.bundle(1), vec![1]);
        assert_eq!(result.budgets_new, vec![1.0, 1.0]);
        assert_eq!(result.perturbation_inf, 0.0);
        assert!(result.witnesses.is_empty());
        assert!(certify_rounding(&market, &result, &tol).pass);
    }

    #[test]
    fn round_zero_priced_good_goes_to_first_agent() {
        // Good 1 is valued by nobody and priced 0; it lands with agent 0
        // without touching any budget.
        let market = Market::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let x = alloc(vec![vec![0.5, 0.0], vec![0.5, 0.0]]);
        let p = prices(vec![2.0, 0.0]);
        let tol = ToleranceConfig::default();
        let result = round_to_pure(&market, &x, &p, &tol).unwrap();
        assert_eq!(result.alloc.owner(1), Some(0));
        assert_eq!(result.budgets_new, vec![0.0, 2.0]);
        assert!(result.alloc.fully_assigned());
        assert!(certify_rounding(&market, &result, &tol).pass);
    }

    #[test]
    fn crumb_shares_snap_to_the_holder() {
        // Agent 0 holds good 0 except for a 5e-8 crumb from agent 1 that
        // would close a cycle if taken at face value; the snap drops it and
        // rounding proceeds on the path graph. A crumb above the edge
        // threshold forces its column slightly over 1, so good 2 runs
        // equally under-allocated to keep the money totals consistent (the
        // solver's price rescaling plays that role on real outcomes).
        let crumb = 5e-8;
        let hold = 1.0 - 1e-10;
        let market = Market::new(
            vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]],
            vec![hold + 0.5, crumb + 0.5 + (1.0 - crumb)],
        )
        .unwrap();
        let x = FractionalAllocation::new(
            vec![vec![hold, 0.5, 0.0], vec![crumb, 0.5, 1.0 - crumb]],
            1e-6,
        )
        .unwrap();
        let p = prices(vec![1.0, 1.0, 1.0]);
        let tol = ToleranceConfig::default();

        // Taken literally the spending graph is cyclic.
        assert!(find_cycle(&build_spending_graph(&x, &p, tol.spend)).is_some());

        let result = round_to_pure(&market, &x, &p, &tol).unwrap();
        assert_eq!(result.alloc.bundle(0), vec![0]);
        assert_eq!(result.alloc.bundle(1), vec![1, 2]);
        assert_eq!(result.budgets_new, vec![1.0, 2.0]);
        assert!((result.perturbation_inf - 0.5).abs() < 1e-7);
        let cert = certify_rounding(&market, &result, &tol);
        assert!(cert.pass, "audit fails: {cert:?}");
    }

    #[test]
    fn round_rejects_bad_inputs() {
        let market = Market::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0]).unwrap();
        let tol = ToleranceConfig::default();
        // Cyclic spending graph.
        let x = alloc(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let p = prices(vec![1.0, 1.0]);
        assert!(matches!(
            round_to_pure(&market, &x, &p, &tol),
            Err(RoundingError::NotAForest)
        ));
        // Not an equilibrium: agent 1's budget is unspent.
        let x = alloc(vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(
            round_to_pure(&market, &x, &p, &tol),
            Err(RoundingError::NotAnEquilibrium { .. })
        ));
        // Zero original budget.
        let market0 = Market::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            round_to_pure(&market0, &x, &p, &tol),
            Err(RoundingError::NonPositiveBudget { agent: 1 })
        ));
    }

    #[test]
    fn certify_flags_tampered_budgets() {
        let market = Market::new(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        let x = alloc(vec![vec![0.5], vec![0.5]]);
        let p = prices(vec![2.0]);
        let tol = ToleranceConfig::default();
        let mut result = round_to_pure(&market, &x, &p, &tol).unwrap();
        result.budgets_new[0] += 10.0 * result.price_inf;
        let cert = certify_rounding(&market, &result, &tol);
        assert!(!cert.perturbation_ok);
        assert!(!cert.exact_budgets_ok);
        assert!(!cert.budget_sum_ok);
        assert!(!cert.pass);
    }

    #[test]
    fn certify_flags_non_mbb_owner() {
        // Swapping both goods to the wrong agents keeps budgets consistent
        // but breaks the MBB condition.
        let market = Market::new(vec![vec![2.0, 1.0], vec![1.0, 2.0]], vec![1.0, 1.0]).unwrap();
        let x = alloc(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let p = prices(vec![1.0, 1.0]);
        let tol = ToleranceConfig::default();
        let mut result = round_to_pure(&market, &x, &p, &tol).unwrap();
        result.alloc = IntegralAllocation::new(2, vec![Some(1), Some(0)]).unwrap();
        let cert = certify_rounding(&market, &result, &tol);
        assert!(!cert.report.mbb_ok);
        assert!(!cert.fpo_certified);
        assert!(!cert.pass);
    }

    #[test]
    fn certify_flags_missing_witness() {
        let market = Market::new(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        let x = alloc(vec![vec![0.5], vec![0.5]]);
        let p = prices(vec![2.0]);
        let tol = ToleranceConfig::default();
        let mut result = round_to_pure(&market, &x, &p, &tol).unwrap();
        result.witnesses.clear();
        let cert = certify_rounding(&market, &result, &tol);
        assert!(!cert.witnesses_ok);
        assert!(!cert.pass);
    }
}
