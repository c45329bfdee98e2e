//! Core market model: markets, allocations, prices, and the equilibrium
//! conditions as checkable predicates.
//!
//! A Fisher market is a tuple of agents, goods, a nonnegative additive
//! valuation matrix, and nonnegative budgets. A market outcome `(x, p)` is
//! an equilibrium when it clears the market, exhausts every budget, and
//! spends each agent's money only on her maximum bang-per-buck (MBB) goods.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Numeric tolerances threaded through every check in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Absolute slack, used for market clearing and budget residuals.
    pub abs: f64,
    /// Relative slack, used for budget residuals and MBB ratio comparisons.
    pub rel: f64,
    /// Spending threshold: shares at or below this are treated as zero when
    /// building spending graphs and filtering MBB checks.
    pub spend: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            abs: 1e-7,
            rel: 1e-5,
            spend: 1e-9,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("market must have at least one agent and one good")]
    Empty,
    #[error("valuation row {row} has {got} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("valuations[{agent}][{good}] = {value} is negative or not finite")]
    BadValuation {
        agent: usize,
        good: usize,
        value: f64,
    },
    #[error("agent {agent} values every good at zero")]
    ZeroValuationRow { agent: usize },
    #[error("budgets has {got} entries, expected {expected}")]
    BudgetCount { got: usize, expected: usize },
    #[error("budget[{agent}] = {value} must be nonnegative and finite")]
    BadBudget { agent: usize, value: f64 },
    #[error("agent index {index} out of range (n = {n_agents})")]
    AgentIndex { index: usize, n_agents: usize },
    #[error("good index {index} out of range (m = {n_goods})")]
    GoodIndex { index: usize, n_goods: usize },
    #[error("{what} has wrong dimensions: got {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("shares[{agent}][{good}] = {value} outside [0, 1]")]
    BadShare {
        agent: usize,
        good: usize,
        value: f64,
    },
    #[error("good {good} is over-allocated: column sum {sum} exceeds 1 + {tol}")]
    OverAllocated { good: usize, sum: f64, tol: f64 },
    #[error("price[{good}] = {value} must be nonnegative and finite")]
    BadPrice { good: usize, value: f64 },
    #[error("owner[{good}] = {owner} out of range (n = {n_agents})")]
    BadOwner {
        good: usize,
        owner: usize,
        n_agents: usize,
    },
    #[error("agent {agent} positively values zero-priced good {good}: MBB ratio is unbounded")]
    UnboundedMbb { agent: usize, good: usize },
    #[error("all prices are zero")]
    DegeneratePrices,
}

/// A Fisher market: `n` agents with nonnegative budgets, `m` divisible
/// goods, and a nonnegative additive valuation matrix. Every agent values at
/// least one good strictly positively (the log objective needs it). The
/// solver additionally requires strictly positive budgets; zero budgets
/// arise only in the perturbed markets built by rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    n_agents: usize,
    n_goods: usize,
    /// Row-major `n_agents x n_goods`.
    valuations: Vec<f64>,
    budgets: Vec<f64>,
}

impl Market {
    pub fn new(valuations: Vec<Vec<f64>>, budgets: Vec<f64>) -> Result<Self, ModelError> {
        let n_agents = valuations.len();
        if n_agents == 0 {
            return Err(ModelError::Empty);
        }
        let n_goods = valuations[0].len();
        let mut flat = Vec::with_capacity(n_agents * n_goods);
        for (row, vals) in valuations.iter().enumerate() {
            if vals.len() != n_goods {
                return Err(ModelError::RaggedRow {
                    row,
                    got: vals.len(),
                    expected: n_goods,
                });
            }
            flat.extend_from_slice(vals);
        }
        Self::from_flat(n_agents, n_goods, flat, budgets)
    }

    pub fn from_flat(
        n_agents: usize,
        n_goods: usize,
        valuations: Vec<f64>,
        budgets: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if n_agents == 0 || n_goods == 0 {
            return Err(ModelError::Empty);
        }
        if valuations.len() != n_agents * n_goods {
            return Err(ModelError::Dimension {
                what: "valuations",
                got: valuations.len(),
                expected: n_agents * n_goods,
            });
        }
        for i in 0..n_agents {
            let mut any_positive = false;
            for j in 0..n_goods {
                let v = valuations[i * n_goods + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(ModelError::BadValuation {
                        agent: i,
                        good: j,
                        value: v,
                    });
                }
                any_positive |= v > 0.0;
            }
            if !any_positive {
                return Err(ModelError::ZeroValuationRow { agent: i });
            }
        }
        if budgets.len() != n_agents {
            return Err(ModelError::BudgetCount {
                got: budgets.len(),
                expected: n_agents,
            });
        }
        for (i, &e) in budgets.iter().enumerate() {
            // Zero budgets are legal (the perturbed market produced by
            // rounding can shut an agent out entirely); negatives are not.
            if !e.is_finite() || e < 0.0 {
                return Err(ModelError::BadBudget { agent: i, value: e });
            }
        }
        Ok(Market {
            n_agents,
            n_goods,
            valuations,
            budgets,
        })
    }

    /// Same valuations, different budgets (used for the perturbed market the
    /// rounding step constructs).
    pub fn with_budgets(&self, budgets: Vec<f64>) -> Result<Self, ModelError> {
        Self::from_flat(
            self.n_agents,
            self.n_goods,
            self.valuations.clone(),
            budgets,
        )
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn value(&self, agent: usize, good: usize) -> f64 {
        self.valuations[agent * self.n_goods + good]
    }

    pub fn valuation_row(&self, agent: usize) -> &[f64] {
        &self.valuations[agent * self.n_goods..(agent + 1) * self.n_goods]
    }

    pub fn budget(&self, agent: usize) -> f64 {
        self.budgets[agent]
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn total_budget(&self) -> f64 {
        self.budgets.iter().sum()
    }

    /// Additive value of a set bundle, summed in the order the goods are
    /// listed (deterministic for a fixed input).
    pub fn bundle_value(&self, agent: usize, goods: &[usize]) -> Result<f64, ModelError> {
        self.check_agent(agent)?;
        let mut total = 0.0;
        for &g in goods {
            self.check_good(g)?;
            total += self.value(agent, g);
        }
        Ok(total)
    }

    /// Additive value of a fractional bundle row.
    pub fn fractional_value(&self, agent: usize, shares: &[f64]) -> Result<f64, ModelError> {
        self.check_agent(agent)?;
        if shares.len() != self.n_goods {
            return Err(ModelError::Dimension {
                what: "shares row",
                got: shares.len(),
                expected: self.n_goods,
            });
        }
        let row = self.valuation_row(agent);
        Ok(row.iter().zip(shares).map(|(v, s)| v * s).sum())
    }

    /// `v_i([m])`, the agent's value for the grand bundle.
    pub fn grand_bundle_value(&self, agent: usize) -> f64 {
        self.valuation_row(agent).iter().sum()
    }

    fn check_agent(&self, agent: usize) -> Result<(), ModelError> {
        if agent >= self.n_agents {
            return Err(ModelError::AgentIndex {
                index: agent,
                n_agents: self.n_agents,
            });
        }
        Ok(())
    }

    fn check_good(&self, good: usize) -> Result<(), ModelError> {
        if good >= self.n_goods {
            return Err(ModelError::GoodIndex {
                index: good,
                n_goods: self.n_goods,
            });
        }
        Ok(())
    }
}

/// A fractional allocation `x` with entries in `[0, 1]` and per-good column
/// sums at most one (up to the validation tolerance).
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAllocation {
    n_agents: usize,
    n_goods: usize,
    /// Row-major `n_agents x n_goods`.
    shares: Vec<f64>,
}

impl FractionalAllocation {
    pub fn new(rows: Vec<Vec<f64>>, column_tol: f64) -> Result<Self, ModelError> {
        let n_agents = rows.len();
        if n_agents == 0 {
            return Err(ModelError::Empty);
        }
        let n_goods = rows[0].len();
        let mut flat = Vec::with_capacity(n_agents * n_goods);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n_goods {
                return Err(ModelError::RaggedRow {
                    row,
                    got: r.len(),
                    expected: n_goods,
                });
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(n_agents, n_goods, flat, column_tol)
    }

    pub fn from_flat(
        n_agents: usize,
        n_goods: usize,
        shares: Vec<f64>,
        column_tol: f64,
    ) -> Result<Self, ModelError> {
        if n_agents == 0 || n_goods == 0 {
            return Err(ModelError::Empty);
        }
        if shares.len() != n_agents * n_goods {
            return Err(ModelError::Dimension {
                what: "shares",
                got: shares.len(),
                expected: n_agents * n_goods,
            });
        }
        for i in 0..n_agents {
            for j in 0..n_goods {
                let s = shares[i * n_goods + j];
                if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                    return Err(ModelError::BadShare {
                        agent: i,
                        good: j,
                        value: s,
                    });
                }
            }
        }
        let alloc = FractionalAllocation {
            n_agents,
            n_goods,
            shares,
        };
        for j in 0..n_goods {
            let sum = alloc.column_sum(j);
            if sum > 1.0 + column_tol {
                return Err(ModelError::OverAllocated {
                    good: j,
                    sum,
                    tol: column_tol,
                });
            }
        }
        Ok(alloc)
    }

    /// The uniform allocation `x_{i,j} = 1/n`: feasible, interior, and the
    /// deterministic starting point of the solver.
    pub fn uniform(n_agents: usize, n_goods: usize) -> Self {
        let share = 1.0 / n_agents as f64;
        FractionalAllocation {
            n_agents,
            n_goods,
            shares: vec![share; n_agents * n_goods],
        }
    }

    pub fn zeros(n_agents: usize, n_goods: usize) -> Self {
        FractionalAllocation {
            n_agents,
            n_goods,
            shares: vec![0.0; n_agents * n_goods],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn share(&self, agent: usize, good: usize) -> f64 {
        self.shares[agent * self.n_goods + good]
    }

    pub(crate) fn set_share(&mut self, agent: usize, good: usize, value: f64) {
        self.shares[agent * self.n_goods + good] = value;
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.shares[agent * self.n_goods..(agent + 1) * self.n_goods]
    }

    pub fn column_sum(&self, good: usize) -> f64 {
        (0..self.n_agents).map(|i| self.share(i, good)).sum()
    }

    /// `x_i . p`, the agent's total spending, summed in good order.
    pub fn agent_spend(&self, agent: usize, prices: &PriceVector) -> f64 {
        self.row(agent)
            .iter()
            .zip(prices.as_slice())
            .map(|(x, p)| x * p)
            .sum()
    }

    /// True when every entry is within `tol` of 0 or 1.
    pub fn is_integral(&self, tol: f64) -> bool {
        self.shares
            .iter()
            .all(|&s| s <= tol || (1.0 - s).abs() <= tol)
    }
}

/// An integral allocation: each good is owned by one agent or unassigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralAllocation {
    n_agents: usize,
    owner: Vec<Option<usize>>,
}

impl IntegralAllocation {
    pub fn new(n_agents: usize, owner: Vec<Option<usize>>) -> Result<Self, ModelError> {
        if n_agents == 0 || owner.is_empty() {
            return Err(ModelError::Empty);
        }
        for (good, o) in owner.iter().enumerate() {
            if let Some(i) = o {
                if *i >= n_agents {
                    return Err(ModelError::BadOwner {
                        good,
                        owner: *i,
                        n_agents,
                    });
                }
            }
        }
        Ok(IntegralAllocation { n_agents, owner })
    }

    pub fn unassigned(n_agents: usize, n_goods: usize) -> Self {
        IntegralAllocation {
            n_agents,
            owner: vec![None; n_goods],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_goods(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, good: usize) -> Option<usize> {
        self.owner[good]
    }

    pub fn owners(&self) -> &[Option<usize>] {
        &self.owner
    }

    pub fn assign(&mut self, good: usize, agent: usize) -> Result<(), ModelError> {
        if agent >= self.n_agents {
            return Err(ModelError::BadOwner {
                good,
                owner: agent,
                n_agents: self.n_agents,
            });
        }
        if good >= self.owner.len() {
            return Err(ModelError::GoodIndex {
                index: good,
                n_goods: self.owner.len(),
            });
        }
        self.owner[good] = Some(agent);
        Ok(())
    }

    /// The agent's bundle in ascending good order.
    pub fn bundle(&self, agent: usize) -> Vec<usize> {
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(agent))
            .map(|(j, _)| j)
            .collect()
    }

    pub fn fully_assigned(&self) -> bool {
        self.owner.iter().all(|o| o.is_some())
    }

    pub fn to_fractional(&self) -> FractionalAllocation {
        let mut alloc = FractionalAllocation::zeros(self.n_agents, self.owner.len());
        for (good, o) in self.owner.iter().enumerate() {
            if let Some(i) = o {
                alloc.set_share(*i, good, 1.0);
            }
        }
        alloc
    }
}

/// Nonnegative equilibrium prices, one per good.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVector {
    prices: Vec<f64>,
}

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self, ModelError> {
        if prices.is_empty() {
            return Err(ModelError::Empty);
        }
        for (good, &p) in prices.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(ModelError::BadPrice { good, value: p });
            }
        }
        Ok(PriceVector { prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn get(&self, good: usize) -> f64 {
        self.prices[good]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.prices
    }

    /// `||p||_inf`, the largest price.
    pub fn max_price(&self) -> f64 {
        self.prices.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// `sum_j p_j`, summed in good order.
    pub fn total(&self) -> f64 {
        self.prices.iter().sum()
    }

    /// `p(S)`, the price of a set bundle, summed in the order listed.
    pub fn bundle_price(&self, goods: &[usize]) -> f64 {
        goods.iter().map(|&g| self.prices[g]).sum()
    }
}

/// Result of an MBB query: the best value-per-money ratio and the goods
/// attaining it (within `rel_tol`).
#[derive(Debug, Clone, PartialEq)]
pub struct MbbResult {
    pub ratio: f64,
    /// Ascending good indices. Zero-priced goods are included by convention.
    pub goods: Vec<usize>,
}

/// Maximum bang-per-buck for one agent: the largest `v_{i,j}/p_j` over
/// positively priced goods, and the set of goods within `rel_tol` of it.
///
/// Zero-priced goods must be valued at zero by the agent (otherwise the
/// ratio is unbounded and this errors); they are placed in the MBB set by
/// convention so they can be assigned anywhere without violating the MBB
/// condition.
pub fn mbb(
    market: &Market,
    agent: usize,
    prices: &PriceVector,
    rel_tol: f64,
) -> Result<MbbResult, ModelError> {
    if agent >= market.n_agents() {
        return Err(ModelError::AgentIndex {
            index: agent,
            n_agents: market.n_agents(),
        });
    }
    if prices.len() != market.n_goods() {
        return Err(ModelError::Dimension {
            what: "prices",
            got: prices.len(),
            expected: market.n_goods(),
        });
    }
    if prices.as_slice().iter().all(|&p| p == 0.0) {
        return Err(ModelError::DegeneratePrices);
    }
    let mut ratio = 0.0f64;
    for j in 0..market.n_goods() {
        let p = prices.get(j);
        let v = market.value(agent, j);
        if p == 0.0 {
            if v > 0.0 {
                return Err(ModelError::UnboundedMbb { agent, good: j });
            }
        } else {
            ratio = ratio.max(v / p);
        }
    }
    let goods = (0..market.n_goods())
        .filter(|&j| {
            let p = prices.get(j);
            p == 0.0 || market.value(agent, j) / p >= ratio * (1.0 - rel_tol)
        })
        .collect();
    Ok(MbbResult { ratio, goods })
}

/// Outcome of checking the three equilibrium conditions. Violations are
/// reported, never raised.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub market_clearing_ok: bool,
    /// Worst `|1 - sum_i x_{i,j}|` over positively priced goods.
    pub worst_clearing_violation: f64,
    pub budget_exhaustion_ok: bool,
    /// `|x_i . p - e_i|` per agent.
    pub budget_residuals: Vec<f64>,
    pub worst_budget_residual: f64,
    pub mbb_ok: bool,
    /// Worst relative gap `1 - (v_{i,j}/p_j)/MBB_i` over spent-on goods.
    pub worst_mbb_gap: f64,
    pub is_equilibrium: bool,
    pub tolerance_used: ToleranceConfig,
}

impl EquilibriumReport {
    /// The largest violation across the three conditions. Clearing and
    /// budget violations are in money units; the MBB gap is a unitless
    /// ratio. The solver uses this as its convergence residual.
    pub fn worst_violation(&self) -> f64 {
        self.worst_clearing_violation
            .max(self.worst_budget_residual)
            .max(self.worst_mbb_gap)
    }

    /// An everything-failed report, used when an outcome cannot even be
    /// checked (mismatched dimensions, non-finite budgets).
    pub fn failed(n_agents: usize) -> Self {
        EquilibriumReport {
            market_clearing_ok: false,
            worst_clearing_violation: f64::INFINITY,
            budget_exhaustion_ok: false,
            budget_residuals: vec![f64::INFINITY; n_agents],
            worst_budget_residual: f64::INFINITY,
            mbb_ok: false,
            worst_mbb_gap: f64::INFINITY,
            is_equilibrium: false,
            tolerance_used: ToleranceConfig::default(),
        }
    }
}

/// Checks the three equilibrium conditions of `(alloc, prices)` for
/// `market`:
///
/// - market clearing: every good is fully allocated or priced at zero
///   (`p_j <= tol.abs`);
/// - budget exhaustion: `|x_i . p - e_i| <= tol.abs + tol.rel * e_i`;
/// - MBB spending: `x_{i,j} > tol.spend` implies
///   `v_{i,j}/p_j >= MBB_i * (1 - tol.rel)`.
///
/// Goods priced at or below `tol.abs` count as zero-priced throughout: they
/// are exempt from clearing and sit in every agent's MBB set, provided no
/// agent values them positively. An agent positively valuing a zero-priced
/// good has an unbounded MBB ratio, which is reported as a full MBB
/// violation (gap 1) on any of her positively priced spending.
pub fn check_equilibrium(
    market: &Market,
    alloc: &FractionalAllocation,
    prices: &PriceVector,
    tol: &ToleranceConfig,
) -> Result<EquilibriumReport, ModelError> {
    let n = market.n_agents();
    let m = market.n_goods();
    if alloc.n_agents() != n || alloc.n_goods() != m {
        return Err(ModelError::Dimension {
            what: "allocation",
            got: alloc.n_agents() * alloc.n_goods(),
            expected: n * m,
        });
    }
    if prices.len() != m {
        return Err(ModelError::Dimension {
            what: "prices",
            got: prices.len(),
            expected: m,
        });
    }

    let mut worst_clearing = 0.0f64;
    for j in 0..m {
        if prices.get(j) > tol.abs {
            worst_clearing = worst_clearing.max((1.0 - alloc.column_sum(j)).abs());
        }
    }
    let market_clearing_ok = worst_clearing <= tol.abs;

    let mut budget_residuals = Vec::with_capacity(n);
    let mut budget_exhaustion_ok = true;
    let mut worst_budget = 0.0f64;
    for i in 0..n {
        let residual = (alloc.agent_spend(i, prices) - market.budget(i)).abs();
        budget_exhaustion_ok &= residual <= tol.abs + tol.rel * market.budget(i);
        worst_budget = worst_budget.max(residual);
        budget_residuals.push(residual);
    }

    let mut worst_mbb_gap = 0.0f64;
    for i in 0..n {
        // Best ratio over positively priced goods; infinite if the agent
        // positively values a zero-priced good.
        let mut ratio = 0.0f64;
        for j in 0..m {
            let p = prices.get(j);
            let v = market.value(i, j);
            if p > tol.abs {
                ratio = ratio.max(v / p);
            } else if v > 0.0 {
                ratio = f64::INFINITY;
            }
        }
        for j in 0..m {
            let p = prices.get(j);
            if alloc.share(i, j) > tol.spend && p > tol.abs {
                let gap = if ratio.is_infinite() {
                    1.0
                } else {
                    (1.0 - (market.value(i, j) / p) / ratio).max(0.0)
                };
                worst_mbb_gap = worst_mbb_gap.max(gap);
            }
        }
    }
    let mbb_ok = worst_mbb_gap <= tol.rel;

    let is_equilibrium = market_clearing_ok && budget_exhaustion_ok && mbb_ok;
    Ok(EquilibriumReport {
        market_clearing_ok,
        worst_clearing_violation: worst_clearing,
        budget_exhaustion_ok,
        budget_residuals,
        worst_budget_residual: worst_budget,
        mbb_ok,
        worst_mbb_gap,
        is_equilibrium,
        tolerance_used: *tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(vals: Vec<Vec<f64>>, budgets: Vec<f64>) -> Market {
        Market::new(vals, budgets).unwrap()
    }

    #[test]
    fn market_validation_rejects_bad_input() {
        assert!(matches!(
            Market::new(vec![], vec![]),
            Err(ModelError::Empty)
        ));
        assert!(matches!(
            Market::new(vec![vec![1.0], vec![1.0, 2.0]], vec![1.0, 1.0]),
            Err(ModelError::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            Market::new(vec![vec![-1.0, 2.0]], vec![1.0]),
            Err(ModelError::BadValuation { agent: 0, good: 0, .. })
        ));
        assert!(matches!(
            Market::new(vec![vec![0.0, 0.0]], vec![1.0]),
            Err(ModelError::ZeroValuationRow { agent: 0 })
        ));
        assert!(matches!(
            Market::new(vec![vec![1.0]], vec![-1.0]),
            Err(ModelError::BadBudget { agent: 0, .. })
        ));
        // Zero budgets are allowed: rounding produces markets with them.
        assert!(Market::new(vec![vec![1.0]], vec![0.0]).is_ok());
        assert!(matches!(
            Market::new(vec![vec![1.0]], vec![1.0, 2.0]),
            Err(ModelError::BudgetCount { got: 2, expected: 1 })
        ));
    }

    #[test]
    fn bundle_value_sums_directly() {
        let m = market(vec![vec![4.0, 2.0, 2.0]], vec![1.0]);
        // goods are 0-indexed: {g1, g3} is {0, 2}
        assert_eq!(m.bundle_value(0, &[0, 2]).unwrap(), 6.0);
        assert_eq!(m.bundle_value(0, &[]).unwrap(), 0.0);
    }

    #[test]
    fn fractional_value_is_a_dot_product() {
        let m = market(vec![vec![1.0, 1.0, 1.0]], vec![1.0]);
        assert_eq!(m.fractional_value(0, &[0.5, 0.5, 0.5]).unwrap(), 1.5);
    }

    #[test]
    fn mbb_equal_ratios_keeps_both_goods() {
        let m = market(vec![vec![6.0, 3.0]], vec![1.0]);
        let p = PriceVector::new(vec![2.0, 1.0]).unwrap();
        let r = mbb(&m, 0, &p, 0.0).unwrap();
        assert_eq!(r.ratio, 3.0);
        assert_eq!(r.goods, vec![0, 1]);
    }

    #[test]
    fn mbb_strict_max_keeps_one_good() {
        let m = market(vec![vec![6.0, 3.0]], vec![1.0]);
        let p = PriceVector::new(vec![1.0, 1.0]).unwrap();
        let r = mbb(&m, 0, &p, 0.0).unwrap();
        assert_eq!(r.ratio, 6.0);
        assert_eq!(r.goods, vec![0]);
    }

    #[test]
    fn mbb_zero_priced_zero_valued_good_joins_by_convention() {
        let m = market(vec![vec![0.0, 5.0]], vec![1.0]);
        let p = PriceVector::new(vec![0.0, 1.0]).unwrap();
        let r = mbb(&m, 0, &p, 0.0).unwrap();
        assert_eq!(r.ratio, 5.0);
        assert_eq!(r.goods, vec![0, 1]);
    }

    #[test]
    fn mbb_errors_on_unbounded_and_degenerate() {
        let m = market(vec![vec![1.0, 1.0]], vec![1.0]);
        let p = PriceVector::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            mbb(&m, 0, &p, 0.0),
            Err(ModelError::UnboundedMbb { agent: 0, good: 0 })
        ));
        let zero = PriceVector::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            mbb(&m, 0, &zero, 0.0),
            Err(ModelError::DegeneratePrices)
        ));
    }

    #[test]
    fn single_agent_kkt_prices_form_an_equilibrium() {
        // One agent owning everything; KKT forces p_j = e * v_j / v([m]).
        let m = market(vec![vec![3.0, 1.0]], vec![1.0]);
        let x = FractionalAllocation::new(vec![vec![1.0, 1.0]], 0.0).unwrap();
        let p = PriceVector::new(vec![0.75, 0.25]).unwrap();
        let report = check_equilibrium(&m, &x, &p, &ToleranceConfig::default()).unwrap();
        assert!(report.is_equilibrium, "{report:?}");
        assert_eq!(report.worst_violation(), 0.0);
    }

    #[test]
    fn single_good_two_agents_split_is_an_equilibrium_but_integral_is_not() {
        // One good, two agents with equal budgets: the split allocation
        // clears at p = 2; any integral allocation breaks budget exhaustion.
        let m = market(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]);
        let tol = ToleranceConfig::default();
        let p = PriceVector::new(vec![2.0]).unwrap();

        let split = FractionalAllocation::new(vec![vec![0.5], vec![0.5]], 0.0).unwrap();
        assert!(check_equilibrium(&m, &split, &p, &tol).unwrap().is_equilibrium);

        let integral = FractionalAllocation::new(vec![vec![1.0], vec![0.0]], 0.0).unwrap();
        let report = check_equilibrium(&m, &integral, &p, &tol).unwrap();
        assert!(!report.budget_exhaustion_ok);
        assert!(!report.is_equilibrium);
        // agent 0 spends 2 against a budget of 1, agent 1 spends nothing
        assert_eq!(report.budget_residuals, vec![1.0, 1.0]);
    }

    #[test]
    fn zero_priced_goods_are_exempt_from_clearing() {
        let m = market(vec![vec![1.0, 0.0]], vec![1.0]);
        let x = FractionalAllocation::new(vec![vec![1.0, 0.0]], 0.0).unwrap();
        let p = PriceVector::new(vec![1.0, 0.0]).unwrap();
        let report = check_equilibrium(&m, &x, &p, &ToleranceConfig::default()).unwrap();
        assert!(report.is_equilibrium);
    }

    #[test]
    fn spending_off_mbb_is_reported() {
        // Agent 0 spends on good 1 whose ratio is half the best.
        let m = market(vec![vec![2.0, 1.0], vec![2.0, 1.0]], vec![1.0, 1.0]);
        let x =
            FractionalAllocation::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], 0.0).unwrap();
        let p = PriceVector::new(vec![1.0, 1.0]).unwrap();
        let report = check_equilibrium(&m, &x, &p, &ToleranceConfig::default()).unwrap();
        assert!(!report.mbb_ok);
        assert_eq!(report.worst_mbb_gap, 0.5);
    }

    #[test]
    fn integral_allocation_round_trips_to_fractional() {
        let mut a = IntegralAllocation::unassigned(2, 3);
        a.assign(0, 0).unwrap();
        a.assign(2, 1).unwrap();
        assert_eq!(a.bundle(0), vec![0]);
        assert_eq!(a.bundle(1), vec![2]);
        assert!(!a.fully_assigned());
        let f = a.to_fractional();
        assert_eq!(f.share(0, 0), 1.0);
        assert_eq!(f.share(1, 2), 1.0);
        assert_eq!(f.share(0, 1), 0.0);
        assert_eq!(f.column_sum(1), 0.0);
    }

    #[test]
    fn price_vector_norms() {
        let p = PriceVector::new(vec![0.25, 0.75, 0.5]).unwrap();
        assert_eq!(p.max_price(), 0.75);
        assert_eq!(p.total(), 1.5);
        assert_eq!(p.bundle_price(&[0, 2]), 0.75);
    }
}
