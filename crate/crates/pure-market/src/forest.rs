//! Spending graphs and cycle canceling. The spending graph of an outcome
//! `(x, p)` is the bipartite agent-good graph with an edge wherever an agent
//! spends money on a good, weighted by the spending `x_{i,j} p_j`. Canceling
//! a cycle moves spending around it without changing any agent's total spend
//! or any good's total consumption, so repeating until acyclic preserves the
//! equilibrium while making the graph a forest.

use thiserror::Error;

use crate::model::{
    check_equilibrium, EquilibriumReport, FractionalAllocation, Market, ModelError, PriceVector,
    ToleranceConfig,
};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("invalid cycle: {reason}")]
    InvalidCycle { reason: String },
    #[error("input is not an equilibrium (worst violation {})", report.worst_violation())]
    NotAnEquilibrium { report: Box<EquilibriumReport> },
    #[error("equilibrium drifted during cycle canceling (worst violation {})", report.worst_violation())]
    EquilibriumDrift { report: Box<EquilibriumReport> },
    #[error("cycle canceling exceeded the n*m iteration bound")]
    ExceededIterationBound,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A node of the bipartite spending graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphNode {
    Agent(usize),
    Good(usize),
}

/// Weighted bipartite agent-good graph; adjacency is kept in both
/// directions, neighbors in ascending index order.
#[derive(Debug, Clone)]
pub struct SpendingGraph {
    n_agents: usize,
    n_goods: usize,
    /// Per agent: (good, weight) with weight = x_{i,j} * p_j, goods ascending.
    agent_adj: Vec<Vec<(usize, f64)>>,
    /// Per good: agents ascending.
    good_adj: Vec<Vec<usize>>,
}

impl SpendingGraph {
    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_goods(&self) -> usize {
        self.n_goods
    }

    pub fn edge_count(&self) -> usize {
        self.agent_adj.iter().map(Vec::len).sum()
    }

    pub fn agent_degree(&self, agent: usize) -> usize {
        self.agent_adj[agent].len()
    }

    pub fn good_degree(&self, good: usize) -> usize {
        self.good_adj[good].len()
    }

    /// Goods the agent spends on, with edge weights, ascending.
    pub fn agent_goods(&self, agent: usize) -> &[(usize, f64)] {
        &self.agent_adj[agent]
    }

    /// Agents spending on the good, ascending.
    pub fn good_agents(&self, good: usize) -> &[usize] {
        &self.good_adj[good]
    }

    pub fn weight(&self, agent: usize, good: usize) -> Option<f64> {
        self.agent_adj[agent]
            .binary_search_by_key(&good, |(g, _)| *g)
            .ok()
            .map(|idx| self.agent_adj[agent][idx].1)
    }

    /// All edges as (agent, good, weight), sorted lexicographically.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, adj) in self.agent_adj.iter().enumerate() {
            for &(j, w) in adj {
                out.push((i, j, w));
            }
        }
        out
    }

    pub fn is_forest(&self) -> bool {
        find_cycle(self).is_none()
    }
}

/// Builds the spending graph: an edge wherever `x_{i,j} > spend_tol` and the
/// good is positively priced. Zero-priced goods carry no spending and are
/// excluded entirely (they are handled at rounding time).
pub fn build_spending_graph(
    alloc: &FractionalAllocation,
    prices: &PriceVector,
    spend_tol: f64,
) -> SpendingGraph {
    let n = alloc.n_agents();
    let m = alloc.n_goods();
    assert_eq!(prices.len(), m, "price dimension mismatch");
    let mut agent_adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut good_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..n {
        for j in 0..m {
            let p = prices.get(j);
            if p > 0.0 && alloc.share(i, j) > spend_tol {
                agent_adj[i].push((j, alloc.share(i, j) * p));
                good_adj[j].push(i);
            }
        }
    }
    SpendingGraph {
        n_agents: n,
        n_goods: m,
        agent_adj,
        good_adj,
    }
}

/// Finds some cycle, or `None` when the graph is a forest. Deterministic:
/// depth-first search rooted at each agent in ascending order, visiting
/// neighbors in ascending index order; the first back edge encountered
/// closes the reported cycle. Cycles alternate agent/good nodes and have
/// even length >= 4.
pub fn find_cycle(graph: &SpendingGraph) -> Option<Vec<GraphNode>> {
    // Node ids: agents 0..n, goods n..n+m.
    let n = graph.n_agents;
    let m = graph.n_goods;
    let id = |node: GraphNode| match node {
        GraphNode::Agent(i) => i,
        GraphNode::Good(j) => n + j,
    };
    let mut visited = vec![false; n + m];

    // Iterative DFS; frames carry (node, parent id, next-neighbor cursor).
    let mut stack: Vec<(GraphNode, usize, usize)> = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push((GraphNode::Agent(start), usize::MAX, 0));
        while let Some(frame) = stack.last_mut() {
            let (node, parent) = (frame.0, frame.1);
            let cursor = frame.2;
            frame.2 += 1;
            let next = match node {
                GraphNode::Agent(i) => graph.agent_adj[i]
                    .get(cursor)
                    .map(|&(j, _)| GraphNode::Good(j)),
                GraphNode::Good(j) => graph.good_adj[j].get(cursor).map(|&i| GraphNode::Agent(i)),
            };
            let Some(next) = next else {
                stack.pop();
                continue;
            };
            let next_id = id(next);
            if next_id == parent {
                continue;
            }
            if !visited[next_id] {
                visited[next_id] = true;
                stack.push((next, id(node), 0));
                continue;
            }
            // Undirected DFS admits only tree and back edges, and this is
            // the first back edge seen, so `next` is an ancestor still on
            // the stack; the slice from it down to `node` closes a cycle.
            let pos = stack
                .iter()
                .position(|&(anc, _, _)| id(anc) == next_id)
                .expect("back edge target is on the DFS path");
            return Some(stack[pos..].iter().map(|&(nd, _, _)| nd).collect());
        }
    }
    None
}

/// The cycle's edges in order, closing back to the first node.
fn cycle_edges(cycle: &[GraphNode]) -> Result<Vec<(usize, usize)>, ForestError> {
    if cycle.len() < 4 || cycle.len() % 2 != 0 {
        return Err(ForestError::InvalidCycle {
            reason: format!("length {} is not an even number >= 4", cycle.len()),
        });
    }
    let mut edges = Vec::with_capacity(cycle.len());
    for (idx, pair) in cycle.windows(2).enumerate() {
        match (pair[0], pair[1]) {
            (GraphNode::Agent(i), GraphNode::Good(j)) | (GraphNode::Good(j), GraphNode::Agent(i)) => {
                edges.push((i, j));
            }
            _ => {
                return Err(ForestError::InvalidCycle {
                    reason: format!("nodes {idx} and {} do not alternate agent/good", idx + 1),
                })
            }
        }
    }
    match (cycle[cycle.len() - 1], cycle[0]) {
        (GraphNode::Agent(i), GraphNode::Good(j)) | (GraphNode::Good(j), GraphNode::Agent(i)) => {
            edges.push((i, j));
        }
        _ => unreachable!("even alternating cycle closes agent-good"),
    }
    Ok(edges)
}

/// Cancels one cycle: subtracts the minimum edge weight `w` from alternating
/// edges (starting at a minimum-weight edge, ties broken by lexicographic
/// (agent, good)) and adds it to the others, then recomputes shares as
/// weight / price. The minimum edge drops to weight exactly zero; every
/// agent's total spend and every good's total consumption are unchanged.
pub fn cancel_cycle(
    alloc: &FractionalAllocation,
    prices: &PriceVector,
    cycle: &[GraphNode],
) -> Result<FractionalAllocation, ForestError> {
    let edges = cycle_edges(cycle)?;
    let mut seen_nodes = std::collections::HashSet::new();
    for &node in cycle {
        let key = match node {
            GraphNode::Agent(i) => {
                if i >= alloc.n_agents() {
                    return Err(ForestError::InvalidCycle {
                        reason: format!("agent {i} out of range"),
                    });
                }
                (0, i)
            }
            GraphNode::Good(j) => {
                if j >= alloc.n_goods() {
                    return Err(ForestError::InvalidCycle {
                        reason: format!("good {j} out of range"),
                    });
                }
                if prices.get(j) <= 0.0 {
                    return Err(ForestError::InvalidCycle {
                        reason: format!("good {j} on the cycle is priced zero"),
                    });
                }
                (1, j)
            }
        };
        if !seen_nodes.insert(key) {
            return Err(ForestError::InvalidCycle {
                reason: "repeated node".into(),
            });
        }
    }

    let weights: Vec<f64> = edges
        .iter()
        .map(|&(i, j)| alloc.share(i, j) * prices.get(j))
        .collect();
    let min_idx = (0..edges.len())
        .min_by(|&a, &b| {
            weights[a]
                .partial_cmp(&weights[b])
                .unwrap()
                .then_with(|| edges[a].cmp(&edges[b]))
        })
        .expect("cycle has edges");
    let w = weights[min_idx];

    let mut updated = alloc.clone();
    for offset in 0..edges.len() {
        let idx = (min_idx + offset) % edges.len();
        let (i, j) = edges[idx];
        // Alternation starts with -w on the minimum edge, so it lands on
        // exactly zero; signs alternate around the even cycle.
        let new_weight = if offset % 2 == 0 {
            weights[idx] - w
        } else {
            weights[idx] + w
        };
        updated.set_share(i, j, new_weight / prices.get(j));
    }
    Ok(updated)
}

/// Repeatedly cancels cycles until the spending graph is a forest. The
/// input must pass `check_equilibrium`; the output passes it at the same
/// tolerances (each cancellation preserves spends and consumptions
/// exactly, up to float round-off). Terminates within `n * m` cancellations
/// since every one deletes an edge. Sub-tolerance residue left on non-
/// minimum cycle edges is filtered by the `x > tol.spend` edge rule when the
/// graph is rebuilt, not zeroed in the allocation (zeroing would break
/// spend preservation).
pub fn rearrange_to_forest(
    market: &Market,
    alloc: &FractionalAllocation,
    prices: &PriceVector,
    tol: &ToleranceConfig,
) -> Result<FractionalAllocation, ForestError> {
    let report = check_equilibrium(market, alloc, prices, tol)?;
    if !report.is_equilibrium {
        return Err(ForestError::NotAnEquilibrium {
            report: Box::new(report),
        });
    }
    let bound = market.n_agents() * market.n_goods();
    let mut current = alloc.clone();
    let mut cancellations = 0;
    loop {
        let graph = build_spending_graph(&current, prices, tol.spend);
        let Some(cycle) = find_cycle(&graph) else {
            break;
        };
        if cancellations >= bound {
            return Err(ForestError::ExceededIterationBound);
        }
        current = cancel_cycle(&current, prices, &cycle)?;
        cancellations += 1;
    }
    let report = check_equilibrium(market, &current, prices, tol)?;
    if !report.is_equilibrium {
        return Err(ForestError::EquilibriumDrift {
            report: Box::new(report),
        });
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Market;

    fn alloc(rows: Vec<Vec<f64>>) -> FractionalAllocation {
        FractionalAllocation::new(rows, 1e-9).unwrap()
    }

    fn prices(p: Vec<f64>) -> PriceVector {
        PriceVector::new(p).unwrap()
    }

    #[test]
    fn graph_construction_examples() {
        // One good split in half at price 2: two edges of weight 1.
        let g = build_spending_graph(&alloc(vec![vec![0.5], vec![0.5]]), &prices(vec![2.0]), 1e-9);
        assert_eq!(g.edges(), vec![(0, 0, 1.0), (1, 0, 1.0)]);

        // Integral allocation: one edge per allocated good, weight p_j.
        let g = build_spending_graph(
            &alloc(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            &prices(vec![0.25, 0.75]),
            1e-9,
        );
        assert_eq!(g.edges(), vec![(0, 0, 0.25), (1, 1, 0.75)]);

        // A zero row leaves the agent isolated.
        let g = build_spending_graph(
            &alloc(vec![vec![1.0], vec![0.0]]),
            &prices(vec![1.0]),
            1e-9,
        );
        assert_eq!(g.agent_degree(1), 0);

        // Zero-priced goods never enter the graph.
        let g = build_spending_graph(
            &alloc(vec![vec![1.0, 1.0]]),
            &prices(vec![0.0, 1.0]),
            1e-9,
        );
        assert_eq!(g.edges(), vec![(0, 1, 1.0)]);
    }

    #[test]
    fn find_cycle_on_forest_is_none() {
        let g = build_spending_graph(
            &alloc(vec![vec![0.5, 1.0], vec![0.5, 0.0]]),
            &prices(vec![1.0, 1.0]),
            1e-9,
        );
        assert!(find_cycle(&g).is_none());
        assert!(g.is_forest());
    }

    #[test]
    fn find_cycle_square() {
        // 2 agents x 2 goods, all four edges present: the unique 4-cycle.
        let g = build_spending_graph(
            &alloc(vec![vec![0.5, 0.5], vec![0.5, 0.5]]),
            &prices(vec![1.0, 1.0]),
            1e-9,
        );
        let cycle = find_cycle(&g).unwrap();
        assert_eq!(cycle.len(), 4);
        assert!(cycle.contains(&GraphNode::Agent(0)));
        assert!(cycle.contains(&GraphNode::Agent(1)));
        assert!(cycle.contains(&GraphNode::Good(0)));
        assert!(cycle.contains(&GraphNode::Good(1)));
    }

    #[test]
    fn find_cycle_prefers_lowest_index_component() {
        // Two disjoint squares: agents {0,1} on goods {0,1} and agents
        // {2,3} on goods {2,3}. The reported cycle lives in the first.
        let g = build_spending_graph(
            &alloc(vec![
                vec![0.5, 0.5, 0.0, 0.0],
                vec![0.5, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 0.5, 0.5],
                vec![0.0, 0.0, 0.5, 0.5],
            ]),
            &prices(vec![1.0, 1.0, 1.0, 1.0]),
            1e-9,
        );
        let cycle = find_cycle(&g).unwrap();
        assert!(cycle.contains(&GraphNode::Agent(0)));
        assert!(!cycle.contains(&GraphNode::Agent(2)));
    }

    #[test]
    fn cancel_cycle_hand_trace() {
        // Square with weights (0.2, 0.5, 0.3, 0.5) around
        // a0 -g0- a1 -g1- a0; prices 1 so weights equal shares.
        // Minimum 0.2 is removed; alternation gives (0, 0.7, 0.1, 0.7).
        let x = alloc(vec![vec![0.2, 0.5], vec![0.5, 0.3]]);
        let p = prices(vec![1.0, 1.0]);
        let cycle = vec![
            GraphNode::Agent(0),
            GraphNode::Good(0),
            GraphNode::Agent(1),
            GraphNode::Good(1),
        ];
        let before_spend: Vec<f64> = (0..2).map(|i| x.agent_spend(i, &p)).collect();
        let updated = cancel_cycle(&x, &p, &cycle).unwrap();
        assert_eq!(updated.share(0, 0), 0.0);
        assert!((updated.share(1, 0) - 0.7).abs() < 1e-15);
        assert!((updated.share(1, 1) - 0.1).abs() < 1e-15);
        assert!((updated.share(0, 1) - 0.7).abs() < 1e-15);
        for i in 0..2 {
            assert!((updated.agent_spend(i, &p) - before_spend[i]).abs() < 1e-15);
        }
        for j in 0..2 {
            assert!((updated.column_sum(j) - x.column_sum(j)).abs() < 1e-15);
        }
    }

    #[test]
    fn cancel_symmetric_square_zeroes_opposite_edges() {
        // All four weights are 0.5, so the -w/+w alternation zeroes the
        // minimum edge and the one opposite it: the square collapses
        // straight to an integral matching.
        let x = alloc(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let p = prices(vec![1.0, 1.0]);
        let cycle = find_cycle(&build_spending_graph(&x, &p, 1e-9)).unwrap();
        let updated = cancel_cycle(&x, &p, &cycle).unwrap();
        let zeros = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .filter(|&(i, j)| updated.share(i, j) == 0.0)
            .count();
        assert_eq!(zeros, 2);
        for i in 0..2 {
            assert!((updated.agent_spend(i, &p) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cancel_degenerate_zero_weight_edge() {
        // An edge of weight zero on the cycle: deleted with no numeric
        // change anywhere.
        let x = alloc(vec![vec![0.0, 0.5], vec![0.5, 0.5]]);
        let cycle = vec![
            GraphNode::Agent(0),
            GraphNode::Good(0),
            GraphNode::Agent(1),
            GraphNode::Good(1),
        ];
        let p = prices(vec![1.0, 1.0]);
        let updated = cancel_cycle(&x, &p, &cycle).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(updated.share(i, j), x.share(i, j));
            }
        }
    }

    #[test]
    fn cancel_rejects_malformed_cycles() {
        let x = alloc(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let p = prices(vec![1.0, 1.0]);
        let too_short = vec![GraphNode::Agent(0), GraphNode::Good(0)];
        assert!(matches!(
            cancel_cycle(&x, &p, &too_short),
            Err(ForestError::InvalidCycle { .. })
        ));
        let not_alternating = vec![
            GraphNode::Agent(0),
            GraphNode::Agent(1),
            GraphNode::Good(0),
            GraphNode::Good(1),
        ];
        assert!(matches!(
            cancel_cycle(&x, &p, &not_alternating),
            Err(ForestError::InvalidCycle { .. })
        ));
        let repeated = vec![
            GraphNode::Agent(0),
            GraphNode::Good(0),
            GraphNode::Agent(0),
            GraphNode::Good(1),
        ];
        assert!(matches!(
            cancel_cycle(&x, &p, &repeated),
            Err(ForestError::InvalidCycle { .. })
        ));
    }

    #[test]
    fn rearrange_all_half_square() {
        // Two identical agents, two goods at price 1, everything split: the
        // single symmetric cancellation leaves the integral matching and
        // preserves the equilibrium.
        let market = Market::new(
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 1.0],
        )
        .unwrap();
        let x = alloc(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let p = prices(vec![1.0, 1.0]);
        let tol = ToleranceConfig::default();
        let out = rearrange_to_forest(&market, &x, &p, &tol).unwrap();
        let graph = build_spending_graph(&out, &p, tol.spend);
        assert!(graph.is_forest());
        assert_eq!(graph.edge_count(), 2);
        assert_eq!(out.share(0, 1), 1.0);
        assert_eq!(out.share(1, 0), 1.0);
        for i in 0..2 {
            assert!((out.agent_spend(i, &p) - 1.0).abs() < 1e-12);
        }
        for j in 0..2 {
            assert!((out.column_sum(j) - 1.0).abs() < 1e-12);
        }
        // Support only shrinks.
        for i in 0..2 {
            for j in 0..2 {
                assert!(out.share(i, j) == 0.0 || x.share(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn rearrange_fixpoint_on_forest() {
        let market = Market::new(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        let x = alloc(vec![vec![0.5], vec![0.5]]);
        let p = prices(vec![2.0]);
        let out = rearrange_to_forest(&market, &x, &p, &ToleranceConfig::default()).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn rearrange_rejects_non_equilibrium() {
        let market = Market::new(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        let x = alloc(vec![vec![1.0], vec![0.0]]);
        let p = prices(vec![2.0]);
        assert!(matches!(
            rearrange_to_forest(&market, &x, &p, &ToleranceConfig::default()),
            Err(ForestError::NotAnEquilibrium { .. })
        ));
    }
}
