//! Equilibrium computation by projected gradient ascent on the
//! Eisenberg-Gale objective `sum_i e_i log v_i(x_i)`, with prices read off
//! the KKT conditions (`p_j = max_i e_i v_{i,j} / v_i(x_i)`).
//!
//! The optimum allocation, the extracted prices, and every agent's MBB set
//! are invariant under positive per-agent rescaling of the valuation rows
//! (the objective only shifts by a constant), so the solver normalizes each
//! row by its maximum before iterating. Even normalized, these objectives
//! defeat any fixed step schedule: a budget imbalance that rides on goods an
//! agent values orders of magnitude below its best ones drains at a rate
//! proportional to the squared valuation, so the useful step range within a
//! single instance spans from O(1) to O((v_max/v_min)^2). The ascent
//! therefore picks its step length anew each iteration with a two-sided
//! multiplicative line search, and layers escape mechanisms on top, each one
//! tied to a concrete observed failure mode of the plain iteration:
//!
//! - bitwise plateau and period-2 cycle detection, which walks the step
//!   down when the projected map stops covering new ground (huge steps act
//!   as a greedy bang-per-buck reassignment, whose fixed points and 2-cycles
//!   otherwise trap the search);
//! - a residual-guided polish and a geometric drift extrapolation near the
//!   optimum, where the float objective is pinned at its resolution and
//!   carries no more signal while the equilibrium residual still has orders
//!   of magnitude to go;
//! - iterate averaging, which collapses the orbit a constant step traces
//!   around the optimum;
//! - occasional giant "burst" steps when the residual stalls, hopping
//!   between basins of the projected dynamics;
//! - random restarts once a whole trajectory stops improving.
//!
//! The best iterate by residual is tracked across everything and is what
//! the solver ultimately returns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    check_equilibrium, FractionalAllocation, Market, ModelError, PriceVector, ToleranceConfig,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(
        "gradient ascent did not converge: best residual {:.3e} after {} iterations",
        best.residual,
        best.iterations_used
    )]
    DidNotConverge { best: Box<Outcome> },
    #[error("agent {agent} has a zero-value bundle; KKT prices are undefined")]
    ZeroBundleValue { agent: usize },
    #[error("agent {agent} has budget 0; the log-utility objective needs positive budgets")]
    ZeroBudget { agent: usize },
    #[error("invalid solver config: {reason}")]
    BadConfig { reason: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Gradient-ascent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Total iteration budget across all restarts.
    pub max_iters: usize,
    /// Step length the line search starts from after every (re)start. The
    /// search rescales the step freely from there, so this mostly sets
    /// where the first few probes land.
    pub step_size: f64,
    /// Multiplicative backoff in (0, 1) for the line search; growth probes
    /// use its reciprocal.
    pub step_decay: f64,
    /// Stop when the worst equilibrium-condition violation drops to this.
    pub convergence_tol: f64,
    /// Seeds the random restarts and the burst-size jitter; `None` uses a
    /// fixed built-in seed, so runs are deterministic either way.
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            // Sized for the hardest random instances with valuations spanning
            // ~5 orders of magnitude, whose terminal drifts and basin hops
            // can consume hundreds of thousands of cheap iterations; typical
            // instances converge in about a thousand.
            max_iters: 400_000,
            step_size: 1.0,
            step_decay: 0.5,
            convergence_tol: 1e-7,
            seed: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if self.max_iters == 0 {
            return Err(SolverError::BadConfig {
                reason: "max_iters must be at least 1",
            });
        }
        if !(self.step_decay > 0.0 && self.step_decay < 1.0) {
            return Err(SolverError::BadConfig {
                reason: "step_decay must lie in (0, 1)",
            });
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(SolverError::BadConfig {
                reason: "step_size must be positive and finite",
            });
        }
        if !(self.convergence_tol > 0.0) {
            return Err(SolverError::BadConfig {
                reason: "convergence_tol must be positive",
            });
        }
        Ok(())
    }
}

/// A solver result: the outcome `(x, p)`, the worst equilibrium-condition
/// violation `check_equilibrium` reports for it, and the iterations spent.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub alloc: FractionalAllocation,
    pub prices: PriceVector,
    pub residual: f64,
    pub iterations_used: usize,
}

/// The Eisenberg-Gale objective `sum_i e_i log v_i(x_i)`, or negative
/// infinity when some agent's bundle value is zero.
pub fn eg_objective(market: &Market, alloc: &FractionalAllocation) -> f64 {
    assert_eq!(alloc.n_agents(), market.n_agents(), "agent count mismatch");
    assert_eq!(alloc.n_goods(), market.n_goods(), "good count mismatch");
    let mut total = 0.0;
    for i in 0..market.n_agents() {
        let value = market.fractional_value(i, alloc.row(i)).unwrap();
        if value <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += market.budget(i) * value.ln();
    }
    total
}

/// Euclidean projection of one good's share column onto
/// `{y >= 0, sum y <= 1}` (which implies `y <= 1`). Entries must be finite.
pub fn project_column(column: &mut [f64]) {
    let positive_sum: f64 = column.iter().map(|v| v.max(0.0)).sum();
    if positive_sum <= 1.0 {
        for v in column.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        return;
    }
    // Sum of positive parts exceeds 1, so the projection lands on the unit
    // simplex: shift by the threshold theta with sum max(v - theta, 0) = 1.
    let mut sorted = column.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if u > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    for v in column.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
    // The theta subtraction carries the rounding error of the inputs, which
    // grows with their magnitude; rescale so the column sum never exceeds 1.
    let sum: f64 = column.iter().sum();
    if sum > 1.0 {
        for v in column.iter_mut() {
            *v /= sum;
        }
    }
}

/// Projects a raw `n_agents x n_goods` row-major matrix onto the feasible
/// allocation set, column by column (goods are independent).
pub fn project_feasible(raw: &[f64], n_agents: usize, n_goods: usize) -> FractionalAllocation {
    assert_eq!(raw.len(), n_agents * n_goods, "matrix dimension mismatch");
    let mut shares = raw.to_vec();
    let mut column = vec![0.0; n_agents];
    for j in 0..n_goods {
        for i in 0..n_agents {
            column[i] = shares[i * n_goods + j];
        }
        project_column(&mut column);
        for i in 0..n_agents {
            shares[i * n_goods + j] = column[i];
        }
    }
    // Column sums land within float dust of 1; validate with a tolerance
    // wide enough to absorb the rounding of the theta subtraction.
    FractionalAllocation::from_flat(n_agents, n_goods, shares, 1e-9)
        .expect("projection output is feasible")
}

/// KKT price extraction: `p_j = max_i e_i v_{i,j} / v_i(x_i)`, zero when no
/// agent values the good. Errors when an agent's bundle value is zero.
pub fn extract_prices(
    market: &Market,
    alloc: &FractionalAllocation,
) -> Result<PriceVector, SolverError> {
    let n = market.n_agents();
    let m = market.n_goods();
    if alloc.n_agents() != n || alloc.n_goods() != m {
        return Err(ModelError::Dimension {
            what: "allocation",
            got: alloc.n_agents() * alloc.n_goods(),
            expected: n * m,
        }
        .into());
    }
    let mut bang_per_budget = Vec::with_capacity(n);
    for i in 0..n {
        let value = market.fractional_value(i, alloc.row(i))?;
        if value <= 0.0 {
            return Err(SolverError::ZeroBundleValue { agent: i });
        }
        bang_per_budget.push(market.budget(i) / value);
    }
    let mut prices = Vec::with_capacity(m);
    for j in 0..m {
        let p = (0..n).fold(0.0f64, |acc, i| {
            acc.max(bang_per_budget[i] * market.value(i, j))
        });
        prices.push(p);
    }
    Ok(PriceVector::new(prices)?)
}

/// KKT prices rescaled so that their sum equals the total budget — an
/// equilibrium identity (budget exhaustion plus market clearing), so the
/// rescale only removes approximation error.
fn rescaled_prices(
    market: &Market,
    alloc: &FractionalAllocation,
) -> Result<PriceVector, SolverError> {
    let raw = extract_prices(market, alloc)?;
    let total = raw.total();
    if total <= 0.0 {
        return Ok(raw);
    }
    let factor = market.total_budget() / total;
    Ok(PriceVector::new(
        raw.as_slice().iter().map(|p| p * factor).collect(),
    )?)
}

/// Residual once a trajectory is considered "terminal": close enough to the
/// optimum that the residual-guided acceleration machinery engages.
const TERMINAL_RESID: f64 = 1e-2;
/// Residual below which the objective-leashed polish probes may fire.
const POLISH_RESID: f64 = 1e-3;
/// Hard ceiling on any probed step length.
const ETA_CAP: f64 = 1e12;
/// Iterations between state snapshots for drift extrapolation.
const SNAP_SPACING: usize = 64;

/// The best iterate seen so far, measured by equilibrium residual.
struct BestIterate {
    x: Vec<f64>,
    prices: PriceVector,
    residual: f64,
}

/// One projected-gradient-ascent trajectory over a (reduced, row-normalized)
/// market. Kept separate from the restart/burst driver in
/// `solve_equilibrium` so the per-step acceptance contract is directly
/// testable.
struct Ascent {
    market: Market,
    tol: ToleranceConfig,
    n: usize,
    m: usize,
    x: Vec<f64>,
    /// State before the last adoption, for period-2 cycle detection.
    prev_x: Vec<f64>,
    /// Running average of terminal iterates (orbit-center estimate).
    avg_x: Vec<f64>,
    avg_live: bool,
    /// Equally spaced state snapshots for drift extrapolation.
    snaps: Vec<Vec<f64>>,
    snap_clock: usize,
    eta: f64,
    eta0: f64,
    decay: f64,
    grow: f64,
    objective: f64,
    iters: usize,
    best: Option<BestIterate>,
}

impl Ascent {
    fn new(market: Market, config: &SolverConfig, tol: &ToleranceConfig) -> Self {
        let n = market.n_agents();
        let m = market.n_goods();
        let mut ascent = Ascent {
            market,
            tol: *tol,
            n,
            m,
            x: Vec::new(),
            prev_x: Vec::new(),
            avg_x: Vec::new(),
            avg_live: false,
            snaps: Vec::new(),
            snap_clock: 0,
            eta: config.step_size,
            eta0: config.step_size,
            decay: config.step_decay,
            grow: 1.0 / config.step_decay,
            objective: 0.0,
            iters: 0,
            best: None,
        };
        ascent.restart(vec![1.0 / n as f64; n * m]);
        ascent
    }

    /// Resets the trajectory to the given start without forgetting the best
    /// iterate found so far.
    fn restart(&mut self, x: Vec<f64>) {
        self.objective = Self::objective_of(&self.market, &x);
        self.x = x;
        self.prev_x = Vec::new();
        self.avg_live = false;
        self.snaps.clear();
        self.snap_clock = 0;
        self.eta = self.eta0;
    }

    fn objective_of(market: &Market, x: &[f64]) -> f64 {
        let m = market.n_goods();
        let mut total = 0.0;
        for i in 0..market.n_agents() {
            let value: f64 = market
                .valuation_row(i)
                .iter()
                .zip(&x[i * m..(i + 1) * m])
                .map(|(v, s)| v * s)
                .sum();
            if value <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += market.budget(i) * value.ln();
        }
        total
    }

    /// Gradient of the objective: `e_i v_{i,j} / v_i(x_i)`.
    fn gradient(&self) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut g = vec![0.0; n * m];
        for i in 0..n {
            let value: f64 = self
                .market
                .valuation_row(i)
                .iter()
                .zip(&self.x[i * m..(i + 1) * m])
                .map(|(v, s)| v * s)
                .sum();
            let scale = self.market.budget(i) / value;
            for j in 0..m {
                g[i * m + j] = scale * self.market.value(i, j);
            }
        }
        g
    }

    /// Candidate state after one projected step of length `eta`.
    fn try_eta(&self, g: &[f64], eta: f64) -> (FractionalAllocation, f64) {
        let raw: Vec<f64> = self.x.iter().zip(g).map(|(xi, gi)| xi + eta * gi).collect();
        let alloc = project_feasible(&raw, self.n, self.m);
        let obj = eg_objective(&self.market, &alloc);
        (alloc, obj)
    }

    /// Equilibrium residual of a candidate, without best-iterate tracking.
    fn residual_of(&self, alloc: &FractionalAllocation) -> Result<f64, SolverError> {
        let prices = rescaled_prices(&self.market, alloc)?;
        let report = check_equilibrium(&self.market, alloc, &prices, &self.tol)?;
        Ok(report.worst_violation())
    }

    /// Equilibrium residual of a candidate, recording it as the best iterate
    /// when it improves on everything seen so far.
    fn measure(&mut self, alloc: &FractionalAllocation) -> Result<f64, SolverError> {
        let prices = rescaled_prices(&self.market, alloc)?;
        let report = check_equilibrium(&self.market, alloc, &prices, &self.tol)?;
        let residual = report.worst_violation();
        if self.best.as_ref().is_none_or(|b| residual < b.residual) {
            self.best = Some(BestIterate {
                x: (0..self.n).flat_map(|i| alloc.row(i).to_vec()).collect(),
                prices,
                residual,
            });
        }
        Ok(residual)
    }

    fn adopt(&mut self, alloc: &FractionalAllocation, objective: f64) {
        self.prev_x = std::mem::take(&mut self.x);
        self.x = (0..self.n).flat_map(|i| alloc.row(i).to_vec()).collect();
        self.objective = objective;
    }

    /// One line-search iteration. Returns the residual of the state the
    /// trajectory ends the iteration in.
    ///
    /// Acceptance contract: the objective never drops by more than the
    /// float-noise slack plus a few residual-polish leashes (each
    /// `1e-10 * (1 + |objective|)`), and any accepted drop beyond the slack
    /// strictly reduces the equilibrium residual the step is measured by.
    fn step(&mut self) -> Result<f64, SolverError> {
        self.iters += 1;
        let g = self.gradient();
        // Near the optimum genuine objective changes drop below the float
        // resolution of the objective itself; without this slack, summation
        // noise reads as descent, the backtracking collapses the step to
        // nothing, and the iterate freezes short of the KKT conditions.
        let slack = 16.0 * f64::EPSILON * self.objective.abs();
        let (mut candidate, mut cand_obj) = self.try_eta(&g, self.eta);
        let mut halvings = 0;
        while cand_obj < self.objective - slack && halvings < 60 {
            self.eta *= self.decay;
            halvings += 1;
            let (a, o) = self.try_eta(&g, self.eta);
            candidate = a;
            cand_obj = o;
        }
        if cand_obj < self.objective - slack {
            // Nothing acceptable at any scale; keep the current state.
            let alloc =
                FractionalAllocation::from_flat(self.n, self.m, self.x.clone(), 1e-9).unwrap();
            return self.measure(&alloc);
        }
        // Probe upward through within-slack plateaus: the acceptable range
        // can extend many octaves above the first not-worse step, and the
        // gains out there (narrow-column drains) are invisible at small eta.
        let mut probe = self.eta;
        for _ in 0..60 {
            probe *= self.grow;
            if probe > ETA_CAP {
                break;
            }
            let (a, o) = self.try_eta(&g, probe);
            if o < self.objective - slack {
                break;
            }
            if o > cand_obj + slack {
                self.eta = probe;
                candidate = a;
                cand_obj = o;
            }
        }
        // When nothing at or above the current step measurably improves,
        // look below it as well: an oscillatory mode that is unstable at
        // this step (each move overturns a utility balance it should close)
        // is stable at half of it, and the damped move shows up as a real
        // objective gain that the flat-looking base candidate hides.
        if cand_obj <= self.objective + slack {
            let mut probe = self.eta;
            for _ in 0..20 {
                probe *= self.decay;
                if probe < f64::MIN_POSITIVE {
                    break;
                }
                let (a, o) = self.try_eta(&g, probe);
                if o > cand_obj + slack {
                    self.eta = probe;
                    candidate = a;
                    cand_obj = o;
                    break;
                }
            }
        }
        // A bitwise no-op means the step at this eta is a fixed point of the
        // projected map (e.g. a greedy reassignment plateau at huge eta), and
        // a bitwise return to the previous state means a period-2 cycle of it
        // (two assignments swapping goods at equal objective). Either way no
        // new ground is being covered: walk eta down so movement can resume
        // at a finer scale. Plateaus with genuine movement keep their eta.
        let same = |a: &FractionalAllocation, b: &[f64]| {
            (0..self.n).all(|i| a.row(i) == &b[i * self.m..(i + 1) * self.m])
        };
        if same(&candidate, &self.x) || (!self.prev_x.is_empty() && same(&candidate, &self.prev_x))
        {
            self.eta = (self.eta * self.decay).max(f64::MIN_POSITIVE);
        }
        let strictly_better = cand_obj > self.objective + slack;
        let prior_objective = self.objective;
        self.adopt(&candidate, cand_obj);
        let mut residual = self.measure(&candidate)?;
        // Terminal polish: near the optimum the objective freezes at float
        // resolution and carries no more signal, while the residual still
        // has orders of magnitude to go (tied goods drain in O(1/k)). Probe
        // larger steps and accept by residual directly, allowing the
        // objective a tiny leash: killing a utility tie in one move costs
        // quadratically little objective but removes the imbalance linearly.
        let mut polished = false;
        if !strictly_better && residual < POLISH_RESID {
            let leash = 1e-10 * (1.0 + prior_objective.abs());
            let mut trial = self.eta;
            let mut g2 = self.gradient();
            for _ in 0..45 {
                trial *= self.grow;
                if trial > ETA_CAP {
                    break;
                }
                let (a, o) = self.try_eta(&g2, trial);
                if o < prior_objective - leash {
                    break;
                }
                let rr = self.residual_of(&a)?;
                if rr < residual {
                    self.adopt(&a, o);
                    residual = self.measure(&a)?;
                    g2 = self.gradient();
                    polished = true;
                }
            }
        }
        if residual < TERMINAL_RESID {
            self.terminal_acceleration(residual, polished)
        } else {
            self.avg_live = false;
            self.snaps.clear();
            self.snap_clock = 0;
            Ok(residual)
        }
    }

    /// Drift extrapolation and iterate averaging for the terminal regime.
    /// Both produce candidate states outside the gradient ray and adopt
    /// them only when the measured residual strictly improves.
    fn terminal_acceleration(
        &mut self,
        mut residual: f64,
        polished: bool,
    ) -> Result<f64, SolverError> {
        // Drift extrapolation: the terminal approach to the optimum is
        // geometric, x(k) - x* ~ c rho^k, and can be arbitrarily slow when
        // the residual rides on low-value goods. Snapshot the state at fixed
        // spacing, estimate rho from two successive differences, and jump to
        // the predicted limit when the measured residual agrees.
        if polished {
            self.snaps.clear();
        } else {
            self.snap_clock += 1;
            if self.snap_clock >= SNAP_SPACING {
                self.snap_clock = 0;
                self.snaps.push(self.x.clone());
                if self.snaps.len() == 3 {
                    let d1: Vec<f64> = self.snaps[1]
                        .iter()
                        .zip(&self.snaps[0])
                        .map(|(a, b)| a - b)
                        .collect();
                    let d2: Vec<f64> = self.snaps[2]
                        .iter()
                        .zip(&self.snaps[1])
                        .map(|(a, b)| a - b)
                        .collect();
                    let dot: f64 = d1.iter().zip(&d2).map(|(a, b)| a * b).sum();
                    let n1: f64 = d1.iter().map(|v| v * v).sum();
                    let n2: f64 = d2.iter().map(|v| v * v).sum();
                    self.snaps.remove(0);
                    if n1 > 0.0 && n2 > 0.0 {
                        let rho = dot / n1;
                        let cos2 = dot * dot / (n1 * n2);
                        // Only a clean single-mode contraction extrapolates
                        // credibly: successive differences must stay nearly
                        // parallel and strictly shrinking.
                        if rho > 0.0 && rho < 0.9999 && cos2 > 0.98 {
                            let scale = rho / (1.0 - rho);
                            let raw: Vec<f64> = self
                                .x
                                .iter()
                                .zip(&d2)
                                .map(|(v, d)| v + d * scale)
                                .collect();
                            let a = project_feasible(&raw, self.n, self.m);
                            let rr = self.measure(&a)?;
                            if rr < residual {
                                let o = eg_objective(&self.market, &a);
                                if o.is_finite() {
                                    self.adopt(&a, o);
                                    residual = rr;
                                    self.snaps.clear();
                                }
                            }
                        }
                    }
                }
            }
        }
        // Iterate averaging: a constant step orbits the optimum at a radius
        // the objective cannot see; the running average sits at the orbit's
        // center. Jump there whenever it measures better.
        if polished || !self.avg_live {
            self.avg_x = self.x.clone();
            self.avg_live = true;
        } else {
            for (a, &v) in self.avg_x.iter_mut().zip(&self.x) {
                *a += (v - *a) / 32.0;
            }
            if self.iters % 8 == 0 {
                let a = FractionalAllocation::from_flat(self.n, self.m, self.avg_x.clone(), 1e-9)
                    .unwrap();
                let rr = self.measure(&a)?;
                if rr < residual {
                    let o = eg_objective(&self.market, &a);
                    self.adopt(&a, o);
                    self.avg_x = self.x.clone();
                    self.snaps.clear();
                    residual = rr;
                }
            }
        }
        Ok(residual)
    }

    /// One unconditional step at the given (usually huge) eta. At such
    /// lengths the projected step hands every good to its gradient argmax —
    /// a greedy bang-per-buck reassignment — which relocates the trajectory
    /// to a different basin. A burst that would starve some agent entirely
    /// (objective negative infinity) is discarded; infinity is returned so
    /// the caller never mistakes it for progress.
    fn burst(&mut self, eta_burst: f64) -> Result<f64, SolverError> {
        self.iters += 1;
        let g = self.gradient();
        let (a, o) = self.try_eta(&g, eta_burst);
        if !o.is_finite() {
            return Ok(f64::INFINITY);
        }
        self.avg_live = false;
        self.snaps.clear();
        self.snap_clock = 0;
        self.adopt(&a, o);
        self.measure(&a)
    }
}

/// Iterations without a 0.95-factor best-residual improvement before a
/// burst fires.
const STALL: usize = 500;
/// Ceiling on the adaptive burst window.
const WINDOW_CAP: usize = 32_768;
/// Iterations without a 0.95-factor best-residual improvement before the
/// whole trajectory is abandoned for a random restart. A trajectory that is
/// still converging is never thrown away.
const RESTART_STALL: usize = 25_000;
/// Burst step lengths, cycled in order and jittered by the caller. The
/// rungs span what it takes to snap a whole column to its gradient-argmax
/// agent: the projection separates two contenders only once
/// `eta * (gradient difference)` exceeds the share scale, and near-tied
/// contenders on low-value goods (differences ~1e-8) need the top rung.
const BURST_LADDER: [f64; 5] = [1024.0, 16384.0, 262144.0, 4194304.0, 134217728.0];
/// RNG seed used when the config does not supply one.
const DEFAULT_SEED: u64 = 0x9e3779b97f4a7c15;

/// Runs projected gradient ascent until the equilibrium residual reaches
/// `config.convergence_tol` or the iteration budget runs out. The first
/// trajectory starts from the uniform allocation; exhausted trajectories
/// are restarted from random allocations. Goods valued zero by everyone are
/// stripped first and re-attached with price zero. The returned outcome is
/// the best iterate by residual; on non-convergence it is carried inside
/// the error.
pub fn solve_equilibrium(
    market: &Market,
    config: &SolverConfig,
    tol: &ToleranceConfig,
) -> Result<Outcome, SolverError> {
    config.validate()?;
    let n = market.n_agents();
    let m = market.n_goods();
    if let Some(agent) = (0..n).find(|&i| market.budget(i) == 0.0) {
        return Err(SolverError::ZeroBudget { agent });
    }

    let active: Vec<usize> = (0..m)
        .filter(|&j| (0..n).any(|i| market.value(i, j) > 0.0))
        .collect();
    let mut normalized = Vec::with_capacity(n * active.len());
    for i in 0..n {
        let row_max = market
            .valuation_row(i)
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));
        for &j in &active {
            normalized.push(market.value(i, j) / row_max);
        }
    }
    let reduced = Market::from_flat(n, active.len(), normalized, market.budgets().to_vec())
        .expect("reduced market inherits validity");
    let m_active = active.len();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.unwrap_or(DEFAULT_SEED));
    let mut ascent = Ascent::new(reduced, config, tol);
    let mut next_burst = 0usize;
    let mut converged = false;
    let mut first_epoch = true;

    'epochs: while ascent.iters < config.max_iters {
        if !first_epoch {
            // Random restart: per-good exponential-weight splits, so every
            // column starts strictly interior but far from uniform.
            let mut x = vec![0.0; n * m_active];
            for j in 0..m_active {
                let mut total = 0.0;
                for i in 0..n {
                    let w = -(rng.random::<f64>().max(1e-300)).ln();
                    x[i * m_active + j] = w;
                    total += w;
                }
                if total > 0.0 {
                    for i in 0..n {
                        x[i * m_active + j] /= total;
                    }
                } else {
                    for i in 0..n {
                        x[i * m_active + j] = 1.0 / n as f64;
                    }
                }
            }
            ascent.restart(x);
        }
        first_epoch = false;

        let mut stall_clock = 0usize;
        let mut stall_ref = f64::INFINITY;
        let mut window = STALL;
        let mut best_at_last_burst = f64::INFINITY;
        let mut restart_clock = 0usize;
        let mut restart_ref = f64::INFINITY;
        while ascent.iters < config.max_iters && restart_clock < RESTART_STALL {
            let residual = ascent.step()?;
            if residual <= config.convergence_tol {
                converged = true;
                break 'epochs;
            }
            let best_resid = ascent.best.as_ref().map_or(f64::INFINITY, |b| b.residual);
            if best_resid <= 0.95 * stall_ref {
                stall_ref = best_resid;
                stall_clock = 0;
            } else {
                stall_clock += 1;
            }
            if best_resid <= 0.95 * restart_ref {
                restart_ref = best_resid;
                restart_clock = 0;
            } else {
                restart_clock += 1;
            }
            if stall_clock >= window {
                // Payoff-adaptive cadence: a burst that led to a new best
                // since the last one earns the base window back; a fruitless
                // one doubles the wait, protecting long terminal drifts
                // from being interrupted.
                if best_resid < best_at_last_burst {
                    window = STALL;
                } else {
                    window = (window * 2).min(WINDOW_CAP);
                }
                best_at_last_burst = best_resid;
                let eta_burst = BURST_LADDER[next_burst % BURST_LADDER.len()]
                    * 2f64.powf(rng.random_range(-1.0..1.0));
                next_burst += 1;
                let burst_resid = ascent.burst(eta_burst)?;
                if burst_resid <= config.convergence_tol {
                    converged = true;
                    break 'epochs;
                }
                stall_clock = 0;
            }
        }
    }

    let iterations = ascent.iters;
    let best = ascent.best.expect("at least one iteration ran");
    // Scatter the reduced solution back to full dimension; stripped goods
    // carry price zero and no allocation.
    let mut shares = vec![0.0; n * m];
    let mut prices = vec![0.0; m];
    for (col, &j) in active.iter().enumerate() {
        for i in 0..n {
            shares[i * m + j] = best.x[i * m_active + col];
        }
        prices[j] = best.prices.get(col);
    }
    let outcome = Outcome {
        alloc: FractionalAllocation::from_flat(n, m, shares, 1e-9)
            .expect("scattered allocation stays feasible"),
        prices: PriceVector::new(prices)?,
        residual: best.residual,
        iterations_used: iterations,
    };
    if converged {
        Ok(outcome)
    } else {
        Err(SolverError::DidNotConverge {
            best: Box::new(outcome),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(vals: Vec<Vec<f64>>, budgets: Vec<f64>) -> Market {
        Market::new(vals, budgets).unwrap()
    }

    #[test]
    fn objective_matches_hand_values() {
        let m = market(vec![vec![3.0, 1.0]], vec![1.0]);
        let x = FractionalAllocation::new(vec![vec![1.0, 1.0]], 0.0).unwrap();
        assert!((eg_objective(&m, &x) - 4.0f64.ln()).abs() < 1e-15);

        let m2 = market(vec![vec![2.0, 2.0], vec![2.0, 2.0]], vec![1.0, 1.0]);
        let x2 = FractionalAllocation::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.0).unwrap();
        assert!((eg_objective(&m2, &x2) - 2.0 * 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn objective_sentinel_on_empty_bundle() {
        let m = market(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]);
        let x = FractionalAllocation::new(vec![vec![1.0], vec![0.0]], 0.0).unwrap();
        assert_eq!(eg_objective(&m, &x), f64::NEG_INFINITY);
    }

    #[test]
    fn projection_examples() {
        // Already feasible: unchanged.
        let mut col = vec![0.5, 0.3];
        project_column(&mut col);
        assert_eq!(col, vec![0.5, 0.3]);
        // Symmetric overflow splits evenly.
        let mut col = vec![2.0, 2.0];
        project_column(&mut col);
        assert_eq!(col, vec![0.5, 0.5]);
        // Negative coordinate clamps with slack remaining.
        let mut col = vec![-1.0, 0.4];
        project_column(&mut col);
        assert_eq!(col, vec![0.0, 0.4]);
    }

    #[test]
    fn projection_matches_grid_search() {
        // Brute-force oracle: the projection must beat every feasible grid
        // point up to the grid resolution.
        let cases = [
            vec![0.9, 0.8, -0.3],
            vec![1.5, 0.1, 0.2],
            vec![0.4, 0.4, 0.4],
            vec![-0.2, -0.5, 2.0],
        ];
        let step = 0.01;
        for raw in cases {
            let mut projected = raw.clone();
            project_column(&mut projected);
            assert!(projected.iter().all(|&v| v >= 0.0));
            assert!(projected.iter().sum::<f64>() <= 1.0 + 1e-12);
            let dist =
                |y: &[f64]| -> f64 { y.iter().zip(&raw).map(|(a, b)| (a - b) * (a - b)).sum() };
            let ours = dist(&projected);
            let steps = (1.0 / step) as usize;
            for a in 0..=steps {
                for b in 0..=steps - a {
                    for c in 0..=steps - a - b {
                        let y = [a as f64 * step, b as f64 * step, c as f64 * step];
                        assert!(
                            ours <= dist(&y) + 1e-9,
                            "grid point {y:?} beats projection {projected:?} of {raw:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn price_extraction_examples() {
        let m = market(vec![vec![3.0, 1.0]], vec![1.0]);
        let x = FractionalAllocation::new(vec![vec![1.0, 1.0]], 0.0).unwrap();
        let p = extract_prices(&m, &x).unwrap();
        assert_eq!(p.as_slice(), &[0.75, 0.25]);

        // One good, two equal agents splitting it: price forced to 2.
        let m2 = market(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]);
        let x2 = FractionalAllocation::new(vec![vec![0.5], vec![0.5]], 0.0).unwrap();
        assert_eq!(extract_prices(&m2, &x2).unwrap().as_slice(), &[2.0]);

        // A good valued zero by everyone is priced zero.
        let m3 = market(vec![vec![1.0, 0.0]], vec![1.0]);
        let x3 = FractionalAllocation::new(vec![vec![1.0, 0.0]], 0.0).unwrap();
        assert_eq!(extract_prices(&m3, &x3).unwrap().get(1), 0.0);
    }

    #[test]
    fn price_extraction_errors_on_zero_bundle() {
        let m = market(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]);
        let x = FractionalAllocation::new(vec![vec![1.0], vec![0.0]], 0.0).unwrap();
        assert!(matches!(
            extract_prices(&m, &x),
            Err(SolverError::ZeroBundleValue { agent: 1 })
        ));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let m = market(
            vec![vec![2.0, 5.0, 1.0], vec![4.0, 1.0, 3.0]],
            vec![1.0, 2.0],
        );
        let x = FractionalAllocation::new(
            vec![vec![0.3, 0.2, 0.1], vec![0.2, 0.4, 0.3]],
            0.0,
        )
        .unwrap();
        let h = 1e-5;
        for i in 0..2 {
            for j in 0..3 {
                let value = m.fractional_value(i, x.row(i)).unwrap();
                let analytic = m.budget(i) * m.value(i, j) / value;
                let mut up = x.clone();
                up.set_share(i, j, x.share(i, j) + h);
                let mut down = x.clone();
                down.set_share(i, j, x.share(i, j) - h);
                let numeric = (eg_objective(&m, &up) - eg_objective(&m, &down)) / (2.0 * h);
                assert!(
                    (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(1.0),
                    "gradient mismatch at ({i},{j}): {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn ascent_objective_never_drops_beyond_leash() {
        // The acceptance contract: a step may trade objective for residual,
        // but only within the float-noise slack plus a few polish leashes.
        let m = market(
            vec![vec![1.0, 0.25, 0.0625], vec![0.5, 1.0, 0.25]],
            vec![1.0, 1.0],
        );
        let mut ascent = Ascent::new(m, &SolverConfig::default(), &ToleranceConfig::default());
        let mut last = ascent.objective;
        for _ in 0..200 {
            ascent.step().unwrap();
            let floor =
                last - 16.0 * f64::EPSILON * last.abs() - 4.0 * 1e-10 * (1.0 + last.abs());
            assert!(
                ascent.objective >= floor,
                "objective fell past the leash: {last} -> {}",
                ascent.objective
            );
            last = ascent.objective;
        }
    }

    #[test]
    fn solves_single_good_split_market() {
        let m = market(vec![vec![1.0], vec![1.0]], vec![1.0, 1.0]);
        let tol = ToleranceConfig::default();
        let out = solve_equilibrium(&m, &SolverConfig::default(), &tol).unwrap();
        assert!((out.alloc.share(0, 0) - 0.5).abs() < 1e-6);
        assert!((out.alloc.share(1, 0) - 0.5).abs() < 1e-6);
        assert!((out.prices.get(0) - 2.0).abs() < 1e-6);
        assert!(out.residual <= tol.abs);
        // The residual is exactly what check_equilibrium reports on the
        // returned outcome.
        let report = check_equilibrium(&m, &out.alloc, &out.prices, &tol).unwrap();
        assert_eq!(report.worst_violation(), out.residual);
    }

    #[test]
    fn solves_identical_agents_three_goods() {
        // Identical agents and goods force uniform prices summing to the
        // total budget: p = (2/3, 2/3, 2/3).
        let m = market(
            vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]],
            vec![1.0, 1.0],
        );
        let out = solve_equilibrium(&m, &SolverConfig::default(), &ToleranceConfig::default())
            .unwrap();
        for j in 0..3 {
            assert!(
                (out.prices.get(j) - 2.0 / 3.0).abs() < 1e-6,
                "price {j} = {}",
                out.prices.get(j)
            );
        }
        for i in 0..2 {
            assert!((out.alloc.agent_spend(i, &out.prices) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn price_sum_matches_budget_sum_at_convergence() {
        let m = market(
            vec![vec![4.0, 1.0, 2.0, 16.0], vec![2.0, 8.0, 1.0, 1.0]],
            vec![1.0, 1.0],
        );
        let out = solve_equilibrium(&m, &SolverConfig::default(), &ToleranceConfig::default())
            .unwrap();
        assert!((out.prices.total() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn spent_goods_attain_the_extracted_price() {
        let tol = ToleranceConfig::default();
        let m = market(
            vec![vec![4.0, 1.0, 2.0, 16.0], vec![2.0, 8.0, 1.0, 1.0]],
            vec![1.0, 1.0],
        );
        let out = solve_equilibrium(&m, &SolverConfig::default(), &tol).unwrap();
        for i in 0..2 {
            let value = m.fractional_value(i, out.alloc.row(i)).unwrap();
            for j in 0..4 {
                if out.alloc.share(i, j) > tol.spend {
                    let bang = m.budget(i) * m.value(i, j) / value;
                    assert!(
                        bang >= out.prices.get(j) * (1.0 - tol.rel),
                        "spent-on good {j} below price: {bang} < {}",
                        out.prices.get(j)
                    );
                }
            }
        }
    }

    #[test]
    fn stripped_goods_come_back_with_zero_price() {
        let m = market(vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![1.0, 1.0]);
        let out = solve_equilibrium(&m, &SolverConfig::default(), &ToleranceConfig::default())
            .unwrap();
        assert_eq!(out.prices.get(1), 0.0);
        assert_eq!(out.alloc.share(0, 1), 0.0);
        assert_eq!(out.alloc.share(1, 1), 0.0);
        assert!((out.prices.get(0) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn non_convergence_carries_best_outcome() {
        // An unreachable tolerance forces the budget to run out; the error
        // must still carry the best iterate found.
        let m = market(vec![vec![1.0, 2.0], vec![2.0, 1.0]], vec![1.0, 3.0]);
        let config = SolverConfig {
            max_iters: 1,
            convergence_tol: 1e-300,
            ..SolverConfig::default()
        };
        match solve_equilibrium(&m, &config, &ToleranceConfig::default()) {
            Err(SolverError::DidNotConverge { best }) => {
                assert_eq!(best.iterations_used, 1);
                assert!(best.residual.is_finite());
            }
            other => panic!("expected DidNotConverge, got {other:?}"),
        }
    }
}
