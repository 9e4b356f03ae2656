//! Symmetric TSP on top of the engine.
//!
//! The main subspace is the `n x n` grid of (initial node, final node). Only
//! the upper triangle `i < j` holds real edges; the diagonal is
//! NotMakingSense and the lower triangle Nonexistent. User interdictions start
//! as ForbiddenUser.
//!
//! Three rules react to every marked edge, in this order:
//!
//! * degree bookkeeping stores both endpoints' marked degree in the
//!   auxiliary cells (one cell per node);
//! * saturation forbids every remaining Potential edge at a node whose
//!   degree reached 2;
//! * subtour interdiction forbids the edge joining the two ends of the
//!   marked path that now contains the new edge, unless that path already
//!   spans `n - 1` edges.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::engine::{
    completeness, ContactRule, EngineError, Environment, FactorTable, PointId, PointState,
    Reaction, RuleContext, SummaryDecision, Trace, Valency,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TspError {
    #[error("n: at least 3 nodes are required, got {0}")]
    TooFewNodes(usize),
    #[error("matrix: expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("matrix[{row}]: expected {expected} entries, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("matrix[{i}][{j}]: distance must be finite and non-negative, got {value}")]
    BadDistance { i: usize, j: usize, value: f64 },
    #[error("matrix[{i}][{j}]: not symmetric ({a} vs {b})")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("forbidden: pair [{0}, {1}] is not an edge between two distinct nodes")]
    BadForbiddenPair(usize, usize),
    #[error("order: not a permutation of 0..{0}")]
    NotPermutation(usize),
    #[error("order: edge {{{0}, {1}}} is forbidden")]
    UsesForbiddenEdge(usize, usize),
    #[error("marked edges do not form a single Hamiltonian cycle")]
    BrokenCycle,
    #[error("optimal length must be positive, got {0}")]
    NonPositiveOptimum(f64),
    #[error("optimal length {optimal} exceeds tour length {length}")]
    OptimumExceedsTour { optimal: f64, length: f64 },
    #[error("nearest-neighbour construction stranded after {visited} nodes")]
    Stranded { visited: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    n: usize,
    dist: Vec<f64>,
    forbidden: BTreeSet<(usize, usize)>,
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl TspInstance {
    /// Validates a full distance matrix and a list of user-forbidden pairs.
    /// The diagonal is ignored.
    pub fn new(matrix: &[Vec<f64>], forbidden: &[(usize, usize)]) -> Result<Self, TspError> {
        let n = matrix.len();
        if n < 3 {
            return Err(TspError::TooFewNodes(n));
        }
        let mut dist = alloc::vec![0.0; n * n];
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(TspError::RowLength {
                    row: i,
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &d) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                if !d.is_finite() || d < 0.0 {
                    return Err(TspError::BadDistance { i, j, value: d });
                }
                dist[i * n + j] = d;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (dist[i * n + j], dist[j * n + i]);
                if a != b {
                    return Err(TspError::Asymmetric { i, j, a, b });
                }
            }
        }
        let mut set = BTreeSet::new();
        for &(i, j) in forbidden {
            if i == j || i >= n || j >= n {
                return Err(TspError::BadForbiddenPair(i, j));
            }
            set.insert(ordered(i, j));
        }
        Ok(TspInstance {
            n,
            dist,
            forbidden: set,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn is_forbidden(&self, i: usize, j: usize) -> bool {
        self.forbidden.contains(&ordered(i, j))
    }

    /// Usable edge: distinct endpoints and not forbidden by the user.
    pub fn allowed(&self, i: usize, j: usize) -> bool {
        i != j && !self.is_forbidden(i, j)
    }

    pub fn forbidden(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.forbidden.iter().copied()
    }

    /// Rows of the distance matrix (diagonal reported as 0).
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

/// Length of the closed tour `order`, orientation independent: the smaller of
/// the two left-to-right sums starting at `order[0]`.
pub fn tour_length(inst: &TspInstance, order: &[usize]) -> f64 {
    let n = order.len();
    let mut fwd = 0.0;
    let mut rev = 0.0;
    for k in 0..n {
        fwd += inst.dist(order[k], order[(k + 1) % n]);
        rev += inst.dist(order[(n - k) % n], order[(2 * n - k - 1) % n]);
    }
    if rev < fwd {
        rev
    } else {
        fwd
    }
}

/// A Hamiltonian cycle, stored starting at node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    order: Vec<usize>,
    length: f64,
}

impl Tour {
    /// Validates `order` as a permutation using only allowed edges and rotates
    /// it to start at node 0.
    pub fn new(inst: &TspInstance, order: Vec<usize>) -> Result<Self, TspError> {
        let n = inst.n;
        if order.len() != n {
            return Err(TspError::NotPermutation(n));
        }
        let mut seen = alloc::vec![false; n];
        for &v in &order {
            if v >= n || seen[v] {
                return Err(TspError::NotPermutation(n));
            }
            seen[v] = true;
        }
        for k in 0..n {
            let (a, b) = (order[k], order[(k + 1) % n]);
            if inst.is_forbidden(a, b) {
                let (a, b) = ordered(a, b);
                return Err(TspError::UsesForbiddenEdge(a, b));
            }
        }
        let mut order = order;
        let start = order.iter().position(|&v| v == 0).unwrap_or(0);
        order.rotate_left(start);
        let length = tour_length(inst, &order);
        Ok(Tour { order, length })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Undirected edges of the tour as ordered pairs `(min, max)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.order.len();
        (0..n).map(move |k| ordered(self.order[k], self.order[(k + 1) % n]))
    }
}

fn edge(i: usize, j: usize) -> PointId {
    let (a, b) = ordered(i, j);
    PointId::pair(a, b)
}

fn marked_neighbours<'a>(
    ctx: &'a RuleContext<'_>,
    n: usize,
    v: usize,
) -> impl Iterator<Item = usize> + 'a {
    (0..n).filter(move |&u| u != v && ctx.state(&edge(u, v)) == Some(PointState::Marked))
}

/// Keeps each node's marked degree in auxiliary cell `node`.
#[derive(Debug, Clone, Copy)]
pub struct DegreeBookkeeping {
    pub n: usize,
}

impl ContactRule for DegreeBookkeeping {
    fn name(&self) -> &'static str {
        "degree"
    }

    fn matches(&self, change: &Reaction) -> bool {
        change.to == PointState::Marked
    }

    fn react(&self, change: &Reaction, ctx: &mut RuleContext<'_>) -> Result<(), EngineError> {
        for v in [change.point.at(0), change.point.at(1)] {
            let degree = marked_neighbours(ctx, self.n, v).count();
            ctx.set_aux(v, degree as i64)?;
        }
        Ok(())
    }
}

/// A node with two marked edges loses every other candidate edge.
#[derive(Debug, Clone, Copy)]
pub struct Saturation {
    pub n: usize,
}

impl ContactRule for Saturation {
    fn name(&self) -> &'static str {
        "saturation"
    }

    fn matches(&self, change: &Reaction) -> bool {
        change.to == PointState::Marked
    }

    fn react(&self, change: &Reaction, ctx: &mut RuleContext<'_>) -> Result<(), EngineError> {
        for v in [change.point.at(0), change.point.at(1)] {
            if ctx.aux(v) != Some(2) {
                continue;
            }
            for u in 0..self.n {
                if u != v && ctx.state(&edge(u, v)) == Some(PointState::Potential) {
                    ctx.forbid(edge(u, v));
                }
            }
        }
        Ok(())
    }
}

/// Closing a cycle on fewer than `n` nodes is inadmissible.
#[derive(Debug, Clone, Copy)]
pub struct SubtourInterdiction {
    pub n: usize,
}

impl SubtourInterdiction {
    /// Follows marked edges from `start`, leaving through any neighbour but
    /// `prev`, and returns the last node reached. `None` if a cycle is found.
    fn path_end(&self, ctx: &RuleContext<'_>, mut prev: usize, mut cur: usize) -> Option<usize> {
        for _ in 0..self.n {
            match marked_neighbours(ctx, self.n, cur).find(|&u| u != prev) {
                None => return Some(cur),
                Some(next) => {
                    prev = cur;
                    cur = next;
                }
            }
        }
        None
    }
}

impl ContactRule for SubtourInterdiction {
    fn name(&self) -> &'static str {
        "subtour"
    }

    fn matches(&self, change: &Reaction) -> bool {
        change.to == PointState::Marked
    }

    fn react(&self, change: &Reaction, ctx: &mut RuleContext<'_>) -> Result<(), EngineError> {
        if ctx.marked_count() + 1 >= self.n {
            return Ok(());
        }
        let (a, b) = (change.point.at(0), change.point.at(1));
        let (Some(end_a), Some(end_b)) = (self.path_end(ctx, b, a), self.path_end(ctx, a, b))
        else {
            return Ok(());
        };
        if end_a != end_b && ctx.state(&edge(end_a, end_b)) == Some(PointState::Potential) {
            ctx.forbid(edge(end_a, end_b));
        }
        Ok(())
    }
}

pub fn build_tsp_environment(inst: &TspInstance) -> Environment {
    let n = inst.n;
    let mut init = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let state = if i == j {
                PointState::NotMakingSense
            } else if i > j {
                PointState::Nonexistent
            } else if inst.is_forbidden(i, j) {
                PointState::ForbiddenUser
            } else {
                continue;
            };
            init.push((PointId::pair(i, j), state));
        }
    }
    let axes = [n, n];
    let factors = FactorTable::from_fn(&axes, |p| {
        let (i, j) = (p.at(0), p.at(1));
        (i < j).then(|| inst.dist(i, j))
    })
    .expect("n >= 3");
    let rules: Vec<Box<dyn ContactRule>> = alloc::vec![
        Box::new(DegreeBookkeeping { n }),
        Box::new(Saturation { n }),
        Box::new(SubtourInterdiction { n }),
    ];
    Environment::new(&axes, &init, factors, rules)
        .expect("tsp environment is valid by construction")
        .with_auxiliary(n)
}

/// A tour needs one edge per node.
pub fn target_count(inst: &TspInstance) -> usize {
    inst.n
}

/// Default weight of the regret term.
pub const DEFAULT_LAMBDA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ValencyMode {
    /// `-d`: shortest edge first.
    #[default]
    Greedy,
    /// `-d + lambda * regret`, where regret sums, over both endpoints, the gap
    /// between the cheapest and second-cheapest remaining edge at that node.
    Regret { lambda: f64 },
}

#[derive(Debug, Clone)]
pub struct TspValency {
    mode: ValencyMode,
    gaps: Vec<f64>,
}

impl TspValency {
    pub fn new(mode: ValencyMode) -> Self {
        TspValency {
            mode,
            gaps: Vec::new(),
        }
    }
}

impl Valency for TspValency {
    fn prepare(&mut self, env: &Environment) {
        if let ValencyMode::Greedy = self.mode {
            return;
        }
        let n = env.axes()[0];
        let mut cheapest = alloc::vec![(f64::INFINITY, f64::INFINITY); n];
        let mut longest: f64 = 0.0;
        for (p, s) in env.points() {
            if p.at(0) < p.at(1) && !s.is_outside() {
                longest = longest.max(env.factor(&p).unwrap_or(0.0));
            }
        }
        for p in env.potential() {
            let d = env.factor(&p).unwrap_or(0.0);
            for v in [p.at(0), p.at(1)] {
                let c = &mut cheapest[v];
                if d < c.0 {
                    *c = (d, c.0);
                } else if d < c.1 {
                    c.1 = d;
                }
            }
        }
        // A node with a single remaining option gets its gap measured
        // against the longest edge of the instance.
        self.gaps = cheapest
            .into_iter()
            .map(|(best, second)| {
                if best.is_infinite() {
                    0.0
                } else if second.is_infinite() {
                    longest - best
                } else {
                    second - best
                }
            })
            .collect();
    }

    fn score(&self, env: &Environment, point: &PointId) -> f64 {
        let d = env.factor(point).unwrap_or(0.0);
        match self.mode {
            ValencyMode::Greedy => -d,
            ValencyMode::Regret { lambda } => {
                let regret = self.gaps[point.at(0)] + self.gaps[point.at(1)];
                -d + lambda * regret
            }
        }
    }
}

/// Valency of edge `e` in the current state of `env`.
pub fn tsp_valency(env: &Environment, e: &PointId, mode: ValencyMode) -> f64 {
    let mut v = TspValency::new(mode);
    v.prepare(env);
    v.score(env, e)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TourOutcome {
    Complete(Tour),
    /// Synthesis stalled; carries the marked edges and the completeness
    /// (`None` when nothing at all was marked).
    Incomplete {
        edges: Vec<(usize, usize)>,
        completeness: Option<f64>,
    },
}

impl TourOutcome {
    pub fn tour(&self) -> Option<&Tour> {
        match self {
            TourOutcome::Complete(t) => Some(t),
            TourOutcome::Incomplete { .. } => None,
        }
    }
}

/// Decodes a summary decision into a tour starting at node 0 that leaves
/// through its lower-numbered neighbour.
pub fn extract_tour(
    inst: &TspInstance,
    summary: &SummaryDecision,
) -> Result<TourOutcome, TspError> {
    let n = inst.n;
    let edges: Vec<(usize, usize)> = summary
        .singles
        .iter()
        .map(|p| ordered(p.at(0), p.at(1)))
        .collect();
    if !summary.complete {
        return Ok(TourOutcome::Incomplete {
            completeness: completeness(summary, n).ok(),
            edges,
        });
    }
    if edges.len() != n {
        return Err(TspError::BrokenCycle);
    }
    let mut adj = alloc::vec![Vec::with_capacity(2); n];
    for &(a, b) in &edges {
        if a == b || b >= n {
            return Err(TspError::BrokenCycle);
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    if adj.iter().any(|nb| nb.len() != 2) {
        return Err(TspError::BrokenCycle);
    }
    let mut order = Vec::with_capacity(n);
    let mut prev = 0;
    let mut cur = adj[0][0].min(adj[0][1]);
    order.push(0);
    while cur != 0 {
        if order.len() == n {
            return Err(TspError::BrokenCycle);
        }
        order.push(cur);
        let next = if adj[cur][0] == prev {
            adj[cur][1]
        } else {
            adj[cur][0]
        };
        prev = cur;
        cur = next;
    }
    if order.len() != n {
        return Err(TspError::BrokenCycle);
    }
    Tour::new(inst, order).map(TourOutcome::Complete)
}

#[derive(Debug, Clone)]
pub struct TspSolve {
    pub summary: SummaryDecision,
    pub trace: Trace,
    pub outcome: TourOutcome,
}

/// Runs edge synthesis and decodes the result.
pub fn synthesize(inst: &TspInstance, mode: ValencyMode) -> Result<TspSolve, SolveError> {
    let mut env = build_tsp_environment(inst);
    let (summary, trace) = env.run_synthesis(&mut TspValency::new(mode), target_count(inst))?;
    let outcome = extract_tour(inst, &summary)?;
    Ok(TspSolve {
        summary,
        trace,
        outcome,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Tsp(#[from] TspError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TspMetrics {
    pub length: f64,
    /// `optimal / length`.
    pub efficiency: f64,
}

pub fn tsp_metrics(tour: &Tour, optimal_length: f64) -> Result<TspMetrics, TspError> {
    if optimal_length.is_nan() || optimal_length <= 0.0 {
        return Err(TspError::NonPositiveOptimum(optimal_length));
    }
    if optimal_length > tour.length {
        return Err(TspError::OptimumExceedsTour {
            optimal: optimal_length,
            length: tour.length,
        });
    }
    Ok(TspMetrics {
        length: tour.length,
        efficiency: optimal_length / tour.length,
    })
}
