//! Two-way number partitioning ("heap" splitting) on top of the engine.
//!
//! The main subspace is `item x side`. Marking `(i, s)` puts item `i` on
//! side `s`; a single contact rule then forbids `(i, 1 - s)`. The valency is
//! largest-first into the lighter heap, and [`polish`] finishes with a
//! move/swap local search.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::engine::{
    ContactRule, EngineError, Environment, FactorTable, PointId, PointState, Reaction, RuleContext,
    SummaryDecision, Trace, Valency,
};

/// Heap totals stay below this so every valency is an exact `f64`.
pub const MAX_TOTAL_WEIGHT: u64 = 1 << 52;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("weights: at least one item is required")]
    Empty,
    #[error("weights[{index}]: must be a positive integer")]
    ZeroWeight { index: usize },
    #[error("weights: total exceeds {MAX_TOTAL_WEIGHT}")]
    TotalTooLarge,
    #[error("assignment covers {found} items, instance has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("item {item} is not assigned to exactly one heap")]
    Unassigned { item: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionInstance {
    weights: Vec<u64>,
    total: u64,
}

impl PartitionInstance {
    pub fn new(weights: Vec<u64>) -> Result<Self, PartitionError> {
        if weights.is_empty() {
            return Err(PartitionError::Empty);
        }
        let mut total: u64 = 0;
        for (index, &w) in weights.iter().enumerate() {
            if w == 0 {
                return Err(PartitionError::ZeroWeight { index });
            }
            total = total
                .checked_add(w)
                .filter(|&t| t <= MAX_TOTAL_WEIGHT)
                .ok_or(PartitionError::TotalTooLarge)?;
        }
        Ok(PartitionInstance { weights, total })
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Heap1,
    Heap2,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Heap1 => 0,
            Side::Heap2 => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Side::Heap1
        } else {
            Side::Heap2
        }
    }

    pub fn other(self) -> Self {
        match self {
            Side::Heap1 => Side::Heap2,
            Side::Heap2 => Side::Heap1,
        }
    }
}

/// A complete two-way split with cached heap totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    sides: Vec<Side>,
    sums: [u64; 2],
}

impl Assignment {
    pub fn new(inst: &PartitionInstance, sides: Vec<Side>) -> Result<Self, PartitionError> {
        if sides.len() != inst.len() {
            return Err(PartitionError::LengthMismatch {
                expected: inst.len(),
                found: sides.len(),
            });
        }
        let mut sums = [0; 2];
        for (w, s) in inst.weights.iter().zip(&sides) {
            sums[s.index()] += w;
        }
        Ok(Assignment { sides, sums })
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn side(&self, item: usize) -> Side {
        self.sides[item]
    }

    pub fn sums(&self) -> [u64; 2] {
        self.sums
    }

    /// Item indices on `side`, ascending.
    pub fn items_on(&self, side: Side) -> impl Iterator<Item = usize> + '_ {
        self.sides
            .iter()
            .enumerate()
            .filter(move |(_, s)| **s == side)
            .map(|(i, _)| i)
    }

    pub fn discrepancy(&self) -> u64 {
        self.sums[0].abs_diff(self.sums[1])
    }

    fn flip(&mut self, item: usize, weight: u64) {
        let from = self.sides[item];
        self.sums[from.index()] -= weight;
        self.sums[from.other().index()] += weight;
        self.sides[item] = from.other();
    }
}

/// Marking `(i, s)` forbids `(i, 1 - s)`: an item placed in one heap cannot
/// enter the other.
#[derive(Debug, Clone, Copy, Default)]
pub struct OppositeSideInterdiction;

impl ContactRule for OppositeSideInterdiction {
    fn name(&self) -> &'static str {
        "opposite-side"
    }

    fn matches(&self, change: &Reaction) -> bool {
        change.to == PointState::Marked
    }

    fn react(&self, change: &Reaction, ctx: &mut RuleContext<'_>) -> Result<(), EngineError> {
        let item = change.point.at(0);
        let side = change.point.at(1);
        ctx.forbid(PointId::pair(item, 1 - side));
        Ok(())
    }
}

/// Main subspace `[n_items, 2]`, every point Potential, factors are weights.
pub fn build_partition_environment(inst: &PartitionInstance) -> Environment {
    let axes = [inst.len(), 2];
    let factors = FactorTable::from_fn(&axes, |p| Some(inst.weights[p.at(0)] as f64))
        .expect("partition axes are non-zero");
    Environment::new(
        &axes,
        &[],
        factors,
        alloc::vec![Box::new(OppositeSideInterdiction)],
    )
    .expect("partition environment is valid by construction")
}

/// One single decision per item.
pub fn target_count(inst: &PartitionInstance) -> usize {
    inst.len()
}

/// Heaviest unassigned item into the lighter heap.
///
/// Score is `2 * weight`, plus 1 if the point's side is the currently lighter
/// heap (Heap1 on a tie). The bonus only separates the two sides of one item
/// and never outranks a heavier item.
#[derive(Debug, Clone, Default)]
pub struct LptValency {
    sums: [u64; 2],
}

impl LptValency {
    pub fn new() -> Self {
        Self::default()
    }

    fn lighter(&self) -> usize {
        if self.sums[0] <= self.sums[1] {
            0
        } else {
            1
        }
    }
}

impl Valency for LptValency {
    fn prepare(&mut self, env: &Environment) {
        self.sums = [0; 2];
        for p in env.marked() {
            let w = env.factor(&p).unwrap_or(0.0) as u64;
            self.sums[p.at(1)] += w;
        }
    }

    fn score(&self, env: &Environment, point: &PointId) -> f64 {
        let weight = env.factor(point).unwrap_or(0.0);
        let bonus = if point.at(1) == self.lighter() {
            1.0
        } else {
            0.0
        };
        2.0 * weight + bonus
    }
}

/// Valency of `point` in the current state of `env`.
pub fn partition_valency(env: &Environment, point: &PointId) -> f64 {
    let mut v = LptValency::new();
    v.prepare(env);
    v.score(env, point)
}

/// Reads the assignment off a finished summary decision.
pub fn assignment_from_summary(
    inst: &PartitionInstance,
    summary: &SummaryDecision,
) -> Result<Assignment, PartitionError> {
    let mut sides: Vec<Option<Side>> = alloc::vec![None; inst.len()];
    for p in &summary.singles {
        let item = p.at(0);
        if item >= inst.len() || sides[item].is_some() {
            return Err(PartitionError::Unassigned { item });
        }
        sides[item] = Some(Side::from_index(p.at(1)));
    }
    let sides = sides
        .into_iter()
        .enumerate()
        .map(|(item, s)| s.ok_or(PartitionError::Unassigned { item }))
        .collect::<Result<Vec<_>, _>>()?;
    Assignment::new(inst, sides)
}

#[derive(Debug, Clone)]
pub struct PartitionSolve {
    pub summary: SummaryDecision,
    pub trace: Trace,
    pub assignment: Assignment,
}

/// Greedy synthesis, without polishing.
pub fn synthesize(inst: &PartitionInstance) -> Result<PartitionSolve, EngineError> {
    let mut env = build_partition_environment(inst);
    let (summary, trace) = env.run_synthesis(&mut LptValency::new(), target_count(inst))?;
    let assignment = assignment_from_summary(inst, &summary)
        .expect("opposite-side interdiction leaves a point for every item");
    Ok(PartitionSolve {
        summary,
        trace,
        assignment,
    })
}

/// Steepest-descent local search over single-item moves and pairwise swaps.
///
/// Each round applies the move that lowers the discrepancy the most; moves are
/// scanned before swaps, and each class in index order, so the first of equal
/// candidates wins. Stops when no move strictly improves.
pub fn polish(inst: &PartitionInstance, a: &Assignment) -> Assignment {
    let w = &inst.weights;
    let mut a = a.clone();
    loop {
        // signed difference heap1 - heap2
        let diff = a.sums[0] as i128 - a.sums[1] as i128;
        let mut best = diff.unsigned_abs();
        let mut best_move: Option<(usize, Option<usize>)> = None;
        for (i, &wi) in w.iter().enumerate() {
            let delta = 2 * wi as i128;
            let after = match a.sides[i] {
                Side::Heap1 => diff - delta,
                Side::Heap2 => diff + delta,
            };
            if after.unsigned_abs() < best {
                best = after.unsigned_abs();
                best_move = Some((i, None));
            }
        }
        for i in 0..w.len() {
            if a.sides[i] != Side::Heap1 {
                continue;
            }
            for j in 0..w.len() {
                if a.sides[j] != Side::Heap2 {
                    continue;
                }
                let after = diff - 2 * w[i] as i128 + 2 * w[j] as i128;
                if after.unsigned_abs() < best {
                    best = after.unsigned_abs();
                    best_move = Some((i, Some(j)));
                }
            }
        }
        match best_move {
            None => return a,
            Some((i, j)) => {
                a.flip(i, w[i]);
                if let Some(j) = j {
                    a.flip(j, w[j]);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionMetrics {
    pub discrepancy: u64,
    /// `1 - discrepancy / total`.
    pub efficiency: f64,
}

pub fn partition_metrics(inst: &PartitionInstance, a: &Assignment) -> PartitionMetrics {
    let discrepancy = a.discrepancy();
    PartitionMetrics {
        discrepancy,
        efficiency: 1.0 - discrepancy as f64 / inst.total as f64,
    }
}
