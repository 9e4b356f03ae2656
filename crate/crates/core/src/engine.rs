//! The problem-agnostic environment state machine.
//!
//! Points live on a rectangular grid (one axis per variable of the main
//! subspace). Every point carries exactly one [`PointState`]. Only two
//! transitions exist: `Potential -> Marked`, taken by the step loop, and
//! `Potential -> ForbiddenAlgorithmic`, taken by contact rules. Everything
//! else is terminal, so a solve is a monotone walk that never revisits a
//! decision.
//!
//! The Potential and Counterpotential subspaces are kept as registries over
//! the main grid rather than as separate coordinate spaces.

use alloc::boxed::Box;
use alloc::collections::{BTreeSet, VecDeque};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

/// Largest supported dimensionality of the main subspace.
pub const MAX_AXES: usize = 4;

/// Coordinates of one point of the main subspace.
///
/// Ordering is lexicographic on the coordinates, which for a fixed arity
/// coincides with row-major order on the grid.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId {
    coords: [usize; MAX_AXES],
    arity: u8,
}

impl PointId {
    pub fn new(coords: &[usize]) -> Result<Self, EngineError> {
        if coords.is_empty() || coords.len() > MAX_AXES {
            return Err(EngineError::Arity {
                expected: MAX_AXES,
                found: coords.len(),
            });
        }
        let mut c = [0; MAX_AXES];
        c[..coords.len()].copy_from_slice(coords);
        Ok(PointId {
            coords: c,
            arity: coords.len() as u8,
        })
    }

    pub fn one(i: usize) -> Self {
        let mut coords = [0; MAX_AXES];
        coords[0] = i;
        PointId { coords, arity: 1 }
    }

    pub fn pair(i: usize, j: usize) -> Self {
        let mut coords = [0; MAX_AXES];
        coords[0] = i;
        coords[1] = j;
        PointId { coords, arity: 2 }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords[..self.arity as usize]
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    /// Shorthand for `coords()[axis]`.
    pub fn at(&self, axis: usize) -> usize {
        self.coords()[axis]
    }
}

impl fmt::Debug for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, c) in self.coords().iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum PointState {
    /// Free to become a single decision.
    Potential,
    /// Chosen as a single decision.
    Marked,
    /// Interdicted by the user before the solve.
    ForbiddenUser,
    /// Interdicted by a contact rule during the solve.
    ForbiddenAlgorithmic,
    /// Not part of the task (e.g. the lower triangle of an undirected edge grid).
    Nonexistent,
    /// Meaningless combination (e.g. a self-loop).
    NotMakingSense,
}

impl PointState {
    pub const ALL: [PointState; 6] = [
        PointState::Potential,
        PointState::Marked,
        PointState::ForbiddenUser,
        PointState::ForbiddenAlgorithmic,
        PointState::Nonexistent,
        PointState::NotMakingSense,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PointState::Potential => "Potential",
            PointState::Marked => "Marked",
            PointState::ForbiddenUser => "ForbiddenUser",
            PointState::ForbiddenAlgorithmic => "ForbiddenAlgorithmic",
            PointState::Nonexistent => "Nonexistent",
            PointState::NotMakingSense => "NotMakingSense",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        PointState::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn is_forbidden(self) -> bool {
        matches!(
            self,
            PointState::ForbiddenUser | PointState::ForbiddenAlgorithmic
        )
    }

    /// Points that are outside the task altogether carry no factor.
    pub fn is_outside(self) -> bool {
        matches!(self, PointState::Nonexistent | PointState::NotMakingSense)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("point has {found} coordinates, expected {expected}")]
    Arity { expected: usize, found: usize },
    #[error("axis extents must be non-zero and at most {MAX_AXES} axes")]
    BadAxes,
    #[error("point {point} lies outside the grid")]
    OutOfRange { point: PointId },
    #[error("point {point} is listed twice in the initial states")]
    DuplicateInitialState { point: PointId },
    #[error("initial state of {point} may not be {state}")]
    InvalidInitialState { point: PointId, state: PointState },
    #[error("no factor value for {point}")]
    MissingFactor { point: PointId },
    #[error("factor of {point} must be finite and non-negative, got {value}")]
    InvalidFactor { point: PointId, value: f64 },
    #[error("cannot mark {point}: state is {state}")]
    NotPotential { point: PointId, state: PointState },
    #[error("valency of {point} is not finite ({value})")]
    NonFiniteValency { point: PointId, value: f64 },
    #[error("rule `{rule}` tried to mark {point}; only the step loop marks")]
    RuleAssignedMarked { rule: &'static str, point: PointId },
    #[error("rule `{rule}` tried {point}: {from} -> {to}")]
    NonMonotonic {
        rule: &'static str,
        point: PointId,
        from: PointState,
        to: PointState,
    },
    #[error("auxiliary cell {cell} does not exist")]
    AuxOutOfRange { cell: usize },
    #[error("target count must be at least 1")]
    ZeroTarget,
    #[error("no single decision was synthesized")]
    NoDecision,
}

/// Row-major grid geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Grid {
    axes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    fn new(axes: &[usize]) -> Result<Self, EngineError> {
        if axes.is_empty() || axes.len() > MAX_AXES || axes.contains(&0) {
            return Err(EngineError::BadAxes);
        }
        let mut strides = alloc::vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1];
        }
        let len = axes.iter().product();
        Ok(Grid {
            axes: axes.to_vec(),
            strides,
            len,
        })
    }

    fn index(&self, p: &PointId) -> Result<usize, EngineError> {
        if p.arity() != self.axes.len() {
            return Err(EngineError::Arity {
                expected: self.axes.len(),
                found: p.arity(),
            });
        }
        let mut idx = 0;
        for ((&c, &extent), &stride) in p.coords().iter().zip(&self.axes).zip(&self.strides) {
            if c >= extent {
                return Err(EngineError::OutOfRange { point: *p });
            }
            idx += c * stride;
        }
        Ok(idx)
    }

    fn point(&self, mut idx: usize) -> PointId {
        let mut coords = [0; MAX_AXES];
        for (k, &stride) in self.strides.iter().enumerate() {
            coords[k] = idx / stride;
            idx %= stride;
        }
        PointId {
            coords,
            arity: self.axes.len() as u8,
        }
    }
}

/// Per-point scalar parameter (weight, length, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTable {
    values: Vec<Option<f64>>,
}

impl FactorTable {
    /// Builds a table by evaluating `f` on every point of the grid described by `axes`.
    pub fn from_fn(
        axes: &[usize],
        mut f: impl FnMut(&PointId) -> Option<f64>,
    ) -> Result<Self, EngineError> {
        let grid = Grid::new(axes)?;
        let values = (0..grid.len).map(|i| f(&grid.point(i))).collect();
        Ok(FactorTable { values })
    }

    /// A table with no values. Only valid for grids where every point is outside the task.
    pub fn empty() -> Self {
        FactorTable { values: Vec::new() }
    }

    fn get(&self, idx: usize) -> Option<f64> {
        self.values.get(idx).copied().flatten()
    }
}

/// One state change of a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reaction {
    pub point: PointId,
    pub from: PointState,
    pub to: PointState,
}

/// Read access to the environment plus a sink for state assignments, handed
/// to a [`ContactRule`] while it reacts.
pub struct RuleContext<'a> {
    grid: &'a Grid,
    states: &'a [PointState],
    aux: &'a mut [i64],
    marked_count: usize,
    actions: &'a mut Vec<(PointId, PointState)>,
}

impl RuleContext<'_> {
    /// State of `p`, or `None` if it is not on the grid.
    pub fn state(&self, p: &PointId) -> Option<PointState> {
        self.grid.index(p).ok().map(|i| self.states[i])
    }

    pub fn axes(&self) -> &[usize] {
        &self.grid.axes
    }

    pub fn marked_count(&self) -> usize {
        self.marked_count
    }

    pub fn aux(&self, cell: usize) -> Option<i64> {
        self.aux.get(cell).copied()
    }

    /// Overwrites an auxiliary cell. Rules should store values recomputed from
    /// the grid so that a repeated firing leaves the cell unchanged.
    pub fn set_aux(&mut self, cell: usize, value: i64) -> Result<(), EngineError> {
        let slot = self
            .aux
            .get_mut(cell)
            .ok_or(EngineError::AuxOutOfRange { cell })?;
        *slot = value;
        Ok(())
    }

    pub fn assign(&mut self, p: PointId, state: PointState) {
        self.actions.push((p, state));
    }

    pub fn forbid(&mut self, p: PointId) {
        self.assign(p, PointState::ForbiddenAlgorithmic);
    }
}

/// A contact dependence: when a state change matches the trigger, the rule
/// emits state assignments for other points.
pub trait ContactRule: Send + Sync {
    fn name(&self) -> &'static str;

    fn matches(&self, change: &Reaction) -> bool;

    fn react(&self, change: &Reaction, ctx: &mut RuleContext<'_>) -> Result<(), EngineError>;
}

/// The literal trigger/action pair: when `trigger` enters `on`, apply `actions`.
#[derive(Clone, Debug)]
pub struct StaticRule {
    pub name: &'static str,
    pub trigger: PointId,
    pub on: PointState,
    pub actions: Vec<(PointId, PointState)>,
}

impl ContactRule for StaticRule {
    fn name(&self) -> &'static str {
        self.name
    }

    fn matches(&self, change: &Reaction) -> bool {
        change.point == self.trigger && change.to == self.on
    }

    fn react(&self, _change: &Reaction, ctx: &mut RuleContext<'_>) -> Result<(), EngineError> {
        for &(p, s) in &self.actions {
            ctx.assign(p, s);
        }
        Ok(())
    }
}

/// Desirability of a Potential point becoming a single decision.
pub trait Valency {
    /// Called once per step before any point is scored.
    fn prepare(&mut self, _env: &Environment) {}

    fn score(&self, env: &Environment, point: &PointId) -> f64;
}

impl<F> Valency for F
where
    F: Fn(&Environment, &PointId) -> f64,
{
    fn score(&self, env: &Environment, point: &PointId) -> f64 {
        self(env, point)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step_index: usize,
    pub transition: PointId,
    /// Valency of the transition when it was chosen by the step loop; `None`
    /// when the point was applied directly.
    pub valency: Option<f64>,
    pub reactions: Vec<Reaction>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub steps: Vec<StepRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// The synthesized answer: the marked points in marking order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SummaryDecision {
    pub singles: Vec<PointId>,
    pub complete: bool,
}

/// Fraction of the required single decisions that were synthesized.
///
/// An empty summary has no defined completeness and yields
/// [`EngineError::NoDecision`].
pub fn completeness(summary: &SummaryDecision, target_count: usize) -> Result<f64, EngineError> {
    if target_count == 0 {
        return Err(EngineError::ZeroTarget);
    }
    if summary.singles.is_empty() {
        return Err(EngineError::NoDecision);
    }
    Ok(summary.singles.len() as f64 / target_count as f64)
}

/// A violated structural invariant, reported by [`Environment::check_invariants`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantViolation {
    #[error("potential registry disagrees with point states")]
    PotentialRegistry,
    #[error("counterpotential registry disagrees with point states")]
    CounterpotentialRegistry,
    #[error("step counter {counter} but {marked} marked points")]
    StepCounter { counter: usize, marked: usize },
    #[error("marking order lists {0} twice or lists an unmarked point")]
    MarkingOrder(PointId),
}

/// Per-state point counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StateCounts([usize; 6]);

impl StateCounts {
    pub fn get(&self, s: PointState) -> usize {
        self.0[s.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

#[derive(Clone)]
pub struct Environment {
    grid: Grid,
    states: Vec<PointState>,
    potential: BTreeSet<usize>,
    counterpotential: BTreeSet<usize>,
    factors: FactorTable,
    rules: Vec<Arc<dyn ContactRule>>,
    aux: Vec<i64>,
    marked: Vec<usize>,
    step_counter: usize,
}

impl fmt::Debug for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Environment")
            .field("axes", &self.grid.axes)
            .field("potential", &self.potential.len())
            .field("counterpotential", &self.counterpotential.len())
            .field(
                "rules",
                &self.rules.iter().map(|r| r.name()).collect::<Vec<_>>(),
            )
            .field("step_counter", &self.step_counter)
            .finish()
    }
}

impl Environment {
    /// Builds an environment. Points not listed in `initial_states` start
    /// Potential; listed points may only be user-forbidden or outside the task.
    pub fn new(
        axes: &[usize],
        initial_states: &[(PointId, PointState)],
        factors: FactorTable,
        rules: Vec<Box<dyn ContactRule>>,
    ) -> Result<Self, EngineError> {
        let grid = Grid::new(axes)?;
        let mut states = alloc::vec![PointState::Potential; grid.len];
        let mut seen = BTreeSet::new();
        for &(p, s) in initial_states {
            let idx = grid.index(&p)?;
            if !seen.insert(idx) {
                return Err(EngineError::DuplicateInitialState { point: p });
            }
            match s {
                PointState::ForbiddenUser
                | PointState::Nonexistent
                | PointState::NotMakingSense => states[idx] = s,
                _ => return Err(EngineError::InvalidInitialState { point: p, state: s }),
            }
        }
        for (idx, s) in states.iter().enumerate() {
            if s.is_outside() {
                continue;
            }
            let point = grid.point(idx);
            match factors.get(idx) {
                None => return Err(EngineError::MissingFactor { point }),
                Some(v) if !v.is_finite() || v < 0.0 => {
                    return Err(EngineError::InvalidFactor { point, value: v })
                }
                Some(_) => {}
            }
        }
        let potential = states
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == PointState::Potential)
            .map(|(i, _)| i)
            .collect();
        Ok(Environment {
            grid,
            states,
            potential,
            counterpotential: BTreeSet::new(),
            factors,
            rules: rules.into_iter().map(Arc::from).collect(),
            aux: Vec::new(),
            marked: Vec::new(),
            step_counter: 0,
        })
    }

    /// Attaches `cells` zeroed auxiliary cells that rules may use for bookkeeping.
    pub fn with_auxiliary(mut self, cells: usize) -> Self {
        self.aux = alloc::vec![0; cells];
        self
    }

    pub fn axes(&self) -> &[usize] {
        &self.grid.axes
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len
    }

    pub fn state(&self, p: &PointId) -> Result<PointState, EngineError> {
        self.grid.index(p).map(|i| self.states[i])
    }

    pub fn factor(&self, p: &PointId) -> Option<f64> {
        self.grid.index(p).ok().and_then(|i| self.factors.get(i))
    }

    pub fn aux(&self, cell: usize) -> Option<i64> {
        self.aux.get(cell).copied()
    }

    pub fn aux_cells(&self) -> &[i64] {
        &self.aux
    }

    pub fn step_counter(&self) -> usize {
        self.step_counter
    }

    pub fn rule_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.rules.iter().map(|r| r.name())
    }

    /// Potential points in lexicographic order.
    pub fn potential(&self) -> impl ExactSizeIterator<Item = PointId> + '_ {
        self.potential.iter().map(|&i| self.grid.point(i))
    }

    /// Algorithmically forbidden points in lexicographic order.
    pub fn counterpotential(&self) -> impl ExactSizeIterator<Item = PointId> + '_ {
        self.counterpotential.iter().map(|&i| self.grid.point(i))
    }

    /// Marked points in marking order.
    pub fn marked(&self) -> impl ExactSizeIterator<Item = PointId> + '_ {
        self.marked.iter().map(|&i| self.grid.point(i))
    }

    /// Every point with its state, in lexicographic order.
    pub fn points(&self) -> impl Iterator<Item = (PointId, PointState)> + '_ {
        self.states
            .iter()
            .enumerate()
            .map(|(i, &s)| (self.grid.point(i), s))
    }

    pub fn state_counts(&self) -> StateCounts {
        let mut counts = StateCounts::default();
        for s in &self.states {
            counts.0[s.index()] += 1;
        }
        counts
    }

    /// The Potential point of highest valency, with its score. Ties go to the
    /// lexicographically smallest point.
    pub fn select_transition<V: Valency + ?Sized>(
        &self,
        valency: &mut V,
    ) -> Result<Option<(PointId, f64)>, EngineError> {
        if self.potential.is_empty() {
            return Ok(None);
        }
        valency.prepare(self);
        let mut best: Option<(PointId, f64)> = None;
        for &idx in &self.potential {
            let point = self.grid.point(idx);
            let value = valency.score(self, &point);
            if !value.is_finite() {
                return Err(EngineError::NonFiniteValency { point, value });
            }
            match best {
                Some((_, v)) if value <= v => {}
                _ => best = Some((point, value)),
            }
        }
        Ok(best)
    }

    /// Marks `point` and lets the rules react until no rule produces a new
    /// state change.
    ///
    /// A fault (rule breaking monotonicity, marking a non-Potential point)
    /// leaves the environment in an unspecified state.
    pub fn apply_transition(&mut self, point: PointId) -> Result<StepRecord, EngineError> {
        let idx = self.grid.index(&point)?;
        let state = self.states[idx];
        if state != PointState::Potential {
            return Err(EngineError::NotPotential { point, state });
        }
        self.states[idx] = PointState::Marked;
        self.potential.remove(&idx);
        self.marked.push(idx);
        let step_index = self.step_counter;
        self.step_counter += 1;

        let mut reactions = Vec::new();
        let mut queue = VecDeque::new();
        queue.push_back(Reaction {
            point,
            from: PointState::Potential,
            to: PointState::Marked,
        });
        let mut actions = Vec::new();
        while let Some(change) = queue.pop_front() {
            for rule in &self.rules {
                if !rule.matches(&change) {
                    continue;
                }
                actions.clear();
                let mut ctx = RuleContext {
                    grid: &self.grid,
                    states: &self.states,
                    aux: &mut self.aux,
                    marked_count: self.marked.len(),
                    actions: &mut actions,
                };
                rule.react(&change, &mut ctx)?;
                for &(target, to) in &actions {
                    let t = self.grid.index(&target)?;
                    let from = self.states[t];
                    if to == PointState::Marked {
                        return Err(EngineError::RuleAssignedMarked {
                            rule: rule.name(),
                            point: target,
                        });
                    }
                    if from == to {
                        continue;
                    }
                    match (from, to) {
                        (PointState::Potential, PointState::ForbiddenAlgorithmic) => {
                            self.states[t] = to;
                            self.potential.remove(&t);
                            self.counterpotential.insert(t);
                            let r = Reaction {
                                point: target,
                                from,
                                to,
                            };
                            reactions.push(r);
                            queue.push_back(r);
                        }
                        // already out of play
                        (
                            PointState::ForbiddenUser
                            | PointState::Nonexistent
                            | PointState::NotMakingSense,
                            PointState::ForbiddenAlgorithmic,
                        ) => {}
                        _ => {
                            return Err(EngineError::NonMonotonic {
                                rule: rule.name(),
                                point: target,
                                from,
                                to,
                            })
                        }
                    }
                }
            }
        }
        Ok(StepRecord {
            step_index,
            transition: point,
            valency: None,
            reactions,
        })
    }

    /// Runs the step loop until `target_count` points are marked or nothing
    /// Potential is left.
    pub fn run_synthesis<V: Valency + ?Sized>(
        &mut self,
        valency: &mut V,
        target_count: usize,
    ) -> Result<(SummaryDecision, Trace), EngineError> {
        if target_count == 0 {
            return Err(EngineError::ZeroTarget);
        }
        let mut trace = Trace::default();
        while self.marked.len() < target_count {
            let Some((point, score)) = self.select_transition(valency)? else {
                break;
            };
            let mut record = self.apply_transition(point)?;
            record.valency = Some(score);
            trace.steps.push(record);
        }
        Ok((self.summary(target_count), trace))
    }

    pub fn summary(&self, target_count: usize) -> SummaryDecision {
        SummaryDecision {
            singles: self.marked().collect(),
            complete: self.marked.len() >= target_count,
        }
    }

    /// Re-applies the transitions of `trace` to this environment and checks
    /// that every step reproduces the recorded reactions.
    pub fn replay(&mut self, trace: &Trace) -> Result<(), ReplayError> {
        for (k, step) in trace.steps.iter().enumerate() {
            if step.step_index != k {
                return Err(ReplayError::StepIndex {
                    expected: k,
                    found: step.step_index,
                });
            }
            let record = self
                .apply_transition(step.transition)
                .map_err(|e| ReplayError::Engine { step: k, error: e })?;
            if record.reactions != step.reactions {
                return Err(ReplayError::Reactions { step: k });
            }
        }
        Ok(())
    }

    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        let mut marked = 0;
        for (i, s) in self.states.iter().enumerate() {
            if (*s == PointState::Potential) != self.potential.contains(&i) {
                return Err(InvariantViolation::PotentialRegistry);
            }
            if (*s == PointState::ForbiddenAlgorithmic) != self.counterpotential.contains(&i) {
                return Err(InvariantViolation::CounterpotentialRegistry);
            }
            if *s == PointState::Marked {
                marked += 1;
            }
        }
        if self.step_counter != marked || self.marked.len() != marked {
            return Err(InvariantViolation::StepCounter {
                counter: self.step_counter,
                marked,
            });
        }
        let mut seen = BTreeSet::new();
        for &i in &self.marked {
            if !seen.insert(i) || self.states[i] != PointState::Marked {
                return Err(InvariantViolation::MarkingOrder(self.grid.point(i)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("step {found} found where step {expected} was expected")]
    StepIndex { expected: usize, found: usize },
    #[error("step {step} failed to apply: {error}")]
    Engine { step: usize, error: EngineError },
    #[error("step {step} produced different reactions than recorded")]
    Reactions { step: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn uniform(axes: &[usize]) -> FactorTable {
        FactorTable::from_fn(axes, |_| Some(1.0)).unwrap()
    }

    fn forbid_rule(
        name: &'static str,
        trigger: PointId,
        on: PointState,
        target: PointId,
    ) -> Box<dyn ContactRule> {
        Box::new(StaticRule {
            name,
            trigger,
            on,
            actions: vec![(target, PointState::ForbiddenAlgorithmic)],
        })
    }

    #[test]
    fn default_construction_is_all_potential() {
        let env = Environment::new(&[2, 2], &[], uniform(&[2, 2]), vec![]).unwrap();
        assert_eq!(env.potential().len(), 4);
        assert_eq!(env.counterpotential().len(), 0);
        assert_eq!(env.step_counter(), 0);
        env.check_invariants().unwrap();
    }

    #[test]
    fn diagonal_not_making_sense() {
        let init: Vec<_> = (0..8)
            .map(|i| (PointId::pair(i, i), PointState::NotMakingSense))
            .collect();
        let factors =
            FactorTable::from_fn(&[8, 8], |p| (p.at(0) != p.at(1)).then_some(2.0)).unwrap();
        let env = Environment::new(&[8, 8], &init, factors, vec![]).unwrap();
        let counts = env.state_counts();
        assert_eq!(counts.get(PointState::Potential), 56);
        assert_eq!(counts.get(PointState::NotMakingSense), 8);
        assert_eq!(counts.total(), 64);
    }

    #[test]
    fn user_forbidden_shrinks_registry() {
        let env = Environment::new(
            &[3],
            &[(PointId::one(1), PointState::ForbiddenUser)],
            uniform(&[3]),
            vec![],
        )
        .unwrap();
        assert_eq!(env.potential().len(), 2);
    }

    #[test]
    fn construction_errors() {
        let oob = Environment::new(
            &[3],
            &[(PointId::one(3), PointState::ForbiddenUser)],
            uniform(&[3]),
            vec![],
        );
        assert!(matches!(oob, Err(EngineError::OutOfRange { .. })));

        let arity = Environment::new(
            &[3],
            &[(PointId::pair(0, 0), PointState::ForbiddenUser)],
            uniform(&[3]),
            vec![],
        );
        assert!(matches!(arity, Err(EngineError::Arity { .. })));

        let missing = FactorTable::from_fn(&[3], |p| (p.at(0) != 2).then_some(1.0)).unwrap();
        assert_eq!(
            Environment::new(&[3], &[], missing, vec![]).unwrap_err(),
            EngineError::MissingFactor {
                point: PointId::one(2)
            }
        );

        // an outside point needs no factor
        let missing = FactorTable::from_fn(&[3], |p| (p.at(0) != 2).then_some(1.0)).unwrap();
        Environment::new(
            &[3],
            &[(PointId::one(2), PointState::Nonexistent)],
            missing,
            vec![],
        )
        .unwrap();

        let negative = FactorTable::from_fn(&[2], |_| Some(-1.0)).unwrap();
        assert!(matches!(
            Environment::new(&[2], &[], negative, vec![]),
            Err(EngineError::InvalidFactor { .. })
        ));

        let marked = Environment::new(
            &[2],
            &[(PointId::one(0), PointState::Marked)],
            uniform(&[2]),
            vec![],
        );
        assert!(matches!(
            marked,
            Err(EngineError::InvalidInitialState { .. })
        ));
    }

    #[test]
    fn select_breaks_ties_lexicographically() {
        let env = Environment::new(&[3], &[], uniform(&[3]), vec![]).unwrap();
        let scores = [3.0, 5.0, 5.0];
        let mut val = |_: &Environment, p: &PointId| scores[p.at(0)];
        assert_eq!(
            env.select_transition(&mut val).unwrap(),
            Some((PointId::one(1), 5.0))
        );
    }

    #[test]
    fn select_on_empty_and_singleton() {
        let env = Environment::new(
            &[2],
            &[
                (PointId::one(0), PointState::ForbiddenUser),
                (PointId::one(1), PointState::ForbiddenUser),
            ],
            uniform(&[2]),
            vec![],
        )
        .unwrap();
        let mut val = |_: &Environment, _: &PointId| 1.0;
        assert_eq!(env.select_transition(&mut val).unwrap(), None);

        let env = Environment::new(&[1], &[], uniform(&[1]), vec![]).unwrap();
        let mut val = |_: &Environment, _: &PointId| -1e300;
        assert_eq!(
            env.select_transition(&mut val).unwrap().unwrap().0,
            PointId::one(0)
        );
    }

    #[test]
    fn non_finite_valency_is_a_fault() {
        let env = Environment::new(&[2], &[], uniform(&[2]), vec![]).unwrap();
        let mut val = |_: &Environment, p: &PointId| if p.at(0) == 1 { f64::NAN } else { 0.0 };
        assert!(matches!(
            env.select_transition(&mut val),
            Err(EngineError::NonFiniteValency { .. })
        ));
    }

    #[test]
    fn mark_without_rules() {
        let mut env = Environment::new(&[1], &[], uniform(&[1]), vec![]).unwrap();
        let rec = env.apply_transition(PointId::one(0)).unwrap();
        assert!(rec.reactions.is_empty());
        assert_eq!(env.step_counter(), 1);
        env.check_invariants().unwrap();
    }

    #[test]
    fn single_rule_forbids_row_mate() {
        let rule = forbid_rule(
            "mate",
            PointId::pair(0, 0),
            PointState::Marked,
            PointId::pair(0, 1),
        );
        let mut env = Environment::new(&[1, 2], &[], uniform(&[1, 2]), vec![rule]).unwrap();
        let rec = env.apply_transition(PointId::pair(0, 0)).unwrap();
        assert_eq!(
            rec.reactions,
            vec![Reaction {
                point: PointId::pair(0, 1),
                from: PointState::Potential,
                to: PointState::ForbiddenAlgorithmic
            }]
        );
        assert_eq!(
            env.counterpotential().collect::<Vec<_>>(),
            vec![PointId::pair(0, 1)]
        );
        env.check_invariants().unwrap();
    }

    #[test]
    fn cascade_reaches_fixpoint() {
        // Hand trace: marking (0) fires A, forbidding (1); that change fires B,
        // forbidding (2). Nothing reacts to (2), so the cascade stops.
        let a = forbid_rule("A", PointId::one(0), PointState::Marked, PointId::one(1));
        let b = forbid_rule(
            "B",
            PointId::one(1),
            PointState::ForbiddenAlgorithmic,
            PointId::one(2),
        );
        // B is declared first; it only fires once A's change is dequeued.
        let mut env = Environment::new(&[4], &[], uniform(&[4]), vec![b, a]).unwrap();
        let rec = env.apply_transition(PointId::one(0)).unwrap();
        let forbidden = |i| Reaction {
            point: PointId::one(i),
            from: PointState::Potential,
            to: PointState::ForbiddenAlgorithmic,
        };
        assert_eq!(rec.reactions, vec![forbidden(1), forbidden(2)]);
        assert_eq!(env.potential().collect::<Vec<_>>(), vec![PointId::one(3)]);
        env.check_invariants().unwrap();
    }

    #[test]
    fn refiring_is_a_no_op() {
        let a = forbid_rule("A", PointId::one(0), PointState::Marked, PointId::one(2));
        let b = forbid_rule("B", PointId::one(1), PointState::Marked, PointId::one(2));
        let mut env = Environment::new(&[3], &[], uniform(&[3]), vec![a, b]).unwrap();
        assert_eq!(
            env.apply_transition(PointId::one(0))
                .unwrap()
                .reactions
                .len(),
            1
        );
        assert!(env
            .apply_transition(PointId::one(1))
            .unwrap()
            .reactions
            .is_empty());
    }

    #[test]
    fn monotonicity_guard() {
        let mut env = Environment::new(&[2], &[], uniform(&[2]), vec![]).unwrap();
        env.apply_transition(PointId::one(0)).unwrap();
        assert!(matches!(
            env.apply_transition(PointId::one(0)),
            Err(EngineError::NotPotential { .. })
        ));

        let revive = Box::new(StaticRule {
            name: "revive",
            trigger: PointId::one(1),
            on: PointState::Marked,
            actions: vec![(PointId::one(0), PointState::Potential)],
        });
        let mut env = Environment::new(&[2], &[], uniform(&[2]), vec![revive]).unwrap();
        env.apply_transition(PointId::one(0)).unwrap();
        assert!(matches!(
            env.apply_transition(PointId::one(1)),
            Err(EngineError::NonMonotonic { .. })
        ));

        let marker = Box::new(StaticRule {
            name: "marker",
            trigger: PointId::one(0),
            on: PointState::Marked,
            actions: vec![(PointId::one(1), PointState::Marked)],
        });
        let mut env = Environment::new(&[2], &[], uniform(&[2]), vec![marker]).unwrap();
        assert!(matches!(
            env.apply_transition(PointId::one(0)),
            Err(EngineError::RuleAssignedMarked { .. })
        ));
    }

    #[test]
    fn run_to_completion_and_stall() {
        let mut env = Environment::new(&[4], &[], uniform(&[4]), vec![]).unwrap();
        let mut val = |_: &Environment, p: &PointId| p.at(0) as f64;
        let (summary, trace) = env.run_synthesis(&mut val, 4).unwrap();
        assert!(summary.complete);
        assert_eq!(trace.len(), 4);
        assert_eq!(summary.singles[0], PointId::one(3));

        // marking the second point forbids both others
        let stall = Box::new(StaticRule {
            name: "stall",
            trigger: PointId::one(2),
            on: PointState::Marked,
            actions: vec![
                (PointId::one(0), PointState::ForbiddenAlgorithmic),
                (PointId::one(1), PointState::ForbiddenAlgorithmic),
            ],
        });
        let mut env = Environment::new(&[4], &[], uniform(&[4]), vec![stall]).unwrap();
        let (summary, trace) = env.run_synthesis(&mut val, 4).unwrap();
        assert!(!summary.complete);
        assert_eq!(summary.singles, vec![PointId::one(3), PointId::one(2)]);
        assert_eq!(trace.len(), 2);
        assert_eq!(completeness(&summary, 4).unwrap(), 0.5);
        env.check_invariants().unwrap();
    }

    #[test]
    fn completeness_values() {
        let s = |k| SummaryDecision {
            singles: (0..k).map(PointId::one).collect(),
            complete: false,
        };
        assert_eq!(completeness(&s(8), 8).unwrap(), 1.0);
        assert_eq!(completeness(&s(6), 8).unwrap(), 0.75);
        assert_eq!(completeness(&s(1), 4).unwrap(), 0.25);
        assert_eq!(completeness(&s(0), 4), Err(EngineError::NoDecision));
        assert_eq!(completeness(&s(1), 0), Err(EngineError::ZeroTarget));
    }

    #[test]
    fn replay_detects_divergence() {
        let build = || {
            let rule = forbid_rule("mate", PointId::one(0), PointState::Marked, PointId::one(1));
            Environment::new(&[3], &[], uniform(&[3]), vec![rule]).unwrap()
        };
        let mut env = build();
        let mut val = |_: &Environment, p: &PointId| -(p.at(0) as f64);
        let (_, trace) = env.run_synthesis(&mut val, 3).unwrap();
        build().replay(&trace).unwrap();

        let mut tampered = trace.clone();
        tampered.steps[0].reactions.clear();
        assert_eq!(
            build().replay(&tampered),
            Err(ReplayError::Reactions { step: 0 })
        );
    }

    #[test]
    fn grid_round_trip() {
        let grid = Grid::new(&[3, 4, 2]).unwrap();
        for i in 0..grid.len {
            assert_eq!(grid.index(&grid.point(i)).unwrap(), i);
        }
        let mut points: Vec<_> = (0..grid.len).map(|i| grid.point(i)).collect();
        let sorted = points.clone();
        points.sort();
        assert_eq!(points, sorted);
    }
}
