//! Constructive answer synthesis for combinatorial tasks.
//!
//! An [`Environment`](engine::Environment) is a grid of points (candidate
//! fragments of an answer). Each step marks the Potential point of highest
//! valency; contact rules then react by forbidding points that can no longer
//! take part in the answer. The loop runs until the answer is complete or no
//! Potential point is left.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, benchmarks and
//! the command-line front end live in the `metasynth` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod engine;
pub mod oracles;
pub mod partition;
pub mod tsp;

pub use engine::{
    completeness, ContactRule, EngineError, Environment, FactorTable, PointId, PointState,
    Reaction, RuleContext, StepRecord, SummaryDecision, Trace, Valency,
};
