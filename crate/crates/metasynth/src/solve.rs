//! Runs synthesis on a loaded instance and builds the result document.

use metasynth_core::engine::{Environment, Trace};
use metasynth_core::oracles::{exact_partition, exact_tsp, OracleError};
use metasynth_core::partition::{self, LptValency, Side};
use metasynth_core::tsp::{self, TourOutcome, TspValency, ValencyMode};
use serde::Serialize;

use crate::format::Instance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub valency: ValencyMode,
    pub polish: bool,
    pub oracle: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            valency: ValencyMode::Greedy,
            polish: false,
            oracle: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionDoc {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub complete: bool,
    pub completeness: f64,
    pub steps: usize,
    pub polish: bool,
    pub scale: u64,
    pub heap1: Vec<usize>,
    pub heap2: Vec<usize>,
    pub sums: [u64; 2],
    pub greedy_discrepancy: u64,
    pub discrepancy: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TspDoc {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub valency: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub complete: bool,
    /// `None` when not a single edge was marked.
    pub completeness: Option<f64>,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tour: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum SolveDoc {
    Partition(PartitionDoc),
    Tsp(TspDoc),
}

pub struct SolveOutcome {
    pub doc: SolveDoc,
    pub complete: bool,
    pub trace: Trace,
    /// Environment state after the last step.
    pub env: Environment,
}

/// Untouched environment for `instance`, as used at the start of a solve.
pub fn fresh_environment(instance: &Instance) -> Environment {
    match instance {
        Instance::Partition { inst, .. } => partition::build_partition_environment(inst),
        Instance::Tsp(inst) => tsp::build_tsp_environment(inst),
    }
}

fn oracle_status(e: &OracleError) -> String {
    match e {
        OracleError::TooLarge { .. } => "out-of-bounds".to_string(),
        OracleError::Infeasible => "infeasible".to_string(),
    }
}

pub fn solve(instance: &Instance, opts: &SolveOptions) -> anyhow::Result<SolveOutcome> {
    let mut env = fresh_environment(instance);
    match instance {
        Instance::Partition { inst, scale } => {
            let (summary, trace) =
                env.run_synthesis(&mut LptValency::new(), partition::target_count(inst))?;
            let greedy = partition::assignment_from_summary(inst, &summary)?;
            let assignment = if opts.polish {
                partition::polish(inst, &greedy)
            } else {
                greedy.clone()
            };
            let metrics = partition::partition_metrics(inst, &assignment);
            let (mut oracle, mut optimum, mut efficiency) = (None, None, None);
            if opts.oracle {
                match exact_partition(inst) {
                    Ok(r) => {
                        oracle = Some("optimal".to_string());
                        optimum = Some(r.optimum);
                        efficiency = Some(metrics.efficiency);
                    }
                    Err(e) => oracle = Some(oracle_status(&e)),
                }
            }
            let doc = PartitionDoc {
                kind: "partition",
                complete: summary.complete,
                completeness: metasynth_core::completeness(&summary, inst.len())?,
                steps: trace.len(),
                polish: opts.polish,
                scale: *scale,
                heap1: assignment.items_on(Side::Heap1).collect(),
                heap2: assignment.items_on(Side::Heap2).collect(),
                sums: assignment.sums(),
                greedy_discrepancy: greedy.discrepancy(),
                discrepancy: metrics.discrepancy,
                oracle,
                optimum,
                efficiency,
            };
            Ok(SolveOutcome {
                complete: summary.complete,
                doc: SolveDoc::Partition(doc),
                trace,
                env,
            })
        }
        Instance::Tsp(inst) => {
            let (summary, trace) =
                env.run_synthesis(&mut TspValency::new(opts.valency), tsp::target_count(inst))?;
            let outcome = tsp::extract_tour(inst, &summary)?;
            let (valency, lambda) = match opts.valency {
                ValencyMode::Greedy => ("greedy", None),
                ValencyMode::Regret { lambda } => ("regret", Some(lambda)),
            };
            let mut doc = TspDoc {
                kind: "tsp",
                valency,
                lambda,
                complete: summary.complete,
                completeness: metasynth_core::completeness(&summary, inst.n()).ok(),
                steps: trace.len(),
                tour: None,
                length: None,
                edges: None,
                oracle: None,
                optimum: None,
                efficiency: None,
            };
            match &outcome {
                TourOutcome::Complete(t) => {
                    doc.tour = Some(t.order().to_vec());
                    doc.length = Some(t.length());
                }
                TourOutcome::Incomplete { edges, .. } => {
                    doc.edges = Some(edges.iter().map(|&(a, b)| [a, b]).collect());
                }
            }
            if opts.oracle {
                match exact_tsp(inst) {
                    Ok(r) => {
                        doc.oracle = Some("optimal".to_string());
                        doc.optimum = Some(r.optimum);
                        if let Some(t) = outcome.tour() {
                            // an all-zero instance has no meaningful ratio
                            if r.optimum > 0.0 {
                                doc.efficiency = Some(tsp::tsp_metrics(t, r.optimum)?.efficiency);
                            }
                        }
                    }
                    Err(e) => doc.oracle = Some(oracle_status(&e)),
                }
            }
            Ok(SolveOutcome {
                complete: summary.complete,
                doc: SolveDoc::Tsp(doc),
                trace,
                env,
            })
        }
    }
}
