//! Seeded instance generation and head-to-head evaluation.
//!
//! Every instance comes from its own ChaCha stream keyed by
//! `(seed, task, n, instance_id)`, so instances can be generated and solved in
//! any order (or in parallel) without changing the report.

use std::io::Write;
use std::time::Instant;

use metasynth_core::engine::completeness;
use metasynth_core::oracles::{
    baseline_partition_kk, baseline_tsp, exact_partition, exact_tsp, MAX_PARTITION_EXACT,
    MAX_TSP_EXACT,
};
use metasynth_core::partition::{self, Assignment, PartitionInstance};
use metasynth_core::tsp::{self, TspInstance, ValencyMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::euclidean_matrix;

pub const MAX_WEIGHT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Partition,
    Tsp,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Partition => "partition",
            Task::Tsp => "tsp",
        }
    }

    fn min_size(self) -> usize {
        match self {
            Task::Partition => 1,
            Task::Tsp => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratedInstance {
    Partition(PartitionInstance),
    Tsp(TspInstance),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("{task} instances need n >= {min}, got {n}")]
    SizeTooSmall {
        task: &'static str,
        n: usize,
        min: usize,
    },
    #[error("instances_per_size must be at least 1")]
    NoInstances,
    #[error("no sizes given")]
    NoSizes,
}

fn stream_key(task: Task, n: usize, instance_id: u32) -> u64 {
    let tag = match task {
        Task::Partition => 0u64,
        Task::Tsp => 1u64,
    };
    tag << 63 | (n as u64 & 0x7fff_ffff) << 32 | instance_id as u64
}

/// Deterministic instance for `(seed, task, n, instance_id)`: partition
/// weights uniform in `[1, 10^6]`, TSP points uniform in the unit square.
pub fn generate_instance(
    task: Task,
    n: usize,
    seed: u64,
    instance_id: u32,
) -> Result<GeneratedInstance, BenchError> {
    if n < task.min_size() {
        return Err(BenchError::SizeTooSmall {
            task: task.name(),
            n,
            min: task.min_size(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_key(task, n, instance_id));
    Ok(match task {
        Task::Partition => {
            let weights = (0..n).map(|_| rng.random_range(1..=MAX_WEIGHT)).collect();
            GeneratedInstance::Partition(PartitionInstance::new(weights).expect("weights in range"))
        }
        Task::Tsp => {
            let points: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            GeneratedInstance::Tsp(
                TspInstance::new(&euclidean_matrix(&points), &[]).expect("euclidean is symmetric"),
            )
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub task: Task,
    pub sizes: Vec<usize>,
    pub instances_per_size: u32,
    pub seed: u64,
    pub valency: ValencyMode,
    pub polish: bool,
}

impl BenchConfig {
    fn validate(&self) -> Result<(), BenchError> {
        if self.sizes.is_empty() {
            return Err(BenchError::NoSizes);
        }
        if self.instances_per_size == 0 {
            return Err(BenchError::NoInstances);
        }
        for &n in &self.sizes {
            if n < self.task.min_size() {
                return Err(BenchError::SizeTooSmall {
                    task: self.task.name(),
                    n,
                    min: self.task.min_size(),
                });
            }
        }
        Ok(())
    }

    fn oracle_in_bounds(&self, n: usize) -> bool {
        match self.task {
            Task::Partition => n <= MAX_PARTITION_EXACT,
            Task::Tsp => n <= MAX_TSP_EXACT,
        }
    }
}

/// One method on one instance.
///
/// `value` is the discrepancy (partition) or tour length (TSP) and is absent
/// when the method produced no complete answer. `efficiency` is present iff
/// the exact oracle ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub task: Task,
    pub n: usize,
    pub instance_id: u32,
    pub method: String,
    pub value: Option<f64>,
    pub completeness: Option<f64>,
    pub efficiency: Option<f64>,
    pub steps: Option<usize>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: String,
    /// `None` aggregates over every size.
    pub n: Option<usize>,
    pub rows: usize,
    pub mean_efficiency: Option<f64>,
    pub min_efficiency: Option<f64>,
    pub completeness_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub aggregates: Vec<Aggregate>,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn synthesis_name(cfg: &BenchConfig) -> String {
    match (cfg.task, cfg.valency) {
        (Task::Partition, _) if cfg.polish => "synthesis+polish".to_string(),
        (Task::Partition, _) => "synthesis".to_string(),
        (Task::Tsp, ValencyMode::Greedy) => "synthesis-greedy".to_string(),
        (Task::Tsp, ValencyMode::Regret { .. }) => "synthesis-regret".to_string(),
    }
}

fn evaluate(cfg: &BenchConfig, n: usize, id: u32) -> Vec<BenchRow> {
    let instance = generate_instance(cfg.task, n, cfg.seed, id).expect("config validated");
    let row = |method: String, value, completeness, efficiency, steps, wall_time| BenchRow {
        task: cfg.task,
        n,
        instance_id: id,
        method,
        value,
        completeness,
        efficiency,
        steps,
        wall_time,
    };
    let mut rows = Vec::new();
    match instance {
        GeneratedInstance::Partition(inst) => {
            let (optimum, t_opt) = timed(|| {
                cfg.oracle_in_bounds(n)
                    .then(|| exact_partition(&inst).ok())
                    .flatten()
            });
            let eff = |a: &Assignment| {
                optimum
                    .as_ref()
                    .map(|_| partition::partition_metrics(&inst, a).efficiency)
            };
            let (solve, t) = timed(|| {
                let s = partition::synthesize(&inst).expect("partition synthesis never faults");
                let a = if cfg.polish {
                    partition::polish(&inst, &s.assignment)
                } else {
                    s.assignment.clone()
                };
                (s, a)
            });
            let d = solve.1.discrepancy();
            rows.push(row(
                synthesis_name(cfg),
                Some(d as f64),
                completeness(&solve.0.summary, n).ok(),
                eff(&solve.1),
                Some(solve.0.trace.len()),
                t,
            ));
            let (kk, t) = timed(|| baseline_partition_kk(&inst));
            let d = kk.discrepancy();
            rows.push(row(
                "kk".into(),
                Some(d as f64),
                Some(1.0),
                eff(&kk),
                None,
                t,
            ));
            if let Some(o) = &optimum {
                rows.push(row(
                    "oracle".into(),
                    Some(o.optimum as f64),
                    Some(1.0),
                    eff(&o.witness),
                    None,
                    t_opt,
                ));
            }
        }
        GeneratedInstance::Tsp(inst) => {
            let (optimum, t_opt) = timed(|| {
                cfg.oracle_in_bounds(n)
                    .then(|| exact_tsp(&inst).ok())
                    .flatten()
            });
            let eff = |len: Option<f64>| match (&optimum, len) {
                (Some(o), Some(l)) if l > 0.0 => Some(o.optimum / l),
                _ => None,
            };
            let (solve, t) =
                timed(|| tsp::synthesize(&inst, cfg.valency).expect("tsp synthesis never faults"));
            let len = solve.outcome.tour().map(|t| t.length());
            rows.push(row(
                synthesis_name(cfg),
                len,
                completeness(&solve.summary, n).ok(),
                eff(len),
                Some(solve.trace.len()),
                t,
            ));
            for (name, improve) in [("nn", false), ("nn+2opt", true)] {
                let (tour, t) = timed(|| baseline_tsp(&inst, improve).ok());
                let len = tour.map(|t| t.length());
                let c = if len.is_some() { 1.0 } else { 0.0 };
                rows.push(row(name.into(), len, Some(c), eff(len), None, t));
            }
            if let Some(o) = &optimum {
                let len = Some(o.optimum);
                rows.push(row("oracle".into(), len, Some(1.0), eff(len), None, t_opt));
            }
        }
    }
    rows
}

pub fn aggregate(rows: &[BenchRow]) -> Vec<Aggregate> {
    let mut methods: Vec<String> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
        if !sizes.contains(&r.n) {
            sizes.push(r.n);
        }
    }
    let summarize = |method: &str, n: Option<usize>| {
        let sel: Vec<&BenchRow> = rows
            .iter()
            .filter(|r| r.method == method && n.is_none_or(|n| r.n == n))
            .collect();
        let effs: Vec<f64> = sel.iter().filter_map(|r| r.efficiency).collect();
        if sel.is_empty() {
            return None;
        }
        let complete = sel.iter().filter(|r| r.completeness == Some(1.0)).count();
        Some(Aggregate {
            method: method.to_string(),
            n,
            rows: sel.len(),
            mean_efficiency: (!effs.is_empty())
                .then(|| effs.iter().sum::<f64>() / effs.len() as f64),
            min_efficiency: effs.iter().copied().reduce(f64::min),
            completeness_rate: complete as f64 / sel.len() as f64,
        })
    };
    let mut out = Vec::new();
    for m in &methods {
        out.extend(sizes.iter().filter_map(|&n| summarize(m, Some(n))));
        out.extend(summarize(m, None));
    }
    out
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    let keys: Vec<(usize, u32)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| (0..cfg.instances_per_size).map(move |id| (n, id)))
        .collect();
    // par_iter().collect() keeps input order, so rows come out sorted by
    // (size as listed, instance id, method) regardless of scheduling
    let rows: Vec<BenchRow> = keys
        .par_iter()
        .map(|&(n, id)| evaluate(cfg, n, id))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let aggregates = aggregate(&rows);
    Ok(BenchReport { rows, aggregates })
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(mut out: W, rows: &[BenchRow]) -> std::io::Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<BenchRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn read_jsonl(text: &str) -> serde_json::Result<Vec<BenchRow>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Plain-text aggregate table.
pub fn format_aggregates(aggs: &[Aggregate]) -> String {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
    let mut s = format!(
        "{:<18} {:>5} {:>6} {:>10} {:>10} {:>9}\n",
        "method", "n", "rows", "mean_eff", "min_eff", "complete"
    );
    for a in aggs {
        s.push_str(&format!(
            "{:<18} {:>5} {:>6} {:>10} {:>10} {:>9.4}\n",
            a.method,
            a.n.map_or("all".to_string(), |n| n.to_string()),
            a.rows,
            fmt(a.mean_efficiency),
            fmt(a.min_efficiency),
            a.completeness_rate
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(task: Task, sizes: Vec<usize>, count: u32) -> BenchConfig {
        BenchConfig {
            task,
            sizes,
            instances_per_size: count,
            seed: 7,
            valency: ValencyMode::Greedy,
            polish: true,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_instance(Task::Partition, 10, 42, 3).unwrap();
        assert_eq!(a, generate_instance(Task::Partition, 10, 42, 3).unwrap());
        let b = generate_instance(Task::Tsp, 10, 42, 3).unwrap();
        assert_eq!(b, generate_instance(Task::Tsp, 10, 42, 3).unwrap());
    }

    #[test]
    fn instance_ids_separate_streams() {
        let tuples = [
            (Task::Partition, 8, 1u64),
            (Task::Tsp, 6, 2),
            (Task::Partition, 20, 99),
        ];
        for (task, n, seed) in tuples {
            let a = generate_instance(task, n, seed, 0).unwrap();
            let b = generate_instance(task, n, seed, 1).unwrap();
            assert_ne!(a, b);
        }
        assert_ne!(
            generate_instance(Task::Partition, 8, 1, 0).unwrap(),
            generate_instance(Task::Partition, 8, 2, 0).unwrap()
        );
    }

    #[test]
    fn generated_values_in_range() {
        let GeneratedInstance::Partition(p) = generate_instance(Task::Partition, 1, 5, 0).unwrap()
        else {
            panic!()
        };
        assert_eq!(p.len(), 1);
        assert!((1..=MAX_WEIGHT).contains(&p.weights()[0]));
        let GeneratedInstance::Tsp(t) = generate_instance(Task::Tsp, 12, 5, 0).unwrap() else {
            panic!()
        };
        for i in 0..12 {
            for j in 0..12 {
                assert!(t.dist(i, j) <= 2f64.sqrt() + 1e-6);
            }
        }
        assert!(generate_instance(Task::Tsp, 2, 5, 0).is_err());
    }

    #[test]
    fn partition_row_layout() {
        let report = run_benchmark(&cfg(Task::Partition, vec![10], 5)).unwrap();
        assert_eq!(report.rows.len(), 15);
        let methods: Vec<&str> = report.rows[..3].iter().map(|r| r.method.as_str()).collect();
        assert_eq!(methods, ["synthesis+polish", "kk", "oracle"]);
        for r in &report.rows {
            let e = r.efficiency.unwrap();
            assert!(e > 0.0 && e <= 1.0);
        }
    }

    #[test]
    fn tsp_beyond_oracle_bound_has_no_efficiency() {
        let report = run_benchmark(&cfg(Task::Tsp, vec![20], 2)).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert!(report.rows.iter().all(|r| r.efficiency.is_none()));
        assert!(report.rows.iter().all(|r| r.completeness == Some(1.0)));
    }

    #[test]
    fn csv_round_trip() {
        let report = run_benchmark(&cfg(Task::Tsp, vec![6, 16], 2)).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &report.rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "task,n,instance_id,method,value,completeness,efficiency,steps,wall_time\n"
        ));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), report.rows);
    }

    #[test]
    fn aggregates_cover_each_method() {
        let report = run_benchmark(&cfg(Task::Tsp, vec![6, 7], 3)).unwrap();
        let all: Vec<_> = report.aggregates.iter().filter(|a| a.n.is_none()).collect();
        assert_eq!(all.len(), 4);
        let oracle = all.iter().find(|a| a.method == "oracle").unwrap();
        assert_eq!(oracle.mean_efficiency, Some(1.0));
        assert_eq!(oracle.rows, 6);
        assert!(all.iter().all(|a| a.completeness_rate == 1.0));
    }

    #[test]
    fn bad_configs() {
        assert_eq!(
            run_benchmark(&cfg(Task::Tsp, vec![2], 1)).unwrap_err(),
            BenchError::SizeTooSmall {
                task: "tsp",
                n: 2,
                min: 3
            }
        );
        assert_eq!(
            run_benchmark(&cfg(Task::Tsp, vec![], 1)).unwrap_err(),
            BenchError::NoSizes
        );
        assert_eq!(
            run_benchmark(&cfg(Task::Tsp, vec![5], 0)).unwrap_err(),
            BenchError::NoInstances
        );
    }
}
