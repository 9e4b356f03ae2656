use metasynth::bench::{
    generate_instance, run_benchmark, write_csv, BenchConfig, BenchRow, GeneratedInstance, Task,
};
use metasynth_core::tsp::ValencyMode;

fn partition_weights(n: usize, seed: u64, id: u32) -> Vec<u64> {
    match generate_instance(Task::Partition, n, seed, id).unwrap() {
        GeneratedInstance::Partition(p) => p.weights().to_vec(),
        GeneratedInstance::Tsp(_) => unreachable!(),
    }
}

#[test]
fn generator_golden_values() {
    assert_eq!(partition_weights(3, 42, 0), [491798, 698977, 999030]);
    assert_eq!(partition_weights(3, 42, 1), [545599, 353203, 965689]);
    assert_eq!(
        partition_weights(5, 7, 2),
        [816027, 995104, 648737, 907490, 697496]
    );
    let GeneratedInstance::Tsp(t) = generate_instance(Task::Tsp, 4, 42, 0).unwrap() else {
        unreachable!()
    };
    let expected = [
        [0.0, 0.888335, 0.346464, 0.992896],
        [0.888335, 0.0, 0.572942, 0.886913],
        [0.346464, 0.572942, 0.0, 0.744058],
        [0.992896, 0.886913, 0.744058, 0.0],
    ];
    for (i, row) in expected.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            assert_eq!(t.dist(i, j), d);
        }
    }
}

fn masked_csv(rows: &[BenchRow]) -> String {
    let masked: Vec<BenchRow> = rows
        .iter()
        .cloned()
        .map(|mut r| {
            r.wall_time = 0.0;
            r
        })
        .collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &masked).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn report_is_deterministic() {
    let cfg = BenchConfig {
        task: Task::Tsp,
        sizes: vec![8, 5, 12],
        instances_per_size: 4,
        seed: 11,
        valency: ValencyMode::Regret { lambda: 0.3 },
        polish: false,
    };
    let a = run_benchmark(&cfg).unwrap();
    let b = run_benchmark(&cfg).unwrap();
    assert_eq!(masked_csv(&a.rows), masked_csv(&b.rows));
    let keys: Vec<(usize, u32)> = a.rows.iter().map(|r| (r.n, r.instance_id)).collect();
    let mut expected = Vec::new();
    for n in [8, 5, 12] {
        for id in 0..4 {
            expected.extend([(n, id); 4]);
        }
    }
    assert_eq!(keys, expected);
}

#[test]
fn complete_synthesis_rows_match_the_witness() {
    let cfg = BenchConfig {
        task: Task::Partition,
        sizes: vec![7, 12],
        instances_per_size: 5,
        seed: 3,
        valency: ValencyMode::Greedy,
        polish: true,
    };
    for r in run_benchmark(&cfg).unwrap().rows {
        let GeneratedInstance::Partition(p) =
            generate_instance(Task::Partition, r.n, 3, r.instance_id).unwrap()
        else {
            unreachable!()
        };
        let eff = r.efficiency.unwrap();
        let d = r.value.unwrap();
        assert_eq!(eff, 1.0 - d / p.total() as f64);
        assert_eq!(d % 2.0, (p.total() % 2) as f64);
    }
}

#[test]
fn tsp_completeness_rate_is_one() {
    let cfg = BenchConfig {
        task: Task::Tsp,
        sizes: vec![3, 9, 20],
        instances_per_size: 5,
        seed: 99,
        valency: ValencyMode::Greedy,
        polish: false,
    };
    let report = run_benchmark(&cfg).unwrap();
    for a in &report.aggregates {
        assert_eq!(a.completeness_rate, 1.0, "{}", a.method);
    }
    for r in report.rows.iter().filter(|r| r.n == 20) {
        assert!(r.efficiency.is_none());
    }
    for r in report.rows.iter().filter(|r| r.n <= 9) {
        let e = r.efficiency.unwrap();
        assert!(e > 0.0 && e <= 1.0);
    }
}
