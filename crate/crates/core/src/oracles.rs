//! Exact solvers and classical baselines.
//!
//! The exact solvers certify the optimum that efficiency is measured against;
//! the baselines (largest differencing for partition, nearest neighbour with
//! optional 2-opt for TSP) give a comparison point for synthesis.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::partition::{Assignment, PartitionInstance, Side};
use crate::tsp::{Tour, TspError, TspInstance};

/// Largest instance for partition enumeration.
pub const MAX_PARTITION_ENUMERATION: usize = 24;
/// Largest instance for any exact partition method.
pub const MAX_PARTITION_EXACT: usize = 32;
/// Largest instance for Held-Karp.
pub const MAX_TSP_EXACT: usize = 15;
/// Largest instance for permutation enumeration.
pub const MAX_TSP_ENUMERATION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Enumeration,
    DynamicProgramming,
    MeetInMiddle,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("instance of size {n} exceeds the {method:?} bound of {max}")]
    TooLarge {
        n: usize,
        max: usize,
        method: Method,
    },
    #[error("no Hamiltonian cycle avoids the forbidden edges")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOptimum {
    pub optimum: u64,
    pub witness: Assignment,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TspOptimum {
    pub optimum: f64,
    pub witness: Tour,
    pub method: Method,
}

/// Minimum discrepancy over all bipartitions: enumeration up to
/// [`MAX_PARTITION_ENUMERATION`] items, meet-in-the-middle above.
pub fn exact_partition(inst: &PartitionInstance) -> Result<PartitionOptimum, OracleError> {
    if inst.len() <= MAX_PARTITION_ENUMERATION {
        exact_partition_with(inst, Method::Enumeration)
    } else {
        exact_partition_with(inst, Method::MeetInMiddle)
    }
}

pub fn exact_partition_with(
    inst: &PartitionInstance,
    method: Method,
) -> Result<PartitionOptimum, OracleError> {
    let n = inst.len();
    let max = match method {
        Method::Enumeration => MAX_PARTITION_ENUMERATION,
        _ => MAX_PARTITION_EXACT,
    };
    if n > max {
        return Err(OracleError::TooLarge { n, max, method });
    }
    let mask = match method {
        Method::Enumeration => enumerate_partition(inst.weights()),
        _ => meet_in_middle(inst.weights()),
    };
    let sides = (0..n)
        .map(|i| {
            if mask >> i & 1 == 1 {
                Side::Heap1
            } else {
                Side::Heap2
            }
        })
        .collect();
    let witness = Assignment::new(inst, sides).expect("one side per item");
    Ok(PartitionOptimum {
        optimum: witness.discrepancy(),
        witness,
        method: match method {
            Method::Enumeration => Method::Enumeration,
            _ => Method::MeetInMiddle,
        },
    })
}

/// Walks all subsets that leave the last item in heap 2, in Gray-code order.
/// Returns the heap-1 bitmask of the first best subset.
fn enumerate_partition(w: &[u64]) -> u64 {
    let total: u64 = w.iter().sum();
    let free = w.len() - 1;
    let mut mask: u64 = 0;
    let mut sum: u64 = 0;
    let mut best = (total, 0u64);
    for k in 1u64..(1u64 << free) {
        let bit = k.trailing_zeros() as usize;
        mask ^= 1 << bit;
        if mask >> bit & 1 == 1 {
            sum += w[bit];
        } else {
            sum -= w[bit];
        }
        let d = (2 * sum).abs_diff(total);
        if d < best.0 {
            best = (d, mask);
            if d <= 1 {
                break;
            }
        }
    }
    best.1
}

fn subset_sums(w: &[u64]) -> Vec<(u64, u64)> {
    let mut sums = Vec::with_capacity(1 << w.len());
    sums.push((0u64, 0u64));
    for (i, &x) in w.iter().enumerate() {
        for k in 0..sums.len() {
            let (s, m) = sums[k];
            sums.push((s + x, m | 1 << i));
        }
    }
    sums
}

fn meet_in_middle(w: &[u64]) -> u64 {
    let total: u64 = w.iter().sum();
    let half = w.len() / 2;
    let left = subset_sums(&w[..half]);
    let mut right = subset_sums(&w[half..]);
    right.sort_unstable();
    let mut best = (u64::MAX, 0u64);
    for &(a, ma) in &left {
        // want a + b as close to total / 2 as possible
        let want = (total / 2).saturating_sub(a);
        let at = right.partition_point(|&(b, _)| b < want);
        for k in [at.wrapping_sub(1), at, at + 1] {
            if let Some(&(b, mb)) = right.get(k) {
                let d = (2 * (a + b)).abs_diff(total);
                if d < best.0 {
                    best = (d, ma | mb << half);
                }
            }
        }
    }
    best.1
}

/// Held-Karp over subsets of nodes `1..n`, starting and ending at node 0.
/// Forbidden edges cost `+inf`; an infinite optimum means infeasible.
pub fn exact_tsp(inst: &TspInstance) -> Result<TspOptimum, OracleError> {
    let n = inst.n();
    if n > MAX_TSP_EXACT {
        return Err(OracleError::TooLarge {
            n,
            max: MAX_TSP_EXACT,
            method: Method::DynamicProgramming,
        });
    }
    let cost = |i: usize, j: usize| {
        if inst.allowed(i, j) {
            inst.dist(i, j)
        } else {
            f64::INFINITY
        }
    };
    let m = n - 1; // nodes 1..n mapped to bits 0..m
    let full = (1usize << m) - 1;
    let mut dp = alloc::vec![f64::INFINITY; (1 << m) * m];
    let mut parent = alloc::vec![u8::MAX; (1 << m) * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = cost(0, j + 1);
    }
    for set in 1..=full {
        for j in 0..m {
            if set >> j & 1 == 0 {
                continue;
            }
            let here = dp[set * m + j];
            if here == f64::INFINITY {
                continue;
            }
            for k in 0..m {
                if set >> k & 1 == 1 {
                    continue;
                }
                let next = set | 1 << k;
                let cand = here + cost(j + 1, k + 1);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                    parent[next * m + k] = j as u8;
                }
            }
        }
    }
    let mut best = (f64::INFINITY, usize::MAX);
    for j in 0..m {
        let total = dp[full * m + j] + cost(j + 1, 0);
        if total < best.0 {
            best = (total, j);
        }
    }
    if best.0 == f64::INFINITY {
        return Err(OracleError::Infeasible);
    }
    let mut order = Vec::with_capacity(n);
    let (mut set, mut j) = (full, best.1);
    loop {
        order.push(j + 1);
        let p = parent[set * m + j];
        set &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    order.push(0);
    order.reverse();
    let witness = Tour::new(inst, order).expect("held-karp path avoids forbidden edges");
    Ok(TspOptimum {
        optimum: witness.length(),
        witness,
        method: Method::DynamicProgramming,
    })
}

/// Brute force over all permutations of `1..n` with node 0 fixed first.
pub fn enumerate_tsp(inst: &TspInstance) -> Result<TspOptimum, OracleError> {
    let n = inst.n();
    if n > MAX_TSP_ENUMERATION {
        return Err(OracleError::TooLarge {
            n,
            max: MAX_TSP_ENUMERATION,
            method: Method::Enumeration,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<Tour> = None;
    loop {
        if let Ok(t) = Tour::new(inst, order.clone()) {
            if best.as_ref().is_none_or(|b| t.length() < b.length()) {
                best = Some(t);
            }
        }
        if !next_permutation(&mut order[1..]) {
            break;
        }
    }
    let witness = best.ok_or(OracleError::Infeasible)?;
    Ok(TspOptimum {
        optimum: witness.length(),
        witness,
        method: Method::Enumeration,
    })
}

fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Karmarkar-Karp largest differencing.
///
/// Repeatedly replaces the two largest values by their difference, recording
/// that the two groups end up on opposite sides. Ties pop the lower group id
/// first.
pub fn baseline_partition_kk(inst: &PartitionInstance) -> Assignment {
    let w = inst.weights();
    // each group lists (item, on_first_side) relative to its representative
    let mut groups: Vec<Vec<(usize, bool)>> =
        (0..w.len()).map(|i| alloc::vec![(i, true)]).collect();
    let mut heap: BinaryHeap<(u64, Reverse<usize>)> = w
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, Reverse(i)))
        .collect();
    while heap.len() > 1 {
        let (a, Reverse(ga)) = heap.pop().expect("len > 1");
        let (b, Reverse(gb)) = heap.pop().expect("len > 1");
        let moved = core::mem::take(&mut groups[gb]);
        groups[ga].extend(moved.into_iter().map(|(i, s)| (i, !s)));
        heap.push((a - b, Reverse(ga)));
    }
    let (_, Reverse(root)) = heap.pop().expect("instance is non-empty");
    let mut sides = alloc::vec![Side::Heap1; w.len()];
    for &(i, first) in &groups[root] {
        sides[i] = if first { Side::Heap1 } else { Side::Heap2 };
    }
    Assignment::new(inst, sides).expect("one side per item")
}

/// Nearest neighbour from node 0, optionally followed by first-improvement
/// 2-opt. Fails with [`TspError::Stranded`] when every next hop (or the
/// closing edge) is forbidden.
pub fn baseline_tsp(inst: &TspInstance, improve: bool) -> Result<Tour, TspError> {
    let n = inst.n();
    let mut visited = alloc::vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = 0;
    visited[0] = true;
    order.push(0);
    while order.len() < n {
        let next = (0..n)
            .filter(|&v| !visited[v] && inst.allowed(cur, v))
            .min_by(|&a, &b| {
                inst.dist(cur, a)
                    .total_cmp(&inst.dist(cur, b))
                    .then(a.cmp(&b))
            });
        let Some(next) = next else {
            return Err(TspError::Stranded {
                visited: order.len(),
            });
        };
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    if !inst.allowed(cur, 0) {
        return Err(TspError::Stranded { visited: n });
    }
    let tour = Tour::new(inst, order)?;
    Ok(if improve { two_opt(inst, tour) } else { tour })
}

/// First-improvement 2-opt. A move is kept only if the recomputed tour is
/// strictly shorter, so the result is never longer than the input.
pub fn two_opt(inst: &TspInstance, tour: Tour) -> Tour {
    let n = inst.n();
    let mut best = tour;
    let mut improved = true;
    while improved {
        improved = false;
        'scan: for i in 0..n - 1 {
            for j in i + 2..n {
                let o = best.order();
                let (a, b, c, d) = (o[i], o[i + 1], o[j], o[(j + 1) % n]);
                if a == d {
                    continue;
                }
                let delta = inst.dist(a, c) + inst.dist(b, d) - inst.dist(a, b) - inst.dist(c, d);
                if delta >= 0.0 || !inst.allowed(a, c) || !inst.allowed(b, d) {
                    continue;
                }
                let mut order = o.to_vec();
                order[i + 1..=j].reverse();
                if let Ok(cand) = Tour::new(inst, order) {
                    if cand.length() < best.length() {
                        best = cand;
                        improved = true;
                        break 'scan;
                    }
                }
            }
        }
    }
    best
}
