//! Shared enumeration oracles for the integration and acceptance tests.
//!
//! Everything here is deliberately independent of the incremental
//! machinery it checks: partitions are enumerated recursively,
//! multigraphs by brute-force matrix fill, and posteriors by direct
//! summation.

#![allow(dead_code)]

use osbm_core::combin::log2_add;
use osbm_core::dl::{description_length, ModelVariant};
use osbm_core::graph::DirectedMultigraph;
use osbm_core::state::Partition;
use osbm_core::DlTables;
use std::sync::Arc;

/// All ordered set partitions of {0..n}, each encoded as the vector of
/// 0-based group ranks per node (rank 0 = bottom of the order).
pub fn ordered_set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn recurse(node: usize, n: usize, groups: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<usize>>) {
        if node == n {
            let mut labels = vec![0usize; n];
            for (rank, g) in groups.iter().enumerate() {
                for &i in g {
                    labels[i] = rank;
                }
            }
            out.push(labels);
            return;
        }
        for gi in 0..groups.len() {
            groups[gi].push(node);
            recurse(node + 1, n, groups, out);
            groups[gi].pop();
        }
        for pos in 0..=groups.len() {
            groups.insert(pos, vec![node]);
            recurse(node + 1, n, groups, out);
            groups.remove(pos);
        }
    }
    let mut out = Vec::new();
    recurse(0, n, &mut Vec::new(), &mut out);
    out
}

/// Build a partition from rank labels, with ascending order values so
/// that label r has rank r.
pub fn partition_from_rank_labels(labels: &[usize]) -> Partition {
    let b = labels.iter().max().map_or(0, |&m| m + 1);
    let u = (0..b).map(|r| (r as f64 + 1.0) / (b as f64 + 1.0)).collect();
    Partition::new(labels.to_vec(), u).unwrap()
}

/// Exact posterior over all ordered set partitions: probabilities
/// proportional to 2^(-sigma), normalized by direct summation.
pub fn exact_posterior(
    graph: &Arc<DirectedMultigraph>,
    variant: ModelVariant,
    tables: &DlTables,
) -> Vec<(Vec<usize>, f64)> {
    let parts = ordered_set_partitions(graph.num_nodes());
    let sigmas: Vec<f64> = parts
        .iter()
        .map(|labels| {
            description_length(graph, &partition_from_rank_labels(labels), variant, tables)
                .unwrap()
                .total
        })
        .collect();
    let log_norm = sigmas.iter().fold(f64::NEG_INFINITY, |acc, &s| log2_add(acc, -s));
    parts
        .into_iter()
        .zip(sigmas)
        .map(|(labels, s)| (labels, (-s - log_norm).exp2()))
        .collect()
}

/// All set partitions of {0..n} with canonical first-seen labels.
pub fn set_partitions_canonical(n: usize) -> Vec<Vec<usize>> {
    fn recurse(node: usize, n: usize, labels: &mut Vec<usize>, used: usize, out: &mut Vec<Vec<usize>>) {
        if node == n {
            out.push(labels.clone());
            return;
        }
        for l in 0..=used {
            labels.push(l);
            recurse(node + 1, n, labels, used.max(l + 1), out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    recurse(0, n, &mut Vec::new(), 0, &mut out);
    out
}

/// All b x b non-negative integer matrices with a given total.
pub fn matrices_with_total(b: usize, total: u64) -> Vec<Vec<Vec<u64>>> {
    let cells = b * b;
    let mut out = Vec::new();
    let mut flat = vec![0u64; cells];
    fn recurse(idx: usize, rem: u64, flat: &mut Vec<u64>, b: usize, out: &mut Vec<Vec<Vec<u64>>>) {
        if idx == flat.len() {
            if rem == 0 {
                let m = (0..b).map(|r| flat[r * b..(r + 1) * b].to_vec()).collect();
                out.push(m);
            }
            return;
        }
        if idx == flat.len() - 1 {
            flat[idx] = rem;
            recurse(idx + 1, 0, flat, b, out);
            flat[idx] = 0;
            return;
        }
        for v in 0..=rem {
            flat[idx] = v;
            recurse(idx + 1, rem - v, flat, b, out);
            flat[idx] = 0;
        }
    }
    recurse(0, total, &mut flat, b, &mut out);
    out
}

/// All ways to write `total` as an ordered sum of `parts` non-negative
/// integers.
pub fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(parts);
    fn recurse(rem: u64, left: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if left == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=rem {
            cur.push(v);
            recurse(rem - v, left - 1, cur, out);
            cur.pop();
        }
    }
    if parts == 0 {
        if total == 0 {
            out.push(vec![]);
        }
        return out;
    }
    recurse(total, parts, &mut cur, &mut out);
    out
}

/// Microcanonical constraint set for brute-force enumeration.
/// `e[r][s]` counts edges from group s to group r.
#[derive(Debug)]
pub struct MicroConfig {
    pub labels: Vec<usize>,
    pub e: Vec<Vec<u64>>,
    pub k_out: Vec<u64>,
    pub k_in: Vec<u64>,
}

/// Every adjacency matrix compatible with the degrees and block counts.
/// The matrix convention is a[i][j] = number of edges from j to i.
pub fn enumerate_multigraphs(cfg: &MicroConfig) -> Vec<Vec<Vec<u64>>> {
    let n = cfg.labels.len();
    let b = cfg.e.len();
    let mut a = vec![vec![0u64; n]; n];
    let mut row_rem = cfg.k_in.clone(); // row i: sum_j a[i][j] = k_i_in
    let mut col_rem = cfg.k_out.clone(); // col j: sum_i a[i][j] = k_j_out
    let mut block_rem = cfg.e.clone();
    let mut out = Vec::new();
    fn recurse(
        cell: usize,
        n: usize,
        b: usize,
        labels: &[usize],
        a: &mut Vec<Vec<u64>>,
        row_rem: &mut Vec<u64>,
        col_rem: &mut Vec<u64>,
        block_rem: &mut Vec<Vec<u64>>,
        out: &mut Vec<Vec<Vec<u64>>>,
    ) {
        if cell == n * n {
            if row_rem.iter().all(|&r| r == 0)
                && col_rem.iter().all(|&c| c == 0)
                && block_rem.iter().all(|row| row.iter().all(|&v| v == 0))
            {
                out.push(a.clone());
            }
            return;
        }
        let (i, j) = (cell / n, cell % n);
        let (r, s) = (labels[i], labels[j]);
        let _ = b;
        let max = row_rem[i].min(col_rem[j]).min(block_rem[r][s]);
        for v in 0..=max {
            a[i][j] = v;
            row_rem[i] -= v;
            col_rem[j] -= v;
            block_rem[r][s] -= v;
            recurse(cell + 1, n, b, labels, a, row_rem, col_rem, block_rem, out);
            row_rem[i] += v;
            col_rem[j] += v;
            block_rem[r][s] += v;
            a[i][j] = 0;
        }
    }
    recurse(0, n, b, &cfg.labels, &mut a, &mut row_rem, &mut col_rem, &mut block_rem, &mut out);
    out
}

/// Turn an enumerated adjacency matrix (a[i][j] = edges j -> i) into a
/// graph.
pub fn graph_from_matrix(a: &[Vec<u64>]) -> DirectedMultigraph {
    let n = a.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if a[i][j] > 0 {
                edges.push((j, i, a[i][j]));
            }
        }
    }
    DirectedMultigraph::from_edges(n, &edges)
}

/// Total variation distance between an empirical count table and exact
/// probabilities.
pub fn total_variation(
    counts: &std::collections::HashMap<Vec<usize>, u64>,
    exact: &[(Vec<usize>, f64)],
    samples: u64,
) -> f64 {
    let mut tv = 0.0;
    let mut seen = 0u64;
    for (labels, p) in exact {
        let c = counts.get(labels).copied().unwrap_or(0);
        seen += c;
        tv += (c as f64 / samples as f64 - p).abs();
    }
    assert_eq!(seen, samples, "chain visited a state outside the enumeration");
    tv / 2.0
}
