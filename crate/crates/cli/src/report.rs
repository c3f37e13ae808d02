//! JSON-serializable report types. Field order is the serialization
//! order; every numeric field is deterministic for a fixed seed. The
//! wall-clock field is the one inherently nondeterministic value.

use osbm_core::dl::DlBreakdown;
use osbm_core::state::{BlockState, Partition};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub num_nodes: usize,
    pub num_edges: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NodeAssignment {
    pub node: String,
    pub group: usize,
    pub rank: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub upstream: u64,
    pub downstream: u64,
    pub lateral: u64,
    pub delta: i64,
    /// E+ / (E+ + E-), or 0 when all edges are lateral; null for
    /// unordered fits where the group order carries no meaning.
    pub upstream_fraction: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub input: InputDigest,
    pub model: String,
    pub seed: u64,
    pub description_length: DlBreakdown,
    pub num_groups: usize,
    /// Per-node assignment with original ids; ranks are 0-based
    /// positions in ascending group order.
    pub partition: Vec<NodeAssignment>,
    /// Group labels sorted from bottom rank to top rank.
    pub group_order: Vec<usize>,
    pub alignment: AlignmentReport,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VariantReport {
    pub model: String,
    pub description_length: DlBreakdown,
    pub num_groups: usize,
    pub alignment: AlignmentReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub input: InputDigest,
    pub seed: u64,
    pub models: Vec<String>,
    pub fits: Vec<VariantReport>,
    pub best_model: String,
    /// sigma_diff[i][j] = sigma_i - sigma_j, bits.
    pub sigma_diff: Vec<Vec<f64>>,
    /// posterior_odds[i][j] = 2^(sigma_j - sigma_i) in favor of model i.
    pub posterior_odds: Vec<Vec<f64>>,
    /// Partition of the winning fit.
    pub best_partition: Vec<NodeAssignment>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MarginalsReport {
    pub input: InputDigest,
    pub model: String,
    pub seed: u64,
    pub samples: u64,
    pub num_ranks: usize,
    pub node_ids: Vec<String>,
    /// pi[i][r]: posterior probability that node i occupies rank r.
    pub pi: Vec<Vec<f64>>,
    pub mean_rank: Vec<f64>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankReport {
    pub input: InputDigest,
    pub fit: String,
    pub node_ids: Vec<String>,
    pub ranks: Vec<usize>,
    pub degree_imbalance: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_rank: Option<Vec<f64>>,
    /// Kendall tau-b between the ranking and degree imbalance; null
    /// when undefined (zero variance), explained in `tau_note`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_note: Option<String>,
    /// Node ids sorted by (rank, degree imbalance).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicographic_order: Option<Vec<String>>,
}

/// Assemble the per-node assignment table from a partition.
pub fn node_assignments(partition: &Partition, ids: &[String]) -> Vec<NodeAssignment> {
    let ranks = partition.ranks();
    partition
        .labels
        .iter()
        .enumerate()
        .map(|(i, &g)| NodeAssignment { node: ids[i].clone(), group: g, rank: ranks[g] })
        .collect()
}

/// Group labels from bottom rank to top rank.
pub fn group_order(partition: &Partition) -> Vec<usize> {
    let mut order: Vec<usize> = (0..partition.num_groups).collect();
    order.sort_by(|&a, &b| {
        partition.order_values[a].partial_cmp(&partition.order_values[b]).unwrap()
    });
    order
}

pub fn alignment_report(state: &BlockState, ordered: bool) -> AlignmentReport {
    let (up, down, lat) = state.alignment();
    AlignmentReport {
        upstream: up,
        downstream: down,
        lateral: lat,
        delta: up as i64 - down as i64,
        upstream_fraction: ordered.then(|| {
            if up + down == 0 {
                0.0
            } else {
                up as f64 / (up + down) as f64
            }
        }),
    }
}
