//! Post-inference analytics: mean ranks, rank correlation with degree
//! imbalance, model selection across the four variants, and posterior
//! odds.

use crate::combin::DlTables;
use crate::dl::{DlBreakdown, DlResult, ModelVariant};
use crate::graph::DirectedMultigraph;
use crate::mcmc::{anneal_map, ChainConfig, RankMarginals};
use crate::state::{BlockState, Partition};
use rayon::prelude::*;
use std::sync::Arc;

/// Mean rank of each node: sum_r r pi_i(r).
pub fn mean_rank(marginals: &RankMarginals) -> Vec<f64> {
    assert!(marginals.num_samples() > 0, "mean rank needs at least one sample");
    (0..marginals.num_nodes())
        .map(|i| {
            marginals
                .pi(i)
                .iter()
                .enumerate()
                .map(|(r, &p)| r as f64 * p)
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TauError {
    #[error("sequences must have equal length >= 2")]
    BadLength,
    #[error("inputs must be finite")]
    NonFinite,
    #[error("Kendall tau is undefined when {0} has zero variance")]
    ZeroVariance(&'static str),
}

/// Tie-corrected Kendall rank correlation (tau-b).
///
/// Sorts by x (breaking ties by y) and counts discordant pairs as merge
/// sort inversions in y, so it runs in O(n log n); ties enter through
/// the standard tau-b correction.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, TauError> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(TauError::BadLength);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(TauError::NonFinite);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        x[a].partial_cmp(&x[b]).unwrap().then(y[a].partial_cmp(&y[b]).unwrap())
    });
    let tie_pairs = |sorted_vals: &mut dyn Iterator<Item = f64>| -> u64 {
        let mut pairs = 0u64;
        let mut run = 0u64;
        let mut prev = f64::NAN;
        for v in sorted_vals {
            if v == prev {
                run += 1;
            } else {
                pairs += run.saturating_sub(1) * run / 2;
                run = 1;
                prev = v;
            }
        }
        pairs + run.saturating_sub(1) * run / 2
    };
    let xtie = tie_pairs(&mut idx.iter().map(|&i| x[i]));
    let xytie = {
        let mut pairs = 0u64;
        let mut run = 0u64;
        let mut prev = (f64::NAN, f64::NAN);
        for &i in &idx {
            let cur = (x[i], y[i]);
            if cur == prev {
                run += 1;
            } else {
                pairs += run.saturating_sub(1) * run / 2;
                run = 1;
                prev = cur;
            }
        }
        pairs + run.saturating_sub(1) * run / 2
    };
    let mut y_in_x_order: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let discordant = count_inversions(&mut y_in_x_order);
    let mut y_sorted: Vec<f64> = y.to_vec();
    y_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ytie = tie_pairs(&mut y_sorted.into_iter());

    let tot = n as u64 * (n as u64 - 1) / 2;
    if xtie == tot {
        return Err(TauError::ZeroVariance("x"));
    }
    if ytie == tot {
        return Err(TauError::ZeroVariance("y"));
    }
    let con_minus_dis =
        tot as i64 - xtie as i64 - ytie as i64 + xytie as i64 - 2 * discordant as i64;
    let denom = ((tot - xtie) as f64).sqrt() * ((tot - ytie) as f64).sqrt();
    Ok(con_minus_dis as f64 / denom)
}

/// Strict inversions via merge sort; equal elements are not inversions.
fn count_inversions(vals: &mut [f64]) -> u64 {
    let n = vals.len();
    if n < 2 {
        return 0;
    }
    let mut buf = vals.to_vec();
    merge_count(vals, &mut buf)
}

fn merge_count(vals: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = vals.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = vals.split_at_mut(mid);
    let (bl, br) = buf.split_at_mut(mid);
    let mut inv = merge_count(left, bl) + merge_count(right, br);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            inv += (left.len() - i) as u64;
            buf[k] = right[j];
            j += 1;
        } else {
            buf[k] = left[i];
            i += 1;
        }
        k += 1;
    }
    while i < left.len() {
        buf[k] = left[i];
        i += 1;
        k += 1;
    }
    while j < right.len() {
        buf[k] = right[j];
        j += 1;
        k += 1;
    }
    vals.copy_from_slice(&buf[..n]);
    inv
}

/// Posterior odds in favor of model 1: prior_odds * 2^(sigma2 - sigma1).
pub fn posterior_odds(sigma_1: f64, sigma_2: f64, prior_odds: f64) -> f64 {
    assert!(sigma_1.is_finite() && sigma_2.is_finite());
    prior_odds * (sigma_2 - sigma_1).exp2()
}

/// Node order sorted lexicographically by (rank, degree imbalance),
/// refining equal-rank ties by local imbalance.
pub fn lexicographic_order(node_ranks: &[usize], imbalance: &[i64]) -> Vec<usize> {
    assert_eq!(node_ranks.len(), imbalance.len());
    let mut order: Vec<usize> = (0..node_ranks.len()).collect();
    order.sort_by_key(|&i| (node_ranks[i], imbalance[i], i));
    order
}

/// MAP fit of one model variant plus its reporting-side summaries.
#[derive(Debug, Clone)]
pub struct VariantFit {
    pub variant: ModelVariant,
    pub breakdown: DlBreakdown,
    pub partition: Partition,
    pub num_groups: usize,
    pub node_ranks: Vec<usize>,
    pub e_up: u64,
    pub e_down: u64,
    pub e_lat: u64,
    /// E+ / (E+ + E-) for ordered fits, 0 when every edge is lateral;
    /// None for unordered fits.
    pub upstream_fraction: Option<f64>,
}

/// Per-variant fits, the winner, and all pairwise comparisons.
#[derive(Debug, Clone)]
pub struct ModelComparison {
    pub fits: Vec<VariantFit>,
    pub best: ModelVariant,
    /// sigma_diffs[i][j] = sigma_i - sigma_j in bits.
    pub sigma_diffs: Vec<Vec<f64>>,
    /// odds[i][j] = posterior odds in favor of fit i over fit j.
    pub odds: Vec<Vec<f64>>,
}

/// Fit every requested variant by MAP search and assemble the
/// comparison. All variants share the same base seed. Ordered fits are
/// reported with the orientation normalized so that E+ >= E- (a full
/// rank reversal, which leaves the description length unchanged).
pub fn model_select(
    graph: &Arc<DirectedMultigraph>,
    variants: &[ModelVariant],
    cfg: &ChainConfig,
    tables: &Arc<DlTables>,
) -> DlResult<ModelComparison> {
    assert!(!variants.is_empty());
    let fits: Vec<VariantFit> = variants
        .par_iter()
        .map(|&variant| -> DlResult<VariantFit> {
            let fit = anneal_map(graph, variant, cfg, tables)?;
            let mut partition = fit.partition;
            let mut state = BlockState::build(Arc::clone(graph), &partition);
            let (mut e_up, e_down, e_lat) = state.alignment();
            if variant.ordered && e_down > e_up {
                partition = partition.reversed();
                state.reverse_order();
                e_up = state.alignment().0;
            }
            let e_down = state.alignment().1;
            let upstream_fraction = variant.ordered.then(|| {
                if e_up + e_down == 0 {
                    0.0
                } else {
                    e_up as f64 / (e_up + e_down) as f64
                }
            });
            Ok(VariantFit {
                variant,
                breakdown: fit.breakdown,
                num_groups: partition.num_groups,
                node_ranks: partition.node_ranks(),
                partition,
                e_up,
                e_down,
                e_lat,
                upstream_fraction,
            })
        })
        .collect::<DlResult<Vec<_>>>()?;

    let k = fits.len();
    let mut sigma_diffs = vec![vec![0.0; k]; k];
    let mut odds = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            sigma_diffs[i][j] = fits[i].breakdown.total - fits[j].breakdown.total;
            odds[i][j] = posterior_odds(fits[i].breakdown.total, fits[j].breakdown.total, 1.0);
        }
    }
    let mut best_idx = 0;
    for i in 1..k {
        if fits[i].breakdown.total < fits[best_idx].breakdown.total {
            best_idx = i;
        }
    }
    Ok(ModelComparison { best: fits[best_idx].variant, fits, sigma_diffs, odds })
}
