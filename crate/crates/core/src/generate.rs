//! Synthetic network generation: microcanonical block-model samples via
//! half-edge pairing, the imbalanced-degree null model, and the
//! upstream-edge perturbation used in the degree-imbalance experiment.

use crate::graph::{DegreeSequence, DirectedMultigraph};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Constraints for a microcanonical sample: group memberships, the
/// group affinity matrix, and optionally a fixed degree sequence.
///
/// `affinities[r][s]` is the number of edges from group `s` to group
/// `r`, matching the adjacency convention.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub labels: Vec<usize>,
    pub affinities: Vec<Vec<u64>>,
    pub degrees: Option<DegreeSequence>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("label {0} out of range for {1} groups")]
    LabelOutOfRange(usize, usize),
    #[error("affinity matrix is not square")]
    BadAffinityShape,
    #[error("degree sequence length does not match the partition")]
    DegreeLengthMismatch,
    #[error(
        "group {group} {direction}-degree total {got} does not match the affinity marginal {expected}"
    )]
    MarginalMismatch { group: usize, direction: &'static str, expected: u64, got: u64 },
}

impl GeneratorSpec {
    fn num_groups(&self) -> usize {
        self.affinities.len()
    }

    fn validate(&self) -> Result<(), GenError> {
        let b = self.num_groups();
        if self.affinities.iter().any(|row| row.len() != b) {
            return Err(GenError::BadAffinityShape);
        }
        for &l in &self.labels {
            if l >= b {
                return Err(GenError::LabelOutOfRange(l, b));
            }
        }
        if let Some(deg) = &self.degrees {
            if deg.out_degrees.len() != self.labels.len()
                || deg.in_degrees.len() != self.labels.len()
            {
                return Err(GenError::DegreeLengthMismatch);
            }
            for r in 0..b {
                let e_out: u64 = (0..b).map(|s| self.affinities[s][r]).sum();
                let e_in: u64 = (0..b).map(|s| self.affinities[r][s]).sum();
                let k_out: u64 = self
                    .labels
                    .iter()
                    .zip(&deg.out_degrees)
                    .filter(|(&l, _)| l == r)
                    .map(|(_, &k)| k)
                    .sum();
                let k_in: u64 = self
                    .labels
                    .iter()
                    .zip(&deg.in_degrees)
                    .filter(|(&l, _)| l == r)
                    .map(|(_, &k)| k)
                    .sum();
                if k_out != e_out {
                    return Err(GenError::MarginalMismatch {
                        group: r,
                        direction: "out",
                        expected: e_out,
                        got: k_out,
                    });
                }
                if k_in != e_in {
                    return Err(GenError::MarginalMismatch {
                        group: r,
                        direction: "in",
                        expected: e_in,
                        got: k_in,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Draw a multigraph with exactly the prescribed group-pair edge counts
/// (and degrees, when given), uniformly over half-edge pairings.
///
/// Out-stubs and in-stubs are shuffled within each group and consumed
/// segment by segment per group pair, which realizes every pairing that
/// respects the counts with equal probability. When no degree sequence
/// is given, each group's stubs are assigned to member nodes uniformly
/// at random (the non-degree-corrected prior).
pub fn sample_microcanonical<R: Rng>(
    spec: &GeneratorSpec,
    rng: &mut R,
) -> Result<DirectedMultigraph, GenError> {
    spec.validate()?;
    let b = spec.num_groups();
    let n = spec.labels.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); b];
    for (i, &l) in spec.labels.iter().enumerate() {
        members[l].push(i);
    }
    // out_stubs[r]: node id repeated once per out half-edge, shuffled
    let mut out_stubs: Vec<Vec<usize>> = vec![Vec::new(); b];
    let mut in_stubs: Vec<Vec<usize>> = vec![Vec::new(); b];
    match &spec.degrees {
        Some(deg) => {
            for i in 0..n {
                let r = spec.labels[i];
                out_stubs[r].extend(std::iter::repeat(i).take(deg.out_degrees[i] as usize));
                in_stubs[r].extend(std::iter::repeat(i).take(deg.in_degrees[i] as usize));
            }
        }
        None => {
            for r in 0..b {
                assert!(
                    !members[r].is_empty()
                        || ((0..b).all(|s| spec.affinities[s][r] == 0 && spec.affinities[r][s] == 0)),
                    "group {r} has edges but no members"
                );
                let e_out: u64 = (0..b).map(|s| spec.affinities[s][r]).sum();
                let e_in: u64 = (0..b).map(|s| spec.affinities[r][s]).sum();
                for _ in 0..e_out {
                    out_stubs[r].push(members[r][rng.random_range(0..members[r].len())]);
                }
                for _ in 0..e_in {
                    in_stubs[r].push(members[r][rng.random_range(0..members[r].len())]);
                }
            }
        }
    }
    for r in 0..b {
        out_stubs[r].shuffle(rng);
        in_stubs[r].shuffle(rng);
    }
    let mut out_cursor = vec![0usize; b];
    let mut in_cursor = vec![0usize; b];
    let mut edges: Vec<(usize, usize, u64)> = Vec::new();
    for t in 0..b {
        for s in 0..b {
            let count = spec.affinities[t][s] as usize;
            for _ in 0..count {
                let src = out_stubs[s][out_cursor[s]];
                let dst = in_stubs[t][in_cursor[t]];
                out_cursor[s] += 1;
                in_cursor[t] += 1;
                edges.push((src, dst, 1));
            }
        }
    }
    Ok(DirectedMultigraph::from_edges(n, &edges))
}

/// Degree sequence with fixed total degree k per node and an out-degree
/// drawn from Binomial(k, (N - i)/(N - 1)) for the 1-based node index i,
/// resampled one uniformly chosen node at a time until the out- and
/// in-degree totals balance.
///
/// `n * k` must be even, otherwise no balanced sequence exists.
pub fn sample_imbalanced_degrees<R: Rng>(n: usize, k: u64, rng: &mut R) -> DegreeSequence {
    assert!(n >= 2, "need at least two nodes");
    assert!(k >= 1, "total degree must be at least 1");
    assert!(
        (n as u64 * k) % 2 == 0,
        "n * k must be even for a feasible degree sequence"
    );
    let draw = |i: usize, rng: &mut R| -> u64 {
        // i is the 1-based index
        let p = (n - i) as f64 / (n - 1) as f64;
        Binomial::new(k, p).expect("valid binomial").sample(rng)
    };
    let mut out: Vec<u64> = (1..=n).map(|i| draw(i, rng)).collect();
    let target = n as u64 * k / 2;
    let mut total: u64 = out.iter().sum();
    while total != target {
        let i = rng.random_range(0..n);
        total -= out[i];
        out[i] = draw(i + 1, rng);
        total += out[i];
    }
    let in_deg = out.iter().map(|&o| k - o).collect();
    DegreeSequence { out_degrees: out, in_degrees: in_deg }
}

/// Add `extra` edges among the first `node_count` nodes, each drawn
/// uniformly over distinct pairs and oriented from the higher index to
/// the lower one, so all added edges share one direction relative to
/// the index order. No self-loops; duplicating an existing edge just
/// raises its multiplicity.
pub fn add_upstream_perturbation<R: Rng>(
    g: &DirectedMultigraph,
    node_count: usize,
    extra: u64,
    rng: &mut R,
) -> DirectedMultigraph {
    assert!(node_count >= 2, "need at least two nodes to add edges");
    assert!(node_count <= g.num_nodes());
    let mut edges: Vec<(usize, usize, u64)> = g.edges().collect();
    for _ in 0..extra {
        let a = rng.random_range(0..node_count);
        let b = loop {
            let b = rng.random_range(0..node_count);
            if b != a {
                break b;
            }
        };
        let (hi, lo) = (a.max(b), a.min(b));
        edges.push((hi, lo, 1));
    }
    DirectedMultigraph::from_edges(g.num_nodes(), &edges)
}
