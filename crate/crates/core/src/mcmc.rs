//! Metropolis-Hastings sampling over labelled ordered partitions.
//!
//! Proposal kernels, applied in a fixed sequence per sweep:
//!
//! * single-node moves with a mixture of edge-guided targets (the group
//!   of a uniformly chosen half-edge endpoint) and uniform targets over
//!   existing groups plus a fresh one;
//! * merge-split moves anchored by a uniformly chosen node pair: a pair
//!   sharing a group proposes a split of that group, a pair straddling
//!   two groups proposes (on a fair coin) either their merge or a
//!   merge-and-resplit of their union. Splits are grown by restricted
//!   Gibbs sub-sweeps over the two sides from a randomized launch
//!   state, and the probability of the final sub-sweep is tracked
//!   exactly in both directions, so structured splits are actually
//!   proposable while the Hastings ratio stays exact;
//! * group relocation (ordered variant only): all nodes of a uniformly
//!   chosen group move to a fresh group with a new order value, which
//!   resamples the group's rank position.
//!
//! Each kernel satisfies detailed balance on its own: forward and
//! reverse proposal probabilities are tracked exactly, with new order
//! values drawn uniformly on [0, 1] (density 1, so those factors cancel
//! in the ratio), and launch states shared between the two evaluation
//! directions as auxiliary variables. The relocation kernel keeps the
//! order resampling ergodic.
//!
//! Acceptance uses min(1, 2^{-beta dSigma} q_rev/q_fwd); at beta =
//! infinity only strictly improving proposals are taken.

use crate::combin::DlTables;
use crate::dl::{
    delta_description_length, description_length_state, DlBreakdown, DlResult, ModelVariant,
};
use crate::graph::DirectedMultigraph;
use crate::state::{BlockState, MoveDelta, MoveTarget, Partition};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl std::str::FromStr for Beta {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "infinity" | "Inf" => Ok(Beta::Infinite),
            _ => s
                .parse::<f64>()
                .map_err(|e| format!("invalid beta {s:?}: {e}"))
                .and_then(|v| {
                    if v > 0.0 {
                        Ok(Beta::Finite(v))
                    } else {
                        Err(format!("beta must be positive, got {v}"))
                    }
                }),
        }
    }
}

/// Starting partition for a chain.
#[derive(Debug, Clone, Default)]
pub enum InitPartition {
    #[default]
    SingleGroup,
    PerNode,
    Given(Partition),
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub seed: u64,
    pub beta: Beta,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub init: InitPartition,
    /// Probability of drawing the single-node target from a random
    /// neighbor's group instead of uniformly. Must lie in [0, 1).
    pub edge_guided: f64,
    pub merge_split_per_sweep: u32,
    pub relocate_per_sweep: u32,
    /// Restricted Gibbs sub-sweeps used to grow a split proposal before
    /// the probability-tracked final sub-sweep.
    pub gibbs_scans: u32,
    /// Random restarts for the MAP search.
    pub restarts: u32,
    /// Finite-beta exploration sweeps run before the greedy phase of
    /// each MAP restart.
    pub explore_sweeps: u64,
    /// Recompute the description length from scratch after every
    /// accepted move and assert agreement (tests only; slow).
    pub shadow_check: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            seed: 0,
            beta: Beta::Finite(1.0),
            sweeps: 1000,
            burn_in: 100,
            thinning: 1,
            init: InitPartition::SingleGroup,
            edge_guided: 0.5,
            merge_split_per_sweep: 3,
            relocate_per_sweep: 2,
            gibbs_scans: 3,
            restarts: 10,
            explore_sweeps: 0,
            shadow_check: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.sweeps < 1 {
            return Err("sweeps must be >= 1".into());
        }
        if self.thinning < 1 {
            return Err("thinning must be >= 1".into());
        }
        if let Beta::Finite(b) = self.beta {
            if !(b > 0.0) {
                return Err(format!("beta must be positive, got {b}"));
            }
        }
        if !(0.0..1.0).contains(&self.edge_guided) {
            return Err(format!(
                "edge-guided weight must be in [0, 1), got {}",
                self.edge_guided
            ));
        }
        Ok(())
    }

    fn restart_seed(&self, restart: u32) -> u64 {
        self.seed
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(restart as u64 + 1))
    }
}

/// Proposal/acceptance counts per kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptStats {
    pub single: (u64, u64),
    pub merge: (u64, u64),
    pub split: (u64, u64),
    pub combo: (u64, u64),
    pub relocate: (u64, u64),
}

impl AcceptStats {
    pub fn merge_from(&mut self, other: &AcceptStats) {
        let add = |a: &mut (u64, u64), b: (u64, u64)| {
            a.0 += b.0;
            a.1 += b.1;
        };
        add(&mut self.single, other.single);
        add(&mut self.merge, other.merge);
        add(&mut self.split, other.split);
        add(&mut self.combo, other.combo);
        add(&mut self.relocate, other.relocate);
    }
}

/// Per-node distribution over rank positions accumulated from posterior
/// samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMarginals {
    counts: Vec<Vec<u64>>,
    samples: u64,
}

impl RankMarginals {
    pub fn new(num_nodes: usize) -> Self {
        RankMarginals { counts: vec![Vec::new(); num_nodes], samples: 0 }
    }

    pub fn record(&mut self, node_ranks: &[usize]) {
        assert_eq!(node_ranks.len(), self.counts.len());
        for (i, &r) in node_ranks.iter().enumerate() {
            if self.counts[i].len() <= r {
                self.counts[i].resize(r + 1, 0);
            }
            self.counts[i][r] += 1;
        }
        self.samples += 1;
    }

    pub fn num_nodes(&self) -> usize {
        self.counts.len()
    }

    pub fn num_samples(&self) -> u64 {
        self.samples
    }

    /// Highest rank index observed plus one.
    pub fn num_ranks(&self) -> usize {
        self.counts.iter().map(|c| c.len()).max().unwrap_or(0)
    }

    /// pi_i(r) for all r, normalized; zero-padded to `num_ranks`.
    pub fn pi(&self, node: usize) -> Vec<f64> {
        let width = self.num_ranks();
        let mut out = vec![0.0; width];
        if self.samples == 0 {
            return out;
        }
        for (r, &c) in self.counts[node].iter().enumerate() {
            out[r] = c as f64 / self.samples as f64;
        }
        out
    }

    pub fn count(&self, node: usize, rank: usize) -> u64 {
        self.counts[node].get(rank).copied().unwrap_or(0)
    }

    /// Sum rank counts from an independent chain.
    pub fn merge_from(&mut self, other: &RankMarginals) {
        assert_eq!(self.counts.len(), other.counts.len());
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            if mine.len() < theirs.len() {
                mine.resize(theirs.len(), 0);
            }
            for (m, &t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
        self.samples += other.samples;
    }
}

/// One MCMC chain over a block state.
pub struct Chain {
    state: BlockState,
    variant: ModelVariant,
    tables: Arc<DlTables>,
    beta: Beta,
    edge_guided: f64,
    merge_split_per_sweep: u32,
    relocate_per_sweep: u32,
    gibbs_scans: u32,
    shadow_check: bool,
    rng: ChaCha8Rng,
    sigma: f64,
    node_order: Vec<usize>,
    scratch: MoveDelta,
    // committed deltas of the composite move in flight, with the
    // description-length change of each
    composite: Vec<MoveDelta>,
    composite_dsig: Vec<f64>,
    composite_len: usize,
    member_buf: Vec<usize>,
    pub stats: AcceptStats,
}

impl Chain {
    pub fn new(
        graph: Arc<DirectedMultigraph>,
        variant: ModelVariant,
        cfg: &ChainConfig,
        tables: Arc<DlTables>,
    ) -> DlResult<Chain> {
        Self::with_seed(graph, variant, cfg, tables, cfg.seed)
    }

    fn with_seed(
        graph: Arc<DirectedMultigraph>,
        variant: ModelVariant,
        cfg: &ChainConfig,
        tables: Arc<DlTables>,
        seed: u64,
    ) -> DlResult<Chain> {
        let n = graph.num_nodes();
        assert!(n >= 1, "cannot run a chain on an empty graph");
        let partition = match &cfg.init {
            InitPartition::SingleGroup => Partition::single_group(n),
            InitPartition::PerNode => Partition::per_node(n),
            InitPartition::Given(p) => p.clone(),
        };
        let state = BlockState::build(graph, &partition);
        let sigma = description_length_state(&state, variant, &tables)?.total;
        Ok(Chain {
            state,
            variant,
            tables,
            beta: cfg.beta,
            edge_guided: cfg.edge_guided,
            merge_split_per_sweep: cfg.merge_split_per_sweep,
            relocate_per_sweep: cfg.relocate_per_sweep,
            gibbs_scans: cfg.gibbs_scans,
            shadow_check: cfg.shadow_check,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sigma,
            node_order: (0..n).collect(),
            scratch: MoveDelta::default(),
            composite: Vec::new(),
            composite_dsig: Vec::new(),
            composite_len: 0,
            member_buf: Vec::new(),
            stats: AcceptStats::default(),
        })
    }

    pub fn state(&self) -> &BlockState {
        &self.state
    }

    /// Description length of the current partition, tracked incrementally.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_beta(&mut self, beta: Beta) {
        self.beta = beta;
    }

    /// Rebuild the chain state from a given partition.
    pub fn reset_to(&mut self, partition: &Partition) -> DlResult<()> {
        self.state = BlockState::build(Arc::clone(self.state.graph()), partition);
        self.sigma = description_length_state(&self.state, self.variant, &self.tables)?.total;
        Ok(())
    }

    /// One sweep: a move proposal for every node in random order, then
    /// the configured number of merge-split, combo, and relocation
    /// proposals.
    pub fn sweep(&mut self) -> DlResult<()> {
        let mut order = std::mem::take(&mut self.node_order);
        order.shuffle(&mut self.rng);
        for &node in &order {
            self.single_node_step(node)?;
        }
        self.node_order = order;
        for _ in 0..self.merge_split_per_sweep {
            self.merge_split_step()?;
        }
        if self.variant.ordered {
            for _ in 0..self.relocate_per_sweep {
                self.relocate_step()?;
            }
        }
        Ok(())
    }

    fn decide(&mut self, d_sigma: f64, log2_ratio: f64) -> bool {
        match self.beta {
            Beta::Infinite => d_sigma < 0.0,
            Beta::Finite(beta) => {
                let a = -beta * d_sigma + log2_ratio;
                a >= 0.0 || self.rng.random::<f64>().log2() < a
            }
        }
    }

    /// The sampler's state space identifies the B! relabelings of a
    /// B-group partition, while the posterior lives on labelled
    /// partitions; a move that changes the group count must carry the
    /// collapsed multiplicity log2(B_after! / B_before!) in its ratio.
    fn group_count_correction(b_before: usize, b_after: usize) -> f64 {
        crate::combin::log2_factorial(b_after as u64)
            - crate::combin::log2_factorial(b_before as u64)
    }

    /// Fresh order value, resampled until distinct from existing ones.
    fn draw_order_value(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if !self.state.order_values().contains(&u) {
                return u;
            }
        }
    }

    fn shadow_assert(&self) {
        if self.shadow_check {
            let full = description_length_state(&self.state, self.variant, &self.tables)
                .expect("shadow recompute")
                .total;
            assert!(
                (full - self.sigma).abs() < 1e-6,
                "tracked sigma {} drifted from recomputed {}",
                self.sigma,
                full
            );
        }
    }

    fn single_node_step(&mut self, node: usize) -> DlResult<()> {
        self.stats.single.0 += 1;
        let b = self.state.num_groups();
        let r = self.state.slot_of_node(node);
        let k = self.state.half_edge_count(node);
        let d_eff = if k > 0 { self.edge_guided } else { 0.0 };

        let target: Option<usize> = if d_eff > 0.0 && self.rng.random_bool(d_eff) {
            let idx = self.rng.random_range(0..k);
            Some(self.state.half_edge_group(node, idx))
        } else {
            let t = self.rng.random_range(0..=b);
            (t < b).then_some(t)
        };

        let uniform = |groups: usize| (1.0 - d_eff) / (groups as f64 + 1.0);
        let kf = (k as f64).max(1.0);

        match target {
            Some(t) if t == r => {
                // identity proposal, acceptance probability 1
                self.stats.single.1 += 1;
                Ok(())
            }
            Some(t) => {
                if !self.state.stage_move(node, MoveTarget::Existing(t), &mut self.scratch) {
                    return Ok(());
                }
                let d_sigma = delta_description_length(
                    &self.state,
                    &self.scratch,
                    self.variant,
                    &self.tables,
                )?;
                let w_t = self.state.neighbor_weight(node, t, r);
                let q_fwd = d_eff * (w_t as f64 / kf) + uniform(b);
                let b_after = self.scratch.num_groups_after();
                let q_rev = if b_after < b {
                    // source group vanished; the reverse recreates it
                    uniform(b_after)
                } else {
                    let w_r = self.state.neighbor_weight(node, r, t);
                    d_eff * (w_r as f64 / kf) + uniform(b_after)
                };
                let ratio =
                    q_rev.log2() - q_fwd.log2() + Self::group_count_correction(b, b_after);
                if self.decide(d_sigma, ratio) {
                    self.state.commit(&self.scratch);
                    self.sigma += d_sigma;
                    self.stats.single.1 += 1;
                    self.shadow_assert();
                }
                Ok(())
            }
            None => {
                let u = self.draw_order_value();
                if !self.state.stage_move(node, MoveTarget::New { u }, &mut self.scratch) {
                    return Ok(());
                }
                let d_sigma = delta_description_length(
                    &self.state,
                    &self.scratch,
                    self.variant,
                    &self.tables,
                )?;
                let q_fwd = uniform(b);
                let b_after = self.scratch.num_groups_after();
                let q_rev = if b_after == b {
                    // singleton relocation: reverse is another fresh-group move
                    uniform(b_after)
                } else {
                    let w_r = self.state.neighbor_weight(node, r, b);
                    d_eff * (w_r as f64 / kf) + uniform(b_after)
                };
                let ratio =
                    q_rev.log2() - q_fwd.log2() + Self::group_count_correction(b, b_after);
                if self.decide(d_sigma, ratio) {
                    self.state.commit(&self.scratch);
                    self.sigma += d_sigma;
                    self.stats.single.1 += 1;
                    self.shadow_assert();
                }
                Ok(())
            }
        }
    }

    fn group_members(&mut self, slot: usize) {
        self.member_buf.clear();
        for i in 0..self.state.num_nodes() {
            if self.state.slot_of_node(i) == slot {
                self.member_buf.push(i);
            }
        }
    }

    /// Stage, score, and commit one sub-move of a composite proposal,
    /// returning its exact description-length change. No-op moves
    /// contribute nothing. On error the committed prefix is left in
    /// place; the kernel driver unwinds it.
    fn composite_move(&mut self, node: usize, target: MoveTarget) -> DlResult<f64> {
        if self.composite.len() == self.composite_len {
            self.composite.push(MoveDelta::default());
            self.composite_dsig.push(0.0);
        }
        let mut delta = std::mem::take(&mut self.composite[self.composite_len]);
        if !self.state.stage_move(node, target, &mut delta) {
            self.composite[self.composite_len] = delta;
            return Ok(0.0);
        }
        let scored = delta_description_length(&self.state, &delta, self.variant, &self.tables);
        match scored {
            Ok(d) => {
                self.state.commit(&delta);
                self.composite[self.composite_len] = delta;
                self.composite_dsig[self.composite_len] = d;
                self.composite_len += 1;
                Ok(d)
            }
            Err(e) => {
                self.composite[self.composite_len] = delta;
                Err(e)
            }
        }
    }

    /// Unwind committed sub-moves down to `mark`, returning the total
    /// description-length change that was undone.
    fn revert_composite_to(&mut self, mark: usize) -> f64 {
        let mut undone = 0.0;
        for idx in (mark..self.composite_len).rev() {
            let delta = std::mem::take(&mut self.composite[idx]);
            self.state.revert(&delta);
            self.composite[idx] = delta;
            undone += self.composite_dsig[idx];
        }
        self.composite_len = mark;
        undone
    }

    /// One restricted Gibbs visit of `node`, confined to the two sides
    /// of a split in progress. With `track` the chosen (or forced)
    /// side's log2-probability is accumulated; with `force_side` the
    /// node is deterministically placed on that side and its
    /// probability under the scan recorded.
    fn gibbs_visit(
        &mut self,
        node: usize,
        side_a: usize,
        side_b: usize,
        track: Option<&mut f64>,
        force_side: Option<usize>,
    ) -> DlResult<f64> {
        let cur = self.state.slot_of_node(node);
        debug_assert!(cur == side_a || cur == side_b);
        let other = if cur == side_a { side_b } else { side_a };
        if !self.state.stage_move(node, MoveTarget::Existing(other), &mut self.scratch) {
            if let Some(t) = track {
                *t += 0.0;
            }
            return Ok(0.0);
        }
        let d = delta_description_length(&self.state, &self.scratch, self.variant, &self.tables)?;
        match self.beta {
            Beta::Infinite => {
                // greedy refinement; probabilities are never used at
                // beta = infinity
                let target = force_side.unwrap_or(if d < 0.0 { other } else { cur });
                if target != cur {
                    return self.commit_scratch_as_composite(d);
                }
                Ok(0.0)
            }
            Beta::Finite(beta) => {
                // p(move) = 2^(-beta d) / (1 + 2^(-beta d))
                let norm = crate::combin::log2_add(0.0, -beta * d);
                let lg_move = -beta * d - norm;
                let lg_stay = -norm;
                let target = match force_side {
                    Some(side) => side,
                    None => {
                        if self.rng.random::<f64>().log2() < lg_move {
                            other
                        } else {
                            cur
                        }
                    }
                };
                if let Some(t) = track {
                    *t += if target == cur { lg_stay } else { lg_move };
                }
                if target != cur {
                    return self.commit_scratch_as_composite(d);
                }
                Ok(0.0)
            }
        }
    }

    /// Commit the staged scratch move as the next composite sub-move.
    fn commit_scratch_as_composite(&mut self, d: f64) -> DlResult<f64> {
        if self.composite.len() == self.composite_len {
            self.composite.push(MoveDelta::default());
            self.composite_dsig.push(0.0);
        }
        self.state.commit(&self.scratch);
        std::mem::swap(&mut self.composite[self.composite_len], &mut self.scratch);
        self.composite_dsig[self.composite_len] = d;
        self.composite_len += 1;
        Ok(d)
    }

    /// Randomized launch plus `gibbs_scans` restricted sub-sweeps over
    /// the far side of a two-group split in progress. Returns the total
    /// description-length change of all committed reassignments.
    fn grow_split(
        &mut self,
        rest: &[usize],
        side_a: usize,
        side_b: usize,
    ) -> DlResult<f64> {
        let mut total = 0.0;
        for &v in rest {
            if self.rng.random_bool(0.5) {
                total += self.composite_move(v, MoveTarget::Existing(side_b))?;
            }
        }
        for _ in 0..self.gibbs_scans {
            for &v in rest {
                total += self.gibbs_visit(v, side_a, side_b, None, None)?;
            }
        }
        Ok(total)
    }

    /// Merge-split family anchored by a uniformly chosen node pair.
    fn merge_split_step(&mut self) -> DlResult<()> {
        let n = self.state.num_nodes();
        if n < 2 {
            return Ok(());
        }
        let i = self.rng.random_range(0..n);
        let j = loop {
            let j = self.rng.random_range(0..n);
            if j != i {
                break j;
            }
        };
        if self.state.slot_of_node(i) == self.state.slot_of_node(j) {
            self.anchored_split(i, j)
        } else if self.rng.random_bool(0.5) {
            self.anchored_merge(i, j)
        } else {
            self.anchored_resplit(i, j)
        }
    }

    /// Members of the group at `slot` excluding the two anchors, in
    /// ascending node order (the shared scan order for both proposal
    /// directions).
    fn rest_of_group(&mut self, slot: usize, i: usize, j: usize) {
        self.member_buf.clear();
        for v in 0..self.state.num_nodes() {
            if v != i && v != j && self.state.slot_of_node(v) == slot {
                self.member_buf.push(v);
            }
        }
    }

    /// Split the group containing anchors i and j: j seeds a fresh
    /// group, the rest is grown by restricted sub-sweeps, and the final
    /// probability-tracked sub-sweep gives the forward proposal
    /// probability. The reverse move is the deterministic merge of the
    /// two sides through the same anchor pair (coin 1/2).
    fn anchored_split(&mut self, i: usize, j: usize) -> DlResult<()> {
        self.stats.split.0 += 1;
        let b = self.state.num_groups();
        let side_a = self.state.slot_of_node(i);
        self.rest_of_group(side_a, i, j);
        let rest = std::mem::take(&mut self.member_buf);
        let u = self.draw_order_value();
        self.composite_len = 0;
        let outcome = (|chain: &mut Self| -> DlResult<(f64, f64)> {
            let mut d_sigma = chain.composite_move(j, MoveTarget::New { u })?;
            let side_b = chain.state.slot_of_node(j);
            d_sigma += chain.grow_split(&rest, side_a, side_b)?;
            let mut q_fwd = 0.0;
            for &v in &rest {
                d_sigma += chain.gibbs_visit(v, side_a, side_b, Some(&mut q_fwd), None)?;
            }
            Ok((d_sigma, q_fwd))
        })(self);
        self.member_buf = rest;
        let (d_sigma, q_fwd) = match outcome {
            Ok(v) => v,
            Err(e) => {
                self.revert_composite_to(0);
                return Err(e);
            }
        };
        // reverse: same pair straddles the two sides, merge coin 1/2
        let ratio = -1.0 - q_fwd + Self::group_count_correction(b, b + 1);
        if self.decide(d_sigma, ratio) {
            self.sigma += d_sigma;
            self.stats.split.1 += 1;
            self.shadow_assert();
        } else {
            self.revert_composite_to(0);
        }
        Ok(())
    }

    /// Merge j's group into i's group. The reverse probability is the
    /// chance that the split procedure, run on the merged group with
    /// the same anchors and the old order value, reproduces the
    /// original two sides in its final probability-tracked sub-sweep.
    fn anchored_merge(&mut self, i: usize, j: usize) -> DlResult<()> {
        self.stats.merge.0 += 1;
        let b = self.state.num_groups();
        let side_a = self.state.slot_of_node(i);
        let side_b = self.state.slot_of_node(j);
        let u_b = self.state.order_value(side_b);
        // original side of every non-anchor member of the union
        self.rest_of_group(side_a, i, j);
        let mut rest = std::mem::take(&mut self.member_buf);
        let mut was_side_a: Vec<bool> = vec![true; rest.len()];
        self.rest_of_group(side_b, i, j);
        for &v in &self.member_buf {
            rest.push(v);
            was_side_a.push(false);
        }
        let mut order: Vec<usize> = (0..rest.len()).collect();
        order.sort_by_key(|&idx| rest[idx]);
        let rest_sorted: Vec<usize> = order.iter().map(|&idx| rest[idx]).collect();
        let orig_a: Vec<bool> = order.iter().map(|&idx| was_side_a[idx]).collect();

        self.composite_len = 0;
        let mut q_rev = 0.0;
        let outcome = (|chain: &mut Self| -> DlResult<f64> {
            // commit the merge: everything in side_b moves to side_a,
            // the anchor j last so side_b is destroyed by its move
            chain.rest_of_group(side_b, i, j);
            let movers = std::mem::take(&mut chain.member_buf);
            let mut d_sigma = 0.0;
            for &v in &movers {
                d_sigma += chain.composite_move(v, MoveTarget::Existing(side_a))?;
            }
            chain.member_buf = movers;
            d_sigma += chain.composite_move(j, MoveTarget::Existing(side_a))?;
            let merged_slot = chain.state.slot_of_node(i);

            // virtual reverse split, evaluated and then unwound
            let mark = chain.composite_len;
            chain.composite_move(j, MoveTarget::New { u: u_b })?;
            let side_b_virtual = chain.state.slot_of_node(j);
            chain.grow_split(&rest_sorted, merged_slot, side_b_virtual)?;
            for (&v, &to_a) in rest_sorted.iter().zip(&orig_a) {
                let side = if to_a { merged_slot } else { side_b_virtual };
                chain.gibbs_visit(v, merged_slot, side_b_virtual, Some(&mut q_rev), Some(side))?;
            }
            chain.revert_composite_to(mark);
            Ok(d_sigma)
        })(self);
        let d_sigma = match outcome {
            Ok(v) => v,
            Err(e) => {
                self.revert_composite_to(0);
                return Err(e);
            }
        };

        // forward: merge coin 1/2; reverse: split through the same pair
        let ratio = q_rev + 1.0 + Self::group_count_correction(b, b - 1);
        if self.decide(d_sigma, ratio) {
            self.sigma += d_sigma;
            self.stats.merge.1 += 1;
            self.shadow_assert();
        } else {
            self.revert_composite_to(0);
        }
        Ok(())
    }

    /// Merge the two anchor groups and immediately re-split the union
    /// from a shared launch state, keeping both order values in place.
    /// Forward and reverse final-sub-sweep probabilities are both
    /// evaluated from the same launch, so every other factor cancels.
    fn anchored_resplit(&mut self, i: usize, j: usize) -> DlResult<()> {
        self.stats.combo.0 += 1;
        let side_a = self.state.slot_of_node(i);
        let side_b = self.state.slot_of_node(j);
        let u_b = self.state.order_value(side_b);
        self.rest_of_group(side_a, i, j);
        let mut rest = std::mem::take(&mut self.member_buf);
        let mut was_side_a: Vec<bool> = vec![true; rest.len()];
        self.rest_of_group(side_b, i, j);
        for &v in &self.member_buf {
            rest.push(v);
            was_side_a.push(false);
        }
        let mut order: Vec<usize> = (0..rest.len()).collect();
        order.sort_by_key(|&idx| rest[idx]);
        let rest_sorted: Vec<usize> = order.iter().map(|&idx| rest[idx]).collect();
        let orig_a: Vec<bool> = order.iter().map(|&idx| was_side_a[idx]).collect();

        self.composite_len = 0;
        let mut q_rev = 0.0;
        let mut q_fwd = 0.0;
        let outcome = (|chain: &mut Self| -> DlResult<f64> {
            // merge side_b into side_a
            chain.rest_of_group(side_b, i, j);
            let movers = std::mem::take(&mut chain.member_buf);
            let mut d_sigma = 0.0;
            for &v in &movers {
                d_sigma += chain.composite_move(v, MoveTarget::Existing(side_a))?;
            }
            chain.member_buf = movers;
            d_sigma += chain.composite_move(j, MoveTarget::Existing(side_a))?;
            let merged_slot = chain.state.slot_of_node(i);

            // shared launch: j back out at its old order value,
            // randomize, refine
            d_sigma += chain.composite_move(j, MoveTarget::New { u: u_b })?;
            let side_new = chain.state.slot_of_node(j);
            d_sigma += chain.grow_split(&rest_sorted, merged_slot, side_new)?;
            let launch_mark = chain.composite_len;

            // reverse probability: final sub-sweep forced to the
            // original sides, evaluated from the launch, then unwound
            for (&v, &to_a) in rest_sorted.iter().zip(&orig_a) {
                let side = if to_a { merged_slot } else { side_new };
                chain.gibbs_visit(v, merged_slot, side_new, Some(&mut q_rev), Some(side))?;
            }
            chain.revert_composite_to(launch_mark);

            // forward: sample the final sub-sweep from the same launch
            for &v in &rest_sorted {
                d_sigma += chain.gibbs_visit(v, merged_slot, side_new, Some(&mut q_fwd), None)?;
            }
            Ok(d_sigma)
        })(self);
        let d_sigma = match outcome {
            Ok(v) => v,
            Err(e) => {
                self.revert_composite_to(0);
                return Err(e);
            }
        };

        // pair choice, coin, launch, and order values all cancel
        if self.decide(d_sigma, q_rev - q_fwd) {
            self.sigma += d_sigma;
            self.stats.combo.1 += 1;
            self.shadow_assert();
        } else {
            self.revert_composite_to(0);
        }
        Ok(())
    }

    fn relocate_step(&mut self) -> DlResult<()> {
        self.stats.relocate.0 += 1;
        let b = self.state.num_groups();
        if b < 2 {
            return Ok(());
        }
        let group = self.rng.random_range(0..b);
        self.group_members(group);
        let members = std::mem::take(&mut self.member_buf);
        let u = self.draw_order_value();
        self.composite_len = 0;
        let mut d_sigma = 0.0;
        let mut failed = None;
        for (idx, &v) in members.iter().enumerate() {
            let target = if idx == 0 {
                MoveTarget::New { u }
            } else {
                MoveTarget::Existing(self.state.slot_of_node(members[0]))
            };
            match self.composite_move(v, target) {
                Ok(d) => d_sigma += d,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        self.member_buf = members;
        if let Some(e) = failed {
            self.revert_composite_to(0);
            return Err(e);
        }
        // choose group 1/B both ways, order value density 1 both ways
        if self.decide(d_sigma, 0.0) {
            self.sigma += d_sigma;
            self.stats.relocate.1 += 1;
            self.shadow_assert();
        } else {
            self.revert_composite_to(0);
        }
        Ok(())
    }
}

/// Result of a MAP search.
#[derive(Debug, Clone)]
pub struct MapFit {
    pub partition: Partition,
    pub breakdown: DlBreakdown,
    pub stats: AcceptStats,
}

/// Greedy description-length minimization with random restarts.
///
/// Each restart runs `explore_sweeps` at the configured finite beta
/// (beta = 1 if the config asks for infinity), rebuilds at the best
/// partition seen, then polishes with `sweeps` greedy sweeps. Restarts
/// run in parallel and the lowest description length wins; ties break
/// toward the lowest restart index, so results are deterministic for a
/// fixed seed.
pub fn anneal_map(
    graph: &Arc<DirectedMultigraph>,
    variant: ModelVariant,
    cfg: &ChainConfig,
    tables: &Arc<DlTables>,
) -> DlResult<MapFit> {
    let restarts = cfg.restarts.max(1);
    let results: Vec<(f64, Partition, AcceptStats)> = (0..restarts)
        .into_par_iter()
        .map(|ri| -> DlResult<(f64, Partition, AcceptStats)> {
            let mut chain = Chain::with_seed(
                Arc::clone(graph),
                variant,
                cfg,
                Arc::clone(tables),
                cfg.restart_seed(ri),
            )?;
            let explore_beta = match cfg.beta {
                Beta::Finite(b) => b,
                Beta::Infinite => 1.0,
            };
            let mut best_sigma = chain.sigma();
            let mut best = chain.state().to_partition();
            if cfg.explore_sweeps > 0 {
                chain.set_beta(Beta::Finite(explore_beta));
                for _ in 0..cfg.explore_sweeps {
                    chain.sweep()?;
                    if chain.sigma() < best_sigma {
                        best_sigma = chain.sigma();
                        best = chain.state().to_partition();
                    }
                }
                chain.reset_to(&best)?;
            }
            chain.set_beta(Beta::Infinite);
            for _ in 0..cfg.sweeps {
                chain.sweep()?;
                if chain.sigma() < best_sigma {
                    best_sigma = chain.sigma();
                    best = chain.state().to_partition();
                }
            }
            Ok((best_sigma, best, chain.stats))
        })
        .collect::<DlResult<Vec<_>>>()?;

    let mut stats = AcceptStats::default();
    for (_, _, s) in &results {
        stats.merge_from(s);
    }
    let (mut best_sigma, mut best_idx) = (f64::INFINITY, 0);
    for (idx, (sigma, _, _)) in results.iter().enumerate() {
        if *sigma < best_sigma {
            best_sigma = *sigma;
            best_idx = idx;
        }
    }
    let partition = results[best_idx].1.clone();
    let state = BlockState::build(Arc::clone(graph), &partition);
    let breakdown = description_length_state(&state, variant, tables)?;
    Ok(MapFit { partition, breakdown, stats })
}

/// Sample the posterior and accumulate per-node rank occupancies.
///
/// Requires beta = 1 so the records come from the actual posterior.
/// Burn-in sweeps are discarded, then every `thinning`-th sweep records
/// each node's rank (the position of its group in u-sorted order).
pub fn collect_marginals(
    graph: &Arc<DirectedMultigraph>,
    variant: ModelVariant,
    cfg: &ChainConfig,
    tables: &Arc<DlTables>,
) -> DlResult<RankMarginals> {
    assert!(
        matches!(cfg.beta, Beta::Finite(b) if b == 1.0),
        "rank marginals require beta = 1"
    );
    let mut chain = Chain::new(Arc::clone(graph), variant, cfg, Arc::clone(tables))?;
    let mut marginals = RankMarginals::new(graph.num_nodes());
    for _ in 0..cfg.burn_in {
        chain.sweep()?;
    }
    for s in 0..cfg.sweeps {
        chain.sweep()?;
        if (s + 1) % cfg.thinning == 0 {
            marginals.record(&chain.state().node_ranks());
        }
    }
    Ok(marginals)
}
