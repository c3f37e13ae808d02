//! Labelled ordered partitions and their sufficient statistics.
//!
//! `BlockState` maintains the affinity matrix, group sizes, degree
//! histograms, group degree totals, and up/down/lateral alignment
//! counters under single-node moves in O(k_i + B). Moves are staged
//! first (`stage_move` computes a `MoveDelta` without touching the
//! state), then committed; a committed delta can be reverted exactly,
//! counter for counter, which is what the sampler leans on since most
//! proposals are rejected.
//!
//! Group slots are dense indices 0..B kept contiguous via swap-removal.
//! Nodes reference groups through stable internal ids so that removing
//! a group never has to relabel another group's members.

use crate::graph::DirectedMultigraph;
use std::collections::BTreeMap;
use std::sync::Arc;

/// A labelled partition with ordered group labels.
///
/// `order_values[r]` is the auxiliary value u_r in [0, 1]; the rank of a
/// group is its position when labels are sorted by u. Ranks are 0-based,
/// rank 0 being the group with the smallest u.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub num_groups: usize,
    pub order_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PartitionError {
    #[error("label {0} out of range for {1} groups")]
    LabelOutOfRange(usize, usize),
    #[error("group label {0} is unoccupied")]
    EmptyGroup(usize),
    #[error("expected {expected} order values, got {got}")]
    WrongOrderLength { expected: usize, got: usize },
    #[error("order values must be pairwise distinct")]
    OrderCollision,
}

impl Partition {
    pub fn new(labels: Vec<usize>, order_values: Vec<f64>) -> Result<Self, PartitionError> {
        let num_groups = order_values.len();
        let mut seen = vec![false; num_groups];
        for &b in &labels {
            if b >= num_groups {
                return Err(PartitionError::LabelOutOfRange(b, num_groups));
            }
            seen[b] = true;
        }
        if let Some(r) = seen.iter().position(|&s| !s) {
            return Err(PartitionError::EmptyGroup(r));
        }
        let mut sorted = order_values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(PartitionError::OrderCollision);
        }
        Ok(Partition { labels, num_groups, order_values })
    }

    /// Everyone in one group.
    pub fn single_group(num_nodes: usize) -> Self {
        if num_nodes == 0 {
            return Partition { labels: vec![], num_groups: 0, order_values: vec![] };
        }
        Partition { labels: vec![0; num_nodes], num_groups: 1, order_values: vec![0.5] }
    }

    /// One group per node, label = node index, ascending order values.
    pub fn per_node(num_nodes: usize) -> Self {
        let order_values =
            (0..num_nodes).map(|i| (i as f64 + 1.0) / (num_nodes as f64 + 1.0)).collect();
        Partition { labels: (0..num_nodes).collect(), num_groups: num_nodes, order_values }
    }

    /// Rank of each group label (position in ascending u order).
    pub fn ranks(&self) -> Vec<usize> {
        slot_ranks(&self.order_values)
    }

    /// Rank of each node's group.
    pub fn node_ranks(&self) -> Vec<usize> {
        let ranks = self.ranks();
        self.labels.iter().map(|&b| ranks[b]).collect()
    }

    /// Full rank reversal: u_r -> 1 - u_r.
    pub fn reversed(&self) -> Self {
        Partition {
            labels: self.labels.clone(),
            num_groups: self.num_groups,
            order_values: self.order_values.iter().map(|u| 1.0 - u).collect(),
        }
    }
}

fn slot_ranks(u: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    idx.sort_by(|&a, &b| u[a].partial_cmp(&u[b]).unwrap());
    let mut ranks = vec![0usize; u.len()];
    for (rank, &slot) in idx.iter().enumerate() {
        ranks[slot] = rank;
    }
    ranks
}

/// Where a node move is headed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveTarget {
    Existing(usize),
    New { u: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CreatedSlot {
    pub slot: usize,
    pub u: f64,
    pub gid: u32,
    pub gid_is_fresh: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DestroyedSlot {
    pub slot: usize,
    pub u: f64,
    pub gid: u32,
    pub swapped_last: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HistChange {
    pub slot: u32,
    pub is_out: bool,
    pub degree: u64,
    pub old: u64,
    pub new: u64,
}

/// Every counter change a single-node move causes, with old and new
/// values, sufficient to apply the move and to reverse it exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MoveDelta {
    pub node: usize,
    pub from_slot: usize,
    pub to_slot: usize,
    noop: bool,
    pub(crate) created: Option<CreatedSlot>,
    pub(crate) destroyed: Option<DestroyedSlot>,
    /// (to_slot, from_slot, old, new) affinity entries, mid-phase slots.
    pub(crate) e_changes: Vec<(u32, u32, u64, u64)>,
    pub(crate) n_changes: Vec<(u32, u64, u64)>,
    pub(crate) eout_changes: Vec<(u32, u64, u64)>,
    pub(crate) ein_changes: Vec<(u32, u64, u64)>,
    pub(crate) hist_changes: Vec<HistChange>,
    pub(crate) align_old: [u64; 3],
    pub(crate) align_new: [u64; 3],
    pub(crate) b_old: usize,
    pub(crate) b_new: usize,
    // scratch for accumulating raw +/- entry diffs
    diff_scratch: Vec<((u32, u32), i64)>,
}

impl MoveDelta {
    pub fn is_noop(&self) -> bool {
        self.noop
    }

    pub fn num_groups_before(&self) -> usize {
        self.b_old
    }

    pub fn num_groups_after(&self) -> usize {
        self.b_new
    }

    fn clear(&mut self) {
        self.created = None;
        self.destroyed = None;
        self.e_changes.clear();
        self.n_changes.clear();
        self.eout_changes.clear();
        self.ein_changes.clear();
        self.hist_changes.clear();
        self.diff_scratch.clear();
        self.noop = false;
    }

    fn set_noop(&mut self, node: usize, slot: usize) {
        self.node = node;
        self.from_slot = slot;
        self.to_slot = slot;
        self.noop = true;
    }
}

/// Sufficient statistics of a labelled ordered partition of a graph.
#[derive(Debug, Clone)]
pub struct BlockState {
    graph: Arc<DirectedMultigraph>,
    k_out: Vec<u64>,
    k_in: Vec<u64>,
    node_gid: Vec<u32>,
    gid_slot: Vec<u32>, // u32::MAX = free
    slot_gid: Vec<u32>,
    free_gids: Vec<u32>,
    u: Vec<f64>,
    /// e[r][s] = number of edges from group (slot) s to group (slot) r.
    e: Vec<Vec<u64>>,
    n: Vec<u64>,
    e_out: Vec<u64>,
    e_in: Vec<u64>,
    hist_out: Vec<BTreeMap<u64, u64>>,
    hist_in: Vec<BTreeMap<u64, u64>>,
    e_up: u64,
    e_down: u64,
    e_lat: u64,
}

/// Up/down/lateral totals and per-pair alignments.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentStats {
    pub e_up: u64,
    pub e_down: u64,
    pub e_lat: u64,
    /// Overall alignment E+ - E-.
    pub delta: i64,
    /// (higher-rank slot, lower-rank slot, e_hi_lo - e_lo_hi) for every
    /// group pair, higher rank first.
    pub pair_deltas: Vec<(usize, usize, i64)>,
}

impl BlockState {
    /// Compute all sufficient statistics from scratch.
    ///
    /// Panics if the partition does not match the graph.
    pub fn build(graph: Arc<DirectedMultigraph>, partition: &Partition) -> Self {
        let n_nodes = graph.num_nodes();
        assert_eq!(partition.labels.len(), n_nodes, "partition length mismatch");
        let b = partition.num_groups;
        for &l in &partition.labels {
            assert!(l < b, "label {l} out of range for {b} groups");
        }
        let deg = graph.degrees();
        let mut n = vec![0u64; b];
        let mut hist_out = vec![BTreeMap::new(); b];
        let mut hist_in = vec![BTreeMap::new(); b];
        let mut e_out = vec![0u64; b];
        let mut e_in = vec![0u64; b];
        for i in 0..n_nodes {
            let r = partition.labels[i];
            n[r] += 1;
            *hist_out[r].entry(deg.out_degrees[i]).or_insert(0) += 1;
            *hist_in[r].entry(deg.in_degrees[i]).or_insert(0) += 1;
            e_out[r] += deg.out_degrees[i];
            e_in[r] += deg.in_degrees[i];
        }
        assert!(n.iter().all(|&c| c > 0), "every group label must be occupied");
        let mut e = vec![vec![0u64; b]; b];
        for (src, dst, m) in graph.edges() {
            e[partition.labels[dst]][partition.labels[src]] += m;
        }
        let u = partition.order_values.clone();
        assert_eq!(u.len(), b);
        let (mut e_up, mut e_down, mut e_lat) = (0u64, 0u64, 0u64);
        for r in 0..b {
            for s in 0..b {
                let m = e[r][s];
                if r == s {
                    e_lat += m;
                } else if u[r] > u[s] {
                    e_up += m;
                } else {
                    e_down += m;
                }
            }
        }
        BlockState {
            graph,
            k_out: deg.out_degrees,
            k_in: deg.in_degrees,
            node_gid: partition.labels.iter().map(|&l| l as u32).collect(),
            gid_slot: (0..b as u32).collect(),
            slot_gid: (0..b as u32).collect(),
            free_gids: Vec::new(),
            u,
            e,
            n,
            e_out,
            e_in,
            hist_out,
            hist_in,
            e_up,
            e_down,
            e_lat,
        }
    }

    pub fn graph(&self) -> &Arc<DirectedMultigraph> {
        &self.graph
    }

    pub fn num_nodes(&self) -> usize {
        self.node_gid.len()
    }

    pub fn num_groups(&self) -> usize {
        self.slot_gid.len()
    }

    pub fn num_edges(&self) -> u64 {
        self.graph.num_edges()
    }

    pub fn slot_of_node(&self, node: usize) -> usize {
        self.gid_slot[self.node_gid[node] as usize] as usize
    }

    pub fn group_size(&self, slot: usize) -> u64 {
        self.n[slot]
    }

    pub fn group_sizes(&self) -> &[u64] {
        &self.n
    }

    /// Edges from slot `s` to slot `r`.
    pub fn affinity(&self, r: usize, s: usize) -> u64 {
        self.e[r][s]
    }

    /// Symmetric total between two slots: e_rs + e_sr, or 2 e_rr.
    pub fn sym_affinity(&self, r: usize, s: usize) -> u64 {
        if r == s {
            2 * self.e[r][r]
        } else {
            self.e[r][s] + self.e[s][r]
        }
    }

    pub fn group_out_degree(&self, slot: usize) -> u64 {
        self.e_out[slot]
    }

    pub fn group_in_degree(&self, slot: usize) -> u64 {
        self.e_in[slot]
    }

    pub fn degree_histogram_out(&self, slot: usize) -> &BTreeMap<u64, u64> {
        &self.hist_out[slot]
    }

    pub fn degree_histogram_in(&self, slot: usize) -> &BTreeMap<u64, u64> {
        &self.hist_in[slot]
    }

    pub fn order_value(&self, slot: usize) -> f64 {
        self.u[slot]
    }

    pub fn order_values(&self) -> &[f64] {
        &self.u
    }

    pub fn node_out_degree(&self, node: usize) -> u64 {
        self.k_out[node]
    }

    pub fn node_in_degree(&self, node: usize) -> u64 {
        self.k_in[node]
    }

    /// (E+, E-, E0)
    pub fn alignment(&self) -> (u64, u64, u64) {
        (self.e_up, self.e_down, self.e_lat)
    }

    /// Replace all order values; slot order semantics follow the new u.
    pub fn set_order_values(&mut self, u: Vec<f64>) {
        assert_eq!(u.len(), self.num_groups());
        self.u = u;
        let (mut e_up, mut e_down, mut e_lat) = (0u64, 0u64, 0u64);
        let b = self.num_groups();
        for r in 0..b {
            for s in 0..b {
                let m = self.e[r][s];
                if r == s {
                    e_lat += m;
                } else if self.u[r] > self.u[s] {
                    e_up += m;
                } else {
                    e_down += m;
                }
            }
        }
        self.e_up = e_up;
        self.e_down = e_down;
        self.e_lat = e_lat;
    }

    /// Reverse the global order, u -> 1 - u. Swaps E+ and E-.
    pub fn reverse_order(&mut self) {
        let flipped = self.u.iter().map(|v| 1.0 - v).collect();
        self.set_order_values(flipped);
    }

    /// Rank (0-based position in ascending u) of each slot.
    pub fn slot_ranks(&self) -> Vec<usize> {
        slot_ranks(&self.u)
    }

    /// Rank of each node's group.
    pub fn node_ranks(&self) -> Vec<usize> {
        let ranks = self.slot_ranks();
        (0..self.num_nodes()).map(|i| ranks[self.slot_of_node(i)]).collect()
    }

    /// Export the partition; labels are current slot indices.
    pub fn to_partition(&self) -> Partition {
        Partition {
            labels: (0..self.num_nodes()).map(|i| self.slot_of_node(i)).collect(),
            num_groups: self.num_groups(),
            order_values: self.u.clone(),
        }
    }

    pub fn alignment_stats(&self) -> AlignmentStats {
        let b = self.num_groups();
        let mut pair_deltas = Vec::new();
        for a in 0..b {
            for c in (a + 1)..b {
                let (hi, lo) = if self.u[a] > self.u[c] { (a, c) } else { (c, a) };
                pair_deltas.push((hi, lo, self.e[hi][lo] as i64 - self.e[lo][hi] as i64));
            }
        }
        AlignmentStats {
            e_up: self.e_up,
            e_down: self.e_down,
            e_lat: self.e_lat,
            delta: self.e_up as i64 - self.e_down as i64,
            pair_deltas,
        }
    }

    /// Total half-edges at a node (self-loops contribute 2).
    pub fn half_edge_count(&self, node: usize) -> u64 {
        self.k_out[node] + self.k_in[node]
    }

    /// Group slot of the endpoint of the idx-th half-edge of `node`,
    /// counting out-stubs first. `idx < half_edge_count(node)`.
    pub fn half_edge_group(&self, node: usize, idx: u64) -> usize {
        let mut rem = idx;
        for &(j, m) in self.graph.out_edges(node) {
            if rem < m as u64 {
                return self.slot_of_node(j as usize);
            }
            rem -= m as u64;
        }
        for &(j, m) in self.graph.in_edges(node) {
            if rem < m as u64 {
                return self.slot_of_node(j as usize);
            }
            rem -= m as u64;
        }
        panic!("half-edge index out of range");
    }

    /// Number of half-edges of `node` whose opposite endpoint lies in
    /// `slot`, with the node's own membership taken as `node_slot`
    /// (lets callers evaluate the post-move neighborhood).
    pub fn neighbor_weight(&self, node: usize, slot: usize, node_slot: usize) -> u64 {
        let mut w = 0u64;
        for &(j, m) in self.graph.out_edges(node) {
            let js = if j as usize == node { node_slot } else { self.slot_of_node(j as usize) };
            if js == slot {
                w += m as u64;
            }
        }
        for &(j, m) in self.graph.in_edges(node) {
            let js = if j as usize == node { node_slot } else { self.slot_of_node(j as usize) };
            if js == slot {
                w += m as u64;
            }
        }
        w
    }

    /// Order value of a mid-phase slot, resolving a staged created slot.
    fn u_of(&self, slot: usize, created: &Option<CreatedSlot>) -> f64 {
        match created {
            Some(c) if c.slot == slot => c.u,
            _ => self.u[slot],
        }
    }

    fn e_at(&self, r: usize, s: usize, b_current: usize) -> u64 {
        if r >= b_current || s >= b_current {
            0 // staged created slot
        } else {
            self.e[r][s]
        }
    }

    /// Stage a single-node move without mutating the state. Returns
    /// false when the move is a no-op (identity target, or moving the
    /// sole member of the only group to a new group).
    pub fn stage_move(&self, node: usize, target: MoveTarget, delta: &mut MoveDelta) -> bool {
        delta.clear();
        let from = self.slot_of_node(node);
        let b = self.num_groups();
        let (to, created) = match target {
            MoveTarget::Existing(s) => {
                assert!(s < b, "target slot out of range");
                (s, None)
            }
            MoveTarget::New { u } => {
                if self.n[from] == 1 && b == 1 {
                    delta.set_noop(node, from);
                    return false;
                }
                let (gid, fresh) = match self.free_gids.last() {
                    Some(&g) => (g, false),
                    None => (self.gid_slot.len() as u32, true),
                };
                (b, Some(CreatedSlot { slot: b, u, gid, gid_is_fresh: fresh }))
            }
        };
        if to == from {
            delta.set_noop(node, from);
            return false;
        }
        delta.node = node;
        delta.from_slot = from;
        delta.to_slot = to;
        delta.created = created;
        let b_mid = if delta.created.is_some() { b + 1 } else { b };
        let destroys = self.n[from] == 1;
        if destroys {
            delta.destroyed = Some(DestroyedSlot {
                slot: from,
                u: self.u[from],
                gid: self.slot_gid[from],
                swapped_last: b_mid - 1,
            });
        }
        delta.b_old = b;
        delta.b_new = b_mid - usize::from(destroys);

        // Affinity entry diffs. Self-loops are taken from the out list
        // only; the in list would double-count the same edge.
        let (fr, t) = (from as u32, to as u32);
        for &(j, m) in self.graph.out_edges(node) {
            let m = m as i64;
            if j as usize == node {
                delta.diff_scratch.push(((fr, fr), -m));
                delta.diff_scratch.push(((t, t), m));
            } else {
                let js = self.slot_of_node(j as usize) as u32;
                delta.diff_scratch.push(((js, fr), -m));
                delta.diff_scratch.push(((js, t), m));
            }
        }
        for &(j, m) in self.graph.in_edges(node) {
            if j as usize == node {
                continue;
            }
            let m = m as i64;
            let js = self.slot_of_node(j as usize) as u32;
            delta.diff_scratch.push(((fr, js), -m));
            delta.diff_scratch.push(((t, js), m));
        }
        delta.diff_scratch.sort_unstable_by_key(|&(k, _)| k);
        let mut idx = 0;
        while idx < delta.diff_scratch.len() {
            let (key, mut acc) = delta.diff_scratch[idx];
            idx += 1;
            while idx < delta.diff_scratch.len() && delta.diff_scratch[idx].0 == key {
                acc += delta.diff_scratch[idx].1;
                idx += 1;
            }
            if acc != 0 {
                let old = self.e_at(key.0 as usize, key.1 as usize, b);
                let new = (old as i64 + acc) as u64;
                delta.e_changes.push((key.0, key.1, old, new));
            }
        }

        // Group sizes, group degrees, histograms.
        let (ko, ki) = (self.k_out[node], self.k_in[node]);
        let n_to_old = if to < b { self.n[to] } else { 0 };
        let eo_to_old = if to < b { self.e_out[to] } else { 0 };
        let ei_to_old = if to < b { self.e_in[to] } else { 0 };
        delta.n_changes.push((fr, self.n[from], self.n[from] - 1));
        delta.n_changes.push((t, n_to_old, n_to_old + 1));
        delta.eout_changes.push((fr, self.e_out[from], self.e_out[from] - ko));
        delta.eout_changes.push((t, eo_to_old, eo_to_old + ko));
        delta.ein_changes.push((fr, self.e_in[from], self.e_in[from] - ki));
        delta.ein_changes.push((t, ei_to_old, ei_to_old + ki));

        let hf_out = *self.hist_out[from].get(&ko).unwrap_or(&0);
        let hf_in = *self.hist_in[from].get(&ki).unwrap_or(&0);
        let ht_out = if to < b { *self.hist_out[to].get(&ko).unwrap_or(&0) } else { 0 };
        let ht_in = if to < b { *self.hist_in[to].get(&ki).unwrap_or(&0) } else { 0 };
        debug_assert!(hf_out >= 1 && hf_in >= 1);
        delta.hist_changes.push(HistChange { slot: fr, is_out: true, degree: ko, old: hf_out, new: hf_out - 1 });
        delta.hist_changes.push(HistChange { slot: t, is_out: true, degree: ko, old: ht_out, new: ht_out + 1 });
        delta.hist_changes.push(HistChange { slot: fr, is_out: false, degree: ki, old: hf_in, new: hf_in - 1 });
        delta.hist_changes.push(HistChange { slot: t, is_out: false, degree: ki, old: ht_in, new: ht_in + 1 });

        // Alignment counters.
        delta.align_old = [self.e_up, self.e_down, self.e_lat];
        let mut align = [self.e_up as i64, self.e_down as i64, self.e_lat as i64];
        for &(r, s, old, new) in &delta.e_changes {
            let d = new as i64 - old as i64;
            let class = if r == s {
                2
            } else if self.u_of(r as usize, &delta.created) > self.u_of(s as usize, &delta.created) {
                0
            } else {
                1
            };
            align[class] += d;
        }
        delta.align_new = [align[0] as u64, align[1] as u64, align[2] as u64];
        true
    }

    /// Apply a staged move.
    pub fn commit(&mut self, delta: &MoveDelta) {
        if delta.noop {
            return;
        }
        if let Some(c) = &delta.created {
            let gid = if c.gid_is_fresh {
                let g = self.gid_slot.len() as u32;
                self.gid_slot.push(u32::MAX);
                g
            } else {
                self.free_gids.pop().expect("free gid available")
            };
            debug_assert_eq!(gid, c.gid);
            let slot = self.slot_gid.len();
            debug_assert_eq!(slot, c.slot);
            self.slot_gid.push(gid);
            self.gid_slot[gid as usize] = slot as u32;
            self.u.push(c.u);
            self.n.push(0);
            self.e_out.push(0);
            self.e_in.push(0);
            self.hist_out.push(BTreeMap::new());
            self.hist_in.push(BTreeMap::new());
            self.e.push(vec![0; slot]);
            for row in &mut self.e {
                row.push(0);
            }
        }
        self.node_gid[delta.node] = self.slot_gid[delta.to_slot];
        for &(r, s, _old, new) in &delta.e_changes {
            self.e[r as usize][s as usize] = new;
        }
        for &(slot, _old, new) in &delta.n_changes {
            self.n[slot as usize] = new;
        }
        for &(slot, _old, new) in &delta.eout_changes {
            self.e_out[slot as usize] = new;
        }
        for &(slot, _old, new) in &delta.ein_changes {
            self.e_in[slot as usize] = new;
        }
        for hc in &delta.hist_changes {
            let map = if hc.is_out { &mut self.hist_out[hc.slot as usize] } else { &mut self.hist_in[hc.slot as usize] };
            if hc.new == 0 {
                map.remove(&hc.degree);
            } else {
                map.insert(hc.degree, hc.new);
            }
        }
        self.e_up = delta.align_new[0];
        self.e_down = delta.align_new[1];
        self.e_lat = delta.align_new[2];
        if let Some(d) = &delta.destroyed {
            let last = self.slot_gid.len() - 1;
            debug_assert_eq!(last, d.swapped_last);
            debug_assert_eq!(self.n[d.slot], 0);
            let gid = self.slot_gid[d.slot];
            debug_assert_eq!(gid, d.gid);
            self.gid_slot[gid as usize] = u32::MAX;
            self.free_gids.push(gid);
            self.slot_gid.swap_remove(d.slot);
            if d.slot < last {
                self.gid_slot[self.slot_gid[d.slot] as usize] = d.slot as u32;
            }
            self.u.swap_remove(d.slot);
            self.n.swap_remove(d.slot);
            self.e_out.swap_remove(d.slot);
            self.e_in.swap_remove(d.slot);
            self.hist_out.swap_remove(d.slot);
            self.hist_in.swap_remove(d.slot);
            self.e.swap_remove(d.slot);
            for row in &mut self.e {
                row.swap_remove(d.slot);
            }
        }
    }

    /// Stage and, if the move is not a no-op, commit in one call.
    pub fn apply_move(&mut self, node: usize, target: MoveTarget) -> MoveDelta {
        let mut delta = MoveDelta::default();
        if self.stage_move(node, target, &mut delta) {
            self.commit(&delta);
        }
        delta
    }

    /// Exactly undo a committed move.
    pub fn revert(&mut self, delta: &MoveDelta) {
        if delta.noop {
            return;
        }
        if let Some(d) = &delta.destroyed {
            let last = self.slot_gid.len();
            debug_assert_eq!(last, d.swapped_last);
            let gid = self.free_gids.pop().expect("gid stack in sync");
            debug_assert_eq!(gid, d.gid);
            // push a zeroed slot, swap it down to d.slot
            self.slot_gid.push(gid);
            self.u.push(0.0);
            self.n.push(0);
            self.e_out.push(0);
            self.e_in.push(0);
            self.hist_out.push(BTreeMap::new());
            self.hist_in.push(BTreeMap::new());
            self.e.push(vec![0; last]);
            for row in &mut self.e {
                row.push(0);
            }
            if d.slot < last {
                self.slot_gid.swap(d.slot, last);
                self.u.swap(d.slot, last);
                self.n.swap(d.slot, last);
                self.e_out.swap(d.slot, last);
                self.e_in.swap(d.slot, last);
                self.hist_out.swap(d.slot, last);
                self.hist_in.swap(d.slot, last);
                self.e.swap(d.slot, last);
                for row in &mut self.e {
                    row.swap(d.slot, last);
                }
                self.gid_slot[self.slot_gid[last] as usize] = last as u32;
            }
            self.u[d.slot] = d.u;
            self.gid_slot[gid as usize] = d.slot as u32;
        }
        for &(r, s, old, _new) in &delta.e_changes {
            self.e[r as usize][s as usize] = old;
        }
        for &(slot, old, _new) in &delta.n_changes {
            self.n[slot as usize] = old;
        }
        for &(slot, old, _new) in &delta.eout_changes {
            self.e_out[slot as usize] = old;
        }
        for &(slot, old, _new) in &delta.ein_changes {
            self.e_in[slot as usize] = old;
        }
        for hc in &delta.hist_changes {
            let map = if hc.is_out { &mut self.hist_out[hc.slot as usize] } else { &mut self.hist_in[hc.slot as usize] };
            if hc.old == 0 {
                map.remove(&hc.degree);
            } else {
                map.insert(hc.degree, hc.old);
            }
        }
        self.e_up = delta.align_old[0];
        self.e_down = delta.align_old[1];
        self.e_lat = delta.align_old[2];
        self.node_gid[delta.node] = self.slot_gid[delta.from_slot];
        if let Some(c) = &delta.created {
            let slot = self.slot_gid.len() - 1;
            debug_assert_eq!(slot, c.slot);
            debug_assert_eq!(self.n[slot], 0);
            let gid = self.slot_gid[slot];
            debug_assert_eq!(gid, c.gid);
            self.slot_gid.pop();
            if c.gid_is_fresh {
                debug_assert_eq!(gid as usize, self.gid_slot.len() - 1);
                self.gid_slot.pop();
            } else {
                self.gid_slot[gid as usize] = u32::MAX;
                self.free_gids.push(gid);
            }
            self.u.pop();
            self.n.pop();
            self.e_out.pop();
            self.e_in.pop();
            self.hist_out.pop();
            self.hist_in.pop();
            self.e.pop();
            for row in &mut self.e {
                row.pop();
            }
        }
    }

    /// Structural equality of every counter and bookkeeping field.
    pub fn identical_to(&self, other: &BlockState) -> bool {
        self.k_out == other.k_out
            && self.k_in == other.k_in
            && self.node_gid == other.node_gid
            && self.gid_slot == other.gid_slot
            && self.slot_gid == other.slot_gid
            && self.free_gids == other.free_gids
            && self.u == other.u
            && self.e == other.e
            && self.n == other.n
            && self.e_out == other.e_out
            && self.e_in == other.e_in
            && self.hist_out == other.hist_out
            && self.hist_in == other.hist_in
            && (self.e_up, self.e_down, self.e_lat) == (other.e_up, other.e_down, other.e_lat)
    }

    /// Semantic equality: same partition content and counters, ignoring
    /// internal group-id bookkeeping.
    pub fn equivalent_to(&self, other: &BlockState) -> bool {
        self.num_groups() == other.num_groups()
            && (0..self.num_nodes()).all(|i| self.slot_of_node(i) == other.slot_of_node(i))
            && self.u == other.u
            && self.e == other.e
            && self.n == other.n
            && self.e_out == other.e_out
            && self.e_in == other.e_in
            && self.hist_out == other.hist_out
            && self.hist_in == other.hist_in
            && (self.e_up, self.e_down, self.e_lat) == (other.e_up, other.e_down, other.e_lat)
    }

    /// Debug check of internal consistency against a fresh rebuild.
    pub fn consistent_with_rebuild(&self) -> bool {
        let rebuilt = BlockState::build(Arc::clone(&self.graph), &self.to_partition());
        self.equivalent_to(&rebuilt)
    }
}
