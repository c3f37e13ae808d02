//! Exact log-space evaluation of the model likelihood and priors, their
//! composition into the description length per model variant, and exact
//! incremental deltas for single-node moves.
//!
//! Everything is in bits (base-2). The description length of a graph A
//! under a partition b is
//!
//!   sigma = -log2 P(A | k, e, b) - log2 P(e) - log2 P(k) - log2 P(b)
//!
//! where the affinity prior P(e) is either order-aware or uniform, and
//! the degree prior P(k) is either degree-corrected or not, giving the
//! four model variants.

use crate::combin::{log2_binomial, log2_factorial, log2_multiset, DlTables, QCapExceeded};
use crate::graph::DirectedMultigraph;
use crate::state::{BlockState, MoveDelta, Partition};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Degree-correction flag crossed with the ordered-prior flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelVariant {
    pub degree_corrected: bool,
    pub ordered: bool,
}

impl ModelVariant {
    pub const SBM: ModelVariant = ModelVariant { degree_corrected: false, ordered: false };
    pub const DC_SBM: ModelVariant = ModelVariant { degree_corrected: true, ordered: false };
    pub const OSBM: ModelVariant = ModelVariant { degree_corrected: false, ordered: true };
    pub const DC_OSBM: ModelVariant = ModelVariant { degree_corrected: true, ordered: true };

    pub const ALL: [ModelVariant; 4] =
        [Self::SBM, Self::DC_SBM, Self::OSBM, Self::DC_OSBM];

    pub fn name(&self) -> &'static str {
        match (self.degree_corrected, self.ordered) {
            (false, false) => "sbm",
            (true, false) => "dc-sbm",
            (false, true) => "osbm",
            (true, true) => "dc-osbm",
        }
    }

    pub fn from_name(name: &str) -> Option<ModelVariant> {
        match name {
            "sbm" => Some(Self::SBM),
            "dc-sbm" => Some(Self::DC_SBM),
            "osbm" => Some(Self::OSBM),
            "dc-osbm" => Some(Self::DC_OSBM),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Description length split into its four terms, all in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlBreakdown {
    /// -log2 P(A | k, e, b)
    pub likelihood: f64,
    /// -log2 P(e), the affinity prior term Sigma(e)
    pub affinity: f64,
    /// -log2 P(k | e, b)
    pub degrees: f64,
    /// -log2 P(b)
    pub partition: f64,
    pub total: f64,
}

pub type DlResult<T> = Result<T, QCapExceeded>;

/// log2 P(A | k, e, b) of the microcanonical directed model:
/// prod_rs e_rs! prod_i k_i_out! k_i_in! / (prod_ij A_ij! prod_r e_r_out! e_r_in!)
pub fn log2_likelihood(state: &BlockState) -> f64 {
    let b = state.num_groups();
    let mut ll = 0.0;
    for r in 0..b {
        for s in 0..b {
            ll += log2_factorial(state.affinity(r, s));
        }
        ll -= log2_factorial(state.group_out_degree(r));
        ll -= log2_factorial(state.group_in_degree(r));
    }
    for i in 0..state.num_nodes() {
        ll += log2_factorial(state.node_out_degree(i));
        ll += log2_factorial(state.node_in_degree(i));
    }
    for (_, _, m) in state.graph().edges() {
        ll -= log2_factorial(m);
    }
    ll
}

/// log2 P(k | e, b) for the degree-corrected model: per group, a uniform
/// histogram-conditioned degree assignment times a uniform histogram
/// drawn from the q(m, n) restricted partitions.
pub fn log2_prior_degrees_dc(state: &BlockState, tables: &DlTables) -> DlResult<f64> {
    let mut lp = 0.0;
    for r in 0..state.num_groups() {
        let n_r = state.group_size(r);
        for (_, &cnt) in state.degree_histogram_out(r) {
            lp += log2_factorial(cnt);
        }
        for (_, &cnt) in state.degree_histogram_in(r) {
            lp += log2_factorial(cnt);
        }
        lp -= 2.0 * log2_factorial(n_r);
        lp -= tables.q.log2_q(state.group_out_degree(r), n_r)?;
        lp -= tables.q.log2_q(state.group_in_degree(r), n_r)?;
    }
    Ok(lp)
}

/// log2 P(k | e, b) for the non-degree-corrected model:
/// prod_r e_r_out! / (n_r^{e_r_out} prod_{i in r} k_i_out!) x (in version).
pub fn log2_prior_degrees_ndc(state: &BlockState) -> f64 {
    let mut lp = 0.0;
    for r in 0..state.num_groups() {
        lp += ndc_group_term(state.group_size(r), state.group_out_degree(r));
        lp += ndc_group_term(state.group_size(r), state.group_in_degree(r));
    }
    for i in 0..state.num_nodes() {
        lp -= log2_factorial(state.node_out_degree(i));
        lp -= log2_factorial(state.node_in_degree(i));
    }
    lp
}

/// Group-local part of the NDC prior: log2 [e! / n^e], leaving out the
/// per-node k! factors which are invariant under node moves.
#[inline]
fn ndc_group_term(n_r: u64, e_r: u64) -> f64 {
    if e_r == 0 {
        return 0.0;
    }
    log2_factorial(e_r) - e_r as f64 * (n_r as f64).log2()
}

/// log2 P(b) = log2 [ (prod_r n_r! / N!) C(N-1, B-1)^-1 (1/N) ].
pub fn log2_prior_partition(state: &BlockState) -> f64 {
    let n = state.num_nodes() as u64;
    assert!(n >= 1, "partition prior needs at least one node");
    let b = state.num_groups() as u64;
    let mut lp = 0.0;
    for r in 0..state.num_groups() {
        lp += log2_factorial(state.group_size(r));
    }
    lp - log2_factorial(n) - log2_binomial(n - 1, b - 1) - (n as f64).log2()
}

/// log2 P(e | E, B) under the uniform (order-blind) prior.
pub fn log2_prior_affinity_uniform(state: &BlockState) -> f64 {
    log2_prior_affinity_uniform_counts(state.num_groups() as u64, state.num_edges())
}

/// Uniform affinity prior from raw counts: -log2 multiset(B^2, E).
pub fn log2_prior_affinity_uniform_counts(b: u64, e_total: u64) -> f64 {
    -log2_multiset(b * b, e_total)
}

/// log2 P(e | E, B) under the ordered prior.
pub fn log2_prior_affinity_ordered(state: &BlockState) -> f64 {
    let b = state.num_groups();
    let mut pair_term = 0.0;
    for a in 0..b {
        for c in (a + 1)..b {
            let (hi, lo) =
                if state.order_value(a) > state.order_value(c) { (a, c) } else { (c, a) };
            let up = state.affinity(hi, lo);
            let down = state.affinity(lo, hi);
            pair_term += log2_binomial(up + down, down);
        }
    }
    let (e_up, e_down, _) = state.alignment();
    ordered_affinity_tail(pair_term, e_up, e_down, b as u64, state.num_edges())
}

/// Ordered affinity prior from per-pair (upstream, downstream) counts
/// plus the lateral total; used by enumeration oracles.
pub fn log2_prior_affinity_ordered_counts(
    pair_up_down: &[(u64, u64)],
    e_lat: u64,
    b: u64,
    e_total: u64,
) -> f64 {
    let mut pair_term = 0.0;
    let (mut e_up, mut e_down) = (0u64, 0u64);
    for &(up, down) in pair_up_down {
        pair_term += log2_binomial(up + down, down);
        e_up += up;
        e_down += down;
    }
    debug_assert_eq!(e_up + e_down + e_lat, e_total);
    ordered_affinity_tail(pair_term, e_up, e_down, b, e_total)
}

fn ordered_affinity_tail(pair_term: f64, e_up: u64, e_down: u64, b: u64, e_total: u64) -> f64 {
    let m = e_up + e_down;
    pair_term - log2_binomial(m, e_up) - ((m + 1) as f64).log2()
        - log2_multiset(b * (b + 1) / 2, e_total)
}

fn affinity_term(state: &BlockState, variant: ModelVariant) -> f64 {
    if variant.ordered {
        log2_prior_affinity_ordered(state)
    } else {
        log2_prior_affinity_uniform(state)
    }
}

fn degree_term(state: &BlockState, variant: ModelVariant, tables: &DlTables) -> DlResult<f64> {
    if variant.degree_corrected {
        log2_prior_degrees_dc(state, tables)
    } else {
        Ok(log2_prior_degrees_ndc(state))
    }
}

/// Description length of a prebuilt state, in bits, with breakdown.
pub fn description_length_state(
    state: &BlockState,
    variant: ModelVariant,
    tables: &DlTables,
) -> DlResult<DlBreakdown> {
    // + 0.0 turns an exact -0.0 term into +0.0
    let likelihood = -log2_likelihood(state) + 0.0;
    let affinity = -affinity_term(state, variant) + 0.0;
    let degrees = -degree_term(state, variant, tables)? + 0.0;
    let partition = -log2_prior_partition(state) + 0.0;
    Ok(DlBreakdown {
        likelihood,
        affinity,
        degrees,
        partition,
        total: likelihood + affinity + degrees + partition,
    })
}

/// Description length of (graph, partition) under a model variant.
pub fn description_length(
    graph: &Arc<DirectedMultigraph>,
    partition: &Partition,
    variant: ModelVariant,
    tables: &DlTables,
) -> DlResult<DlBreakdown> {
    let state = BlockState::build(Arc::clone(graph), partition);
    description_length_state(&state, variant, tables)
}

/// Exact change in total description length caused by a staged move,
/// evaluated against the pre-commit state in O(k_i + B).
pub fn delta_description_length(
    state: &BlockState,
    delta: &MoveDelta,
    variant: ModelVariant,
    tables: &DlTables,
) -> DlResult<f64> {
    if delta.is_noop() {
        return Ok(0.0);
    }
    let mut d = delta_likelihood_bits(delta);
    d += if variant.ordered {
        delta_affinity_ordered_bits(state, delta)
    } else {
        delta_affinity_uniform_bits(state, delta)
    };
    d += if variant.degree_corrected {
        delta_degrees_dc_bits(delta, tables)?
    } else {
        delta_degrees_ndc_bits(delta)
    };
    d += delta_partition_bits(state, delta);
    Ok(d)
}

fn delta_likelihood_bits(delta: &MoveDelta) -> f64 {
    // bits = -(sum_rs lf(e_rs)) + sum_r lf(e_out_r) + lf(e_in_r) + const
    let mut d = 0.0;
    for &(_, _, old, new) in &delta.e_changes {
        d -= log2_factorial(new) - log2_factorial(old);
    }
    for &(_, old, new) in &delta.eout_changes {
        d += log2_factorial(new) - log2_factorial(old);
    }
    for &(_, old, new) in &delta.ein_changes {
        d += log2_factorial(new) - log2_factorial(old);
    }
    d
}

fn delta_affinity_uniform_bits(state: &BlockState, delta: &MoveDelta) -> f64 {
    let e_total = state.num_edges();
    let (b_old, b_new) = (delta.num_groups_before() as u64, delta.num_groups_after() as u64);
    if b_old == b_new {
        return 0.0;
    }
    log2_multiset(b_new * b_new, e_total) - log2_multiset(b_old * b_old, e_total)
}

fn delta_affinity_ordered_bits(state: &BlockState, delta: &MoveDelta) -> f64 {
    let e_total = state.num_edges();
    let b_old = delta.num_groups_before();
    // Order value of a mid-phase slot: the created slot sits at b_old.
    let u_of = |slot: usize| -> f64 {
        if slot < b_old {
            state.order_value(slot)
        } else {
            delta.created.as_ref().expect("slot beyond B must be the created group").u
        }
    };
    // e_changes is sorted by (to, from); binary-search for a direction,
    // falling back to the unchanged state value.
    let lookup = |to: usize, from: usize| -> (u64, u64) {
        let key = (to as u32, from as u32);
        match delta.e_changes.binary_search_by_key(&key, |&(r, s, _, _)| (r, s)) {
            Ok(pos) => (delta.e_changes[pos].2, delta.e_changes[pos].3),
            Err(_) => {
                let v = if to >= b_old || from >= b_old { 0 } else { state.affinity(to, from) };
                (v, v)
            }
        }
    };
    // Pair binomial terms for every unordered pair touched by the move.
    let mut pairs: Vec<(usize, usize)> = delta
        .e_changes
        .iter()
        .filter(|&&(r, s, _, _)| r != s)
        .map(|&(r, s, _, _)| (r.max(s) as usize, r.min(s) as usize))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let mut d = 0.0;
    for &(a, c) in &pairs {
        let (hi, lo) = if u_of(a) > u_of(c) { (a, c) } else { (c, a) };
        let (up_old, up_new) = lookup(hi, lo);
        let (down_old, down_new) = lookup(lo, hi);
        d -= log2_binomial(up_new + down_new, down_new)
            - log2_binomial(up_old + down_old, down_old);
    }
    // Global alignment and matrix-count terms.
    let [up_o, down_o, _] = delta.align_old;
    let [up_n, down_n, _] = delta.align_new;
    let (mo, mn) = (up_o + down_o, up_n + down_n);
    d += log2_binomial(mn, up_n) - log2_binomial(mo, up_o);
    d += ((mn + 1) as f64).log2() - ((mo + 1) as f64).log2();
    let (b_old, b_new) = (b_old as u64, delta.num_groups_after() as u64);
    if b_old != b_new {
        d += log2_multiset(b_new * (b_new + 1) / 2, e_total)
            - log2_multiset(b_old * (b_old + 1) / 2, e_total);
    }
    d
}

/// (n_old, n_new, e_out_old, e_out_new, e_in_old, e_in_new) for the two
/// groups a move touches.
fn group_degree_records(delta: &MoveDelta) -> impl Iterator<Item = (u64, u64, u64, u64, u64, u64)> + '_ {
    delta.n_changes.iter().zip(&delta.eout_changes).zip(&delta.ein_changes).map(
        |((&(ns, n_old, n_new), &(es, eo_old, eo_new)), &(is, ei_old, ei_new))| {
            debug_assert!(ns == es && es == is);
            (n_old, n_new, eo_old, eo_new, ei_old, ei_new)
        },
    )
}

fn delta_degrees_dc_bits(delta: &MoveDelta, tables: &DlTables) -> DlResult<f64> {
    // bits = -log2 P; group-local histogram, n_r!, and q terms.
    let mut lp = 0.0;
    for hc in &delta.hist_changes {
        lp += log2_factorial(hc.new) - log2_factorial(hc.old);
    }
    for &(_, old, new) in &delta.n_changes {
        lp -= 2.0 * (log2_factorial(new) - log2_factorial(old));
    }
    for (n_old, n_new, eo_old, eo_new, ei_old, ei_new) in group_degree_records(delta) {
        lp -= tables.q.log2_q(eo_new, n_new)? - tables.q.log2_q(eo_old, n_old)?;
        lp -= tables.q.log2_q(ei_new, n_new)? - tables.q.log2_q(ei_old, n_old)?;
    }
    Ok(-lp)
}

fn delta_degrees_ndc_bits(delta: &MoveDelta) -> f64 {
    // Per-node k! factors cancel; only e!/n^e group terms move.
    let mut lp = 0.0;
    for (n_old, n_new, eo_old, eo_new, ei_old, ei_new) in group_degree_records(delta) {
        lp += ndc_group_term(n_new, eo_new) - ndc_group_term(n_old, eo_old);
        lp += ndc_group_term(n_new, ei_new) - ndc_group_term(n_old, ei_old);
    }
    -lp
}

fn delta_partition_bits(state: &BlockState, delta: &MoveDelta) -> f64 {
    let n = state.num_nodes() as u64;
    let mut lp = 0.0;
    for &(_, old, new) in &delta.n_changes {
        lp += log2_factorial(new) - log2_factorial(old);
    }
    let (b_old, b_new) = (delta.num_groups_before() as u64, delta.num_groups_after() as u64);
    if b_old != b_new {
        lp -= log2_binomial(n - 1, b_new - 1) - log2_binomial(n - 1, b_old - 1);
    }
    -lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_edge_list, IdPolicy};
    use crate::state::MoveTarget;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn graph(text: &str) -> Arc<DirectedMultigraph> {
        Arc::new(load_edge_list(text, IdPolicy::Integer).unwrap().0)
    }

    fn tables() -> DlTables {
        DlTables::default()
    }

    #[test]
    fn likelihood_single_self_loop_is_certain() {
        let g = graph("0 0\n");
        let s = BlockState::build(g, &Partition::single_group(1));
        assert!(log2_likelihood(&s).abs() < 1e-12);
    }

    #[test]
    fn likelihood_two_cycle_is_half() {
        let g = graph("0 1\n1 0\n");
        let s = BlockState::build(g, &Partition::single_group(2));
        assert!((log2_likelihood(&s) - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn ndc_prior_hand_values() {
        // n_r = 2, e_out = 2, out-degrees (1,1): out factor 2!/(2^2) = 1/2.
        // In this graph in-degrees are also (1,1), so the in factor is
        // another 1/2 and all k! factors are 0 bits.
        let g = graph("0 1\n1 0\n");
        let s = BlockState::build(g, &Partition::single_group(2));
        assert!((log2_prior_degrees_ndc(&s) - (-2.0)).abs() < 1e-12);

        // degrees (2,0): 2!/(2^2 * 2! * 0!) per direction.
        let g = graph("0 1 2\n");
        let s = BlockState::build(g, &Partition::single_group(2));
        let expect = {
            // out: e!=2 -> lf(2)=1; n^e: 2^2 -> 2 bits; k!: lf(2)+lf(0)=1
            let out = 1.0 - 2.0 - 1.0;
            let inn = 1.0 - 2.0 - 1.0;
            out + inn
        };
        assert!((log2_prior_degrees_ndc(&s) - expect).abs() < 1e-12);
    }

    #[test]
    fn ndc_prior_single_node_group_is_free() {
        let g = graph("0 0 3\n");
        let s = BlockState::build(g, &Partition::single_group(1));
        // e!/ (1^e k!) with the single k = e: exactly 1.
        assert!(log2_prior_degrees_ndc(&s).abs() < 1e-12);
    }

    #[test]
    fn dc_prior_hand_values() {
        let t = tables();
        // group with n_r = 1: histogram term 0, q(m, 1) = 1.
        let g = graph("0 0 4\n");
        let s = BlockState::build(g, &Partition::single_group(1));
        assert!(log2_prior_degrees_dc(&s, &t).unwrap().abs() < 1e-12);

        // n_r = 2, e_out = 4, distinct out-degrees (3, 1):
        // eta term log2(1!1!/2!) = -1 bit, q(4,2) = 3.
        let g = graph("0 1 3\n1 0 1\n");
        let s = BlockState::build(g, &Partition::single_group(2));
        // out: -1 - log2 3 ; in: degrees (1,3) -> -1 - log2 3
        let expect = 2.0 * (-1.0 - 3.0f64.log2());
        assert!((log2_prior_degrees_dc(&s, &t).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn partition_prior_hand_values() {
        // N=3, n=(2,1): (2! 1!/3!) / C(2,1) / 3 = 1/18
        let g = graph("0 1\n1 2\n");
        let p = Partition::new(vec![0, 0, 1], vec![0.2, 0.8]).unwrap();
        let s = BlockState::build(g, &p);
        assert!((log2_prior_partition(&s) - (1.0f64 / 18.0).log2()).abs() < 1e-12);

        // N=1, B=1 -> probability 1
        let g = graph("0 0\n");
        let s = BlockState::build(g, &Partition::single_group(1));
        assert!(log2_prior_partition(&s).abs() < 1e-12);

        // N=4, B=1 -> 1/4
        let g = graph("0 1\n1 2\n2 3\n");
        let s = BlockState::build(g, &Partition::single_group(4));
        assert!((log2_prior_partition(&s) - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn uniform_affinity_hand_values() {
        assert!((log2_prior_affinity_uniform_counts(2, 2) - (1.0f64 / 10.0).log2()).abs() < 1e-12);
        assert!(log2_prior_affinity_uniform_counts(1, 77).abs() < 1e-12);
        assert!((log2_prior_affinity_uniform_counts(2, 1) - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn ordered_affinity_hand_values() {
        // B=2, E=2, both edges upstream: 1 * 1/C(2,2)... = 1/18
        let lp = log2_prior_affinity_ordered_counts(&[(2, 0)], 0, 2, 2);
        assert!((lp - (1.0f64 / 18.0).log2()).abs() < 1e-12);
        // B=1: no pairs, all lateral -> probability 1
        let lp = log2_prior_affinity_ordered_counts(&[], 5, 1, 5);
        assert!(lp.abs() < 1e-12);
    }

    #[test]
    fn ordered_affinity_state_matches_counts() {
        let g = graph("0 1 2\n1 0\n2 1\n0 0\n");
        let p = Partition::new(vec![0, 1, 2], vec![0.9, 0.5, 0.1]).unwrap();
        let s = BlockState::build(g, &p);
        let stats = s.alignment_stats();
        let pairs: Vec<(u64, u64)> = stats
            .pair_deltas
            .iter()
            .map(|&(hi, lo, _)| (s.affinity(hi, lo), s.affinity(lo, hi)))
            .collect();
        let from_counts =
            log2_prior_affinity_ordered_counts(&pairs, stats.e_lat, 3, s.num_edges());
        assert!((log2_prior_affinity_ordered(&s) - from_counts).abs() < 1e-12);
    }

    #[test]
    fn breakdown_total_is_sum_of_terms() {
        let g = graph("0 1\n1 2\n2 0\n0 0\n");
        let t = tables();
        for variant in ModelVariant::ALL {
            let bd = description_length(&g, &Partition::single_group(3), variant, &t).unwrap();
            assert!(
                (bd.total - (bd.likelihood + bd.affinity + bd.degrees + bd.partition)).abs()
                    < 1e-9
            );
            assert!(bd.total.is_finite());
        }
    }

    #[test]
    fn ordered_and_unordered_share_all_but_affinity() {
        let g = graph("0 1 2\n1 2\n2 0\n1 0\n");
        let p = Partition::new(vec![0, 1, 1], vec![0.3, 0.7]).unwrap();
        let t = tables();
        let sbm = description_length(&g, &p, ModelVariant::SBM, &t).unwrap();
        let osbm = description_length(&g, &p, ModelVariant::OSBM, &t).unwrap();
        assert_eq!(sbm.likelihood, osbm.likelihood);
        assert_eq!(sbm.degrees, osbm.degrees);
        assert_eq!(sbm.partition, osbm.partition);
        let dc = description_length(&g, &p, ModelVariant::DC_SBM, &t).unwrap();
        let dco = description_length(&g, &p, ModelVariant::DC_OSBM, &t).unwrap();
        assert_eq!(dc.likelihood, dco.likelihood);
        assert_eq!(dc.degrees, dco.degrees);
        assert_eq!(dc.partition, dco.partition);
    }

    #[test]
    fn unordered_invariant_under_label_permutation() {
        let g = graph("0 1\n1 2\n2 0\n2 3 2\n3 0\n");
        let p = Partition::new(vec![0, 1, 1, 2], vec![0.2, 0.5, 0.8]).unwrap();
        // permutation mu = (2, 0, 1)
        let perm = [2usize, 0, 1];
        let q = Partition::new(
            p.labels.iter().map(|&b| perm[b]).collect(),
            vec![0.5, 0.8, 0.2],
        )
        .unwrap();
        let t = tables();
        for variant in [ModelVariant::SBM, ModelVariant::DC_SBM] {
            let a = description_length(&g, &p, variant, &t).unwrap().total;
            let b = description_length(&g, &q, variant, &t).unwrap().total;
            assert!((a - b).abs() < 1e-9, "{variant}: {a} vs {b}");
        }
    }

    #[test]
    fn ordered_invariant_under_rank_reversal() {
        let g = graph("0 1\n1 2\n2 0\n2 3 2\n3 0\n0 0\n");
        let p = Partition::new(vec![0, 1, 1, 2], vec![0.2, 0.5, 0.8]).unwrap();
        let t = tables();
        for variant in [ModelVariant::OSBM, ModelVariant::DC_OSBM] {
            let a = description_length(&g, &p, variant, &t).unwrap().total;
            let b = description_length(&g, &p.reversed(), variant, &t).unwrap().total;
            assert!((a - b).abs() < 1e-9, "{variant}: {a} vs {b}");
        }
    }

    #[test]
    fn delta_matches_recompute_on_random_moves() {
        let mut rng = StdRng::seed_from_u64(7);
        let t = tables();
        for _ in 0..20 {
            let n = rng.random_range(2..10usize);
            let mut edges = Vec::new();
            for _ in 0..rng.random_range(1..16usize) {
                edges.push((
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                    rng.random_range(1..3u64),
                ));
            }
            let g = Arc::new(DirectedMultigraph::from_edges(n, &edges));
            let mut state = BlockState::build(Arc::clone(&g), &Partition::single_group(n));
            let mut delta = MoveDelta::default();
            for variant in ModelVariant::ALL {
                for _ in 0..50 {
                    let node = rng.random_range(0..n);
                    let b = state.num_groups();
                    let target = if rng.random_bool(0.3) {
                        MoveTarget::New { u: rng.random() }
                    } else {
                        MoveTarget::Existing(rng.random_range(0..b))
                    };
                    let before = description_length_state(&state, variant, &t).unwrap().total;
                    if !state.stage_move(node, target, &mut delta) {
                        continue;
                    }
                    let d = delta_description_length(&state, &delta, variant, &t).unwrap();
                    state.commit(&delta);
                    let after = description_length_state(&state, variant, &t).unwrap().total;
                    assert!(
                        (after - before - d).abs() < 1e-8,
                        "{variant}: delta {d} but recompute says {}",
                        after - before
                    );
                }
            }
        }
    }

    #[test]
    fn identity_move_delta_is_zero() {
        let g = graph("0 1\n1 0\n");
        let state = BlockState::build(g, &Partition::single_group(2));
        let mut delta = MoveDelta::default();
        let t = tables();
        assert!(!state.stage_move(0, MoveTarget::Existing(0), &mut delta));
        for variant in ModelVariant::ALL {
            assert_eq!(delta_description_length(&state, &delta, variant, &t).unwrap(), 0.0);
        }
    }
}
