//! Directed multigraph storage, degree bookkeeping, and edge-list I/O.
//!
//! Internally the adjacency follows the convention that `a(i, j)` is the
//! number of edges from `j` to `i`; the edge-list text format stays the
//! conventional `source target [multiplicity]`. The mapping between the
//! two happens once, here, so the formula modules never have to think
//! about edge direction again.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

/// A directed multigraph with integer edge multiplicities.
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedMultigraph {
    num_nodes: usize,
    // out_adj[i] = sorted [(j, multiplicity)] for edges i -> j
    out_adj: Vec<Vec<(u32, u32)>>,
    // in_adj[i] = sorted [(j, multiplicity)] for edges j -> i
    in_adj: Vec<Vec<(u32, u32)>>,
    num_edges: u64,
}

/// Out- and in-degree sequences; a self-loop adds 1 to both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    pub out_degrees: Vec<u64>,
    pub in_degrees: Vec<u64>,
}

/// How node tokens in an edge list map to dense indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdPolicy {
    /// Arbitrary tokens, densified in first-seen order.
    FirstSeen,
    /// Tokens must be non-negative integers and are used directly;
    /// unreferenced indices below the maximum become isolated nodes.
    Integer,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EdgeListError {
    #[error("line {line}: expected 'source target [multiplicity]', got {got:?}")]
    Malformed { line: usize, got: String },
    #[error("line {line}: multiplicity must be a positive integer, got {got:?}")]
    BadMultiplicity { line: usize, got: String },
    #[error("line {line}: node id {got:?} is not a non-negative integer")]
    BadNodeId { line: usize, got: String },
}

impl DirectedMultigraph {
    /// Build from (source, target, multiplicity) triples; duplicates sum.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize, u64)]) -> Self {
        let mut agg: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for &(s, t, m) in edges {
            assert!(s < num_nodes && t < num_nodes, "edge endpoint out of range");
            assert!(m >= 1, "multiplicity must be >= 1");
            *agg.entry((s as u32, t as u32)).or_insert(0) += m;
        }
        let mut out_adj = vec![Vec::new(); num_nodes];
        let mut in_adj = vec![Vec::new(); num_nodes];
        let mut num_edges = 0u64;
        for (&(s, t), &m) in &agg {
            let m32 = u32::try_from(m).expect("edge multiplicity overflow");
            out_adj[s as usize].push((t, m32));
            in_adj[t as usize].push((s, m32));
            num_edges += m;
        }
        for adj in &mut in_adj {
            adj.sort_unstable();
        }
        DirectedMultigraph { num_nodes, out_adj, in_adj, num_edges }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Total edge count E; self-loops count once each.
    pub fn num_edges(&self) -> u64 {
        self.num_edges
    }

    /// Multiplicity of edges from `j` to `i` (adjacency convention A_ij).
    pub fn a(&self, i: usize, j: usize) -> u64 {
        match self.out_adj[j].binary_search_by_key(&(i as u32), |&(t, _)| t) {
            Ok(pos) => self.out_adj[j][pos].1 as u64,
            Err(_) => 0,
        }
    }

    /// Edges leaving `i`, as sorted (target, multiplicity) pairs.
    pub fn out_edges(&self, i: usize) -> &[(u32, u32)] {
        &self.out_adj[i]
    }

    /// Edges entering `i`, as sorted (source, multiplicity) pairs.
    pub fn in_edges(&self, i: usize) -> &[(u32, u32)] {
        &self.in_adj[i]
    }

    /// All stored (source, target, multiplicity) triples, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.out_adj.iter().enumerate().flat_map(|(s, adj)| {
            adj.iter().map(move |&(t, m)| (s, t as usize, m as u64))
        })
    }

    pub fn degrees(&self) -> DegreeSequence {
        let mut out_degrees = vec![0u64; self.num_nodes];
        let mut in_degrees = vec![0u64; self.num_nodes];
        for (s, t, m) in self.edges() {
            out_degrees[s] += m;
            in_degrees[t] += m;
        }
        DegreeSequence { out_degrees, in_degrees }
    }

    /// Per-node degree imbalance d_i = k_i_out - k_i_in.
    pub fn degree_imbalance(&self) -> Vec<i64> {
        let deg = self.degrees();
        deg.out_degrees
            .iter()
            .zip(&deg.in_degrees)
            .map(|(&o, &i)| o as i64 - i as i64)
            .collect()
    }

    /// Serialize as `source target [multiplicity]` lines with dense ids.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (src, dst, m) in self.edges() {
            if m == 1 {
                let _ = writeln!(s, "{src} {dst}");
            } else {
                let _ = writeln!(s, "{src} {dst} {m}");
            }
        }
        s
    }
}

/// Parse an edge list. Lines are whitespace separated, `#` starts a
/// comment, an optional third column is an integer multiplicity >= 1.
/// Returns the graph and the original node id for each dense index.
pub fn load_edge_list(
    text: &str,
    policy: IdPolicy,
) -> Result<(DirectedMultigraph, Vec<String>), EdgeListError> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut max_int_id: Option<usize> = None;
    let mut edges: Vec<(usize, usize, u64)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = content.split_whitespace();
        let Some(src) = tokens.next() else { continue };
        let Some(dst) = tokens.next() else {
            return Err(EdgeListError::Malformed { line, got: content.trim().to_string() });
        };
        let mult = match tokens.next() {
            Some(tok) => match tok.parse::<i64>() {
                Ok(m) if m >= 1 => m as u64,
                _ => return Err(EdgeListError::BadMultiplicity { line, got: tok.to_string() }),
            },
            None => 1,
        };
        if tokens.next().is_some() {
            return Err(EdgeListError::Malformed { line, got: content.trim().to_string() });
        }
        let mut resolve = |tok: &str| -> Result<usize, EdgeListError> {
            match policy {
                IdPolicy::FirstSeen => {
                    if let Some(&idx) = index.get(tok) {
                        Ok(idx as usize)
                    } else {
                        let idx = ids.len() as u32;
                        index.insert(tok.to_string(), idx);
                        ids.push(tok.to_string());
                        Ok(idx as usize)
                    }
                }
                IdPolicy::Integer => {
                    let idx: usize = tok
                        .parse()
                        .map_err(|_| EdgeListError::BadNodeId { line, got: tok.to_string() })?;
                    max_int_id = Some(max_int_id.map_or(idx, |m: usize| m.max(idx)));
                    Ok(idx)
                }
            }
        };
        let s = resolve(src)?;
        let t = resolve(dst)?;
        edges.push((s, t, mult));
    }

    let num_nodes = match policy {
        IdPolicy::FirstSeen => ids.len(),
        IdPolicy::Integer => max_int_id.map_or(0, |m| m + 1),
    };
    if let IdPolicy::Integer = policy {
        ids = (0..num_nodes).map(|i| i.to_string()).collect();
    }
    Ok((DirectedMultigraph::from_edges(num_nodes, &edges), ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates_duplicate_lines() {
        let (g, ids) = load_edge_list("0 1\n0 1\n1 0\n", IdPolicy::FirstSeen).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_edges(), 3);
        // adjacency convention: edge 0 -> 1 contributes to a(1, 0)
        assert_eq!(g.a(1, 0), 2);
        assert_eq!(g.a(0, 1), 1);
        assert_eq!(g.a(0, 0), 0);
        assert_eq!(ids, vec!["0", "1"]);
    }

    #[test]
    fn multiplicity_column() {
        let (g, _) = load_edge_list("a b 3\n", IdPolicy::FirstSeen).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.a(1, 0), 3);
    }

    #[test]
    fn self_loop() {
        let (g, _) = load_edge_list("0 0\n", IdPolicy::FirstSeen).unwrap();
        assert_eq!(g.num_nodes(), 1);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.a(0, 0), 1);
        let d = g.degrees();
        assert_eq!(d.out_degrees, vec![1]);
        assert_eq!(d.in_degrees, vec![1]);
        assert_eq!(g.degree_imbalance(), vec![0]);
    }

    #[test]
    fn empty_input_is_empty_graph() {
        let (g, ids) = load_edge_list("# just a comment\n\n", IdPolicy::FirstSeen).unwrap();
        assert_eq!(g.num_nodes(), 0);
        assert_eq!(g.num_edges(), 0);
        assert!(ids.is_empty());
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = load_edge_list("0 1\nnonsense\n", IdPolicy::FirstSeen).unwrap_err();
        assert_eq!(err, EdgeListError::Malformed { line: 2, got: "nonsense".into() });
        let err = load_edge_list("0 1 0\n", IdPolicy::FirstSeen).unwrap_err();
        assert_eq!(err, EdgeListError::BadMultiplicity { line: 1, got: "0".into() });
        let err = load_edge_list("0 1 -2\n", IdPolicy::FirstSeen).unwrap_err();
        assert_eq!(err, EdgeListError::BadMultiplicity { line: 1, got: "-2".into() });
        let err = load_edge_list("x 1\n", IdPolicy::Integer).unwrap_err();
        assert_eq!(err, EdgeListError::BadNodeId { line: 1, got: "x".into() });
    }

    #[test]
    fn integer_policy_creates_isolated_nodes() {
        let (g, ids) = load_edge_list("5 2\n", IdPolicy::Integer).unwrap();
        assert_eq!(g.num_nodes(), 6);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.a(2, 5), 1);
        assert_eq!(ids.len(), 6);
    }

    #[test]
    fn first_seen_order() {
        let (_, ids) = load_edge_list("carol bob\nbob alice\n", IdPolicy::FirstSeen).unwrap();
        assert_eq!(ids, vec!["carol", "bob", "alice"]);
    }

    #[test]
    fn degrees_match_spec_examples() {
        let (g, _) = load_edge_list("0 1\n", IdPolicy::Integer).unwrap();
        let d = g.degrees();
        assert_eq!(d.out_degrees, vec![1, 0]);
        assert_eq!(d.in_degrees, vec![0, 1]);
        assert_eq!(g.degree_imbalance(), vec![1, -1]);

        let (g, _) = load_edge_list("0 1\n0 1\n1 0\n", IdPolicy::Integer).unwrap();
        let d = g.degrees();
        assert_eq!(d.out_degrees, vec![2, 1]);
        assert_eq!(d.in_degrees, vec![1, 2]);
        assert_eq!(g.degree_imbalance(), vec![1, -1]);
    }

    #[test]
    fn imbalance_sums_to_zero() {
        let (g, _) =
            load_edge_list("0 1 4\n2 0\n1 2 2\n2 2\n3 0\n", IdPolicy::Integer).unwrap();
        assert_eq!(g.degree_imbalance().iter().sum::<i64>(), 0);
    }

    #[test]
    fn round_trip_preserves_adjacency() {
        let text = "0 1 3\n1 2\n2 0 2\n2 2\n";
        let (g, _) = load_edge_list(text, IdPolicy::Integer).unwrap();
        let (g2, _) = load_edge_list(&g.to_edge_list(), IdPolicy::Integer).unwrap();
        assert_eq!(g, g2);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn edge_lines() -> impl Strategy<Value = Vec<(usize, usize, u64)>> {
            prop::collection::vec((0..12usize, 0..12usize, 1..5u64), 0..40)
        }

        proptest! {
            #[test]
            fn degrees_match_brute_force_line_count(lines in edge_lines()) {
                let text: String = lines
                    .iter()
                    .map(|(s, t, m)| format!("{s} {t} {m}\n"))
                    .collect();
                let (g, _) = load_edge_list(&text, IdPolicy::Integer).unwrap();
                let deg = g.degrees();
                let n = g.num_nodes();
                // independent count straight off the raw lines
                let mut out = vec![0u64; n];
                let mut inn = vec![0u64; n];
                for &(s, t, m) in &lines {
                    out[s] += m;
                    inn[t] += m;
                }
                prop_assert_eq!(&deg.out_degrees, &out);
                prop_assert_eq!(&deg.in_degrees, &inn);
                prop_assert_eq!(deg.out_degrees.iter().sum::<u64>(), g.num_edges());
                prop_assert_eq!(deg.in_degrees.iter().sum::<u64>(), g.num_edges());
                prop_assert_eq!(g.degree_imbalance().iter().sum::<i64>(), 0);
            }

            #[test]
            fn serialize_reload_round_trip(lines in edge_lines()) {
                let text: String = lines
                    .iter()
                    .map(|(s, t, m)| format!("{s} {t} {m}\n"))
                    .collect();
                let (g, _) = load_edge_list(&text, IdPolicy::Integer).unwrap();
                let (g2, _) = load_edge_list(&g.to_edge_list(), IdPolicy::Integer).unwrap();
                prop_assert_eq!(g, g2);
            }
        }
    }
}
