//! Graph loading, validation, and the degree / cross-set edge queries the
//! rest of the pipeline is built on.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub type VertexId = u32;

/// A sorted, deduplicated set of vertex ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct VertexSet {
    members: Vec<VertexId>,
}

impl VertexSet {
    pub fn new(mut members: Vec<VertexId>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { members }
    }

    pub fn singleton(v: VertexId) -> Self {
        Self { members: vec![v] }
    }

    /// Builds from a slice already known to be sorted and deduplicated.
    pub fn from_sorted(members: Vec<VertexId>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.members.iter().copied()
    }

    pub fn as_slice(&self) -> &[VertexId] {
        &self.members
    }

    pub fn min_vertex(&self) -> Option<VertexId> {
        self.members.first().copied()
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.intersection_witness(other).is_none()
    }

    /// First vertex present in both sets, if any.
    pub fn intersection_witness(&self, other: &VertexSet) -> Option<VertexId> {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().find(|&v| large.contains(v))
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        out.extend_from_slice(&self.members);
        out.extend_from_slice(&other.members);
        VertexSet::new(out)
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        VertexSet::from_sorted(self.iter().filter(|&v| !other.contains(v)).collect())
    }
}

impl FromIterator<VertexId> for VertexSet {
    fn from_iter<T: IntoIterator<Item = VertexId>>(iter: T) -> Self {
        VertexSet::new(iter.into_iter().collect())
    }
}

impl fmt::Display for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: VertexId,
    pub dst: VertexId,
    pub weight: f64,
}

/// Immutable weighted graph with dense integer vertex ids.
///
/// Undirected edges are stored once in canonical `(min, max)` order; duplicate
/// lines are summed at load time and self-loops dropped behind a warning
/// counter. The incidence adjacency treats edges as undirected regardless of
/// the `directed` flag; direction matters only to the random-walk visit rates.
#[derive(Debug, Clone)]
pub struct Graph {
    directed: bool,
    edges: Vec<Edge>,
    adj: Vec<Vec<(VertexId, f64)>>,
    out_adj: Vec<Vec<(VertexId, f64)>>,
    strength: Vec<f64>,
    out_strength: Vec<f64>,
    total_weight: f64,
    names: Vec<String>,
    name_index: HashMap<String, VertexId>,
    self_loops_skipped: usize,
}

impl Graph {
    /// Builds a graph from raw edges over vertices `0..vertex_count`.
    ///
    /// Self-loops are skipped (counted), duplicate endpoint pairs summed.
    pub fn from_edges(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (VertexId, VertexId, f64)>,
        directed: bool,
    ) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut merged: HashMap<(VertexId, VertexId), f64> = HashMap::new();
        let mut self_loops = 0usize;
        for (src, dst, w) in edges {
            if src as usize >= vertex_count || dst as usize >= vertex_count {
                return Err(Error::UnknownVertex(src.max(dst)));
            }
            if src == dst {
                self_loops += 1;
                continue;
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "edge {src}-{dst} has non-positive weight {w}"
                )));
            }
            let key = if directed || src < dst {
                (src, dst)
            } else {
                (dst, src)
            };
            *merged.entry(key).or_insert(0.0) += w;
        }
        let mut edge_list: Vec<Edge> = merged
            .into_iter()
            .map(|((src, dst), weight)| Edge { src, dst, weight })
            .collect();
        edge_list.sort_unstable_by_key(|e| (e.src, e.dst));

        let names = (0..vertex_count).map(|v| v.to_string()).collect();
        Ok(Self::assemble(
            vertex_count,
            edge_list,
            directed,
            names,
            self_loops,
        ))
    }

    fn assemble(
        vertex_count: usize,
        edges: Vec<Edge>,
        directed: bool,
        names: Vec<String>,
        self_loops_skipped: usize,
    ) -> Self {
        let mut adj = vec![Vec::new(); vertex_count];
        let mut out_adj = vec![Vec::new(); vertex_count];
        let mut strength = vec![0.0; vertex_count];
        let mut out_strength = vec![0.0; vertex_count];
        let mut total_weight = 0.0;
        for e in &edges {
            adj[e.src as usize].push((e.dst, e.weight));
            adj[e.dst as usize].push((e.src, e.weight));
            strength[e.src as usize] += e.weight;
            strength[e.dst as usize] += e.weight;
            out_adj[e.src as usize].push((e.dst, e.weight));
            out_strength[e.src as usize] += e.weight;
            if !directed {
                out_adj[e.dst as usize].push((e.src, e.weight));
                out_strength[e.dst as usize] += e.weight;
            }
            total_weight += e.weight;
        }
        let name_index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as VertexId))
            .collect();
        Self {
            directed,
            edges,
            adj,
            out_adj,
            strength,
            out_strength,
            total_weight,
            names,
            name_index,
            self_loops_skipped,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Total edge weight (the ‖E‖ of the merge heuristic).
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Weighted degree of `v` counting both directions as incidence.
    pub fn strength(&self, v: VertexId) -> f64 {
        self.strength[v as usize]
    }

    pub fn out_strength(&self, v: VertexId) -> f64 {
        self.out_strength[v as usize]
    }

    /// Undirected incidence neighbours of `v` with edge weights.
    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, f64)] {
        &self.adj[v as usize]
    }

    /// Outgoing neighbours (equals `neighbors` for undirected graphs).
    pub fn out_neighbors(&self, v: VertexId) -> &[(VertexId, f64)] {
        &self.out_adj[v as usize]
    }

    pub fn self_loops_skipped(&self) -> usize {
        self.self_loops_skipped
    }

    pub fn name(&self, v: VertexId) -> &str {
        &self.names[v as usize]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.name_index.get(name).copied()
    }

    pub fn all_vertices(&self) -> VertexSet {
        VertexSet::from_sorted((0..self.vertex_count() as VertexId).collect())
    }

    pub fn contains_set(&self, s: &VertexSet) -> bool {
        s.iter().all(|v| (v as usize) < self.vertex_count())
    }

    /// Total weight of edges with one endpoint in `a` and the other in `b`.
    ///
    /// The sets must be disjoint; direction is ignored.
    pub fn edges_between(&self, a: &VertexSet, b: &VertexSet) -> Result<f64> {
        if let Some(v) = a.intersection_witness(b) {
            return Err(Error::OverlappingSets(v));
        }
        let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        let mut total = 0.0;
        for v in small.iter() {
            for &(u, w) in self.neighbors(v) {
                if large.contains(u) {
                    total += w;
                }
            }
        }
        Ok(total)
    }

    /// Total weight of edges with exactly one endpoint inside `a`.
    pub fn out_degree(&self, a: &VertexSet) -> Result<f64> {
        for v in a.iter() {
            if v as usize >= self.vertex_count() {
                return Err(Error::UnknownVertex(v));
            }
        }
        let mut total = 0.0;
        for v in a.iter() {
            for &(u, w) in self.neighbors(v) {
                if !a.contains(u) {
                    total += w;
                }
            }
        }
        Ok(total)
    }

    /// Connected components under undirected incidence, each sorted.
    pub fn components(&self) -> Vec<VertexSet> {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n as VertexId {
            if seen[start as usize] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start as usize] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(u, _) in self.neighbors(v) {
                    if !seen[u as usize] {
                        seen[u as usize] = true;
                        stack.push(u);
                    }
                }
            }
            out.push(VertexSet::new(comp));
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Induced subgraph over `s`, plus the map from sub-vertex id to original id.
    pub fn induced_subgraph(&self, s: &VertexSet) -> (Graph, Vec<VertexId>) {
        let back: Vec<VertexId> = s.iter().collect();
        let fwd: HashMap<VertexId, VertexId> = back
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as VertexId))
            .collect();
        let mut edges = Vec::new();
        for e in &self.edges {
            if let (Some(&a), Some(&b)) = (fwd.get(&e.src), fwd.get(&e.dst)) {
                edges.push((a, b, e.weight));
            }
        }
        let g = Graph::from_edges(back.len(), edges, self.directed)
            .expect("induced subgraph of a non-empty set");
        (g, back)
    }

    /// Parses edge-list text: optional `#` comments, `src dst [weight]` per
    /// line, TAB or space separated. Unknown names get dense ids in
    /// first-appearance order.
    pub fn parse_edge_list(text: &str, directed: bool, origin: &Path) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut name_index: HashMap<String, VertexId> = HashMap::new();
        let mut intern = |tok: &str, names: &mut Vec<String>| -> VertexId {
            if let Some(&id) = name_index.get(tok) {
                return id;
            }
            let id = names.len() as VertexId;
            names.push(tok.to_string());
            name_index.insert(tok.to_string(), id);
            id
        };

        let mut merged: HashMap<(VertexId, VertexId), f64> = HashMap::new();
        let mut order: Vec<(VertexId, VertexId)> = Vec::new();
        let mut self_loops = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 && toks.len() != 3 {
                return Err(Error::MalformedLine {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    reason: format!("expected `src dst [weight]`, got {} fields", toks.len()),
                });
            }
            let weight = if toks.len() == 3 {
                toks[2].parse::<f64>().map_err(|_| Error::MalformedLine {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    reason: format!("bad weight `{}`", toks[2]),
                })?
            } else {
                1.0
            };
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::MalformedLine {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    reason: format!("weight must be positive, got {weight}"),
                });
            }
            let src = intern(toks[0], &mut names);
            let dst = intern(toks[1], &mut names);
            if src == dst {
                self_loops += 1;
                continue;
            }
            let key = if directed || src < dst {
                (src, dst)
            } else {
                (dst, src)
            };
            if let Some(w) = merged.get_mut(&key) {
                *w += weight;
            } else {
                merged.insert(key, weight);
                order.push(key);
            }
        }
        if names.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let edges: Vec<Edge> = order
            .into_iter()
            .map(|key| Edge {
                src: key.0,
                dst: key.1,
                weight: merged[&key],
            })
            .collect();
        Ok(Self::assemble(
            names.len(),
            edges,
            directed,
            names,
            self_loops,
        ))
    }

    pub fn load(path: &Path, directed: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_edge_list(&text, directed, path)
    }

    /// Writes the edge list back out in the load format.
    pub fn write_edge_list(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.names[e.src as usize], self.names[e.dst as usize], e.weight
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The running 4-vertex example: edges a-b, b-c, c-d, a-c (a..d = 0..3).
    pub(crate) fn square_with_chord() -> Graph {
        Graph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 2, 1.0)], false)
            .unwrap()
    }

    #[test]
    fn parse_four_line_file() {
        let text = "a\tb\nb\tc\nc\td\na\tc\n";
        let g = Graph::parse_edge_list(text, false, Path::new("mem")).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.vertex_by_name("a"), Some(0));
        assert_eq!(g.vertex_by_name("d"), Some(3));
    }

    #[test]
    fn duplicate_lines_sum_weights() {
        let text = "0 1 2.0\n0 1 2.0\n";
        let g = Graph::parse_edge_list(text, false, Path::new("mem")).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges()[0].weight, 4.0);
    }

    #[test]
    fn reversed_duplicate_merges_when_undirected() {
        let text = "0 1 1.0\n1 0 2.0\n";
        let g = Graph::parse_edge_list(text, false, Path::new("mem")).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edges()[0].weight, 3.0);

        let g = Graph::parse_edge_list(text, true, Path::new("mem")).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn self_loop_skipped_with_warning() {
        let text = "0 0\n0 1\n";
        let g = Graph::parse_edge_list(text, false, Path::new("mem")).unwrap();
        assert_eq!(g.self_loops_skipped(), 1);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = "0 1\nnot-a-line-with-two-fields-only-one\n";
        let err = Graph::parse_edge_list(text, false, Path::new("mem")).unwrap_err();
        match err {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let text = "0 1 notaweight\n";
        assert!(Graph::parse_edge_list(text, false, Path::new("mem")).is_err());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# header\n\n0 1\n  # indented comment\n1 2\n";
        let g = Graph::parse_edge_list(text, false, Path::new("mem")).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            Graph::parse_edge_list("# nothing\n", false, Path::new("mem")),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn edges_between_examples() {
        let g = square_with_chord();
        let a = VertexSet::singleton(0);
        let bc = VertexSet::new(vec![1, 2]);
        assert_eq!(g.edges_between(&a, &bc).unwrap(), 2.0);

        // disjoint sets with no connecting edges
        let d = VertexSet::singleton(3);
        assert_eq!(g.edges_between(&a, &d).unwrap(), 0.0);

        let b = VertexSet::singleton(1);
        let ac = VertexSet::new(vec![0, 2]);
        assert_eq!(g.edges_between(&b, &ac).unwrap(), 2.0);
    }

    #[test]
    fn edges_between_rejects_overlap() {
        let g = square_with_chord();
        let a = VertexSet::new(vec![0, 1]);
        let b = VertexSet::new(vec![1, 2]);
        assert!(matches!(
            g.edges_between(&a, &b),
            Err(Error::OverlappingSets(1))
        ));
    }

    #[test]
    fn out_degree_examples() {
        let g = square_with_chord();
        assert_eq!(g.out_degree(&VertexSet::singleton(0)).unwrap(), 2.0);
        assert_eq!(g.out_degree(&g.all_vertices()).unwrap(), 0.0);
        assert_eq!(g.out_degree(&VertexSet::new(vec![1, 2])).unwrap(), 3.0);
    }

    #[test]
    fn degree_sum_is_twice_total_weight() {
        let g = square_with_chord();
        let sum: f64 = (0..g.vertex_count() as VertexId).map(|v| g.strength(v)).sum();
        assert_eq!(sum, 2.0 * g.total_weight());
    }

    #[test]
    fn out_degree_decomposes_over_complement_partition() {
        let g = square_with_chord();
        let a = VertexSet::new(vec![0, 1]);
        let p1 = VertexSet::singleton(2);
        let p2 = VertexSet::singleton(3);
        let total = g.out_degree(&a).unwrap();
        let split = g.edges_between(&a, &p1).unwrap() + g.edges_between(&a, &p2).unwrap();
        assert_eq!(total, split);
    }

    #[test]
    fn components_and_induced_subgraph() {
        let g = Graph::from_edges(5, [(0, 1, 1.0), (2, 3, 1.0), (3, 4, 1.0)], false).unwrap();
        let comps = g.components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].as_slice(), &[0, 1]);
        assert_eq!(comps[1].as_slice(), &[2, 3, 4]);

        let (sub, back) = g.induced_subgraph(&comps[1]);
        assert_eq!(sub.vertex_count(), 3);
        assert_eq!(sub.edge_count(), 2);
        assert_eq!(back, vec![2, 3, 4]);
    }
}
