//! Binary community tree: bottom-up pairwise merging of sibling communities,
//! bitstring code assignment, and depth-bounded cut-link enumeration.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId, VertexSet};
use crate::hierarchy::CommunityTree;

/// A bitstring addressing one tree node (and the link pointing at it).
/// The root carries the empty code.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Code(String);

/// A cut link is identified by the code of the node it points to.
pub type CutLink = Code;

impl Code {
    pub fn empty() -> Self {
        Code(String::new())
    }

    /// Parses a code made of '0'/'1' characters.
    pub fn parse(s: &str) -> Result<Self> {
        if s.bytes().all(|b| b == b'0' || b == b'1') {
            Ok(Code(s.to_string()))
        } else {
            Err(Error::InvalidInput(format!("bad binary code `{s}`")))
        }
    }

    pub fn child(&self, right: bool) -> Self {
        let mut s = self.0.clone();
        s.push(if right { '1' } else { '0' });
        Code(s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_prefix_of(&self, other: &Code) -> bool {
        other.0.starts_with(&self.0)
    }

    /// The other child of the same parent; `None` for the root.
    pub fn sibling(&self) -> Option<Code> {
        let mut s = self.0.clone();
        let last = s.pop()?;
        s.push(if last == '0' { '1' } else { '0' });
        Some(Code(s))
    }

    pub fn is_sibling_of(&self, other: &Code) -> bool {
        self.sibling().is_some_and(|s| s == *other)
    }

    /// Ordering key: shorter codes first, then lexicographic.
    pub fn sort_key(&self) -> (usize, &str) {
        (self.0.len(), &self.0)
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "null")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Debug for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Code({self})")
    }
}

/// How much two vertex sets are connected beyond random expectation,
/// normalized by set sizes.
pub fn normalized_linked_weight(g: &Graph, a: &VertexSet, b: &VertexSet) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyVertexSet);
    }
    let linked = g.edges_between(a, b)?;
    let total2 = 2.0 * g.total_weight();
    let random = if total2 > 0.0 {
        g.out_degree(a)? * g.out_degree(b)? / total2
    } else {
        0.0
    };
    Ok((linked - random) / (a.len() as f64 * b.len() as f64))
}

#[derive(Debug, Clone)]
pub struct BinaryNode {
    pub vertex_set: VertexSet,
    pub code: Code,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub parent: Option<usize>,
    pub embedding: Option<Vec<f64>>,
}

impl BinaryNode {
    pub fn is_leaf(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }
}

/// The binary community tree with codes assigned and per-vertex leaf paths
/// indexed for decoding.
#[derive(Debug, Clone)]
pub struct BinaryCommunityTree {
    nodes: Vec<BinaryNode>,
    root: usize,
    depth_bound: usize,
    code_index: HashMap<Code, usize>,
    vertex_paths: Vec<Vec<u32>>,
    max_depth: usize,
}

impl BinaryCommunityTree {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &BinaryNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[BinaryNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_paths.len()
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn set_depth_bound(&mut self, d: usize) {
        self.depth_bound = d;
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn node_by_code(&self, code: &Code) -> Option<usize> {
        self.code_index.get(code).copied()
    }

    /// Node ids on the root-to-leaf path of `v`, starting at depth 1.
    pub fn vertex_path(&self, v: VertexId) -> &[u32] {
        &self.vertex_paths[v as usize]
    }

    pub fn set_embedding(&mut self, id: usize, embedding: Vec<f64>) {
        self.nodes[id].embedding = Some(embedding);
    }

    /// All links whose code length is within the depth bound, in
    /// (length, lexicographic) order.
    pub fn eligible_links(&self) -> Vec<CutLink> {
        let mut links: Vec<CutLink> = self
            .nodes
            .iter()
            .filter(|n| !n.code.is_empty() && n.code.len() <= self.depth_bound)
            .map(|n| n.code.clone())
            .collect();
        links.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        links
    }

    /// Largest gene count selectable from the eligible links without
    /// duplicates or sibling pairs: one pick per sibling pair.
    pub fn non_conflicting_capacity(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| !n.is_leaf() && n.code.len() + 1 <= self.depth_bound)
            .count()
    }

    /// Structural invariants: binary arity, disjoint unions, code/depth
    /// agreement, node-count bound.
    pub fn validate(&self) -> Result<()> {
        if self.node_count() > 2 * self.vertex_count() {
            return Err(Error::InvalidTree(format!(
                "{} nodes exceeds the 2|V| bound for |V|={}",
                self.node_count(),
                self.vertex_count()
            )));
        }
        for (id, node) in self.nodes.iter().enumerate() {
            match (node.left, node.right) {
                (None, None) => {}
                (Some(l), Some(r)) => {
                    let (ls, rs) = (&self.nodes[l].vertex_set, &self.nodes[r].vertex_set);
                    if !ls.is_disjoint(rs) {
                        return Err(Error::InvalidTree(format!(
                            "children of node {id} overlap"
                        )));
                    }
                    if ls.union(rs) != node.vertex_set {
                        return Err(Error::InvalidTree(format!(
                            "children of node {id} do not union to it"
                        )));
                    }
                    if self.nodes[l].code != node.code.child(false)
                        || self.nodes[r].code != node.code.child(true)
                    {
                        return Err(Error::InvalidTree(format!(
                            "codes of node {id}'s children are inconsistent"
                        )));
                    }
                }
                _ => {
                    return Err(Error::InvalidTree(format!(
                        "node {id} has exactly one child"
                    )))
                }
            }
            if node.vertex_set.is_empty() {
                return Err(Error::InvalidTree(format!("node {id} is empty")));
            }
        }
        if !self.nodes[self.root].code.is_empty() {
            return Err(Error::InvalidTree("root code must be empty".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> BinaryTreeJson {
        BinaryTreeJson {
            depth_bound: self.depth_bound,
            root: self.root,
            nodes: self
                .nodes
                .iter()
                .map(|n| BinaryNodeJson {
                    code: n.code.as_str().to_string(),
                    vertices: n.vertex_set.iter().collect(),
                    left: n.left,
                    right: n.right,
                    embedding: n.embedding.clone(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &BinaryTreeJson) -> Result<Self> {
        if json.nodes.is_empty() {
            return Err(Error::InvalidTree("binary tree has no nodes".into()));
        }
        let mut builder = BinaryTreeBuilder::new();
        builder.nodes = json
            .nodes
            .iter()
            .map(|n| {
                Ok(PendingNode {
                    vertex_set: if n.left.is_none() {
                        Some(VertexSet::new(n.vertices.clone()))
                    } else {
                        None
                    },
                    left: n.left,
                    right: n.right,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let tree = builder.build(json.root, json.depth_bound)?;
        for (got, want) in tree.nodes.iter().zip(&json.nodes) {
            if got.code.as_str() != want.code {
                return Err(Error::InvalidTree(format!(
                    "stored code `{}` disagrees with structure (`{}`)",
                    want.code, got.code
                )));
            }
            let vertices: Vec<VertexId> = got.vertex_set.iter().collect();
            if vertices != want.vertices {
                return Err(Error::InvalidTree(
                    "stored vertex set disagrees with leaf union".into(),
                ));
            }
        }
        let mut tree = tree;
        for (id, n) in json.nodes.iter().enumerate() {
            if let Some(e) = &n.embedding {
                tree.nodes[id].embedding = Some(e.clone());
            }
        }
        Ok(tree)
    }
}

/// Flat serialized form: one entry per node, child links by index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinaryTreeJson {
    pub depth_bound: usize,
    pub root: usize,
    pub nodes: Vec<BinaryNodeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinaryNodeJson {
    pub code: String,
    pub vertices: Vec<VertexId>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

struct PendingNode {
    /// Set for leaves; internal nodes derive theirs from the children.
    vertex_set: Option<VertexSet>,
    left: Option<usize>,
    right: Option<usize>,
}

/// Assembles binary trees from leaves and internal pairs, then assigns codes.
pub struct BinaryTreeBuilder {
    nodes: Vec<PendingNode>,
}

impl Default for BinaryTreeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl BinaryTreeBuilder {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn leaf(&mut self, vertices: VertexSet) -> usize {
        self.nodes.push(PendingNode {
            vertex_set: Some(vertices),
            left: None,
            right: None,
        });
        self.nodes.len() - 1
    }

    pub fn internal(&mut self, left: usize, right: usize) -> usize {
        self.nodes.push(PendingNode {
            vertex_set: None,
            left: Some(left),
            right: Some(right),
        });
        self.nodes.len() - 1
    }

    /// Finalizes the arena: fills internal vertex sets bottom-up, assigns
    /// binary codes top-down, indexes per-vertex paths, and validates.
    pub fn build(self, root: usize, depth_bound: usize) -> Result<BinaryCommunityTree> {
        let n = self.nodes.len();
        if root >= n {
            return Err(Error::InvalidTree("root index out of range".into()));
        }
        let mut nodes: Vec<BinaryNode> = self
            .nodes
            .iter()
            .map(|p| BinaryNode {
                vertex_set: p.vertex_set.clone().unwrap_or_default(),
                code: Code::empty(),
                left: p.left,
                right: p.right,
                parent: None,
                embedding: None,
            })
            .collect();

        // Parent pointers plus cycle/arity checks.
        for id in 0..n {
            match (nodes[id].left, nodes[id].right) {
                (None, None) => {}
                (Some(l), Some(r)) => {
                    if l >= n || r >= n || l == id || r == id {
                        return Err(Error::InvalidTree(format!(
                            "node {id} has invalid child indices"
                        )));
                    }
                    for c in [l, r] {
                        if nodes[c].parent.is_some() {
                            return Err(Error::InvalidTree(format!(
                                "node {c} has two parents"
                            )));
                        }
                        nodes[c].parent = Some(id);
                    }
                }
                _ => {
                    return Err(Error::InvalidTree(format!(
                        "node {id} has exactly one child"
                    )))
                }
            }
        }

        // Codes and vertex sets via iterative DFS from the root; post-order
        // union fills the internal sets.
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        nodes[root].code = Code::empty();
        let mut max_depth = 0usize;
        while let Some(id) = stack.pop() {
            order.push(id);
            max_depth = max_depth.max(nodes[id].code.len());
            if let (Some(l), Some(r)) = (nodes[id].left, nodes[id].right) {
                nodes[l].code = nodes[id].code.child(false);
                nodes[r].code = nodes[id].code.child(true);
                stack.push(l);
                stack.push(r);
            }
        }
        if order.len() != n {
            return Err(Error::InvalidTree(
                "tree contains unreachable or shared nodes".into(),
            ));
        }
        for &id in order.iter().rev() {
            if let (Some(l), Some(r)) = (nodes[id].left, nodes[id].right) {
                nodes[id].vertex_set = nodes[l].vertex_set.union(&nodes[r].vertex_set);
            }
        }

        let code_index: HashMap<Code, usize> = nodes
            .iter()
            .enumerate()
            .map(|(id, node)| (node.code.clone(), id))
            .collect();
        if code_index.len() != n {
            return Err(Error::InvalidTree("duplicate codes".into()));
        }

        // Per-vertex root-to-leaf paths (depth >= 1 nodes only).
        let vertex_count = nodes[root]
            .vertex_set
            .iter()
            .last()
            .map(|v| v as usize + 1)
            .unwrap_or(0);
        if nodes[root].vertex_set.len() != vertex_count {
            return Err(Error::InvalidTree(
                "root vertex set must be dense 0..|V|".into(),
            ));
        }
        let mut vertex_paths: Vec<Vec<u32>> = vec![Vec::new(); vertex_count];
        for (id, node) in nodes.iter().enumerate() {
            if node.is_leaf() {
                let mut chain = Vec::new();
                let mut cur = Some(id);
                while let Some(c) = cur {
                    if !nodes[c].code.is_empty() {
                        chain.push(c as u32);
                    }
                    cur = nodes[c].parent;
                }
                chain.reverse();
                for v in node.vertex_set.iter() {
                    if !vertex_paths[v as usize].is_empty() {
                        return Err(Error::InvalidTree(format!(
                            "vertex {v} appears in two leaves"
                        )));
                    }
                    vertex_paths[v as usize] = chain.clone();
                }
            }
        }

        let tree = BinaryCommunityTree {
            nodes,
            root,
            depth_bound,
            code_index,
            vertex_paths,
            max_depth,
        };
        tree.validate()?;
        Ok(tree)
    }
}

/// Converts a hierarchical community tree into its binary form.
///
/// For every internal node the smallest child community merges with the
/// sibling of largest normalized linked weight, repeatedly, until one node
/// remains and becomes the parent. Two-child nodes adopt their children
/// unchanged; single-child chains collapse. Ties (smallest size, argmax
/// weight) resolve toward the set containing the smallest vertex id.
pub fn binarize(g: &Graph, tc: &CommunityTree, depth_bound: usize) -> Result<BinaryCommunityTree> {
    let mut builder = BinaryTreeBuilder::new();
    let root = binarize_node(g, tc, tc.root(), &mut builder)?;
    builder.build(root, depth_bound)
}

fn binarize_node(
    g: &Graph,
    tc: &CommunityTree,
    mut tc_id: usize,
    builder: &mut BinaryTreeBuilder,
) -> Result<usize> {
    // Collapse single-child chains.
    while tc.node(tc_id).children.len() == 1 {
        tc_id = tc.node(tc_id).children[0];
    }
    let node = tc.node(tc_id);
    if node.children.is_empty() {
        return Ok(builder.leaf(node.vertex_set.clone()));
    }

    struct Entry {
        id: usize,
        set: VertexSet,
    }
    let mut entries: Vec<Entry> = Vec::with_capacity(node.children.len());
    for &child in &node.children {
        let id = binarize_node(g, tc, child, builder)?;
        let set = tc_set_of(builder, id);
        entries.push(Entry { id, set });
    }

    while entries.len() > 1 {
        // Smallest community first; ties toward the smallest vertex id.
        let mut pick = 0;
        for i in 1..entries.len() {
            let (a, b) = (&entries[i].set, &entries[pick].set);
            if a.len() < b.len()
                || (a.len() == b.len() && a.min_vertex() < b.min_vertex())
            {
                pick = i;
            }
        }
        let mut partner = None;
        let mut best_w = f64::NEG_INFINITY;
        for (j, e) in entries.iter().enumerate() {
            if j == pick {
                continue;
            }
            let w = normalized_linked_weight(g, &entries[pick].set, &e.set)?;
            let better = w > best_w
                || (w == best_w
                    && partner.is_some_and(|p: usize| {
                        e.set.min_vertex() < entries[p].set.min_vertex()
                    }));
            if partner.is_none() || better {
                partner = Some(j);
                best_w = w;
            }
        }
        let j = partner.expect("at least two entries");
        let merged_id = builder.internal(entries[pick].id, entries[j].id);
        let merged_set = entries[pick].set.union(&entries[j].set);
        let (lo, hi) = (pick.min(j), pick.max(j));
        entries.remove(hi);
        entries[lo] = Entry {
            id: merged_id,
            set: merged_set,
        };
    }
    Ok(entries.pop().expect("one entry remains").id)
}

fn tc_set_of(builder: &BinaryTreeBuilder, id: usize) -> VertexSet {
    fn collect(builder: &BinaryTreeBuilder, id: usize, out: &mut Vec<VertexId>) {
        let node = &builder.nodes[id];
        if let Some(set) = &node.vertex_set {
            out.extend(set.iter());
        } else if let (Some(l), Some(r)) = (node.left, node.right) {
            collect(builder, l, out);
            collect(builder, r, out);
        }
    }
    let mut out = Vec::new();
    collect(builder, id, &mut out);
    VertexSet::new(out)
}
