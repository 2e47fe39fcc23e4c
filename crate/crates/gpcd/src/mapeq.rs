//! Two-level map equation: random-walk visit rates, codebook entropies, and
//! the description length of a flat partition.

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};

/// Vertex-to-module assignment with contiguous module indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatPartition {
    assignment: Vec<u32>,
    module_count: usize,
}

impl FlatPartition {
    /// Normalizes an arbitrary labelling into contiguous indices `0..m`
    /// ordered by first appearance.
    pub fn from_labels(labels: &[u32]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("partition over no vertices".into()));
        }
        let mut remap: Vec<(u32, u32)> = Vec::new();
        let mut assignment = Vec::with_capacity(labels.len());
        for &l in labels {
            let idx = match remap.iter().find(|(old, _)| *old == l) {
                Some((_, new)) => *new,
                None => {
                    let new = remap.len() as u32;
                    remap.push((l, new));
                    new
                }
            };
            assignment.push(idx);
        }
        Ok(Self {
            module_count: remap.len(),
            assignment,
        })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            assignment: (0..n as u32).collect(),
            module_count: n,
        }
    }

    pub fn one_module(n: usize) -> Self {
        Self {
            assignment: vec![0; n],
            module_count: 1,
        }
    }

    pub fn module_of(&self, v: VertexId) -> u32 {
        self.assignment[v as usize]
    }

    pub fn module_count(&self) -> usize {
        self.module_count
    }

    pub fn vertex_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Vertex ids grouped by module, each group sorted.
    pub fn modules(&self) -> Vec<Vec<VertexId>> {
        let mut out = vec![Vec::new(); self.module_count];
        for (v, &m) in self.assignment.iter().enumerate() {
            out[m as usize].push(v as VertexId);
        }
        out
    }
}

/// Breakdown of Eq-style description length into its codebook terms.
#[derive(Debug, Clone)]
pub struct MapEquationTerms {
    /// Total module exit rate (index codebook use rate).
    pub exit_rate_total: f64,
    /// Entropy of the index codebook, bits.
    pub index_entropy: f64,
    /// Per-module codebook use rates.
    pub module_rates: Vec<f64>,
    /// Per-module codebook entropies, bits.
    pub module_entropies: Vec<f64>,
    /// Expected description length, bits.
    pub description_length: f64,
}

pub(crate) fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits of `weights` normalized to a distribution.
/// Zero weights contribute nothing; an all-zero slice has entropy 0.
pub fn entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &w in weights {
        if w > 0.0 {
            let p = w / total;
            h -= p * p.log2();
        }
    }
    h
}

const PAGERANK_TELEPORT: f64 = 0.15;
const PAGERANK_RESIDUAL: f64 = 1e-10;

/// Stationary visit rate of a random walker per vertex.
///
/// Undirected graphs use the closed form `strength / (2 * total_weight)`;
/// directed graphs run PageRank with teleport 0.15 to an L1 residual below
/// 1e-10. Isolated vertices in undirected graphs get rate 0. An edgeless
/// undirected graph has all rates 0.
pub fn visit_rates(g: &Graph) -> Vec<f64> {
    let n = g.vertex_count();
    if !g.is_directed() {
        let two_w = 2.0 * g.total_weight();
        if two_w <= 0.0 {
            return vec![0.0; n];
        }
        return (0..n as VertexId).map(|v| g.strength(v) / two_w).collect();
    }

    let uniform = 1.0 / n as f64;
    let mut p = vec![uniform; n];
    let mut next = vec![0.0; n];
    loop {
        let mut dangling = 0.0;
        for v in 0..n {
            if g.out_strength(v as VertexId) <= 0.0 {
                dangling += p[v];
            }
        }
        let base = PAGERANK_TELEPORT * uniform + (1.0 - PAGERANK_TELEPORT) * dangling * uniform;
        next.iter_mut().for_each(|x| *x = base);
        for v in 0..n {
            let os = g.out_strength(v as VertexId);
            if os <= 0.0 {
                continue;
            }
            let share = (1.0 - PAGERANK_TELEPORT) * p[v] / os;
            for &(u, w) in g.out_neighbors(v as VertexId) {
                next[u as usize] += share * w;
            }
        }
        let residual: f64 = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut p, &mut next);
        if residual < PAGERANK_RESIDUAL {
            break;
        }
    }
    p
}

/// Directed flow on each graph edge given the visit rates.
///
/// Undirected edges yield one flow per direction. Directed flow on `u -> t`
/// is `p_u * w / out_strength(u)`; dangling vertices emit no link flow.
pub fn edge_flows(g: &Graph, rates: &[f64]) -> Vec<(VertexId, VertexId, f64)> {
    let mut flows = Vec::with_capacity(g.edge_count() * 2);
    if g.is_directed() {
        for e in g.edges() {
            let os = g.out_strength(e.src);
            if os > 0.0 {
                flows.push((e.src, e.dst, rates[e.src as usize] * e.weight / os));
            }
        }
    } else {
        let two_w = 2.0 * g.total_weight();
        if two_w <= 0.0 {
            return flows;
        }
        for e in g.edges() {
            let f = e.weight / two_w;
            flows.push((e.src, e.dst, f));
            flows.push((e.dst, e.src, f));
        }
    }
    flows
}

/// Evaluates the two-level map equation for a partition.
///
/// The result's `description_length` is exactly
/// `exit_rate_total * index_entropy + sum(module_rates[i] * module_entropies[i])`.
pub fn map_equation(g: &Graph, partition: &FlatPartition) -> MapEquationTerms {
    let rates = visit_rates(g);
    map_equation_with_rates(g, partition, &rates)
}

pub fn map_equation_with_rates(
    g: &Graph,
    partition: &FlatPartition,
    rates: &[f64],
) -> MapEquationTerms {
    assert_eq!(partition.vertex_count(), g.vertex_count());
    let m = partition.module_count();
    let mut exit = vec![0.0; m];
    for (src, dst, flow) in edge_flows(g, rates) {
        let ms = partition.module_of(src);
        let md = partition.module_of(dst);
        if ms != md {
            exit[ms as usize] += flow;
        }
    }

    let mut member_rates: Vec<Vec<f64>> = vec![Vec::new(); m];
    for (v, &r) in rates.iter().enumerate() {
        member_rates[partition.module_of(v as VertexId) as usize].push(r);
    }

    let exit_rate_total: f64 = exit.iter().sum();
    let index_entropy = entropy(&exit);

    let mut module_rates = Vec::with_capacity(m);
    let mut module_entropies = Vec::with_capacity(m);
    for i in 0..m {
        let mut codewords = Vec::with_capacity(member_rates[i].len() + 1);
        codewords.push(exit[i]);
        codewords.extend_from_slice(&member_rates[i]);
        let rate: f64 = codewords.iter().sum();
        module_rates.push(rate);
        module_entropies.push(entropy(&codewords));
    }

    let description_length = exit_rate_total * index_entropy
        + module_rates
            .iter()
            .zip(&module_entropies)
            .map(|(r, h)| r * h)
            .sum::<f64>();

    MapEquationTerms {
        exit_rate_total,
        index_entropy,
        module_rates,
        module_entropies,
        description_length,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle4() -> Graph {
        Graph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)], false)
            .unwrap()
    }

    #[test]
    fn visit_rates_cycle_symmetric() {
        let g = cycle4();
        let r = visit_rates(&g);
        for v in r {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn visit_rates_path() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)], false).unwrap();
        let r = visit_rates(&g);
        assert!((r[0] - 0.25).abs() < 1e-15);
        assert!((r[1] - 0.5).abs() < 1e-15);
        assert!((r[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn visit_rates_directed_two_cycle() {
        let g = Graph::from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)], true).unwrap();
        let r = visit_rates(&g);
        assert!((r[0] - 0.5).abs() < 1e-9);
        assert!((r[1] - 0.5).abs() < 1e-9);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn visit_rates_isolated_vertex_zero() {
        let g = Graph::from_edges(3, [(0, 1, 1.0)], false).unwrap();
        let r = visit_rates(&g);
        assert_eq!(r[2], 0.0);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_module_cycle_is_two_bits() {
        let g = cycle4();
        let terms = map_equation(&g, &FlatPartition::one_module(4));
        assert!((terms.description_length - 2.0).abs() < 1e-12);
        assert_eq!(terms.exit_rate_total, 0.0);
    }

    #[test]
    fn terms_identity_holds() {
        let g = cycle4();
        let p = FlatPartition::from_labels(&[0, 0, 1, 1]).unwrap();
        let t = map_equation(&g, &p);
        let recomposed = t.exit_rate_total * t.index_entropy
            + t.module_rates
                .iter()
                .zip(&t.module_entropies)
                .map(|(r, h)| r * h)
                .sum::<f64>();
        assert_eq!(t.description_length, recomposed);
        for (r, h) in t.module_rates.iter().zip(&t.module_entropies) {
            assert!(*r >= 0.0 && *r <= 1.0 + 1e-12);
            assert!(*h >= 0.0);
        }
    }

    #[test]
    fn singleton_partition_matches_closed_form() {
        // Every vertex its own module on the 4-cycle:
        // q_i = p_v = 0.25, H(Q) = 2 bits, module rate = 0.5, H(P^i) = 1 bit.
        let g = cycle4();
        let t = map_equation(&g, &FlatPartition::singletons(4));
        assert!((t.exit_rate_total - 1.0).abs() < 1e-12);
        assert!((t.index_entropy - 2.0).abs() < 1e-12);
        assert!((t.description_length - 4.0).abs() < 1e-12);
    }

    #[test]
    fn from_labels_normalizes() {
        let p = FlatPartition::from_labels(&[5, 9, 5, 2]).unwrap();
        assert_eq!(p.module_count(), 3);
        assert_eq!(p.assignment(), &[0, 1, 0, 2]);
        assert_eq!(p.modules(), vec![vec![0, 2], vec![1], vec![3]]);
    }
}
