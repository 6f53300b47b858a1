use std::collections::BTreeSet;

use serde::Serialize;

/// Vertex of the sharing graph: one symbol, possibly standing for several
/// instances (statements in which it occurs).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Vertex {
    pub symbol: String,
    pub instances: Vec<usize>,
}

/// Products that expansion would create between multilinear symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SharingGraph {
    pub vertices: Vec<Vertex>,
    /// Unordered edges stored as `(lo, hi)`, sorted.
    pub edges: Vec<(usize, usize)>,
}

/// Outcome of the merge check for one symbol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MergeDecision {
    pub symbol: String,
    pub instances: Vec<usize>,
    pub merged: bool,
    pub flops_merged: u64,
    pub flops_split: u64,
}

fn norm(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SharingGraph {
    /// Graph whose vertex `i` is the single instance `0` of `names[i]`.
    pub fn from_edges(names: Vec<String>, edges: Vec<(usize, usize)>) -> Self {
        let vertices = names.into_iter().map(|symbol| Vertex { symbol, instances: vec![0] }).collect();
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().filter(|(a, b)| a != b).map(|(a, b)| norm(a, b)).collect();
        SharingGraph { vertices, edges: edges.into_iter().collect() }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn vertex_of(&self, symbol: &str, instance: usize) -> Option<usize> {
        self.vertices.iter().position(|v| v.symbol == symbol && v.instances.contains(&instance))
    }

    pub fn symbols(&self) -> Vec<&str> {
        self.vertices.iter().map(|v| v.symbol.as_str()).collect()
    }

    pub fn edge_names(&self) -> Vec<(&str, &str)> {
        self.edges.iter().map(|&(a, b)| (self.vertices[a].symbol.as_str(), self.vertices[b].symbol.as_str())).collect()
    }

    /// Collapses the given vertices into the first one, taking the union of
    /// their edges.
    pub fn merged(&self, group: &[usize]) -> SharingGraph {
        let Some(&keep) = group.iter().min() else { return self.clone() };
        let gone: BTreeSet<usize> = group.iter().copied().filter(|&v| v != keep).collect();
        let mut remap = Vec::with_capacity(self.vertices.len());
        let mut vertices: Vec<Vertex> = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if gone.contains(&i) {
                remap.push(usize::MAX);
            } else {
                remap.push(vertices.len());
                vertices.push(v.clone());
            }
        }
        for &g in &gone {
            remap[g] = remap[keep];
            let extra = self.vertices[g].instances.clone();
            vertices[remap[keep]].instances.extend(extra);
        }
        vertices[remap[keep]].instances.sort();
        let edges: BTreeSet<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| (remap[a], remap[b]))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| norm(a, b))
            .collect();
        SharingGraph { vertices, edges: edges.into_iter().collect() }
    }
}

/// Merges all instances of each symbol into one vertex unless `cost` reports
/// that the merged graph leads to more operations than the unmerged one.
pub fn merge_vertices(g: &SharingGraph, mut cost: impl FnMut(&SharingGraph) -> u64) -> (SharingGraph, Vec<MergeDecision>) {
    let mut cur = g.clone();
    let mut decisions = Vec::new();
    let mut seen = BTreeSet::new();
    let names: Vec<String> = g.vertices.iter().map(|v| v.symbol.clone()).collect();
    for name in names {
        if !seen.insert(name.clone()) {
            continue;
        }
        let group: Vec<usize> = (0..cur.vertices.len()).filter(|&v| cur.vertices[v].symbol == name).collect();
        if group.len() < 2 {
            continue;
        }
        let candidate = cur.merged(&group);
        let (merged_cost, split_cost) = (cost(&candidate), cost(&cur));
        let merged = merged_cost <= split_cost;
        decisions.push(MergeDecision {
            symbol: name,
            instances: group.iter().flat_map(|&v| cur.vertices[v].instances.clone()).collect(),
            merged,
            flops_merged: merged_cost,
            flops_split: split_cost,
        });
        if merged {
            cur = candidate;
        }
    }
    (cur, decisions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_instances() -> SharingGraph {
        SharingGraph {
            vertices: vec![
                Vertex { symbol: "b[j]".into(), instances: vec![0] },
                Vertex { symbol: "b[j]".into(), instances: vec![1] },
                Vertex { symbol: "c[i]".into(), instances: vec![0] },
                Vertex { symbol: "d[i]".into(), instances: vec![1] },
            ],
            edges: vec![(0, 2), (1, 3)],
        }
    }

    #[test]
    fn instances_merge_with_edge_union() {
        let (g, d) = merge_vertices(&two_instances(), |_| 0);
        assert_eq!(g.symbols(), vec!["b[j]", "c[i]", "d[i]"]);
        assert_eq!(g.edge_names(), vec![("b[j]", "c[i]"), ("b[j]", "d[i]")]);
        assert_eq!(g.vertices[0].instances, vec![0, 1]);
        assert!(d[0].merged);
    }

    #[test]
    fn costly_merge_is_refused() {
        let (g, d) = merge_vertices(&two_instances(), |g| if g.vertices.len() == 3 { 10 } else { 7 });
        assert_eq!(g, two_instances());
        assert!(!d[0].merged);
        assert_eq!((d[0].flops_merged, d[0].flops_split), (10, 7));
    }

    #[test]
    fn distinct_symbols_unchanged() {
        let g = SharingGraph::from_edges(vec!["a".into(), "b".into()], vec![(0, 1)]);
        let (m, d) = merge_vertices(&g, |_| 0);
        assert_eq!(m, g);
        assert!(d.is_empty());
    }
}
