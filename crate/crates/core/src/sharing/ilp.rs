use serde::Serialize;

use super::graph::SharingGraph;

/// Which symbols to factorize and which endpoint claims each product.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IlpSolution {
    pub x: Vec<bool>,
    /// Ordered pairs `(i, j)` with `y_ij = 1`.
    pub claims: Vec<(usize, usize)>,
    pub objective: usize,
}

impl IlpSolution {
    pub fn y(&self, i: usize, j: usize) -> bool {
        self.claims.contains(&(i, j))
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&v| self.x[v]).collect()
    }

    /// Checks both constraint families of the model.
    pub fn is_feasible(&self, g: &SharingGraph) -> bool {
        let covered = g.edges.iter().all(|&(i, j)| self.y(i, j) as u8 + self.y(j, i) as u8 == 1);
        let bounded = (0..g.vertices.len()).all(|v| {
            let used = self.claims.iter().filter(|&&(i, _)| i == v).count();
            used <= g.degree(v) * self.x[v] as usize
        });
        covered && bounded && self.objective == self.x.iter().filter(|&&b| b).count()
    }
}

/// Exact minimum of the factorization model by include-first branch and
/// bound. Among optimal selections the lexicographically smallest vertex list
/// is returned.
pub fn solve_ilp(g: &SharingGraph) -> IlpSolution {
    let n = g.vertices.len();
    let mut lower: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &g.edges {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        lower[hi].push(lo);
    }
    let mut best: Option<Vec<bool>> = None;
    let mut cur = vec![false; n];
    search(0, 0, &mut cur, &lower, g, &mut best);
    let x = best.unwrap_or_else(|| vec![true; n]);
    let mut claims = Vec::new();
    for &(a, b) in &g.edges {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if x[lo] {
            claims.push((lo, hi));
        } else {
            claims.push((hi, lo));
        }
    }
    claims.sort();
    let objective = x.iter().filter(|&&b| b).count();
    IlpSolution { x, claims, objective }
}

fn search(
    v: usize,
    count: usize,
    cur: &mut Vec<bool>,
    lower: &[Vec<usize>],
    g: &SharingGraph,
    best: &mut Option<Vec<bool>>,
) {
    if best.as_ref().is_some_and(|b| count >= b.iter().filter(|&&x| x).count()) {
        return;
    }
    if v == cur.len() {
        *best = Some(cur.clone());
        return;
    }
    if g.degree(v) > 0 {
        cur[v] = true;
        search(v + 1, count + 1, cur, lower, g, best);
        cur[v] = false;
    }
    if lower[v].iter().all(|&u| cur[u]) {
        search(v + 1, count, cur, lower, g, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> SharingGraph {
        SharingGraph::from_edges((0..n).map(|i| format!("s{i}")).collect(), edges.to_vec())
    }

    fn brute(g: &SharingGraph) -> usize {
        let n = g.vertices.len();
        (0u32..1 << n)
            .filter(|m| g.edges.iter().all(|&(a, b)| m & (1 << a) != 0 || m & (1 << b) != 0))
            .map(|m| m.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn star_selects_its_centre() {
        let g = graph(3, &[(0, 1), (0, 2)]);
        let s = solve_ilp(&g);
        assert_eq!(s.objective, 1);
        assert_eq!(s.selected(), vec![0]);
        assert!(s.is_feasible(&g));
    }

    #[test]
    fn empty_graph_selects_nothing() {
        let g = graph(4, &[]);
        let s = solve_ilp(&g);
        assert_eq!(s.objective, 0);
        assert!(s.claims.is_empty());
    }

    #[test]
    fn path_needs_two() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let s = solve_ilp(&g);
        assert_eq!(s.objective, 2);
        assert_eq!(s.objective, brute(&g));
        assert_eq!(s.selected(), vec![0, 2]);
        assert!(s.is_feasible(&g));
    }

    #[test]
    fn matching_takes_the_smaller_names() {
        let g = graph(4, &[(0, 2), (1, 3)]);
        assert_eq!(solve_ilp(&g).selected(), vec![0, 1]);
    }
}
