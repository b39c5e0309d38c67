//! Variable-intersection and constraint–monomial graphs and the summary
//! statistics used as instance features.

use std::collections::{BTreeMap, BTreeSet};

use polyrlt_core::{Constraint, Monomial, Problem, Sense};

/// Simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { adj: vec![BTreeSet::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Graph::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    /// Ignores self-loops and repeated edges.
    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(a, ns)| ns.range(a + 1..).map(move |&b| (a, b)))
    }
}

/// Variables, adjacent iff they share a monomial.
pub fn build_vig(prob: &Problem) -> Graph {
    let mut g = Graph::new(prob.num_vars());
    for m in prob.monomials() {
        let vars: Vec<usize> = m.support().collect();
        for (i, &a) in vars.iter().enumerate() {
            for &b in &vars[i + 1..] {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// Bipartite: vertex `0` (objective) and `1..=m` (constraints, in a
/// canonical order so the graph ignores how the file lists them), then one
/// vertex per distinct nonconstant monomial; an edge wherever a monomial
/// appears in a polynomial.
pub fn build_cmig(prob: &Problem) -> Graph {
    let monos: BTreeMap<Monomial, usize> = prob.monomials().into_iter().zip(0..).collect();
    let mut cons: Vec<&Constraint> = prob.constraints.iter().collect();
    cons.sort_by_cached_key(|c| {
        let terms: Vec<(Monomial, u64)> = c.body.terms().map(|(m, a)| (m.clone(), a.to_bits())).collect();
        (c.sense == Sense::Eq, c.rhs.to_bits(), terms)
    });
    let polys = std::iter::once(&prob.objective).chain(cons.iter().map(|c| &c.body));
    let k = 1 + cons.len();
    let mut g = Graph::new(k + monos.len());
    for (p, poly) in polys.enumerate() {
        for m in poly.monomials().filter(|m| !m.is_constant()) {
            g.add_edge(p, k + monos[m]);
        }
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphStats {
    pub density: f64,
    /// Best modularity seen during greedy agglomeration (an estimate).
    pub modularity: f64,
    /// Width of a min-fill elimination order (an upper bound).
    pub treewidth_ub: usize,
    pub transitivity: f64,
}

pub fn graph_stats(g: &Graph) -> GraphStats {
    GraphStats {
        density: density(g),
        modularity: greedy_modularity(g),
        treewidth_ub: min_fill_width(g),
        transitivity: transitivity(g),
    }
}

pub fn density(g: &Graph) -> f64 {
    let n = g.num_vertices();
    if n <= 1 {
        return 0.0;
    }
    2.0 * g.num_edges() as f64 / (n * (n - 1)) as f64
}

/// Modularity of a partition given as a community label per vertex.
pub fn modularity(g: &Graph, labels: &[usize]) -> f64 {
    let m = g.num_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let mut inner: BTreeMap<usize, f64> = BTreeMap::new();
    let mut degree: BTreeMap<usize, f64> = BTreeMap::new();
    for v in 0..g.num_vertices() {
        *degree.entry(labels[v]).or_default() += g.neighbors(v).len() as f64;
    }
    for (a, b) in g.edges() {
        if labels[a] == labels[b] {
            *inner.entry(labels[a]).or_default() += 1.0;
        }
    }
    degree.iter().map(|(c, &d)| inner.get(c).copied().unwrap_or(0.0) / m - (d / (2.0 * m)).powi(2)).sum()
}

/// Clauset–Newman–Moore style: start from singletons, repeatedly merge the
/// adjacent pair with the largest modularity gain, keep the best value seen.
pub fn greedy_modularity(g: &Graph) -> f64 {
    let n = g.num_vertices();
    let m = g.num_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    // e[c][d]: fraction of edge ends from c to d (each edge counted both ways)
    let mut e: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for (a, b) in g.edges() {
        *e[a].entry(b).or_default() += 0.5 / m;
        *e[b].entry(a).or_default() += 0.5 / m;
    }
    let mut deg: Vec<f64> = (0..n).map(|v| g.neighbors(v).len() as f64 / (2.0 * m)).collect();
    let mut alive = vec![true; n];
    let mut q: f64 = -deg.iter().map(|a| a * a).sum::<f64>();
    let mut best = q;
    loop {
        let mut pick: Option<(f64, usize, usize)> = None;
        for c in (0..n).filter(|&c| alive[c]) {
            for (&d, &ecd) in e[c].range(c + 1..) {
                let gain = 2.0 * (ecd - deg[c] * deg[d]);
                if pick.is_none_or(|p| gain > p.0) {
                    pick = Some((gain, c, d));
                }
            }
        }
        let Some((gain, c, d)) = pick else { break };
        q += gain;
        best = best.max(q);
        // fold d into c
        let row = std::mem::take(&mut e[d]);
        for (k, w) in row {
            e[k].remove(&d);
            if k != c {
                *e[c].entry(k).or_default() += w;
                *e[k].entry(c).or_default() += w;
            }
        }
        e[c].remove(&d);
        deg[c] += deg[d];
        alive[d] = false;
    }
    best
}

/// Eliminates, at each step, the vertex whose neighborhood needs the fewest
/// fill edges (ties: fewer neighbors, then lowest index). Returns the
/// largest neighborhood seen at elimination.
pub fn min_fill_width(g: &Graph) -> usize {
    let mut adj: Vec<BTreeSet<usize>> = (0..g.num_vertices()).map(|v| g.neighbors(v).clone()).collect();
    let mut alive: BTreeSet<usize> = (0..g.num_vertices()).collect();
    let mut width = 0;
    while !alive.is_empty() {
        let v = *alive
            .iter()
            .min_by_key(|&&v| {
                let ns: Vec<usize> = adj[v].iter().copied().collect();
                let mut fill = 0;
                for (i, &a) in ns.iter().enumerate() {
                    fill += ns[i + 1..].iter().filter(|&&b| !adj[a].contains(&b)).count();
                }
                (fill, ns.len(), v)
            })
            .unwrap();
        let ns: Vec<usize> = adj[v].iter().copied().collect();
        width = width.max(ns.len());
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
            adj[a].remove(&v);
        }
        adj[v].clear();
        alive.remove(&v);
    }
    width
}

/// `3·triangles / connected triples`; 0 when there are no triples.
pub fn transitivity(g: &Graph) -> f64 {
    let mut closed = 0usize;
    let mut triples = 0usize;
    for v in 0..g.num_vertices() {
        let ns: Vec<usize> = g.neighbors(v).iter().copied().collect();
        let k = ns.len();
        triples += k * k.saturating_sub(1) / 2;
        for (i, &a) in ns.iter().enumerate() {
            closed += ns[i + 1..].iter().filter(|&&b| g.has_edge(a, b)).count();
        }
    }
    // each triangle is closed at all three of its vertices
    if triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    }
}
