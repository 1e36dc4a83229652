//! Weighted graphs as discretized manifolds, isometric group actions on them,
//! G-paths and the orbifold geodesic distance.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use crate::algebra::{Arrow, GroupAction};
use crate::error::{contract, domain, structural, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// A simple undirected graph with positive edge lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    lengths: BTreeMap<(usize, usize), f64>,
    connected: bool,
}

impl MetricGraph {
    /// Edges are unordered; they are stored with `a < b` in the given order.
    pub fn new(vertices: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut stored = Vec::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); vertices];
        let mut lengths = BTreeMap::new();
        for &(a, b, length) in edges {
            if a >= vertices || b >= vertices {
                return domain(format!("edge ({a}, {b}) uses a vertex outside 0..{vertices}"));
            }
            if a == b {
                return domain(format!("self-loop at vertex {a}"));
            }
            if !(length > 0.0 && length.is_finite()) {
                return domain(format!("edge ({a}, {b}) has non-positive length {length}"));
            }
            let key = (a.min(b), a.max(b));
            if lengths.insert(key, length).is_some() {
                return domain(format!("duplicate edge ({}, {})", key.0, key.1));
            }
            stored.push(Edge {
                a: key.0,
                b: key.1,
                length,
            });
            adjacency[a].push((b, length));
            adjacency[b].push((a, length));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by_key(|&(v, _)| v);
        }
        let mut graph = Self {
            vertices,
            edges: stored,
            adjacency,
            lengths,
            connected: false,
        };
        graph.connected = graph.components().len() <= 1;
        Ok(graph)
    }

    /// Cycle graph `C_n` with edges `{j, j+1 mod n}` of length `circumference / n`.
    pub fn refine_circle(n: usize, circumference: f64) -> Result<Self> {
        if n < 3 {
            return domain(format!("a circle needs at least 3 vertices, got {n}"));
        }
        if !(circumference > 0.0) {
            return domain(format!("circumference must be positive, got {circumference}"));
        }
        Self::cycle(n, circumference / n as f64)
    }

    pub fn cycle(n: usize, edge_length: f64) -> Result<Self> {
        if n < 3 {
            return domain(format!("a cycle needs at least 3 vertices, got {n}"));
        }
        let edges: Vec<_> = (0..n).map(|j| (j, (j + 1) % n, edge_length)).collect();
        Self::new(n, &edges)
    }

    /// Periodic `n × m` grid; vertex `(i, j)` has index `i * m + j`.
    pub fn grid_torus(n: usize, m: usize, edge_length: f64) -> Result<Self> {
        if n < 3 || m < 3 {
            return domain(format!("torus grid needs both sides ≥ 3, got {n}×{m}"));
        }
        let mut edges = Vec::with_capacity(2 * n * m);
        for i in 0..n {
            for j in 0..m {
                edges.push((i * m + j, ((i + 1) % n) * m + j, edge_length));
                edges.push((i * m + j, i * m + (j + 1) % m, edge_length));
            }
        }
        Self::new(n * m, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        self.lengths.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Average length of the edges at each vertex; isolated vertices get 1.
    pub fn vertex_volumes(&self) -> Vec<f64> {
        (0..self.vertices)
            .map(|x| {
                let nb = &self.adjacency[x];
                if nb.is_empty() {
                    1.0
                } else {
                    nb.iter().map(|&(_, l)| l).sum::<f64>() / nb.len() as f64
                }
            })
            .collect()
    }

    /// Uniform edge length if the graph is exactly the cycle `j ~ j+1 mod n`.
    pub fn as_cycle(&self) -> Option<f64> {
        let n = self.vertices;
        if n < 3 || self.edges.len() != n {
            return None;
        }
        let h = self.edge_length(0, 1)?;
        (0..n)
            .all(|j| self.edge_length(j, (j + 1) % n) == Some(h))
            .then_some(h)
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.vertices];
        let mut out = Vec::new();
        for start in 0..self.vertices {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(w, _) in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Single-source shortest paths; unreachable vertices get `f64::INFINITY`.
    pub fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.vertices];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(State {
            cost: 0.0,
            vertex: source,
        });
        while let Some(State { cost, vertex }) = heap.pop() {
            if cost > dist[vertex] {
                continue;
            }
            for &(next, len) in &self.adjacency[vertex] {
                let cand = cost + len;
                if cand < dist[next] {
                    dist[next] = cand;
                    heap.push(State {
                        cost: cand,
                        vertex: next,
                    });
                }
            }
        }
        dist
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dijkstra(a)[b]
    }
}

/// Min-heap entry: smaller cost first, then smaller vertex id.
#[derive(Debug, Clone, Copy)]
struct State {
    cost: f64,
    vertex: usize,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A sequence of edge paths glued by groupoid arrows: the end of segment `i`
/// equals `σ_i` applied to the start of segment `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GPath {
    pub segments: Vec<Vec<usize>>,
    pub junctions: Vec<Arrow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularLocus {
    /// Vertices with nontrivial stabilizer, paired with the stabilizer.
    pub vertices: Vec<(usize, Vec<usize>)>,
    pub pointlike: bool,
}

impl SingularLocus {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_ids(&self) -> Vec<usize> {
        self.vertices.iter().map(|(v, _)| *v).collect()
    }
}

/// A metric graph together with an isometric group action on its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOrbifold {
    graph: MetricGraph,
    action: GroupAction,
}

impl DiscreteOrbifold {
    pub fn new(graph: MetricGraph, action: GroupAction) -> Result<Self> {
        if graph.vertex_count() != action.points() {
            return structural(format!(
                "graph has {} vertices but the action is on {} points",
                graph.vertex_count(),
                action.points()
            ));
        }
        for g in action.group().elements() {
            for e in graph.edges() {
                let (ga, gb) = (action.act(g, e.a), action.act(g, e.b));
                match graph.edge_length(ga, gb) {
                    Some(l) if l == e.length => {}
                    _ => {
                        return domain(format!(
                            "element {g} maps edge ({}, {}) to ({ga}, {gb}), which is not an edge of equal length",
                            e.a, e.b
                        ))
                    }
                }
            }
        }
        Ok(Self { graph, action })
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn action(&self) -> &GroupAction {
        &self.action
    }

    /// Orbit graph: one vertex per orbit (ordered by smallest representative),
    /// edge lengths minimized over representatives. Edges inside an orbit are dropped.
    pub fn quotient_graph(&self) -> Result<MetricGraph> {
        let idx = self.action.orbit_index();
        let mut best: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in self.graph.edges() {
            let (i, j) = (idx[e.a], idx[e.b]);
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            let slot = best.entry(key).or_insert(f64::INFINITY);
            *slot = slot.min(e.length);
        }
        let edges: Vec<_> = best.into_iter().map(|((a, b), l)| (a, b, l)).collect();
        MetricGraph::new(self.action.orbits().len(), &edges)
    }

    fn require_connected(&self) -> Result<()> {
        if !self.graph.is_connected() {
            return structural("orbifold distance needs a connected graph");
        }
        Ok(())
    }

    /// `min_g d(x, g·x')`, cross-checked against Dijkstra on the orbit graph.
    pub fn orbifold_distance(&self, x: usize, xp: usize) -> Result<f64> {
        self.require_connected()?;
        let n = self.graph.vertex_count();
        if x >= n || xp >= n {
            return domain(format!("vertex out of range: ({x}, {xp}) on {n} vertices"));
        }
        let from_x = self.graph.dijkstra(x);
        let direct = self
            .action
            .group()
            .elements()
            .map(|g| from_x[self.action.act(g, xp)])
            .fold(f64::INFINITY, f64::min);
        let idx = self.action.orbit_index();
        let quotient = self.quotient_graph()?.dijkstra(idx[x])[idx[xp]];
        if (direct - quotient).abs() > 1e-12 * direct.max(1.0) {
            return contract(format!(
                "orbifold distance mismatch for ({x}, {xp}): min over group {direct}, orbit graph {quotient}"
            ));
        }
        Ok(direct)
    }

    /// Distance between orbits given by their indices in [`GroupAction::orbits`].
    pub fn orbit_distance(&self, i: usize, j: usize) -> Result<f64> {
        let orbits = self.action.orbits();
        if i >= orbits.len() || j >= orbits.len() {
            return domain(format!("orbit index out of range: ({i}, {j})"));
        }
        self.orbifold_distance(orbits[i][0], orbits[j][0])
    }

    /// All vertex pairs `(x, x', d)` in lexicographic order.
    pub fn distance_table(&self) -> Result<Vec<(usize, usize, f64)>> {
        let n = self.graph.vertex_count();
        let mut out = Vec::with_capacity(n * n);
        for x in 0..n {
            for xp in 0..n {
                out.push((x, xp, self.orbifold_distance(x, xp)?));
            }
        }
        Ok(out)
    }

    pub fn singular_locus(&self) -> SingularLocus {
        let n = self.graph.vertex_count();
        let vertices: Vec<(usize, Vec<usize>)> = (0..n)
            .map(|x| (x, self.action.stabilizer(x)))
            .filter(|(_, stab)| stab.len() > 1)
            .collect();
        let singular: Vec<bool> = {
            let mut s = vec![false; n];
            for (v, _) in &vertices {
                s[*v] = true;
            }
            s
        };
        let adjacent_pair = self.graph.edges().iter().any(|e| singular[e.a] && singular[e.b]);
        let e = self.action.group().identity();
        let edge_fixed = self.graph.edges().iter().any(|edge| {
            self.action
                .group()
                .elements()
                .filter(|&g| g != e)
                .any(|g| self.action.act(g, edge.a) == edge.a && self.action.act(g, edge.b) == edge.b)
        });
        SingularLocus {
            vertices,
            pointlike: !adjacent_pair && !edge_fixed,
        }
    }

    /// Total length of a G-path; arrows at junctions contribute nothing.
    pub fn gpath_length(&self, path: &GPath) -> Result<f64> {
        if path.segments.is_empty() {
            return structural("a G-path needs at least one segment");
        }
        if path.junctions.len() + 1 != path.segments.len() {
            return structural(format!(
                "{} segments need {} junctions, got {}",
                path.segments.len(),
                path.segments.len() - 1,
                path.junctions.len()
            ));
        }
        let n = self.graph.vertex_count();
        let mut total = 0.0;
        for (i, seg) in path.segments.iter().enumerate() {
            if seg.is_empty() {
                return structural(format!("segment {i} is empty"));
            }
            if let Some(&bad) = seg.iter().find(|&&v| v >= n) {
                return structural(format!("segment {i} visits unknown vertex {bad}"));
            }
            for w in seg.windows(2) {
                total += self.graph.edge_length(w[0], w[1]).ok_or_else(|| {
                    crate::Error::Structural(format!("segment {i} uses non-edge ({}, {})", w[0], w[1]))
                })?;
            }
        }
        for (i, sigma) in path.junctions.iter().enumerate() {
            let end = *path.segments[i].last().expect("non-empty");
            let next_start = path.segments[i + 1][0];
            if sigma.g >= self.action.group().order()
                || sigma.x != next_start
                || self.action.act(sigma.g, sigma.x) != end
            {
                return structural(format!(
                    "junction {i}: arrow {sigma} does not carry the start {next_start} of segment {} to the end {end} of segment {i}",
                    i + 1
                ));
            }
        }
        Ok(total)
    }
}
