//! Graph families, point clouds, clusters and signals for simulations.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::graph::{Cluster, DirectedGraph};

/// Attempts made by [`connected_geometric_graph`] before giving up.
pub const GEOMETRIC_ATTEMPTS: u64 = 20;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d1_049b_b133_111e);
    z ^ (z >> 31)
}

/// Seed of the stream `(master, stream, index)`; independent of scheduling.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(master) ^ stream) ^ index)
}

/// Generator for the stream `(master, stream, index)`.
pub fn stream_rng(master: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index))
}

fn undirected_from_map(p: usize, edges: BTreeMap<(usize, usize), f64>) -> Result<DirectedGraph> {
    let list: Vec<(usize, usize, f64)> = edges.into_iter().map(|((u, v), w)| (u, v, w)).collect();
    DirectedGraph::from_undirected(p, &list)
}

/// `side × side` torus with unit weights; vertex `(r, c)` has id
/// `r * side + c`. At `side = 2` the two wraparound edges between a pair
/// coincide and are merged into one edge of weight 2.
pub fn torus_graph(side: usize) -> Result<DirectedGraph> {
    if side < 2 {
        return Err(invalid(format!("torus side must be ≥ 2, got {side}")));
    }
    let id = |r: usize, c: usize| r * side + c;
    let mut edges = BTreeMap::new();
    for r in 0..side {
        for c in 0..side {
            let v = id(r, c);
            for w in [id(r, (c + 1) % side), id((r + 1) % side, c)] {
                *edges.entry((v.min(w), v.max(w))).or_insert(0.0) += 1.0;
            }
        }
    }
    undirected_from_map(side * side, edges)
}

/// Cycle on `p ≥ 3` vertices.
pub fn cycle_graph(p: usize) -> Result<DirectedGraph> {
    if p < 3 {
        return Err(invalid(format!("cycle needs p ≥ 3, got {p}")));
    }
    let edges: Vec<_> = (0..p)
        .map(|i| (i.min((i + 1) % p), i.max((i + 1) % p), 1.0))
        .collect();
    DirectedGraph::from_undirected(p, &edges)
}

/// Complete graph on `p ≥ 2` vertices.
pub fn complete_graph(p: usize) -> Result<DirectedGraph> {
    if p < 2 {
        return Err(invalid(format!("complete graph needs p ≥ 2, got {p}")));
    }
    let edges: Vec<_> = (0..p)
        .flat_map(|u| (u + 1..p).map(move |v| (u, v, 1.0)))
        .collect();
    DirectedGraph::from_undirected(p, &edges)
}

/// Path on `p ≥ 1` vertices.
pub fn path_graph(p: usize) -> Result<DirectedGraph> {
    let edges: Vec<_> = (1..p).map(|i| (i - 1, i, 1.0)).collect();
    DirectedGraph::from_undirected(p, &edges)
}

/// Points in `[0, 1]^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    seed: u64,
}

impl PointCloud {
    /// `n` i.i.d. points, uniform on the unit cube.
    pub fn uniform(n: usize, dim: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("point cloud needs n ≥ 2, got {n}")));
        }
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n * dim).map(|_| rng.random::<f64>()).collect();
        Ok(PointCloud { dim, coords, seed })
    }

    /// Wraps explicit coordinates, one row per point.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.len() < 2 || dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(invalid(
                "need at least two points of equal positive dimension",
            ));
        }
        let coords: Vec<f64> = points.iter().flatten().copied().collect();
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        Ok(PointCloud {
            dim,
            coords,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The sampling density of generated clouds.
    pub fn density(&self) -> &'static str {
        "uniform-unit-cube"
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn dist2(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// CSV with columns `x0,x1,...`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|d| format!("x{d}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self.point(i).iter().map(f64::to_string).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Symmetric k-nearest-neighbour graph: `i ~ j` when either is among the
/// other's `k` nearest points. Distance ties go to the lower index.
pub fn knn_graph(points: &PointCloud, k: usize) -> Result<DirectedGraph> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(invalid(format!("k must lie in 1..{n}, got {k}")));
    }
    let mut edges = BTreeMap::new();
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i).map(|j| (points.dist2(i, j), j)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &order[..k] {
            edges.insert((i.min(j), i.max(j)), 1.0);
        }
    }
    undirected_from_map(n, edges)
}

/// ε-graph: `i ~ j` when `‖z_i − z_j‖ ≤ ε`.
pub fn epsilon_graph(points: &PointCloud, eps: f64) -> Result<DirectedGraph> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid(format!("ε must be positive, got {eps}")));
    }
    let n = points.len();
    let eps2 = eps * eps;
    let mut edges = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            if points.dist2(i, j) <= eps2 {
                edges.insert((i, j), 1.0);
            }
        }
    }
    undirected_from_map(n, edges)
}

/// Geometric graph families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Geometric {
    Knn(usize),
    Epsilon(f64),
}

/// Draws point clouds with seeds `seed, seed + 1, …` until the geometric
/// graph is connected, for at most [`GEOMETRIC_ATTEMPTS`] attempts.
pub fn connected_geometric_graph(
    n: usize,
    dim: usize,
    family: Geometric,
    seed: u64,
) -> Result<(DirectedGraph, PointCloud)> {
    for attempt in 0..GEOMETRIC_ATTEMPTS {
        let points = PointCloud::uniform(n, dim, seed.wrapping_add(attempt))?;
        let g = match family {
            Geometric::Knn(k) => knn_graph(&points, k)?,
            Geometric::Epsilon(eps) => epsilon_graph(&points, eps)?,
        };
        if g.is_connected() {
            return Ok((g, points));
        }
    }
    Err(Error::Disconnected)
}

/// Breadth-first ball around `seed_vertex` with exactly `target_size`
/// vertices. Layers are taken whole while they fit; the last layer is
/// truncated to its lowest vertex ids.
pub fn ball_cluster(
    graph: &DirectedGraph,
    seed_vertex: usize,
    target_size: usize,
) -> Result<Cluster> {
    let p = graph.vertex_count();
    if seed_vertex >= p {
        return Err(Error::InvalidVertex { id: seed_vertex, p });
    }
    if target_size == 0 || target_size > p {
        return Err(invalid(format!(
            "target size must lie in 1..={p}, got {target_size}"
        )));
    }
    let mut seen = vec![false; p];
    seen[seed_vertex] = true;
    let mut members = vec![seed_vertex];
    let mut layer = vec![seed_vertex];
    while members.len() < target_size && !layer.is_empty() {
        let mut next = Vec::new();
        for &v in &layer {
            for w in graph.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        next.sort_unstable();
        next.truncate(target_size - members.len());
        members.extend_from_slice(&next);
        layer = next;
    }
    if members.len() < target_size {
        // the component of the seed is too small
        let mut rest: VecDeque<usize> = (0..p).filter(|&v| !seen[v]).collect();
        while members.len() < target_size {
            members.push(rest.pop_front().expect("target_size ≤ p"));
        }
    }
    Cluster::new(graph, members)
}

/// Mean vector `x = (μ / √|C|) 1_C` of the alternative.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSpec {
    pub mu: f64,
    pub cluster: Cluster,
    pub x: Vec<f64>,
}

pub fn make_signal(p: usize, cluster: &Cluster, mu: f64) -> Result<SignalSpec> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(invalid(format!("μ must be finite and ≥ 0, got {mu}")));
    }
    if cluster.is_empty() {
        return Err(invalid("signal cluster is empty"));
    }
    if let Some(&v) = cluster.members().iter().find(|&&v| v >= p) {
        return Err(Error::InvalidVertex { id: v, p });
    }
    let level = mu / (cluster.len() as f64).sqrt();
    let mut x = vec![0.0; p];
    for &v in cluster.members() {
        x[v] = level;
    }
    Ok(SignalSpec {
        mu,
        cluster: cluster.clone(),
        x,
    })
}

/// `y = x + ξ` with `ξ ~ N(0, I)`; `x = 0` when `signal` is `None`.
pub fn observe<R: Rng + ?Sized>(p: usize, signal: Option<&SignalSpec>, rng: &mut R) -> Vec<f64> {
    let mut y: Vec<f64> = (0..p)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    if let Some(s) = signal {
        for (yi, xi) in y.iter_mut().zip(&s.x) {
            *yi += xi;
        }
    }
    y
}
