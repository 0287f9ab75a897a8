//! Effective resistances, resistance-weighted cluster boundaries, the
//! type-1 thresholds of the GSS and LESS, and Wilson's uniform spanning tree
//! sampler.
//!
//! Resistances are defined on the undirected skeleton with symmetrized
//! conductances `(W_uv + W_vu) / 2`. For graphs built from undirected edges
//! this is the original weight; for directed inputs the table is flagged
//! `symmetrized`.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::graph::{DirectedGraph, UndirectedEdge};

/// Largest graph handled by the dense Laplacian factorization.
pub const MAX_DENSE_VERTICES: usize = 5_000;

const RESIDUAL_LIMIT: f64 = 1e-9;

/// Inverse of the Laplacian grounded at the last vertex.
#[derive(Clone, Debug)]
pub struct GroundedLaplacian {
    p: usize,
    inverse: DMatrix<f64>,
    residual: f64,
}

impl GroundedLaplacian {
    pub fn new(graph: &DirectedGraph) -> Result<Self> {
        let p = graph.vertex_count();
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        if p > MAX_DENSE_VERTICES {
            return Err(Error::TooLarge {
                p,
                guard: MAX_DENSE_VERTICES,
            });
        }
        let q = p - 1;
        let mut lap = DMatrix::<f64>::zeros(q, q);
        for e in graph.symmetrized_edges() {
            for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                if a < q {
                    lap[(a, a)] += e.weight;
                    if b < q {
                        lap[(a, b)] -= e.weight;
                    }
                }
            }
        }
        if q == 0 {
            return Ok(GroundedLaplacian {
                p,
                inverse: lap,
                residual: 0.0,
            });
        }
        let chol = lap
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("grounded Laplacian is not positive definite"))?;
        let inverse = chol.inverse();
        let identity = DMatrix::<f64>::identity(q, q);
        let residual = (&lap * &inverse - &identity).norm() / identity.norm();
        if residual.is_nan() || residual > RESIDUAL_LIMIT {
            return Err(invalid(format!(
                "Laplacian solve residual {residual:e} exceeds 1e-9"
            )));
        }
        Ok(GroundedLaplacian {
            p,
            inverse,
            residual,
        })
    }

    /// Relative Frobenius residual `‖L_g L_g⁻¹ − I‖ / ‖I‖`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    fn entry(&self, a: usize, b: usize) -> f64 {
        let q = self.p - 1;
        if a == q || b == q {
            0.0
        } else {
            self.inverse[(a, b)]
        }
    }

    /// `(δ_u − δ_v)ᵀ Δ† (δ_u − δ_v)`
    pub fn resistance(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        self.entry(u, u) + self.entry(v, v) - 2.0 * self.entry(u, v)
    }
}

/// Effective resistance between two vertices by solving the grounded
/// Laplacian system for `δ_u − δ_v`.
pub fn effective_resistance(graph: &DirectedGraph, u: usize, v: usize) -> Result<f64> {
    let p = graph.vertex_count();
    for id in [u, v] {
        if id >= p {
            return Err(Error::InvalidVertex { id, p });
        }
    }
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    if u == v {
        return Ok(0.0);
    }
    let ground = p - 1;
    let q = p - 1;
    let mut lap = DMatrix::<f64>::zeros(q, q);
    for e in graph.symmetrized_edges() {
        for (a, b) in [(e.u, e.v), (e.v, e.u)] {
            if a < q {
                lap[(a, a)] += e.weight;
                if b < q {
                    lap[(a, b)] -= e.weight;
                }
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(q);
    if u != ground {
        rhs[u] += 1.0;
    }
    if v != ground {
        rhs[v] -= 1.0;
    }
    let chol = lap
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("grounded Laplacian is not positive definite"))?;
    let potential = chol.solve(&rhs);
    let residual = (&lap * &potential - &rhs).norm() / rhs.norm();
    if residual.is_nan() || residual > RESIDUAL_LIMIT {
        return Err(invalid(format!(
            "Laplacian solve residual {residual:e} exceeds 1e-9"
        )));
    }
    let at = |w: usize| if w == ground { 0.0 } else { potential[w] };
    Ok(at(u) - at(v))
}

/// Effective resistance of every arc.
#[derive(Clone, Debug)]
pub struct ResistanceTable {
    per_arc: Vec<f64>,
    edges: Vec<(UndirectedEdge, f64)>,
    residual: f64,
    symmetrized: bool,
}

impl ResistanceTable {
    pub fn new(graph: &DirectedGraph) -> Result<Self> {
        let lap = GroundedLaplacian::new(graph)?;
        let per_arc = graph
            .arcs()
            .iter()
            .map(|a| lap.resistance(a.tail, a.head))
            .collect();
        let edges = graph
            .symmetrized_edges()
            .into_iter()
            .map(|e| (e, lap.resistance(e.u, e.v)))
            .collect();
        Ok(ResistanceTable {
            per_arc,
            edges,
            residual: lap.residual(),
            symmetrized: !graph.is_symmetric(),
        })
    }

    /// Resistances in arc order.
    pub fn per_arc(&self) -> &[f64] {
        &self.per_arc
    }

    /// Skeleton edges with their resistances, ordered by `(u, v)`.
    pub fn edges(&self) -> &[(UndirectedEdge, f64)] {
        &self.edges
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Whether a directed input was symmetrized to define resistances.
    pub fn symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn max_resistance(&self) -> f64 {
        self.per_arc.iter().copied().fold(0.0, f64::max)
    }

    /// `Σ_e W_e r_e` over skeleton edges; equals `p − 1` on connected graphs.
    pub fn foster_sum(&self) -> f64 {
        self.edges.iter().map(|(e, r)| e.weight * r).sum()
    }

    /// CSV with columns `tail,head,weight,resistance`, one row per arc.
    pub fn write_csv<W: Write>(&self, graph: &DirectedGraph, mut out: W) -> Result<()> {
        writeln!(out, "tail,head,weight,resistance")?;
        for (a, r) in graph.arcs().iter().zip(&self.per_arc) {
            writeln!(out, "{},{},{},{}", a.tail, a.head, a.weight, r)?;
        }
        Ok(())
    }
}

/// Batched effective resistances over all arcs.
pub fn resistance_table(graph: &DirectedGraph) -> Result<ResistanceTable> {
    ResistanceTable::new(graph)
}

/// `Σ_{(u,v) ∈ E : u ∈ C, v ∉ C} W_uv r_uv`
pub fn boundary_resistance(
    graph: &DirectedGraph,
    table: &ResistanceTable,
    members: &[usize],
) -> Result<f64> {
    let mask = graph.mask(members)?;
    Ok(boundary_resistance_mask(graph, table, &mask))
}

fn boundary_resistance_mask(graph: &DirectedGraph, table: &ResistanceTable, mask: &[bool]) -> f64 {
    graph
        .arcs()
        .iter()
        .zip(table.per_arc())
        .filter(|(a, _)| mask[a.tail] && !mask[a.head])
        .map(|(a, r)| a.weight * r)
        .sum()
}

/// `ρ · max_e r_e`, an upper bound on the boundary resistance of every
/// cluster with `out(C) ≤ ρ`.
pub fn r_class_bound(table: &ResistanceTable, rho: f64) -> Result<f64> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(invalid(format!("ρ must be finite and ≥ 0, got {rho}")));
    }
    Ok(rho * table.max_resistance())
}

/// Exact `max { boundary_resistance(C) : out(C) ≤ ρ }` by enumeration.
pub fn r_class_exact(graph: &DirectedGraph, table: &ResistanceTable, rho: f64) -> Result<f64> {
    const GUARD: usize = 20;
    let p = graph.vertex_count();
    if p > GUARD {
        return Err(Error::TooLarge { p, guard: GUARD });
    }
    let mut mask = vec![false; p];
    let mut best = 0.0f64;
    for bits in 1u32..(1u32 << p) {
        for (v, m) in mask.iter_mut().enumerate() {
            *m = bits >> v & 1 == 1;
        }
        if graph.out_weight_mask(&mask) <= rho {
            best = best.max(boundary_resistance_mask(graph, table, &mask));
        }
    }
    Ok(best)
}

fn check_threshold_domain(p: usize, r_class: f64, alpha: f64) -> Result<()> {
    if p < 2 {
        return Err(invalid(format!("thresholds need p ≥ 2, got {p}")));
    }
    if !(r_class.is_finite() && r_class >= 0.0) {
        return Err(invalid(format!(
            "r_class must be finite and ≥ 0, got {r_class}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("α must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Level-α threshold for the GSS:
/// `(√r + √(½ log p)) √(2 log(p − 1)) + √(2 log 2) + √(2 log(1/α))`.
pub fn gss_threshold(p: usize, r_class: f64, alpha: f64) -> Result<f64> {
    check_threshold_domain(p, r_class, alpha)?;
    let lp = (p as f64).ln();
    Ok(
        (r_class.sqrt() + (0.5 * lp).sqrt()) * (2.0 * ((p - 1) as f64).ln()).sqrt()
            + (2.0 * 2f64.ln()).sqrt()
            + (2.0 * (1.0 / alpha).ln()).sqrt(),
    )
}

/// Level-α threshold for the LESS. With `r' = (√r + √(½ log p))²` and
/// `a = √(r' log p)`:
/// `(log(2p) + 1) / a + 2a + √(2 log p) + √(2 log(1/α))`.
pub fn less_threshold(p: usize, r_class: f64, alpha: f64) -> Result<f64> {
    check_threshold_domain(p, r_class, alpha)?;
    let lp = (p as f64).ln();
    let spread = (r_class.sqrt() + (0.5 * lp).sqrt()).powi(2);
    let a = (spread * lp).sqrt();
    Ok(((2.0 * p as f64).ln() + 1.0) / a
        + 2.0 * a
        + (2.0 * lp).sqrt()
        + (2.0 * (1.0 / alpha).ln()).sqrt())
}

/// Both thresholds with their inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdReport {
    pub p: usize,
    pub r_class: f64,
    pub alpha: f64,
    pub gss_threshold: f64,
    pub less_threshold: f64,
}

impl ThresholdReport {
    pub fn new(p: usize, r_class: f64, alpha: f64) -> Result<Self> {
        Ok(ThresholdReport {
            p,
            r_class,
            alpha,
            gss_threshold: gss_threshold(p, r_class, alpha)?,
            less_threshold: less_threshold(p, r_class, alpha)?,
        })
    }
}

impl fmt::Display for ThresholdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::numfmt::sig6;
        writeln!(f, "p = {}", self.p)?;
        writeln!(f, "r_class = {}", sig6(self.r_class))?;
        writeln!(f, "alpha = {}", sig6(self.alpha))?;
        writeln!(f, "gss_threshold = {}", sig6(self.gss_threshold))?;
        write!(f, "less_threshold = {}", sig6(self.less_threshold))
    }
}

/// A spanning tree as indices into the skeleton edge list of the graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningTree {
    pub edges: Vec<usize>,
}

/// Wilson's algorithm: loop-erased random walks into a tree grown from
/// vertex 0. Steps follow the symmetrized weights, so the tree law is
/// proportional to the product of edge weights.
#[derive(Clone, Debug)]
pub struct UstSampler {
    edges: Vec<UndirectedEdge>,
    // per vertex: (neighbor, skeleton edge id), with cumulative weights
    neighbors: Vec<Vec<(usize, usize)>>,
    cumulative: Vec<Vec<f64>>,
}

impl UstSampler {
    pub fn new(graph: &DirectedGraph) -> Result<Self> {
        if !graph.is_connected() {
            return Err(Error::Disconnected);
        }
        let p = graph.vertex_count();
        let edges = graph.symmetrized_edges();
        let mut neighbors = vec![Vec::new(); p];
        let mut cumulative = vec![Vec::new(); p];
        for (id, e) in edges.iter().enumerate() {
            for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                let acc = cumulative[a].last().copied().unwrap_or(0.0) + e.weight;
                neighbors[a].push((b, id));
                cumulative[a].push(acc);
            }
        }
        Ok(UstSampler {
            edges,
            neighbors,
            cumulative,
        })
    }

    pub fn edges(&self) -> &[UndirectedEdge] {
        &self.edges
    }

    fn step<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> (usize, usize) {
        let cum = &self.cumulative[v];
        let total = *cum
            .last()
            .expect("connected graphs have no isolated vertices");
        let target = rng.random::<f64>() * total;
        let k = cum.partition_point(|&c| c <= target).min(cum.len() - 1);
        self.neighbors[v][k]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpanningTree {
        let p = self.neighbors.len();
        let mut in_tree = vec![false; p];
        let mut next = vec![(usize::MAX, usize::MAX); p];
        in_tree[0] = true;
        let mut tree = Vec::with_capacity(p.saturating_sub(1));
        for start in 0..p {
            let mut u = start;
            while !in_tree[u] {
                next[u] = self.step(u, rng);
                u = next[u].0;
            }
            // following `next` from start retraces the loop-erased path
            let mut u = start;
            while !in_tree[u] {
                in_tree[u] = true;
                tree.push(next[u].1);
                u = next[u].0;
            }
        }
        tree.sort_unstable();
        SpanningTree { edges: tree }
    }
}

/// One spanning tree sampled by Wilson's algorithm.
pub fn wilson_ust<R: Rng + ?Sized>(graph: &DirectedGraph, rng: &mut R) -> Result<SpanningTree> {
    Ok(UstSampler::new(graph)?.sample(rng))
}
