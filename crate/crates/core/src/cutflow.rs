//! Exact s-t max-flow / min-cut and the binary MRF MAP solver that evaluates
//! the dual function of the Lovász extended scan statistic.
//!
//! The flow engine is highest-label push-relabel with the gap heuristic and
//! periodic global relabeling, over `f64` capacities. Excess below
//! `1e-12 * total capacity` is treated as zero.

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

const EXCESS_TOLERANCE: f64 = 1e-12;

/// A capacitated s-t network on nodes `0..node_count`.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    node_count: usize,
    source: usize,
    sink: usize,
    arcs: Vec<(usize, usize, f64)>,
}

impl FlowNetwork {
    pub fn new(
        node_count: usize,
        source: usize,
        sink: usize,
        arcs: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if source >= node_count || sink >= node_count {
            return Err(Error::InvalidVertex {
                id: source.max(sink),
                p: node_count,
            });
        }
        if source == sink {
            return Err(Error::InvalidParameter(
                "source and sink must differ".into(),
            ));
        }
        for &(u, v, c) in &arcs {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidVertex {
                    id: u.max(v),
                    p: node_count,
                });
            }
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "capacity of arc ({u}, {v}) must be finite and nonnegative, got {c}"
                )));
            }
        }
        Ok(FlowNetwork {
            node_count,
            source,
            sink,
            arcs,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn arcs(&self) -> &[(usize, usize, f64)] {
        &self.arcs
    }

    /// Capacity of the cut `(S, V \ S)` for a source-side mask.
    pub fn cut_capacity(&self, source_side: &[bool]) -> f64 {
        self.arcs
            .iter()
            .filter(|&&(u, v, _)| source_side[u] && !source_side[v])
            .map(|&(_, _, c)| c)
            .sum()
    }
}

/// Result of a max-flow computation.
#[derive(Clone, Debug)]
pub struct MaxFlow {
    pub value: f64,
    /// Nodes reachable from the source in the final residual network; the
    /// minimal source side of a minimum cut.
    pub source_side: Vec<usize>,
    pub pushes: usize,
    pub relabels: usize,
}

/// Maximum flow and the minimal minimum-cut source side.
pub fn max_flow(net: &FlowNetwork) -> MaxFlow {
    let topology: Vec<(usize, usize)> = net.arcs.iter().map(|&(u, v, _)| (u, v)).collect();
    let caps: Vec<f64> = net.arcs.iter().map(|&(_, _, c)| c).collect();
    let mut engine = PushRelabel::new(net.node_count, net.source, net.sink, &topology);
    let value = engine.run(&caps);
    let mask = engine.source_side();
    MaxFlow {
        value,
        source_side: (0..net.node_count).filter(|&v| mask[v]).collect(),
        pushes: engine.pushes,
        relabels: engine.relabels,
    }
}

/// Reusable push-relabel engine over a fixed topology; capacities are
/// supplied per run.
#[derive(Clone, Debug)]
pub(crate) struct PushRelabel {
    n: usize,
    source: usize,
    sink: usize,
    // residual edges come in pairs: 2i forward, 2i + 1 reverse
    to: Vec<usize>,
    residual: Vec<f64>,
    adj_offsets: Vec<usize>,
    adj: Vec<usize>,
    excess: Vec<f64>,
    height: Vec<usize>,
    current: Vec<usize>,
    active: Vec<bool>,
    count: Vec<usize>,
    buckets: Vec<Vec<usize>>,
    queue: Vec<usize>,
    top: usize,
    eps: f64,
    pub(crate) pushes: usize,
    pub(crate) relabels: usize,
}

impl PushRelabel {
    pub(crate) fn new(n: usize, source: usize, sink: usize, arcs: &[(usize, usize)]) -> Self {
        let mut to = Vec::with_capacity(2 * arcs.len());
        let mut degree = vec![0usize; n + 1];
        for &(u, v) in arcs {
            to.push(v);
            to.push(u);
            degree[u + 1] += 1;
            degree[v + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let adj_offsets = degree;
        let mut fill = adj_offsets.clone();
        let mut adj = vec![0usize; 2 * arcs.len()];
        for (i, &(u, v)) in arcs.iter().enumerate() {
            adj[fill[u]] = 2 * i;
            fill[u] += 1;
            adj[fill[v]] = 2 * i + 1;
            fill[v] += 1;
        }
        PushRelabel {
            n,
            source,
            sink,
            residual: vec![0.0; to.len()],
            to,
            adj_offsets,
            adj,
            excess: vec![0.0; n],
            height: vec![0; n],
            current: vec![0; n],
            active: vec![false; n],
            count: vec![0; n + 1],
            buckets: vec![Vec::new(); 2 * n + 1],
            queue: Vec::with_capacity(n),
            top: 0,
            eps: 0.0,
            pushes: 0,
            relabels: 0,
        }
    }

    /// Runs to completion and returns the flow value.
    pub(crate) fn run(&mut self, capacities: &[f64]) -> f64 {
        debug_assert_eq!(capacities.len() * 2, self.to.len());
        let n = self.n;
        for (i, &c) in capacities.iter().enumerate() {
            self.residual[2 * i] = c;
            self.residual[2 * i + 1] = 0.0;
        }
        self.excess.fill(0.0);
        self.active.fill(false);
        self.pushes = 0;
        self.relabels = 0;
        let total: f64 = capacities.iter().sum();
        self.eps = EXCESS_TOLERANCE * total;
        if total == 0.0 {
            return 0.0;
        }

        let s = self.source;
        for k in self.adj_offsets[s]..self.adj_offsets[s + 1] {
            let e = self.adj[k];
            let c = self.residual[e];
            if c > 0.0 {
                let v = self.to[e];
                self.residual[e] = 0.0;
                self.residual[e ^ 1] += c;
                self.excess[v] += c;
                self.excess[s] -= c;
            }
        }

        self.global_relabel();
        let mut since_global = 0usize;
        loop {
            while self.top > 0 && self.buckets[self.top].is_empty() {
                self.top -= 1;
            }
            let level = self.top;
            let Some(u) = self.buckets[level].pop() else {
                break;
            };
            if !self.active[u] || self.height[u] != level {
                continue;
            }
            self.active[u] = false;
            let relabels_before = self.relabels;
            self.discharge(u);
            since_global += self.relabels - relabels_before;
            if since_global >= n {
                self.global_relabel();
                since_global = 0;
            }
        }
        self.excess[self.sink]
    }

    fn activate(&mut self, v: usize) {
        if v != self.source && v != self.sink && !self.active[v] && self.excess[v] > self.eps {
            self.active[v] = true;
            let h = self.height[v];
            self.buckets[h].push(v);
            self.top = self.top.max(h);
        }
    }

    fn discharge(&mut self, u: usize) {
        let n = self.n;
        let end = self.adj_offsets[u + 1];
        while self.excess[u] > self.eps {
            if self.current[u] == end {
                self.relabel(u);
                if self.height[u] >= 2 * n {
                    // stranded by the tolerance; its excess is below resolution
                    return;
                }
                continue;
            }
            let e = self.adj[self.current[u]];
            let v = self.to[e];
            if self.residual[e] > self.eps && self.height[u] == self.height[v] + 1 {
                let delta = self.excess[u].min(self.residual[e]);
                self.residual[e] -= delta;
                self.residual[e ^ 1] += delta;
                self.excess[u] -= delta;
                self.excess[v] += delta;
                self.pushes += 1;
                self.activate(v);
            } else {
                self.current[u] += 1;
            }
        }
    }

    fn relabel(&mut self, u: usize) {
        let n = self.n;
        self.relabels += 1;
        let old = self.height[u];
        let mut lowest = 2 * n;
        for k in self.adj_offsets[u]..self.adj_offsets[u + 1] {
            let e = self.adj[k];
            if self.residual[e] > self.eps {
                lowest = lowest.min(self.height[self.to[e]] + 1);
            }
        }
        let mut new = lowest.min(2 * n);
        if old < n {
            self.count[old] -= 1;
            if self.count[old] == 0 {
                // gap: nothing at or above `old` below n can reach the sink
                for w in 0..n {
                    let h = self.height[w];
                    if h > old && h < n && w != self.source {
                        self.count[h] -= 1;
                        self.height[w] = n + 1;
                        self.current[w] = self.adj_offsets[w];
                        if self.active[w] {
                            self.buckets[n + 1].push(w);
                            self.top = self.top.max(n + 1);
                        }
                    }
                }
                new = new.max(n + 1);
            }
        }
        self.height[u] = new;
        if new < n {
            self.count[new] += 1;
        }
        self.current[u] = self.adj_offsets[u];
    }

    /// Exact distance labels: to the sink for nodes that can reach it, and
    /// `n +` distance to the source otherwise.
    fn global_relabel(&mut self) {
        let n = self.n;
        let unreached = 2 * n;
        self.height.fill(unreached);
        self.height[self.sink] = 0;
        self.height[self.source] = n;
        self.bfs_heights(self.sink);
        self.bfs_heights(self.source);

        self.count.fill(0);
        for b in &mut self.buckets {
            b.clear();
        }
        self.top = 0;
        for v in 0..n {
            self.current[v] = self.adj_offsets[v];
            if self.height[v] < n {
                self.count[self.height[v]] += 1;
            }
            self.active[v] = false;
        }
        for v in 0..n {
            if self.height[v] < unreached {
                self.activate(v);
            }
        }
    }

    fn bfs_heights(&mut self, root: usize) {
        let unreached = 2 * self.n;
        self.queue.clear();
        self.queue.push(root);
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            for k in self.adj_offsets[v]..self.adj_offsets[v + 1] {
                let e = self.adj[k];
                let u = self.to[e];
                // u can send to v along e ^ 1
                if self.height[u] == unreached && self.residual[e ^ 1] > self.eps {
                    self.height[u] = self.height[v] + 1;
                    self.queue.push(u);
                }
            }
        }
    }

    /// Residual reachability from the source.
    pub(crate) fn source_side(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![self.source];
        seen[self.source] = true;
        while let Some(v) = stack.pop() {
            for k in self.adj_offsets[v]..self.adj_offsets[v + 1] {
                let e = self.adj[k];
                let u = self.to[e];
                if !seen[u] && self.residual[e] > self.eps {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }
}

/// Minimizer of a binary MRF energy `E(x) = Σ θ_i x_i + η₁ out(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CutSolution {
    pub x: Vec<bool>,
    /// `E(x)` recomputed from `x`.
    pub objective: f64,
    pub flow_value: f64,
    pub pushes: usize,
    pub relabels: usize,
}

/// MRF MAP solver bound to one graph; the flow topology is built once and
/// reused across calls.
///
/// Node `i < p` is vertex `i`, node `p` is the source and `p + 1` the sink.
/// For each vertex the arcs `s -> i` and `i -> t` are always present (one of
/// them at zero capacity), followed by one arc per graph arc.
#[derive(Clone, Debug)]
pub struct MrfSolver<'g> {
    graph: &'g DirectedGraph,
    engine: PushRelabel,
    capacities: Vec<f64>,
    calls: usize,
}

impl<'g> MrfSolver<'g> {
    pub fn new(graph: &'g DirectedGraph) -> Self {
        let p = graph.vertex_count();
        let (s, t) = (p, p + 1);
        let mut topology = Vec::with_capacity(2 * p + graph.arc_count());
        for i in 0..p {
            topology.push((s, i));
            topology.push((i, t));
        }
        topology.extend(graph.arcs().iter().map(|a| (a.tail, a.head)));
        let capacities = vec![0.0; topology.len()];
        MrfSolver {
            graph,
            engine: PushRelabel::new(p + 2, s, t, &topology),
            capacities,
            calls: 0,
        }
    }

    pub fn graph(&self) -> &'g DirectedGraph {
        self.graph
    }

    /// Number of flow computations performed so far.
    pub fn calls(&self) -> usize {
        self.calls
    }

    /// `argmin_{x ∈ {0,1}^p} Σ θ_i x_i + η₁ out(x)`; ties resolve to the
    /// minimal source side.
    pub fn solve(&mut self, theta: &[f64], eta1: f64) -> Result<CutSolution> {
        let p = self.graph.vertex_count();
        self.graph.check_len(theta.len())?;
        if !(eta1.is_finite() && eta1 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "η₁ must be finite and ≥ 0, got {eta1}"
            )));
        }
        if let Some(bad) = theta.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "unary term {bad} is not finite"
            )));
        }
        for (i, &th) in theta.iter().enumerate() {
            self.capacities[2 * i] = (-th).max(0.0);
            self.capacities[2 * i + 1] = th.max(0.0);
        }
        for (k, a) in self.graph.arcs().iter().enumerate() {
            self.capacities[2 * p + k] = eta1 * a.weight;
        }
        let flow_value = self.engine.run(&self.capacities);
        self.calls += 1;
        let side = self.engine.source_side();
        let x = side[..p].to_vec();
        let objective = energy(self.graph, theta, eta1, &x);
        Ok(CutSolution {
            x,
            objective,
            flow_value,
            pushes: self.engine.pushes,
            relabels: self.engine.relabels,
        })
    }

    /// `g(η₀, η₁) = max_{x} yᵀx − η₀ 1ᵀx − η₁ out(x)` and a maximizer.
    pub fn dual(&mut self, y: &[f64], eta0: f64, eta1: f64) -> Result<DualValue> {
        if !(eta0.is_finite() && eta0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "η₀ must be finite and ≥ 0, got {eta0}"
            )));
        }
        let theta: Vec<f64> = y.iter().map(|&yi| eta0 - yi).collect();
        let sol = self.solve(&theta, eta1)?;
        Ok(DualValue::from_solution(self.graph, y, sol))
    }
}

/// `E(x) = Σ θ_i x_i + η₁ out(x)`.
pub fn energy(graph: &DirectedGraph, theta: &[f64], eta1: f64, x: &[bool]) -> f64 {
    let unary: f64 = theta
        .iter()
        .zip(x)
        .filter(|(_, &b)| b)
        .map(|(t, _)| t)
        .sum();
    unary + eta1 * graph.out_weight_mask(x)
}

/// Binary MRF MAP by a single min-cut.
pub fn mrf_map(graph: &DirectedGraph, theta: &[f64], eta1: f64) -> Result<CutSolution> {
    MrfSolver::new(graph).solve(theta, eta1)
}

/// Value of the LESS dual function at one point, with the binary maximizer
/// and the statistics that define its affine piece.
#[derive(Clone, Debug, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub x: Vec<bool>,
    /// `yᵀx`
    pub gain: f64,
    /// `1ᵀx`
    pub size: usize,
    /// `out(x)`
    pub cut: f64,
}

impl DualValue {
    fn from_solution(graph: &DirectedGraph, y: &[f64], sol: CutSolution) -> Self {
        let gain = y
            .iter()
            .zip(&sol.x)
            .filter(|(_, &b)| b)
            .map(|(v, _)| v)
            .sum();
        let size = sol.x.iter().filter(|&&b| b).count();
        let cut = graph.out_weight_mask(&sol.x);
        DualValue {
            value: -sol.objective,
            x: sol.x,
            gain,
            size,
            cut,
        }
    }

    /// Subgradient `(−1ᵀx*, −out(x*))` of `g` at the evaluated point.
    pub fn subgradient(&self) -> (f64, f64) {
        (-(self.size as f64), -self.cut)
    }
}

/// One-shot evaluation of `g(η₀, η₁)`.
pub fn g_dual(graph: &DirectedGraph, y: &[f64], eta0: f64, eta1: f64) -> Result<DualValue> {
    MrfSolver::new(graph).dual(y, eta0, eta1)
}
