//! Fixtures shared by the benchmarks.

use graphscan::models::{ball_cluster, make_signal, observe, stream_rng, torus_graph};
use graphscan::{DirectedGraph, FlowNetwork};

/// A torus with a planted ball signal and the oracle cut budget.
pub struct Instance {
    pub graph: DirectedGraph,
    pub y: Vec<f64>,
    pub rho: f64,
}

pub fn torus_instance(side: usize, cluster: usize, mu: f64, seed: u64) -> Instance {
    let graph = torus_graph(side).unwrap();
    let p = graph.vertex_count();
    let c = ball_cluster(&graph, p / 2, cluster).unwrap();
    let signal = make_signal(p, &c, mu).unwrap();
    let y = observe(p, Some(&signal), &mut stream_rng(seed, 0, 0));
    Instance {
        rho: c.boundary_weight(),
        graph,
        y,
    }
}

/// Layered network: `layers × width` inner nodes, each fully connected to
/// the next layer, with capacities from a fixed hash.
pub fn layered_network(layers: usize, width: usize) -> FlowNetwork {
    let n = layers * width + 2;
    let (s, t) = (n - 2, n - 1);
    let cap = |i: usize| 1.0 + ((i.wrapping_mul(2_654_435_761) >> 7) % 97) as f64 / 10.0;
    let mut arcs = Vec::new();
    for j in 0..width {
        arcs.push((s, j, cap(arcs.len())));
        arcs.push(((layers - 1) * width + j, t, cap(arcs.len())));
    }
    for l in 0..layers - 1 {
        for a in 0..width {
            for b in 0..width {
                arcs.push((l * width + a, (l + 1) * width + b, cap(arcs.len())));
            }
        }
    }
    FlowNetwork::new(n, s, t, arcs).unwrap()
}
