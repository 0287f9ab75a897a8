//! Acceptance criteria. Runs as a plain binary so that the report prints
//! under `cargo test`; exits nonzero when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use graphscan::electrical::{r_class_exact, UstSampler};
use graphscan::harness::{panel_experiment, run_experiment, type1_calibration, GraphSpec, Panel};
use graphscan::models::{ball_cluster, make_signal, observe, stream_rng, torus_graph};
use graphscan::{
    g_dual, gss_bruteforce, gss_threshold, less, less_threshold, lovasz_extension_generic,
    r_class_bound, resistance_table, DirectedGraph, GssOptions, LessOptions, Method,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(stream: u64) -> ChaCha8Rng {
    stream_rng(SEED, stream, 0)
}

/// Random connected graph: a random spanning tree plus extra edges. With
/// `directed`, each edge becomes one arc of random orientation and some
/// reverse arcs are added.
fn random_connected(
    rng: &mut ChaCha8Rng,
    p: usize,
    weight: impl Fn(&mut ChaCha8Rng) -> f64,
    directed: bool,
) -> DirectedGraph {
    let mut pairs = Vec::new();
    for v in 1..p {
        pairs.push((rng.random_range(0..v), v));
    }
    let extra = rng.random_range(0..=p);
    for _ in 0..extra {
        let (u, v) = (rng.random_range(0..p), rng.random_range(0..p));
        if u != v && !pairs.contains(&(u.min(v), u.max(v))) {
            pairs.push((u.min(v), u.max(v)));
        }
    }
    if !directed {
        let edges: Vec<_> = pairs.iter().map(|&(u, v)| (u, v, weight(rng))).collect();
        return DirectedGraph::from_undirected(p, &edges).unwrap();
    }
    let mut arcs = Vec::new();
    for (u, v) in pairs {
        let (a, b) = if rng.random_bool(0.5) { (u, v) } else { (v, u) };
        arcs.push(graphscan::Arc {
            tail: a,
            head: b,
            weight: weight(rng),
        });
        if rng.random_bool(0.3) {
            arcs.push(graphscan::Arc {
                tail: b,
                head: a,
                weight: weight(rng),
            });
        }
    }
    DirectedGraph::new(p, arcs).unwrap()
}

fn mask(p: usize, bits: u32) -> Vec<bool> {
    (0..p).map(|v| bits >> v & 1 == 1).collect()
}

fn normal_vec(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p)
        .map(|_| rng.sample(rand_distr::StandardNormal))
        .collect()
}

fn dual_exactness() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let p = r.random_range(2..=10);
        let g = random_connected(&mut r, p, |r| r.random_range(0.1..=2.0), i % 2 == 1);
        let y = normal_vec(&mut r, p);
        let (e0, e1) = (r.random_range(0.0..2.0), r.random_range(0.0..2.0));
        let fast = g_dual(&g, &y, e0, e1).unwrap().value;
        let exact = (0u32..1 << p)
            .map(|b| {
                let m = mask(p, b);
                let gain: f64 = (0..p).filter(|&v| m[v]).map(|v| y[v] - e0).sum();
                gain - e1 * g.out_weight_mask(&m)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((fast - exact).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("200 graphs, max |g - brute| = {worst:.2e}"),
    )
}

fn relaxation_dominates() -> Outcome {
    let mut r = rng(2);
    let opts = LessOptions::default();
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for i in 0..100 {
        let p = r.random_range(2..=12);
        let g = random_connected(&mut r, p, |r| r.random_range(0.1..=2.0), i % 2 == 1);
        let y = normal_vec(&mut r, p);
        let max_cut = (0u32..1 << p)
            .map(|b| g.out_weight_mask(&mask(p, b)))
            .fold(0.0, f64::max);
        let rho = r.random_range(0.0..=max_cut);
        let exact = gss_bruteforce(&g, &y, rho, GssOptions::default())
            .unwrap()
            .statistic;
        let relaxed = less(&g, &y, rho, &opts).unwrap().statistic;
        if exact >= 0.0 {
            checked += 1;
            worst = worst.min(relaxed - exact);
            if relaxed < exact - 1e-6 {
                violations += 1;
            }
        }
    }
    let p3 = DirectedGraph::from_undirected(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let y = [1.0, 2.0, -1.0];
    let target = 3.0 / 2f64.sqrt();
    let gss = gss_bruteforce(&p3, &y, 1.0, GssOptions::default())
        .unwrap()
        .statistic;
    let les = less(&p3, &y, 1.0, &opts).unwrap().statistic;
    let equal = (gss - target).abs() < 1e-9 && (les - target).abs() < 1e-6;
    outcome(
        violations == 0 && equal,
        format!(
            "{checked} instances with gss >= 0, min(less - gss) = {worst:.2e}; path example gss = {gss:.6}, less = {les:.6}"
        ),
    )
}

fn lovasz_identities() -> Outcome {
    let mut r = rng(3);
    let mut indicator_ok = true;
    let mut worst = 0.0f64;
    let mut submodular_ok = true;
    for i in 0..20 {
        let p = r.random_range(2..=10);
        let g = random_connected(&mut r, p, |r| r.random_range(0.1..=2.0), i % 2 == 0);
        for b in 0u32..1 << p {
            let m = mask(p, b);
            let x: Vec<f64> = m.iter().map(|&v| v as u8 as f64).collect();
            indicator_ok &= g.lovasz_out(&x).unwrap() == g.out_weight_mask(&m);
        }
        for _ in 0..50 {
            let x: Vec<f64> = (0..p)
                .map(|_| {
                    if r.random_bool(0.3) {
                        r.random_range(0..4) as f64 / 4.0
                    } else {
                        r.random()
                    }
                })
                .collect();
            let direct = g.lovasz_out(&x).unwrap();
            let sorted = lovasz_extension_generic(|m| g.out_weight_mask(m), &x);
            worst = worst.max((direct - sorted).abs());
        }
        // weights in eighths keep every cut sum exact
        let dyadic = random_connected(
            &mut r,
            p,
            |r| r.random_range(1..=16) as f64 / 8.0,
            i % 2 == 1,
        );
        for _ in 0..50 {
            let (a, b) = (
                r.random::<u32>() & ((1 << p) - 1),
                r.random::<u32>() & ((1 << p) - 1),
            );
            let f = |bits| dyadic.out_weight_mask(&mask(p, bits));
            submodular_ok &= f(a) + f(b) >= f(a | b) + f(a & b);
        }
    }
    outcome(
        indicator_ok && worst <= 1e-12 && submodular_ok,
        format!(
            "indicators exact: {indicator_ok}; 1000 points max |arc-sum - sorted-prefix| = {worst:.2e}; 1000 pairs submodular: {submodular_ok}"
        ),
    )
}

fn foster() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = r.random_range(5..=60);
        let g = random_connected(&mut r, p, |_| 1.0, false);
        let table = resistance_table(&g).unwrap();
        worst = worst.max((table.foster_sum() - (p - 1) as f64).abs());
    }
    let torus = torus_graph(15).unwrap();
    let table = resistance_table(&torus).unwrap();
    let torus_dev = table
        .edges()
        .iter()
        .map(|(_, r)| (r - 224.0 / 450.0).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-8 && torus_dev <= 1e-8,
        format!("50 graphs max |sum r - (p-1)| = {worst:.2e}; torus(15) max |r - 224/450| = {torus_dev:.2e}"),
    )
}

fn matrix_tree() -> Outcome {
    const SAMPLES: usize = 10_000;
    let mut r = rng(5);
    let mut worst_z = 0.0f64;
    let mut edges_checked = 0;
    for _ in 0..5 {
        let p = r.random_range(4..=12);
        let g = random_connected(&mut r, p, |r| r.random_range(0.1..=2.0), false);
        let table = resistance_table(&g).unwrap();
        let sampler = UstSampler::new(&g).unwrap();
        let mut counts = vec![0usize; sampler.edges().len()];
        for _ in 0..SAMPLES {
            for e in sampler.sample(&mut r).edges {
                counts[e] += 1;
            }
        }
        for (i, e) in sampler.edges().iter().enumerate() {
            let (_, res) = table
                .edges()
                .iter()
                .find(|(t, _)| t.u == e.u && t.v == e.v)
                .unwrap();
            let q = (e.weight * res).min(1.0);
            let freq = counts[i] as f64 / SAMPLES as f64;
            let se = (q * (1.0 - q) / SAMPLES as f64).sqrt();
            let z = if se > 0.0 {
                (freq - q).abs() / se
            } else if (freq - q).abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            worst_z = worst_z.max(z);
            edges_checked += 1;
        }
    }
    outcome(
        worst_z <= 4.0,
        format!("{edges_checked} edges, max deviation = {worst_z:.2} standard errors"),
    )
}

fn type1_control() -> Outcome {
    const TRIALS: usize = 1000;
    let alpha = 0.05;
    let torus = torus_graph(15).unwrap();
    let rho = ball_cluster(&torus, 0, 15).unwrap().boundary_weight();
    let r_class = r_class_bound(&resistance_table(&torus).unwrap(), rho).unwrap();
    let tau = less_threshold(225, r_class, alpha).unwrap();
    let opts = LessOptions::default();
    let less_rate = type1_calibration(
        225,
        |y| Ok(less(&torus, y, rho, &opts)?.statistic),
        tau,
        TRIALS,
        SEED,
    )
    .unwrap();

    let small = torus_graph(4).unwrap();
    let small_rho = ball_cluster(&small, 0, 4).unwrap().boundary_weight();
    let small_r = r_class_exact(&small, &resistance_table(&small).unwrap(), small_rho).unwrap();
    let small_tau = gss_threshold(16, small_r, alpha).unwrap();
    let gss_rate = type1_calibration(
        16,
        |y| Ok(gss_bruteforce(&small, y, small_rho, GssOptions::default())?.statistic),
        small_tau,
        TRIALS,
        SEED + 1,
    )
    .unwrap();
    outcome(
        less_rate <= alpha && gss_rate <= alpha,
        format!(
            "torus(15) rho = {rho}, r_class = {r_class:.4}, less threshold = {tau:.4}, rate = {less_rate}; \
             torus(4) rho = {small_rho}, gss threshold = {small_tau:.4}, rate = {gss_rate}"
        ),
    )
}

fn roc_comparison() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for panel in Panel::ALL {
        let r = panel_experiment(panel, SEED, None).unwrap();
        let auc = |m| r.auc(m).unwrap();
        let (l, mx, s) = (auc(Method::Less), auc(Method::Max), auc(Method::Sum));
        let mut ok = l > mx && l > s;
        if panel != Panel::Epsilon {
            ok &= l >= 0.75;
        }
        pass &= ok;
        parts.push(format!(
            "{panel}: less {l:.4} max {mx:.4} sum {s:.4} [{}]",
            if ok { "ok" } else { "fail" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn power_monotone() -> Outcome {
    const TRIALS: usize = 200;
    let torus = torus_graph(15).unwrap();
    let opts = LessOptions::default();
    let mut stats = Vec::new();
    for (k, mu) in [0.0, 1.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
        let values: Vec<f64> = (0..TRIALS)
            .map(|i| {
                let mut rng = stream_rng(SEED, 800 + k as u64, i as u64);
                let cluster = ball_cluster(&torus, rng.random_range(0..225), 15).unwrap();
                let signal = make_signal(225, &cluster, mu).unwrap();
                let y = observe(225, Some(&signal), &mut rng);
                less(&torus, &y, cluster.boundary_weight(), &opts)
                    .unwrap()
                    .statistic
            })
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        stats.push((mu, mean, var / n));
    }
    let mut pass = true;
    for w in stats.windows(2) {
        let se = (w[0].2 + w[1].2).sqrt();
        pass &= w[1].1 >= w[0].1 - se;
    }
    let means: Vec<String> = stats
        .iter()
        .map(|(mu, m, _)| format!("mu={mu}: {m:.4}"))
        .collect();
    outcome(pass, means.join(", "))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let mut config = Panel::Knn.config(SEED);
    config.panel = "determinism".into();
    config.graph = GraphSpec::knn(64, 3, 2, SEED);
    config.cluster_size = 8;
    config.trials = 40;
    let torus = torus_graph(15).unwrap();
    let y = observe(225, None, &mut stream_rng(SEED, 9, 0));
    let parallel = LessOptions {
        parallel: true,
        ..LessOptions::default()
    };

    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                run_experiment(&config).unwrap().write(dir.path()).unwrap();
                let trace = less(&torus, &y, 20.0, &parallel).unwrap();
                let mut buf = Vec::new();
                trace.write_trace_csv(&mut buf).unwrap();
                fs::write(dir.path().join("trace.csv"), buf).unwrap();
                let table = resistance_table(&torus).unwrap();
                table
                    .write_csv(
                        &torus,
                        fs::File::create(dir.path().join("resistance.csv")).unwrap(),
                    )
                    .unwrap();
            });
        read_dir_bytes(dir.path())
    };
    let one = run(1);
    let four = run(4);
    let again = run(1);
    let same = one == four && one == again;
    outcome(
        same,
        format!(
            "{} CSV/metadata files compared across 1 and 4 threads and a rerun",
            one.len()
        ),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            1,
            "dual/cut exactness",
            Duration::from_secs(30),
            dual_exactness,
        ),
        (
            2,
            "relaxation dominates exact scan",
            Duration::from_secs(120),
            relaxation_dominates,
        ),
        (
            3,
            "Lovasz extension identities",
            Duration::MAX,
            lovasz_identities,
        ),
        (4, "resistance sum over edges", Duration::MAX, foster),
        (
            5,
            "spanning-tree edge frequencies",
            Duration::MAX,
            matrix_tree,
        ),
        (
            6,
            "type-1 control",
            Duration::from_secs(15 * 60),
            type1_control,
        ),
        (
            7,
            "ROC comparison",
            Duration::from_secs(30 * 60),
            roc_comparison,
        ),
        (
            8,
            "power monotone in signal strength",
            Duration::MAX,
            power_monotone,
        ),
        (
            9,
            "determinism across thread counts",
            Duration::MAX,
            determinism,
        ),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed < limit;
        if !pass {
            failed += 1;
        }
        let budget = if limit == Duration::MAX {
            String::new()
        } else {
            format!(" of {}s", limit.as_secs())
        };
        println!(
            "criterion {id} {}: {name} ({}; {:.1}s{budget})",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
