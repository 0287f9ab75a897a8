use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn graphscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphscan"))
        .args(args)
        .env_remove("LESS_SEED")
        .output()
        .expect("failed to spawn binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p3_files(dir: &Path) -> (String, String) {
    let g = dir.join("p3.g");
    let y = dir.join("y.txt");
    fs::write(&g, "3 2 undirected\n0 1 1\n1 2 1\n").unwrap();
    fs::write(&y, "1\n2\n-1\n").unwrap();
    (g.to_str().unwrap().into(), y.to_str().unwrap().into())
}

#[test]
fn detect_p3() {
    let dir = TempDir::new().unwrap();
    let (g, y) = p3_files(dir.path());
    let trace = dir.path().join("trace.csv");
    let o = graphscan(&[
        "detect",
        "--graph",
        &g,
        "--y",
        &y,
        "--rho",
        "1",
        "--method",
        "less",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "2.12132\n");
    let csv = fs::read_to_string(trace).unwrap();
    assert!(csv.starts_with("t,value,eta0,eta1,calls\n"));
    assert_eq!(csv.lines().count(), 4);

    let o = graphscan(&[
        "detect", "--graph", &g, "--y", &y, "--rho", "1", "--method", "max",
    ]);
    assert_eq!(stdout(&o), "2\n");
    let o = graphscan(&[
        "detect", "--graph", &g, "--y", &y, "--rho", "1", "--method", "gss",
    ]);
    assert_eq!(stdout(&o), "2.12132\n");
    let o = graphscan(&["detect", "--graph", &g, "--y", &y, "--method", "sum"]);
    assert_eq!(stdout(&o), "2\n");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let (g, _) = p3_files(dir.path());
    let missing = dir.path().join("missing.txt");
    let o = graphscan(&["detect", "--graph", &g, "--y", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.txt"));

    assert_eq!(
        graphscan(&["graphgen", "--family", "torus", "--side", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(graphscan(&["detect", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        graphscan(&["detect", "--graph", &g, "--y", &g, "--method", "lasso"])
            .status
            .code(),
        Some(2)
    );

    // exhaustive scan refuses p above the guard
    let t = dir.path().join("t6.g");
    graphscan(&[
        "graphgen",
        "--family",
        "torus",
        "--side",
        "6",
        "-o",
        t.to_str().unwrap(),
    ]);
    let y = dir.path().join("y36.txt");
    fs::write(&y, "0.5\n".repeat(36)).unwrap();
    let o = graphscan(&[
        "detect",
        "--graph",
        t.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
        "--method",
        "gss",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("36"));
}

#[test]
fn graphgen_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("torus.g");
    let o = graphscan(&[
        "graphgen",
        "--family",
        "torus",
        "--side",
        "15",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("p = 225"));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("225 450 undirected\n"));

    let o = graphscan(&[
        "graphgen", "--family", "knn", "--n", "225", "--k", "4", "--dim", "2", "--seed", "7",
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("connected = "));
    let first = stdout(&o);
    let again = stdout(&graphscan(&[
        "graphgen", "--family", "knn", "--n", "225", "--k", "4", "--dim", "2", "--seed", "7",
    ]));
    assert_eq!(first, again);

    let edges = stdout(&graphscan(&["graphgen", "--family", "cycle", "--n", "6"]));
    let g = graphscan::DirectedGraph::read_edge_list(edges.as_bytes()).unwrap();
    assert_eq!(g.to_edge_list_string(), edges);
}

#[test]
fn seed_falls_back_to_env() {
    let run = |env: Option<&str>, seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_graphscan"));
        c.args([
            "graphgen",
            "--family",
            "epsilon",
            "--n",
            "40",
            "--epsilon",
            "0.3",
        ]);
        if let Some(s) = seed {
            c.args(["--seed", s]);
        }
        match env {
            Some(v) => c.env("LESS_SEED", v),
            None => c.env_remove("LESS_SEED"),
        };
        String::from_utf8(c.output().unwrap().stdout).unwrap()
    };
    assert_eq!(run(Some("11"), None), run(None, Some("11")));
    assert_ne!(run(Some("11"), None), run(None, Some("12")));
}

#[test]
fn resistance_triangle() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("tri.g");
    fs::write(&g, "3 3 undirected\n0 1 1\n1 2 1\n0 2 1\n").unwrap();
    let o = graphscan(&["resistance", "--graph", g.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3);
    assert!(out.lines().all(|l| l.ends_with(" 0.666667")));

    let csv = dir.path().join("r.csv");
    graphscan(&[
        "resistance",
        "--graph",
        g.to_str().unwrap(),
        "-o",
        csv.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("tail,head,weight,resistance\n"));
}

#[test]
fn threshold_prints_both() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("torus.g");
    graphscan(&[
        "graphgen",
        "--family",
        "torus",
        "--side",
        "15",
        "-o",
        g.to_str().unwrap(),
    ]);
    let o = graphscan(&[
        "threshold",
        "--p",
        "225",
        "--rho",
        "16",
        "--alpha",
        "0.05",
        "--graph",
        g.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("r_class = 7.96444"), "{out}");
    assert!(out.contains("gss_threshold = 18.3235"), "{out}");
    assert!(out.contains("less_threshold = 27.2179"), "{out}");

    let o = graphscan(&["threshold", "--p", "225", "--r-class", "7.97"]);
    assert!(stdout(&o).contains("less_threshold = 27.2223"));
    assert_eq!(
        graphscan(&[
            "threshold",
            "--p",
            "225",
            "--r-class",
            "7.97",
            "--alpha",
            "0"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn scan_oracle_p3() {
    let dir = TempDir::new().unwrap();
    let (g, y) = p3_files(dir.path());
    let o = graphscan(&["scan-oracle", "--graph", &g, "--y", &y, "--rho", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("gss = 2.12132"));
    assert!(out.contains("less = 2.12132"));
    assert!(out.contains("gss_cluster = 0 1"));
}

const CONFIG: &str = r#"
panel = "small"
[graph]
family = "torus"
side = 6
[signal]
mu = 3.0
cluster_size = 6
[detection]
detectors = ["less", "max", "sum"]
[run]
trials = 12
seed = 5
"#;

fn simulate_with_threads(threads: &str) -> Vec<(String, Vec<u8>)> {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dir.path().join("out");
    let o = graphscan(&[
        "--threads",
        threads,
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<_> = fs::read_dir(&out)
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

#[test]
fn simulate_is_deterministic_across_threads() {
    let one = simulate_with_threads("1");
    let four = simulate_with_threads("4");
    let names: Vec<&str> = one.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        [
            "metadata.txt",
            "roc_small_less.csv",
            "roc_small_max.csv",
            "roc_small_sum.csv",
            "summary.csv"
        ]
    );
    assert_eq!(one, four);
    let summary = String::from_utf8(one[4].1.clone()).unwrap();
    assert!(summary.starts_with("panel,detector,auc,trials,seed\nsmall,less,"));
    let roc = String::from_utf8(one[1].1.clone()).unwrap();
    assert!(roc.starts_with("fpr,tpr\n0,0\n"));
    assert!(roc.ends_with("1,1\n"));
}

#[test]
fn simulate_rejects_bad_config() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        CONFIG.replace("trials = 12", "trials = 12\nunknown = 1"),
    )
    .unwrap();
    let o = graphscan(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn parallel_trace_ignores_thread_count() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("t6.g");
    graphscan(&[
        "graphgen",
        "--family",
        "torus",
        "--side",
        "6",
        "-o",
        g.to_str().unwrap(),
    ]);
    let y = dir.path().join("y.txt");
    let values: Vec<String> = (0..36)
        .map(|i| format!("{}", ((i * 7) % 11) as f64 / 4.0 - 1.0))
        .collect();
    fs::write(&y, values.join("\n")).unwrap();
    let trace = |threads: &str| {
        let out = dir.path().join(format!("trace{threads}.csv"));
        let o = graphscan(&[
            "--threads",
            threads,
            "detect",
            "--graph",
            g.to_str().unwrap(),
            "--y",
            y.to_str().unwrap(),
            "--rho",
            "8",
            "--parallel",
            "--trace",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        (stdout(&o), fs::read(out).unwrap())
    };
    assert_eq!(trace("1"), trace("4"));
}
