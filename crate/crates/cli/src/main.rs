use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphscan::harness::{panel_experiment, run_experiment, write_summary, ExperimentConfig, Panel};
use graphscan::models::{
    complete_graph, cycle_graph, epsilon_graph, knn_graph, path_graph, torus_graph, PointCloud,
};
use graphscan::numfmt::sig6;
use graphscan::{
    detect, gss_bruteforce, less, r_class_bound, r_class_exact, resistance_table, DirectedGraph,
    Error, GssOptions, LessOptions, Method, ThresholdReport,
};

#[derive(Parser)]
#[command(
    name = "graphscan",
    version,
    about = "Scan statistics for well-connected graph clusters"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and write it as an edge list.
    Graphgen(GraphgenArgs),
    /// Compute a detection statistic for a signal on a graph.
    Detect(DetectArgs),
    /// Effective resistance of every edge.
    Resistance(ResistanceArgs),
    /// Type-1 thresholds for the scan statistic and its relaxation.
    Threshold(ThresholdArgs),
    /// Monte Carlo ROC experiment.
    Simulate(SimulateArgs),
    /// Compare the exact scan statistic with its relaxation on a small graph.
    ScanOracle(ScanOracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Torus,
    Cycle,
    Path,
    Complete,
    Knn,
    Epsilon,
}

#[derive(Args)]
struct GraphgenArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Side length of the torus.
    #[arg(long)]
    side: Option<usize>,
    /// Number of vertices (cycle, path, complete, knn, epsilon).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Point-cloud seed; falls back to LESS_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Output edge list (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write the point cloud as CSV (geometric families).
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Signal file, one value per line.
    #[arg(long)]
    y: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value = "less")]
    method: Method,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_calls: usize,
    #[arg(long)]
    two_sided: bool,
    /// Solve scan sizes independently across threads (no shared cutting planes).
    #[arg(long)]
    parallel: bool,
    /// Largest vertex count accepted by the exhaustive scan.
    #[arg(long, default_value_t = 25)]
    guard: usize,
    /// Write the per-size dual trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ResistanceArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Write `tail,head,weight,resistance` CSV instead of printing.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Graph whose resistances bound r_C by ρ · max r_e.
    #[arg(long, conflicts_with = "r_class")]
    graph: Option<PathBuf>,
    /// Use this value of r_C directly.
    #[arg(long)]
    r_class: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment configuration (TOML).
    #[arg(long, conflicts_with = "panel", required_unless_present = "panel")]
    config: Option<PathBuf>,
    /// Built-in ROC panel.
    #[arg(long)]
    panel: Option<PanelArg>,
    /// Master seed; falls back to LESS_SEED, then the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the signal strength.
    #[arg(long)]
    mu: Option<f64>,
    /// Override the number of trials per hypothesis.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(short, long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PanelArg {
    Torus,
    Knn,
    Epsilon,
    All,
}

#[derive(Args)]
struct ScanOracleArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 20)]
    guard: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.threads {
        Some(0) => Err(Error::InvalidParameter("--threads must be ≥ 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(Error::InvalidParameter(e.to_string())),
        },
        None => run(cli.command),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_)
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::InvalidParameter(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(command: Command) -> graphscan::Result<()> {
    match command {
        Command::Graphgen(a) => graphgen(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Resistance(a) => resistance(a),
        Command::Threshold(a) => threshold(a),
        Command::Simulate(a) => simulate(a),
        Command::ScanOracle(a) => scan_oracle(a),
    }
}

fn env_seed() -> graphscan::Result<Option<u64>> {
    match std::env::var("LESS_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("LESS_SEED is not an unsigned integer: `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn required<T>(v: Option<T>, flag: &str) -> graphscan::Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing required flag --{flag}")))
}

fn read_graph(path: &Path) -> graphscan::Result<DirectedGraph> {
    DirectedGraph::read_edge_list(BufReader::new(open(path)?))
}

fn read_signal(path: &Path) -> graphscan::Result<Vec<f64>> {
    let reader = BufReader::new(open(path)?);
    let mut y = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let v: f64 = s.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("not a number: `{s}`"),
        })?;
        y.push(v);
    }
    Ok(y)
}

fn open(path: &Path) -> graphscan::Result<fs::File> {
    fs::File::open(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> graphscan::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn graphgen(a: GraphgenArgs) -> graphscan::Result<()> {
    let seed = a.seed.or(env_seed()?).unwrap_or(0);
    let mut cloud = None;
    let graph = match a.family {
        Family::Torus => torus_graph(required(a.side, "side")?)?,
        Family::Cycle => cycle_graph(required(a.n, "n")?)?,
        Family::Path => path_graph(required(a.n, "n")?)?,
        Family::Complete => complete_graph(required(a.n, "n")?)?,
        Family::Knn | Family::Epsilon => {
            let pts = PointCloud::uniform(required(a.n, "n")?, a.dim, seed)?;
            let g = match a.family {
                Family::Knn => knn_graph(&pts, required(a.k, "k")?)?,
                _ => epsilon_graph(&pts, required(a.epsilon, "epsilon")?)?,
            };
            cloud = Some(pts);
            g
        }
    };
    match &a.output {
        Some(path) => {
            let mut out = create(path)?;
            graph.write_edge_list(&mut out)?;
            out.flush()?;
        }
        None => graph.write_edge_list(io::stdout().lock())?,
    }
    if let Some(path) = &a.points {
        let pts = cloud
            .as_ref()
            .ok_or_else(|| Error::Config("--points needs a geometric family".into()))?;
        let mut out = create(path)?;
        pts.write_csv(&mut out)?;
        out.flush()?;
    }
    // keep stdout clean for the edge list when no file is given
    let summary = format!(
        "p = {}\nm = {}\nconnected = {}",
        graph.vertex_count(),
        graph.edge_count(),
        graph.is_connected()
    );
    if a.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn cmd_detect(a: DetectArgs) -> graphscan::Result<()> {
    let graph = read_graph(&a.graph)?;
    let y = read_signal(&a.y)?;
    let less_opts = LessOptions {
        tol: a.tol,
        max_calls_per_t: a.max_calls,
        parallel: a.parallel,
        two_sided: a.two_sided,
    };
    let gss_opts = GssOptions {
        guard: a.guard,
        two_sided: a.two_sided,
    };
    let r = detect(a.method, &graph, &y, a.rho, &less_opts, gss_opts)?;
    println!("{}", sig6(r.statistic));
    if let Some(t) = r.best_t {
        eprintln!("best t = {t}");
    }
    if r.approximate {
        eprintln!(
            "warning: call budget exhausted; statistic is an upper bound within {}",
            sig6(r.gap_bound)
        );
    }
    if let Some(path) = &a.trace {
        let mut out = create(path)?;
        r.write_trace_csv(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn resistance(a: ResistanceArgs) -> graphscan::Result<()> {
    let graph = read_graph(&a.graph)?;
    let table = resistance_table(&graph)?;
    match &a.output {
        Some(path) => {
            let mut out = create(path)?;
            table.write_csv(&graph, &mut out)?;
            out.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            for (e, r) in table.edges() {
                writeln!(out, "{} {} {}", e.u, e.v, sig6(*r))?;
            }
        }
    }
    if table.symmetrized() {
        eprintln!("note: directed weights symmetrized as (W + Wᵀ)/2");
    }
    Ok(())
}

fn threshold(a: ThresholdArgs) -> graphscan::Result<()> {
    let (p, r_class) = match (&a.graph, a.r_class) {
        (Some(path), _) => {
            let graph = read_graph(path)?;
            if let Some(p) = a.p {
                if p != graph.vertex_count() {
                    return Err(Error::Config(format!(
                        "--p {p} disagrees with the graph's {} vertices",
                        graph.vertex_count()
                    )));
                }
            }
            let table = resistance_table(&graph)?;
            (
                graph.vertex_count(),
                r_class_bound(&table, required(a.rho, "rho")?)?,
            )
        }
        (None, Some(r)) => (required(a.p, "p")?, r),
        (None, None) => {
            return Err(Error::Config(
                "give --graph (with --rho) or --r-class".into(),
            ))
        }
    };
    println!("{}", ThresholdReport::new(p, r_class, a.alpha)?);
    Ok(())
}

fn simulate(a: SimulateArgs) -> graphscan::Result<()> {
    let seed = match a.seed {
        Some(s) => Some(s),
        None => env_seed()?,
    };
    let reports = match (&a.config, a.panel) {
        (Some(path), _) => {
            let mut config = ExperimentConfig::from_file(path)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(mu) = a.mu {
                config.mu = mu;
            }
            if let Some(t) = a.trials {
                config.trials = t;
            }
            vec![run_experiment(&config)?]
        }
        (None, Some(panel)) => {
            let panels = match panel {
                PanelArg::Torus => vec![Panel::Torus],
                PanelArg::Knn => vec![Panel::Knn],
                PanelArg::Epsilon => vec![Panel::Epsilon],
                PanelArg::All => Panel::ALL.to_vec(),
            };
            let seed = seed.unwrap_or(0);
            panels
                .into_iter()
                .map(|p| match a.trials {
                    None => panel_experiment(p, seed, a.mu),
                    Some(t) => {
                        let mut c = p.config(seed);
                        c.trials = t;
                        if let Some(mu) = a.mu {
                            c.mu = mu;
                        }
                        run_experiment(&c)
                    }
                })
                .collect::<graphscan::Result<Vec<_>>>()?
        }
        (None, None) => return Err(Error::Config("give --config or --panel".into())),
    };
    for r in &reports {
        r.write(&a.output_dir)?;
    }
    if reports.len() > 1 {
        let mut out = create(&a.output_dir.join("summary.csv"))?;
        write_summary(&mut out, &reports)?;
        out.flush()?;
        let meta: Vec<String> = reports.iter().map(|r| r.metadata()).collect();
        fs::write(a.output_dir.join("metadata.txt"), meta.join("\n"))?;
    }
    for r in &reports {
        for (method, curve) in &r.curves {
            println!("{} {} auc = {}", r.config.panel, method, sig6(curve.auc));
        }
    }
    Ok(())
}

fn scan_oracle(a: ScanOracleArgs) -> graphscan::Result<()> {
    let graph = read_graph(&a.graph)?;
    let y = read_signal(&a.y)?;
    let gss = gss_bruteforce(
        &graph,
        &y,
        a.rho,
        GssOptions {
            guard: a.guard,
            two_sided: false,
        },
    )?;
    let relaxed = less(&graph, &y, a.rho, &LessOptions::default())?;
    println!("gss = {}", sig6(gss.statistic));
    if let Some(c) = &gss.argmax_cluster {
        let members: Vec<String> = c.members().iter().map(|v| v.to_string()).collect();
        println!("gss_cluster = {}", members.join(" "));
    }
    println!("less = {}", sig6(relaxed.statistic));
    println!(
        "relaxation_gap = {}",
        sig6(relaxed.statistic - gss.statistic)
    );
    if graph.is_connected() {
        let table = resistance_table(&graph)?;
        println!("r_class = {}", sig6(r_class_exact(&graph, &table, a.rho)?));
    }
    Ok(())
}
