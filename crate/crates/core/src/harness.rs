//! Monte Carlo simulation of the null and alternative hypotheses, ROC / AUC,
//! empirical risk, type-1 calibration and the three-panel ROC experiment.
//!
//! Every trial draws its randomness from its own stream, derived from the
//! master seed, the hypothesis arm and the trial index, so outputs do not
//! depend on how trials are scheduled across threads.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{Cluster, DirectedGraph};
use crate::models::{
    ball_cluster, complete_graph, connected_geometric_graph, cycle_graph, make_signal, observe,
    stream_rng, torus_graph, Geometric,
};
use crate::scan::{detect, GssOptions, LessOptions, Method};

const NULL_STREAM: u64 = 0x4e55_4c4c;
const ALT_STREAM: u64 = 0x414c_5400;
const CLUSTER_STREAM: u64 = 0x434c_5553;

/// Graph family and parameters.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub family: String,
    pub side: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub path: Option<PathBuf>,
}

impl GraphSpec {
    pub fn torus(side: usize) -> Self {
        GraphSpec {
            family: "torus".into(),
            side: Some(side),
            ..Self::empty()
        }
    }

    pub fn knn(n: usize, k: usize, dim: usize, seed: u64) -> Self {
        GraphSpec {
            family: "knn".into(),
            n: Some(n),
            k: Some(k),
            dim: Some(dim),
            seed: Some(seed),
            ..Self::empty()
        }
    }

    pub fn epsilon(n: usize, epsilon: f64, dim: usize, seed: u64) -> Self {
        GraphSpec {
            family: "epsilon".into(),
            n: Some(n),
            epsilon: Some(epsilon),
            dim: Some(dim),
            seed: Some(seed),
            ..Self::empty()
        }
    }

    fn empty() -> Self {
        GraphSpec {
            family: String::new(),
            side: None,
            n: None,
            k: None,
            epsilon: None,
            dim: None,
            seed: None,
            path: None,
        }
    }

    fn need<T: Copy>(&self, v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| Error::Config(format!("graph family `{}` needs `{name}`", self.family)))
    }

    /// Builds the graph. Geometric families retry with successive seeds
    /// until connected.
    pub fn build(&self) -> Result<DirectedGraph> {
        match self.family.as_str() {
            "torus" => torus_graph(self.need(self.side, "side")?),
            "cycle" => cycle_graph(self.need(self.n, "n")?),
            "complete" => complete_graph(self.need(self.n, "n")?),
            "knn" | "epsilon" => {
                let n = self.need(self.n, "n")?;
                let dim = self.dim.unwrap_or(2);
                let seed = self.seed.unwrap_or(0);
                let family = if self.family == "knn" {
                    Geometric::Knn(self.need(self.k, "k")?)
                } else {
                    Geometric::Epsilon(self.need(self.epsilon, "epsilon")?)
                };
                Ok(connected_geometric_graph(n, dim, family, seed)?.0)
            }
            "file" => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("graph family `file` needs `path`".into()))?;
                let f = fs::File::open(path)?;
                DirectedGraph::read_edge_list(std::io::BufReader::new(f))
            }
            other => Err(Error::Config(format!("unknown graph family `{other}`"))),
        }
    }
}

/// How the cut budget ρ handed to the detectors is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoPolicy {
    /// `ρ = out(C)` of the trial's cluster.
    Oracle,
    Fixed(f64),
}

/// A reproducible Monte Carlo design.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Label used in output file names.
    pub panel: String,
    pub graph: GraphSpec,
    pub mu: f64,
    pub cluster_size: usize,
    /// Keep one cluster for all trials instead of resampling its seed vertex.
    pub fixed_cluster: bool,
    pub rho: RhoPolicy,
    pub detectors: Vec<Method>,
    /// Trials per hypothesis.
    pub trials: usize,
    pub alpha: f64,
    pub seed: u64,
    pub less: LessOptions,
    pub gss_guard: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    panel: Option<String>,
    graph: GraphSpec,
    signal: RawSignal,
    #[serde(default)]
    detection: RawDetection,
    #[serde(default)]
    run: RawRun,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    mu: f64,
    cluster_size: usize,
    #[serde(default)]
    fixed_cluster: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    #[serde(default = "default_rho")]
    rho: toml::Value,
    #[serde(default = "default_detectors")]
    detectors: Vec<String>,
    tol: Option<f64>,
    max_calls_per_t: Option<usize>,
    #[serde(default)]
    two_sided: bool,
    gss_guard: Option<usize>,
}

impl Default for RawDetection {
    fn default() -> Self {
        RawDetection {
            rho: default_rho(),
            detectors: default_detectors(),
            tol: None,
            max_calls_per_t: None,
            two_sided: false,
            gss_guard: None,
        }
    }
}

fn default_rho() -> toml::Value {
    toml::Value::String("oracle".into())
}

fn default_detectors() -> Vec<String> {
    vec!["less".into(), "max".into(), "sum".into()]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    seed: u64,
}

impl Default for RawRun {
    fn default() -> Self {
        RawRun {
            trials: default_trials(),
            alpha: default_alpha(),
            seed: 0,
        }
    }
}

fn default_trials() -> usize {
    200
}

fn default_alpha() -> f64 {
    0.05
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    /// Parses the TOML configuration format:
    ///
    /// ```toml
    /// panel = "torus"
    /// [graph]
    /// family = "torus"
    /// side = 15
    /// [signal]
    /// mu = 4.0
    /// cluster_size = 15
    /// [detection]
    /// rho = "oracle"          # or a number
    /// detectors = ["less", "max", "sum"]
    /// [run]
    /// trials = 200
    /// seed = 1
    /// ```
    fn from_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let rho = match &raw.detection.rho {
            toml::Value::String(s) if s == "oracle" => RhoPolicy::Oracle,
            toml::Value::Float(v) => RhoPolicy::Fixed(*v),
            toml::Value::Integer(v) => RhoPolicy::Fixed(*v as f64),
            other => {
                return Err(Error::Config(format!(
                    "rho must be \"oracle\" or a number, got {other}"
                )))
            }
        };
        let detectors = raw
            .detection
            .detectors
            .iter()
            .map(|d| d.parse())
            .collect::<Result<Vec<Method>>>()?;
        let defaults = LessOptions::default();
        let config = ExperimentConfig {
            panel: raw.panel.unwrap_or_else(|| raw.graph.family.clone()),
            graph: raw.graph,
            mu: raw.signal.mu,
            cluster_size: raw.signal.cluster_size,
            fixed_cluster: raw.signal.fixed_cluster,
            rho,
            detectors,
            trials: raw.run.trials,
            alpha: raw.run.alpha,
            seed: raw.run.seed,
            less: LessOptions {
                tol: raw.detection.tol.unwrap_or(defaults.tol),
                max_calls_per_t: raw
                    .detection
                    .max_calls_per_t
                    .unwrap_or(defaults.max_calls_per_t),
                parallel: false,
                two_sided: raw.detection.two_sided,
            },
            gss_guard: raw
                .detection
                .gss_guard
                .unwrap_or(GssOptions::default().guard),
        };
        config.validate()?;
        Ok(config)
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        fs::read_to_string(path)?.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be ≥ 1".into()));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::Config(format!(
                "μ must be finite and ≥ 0, got {}",
                self.mu
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "α must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.cluster_size == 0 {
            return Err(Error::Config("cluster_size must be ≥ 1".into()));
        }
        if let RhoPolicy::Fixed(r) = self.rho {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Config(format!(
                    "rho must be finite and ≥ 0, got {r}"
                )));
            }
        }
        if self.detectors.is_empty() {
            return Err(Error::Config("no detectors configured".into()));
        }
        if self.panel.is_empty() || self.panel.contains(['/', '\\']) {
            return Err(Error::Config(format!(
                "invalid panel label `{}`",
                self.panel
            )));
        }
        Ok(())
    }
}

/// Hypothesis arm of a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arm {
    Null,
    Alternative,
}

impl Arm {
    fn stream(self) -> u64 {
        match self {
            Arm::Null => NULL_STREAM,
            Arm::Alternative => ALT_STREAM,
        }
    }
}

/// Statistics of one detector under both hypotheses, in trial order.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorSamples {
    pub method: Method,
    pub null: Vec<f64>,
    pub alt: Vec<f64>,
}

/// Output of [`simulate`].
#[derive(Clone, Debug)]
pub struct Simulation {
    pub graph: DirectedGraph,
    pub samples: Vec<DetectorSamples>,
}

impl Simulation {
    pub fn samples_for(&self, method: Method) -> Option<&DetectorSamples> {
        self.samples.iter().find(|s| s.method == method)
    }
}

/// Cluster and observation of one trial. Both arms draw a cluster so that
/// the oracle ρ has the same law under the null and the alternative; only
/// the alternative adds the signal.
pub fn draw_trial(
    config: &ExperimentConfig,
    graph: &DirectedGraph,
    arm: Arm,
    index: usize,
) -> Result<(Cluster, Vec<f64>)> {
    let p = graph.vertex_count();
    let mut rng = stream_rng(config.seed, arm.stream(), index as u64);
    let cluster = if config.fixed_cluster {
        let mut crng = stream_rng(config.seed, CLUSTER_STREAM, 0);
        ball_cluster(graph, crng.random_range(0..p), config.cluster_size)?
    } else {
        ball_cluster(graph, rng.random_range(0..p), config.cluster_size)?
    };
    let signal = match arm {
        Arm::Null => None,
        Arm::Alternative => Some(make_signal(p, &cluster, config.mu)?),
    };
    let y = observe(p, signal.as_ref(), &mut rng);
    Ok((cluster, y))
}

fn run_trial(
    config: &ExperimentConfig,
    graph: &DirectedGraph,
    arm: Arm,
    index: usize,
) -> Result<Vec<f64>> {
    let (cluster, y) = draw_trial(config, graph, arm, index)?;
    let rho = match config.rho {
        RhoPolicy::Oracle => cluster.boundary_weight(),
        RhoPolicy::Fixed(r) => r,
    };
    let gss = GssOptions {
        guard: config.gss_guard,
        two_sided: config.less.two_sided,
    };
    config
        .detectors
        .iter()
        .map(|&m| Ok(detect(m, graph, &y, rho, &config.less, gss)?.statistic))
        .collect()
}

/// Runs `config.trials` trials under each hypothesis. Trials run on the
/// current rayon pool; results are identical for any thread count.
pub fn simulate(config: &ExperimentConfig) -> Result<Simulation> {
    config.validate()?;
    let graph = config.graph.build()?;
    if config.cluster_size > graph.vertex_count() {
        return Err(Error::Config(format!(
            "cluster_size {} exceeds p = {}",
            config.cluster_size,
            graph.vertex_count()
        )));
    }
    let run_arm = |arm: Arm| -> Result<Vec<Vec<f64>>> {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                run_trial(config, &graph, arm, i).map_err(|e| Error::Trial {
                    trial: i,
                    source: Box::new(e),
                })
            })
            .collect()
    };
    let null = run_arm(Arm::Null)?;
    let alt = run_arm(Arm::Alternative)?;
    let samples = config
        .detectors
        .iter()
        .enumerate()
        .map(|(d, &method)| DetectorSamples {
            method,
            null: null.iter().map(|row| row[d]).collect(),
            alt: alt.iter().map(|row| row[d]).collect(),
        })
        .collect();
    Ok(Simulation { graph, samples })
}

/// Receiver operating characteristic of the rule "reject when the
/// statistic is at least τ", swept over the pooled sample values.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, nondecreasing in both.
    pub points: Vec<(f64, f64)>,
    /// Thresholds of the interior points; `thresholds[i]` yields
    /// `points[i + 1]`.
    pub thresholds: Vec<f64>,
    pub auc: f64,
    pub null_count: usize,
    pub alt_count: usize,
}

impl RocCurve {
    /// CSV with columns `fpr,tpr`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "fpr,tpr")?;
        for (f, t) in &self.points {
            writeln!(out, "{f},{t}")?;
        }
        Ok(())
    }
}

/// ROC curve and trapezoidal AUC. Tied values move both rates at once.
pub fn roc(null: &[f64], alt: &[f64]) -> Result<RocCurve> {
    if null.is_empty() || alt.is_empty() {
        return Err(invalid("ROC needs nonempty null and alternative samples"));
    }
    if null.iter().chain(alt).any(|v| v.is_nan()) {
        return Err(invalid("ROC samples contain NaN"));
    }
    let mut pooled: Vec<(f64, bool)> = null
        .iter()
        .map(|&v| (v, false))
        .chain(alt.iter().map(|&v| (v, true)))
        .collect();
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (n0, n1) = (null.len() as f64, alt.len() as f64);
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::new();
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut i = 0;
    while i < pooled.len() {
        let v = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == v {
            if pooled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n0, tp as f64 / n1));
        thresholds.push(v);
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve {
        points,
        thresholds,
        auc,
        null_count: null.len(),
        alt_count: alt.len(),
    })
}

/// Fraction of null samples above `threshold` plus the fraction of
/// alternative samples at or below it.
pub fn empirical_risk(null: &[f64], alt: &[f64], threshold: f64) -> f64 {
    let type1 = null.iter().filter(|&&v| v > threshold).count() as f64 / null.len().max(1) as f64;
    let type2 = alt.iter().filter(|&&v| v <= threshold).count() as f64 / alt.len().max(1) as f64;
    type1 + type2
}

/// Fraction of `trials` pure-noise signals on `p` vertices whose statistic
/// exceeds `threshold`. Trial `i` uses the null stream of `(seed, i)`.
pub fn type1_calibration<F>(
    p: usize,
    statistic: F,
    threshold: f64,
    trials: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if trials == 0 {
        return Err(invalid("trials must be ≥ 1"));
    }
    let rejections: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let y = observe(p, None, &mut stream_rng(seed, NULL_STREAM, i as u64));
            statistic(&y)
                .map(|s| s > threshold)
                .map_err(|e| Error::Trial {
                    trial: i,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    Ok(rejections.iter().filter(|&&r| r).count() as f64 / trials as f64)
}

/// The three graph families of the ROC comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panel {
    Torus,
    Knn,
    Epsilon,
}

impl Panel {
    pub const ALL: [Panel; 3] = [Panel::Torus, Panel::Knn, Panel::Epsilon];

    pub fn as_str(self) -> &'static str {
        match self {
            Panel::Torus => "torus",
            Panel::Knn => "knn",
            Panel::Epsilon => "epsilon",
        }
    }

    /// Panel design: `p = 225`, `|C| = 15`, oracle ρ, 200 + 200 trials,
    /// LESS against the max and sum tests; μ = 4 on the torus and kNN
    /// panels (k = 4) and μ = 3 on the ε-graph (ε = p^{-1/3}).
    pub fn config(self, seed: u64) -> ExperimentConfig {
        const P: usize = 225;
        let (graph, mu) = match self {
            Panel::Torus => (GraphSpec::torus(15), 4.0),
            Panel::Knn => {
                let k = (P as f64).powf(0.25).round() as usize;
                (GraphSpec::knn(P, k, 2, seed), 4.0)
            }
            Panel::Epsilon => (
                GraphSpec::epsilon(P, (P as f64).powf(-1.0 / 3.0), 2, seed),
                3.0,
            ),
        };
        ExperimentConfig {
            panel: self.as_str().into(),
            graph,
            mu,
            cluster_size: 15,
            fixed_cluster: false,
            rho: RhoPolicy::Oracle,
            detectors: vec![Method::Less, Method::Max, Method::Sum],
            trials: 200,
            alpha: 0.05,
            seed,
            less: LessOptions::default(),
            gss_guard: GssOptions::default().guard,
        }
    }
}

impl fmt::Display for Panel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Panel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(Panel::Torus),
            "knn" => Ok(Panel::Knn),
            "epsilon" => Ok(Panel::Epsilon),
            other => Err(invalid(format!(
                "unknown panel `{other}` (expected torus|knn|epsilon)"
            ))),
        }
    }
}

/// ROC curves of one experiment.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub curves: Vec<(Method, RocCurve)>,
}

impl ExperimentReport {
    pub fn auc(&self, method: Method) -> Option<f64> {
        self.curves
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, c)| c.auc)
    }

    /// Writes `roc_<panel>_<detector>.csv` per detector, `summary.csv` and
    /// `metadata.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (method, curve) in &self.curves {
            let path = dir.join(format!("roc_{}_{}.csv", self.config.panel, method));
            curve.write_csv(std::io::BufWriter::new(fs::File::create(path)?))?;
        }
        let mut summary = std::io::BufWriter::new(fs::File::create(dir.join("summary.csv"))?);
        write_summary(&mut summary, std::slice::from_ref(self))?;
        fs::write(dir.join("metadata.txt"), self.metadata())?;
        Ok(())
    }

    pub fn metadata(&self) -> String {
        let c = &self.config;
        let rho = match c.rho {
            RhoPolicy::Oracle => "oracle (out(C) of each trial's cluster)".to_string(),
            RhoPolicy::Fixed(r) => r.to_string(),
        };
        let detectors: Vec<&str> = c.detectors.iter().map(|m| m.as_str()).collect();
        format!(
            "panel = {}\ngraph = {:?}\nmu = {}\ncluster_size = {}\ncluster = {}\nrho = {}\n\
             detectors = {}\ntrials_per_hypothesis = {}\nseed = {}\nnoise_sigma = 1\n\
             baselines = max and sum tests; spectral scan and spanning-tree wavelet detectors are not implemented\n",
            c.panel,
            c.graph,
            c.mu,
            c.cluster_size,
            if c.fixed_cluster { "fixed" } else { "resampled per trial" },
            rho,
            detectors.join(","),
            c.trials,
            c.seed,
        )
    }
}

/// Writes `panel,detector,auc,trials,seed` rows.
pub fn write_summary<W: Write>(mut out: W, reports: &[ExperimentReport]) -> Result<()> {
    writeln!(out, "panel,detector,auc,trials,seed")?;
    for r in reports {
        for (method, curve) in &r.curves {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.config.panel, method, curve.auc, r.config.trials, r.config.seed
            )?;
        }
    }
    Ok(())
}

/// Simulates a configuration and summarizes each detector by its ROC.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let sim = simulate(config)?;
    let curves = sim
        .samples
        .iter()
        .map(|s| Ok((s.method, roc(&s.null, &s.alt)?)))
        .collect::<Result<_>>()?;
    Ok(ExperimentReport {
        config: config.clone(),
        curves,
    })
}

/// One panel of the ROC comparison, optionally overriding μ.
pub fn panel_experiment(panel: Panel, seed: u64, mu: Option<f64>) -> Result<ExperimentReport> {
    let mut config = panel.config(seed);
    if let Some(mu) = mu {
        config.mu = mu;
    }
    run_experiment(&config)
}
