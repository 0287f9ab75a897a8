//! Detectors: the brute-force graph scan statistic (GSS), the Lovász extended
//! scan statistic (LESS) evaluated through its Lagrangian dual, and the naive
//! max / sum baselines.
//!
//! For a fixed scan size `t` the LESS needs
//!
//! ```text
//! h_t = min_{η₀, η₁ ≥ 0}  g(η₀, η₁) + η₀ t + η₁ ρ,
//! g(η₀, η₁) = max_{x ∈ {0,1}^p}  yᵀx − η₀ 1ᵀx − η₁ out(x).
//! ```
//!
//! Every binary `x` contributes the affine minorant
//! `yᵀx + η₀ (t − 1ᵀx) + η₁ (ρ − out(x))` of `h_t`, and `h_t` is the upper
//! envelope of all of them. [`DualSolver`] runs a cutting-plane method on
//! that envelope: it minimizes the envelope of the pieces found so far (a
//! certified lower bound), evaluates `g` there with one min-cut (an upper
//! bound and a new piece), and stops when the two bounds meet. Pieces do not
//! depend on `t`, so the pool carries over from one scan size to the next.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cutflow::{DualValue, MrfSolver};
use crate::error::{invalid, Error, Result};
use crate::graph::{Cluster, DirectedGraph};

/// Default enumeration guard for [`gss_bruteforce`].
pub const DEFAULT_GSS_GUARD: usize = 25;

const GOLDEN_ITERATIONS: usize = 90;

/// Detector tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Gss,
    Less,
    Max,
    Sum,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Gss, Method::Less, Method::Max, Method::Sum];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gss => "gss",
            Method::Less => "less",
            Method::Max => "max",
            Method::Sum => "sum",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gss" => Ok(Method::Gss),
            "less" => Ok(Method::Less),
            "max" => Ok(Method::Max),
            "sum" => Ok(Method::Sum),
            other => Err(invalid(format!(
                "unknown method `{other}` (expected gss|less|max|sum)"
            ))),
        }
    }
}

/// Lagrange multipliers `(η₀, η₁)` of the LESS dual.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DualPoint {
    pub eta0: f64,
    pub eta1: f64,
}

impl DualPoint {
    pub fn new(eta0: f64, eta1: f64) -> Result<Self> {
        if !(eta0.is_finite() && eta0 >= 0.0 && eta1.is_finite() && eta1 >= 0.0) {
            return Err(invalid(format!(
                "dual point ({eta0}, {eta1}) must be finite and ≥ 0"
            )));
        }
        Ok(DualPoint { eta0, eta1 })
    }
}

/// One row of the per-`t` LESS trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    /// Best upper bound found for `h_t`.
    pub value: f64,
    pub dual: DualPoint,
    /// Min-cut calls spent on this `t`.
    pub calls: usize,
    /// Certified gap between `value` and the cutting-plane lower bound.
    pub gap: f64,
}

/// Output of a detector.
#[derive(Clone, Debug)]
pub struct DetectionResult {
    pub statistic: f64,
    pub method: Method,
    pub best_t: Option<usize>,
    pub best_dual: Option<DualPoint>,
    pub best_x: Option<Vec<bool>>,
    pub argmax_cluster: Option<Cluster>,
    pub trace: Vec<TraceRow>,
    /// Set when some `t` exhausted its call budget before reaching `tol`;
    /// the statistic is then still a valid upper bound.
    pub approximate: bool,
    /// Largest `gap / √t` over the trace.
    pub gap_bound: f64,
    /// Whether the statistic was taken over `y` and `−y`.
    pub two_sided: bool,
}

impl DetectionResult {
    fn scalar(method: Method, statistic: f64) -> Self {
        DetectionResult {
            statistic,
            method,
            best_t: None,
            best_dual: None,
            best_x: None,
            argmax_cluster: None,
            trace: Vec::new(),
            approximate: false,
            gap_bound: 0.0,
            two_sided: false,
        }
    }

    /// Writes the trace as CSV with columns `t,value,eta0,eta1,calls`.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value,eta0,eta1,calls")?;
        for r in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.t, r.value, r.dual.eta0, r.dual.eta1, r.calls
            )?;
        }
        Ok(())
    }
}

/// `max_v |y_v|`
pub fn max_test(y: &[f64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `Σ_v y_v`
pub fn sum_test(y: &[f64]) -> f64 {
    y.iter().sum()
}

/// Options for [`gss_bruteforce`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GssOptions {
    /// Largest `p` for which enumeration is attempted.
    pub guard: usize,
    /// Scan `y` and `−y` and keep the larger statistic.
    pub two_sided: bool,
}

impl Default for GssOptions {
    fn default() -> Self {
        GssOptions {
            guard: DEFAULT_GSS_GUARD,
            two_sided: false,
        }
    }
}

/// Exact graph scan statistic `max 1_Cᵀy / √|C|` over nonempty `C` with
/// `out(C) ≤ ρ`, by Gray-code enumeration of all `2^p` subsets. Ties go to
/// the lexicographically smallest member list.
pub fn gss_bruteforce(
    graph: &DirectedGraph,
    y: &[f64],
    rho: f64,
    opts: GssOptions,
) -> Result<DetectionResult> {
    let p = graph.vertex_count();
    graph.check_len(y.len())?;
    check_signal(y)?;
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(invalid(format!("ρ must be finite and ≥ 0, got {rho}")));
    }
    let guard = opts.guard.min(62);
    if p > guard {
        return Err(Error::TooLarge { p, guard });
    }

    let (mut stat, mut mask) = gss_enumerate(graph, y, rho)?;
    if opts.two_sided {
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let (s, m) = gss_enumerate(graph, &neg, rho)?;
        if s > stat {
            stat = s;
            mask = m;
        }
    }
    let members: Vec<usize> = (0..p).filter(|&v| mask >> v & 1 == 1).collect();
    let x: Vec<bool> = (0..p).map(|v| mask >> v & 1 == 1).collect();
    let cluster = Cluster::new(graph, members)?;
    let mut result = DetectionResult::scalar(Method::Gss, stat);
    result.best_t = Some(cluster.len());
    result.best_x = Some(x);
    result.argmax_cluster = Some(cluster);
    result.two_sided = opts.two_sided;
    Ok(result)
}

fn gss_enumerate(graph: &DirectedGraph, y: &[f64], rho: f64) -> Result<(f64, u64)> {
    let p = graph.vertex_count();
    let out_nb: Vec<Vec<(usize, f64)>> = (0..p)
        .map(|v| graph.out_arcs(v).map(|a| (a.head, a.weight)).collect())
        .collect();
    let in_nb: Vec<Vec<(usize, f64)>> = (0..p)
        .map(|v| graph.in_arcs(v).map(|a| (a.tail, a.weight)).collect())
        .collect();
    let total_weight: f64 = graph.arcs().iter().map(|a| a.weight).sum();
    let cut_slack = 1e-9 * (1.0 + total_weight);
    let y_scale: f64 = 1.0 + y.iter().map(|v| v.abs()).sum::<f64>();
    let value_slack = 1e-9 * y_scale;

    let exact_cut = |mask: u64| -> f64 {
        let m: Vec<bool> = (0..p).map(|v| mask >> v & 1 == 1).collect();
        graph.out_weight_mask(&m)
    };
    let exact_value = |mask: u64| -> f64 {
        let sum: f64 = (0..p).filter(|&v| mask >> v & 1 == 1).map(|v| y[v]).sum();
        sum / (mask.count_ones() as f64).sqrt()
    };

    let mut best: Option<(f64, u64)> = None;
    let (mut mask, mut sum, mut cut, mut size) = (0u64, 0.0f64, 0.0f64, 0u32);
    for i in 1u64..(1u64 << p) {
        let v = i.trailing_zeros() as usize;
        let bit = 1u64 << v;
        let leaving: f64 = out_nb[v]
            .iter()
            .filter(|(u, _)| mask & (1u64 << u) == 0)
            .map(|(_, w)| w)
            .sum();
        let entering: f64 = in_nb[v]
            .iter()
            .filter(|(u, _)| mask & (1u64 << u) != 0)
            .map(|(_, w)| w)
            .sum();
        if mask & bit == 0 {
            cut += leaving - entering;
            sum += y[v];
            size += 1;
        } else {
            cut -= leaving - entering;
            sum -= y[v];
            size -= 1;
        }
        mask ^= bit;
        if size == 0 {
            continue;
        }
        if cut > rho + cut_slack || (cut > rho - cut_slack && exact_cut(mask) > rho) {
            continue;
        }
        let approx = sum / (size as f64).sqrt();
        match best {
            Some((b, _)) if approx < b - value_slack => {}
            Some((b, bm)) => {
                let value = exact_value(mask);
                if value > b || (value == b && lex_less(mask, bm)) {
                    best = Some((value, mask));
                }
            }
            None => best = Some((exact_value(mask), mask)),
        }
    }
    best.ok_or(Error::EmptyFeasibleClass)
}

/// Lexicographic order of the ascending member lists of two bitmasks.
fn lex_less(a: u64, b: u64) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let d = diff.trailing_zeros();
    let above = |m: u64| d < 63 && (m >> (d + 1)) != 0;
    if a >> d & 1 == 1 {
        above(b)
    } else {
        !above(a)
    }
}

/// Options for the LESS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LessOptions {
    /// Absolute tolerance on each `h_t`.
    pub tol: f64,
    /// Min-cut budget per scan size.
    pub max_calls_per_t: usize,
    /// Evaluate scan sizes in parallel with independent (cold) piece pools.
    pub parallel: bool,
    /// Scan `y` and `−y` and keep the larger statistic.
    pub two_sided: bool,
}

impl Default for LessOptions {
    fn default() -> Self {
        LessOptions {
            tol: 1e-6,
            max_calls_per_t: 500,
            parallel: false,
            two_sided: false,
        }
    }
}

/// Result of minimizing `h_t` for one scan size.
#[derive(Clone, Debug)]
pub struct DualMinimum {
    /// Best upper bound `h_t(η)` found.
    pub value: f64,
    pub dual: DualPoint,
    /// Maximizer of `g` at `dual`.
    pub x: Vec<bool>,
    /// Certified lower bound on `min h_t`.
    pub lower_bound: f64,
    pub calls: usize,
    pub approximate: bool,
}

/// An affine piece `gain + η₀ (t − size) + η₁ (ρ − cut)` contributed by one
/// binary vector.
#[derive(Clone, Debug)]
struct Piece {
    size: usize,
    cut: f64,
    gain: f64,
    x: Vec<bool>,
}

/// Cutting-plane minimizer of `h_t` sharing a piece pool across `t`.
pub struct DualSolver<'g> {
    mrf: MrfSolver<'g>,
    y: Vec<f64>,
    rho: f64,
    bound0: f64,
    bound1: f64,
    pieces: Vec<Piece>,
    index: HashMap<(usize, u64), usize>,
    // scratch for the envelope computation, indexed by size
    best_by_size: Vec<f64>,
}

impl<'g> DualSolver<'g> {
    pub fn new(graph: &'g DirectedGraph, y: &[f64], rho: f64) -> Result<Self> {
        let p = graph.vertex_count();
        graph.check_len(y.len())?;
        check_signal(y)?;
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(invalid(format!("ρ must be finite and ≥ 0, got {rho}")));
        }
        let (bound0, bound1) = dual_box(graph, y);
        let mut solver = DualSolver {
            mrf: MrfSolver::new(graph),
            y: y.to_vec(),
            rho,
            bound0,
            bound1,
            pieces: Vec::new(),
            index: HashMap::new(),
            best_by_size: vec![f64::NEG_INFINITY; p + 1],
        };
        solver.add_piece(0, 0.0, 0.0, vec![false; p]);
        Ok(solver)
    }

    /// Search box `[0, max_i (y_i)₊] × [0, Σ_i (y_i)₊ / w_min]`.
    pub fn dual_box(&self) -> (f64, f64) {
        (self.bound0, self.bound1)
    }

    /// Total min-cut calls made by this solver.
    pub fn calls(&self) -> usize {
        self.mrf.calls()
    }

    /// Evaluates `g` at `dual` and records the maximizer as a piece.
    pub fn evaluate(&mut self, dual: DualPoint) -> Result<DualValue> {
        let d = self.mrf.dual(&self.y, dual.eta0, dual.eta1)?;
        self.add_piece(d.size, d.cut, d.gain, d.x.clone());
        Ok(d)
    }

    fn add_piece(&mut self, size: usize, cut: f64, gain: f64, x: Vec<bool>) -> bool {
        let key = (size, cut.to_bits());
        match self.index.get(&key) {
            Some(&i) if self.pieces[i].gain >= gain => false,
            Some(&i) => {
                self.pieces[i].gain = gain;
                self.pieces[i].x = x;
                true
            }
            None => {
                self.index.insert(key, self.pieces.len());
                self.pieces.push(Piece { size, cut, gain, x });
                true
            }
        }
    }

    /// `h_t(η)` from an evaluated `g`.
    fn objective(&self, t: usize, dual: DualPoint, g: f64) -> f64 {
        g + dual.eta0 * t as f64 + dual.eta1 * self.rho
    }

    /// Minimizes `h_t` to absolute tolerance `opts.tol`, or until the call
    /// budget runs out.
    pub fn minimize(
        &mut self,
        t: usize,
        warm: Option<DualPoint>,
        opts: &LessOptions,
    ) -> Result<DualMinimum> {
        let p = self.y.len();
        if t == 0 || t > p {
            return Err(invalid(format!("scan size t = {t} outside 1..={p}")));
        }
        let start_calls = self.calls();
        let mut best: Option<(f64, DualPoint, Vec<bool>)> = None;
        fn consider(
            best: &mut Option<(f64, DualPoint, Vec<bool>)>,
            v: f64,
            d: DualPoint,
            x: &[bool],
        ) {
            if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                *best = Some((v, d, x.to_vec()));
            }
        }

        if let Some(w) = warm {
            let w = DualPoint {
                eta0: w.eta0.clamp(0.0, self.bound0),
                eta1: w.eta1.clamp(0.0, self.bound1),
            };
            let d = self.evaluate(w)?;
            consider(&mut best, self.objective(t, w, d.value), w, &d.x);
        }

        let mut lower;
        let mut approximate = false;
        loop {
            let (model_value, point) = self.model_minimum(t);
            lower = model_value;
            if let Some((b, _, _)) = &best {
                if b - lower <= opts.tol {
                    break;
                }
            }
            if self.calls() - start_calls >= opts.max_calls_per_t {
                approximate = true;
                break;
            }
            let d = self.mrf.dual(&self.y, point.eta0, point.eta1)?;
            let value = self.objective(t, point, d.value);
            consider(&mut best, value, point, &d.x);
            let fresh = self.add_piece(d.size, d.cut, d.gain, d.x);
            if !fresh {
                // the model is already exact at `point`; what remains of the
                // gap is rounding in the envelope search
                let b = best.as_ref().map_or(value, |(b, _, _)| *b);
                approximate = b - lower > opts.tol;
                break;
            }
        }
        let (value, dual, x) = best.expect("at least one evaluation happened");
        Ok(DualMinimum {
            value,
            dual,
            x,
            lower_bound: lower.min(value),
            calls: self.calls() - start_calls,
            approximate,
        })
    }

    /// Minimum of the current piece envelope over the box: golden-section
    /// search in η₁ of the exact minimum over η₀.
    fn model_minimum(&mut self, t: usize) -> (f64, DualPoint) {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (0.0, self.bound1);
        if b == 0.0 {
            let (v, e0) = self.envelope_over_eta0(t, 0.0);
            return (
                v,
                DualPoint {
                    eta0: e0,
                    eta1: 0.0,
                },
            );
        }
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = self.envelope_over_eta0(t, c);
        let mut fd = self.envelope_over_eta0(t, d);
        for _ in 0..GOLDEN_ITERATIONS {
            if fc.0 <= fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = self.envelope_over_eta0(t, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = self.envelope_over_eta0(t, d);
            }
            if b - a <= 1e-13 * (1.0 + self.bound1) {
                break;
            }
        }
        let mut best = if fc.0 <= fd.0 { (fc, c) } else { (fd, d) };
        // the optimum is often on the η₁ = 0 face
        let f0 = self.envelope_over_eta0(t, 0.0);
        if f0.0 <= best.0 .0 {
            best = (f0, 0.0);
        }
        let ((value, eta0), eta1) = best;
        (value, DualPoint { eta0, eta1 })
    }

    /// `min_{η₀ ∈ [0, U₀]} max_k gain_k + η₁ (ρ − cut_k) + η₀ (t − size_k)`
    /// and a minimizer, via the upper hull of one line per size.
    fn envelope_over_eta0(&mut self, t: usize, eta1: f64) -> (f64, f64) {
        let p = self.y.len();
        self.best_by_size.fill(f64::NEG_INFINITY);
        for pc in &self.pieces {
            let b = pc.gain + eta1 * (self.rho - pc.cut);
            if b > self.best_by_size[pc.size] {
                self.best_by_size[pc.size] = b;
            }
        }
        // slopes t - size ascend as size descends
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(p + 1);
        for size in (0..=p).rev() {
            let b = self.best_by_size[size];
            if b == f64::NEG_INFINITY {
                continue;
            }
            let m = t as f64 - size as f64;
            while hull.len() >= 2 {
                let (m1, b1) = hull[hull.len() - 2];
                let (m2, b2) = hull[hull.len() - 1];
                // drop the middle line when it never attains the envelope
                if (b1 - b) * (m2 - m1) <= (b1 - b2) * (m - m1) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((m, b));
        }
        let first_up = hull.iter().position(|&(m, _)| m >= 0.0);
        let argmin = match first_up {
            None => self.bound0,
            Some(0) => 0.0,
            Some(i) => {
                let (m1, b1) = hull[i - 1];
                let (m2, b2) = hull[i];
                ((b1 - b2) / (m2 - m1)).clamp(0.0, self.bound0)
            }
        };
        let value = hull
            .iter()
            .map(|&(m, b)| b + m * argmin)
            .fold(f64::NEG_INFINITY, f64::max);
        (value, argmin)
    }
}

fn dual_box(graph: &DirectedGraph, y: &[f64]) -> (f64, f64) {
    let max_pos = y.iter().fold(0.0f64, |m, &v| m.max(v));
    let pos_sum: f64 = y.iter().map(|v| v.max(0.0)).sum();
    let bound1 = match graph.min_weight() {
        Some(w) => pos_sum / w,
        None => 0.0,
    };
    (max_pos, bound1)
}

fn check_signal(y: &[f64]) -> Result<()> {
    match y.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(invalid(format!("signal value {v} is not finite"))),
        None => Ok(()),
    }
}

/// Minimizes `h_t(η) = g(η) + η₀ t + η₁ ρ` for one scan size, starting with
/// an evaluation at `warm`.
pub fn minimize_dual(
    graph: &DirectedGraph,
    y: &[f64],
    t: usize,
    rho: f64,
    warm: DualPoint,
    opts: &LessOptions,
) -> Result<DualMinimum> {
    DualSolver::new(graph, y, rho)?.minimize(t, Some(warm), opts)
}

/// Lovász extended scan statistic `max_t h_t / √t`, clamped at zero.
pub fn less(
    graph: &DirectedGraph,
    y: &[f64],
    rho: f64,
    opts: &LessOptions,
) -> Result<DetectionResult> {
    let mut result = less_one_sided(graph, y, rho, opts)?;
    if opts.two_sided {
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let other = less_one_sided(graph, &neg, rho, opts)?;
        if other.statistic > result.statistic {
            result = other;
        }
        result.two_sided = true;
    }
    Ok(result)
}

fn less_one_sided(
    graph: &DirectedGraph,
    y: &[f64],
    rho: f64,
    opts: &LessOptions,
) -> Result<DetectionResult> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(invalid("tolerance must be positive"));
    }
    let p = graph.vertex_count();
    let minima: Vec<DualMinimum> = if opts.parallel {
        (1..=p)
            .into_par_iter()
            .map(|t| DualSolver::new(graph, y, rho)?.minimize(t, None, opts))
            .collect::<Result<_>>()?
    } else {
        let mut solver = DualSolver::new(graph, y, rho)?;
        let mut warm: Option<DualPoint> = None;
        let mut out = Vec::with_capacity(p);
        for t in 1..=p {
            let m = solver.minimize(t, warm, opts)?;
            warm = Some(m.dual);
            out.push(m);
        }
        out
    };

    let mut result = DetectionResult::scalar(Method::Less, 0.0);
    let mut best: Option<usize> = None;
    for (i, m) in minima.iter().enumerate() {
        let t = i + 1;
        let scaled = m.value / (t as f64).sqrt();
        result.trace.push(TraceRow {
            t,
            value: m.value,
            dual: m.dual,
            calls: m.calls,
            gap: (m.value - m.lower_bound).max(0.0),
        });
        result.approximate |= m.approximate;
        result.gap_bound = result
            .gap_bound
            .max((m.value - m.lower_bound).max(0.0) / (t as f64).sqrt());
        if best.is_none_or(|b| scaled > minima[b].value / ((b + 1) as f64).sqrt()) {
            best = Some(i);
        }
    }
    if let Some(i) = best {
        let m = &minima[i];
        result.statistic = (m.value / ((i + 1) as f64).sqrt()).max(0.0);
        result.best_t = Some(i + 1);
        result.best_dual = Some(m.dual);
        result.best_x = Some(m.x.clone());
    }
    Ok(result)
}

/// Dispatches a detector by tag. `rho` is ignored by the naive tests.
pub fn detect(
    method: Method,
    graph: &DirectedGraph,
    y: &[f64],
    rho: f64,
    less_opts: &LessOptions,
    gss_opts: GssOptions,
) -> Result<DetectionResult> {
    graph.check_len(y.len())?;
    match method {
        Method::Gss => gss_bruteforce(graph, y, rho, gss_opts),
        Method::Less => less(graph, y, rho, less_opts),
        Method::Max => {
            check_signal(y)?;
            Ok(DetectionResult::scalar(Method::Max, max_test(y)))
        }
        Method::Sum => {
            check_signal(y)?;
            Ok(DetectionResult::scalar(Method::Sum, sum_test(y)))
        }
    }
}
