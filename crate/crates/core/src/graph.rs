//! Weighted directed graphs, the cut functional `out(C)` and its Lovász extension.
//!
//! Undirected graphs are encoded as pairs of opposite arcs with equal weight,
//! so that `out(C)` is the classical cut weight. The signed incidence operator
//! uses `(Dx)_e = W_e (x_tail - x_head)`, which makes `‖(Dx)₊‖₁` exactly the
//! Lovász extension of `out`.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A weighted arc `tail -> head`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
}

/// An edge of the undirected skeleton with `u < v` and symmetrized weight
/// `(W_uv + W_vu) / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UndirectedEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Immutable weighted directed graph on vertices `0..p`.
#[derive(Clone, Debug)]
pub struct DirectedGraph {
    p: usize,
    arcs: Vec<Arc>,
    out_offsets: Vec<usize>,
    out_index: Vec<usize>,
    in_offsets: Vec<usize>,
    in_index: Vec<usize>,
    connected: bool,
    symmetric: bool,
}

impl DirectedGraph {
    /// Validates and indexes an arc list.
    pub fn new(p: usize, arcs: Vec<Arc>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one vertex".into(),
            ));
        }
        let mut seen = HashMap::with_capacity(arcs.len());
        for (i, a) in arcs.iter().enumerate() {
            for id in [a.tail, a.head] {
                if id >= p {
                    return Err(Error::InvalidVertex { id, p });
                }
            }
            if a.tail == a.head {
                return Err(Error::SelfLoop(a.tail));
            }
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(Error::BadWeight {
                    tail: a.tail,
                    head: a.head,
                    weight: a.weight,
                });
            }
            if seen.insert((a.tail, a.head), i).is_some() {
                return Err(Error::DuplicateArc {
                    tail: a.tail,
                    head: a.head,
                });
            }
        }

        let (out_offsets, out_index) = csr(p, &arcs, |a| a.tail);
        let (in_offsets, in_index) = csr(p, &arcs, |a| a.head);
        let symmetric = arcs.iter().all(|a| {
            seen.get(&(a.head, a.tail))
                .is_some_and(|&j| arcs[j].weight == a.weight)
        });

        let mut g = DirectedGraph {
            p,
            arcs,
            out_offsets,
            out_index,
            in_offsets,
            in_index,
            connected: false,
            symmetric,
        };
        g.connected = g.skeleton_connected();
        Ok(g)
    }

    /// Encodes each undirected edge `{u, v}` as the arcs `u -> v` and `v -> u`.
    pub fn from_undirected(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let arcs = edges
            .iter()
            .flat_map(|&(u, v, w)| {
                [
                    Arc {
                        tail: u,
                        head: v,
                        weight: w,
                    },
                    Arc {
                        tail: v,
                        head: u,
                        weight: w,
                    },
                ]
            })
            .collect();
        Self::new(p, arcs)
    }

    pub fn vertex_count(&self) -> usize {
        self.p
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Whether the undirected skeleton is connected.
    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Whether every arc has a reverse arc of the same weight.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Number of undirected edges when symmetric, otherwise the arc count.
    pub fn edge_count(&self) -> usize {
        if self.symmetric {
            self.arcs.len() / 2
        } else {
            self.arcs.len()
        }
    }

    pub fn min_weight(&self) -> Option<f64> {
        self.arcs.iter().map(|a| a.weight).reduce(f64::min)
    }

    /// Arcs leaving `v`.
    pub fn out_arcs(&self, v: usize) -> impl Iterator<Item = &Arc> + '_ {
        self.out_index[self.out_offsets[v]..self.out_offsets[v + 1]]
            .iter()
            .map(move |&i| &self.arcs[i])
    }

    /// Arcs entering `v`.
    pub fn in_arcs(&self, v: usize) -> impl Iterator<Item = &Arc> + '_ {
        self.in_index[self.in_offsets[v]..self.in_offsets[v + 1]]
            .iter()
            .map(move |&i| &self.arcs[i])
    }

    /// Distinct neighbours of `v` in the undirected skeleton, ascending.
    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut nb: Vec<usize> = self
            .out_arcs(v)
            .map(|a| a.head)
            .chain(self.in_arcs(v).map(|a| a.tail))
            .collect();
        nb.sort_unstable();
        nb.dedup();
        nb
    }

    /// Total weight leaving `v` (the out-degree weight).
    pub fn out_degree_weight(&self, v: usize) -> f64 {
        self.out_arcs(v).map(|a| a.weight).sum()
    }

    /// `out(C)` for a vertex subset given as ids.
    pub fn out_weight(&self, members: &[usize]) -> Result<f64> {
        let mask = self.mask(members)?;
        Ok(self.out_weight_mask(&mask))
    }

    /// `out(C)` for a membership mask. Summation follows arc order.
    pub fn out_weight_mask(&self, mask: &[bool]) -> f64 {
        debug_assert_eq!(mask.len(), self.p);
        self.arcs
            .iter()
            .filter(|a| mask[a.tail] && !mask[a.head])
            .map(|a| a.weight)
            .sum()
    }

    /// Lovász extension of `out`: `Σ_e W_e (x_tail - x_head)₊`.
    pub fn lovasz_out(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        Ok(self
            .arcs
            .iter()
            .map(|a| a.weight * (x[a.tail] - x[a.head]).max(0.0))
            .sum())
    }

    /// Signed incidence image `z_e = W_e (x_tail - x_head)`.
    pub fn incidence(&self, x: &[f64]) -> Result<SignedIncidenceImage> {
        self.check_len(x.len())?;
        Ok(SignedIncidenceImage(
            self.arcs
                .iter()
                .map(|a| a.weight * (x[a.tail] - x[a.head]))
                .collect(),
        ))
    }

    /// Undirected skeleton with symmetrized weights `(W_uv + W_vu) / 2`,
    /// ordered by `(u, v)`.
    pub fn symmetrized_edges(&self) -> Vec<UndirectedEdge> {
        let mut acc: HashMap<(usize, usize), f64> = HashMap::new();
        for a in &self.arcs {
            let key = (a.tail.min(a.head), a.tail.max(a.head));
            *acc.entry(key).or_insert(0.0) += a.weight / 2.0;
        }
        let mut edges: Vec<UndirectedEdge> = acc
            .into_iter()
            .map(|((u, v), weight)| UndirectedEdge { u, v, weight })
            .collect();
        edges.sort_by_key(|e| (e.u, e.v));
        edges
    }

    /// Membership mask from ids, rejecting invalid ids.
    pub fn mask(&self, members: &[usize]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.p];
        for &v in members {
            if v >= self.p {
                return Err(Error::InvalidVertex { id: v, p: self.p });
            }
            mask[v] = true;
        }
        Ok(mask)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.p {
            return Err(Error::LengthMismatch {
                expected: self.p,
                got: len,
            });
        }
        Ok(())
    }

    fn skeleton_connected(&self) -> bool {
        let mut seen = vec![false; self.p];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            let next = self
                .out_arcs(v)
                .map(|a| a.head)
                .chain(self.in_arcs(v).map(|a| a.tail));
            for w in next {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.p
    }

    /// Writes the edge-list text format. Symmetric graphs are written as
    /// `undirected` with one line per edge (`u < v`).
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        if self.symmetric {
            let edges: Vec<&Arc> = self.arcs.iter().filter(|a| a.tail < a.head).collect();
            writeln!(out, "{} {} undirected", self.p, edges.len())?;
            for a in edges {
                writeln!(out, "{} {} {}", a.tail, a.head, a.weight)?;
            }
        } else {
            writeln!(out, "{} {} directed", self.p, self.arcs.len())?;
            for a in &self.arcs {
                writeln!(out, "{} {} {}", a.tail, a.head, a.weight)?;
            }
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("edge list is ASCII")
    }

    /// Parses the edge-list text format: a header `p m directed|undirected`
    /// followed by `m` whitespace-separated `tail head weight` lines.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut lines =
            input
                .lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l))
                .filter(|(_, l)| match l {
                    Ok(s) => {
                        let t = s.trim();
                        !t.is_empty() && !t.starts_with('#')
                    }
                    Err(_) => true,
                });

        let (hline, header) = match lines.next() {
            Some((n, l)) => (n, l?),
            None => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "missing header".into(),
                })
            }
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be `p m directed|undirected`".into(),
            });
        }
        let p: usize = parse_field(fields[0], hline, "p")?;
        let m: usize = parse_field(fields[1], hline, "m")?;
        let undirected = match fields[2] {
            "undirected" => true,
            "directed" => false,
            other => {
                return Err(Error::Parse {
                    line: hline,
                    msg: format!("unknown kind `{other}`"),
                })
            }
        };

        let mut triples = Vec::with_capacity(m);
        for (n, line) in lines {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse {
                    line: n,
                    msg: "expected `tail head weight`".into(),
                });
            }
            triples.push((
                parse_field::<usize>(f[0], n, "tail")?,
                parse_field::<usize>(f[1], n, "head")?,
                parse_field::<f64>(f[2], n, "weight")?,
            ));
        }
        if triples.len() != m {
            let mut msg = String::new();
            let _ = write!(msg, "header declares {m} lines, found {}", triples.len());
            return Err(Error::Parse { line: hline, msg });
        }

        if undirected {
            Self::from_undirected(p, &triples)
        } else {
            let arcs = triples
                .into_iter()
                .map(|(tail, head, weight)| Arc { tail, head, weight })
                .collect();
            Self::new(p, arcs)
        }
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {what} `{s}`"),
    })
}

fn csr(p: usize, arcs: &[Arc], key: impl Fn(&Arc) -> usize) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; p + 1];
    for a in arcs {
        offsets[key(a) + 1] += 1;
    }
    for v in 0..p {
        offsets[v + 1] += offsets[v];
    }
    let mut fill = offsets.clone();
    let mut index = vec![0usize; arcs.len()];
    for (i, a) in arcs.iter().enumerate() {
        let k = key(a);
        index[fill[k]] = i;
        fill[k] += 1;
    }
    (offsets, index)
}

/// Per-arc values `z_e = W_e (x_tail - x_head)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedIncidenceImage(pub Vec<f64>);

impl SignedIncidenceImage {
    /// `‖z₊‖₁`
    pub fn positive_part_norm(&self) -> f64 {
        self.0.iter().map(|z| z.max(0.0)).sum()
    }
}

/// A vertex subset with its cached boundary weight `out(C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    members: Vec<usize>,
    boundary_weight: f64,
}

impl Cluster {
    /// Sorts and deduplicates `members`, then caches `out(C)`.
    pub fn new(graph: &DirectedGraph, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        let boundary_weight = graph.out_weight(&members)?;
        Ok(Cluster {
            members,
            boundary_weight,
        })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn boundary_weight(&self) -> f64 {
        self.boundary_weight
    }

    pub fn indicator(&self, p: usize) -> Vec<bool> {
        let mut mask = vec![false; p];
        for &v in &self.members {
            mask[v] = true;
        }
        mask
    }
}

/// Lovász extension of an arbitrary set function, evaluated through the
/// sorted-prefix formula. Ties in `x` are broken by ascending index.
///
/// `f(x) = x_{j1} F({j1}) + Σ_{i≥2} (F(S_i) - F(S_{i-1})) x_{ji}`
pub fn lovasz_extension_generic<F>(set_fn: F, x: &[f64]) -> f64
where
    F: Fn(&[bool]) -> f64,
{
    let p = x.len();
    if p == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..p).collect();
    // stable sort keeps index order among equal coordinates
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]));

    let mut mask = vec![false; p];
    mask[order[0]] = true;
    let mut prev = set_fn(&mask);
    let mut total = x[order[0]] * prev;
    for &j in &order[1..] {
        mask[j] = true;
        let cur = set_fn(&mask);
        total += (cur - prev) * x[j];
        prev = cur;
    }
    total
}
