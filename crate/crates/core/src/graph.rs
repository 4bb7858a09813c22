//! Undirected weighted graphs in CSR form.
//!
//! Every undirected edge `{u,v}` occupies two adjacency slots, `u -> v` and
//! `v -> u`. Neighbor lists are sorted ascending. Weights are stored per slot
//! so that direction-dependent schemes (weighted cascade) can be represented.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Vertex count limit; labels are compared as signed 32-bit lanes.
pub const MAX_VERTICES: usize = i32::MAX as usize;

/// Magic bytes of the binary CSR cache.
pub const CSR_MAGIC: &[u8; 8] = b"INFCSR1\0";

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    xadj: Vec<usize>,
    adj: Vec<u32>,
    weights: Vec<f64>,
    original_ids: Vec<u64>,
    explicit_weights: bool,
}

impl Graph {
    /// Builds a graph over vertices `0..n` from an undirected edge list.
    ///
    /// Self-loops are dropped and repeated edges collapse onto the first
    /// occurrence (first weight wins).
    pub fn from_edges(n: usize, edges: &[(u32, u32, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if n > MAX_VERTICES {
            return Err(Error::Constraint(format!(
                "{n} vertices exceeds the 32-bit signed label limit"
            )));
        }
        if let Some(&(u, v, _)) = edges.iter().find(|&&(u, v, _)| u as usize >= n || v as usize >= n) {
            return Err(Error::InvalidParameter(format!(
                "edge ({u},{v}) references a vertex outside 0..{n}"
            )));
        }
        let canonical = dedup_canonical(edges.iter().copied());
        let ids = (0..n as u64).collect();
        Ok(Self::from_canonical(ids, &canonical, true))
    }

    fn from_canonical(original_ids: Vec<u64>, edges: &[(u32, u32, f64)], explicit: bool) -> Self {
        let n = original_ids.len();
        let mut degree = vec![0usize; n];
        for &(u, v, _) in edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut xadj = Vec::with_capacity(n + 1);
        xadj.push(0);
        for d in &degree {
            xadj.push(xadj.last().unwrap() + d);
        }
        let m = xadj[n];
        let mut cursor = xadj[..n].to_vec();
        let mut slots = vec![(0u32, 0f64); m];
        for &(u, v, w) in edges {
            slots[cursor[u as usize]] = (v, w);
            cursor[u as usize] += 1;
            slots[cursor[v as usize]] = (u, w);
            cursor[v as usize] += 1;
        }
        for v in 0..n {
            slots[xadj[v]..xadj[v + 1]].sort_unstable_by_key(|&(t, _)| t);
        }
        let (adj, weights) = slots.into_iter().unzip();
        Graph {
            xadj,
            adj,
            weights,
            original_ids,
            explicit_weights: explicit,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.xadj.len() - 1
    }

    /// Number of adjacency slots (twice the undirected edge count).
    pub fn num_slots(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.len() / 2
    }

    pub fn xadj(&self) -> &[usize] {
        &self.xadj
    }

    pub fn adj(&self) -> &[u32] {
        &self.adj
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn degree(&self, v: u32) -> usize {
        self.xadj[v as usize + 1] - self.xadj[v as usize]
    }

    #[inline]
    pub fn slots(&self, v: u32) -> std::ops::Range<usize> {
        self.xadj[v as usize]..self.xadj[v as usize + 1]
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[self.slots(v)]
    }

    #[inline]
    pub fn weight(&self, slot: usize) -> f64 {
        self.weights[slot]
    }

    /// Source vertex of a slot, found by binary search over `xadj`.
    pub fn source(&self, slot: usize) -> u32 {
        (self.xadj.partition_point(|&o| o <= slot) - 1) as u32
    }

    /// Slot `u -> v`, if the edge exists.
    pub fn find_slot(&self, u: u32, v: u32) -> Option<usize> {
        let r = self.slots(u);
        self.adj[r.clone()].binary_search(&v).ok().map(|i| r.start + i)
    }

    /// The reciprocal slot `v -> u` of slot `u -> v`.
    pub fn reverse_slot(&self, slot: usize) -> Option<usize> {
        let u = self.source(slot);
        self.find_slot(self.adj[slot], u)
    }

    /// Undirected edges as `(u, v, weight(u -> v))` with `u < v`, in slot order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.num_vertices() as u32).flat_map(move |u| {
            self.slots(u)
                .filter(move |&s| self.adj[s] > u)
                .map(move |s| (u, self.adj[s], self.weights[s]))
        })
    }

    /// Weight used when an undirected edge must be sampled as a unit: the
    /// weight of its `min -> max` slot.
    pub fn canonical_weight(&self, slot: usize) -> f64 {
        let u = self.source(slot);
        let v = self.adj[slot];
        if u < v {
            self.weights[slot]
        } else {
            self.find_slot(v, u).map_or(self.weights[slot], |s| self.weights[s])
        }
    }

    pub fn original_id(&self, v: u32) -> u64 {
        self.original_ids[v as usize]
    }

    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    /// Map from input vertex IDs back to compact IDs.
    pub fn id_lookup(&self) -> HashMap<u64, u32> {
        self.original_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as u32))
            .collect()
    }

    /// True if the weights were read from input or assigned by a scheme.
    pub fn has_explicit_weights(&self) -> bool {
        self.explicit_weights
    }

    /// Checks CSR shape, reciprocal slots and the weight range.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vertices();
        let m = self.num_slots();
        if self.xadj[0] != 0 || self.xadj[n] != m {
            return Err(Error::Internal("xadj endpoints".into()));
        }
        if self.xadj.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Internal("xadj decreasing".into()));
        }
        if self.weights.len() != m || self.original_ids.len() != n {
            return Err(Error::Internal("array lengths disagree".into()));
        }
        for u in 0..n as u32 {
            for s in self.slots(u) {
                let v = self.adj[s];
                if v as usize >= n || v == u {
                    return Err(Error::Internal(format!("bad slot {u}->{v}")));
                }
                if self.find_slot(v, u).is_none() {
                    return Err(Error::Internal(format!("slot {u}->{v} has no reciprocal")));
                }
                if !(0.0..=1.0).contains(&self.weights[s]) {
                    return Err(Error::Internal(format!("weight of {u}->{v} outside [0,1]")));
                }
            }
        }
        Ok(())
    }

    /// Returns a copy weighted by `scheme`. Random draws are made once per
    /// undirected edge in canonical order and mirrored to both slots.
    pub fn with_weights(&self, scheme: &WeightScheme, rng_seed: u64) -> Result<Graph> {
        let mut g = self.clone();
        g.apply_weights(scheme, rng_seed)?;
        Ok(g)
    }

    pub fn apply_weights(&mut self, scheme: &WeightScheme, rng_seed: u64) -> Result<()> {
        scheme.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        match *scheme {
            WeightScheme::FromFile => {
                if !self.explicit_weights {
                    return Err(Error::InvalidParameter(
                        "weights requested from file but the edge list has no weight column".into(),
                    ));
                }
                return Ok(());
            }
            WeightScheme::WeightedCascade => {
                for u in 0..self.num_vertices() as u32 {
                    for s in self.slots(u) {
                        self.weights[s] = 1.0 / self.degree(self.adj[s]) as f64;
                    }
                }
            }
            WeightScheme::Constant(p) => self.weights.iter_mut().for_each(|w| *w = p),
            WeightScheme::Uniform { lo, hi } => {
                self.assign_symmetric(|| if lo == hi { lo } else { rng.random_range(lo..hi) })
            }
            WeightScheme::Normal { mean, std_dev } => {
                let normal =
                    Normal::new(mean, std_dev).map_err(|e| Error::InvalidParameter(format!("normal weights: {e}")))?;
                self.assign_symmetric(|| normal.sample(&mut rng).clamp(0.0, 1.0))
            }
        }
        self.explicit_weights = true;
        Ok(())
    }

    fn assign_symmetric(&mut self, mut draw: impl FnMut() -> f64) {
        for u in 0..self.num_vertices() as u32 {
            for s in self.slots(u) {
                let v = self.adj[s];
                if v > u {
                    let w = draw();
                    self.weights[s] = w;
                    let r = self.find_slot(v, u).expect("symmetric CSR");
                    self.weights[r] = w;
                }
            }
        }
    }

    /// Writes the graph as an edge list using input vertex IDs.
    ///
    /// Edges are ordered so that reloading reproduces the same compact IDs:
    /// each vertex is introduced, in ID order, by an edge to an already
    /// introduced neighbor, by an edge to its successor, or by a self-loop
    /// line when it is isolated.
    pub fn write_edge_list<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        let n = self.num_vertices();
        let mut written: HashSet<(u32, u32)> = HashSet::new();
        let mut introduced = vec![false; n];
        let write_edge = |out: &mut BufWriter<W>, a: u32, b: u32, w: Option<f64>| {
            let (oa, ob) = (self.original_ids[a as usize], self.original_ids[b as usize]);
            match w {
                Some(w) => writeln!(out, "{oa} {ob} {w}"),
                None => writeln!(out, "{oa} {ob}"),
            }
        };
        let weight_of = |a: u32, b: u32| -> Option<f64> {
            self.explicit_weights
                .then(|| self.weights[self.find_slot(a.min(b), a.max(b)).unwrap()])
        };
        for k in 0..n as u32 {
            if introduced[k as usize] {
                continue;
            }
            let nbrs = self.neighbors(k);
            if let Some(&a) = nbrs.iter().find(|&&a| introduced[a as usize]) {
                write_edge(&mut out, a, k, weight_of(a, k))?;
                written.insert((a.min(k), a.max(k)));
            } else if nbrs.binary_search(&(k + 1)).is_ok() {
                write_edge(&mut out, k, k + 1, weight_of(k, k + 1))?;
                written.insert((k, k + 1));
                introduced[k as usize + 1] = true;
            } else {
                write_edge(&mut out, k, k, self.explicit_weights.then_some(0.0))?;
            }
            introduced[k as usize] = true;
        }
        for (u, v, w) in self.edges() {
            if !written.contains(&(u, v)) {
                write_edge(&mut out, u, v, self.explicit_weights.then_some(w))?;
            }
        }
        out.flush()
    }

    pub fn save_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_edge_list(f).map_err(|e| Error::io(path, e))
    }

    /// Binary cache: magic, little-endian u64 `n` and `m`, then `xadj`
    /// (`n + 1` u64), `adj` (`m` u32) and `weights` (`m` f64).
    pub fn write_binary<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        out.write_all(CSR_MAGIC)?;
        out.write_all(&(self.num_vertices() as u64).to_le_bytes())?;
        out.write_all(&(self.num_slots() as u64).to_le_bytes())?;
        for &o in &self.xadj {
            out.write_all(&(o as u64).to_le_bytes())?;
        }
        for &a in &self.adj {
            out.write_all(&a.to_le_bytes())?;
        }
        for &w in &self.weights {
            out.write_all(&w.to_le_bytes())?;
        }
        out.flush()
    }

    /// Reads the binary cache. Input IDs are not part of the format; the
    /// loaded graph uses its compact IDs as input IDs.
    pub fn read_binary<R: Read>(input: R) -> Result<Graph> {
        let mut input = BufReader::new(input);
        let fmt = |e: std::io::Error| Error::Format(e.to_string());
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(fmt)?;
        if &magic != CSR_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut read_u64 = |input: &mut BufReader<R>| -> Result<u64> {
            input.read_exact(&mut word).map_err(fmt)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = read_u64(&mut input)? as usize;
        let m = read_u64(&mut input)? as usize;
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if n > MAX_VERTICES {
            return Err(Error::Constraint(format!("{n} vertices in cache")));
        }
        let mut xadj = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            xadj.push(read_u64(&mut input)? as usize);
        }
        let mut adj = Vec::with_capacity(m);
        let mut buf4 = [0u8; 4];
        for _ in 0..m {
            input.read_exact(&mut buf4).map_err(fmt)?;
            adj.push(u32::from_le_bytes(buf4));
        }
        let mut weights = Vec::with_capacity(m);
        for _ in 0..m {
            input.read_exact(&mut word).map_err(fmt)?;
            weights.push(f64::from_le_bytes(word));
        }
        let g = Graph {
            xadj,
            adj,
            weights,
            original_ids: (0..n as u64).collect(),
            explicit_weights: true,
        };
        g.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(g)
    }

    /// Erdős–Rényi style graph with `n` vertices and about `n * avg_degree / 2`
    /// distinct undirected edges, all weights 1.
    pub fn erdos_renyi(n: usize, avg_degree: f64, seed: u64) -> Result<Graph> {
        if n < 2 {
            return Err(Error::InvalidParameter("random graph needs n >= 2".into()));
        }
        let target = ((n as f64 * avg_degree) / 2.0).round() as usize;
        let max_edges = n * (n - 1) / 2;
        if target > max_edges {
            return Err(Error::InvalidParameter(format!(
                "average degree {avg_degree} impossible with {n} vertices"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::with_capacity(target);
        let mut edges = Vec::with_capacity(target);
        while edges.len() < target {
            let u = rng.random_range(0..n as u32);
            let v = rng.random_range(0..n as u32);
            if u != v && seen.insert((u.min(v), u.max(v))) {
                edges.push((u, v, 1.0));
            }
        }
        let mut g = Graph::from_edges(n, &edges)?;
        g.explicit_weights = false;
        Ok(g)
    }
}

/// Canonicalizes `(u, v)` pairs to `u < v`, dropping self-loops and keeping
/// the first weight of each repeated edge.
fn dedup_canonical(edges: impl Iterator<Item = (u32, u32, f64)>) -> Vec<(u32, u32, f64)> {
    let mut seen = HashSet::new();
    edges
        .filter(|&(u, v, _)| u != v)
        .map(|(u, v, w)| (u.min(v), u.max(v), w))
        .filter(|&(u, v, _)| seen.insert((u, v)))
        .collect()
}

/// Counters collected while reading an edge list.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub edge_lines: usize,
    pub self_loops: usize,
    /// Lines repeating an undirected edge already seen in the same direction
    /// (or in either direction for undirected input).
    pub duplicates: usize,
    /// For directed input: lines whose reverse edge was already present.
    pub reciprocal_pairs: usize,
}

/// Loads a whitespace-separated `u v [w]` edge list. Lines starting with `#`
/// and blank lines are skipped. Vertex IDs are compacted to `0..n` in order
/// of first appearance. With `directed_input`, each line is an arc and the
/// graph is its undirected closure.
pub fn load_edge_list(path: impl AsRef<Path>, directed_input: bool) -> Result<Graph> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_edge_list(BufReader::new(f), directed_input)
        .map(|(g, _)| g)
        .map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
}

/// Loads either a binary cache (detected by its magic bytes) or an edge list.
pub fn load_graph(path: impl AsRef<Path>, directed_input: bool) -> Result<Graph> {
    let path = path.as_ref();
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = [0u8; 8];
    let got = f.read(&mut head).map_err(|e| Error::io(path, e))?;
    drop(f);
    if got == 8 && &head == CSR_MAGIC {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Graph::read_binary(f)
    } else {
        load_edge_list(path, directed_input)
    }
}

pub fn read_edge_list<R: BufRead>(input: R, directed_input: bool) -> Result<(Graph, LoadReport)> {
    let mut ids: HashMap<u64, u32> = HashMap::new();
    let mut original_ids = Vec::new();
    let mut raw = Vec::new();
    let mut report = LoadReport::default();
    let mut weighted: Option<bool> = None;
    let mut arcs: HashSet<(u32, u32)> = HashSet::new();

    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io("<edge list>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected `u v [w]`, found {} fields", fields.len()),
            });
        }
        let has_w = fields.len() == 3;
        match weighted {
            None => weighted = Some(has_w),
            Some(prev) if prev != has_w => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "weight column present on some lines but not others".into(),
                })
            }
            _ => {}
        }
        let parse_id = |s: &str| {
            s.parse::<u64>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("vertex id `{s}`: {e}"),
            })
        };
        let a = parse_id(fields[0])?;
        let b = parse_id(fields[1])?;
        let w = if has_w {
            let w: f64 = fields[2].parse().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("weight `{}`: {e}", fields[2]),
            })?;
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("weight {w} outside [0,1]"),
                });
            }
            w
        } else {
            1.0
        };
        let mut intern = |id: u64| -> Result<u32> {
            if let Some(&c) = ids.get(&id) {
                return Ok(c);
            }
            if original_ids.len() >= MAX_VERTICES {
                return Err(Error::Constraint(format!("more than {MAX_VERTICES} vertices")));
            }
            let c = original_ids.len() as u32;
            ids.insert(id, c);
            original_ids.push(id);
            Ok(c)
        };
        let u = intern(a)?;
        let v = intern(b)?;
        report.edge_lines += 1;
        if u == v {
            report.self_loops += 1;
            continue;
        }
        if directed_input {
            if !arcs.insert((u, v)) {
                report.duplicates += 1;
            } else if arcs.contains(&(v, u)) {
                report.reciprocal_pairs += 1;
            }
        } else if !arcs.insert((u.min(v), u.max(v))) {
            report.duplicates += 1;
        }
        raw.push((u, v, w));
    }
    if original_ids.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let canonical = dedup_canonical(raw.into_iter());
    let g = Graph::from_canonical(original_ids, &canonical, weighted == Some(true));
    Ok((g, report))
}

/// How edge diffusion probabilities are assigned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightScheme {
    Constant(f64),
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Normal draws clamped into `[0, 1]`.
    Normal {
        mean: f64,
        std_dev: f64,
    },
    /// `w(u -> v) = 1 / degree(v)`.
    WeightedCascade,
    /// Keep the weights read from the edge list.
    FromFile,
}

impl WeightScheme {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {x} outside [0,1]")))
            }
        };
        match *self {
            WeightScheme::Constant(p) => unit("p", p),
            WeightScheme::Uniform { lo, hi } => {
                unit("lo", lo)?;
                unit("hi", hi)?;
                if lo > hi {
                    return Err(Error::InvalidParameter(format!("uniform range {lo} > {hi}")));
                }
                Ok(())
            }
            WeightScheme::Normal { mean, std_dev } => {
                unit("mean", mean)?;
                if !(std_dev >= 0.0 && std_dev.is_finite()) {
                    return Err(Error::InvalidParameter(format!("std dev {std_dev}")));
                }
                Ok(())
            }
            WeightScheme::WeightedCascade | WeightScheme::FromFile => Ok(()),
        }
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    /// Accepts `const:P`, `uniform:LO,HI`, `normal:MEAN,STD`, `wc` and `file`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("weight scheme `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let pair = |t: &str| -> Result<(f64, f64)> {
            let (a, b) = t.split_once(',').ok_or_else(bad)?;
            Ok((num(a)?, num(b)?))
        };
        let scheme = match s.split_once(':') {
            Some(("const", p)) => WeightScheme::Constant(num(p)?),
            Some(("uniform", r)) => {
                let (lo, hi) = pair(r)?;
                WeightScheme::Uniform { lo, hi }
            }
            Some(("normal", r)) => {
                let (mean, std_dev) = pair(r)?;
                WeightScheme::Normal { mean, std_dev }
            }
            None if s == "wc" => WeightScheme::WeightedCascade,
            None if s == "file" => WeightScheme::FromFile,
            _ => return Err(bad()),
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::Constant(p) => write!(f, "const:{p}"),
            WeightScheme::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            WeightScheme::Normal { mean, std_dev } => write!(f, "normal:{mean},{std_dev}"),
            WeightScheme::WeightedCascade => f.write_str("wc"),
            WeightScheme::FromFile => f.write_str("file"),
        }
    }
}
