//! Measuring seed sets, the sampling distribution, and whole runs.

use std::alloc::{GlobalAlloc, Layout, System};
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering::Relaxed};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{load_graph, Graph, WeightScheme};
use crate::hash::{sample_prob, EdgeHashTable, SimulationRandoms, HASH_MAX};
use crate::par;
use crate::pipeline::{self, Algorithm};

/// Worlds simulated per independent RNG stream in [`evaluate_seeds`].
const WORLDS_PER_STREAM: usize = 1024;

/// KS distance below which the hash sampling is considered uniform.
pub const KS_UNIFORM_LIMIT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfluenceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub worlds: usize,
}

/// Monte-Carlo influence of `seeds` over `worlds` independent live-edge
/// worlds drawn from `rng_seed`, independent of any hash-based samples.
///
/// Worlds are split into fixed-size blocks, each with its own ChaCha stream,
/// so the estimate does not depend on the thread count. Edge coins are
/// flipped lazily during BFS; each undirected edge is decided at most once
/// per world, which gives the same distribution as sampling every edge.
pub fn evaluate_seeds(g: &Graph, seeds: &[u32], worlds: usize, rng_seed: u64) -> Result<InfluenceEstimate> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seed set is empty".into()));
    }
    if worlds == 0 {
        return Err(Error::InvalidParameter("need at least one world".into()));
    }
    let n = g.num_vertices();
    if let Some(&s) = seeds.iter().find(|&&s| s as usize >= n) {
        return Err(Error::InvalidParameter(format!("seed {s} out of range")));
    }
    let weights: Vec<f64> = (0..g.num_slots()).map(|s| g.canonical_weight(s)).collect();
    let blocks = worlds.div_ceil(WORLDS_PER_STREAM);
    let partial = par::tasks(blocks, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(b as u64);
        let count = WORLDS_PER_STREAM.min(worlds - b * WORLDS_PER_STREAM);
        let mut stamp = vec![0u32; n];
        let mut queue = Vec::with_capacity(n);
        let (mut sum, mut sum_sq) = (0u64, 0u128);
        for world in 1..=count as u32 {
            let reach = lazy_reach(g, &weights, seeds, &mut rng, &mut stamp, world, &mut queue) as u64;
            sum += reach;
            sum_sq += (reach as u128) * (reach as u128);
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = partial.into_iter().fold((0u64, 0u128), |(a, b), (c, d)| (a + c, b + d));
    let r = worlds as f64;
    let mean = sum as f64 / r;
    let std_error = if worlds > 1 {
        let var = (sum_sq as f64 - (sum as f64) * mean) / (r - 1.0);
        (var.max(0.0) / r).sqrt()
    } else {
        0.0
    };
    Ok(InfluenceEstimate {
        mean,
        std_error,
        worlds,
    })
}

fn lazy_reach(
    g: &Graph,
    weights: &[f64],
    seeds: &[u32],
    rng: &mut ChaCha8Rng,
    stamp: &mut [u32],
    world: u32,
    queue: &mut Vec<u32>,
) -> usize {
    queue.clear();
    for &s in seeds {
        if stamp[s as usize] != world {
            stamp[s as usize] = world;
            queue.push(s);
        }
    }
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        for s in g.slots(u) {
            let v = g.adj()[s];
            if stamp[v as usize] != world && rng.random::<f64>() < weights[s] {
                stamp[v as usize] = world;
                queue.push(v);
            }
        }
    }
    queue.len()
}

/// Empirical distribution of hash-based sampling probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct CdfReport {
    /// `(bin_upper, cdf)` with `bin_upper = (b + 1) / bins`.
    pub histogram: Vec<(f64, f64)>,
    /// Kolmogorov–Smirnov distance from U[0, 1], evaluated on a 2^16-bucket
    /// grid and rounded up to cover the spread inside a bucket.
    pub ks: f64,
    pub samples: u64,
}

impl CdfReport {
    pub fn is_uniform(&self) -> bool {
        self.ks < KS_UNIFORM_LIMIT
    }

    /// Two-column TSV: `bin_upper<TAB>cdf`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for &(upper, cdf) in &self.histogram {
            writeln!(out, "{upper:.6}\t{cdf:.6}")?;
        }
        Ok(())
    }
}

const FINE_BITS: u32 = 16;

/// CDF of `(X[r] ^ h(u,v)) / HASH_MAX` over every undirected edge (once) and
/// every scored simulation.
pub fn sampling_cdf(g: &Graph, table: &EdgeHashTable, randoms: &SimulationRandoms, bins: usize) -> Result<CdfReport> {
    if bins < 10 {
        return Err(Error::InvalidParameter(format!("bins = {bins}; need at least 10")));
    }
    if table.len() != g.num_slots() {
        return Err(Error::InvalidParameter("hash table does not match graph".into()));
    }
    let fine_len = 1usize << FINE_BITS;
    let shift = 31 - FINE_BITS;
    let xs = &randoms.values()[..randoms.simulations()];
    let n = g.num_vertices();
    let chunks = (par::current_threads() * 4).clamp(1, 32).min(n);
    let per_chunk = n.div_ceil(chunks);
    let partial = par::tasks(chunks, |c| {
        let mut fine = vec![0u64; fine_len];
        let mut coarse = vec![0u64; bins];
        let lo = (c * per_chunk).min(n) as u32;
        let hi = ((c + 1) * per_chunk).min(n) as u32;
        for u in lo..hi {
            for s in g.slots(u) {
                if g.adj()[s] < u {
                    continue;
                }
                let h = table.hash(s);
                for &x in xs {
                    let p = sample_prob(h, x);
                    fine[(p >> shift) as usize] += 1;
                    coarse[((p as u64 * bins as u64) >> 31) as usize] += 1;
                }
            }
        }
        (fine, coarse)
    });
    let mut fine = vec![0u64; fine_len];
    let mut coarse = vec![0u64; bins];
    for (f, c) in partial {
        fine.iter_mut().zip(f).for_each(|(a, b)| *a += b);
        coarse.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    let samples: u64 = fine.iter().sum();
    if samples == 0 {
        return Err(Error::InvalidParameter("no edges or simulations to sample".into()));
    }
    let total = samples as f64;
    let mut ks: f64 = 0.0;
    let mut below = 0u64;
    for (i, &count) in fine.iter().enumerate() {
        let lo_edge = i as f64 / fine_len as f64;
        let hi_edge = (i + 1) as f64 / fine_len as f64;
        let before = below as f64 / total;
        below += count;
        let after = below as f64 / total;
        ks = ks.max(after - lo_edge).max(hi_edge - before);
    }
    let mut cum = 0u64;
    let histogram = coarse
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            cum += c;
            ((b + 1) as f64 / bins as f64, cum as f64 / total)
        })
        .collect();
    debug_assert!(HASH_MAX >> shift < fine_len as u32);
    Ok(CdfReport { histogram, ks, samples })
}

// Heap accounting for peak-memory reports.

static CURRENT_BYTES: AtomicUsize = AtomicUsize::new(0);
static PEAK_BYTES: AtomicUsize = AtomicUsize::new(0);
static COUNTING: AtomicBool = AtomicBool::new(false);

/// Global allocator wrapper that tracks live and peak heap bytes. A binary
/// opts in with `#[global_allocator] static A: CountingAllocator = CountingAllocator;`.
pub struct CountingAllocator;

impl CountingAllocator {
    #[inline]
    fn grow(size: usize) {
        let now = CURRENT_BYTES.fetch_add(size, Relaxed) + size;
        PEAK_BYTES.fetch_max(now, Relaxed);
        if !COUNTING.load(Relaxed) {
            COUNTING.store(true, Relaxed);
        }
    }
}

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            Self::grow(layout.size());
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            Self::grow(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT_BYTES.fetch_sub(layout.size(), Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            CURRENT_BYTES.fetch_sub(layout.size(), Relaxed);
            Self::grow(new_size);
        }
        p
    }
}

/// Starts a new peak-measurement window at the current heap size.
pub fn reset_peak_bytes() {
    PEAK_BYTES.store(CURRENT_BYTES.load(Relaxed), Relaxed);
}

/// Peak heap bytes since the last reset, if [`CountingAllocator`] is installed.
pub fn peak_bytes() -> Option<u64> {
    COUNTING.load(Relaxed).then(|| PEAK_BYTES.load(Relaxed) as u64)
}

/// Label for how `peak_bytes` is measured.
pub fn memory_method() -> &'static str {
    if COUNTING.load(Relaxed) {
        "heap high-water mark (counting allocator)"
    } else {
        "unavailable (counting allocator not installed)"
    }
}

fn default_r() -> usize {
    256
}

fn default_r_eval() -> usize {
    1000
}

fn default_threads() -> usize {
    1
}

fn default_weights() -> String {
    "const:0.01".into()
}

/// One benchmark row as written in the config file.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BenchRowSpec {
    /// Edge-list / cache path, or `er:N:AVG_DEGREE[:SEED]` for a random graph.
    pub dataset: String,
    #[serde(default = "default_weights")]
    pub weights: String,
    pub algo: String,
    pub k: usize,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_r_eval")]
    pub r_eval: usize,
    #[serde(default)]
    pub directed: bool,
}

/// Benchmark configuration: a TOML file with one `[[row]]` table per run.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub row: Vec<BenchRowSpec>,
    /// Directory relative dataset paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl BenchConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("bench config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }
}

/// One benchmark result. `error` is set (and the measurements empty) when
/// the row failed.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub dataset: String,
    pub algo: String,
    pub k: usize,
    pub r: usize,
    pub threads: usize,
    pub seconds: Option<f64>,
    pub peak_bytes: Option<u64>,
    pub sigma: Option<f64>,
    pub sigma_se: Option<f64>,
    pub error: Option<String>,
}

/// Loads the dataset named by a bench row.
pub fn load_dataset(spec: &str, directed: bool, base_dir: Option<&Path>) -> Result<Graph> {
    if let Some(rest) = spec.strip_prefix("er:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let bad = || Error::InvalidParameter(format!("random graph spec `{spec}`"));
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        let n: usize = parts[0].parse().map_err(|_| bad())?;
        let degree: f64 = parts[1].parse().map_err(|_| bad())?;
        let seed: u64 = parts.get(2).map_or(Ok(0), |s| s.parse()).map_err(|_| bad())?;
        return Graph::erdos_renyi(n, degree, seed);
    }
    let path = Path::new(spec);
    let path = match base_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    };
    load_graph(path, directed)
}

/// Runs every row; a failing row is recorded and the run continues.
///
/// Timing and peak memory cover seed selection only. `sigma` is an
/// independent [`evaluate_seeds`] estimate of the selected seeds.
pub fn run_benchmark(config: &BenchConfig) -> Vec<BenchRow> {
    config
        .row
        .iter()
        .map(|spec| {
            let mut row = BenchRow {
                dataset: spec.dataset.clone(),
                algo: spec.algo.clone(),
                k: spec.k,
                r: spec.r,
                threads: spec.threads,
                seconds: None,
                peak_bytes: None,
                sigma: None,
                sigma_se: None,
                error: None,
            };
            if let Err(e) = run_row(spec, config.base_dir.as_deref(), &mut row) {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect()
}

fn run_row(spec: &BenchRowSpec, base_dir: Option<&Path>, row: &mut BenchRow) -> Result<()> {
    let algo: Algorithm = spec.algo.parse()?;
    let scheme: WeightScheme = spec.weights.parse()?;
    let mut g = load_dataset(&spec.dataset, spec.directed, base_dir)?;
    g.apply_weights(&scheme, spec.seed)?;
    let (seeds, seconds, peak) = par::with_threads(spec.threads, || -> Result<_> {
        reset_peak_bytes();
        let start = Instant::now();
        let set = pipeline::select(&g, algo, spec.k, spec.r, spec.seed)?;
        let seconds = start.elapsed().as_secs_f64();
        Ok((set.seeds, seconds, peak_bytes()))
    })??;
    row.seconds = Some(seconds);
    row.peak_bytes = peak;
    let est = par::with_threads(spec.threads, || evaluate_seeds(&g, &seeds, spec.r_eval, spec.seed))??;
    row.sigma = Some(est.mean);
    row.sigma_se = Some(est.std_error);
    Ok(())
}

pub const CSV_HEADER: &str = "dataset,algo,K,R,threads,seconds,peak_bytes,sigma,sigma_se";

/// Machine-readable report. With `omit_timing`, the run-dependent columns
/// (seconds, peak bytes) are written as `NA` so repeated runs compare byte
/// for byte.
pub fn write_csv<W: Write>(rows: &[BenchRow], omit_timing: bool, mut out: W) -> io::Result<()> {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "NA".into());
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let seconds = if omit_timing {
            None
        } else {
            r.seconds.map(|s| format!("{s:.6}"))
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.dataset,
            r.algo,
            r.k,
            r.r,
            r.threads,
            opt(seconds),
            opt(r.peak_bytes.filter(|_| !omit_timing).map(|b| b.to_string())),
            opt(r.sigma.map(|s| format!("{s:.4}"))),
            opt(r.sigma_se.map(|s| format!("{s:.4}"))),
        )?;
    }
    Ok(())
}

/// Aligned human-readable table.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<28} {:<10} {:>5} {:>6} {:>4} {:>12} {:>12} {:>12}  status",
        "dataset", "algo", "K", "R", "thr", "seconds", "peak MiB", "sigma"
    );
    for r in rows {
        let secs = r.seconds.map_or("-".into(), |v| format!("{v:.3}"));
        let mem = r
            .peak_bytes
            .map_or("-".into(), |b| format!("{:.2}", b as f64 / (1 << 20) as f64));
        let sigma = match (r.sigma, r.sigma_se) {
            (Some(m), Some(se)) => format!("{m:.2}±{se:.2}"),
            _ => "-".into(),
        };
        let status = r.error.as_deref().unwrap_or("ok");
        let _ = writeln!(
            s,
            "{:<28} {:<10} {:>5} {:>6} {:>4} {:>12} {:>12} {:>12}  {}",
            r.dataset, r.algo, r.k, r.r, r.threads, secs, mem, sigma, status
        );
    }
    let _ = writeln!(s, "memory: {}", memory_method());
    s
}
