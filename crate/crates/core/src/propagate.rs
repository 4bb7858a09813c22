//! Fused label propagation over all implicit samples.
//!
//! Every vertex holds one label per simulation, stored contiguously
//! (`labels[v * lanes + r]`). Starting from `labels[v][r] = v`, live vertices
//! push their labels across the edges that are live in each simulation,
//! keeping the lane-wise minimum. At the fixpoint the label of `v` in
//! simulation `r` is the smallest vertex ID of `v`'s connected component in
//! sample `r`.

use std::io::{self, Read, Write};
use std::sync::atomic::{AtomicU32, AtomicU8, Ordering::Relaxed};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hash::{lane_masks, EdgeHashTable, LaneMask, SimulationRandoms, HASH_MAX, LANES};
use crate::par;

/// `n x lanes` component labels, one row per vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMatrix {
    labels: Vec<u32>,
    n: usize,
    lanes: usize,
    simulations: usize,
}

impl LabelMatrix {
    /// Every vertex labeled with its own ID in every lane.
    pub fn identity(n: usize, simulations: usize) -> Self {
        let lanes = crate::hash::padded_lanes(simulations);
        let mut labels = Vec::with_capacity(n * lanes);
        for v in 0..n as u32 {
            labels.extend(std::iter::repeat_n(v, lanes));
        }
        LabelMatrix {
            labels,
            n,
            lanes,
            simulations,
        }
    }

    pub fn from_raw(labels: Vec<u32>, n: usize, lanes: usize, simulations: usize) -> Result<Self> {
        if !lanes.is_multiple_of(LANES) || simulations > lanes || labels.len() != n * lanes {
            return Err(Error::InvalidParameter(format!(
                "label matrix shape n={n} lanes={lanes} simulations={simulations} len={}",
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l as usize >= n) {
            return Err(Error::InvalidParameter("label outside 0..n".into()));
        }
        Ok(LabelMatrix {
            labels,
            n,
            lanes,
            simulations,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    /// Number of scored simulations (the leading lanes).
    pub fn simulations(&self) -> usize {
        self.simulations
    }

    #[inline]
    pub fn row(&self, v: u32) -> &[u32] {
        let start = v as usize * self.lanes;
        &self.labels[start..start + self.lanes]
    }

    #[inline]
    pub fn label(&self, v: u32, r: usize) -> u32 {
        self.labels[v as usize * self.lanes + r]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    /// Debug dump: little-endian u64 `n`, u64 `lanes`, then the labels
    /// row-major as u32.
    pub fn write_to<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&(self.lanes as u64).to_le_bytes())?;
        for &l in &self.labels {
            out.write_all(&l.to_le_bytes())?;
        }
        out.flush()
    }

    /// Reads a dump written by [`LabelMatrix::write_to`]; all lanes are
    /// treated as scored.
    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut input = io::BufReader::new(input);
        let fmt = |e: io::Error| Error::Format(e.to_string());
        let mut word = [0u8; 8];
        input.read_exact(&mut word).map_err(fmt)?;
        let n = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word).map_err(fmt)?;
        let lanes = u64::from_le_bytes(word) as usize;
        let mut labels = Vec::with_capacity(n.saturating_mul(lanes).min(1 << 28));
        let mut buf = [0u8; 4];
        for _ in 0..n * lanes {
            input.read_exact(&mut buf).map_err(fmt)?;
            labels.push(u32::from_le_bytes(buf));
        }
        Self::from_raw(labels, n, lanes, lanes)
    }
}

/// Counters from one propagation run.
#[derive(Clone, Debug, Default)]
pub struct PropagationStats {
    /// Sweeps over the frontier, including the final one that changed nothing.
    pub sweeps: usize,
    /// Adjacency slots scanned across all sweeps.
    pub slot_visits: u64,
    /// Sum of all labels after each sweep (only when tracking was requested).
    pub label_sums: Vec<u64>,
}

/// Converged component labels for every simulation of `randoms`.
pub fn propagate(g: &Graph, table: &EdgeHashTable, randoms: &SimulationRandoms) -> LabelMatrix {
    propagate_with_stats(g, table, randoms, false).0
}

pub fn propagate_with_stats(
    g: &Graph,
    table: &EdgeHashTable,
    randoms: &SimulationRandoms,
    track_label_sums: bool,
) -> (LabelMatrix, PropagationStats) {
    let n = g.num_vertices();
    let lanes = randoms.lanes();
    let batches = lanes / LANES;
    let mut stats = PropagationStats::default();

    // Every label starts as its own vertex, and in the first sweep every
    // vertex pushes every lane. Later sweeps push only the lanes that
    // changed in the previous one.
    let mut labels = Vec::with_capacity(n * lanes);
    for v in 0..n as u32 {
        labels.extend((0..lanes).map(|_| AtomicU32::new(v)));
    }
    let mut active = LaneMarks::new(n, batches);
    active.fill();
    let mut next = LaneMarks::new(n, batches);
    let mut frontier: Vec<u32> = (0..n as u32).collect();
    let index = LaneIndex::new(randoms);

    while !frontier.is_empty() {
        stats.sweeps += 1;
        stats.slot_visits += par::map_sum(&frontier, |&u| {
            push_vertex(u, g, table, randoms, &index, &labels, &active, &next);
            g.degree(u) as u64
        });
        frontier = next.marked_vertices();
        std::mem::swap(&mut active, &mut next);
        next.clear();
        if track_label_sums {
            stats
                .label_sums
                .push(labels.iter().map(|l| l.load(Relaxed) as u64).sum());
        }
    }

    let labels = labels.into_iter().map(AtomicU32::into_inner).collect();
    let matrix = LabelMatrix {
        labels,
        n,
        lanes,
        simulations: randoms.simulations(),
    };
    (matrix, stats)
}

/// Batches whose masks are computed together per edge.
const MASK_CHUNK: usize = 64;

/// Simulation lanes sorted by their random value `X[r]`.
///
/// `X ^ h < t` forces `X` to agree with `h` on every bit at or above the bit
/// length of `t`, so the lanes that can be live across an edge form one
/// contiguous range of this order. Its expected length is about
/// `2 * p * lanes`, far fewer than all lanes when `p` is small.
///
/// `starts[k]` is the first position whose value has top bits `>= k`, so
/// ranges are found by lookup rather than by search.
struct LaneIndex {
    xs: Vec<u32>,
    lanes: Vec<u32>,
    starts: Vec<usize>,
    shift: u32,
}

impl LaneIndex {
    fn new(randoms: &SimulationRandoms) -> Self {
        let mut pairs: Vec<(u32, u32)> = randoms.values().iter().zip(0..).map(|(&x, r)| (x, r)).collect();
        pairs.sort_unstable();
        let (xs, lanes): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
        // About one lane per bucket.
        let top_bits = xs.len().next_power_of_two().trailing_zeros().min(20);
        let shift = HASH_MAX.count_ones() - top_bits;
        let starts = (0..=1usize << top_bits)
            .map(|k| xs.partition_point(|&x| ((x >> shift) as usize) < k))
            .collect();
        LaneIndex {
            xs,
            lanes,
            starts,
            shift,
        }
    }

    /// Positions in the order that hold every lane satisfying
    /// `X ^ hash < threshold` (and possibly a few that do not).
    #[inline]
    fn candidates(&self, hash: u32, threshold: u32) -> std::ops::Range<usize> {
        let bits = u32::BITS - threshold.leading_zeros();
        if bits >= self.shift {
            let lo = (hash >> bits << bits >> self.shift) as usize;
            self.starts[lo]..self.starts[lo + (1 << (bits - self.shift))]
        } else {
            let k = (hash >> self.shift) as usize;
            self.starts[k]..self.starts[k + 1]
        }
    }
}

/// Candidate ranges longer than `lanes / SPARSE_LIMIT` use the vector mask
/// path instead of checking lanes one by one.
const SPARSE_LIMIT: usize = 8;

/// Pushes `u`'s labels across its live edges. Only lanes in which `u`'s
/// label changed during the previous sweep are pushed; every other lane
/// already reached its neighbours. Lanes that change at a target are marked
/// in `next`.
#[allow(clippy::too_many_arguments)]
fn push_vertex(
    u: u32,
    g: &Graph,
    table: &EdgeHashTable,
    randoms: &SimulationRandoms,
    index: &LaneIndex,
    labels: &[AtomicU32],
    active: &LaneMarks,
    next: &LaneMarks,
) {
    let lanes = randoms.lanes();
    let lu = &labels[u as usize * lanes..][..lanes];
    for s in g.slots(u) {
        let thr = table.threshold(s);
        if thr == 0 {
            continue;
        }
        let hash = table.hash(s);
        let v = g.adj()[s];
        let lv = &labels[v as usize * lanes..][..lanes];
        let range = index.candidates(hash, thr);
        if range.len() * SPARSE_LIMIT > lanes {
            push_dense(u, v, hash, thr, randoms, lu, lv, active, next);
            continue;
        }
        for (&x, &r) in index.xs[range.clone()].iter().zip(&index.lanes[range]) {
            let (batch, bit) = (r as usize / LANES, r % LANES as u32);
            if x ^ hash < thr && active.get(u, batch) >> bit & 1 == 1 && push_lane(&lu[r as usize], &lv[r as usize], v)
            {
                next.insert(v, batch, 1 << bit);
            }
        }
    }
}

/// Pushes every pending lane across edge `(u, v)` using whole-batch masks.
#[allow(clippy::too_many_arguments)]
fn push_dense(
    u: u32,
    v: u32,
    hash: u32,
    thr: u32,
    randoms: &SimulationRandoms,
    lu: &[AtomicU32],
    lv: &[AtomicU32],
    active: &LaneMarks,
    next: &LaneMarks,
) {
    let xs = randoms.values();
    let batches = lu.len() / LANES;
    let mut masks = [0 as LaneMask; MASK_CHUNK];
    for c0 in (0..batches).step_by(MASK_CHUNK) {
        let nb = MASK_CHUNK.min(batches - c0);
        lane_masks(hash, thr, &xs[c0 * LANES..(c0 + nb) * LANES], &mut masks[..nb]);
        for (j, &m) in masks[..nb].iter().enumerate() {
            let mask = m & active.get(u, c0 + j);
            if mask != 0 {
                let r0 = (c0 + j) * LANES;
                let changed = push_batch(&lu[r0..r0 + LANES], &lv[r0..r0 + LANES], v, mask);
                if changed != 0 {
                    next.insert(v, c0 + j, changed);
                }
            }
        }
    }
}

/// Atomic form of [`lane_label_step`] over up to [`LANES`] lanes: per
/// selected lane, lowers `lv` to `lu` with an atomic min so concurrent pushes never lose updates. Returns
/// the lanes of `lv` that changed.
#[inline]
fn push_batch(lu: &[AtomicU32], lv: &[AtomicU32], v: u32, mask: LaneMask) -> LaneMask {
    let mut changed = 0;
    for b in 0..LANES {
        if mask >> b & 1 == 0 {
            continue;
        }
        if push_lane(&lu[b], &lv[b], v) {
            changed |= 1 << b;
        }
    }
    changed
}

/// Lowers `lv`, the label of vertex `v`, to `lu` if smaller; returns
/// whether `lv` changed. A label never exceeds its own vertex, so a
/// candidate `>= v` is rejected without touching `v`'s row.
#[inline]
fn push_lane(lu: &AtomicU32, lv: &AtomicU32, v: u32) -> bool {
    let candidate = lu.load(Relaxed);
    candidate < v && candidate < lv.load(Relaxed) && lv.fetch_min(candidate, Relaxed) > candidate
}

/// One batched label step across edge `(u, v)`: in every lane selected by
/// `mask` where `lu` is smaller, `lv` takes `lu`'s value. Returns whether any
/// lane of `lv` changed. `lu` is never written.
pub fn lane_label_step(lu: &[u32; LANES], lv: &mut [u32; LANES], mask: LaneMask) -> bool {
    let mut changed = 0u8;
    for b in 0..LANES {
        let smaller = lu[b] < lv[b];
        let select = mask >> b & 1 == 1;
        let min = if smaller { lu[b] } else { lv[b] };
        if select {
            lv[b] = min;
        }
        changed |= ((select && smaller) as u8) << b;
    }
    changed != 0
}

/// One bit per `(vertex, lane)`, stored as a lane mask per `(vertex, batch)`:
/// which labels changed during a sweep.
struct LaneMarks {
    masks: Vec<AtomicU8>,
    batches: usize,
}

impl LaneMarks {
    fn new(n: usize, batches: usize) -> Self {
        LaneMarks {
            masks: (0..n * batches).map(|_| AtomicU8::new(0)).collect(),
            batches,
        }
    }

    fn fill(&mut self) {
        self.masks.iter_mut().for_each(|m| *m.get_mut() = LaneMask::MAX);
    }

    fn clear(&mut self) {
        self.masks.iter_mut().for_each(|m| *m.get_mut() = 0);
    }

    #[inline]
    fn get(&self, v: u32, batch: usize) -> LaneMask {
        self.masks[v as usize * self.batches + batch].load(Relaxed)
    }

    #[inline]
    fn insert(&self, v: u32, batch: usize, lanes: LaneMask) {
        let m = &self.masks[v as usize * self.batches + batch];
        if m.load(Relaxed) & lanes != lanes {
            m.fetch_or(lanes, Relaxed);
        }
    }

    /// Vertices with at least one marked lane, ascending.
    fn marked_vertices(&self) -> Vec<u32> {
        self.masks
            .chunks_exact(self.batches)
            .enumerate()
            .filter(|(_, row)| row.iter().any(|m| m.load(Relaxed) != 0))
            .map(|(v, _)| v as u32)
            .collect()
    }
}

/// Label-indexed component sizes: `size(l, r)` counts the vertices whose
/// label in simulation `r` is `l`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentSizeTable {
    sizes: Vec<u32>,
    lanes: usize,
    simulations: usize,
}

impl ComponentSizeTable {
    #[inline]
    pub fn size(&self, label: u32, r: usize) -> u32 {
        self.sizes[label as usize * self.lanes + r]
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn simulations(&self) -> usize {
        self.simulations
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.sizes
    }
}

pub fn component_sizes(labels: &LabelMatrix) -> ComponentSizeTable {
    let lanes = labels.lanes;
    let counts: Vec<AtomicU32> = (0..labels.labels.len()).map(|_| AtomicU32::new(0)).collect();
    // Each task owns a block of lane columns. Label `l` in lane `r` only
    // ever counts into column `r`, so no counter is shared between tasks and
    // a plain load/store replaces a locked read-modify-write.
    // Blocks are as wide as possible so each task streams whole cache lines.
    let batches = lanes / LANES;
    let width = batches.div_ceil(par::current_threads().clamp(1, batches)) * LANES;
    par::tasks(lanes.div_ceil(width), |block| {
        let cols = block * width..((block + 1) * width).min(lanes);
        for v in 0..labels.n as u32 {
            // Labels never exceed their vertex, so row `v` is first reached
            // here: its own lanes are set in one sequential pass, and only
            // lanes labelled by an earlier vertex count elsewhere.
            let row = &labels.row(v)[cols.clone()];
            let own = &counts[v as usize * lanes..][cols.clone()];
            for (c, &l) in own.iter().zip(row) {
                c.store((l == v) as u32, Relaxed);
            }
            for (r, &l) in cols.clone().zip(row) {
                if l != v {
                    let c = &counts[l as usize * lanes + r];
                    c.store(c.load(Relaxed) + 1, Relaxed);
                }
            }
        }
    });
    ComponentSizeTable {
        sizes: counts.into_iter().map(AtomicU32::into_inner).collect(),
        lanes,
        simulations: labels.simulations,
    }
}

/// `mg[v] = sum over scored simulations of |component of v|`, in units of
/// vertices x simulations.
pub fn initial_marginal_gains(labels: &LabelMatrix, sizes: &ComponentSizeTable) -> Vec<u64> {
    let sims = labels.simulations;
    par::range_map(labels.n, |v| {
        let v = v as u32;
        let own = &sizes.sizes[v as usize * sizes.lanes..][..sims];
        labels.row(v)[..sims]
            .iter()
            .zip(own)
            .enumerate()
            .map(|(r, (&l, &s))| if l == v { s } else { sizes.size(l, r) } as u64)
            .sum()
    })
}
