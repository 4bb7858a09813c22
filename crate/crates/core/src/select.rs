//! Memoized CELF seed selection.
//!
//! After propagation, the marginal gain of `u` given seed set `S` is the sum,
//! over simulations, of the size of `u`'s component if no seed owns that
//! component. Gains are kept as integer sums (vertices x simulations) so
//! queue decisions never depend on float rounding.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::par;
use crate::propagate::{ComponentSizeTable, LabelMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Candidate {
    vertex: u32,
    gain: u64,
}

// Max-heap order: larger gain first, then smaller vertex ID.
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.cmp(&other.gain).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One dequeue of the CELF loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub vertex: u32,
    /// Priority the vertex had in the queue.
    pub stale_gain: u64,
    /// Recomputed gain; `None` when the vertex was committed as is.
    pub fresh_gain: Option<u64>,
    pub committed: bool,
    /// `|S|` at the time of the dequeue.
    pub seeds_before: usize,
    /// Largest priority left in the queue right after this dequeue.
    pub next_priority: Option<u64>,
}

/// Component labels owned by the seeds, one bit per `(label, lane)`.
#[derive(Clone, Debug)]
pub struct SeedLabels {
    bits: Vec<u64>,
    lanes: usize,
}

impl SeedLabels {
    pub fn new(n: usize, lanes: usize) -> Self {
        SeedLabels {
            bits: vec![0; (n * lanes).div_ceil(64)],
            lanes,
        }
    }

    #[inline]
    pub fn contains(&self, label: u32, r: usize) -> bool {
        let i = label as usize * self.lanes + r;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn insert(&mut self, label: u32, r: usize) {
        let i = label as usize * self.lanes + r;
        self.bits[i / 64] |= 1 << (i % 64);
    }
}

/// CELF state over memoized labels.
pub struct SeedState<'a> {
    labels: &'a LabelMatrix,
    sizes: &'a ComponentSizeTable,
    seeds: Vec<u32>,
    seed_gains: Vec<u64>,
    in_seeds: Vec<bool>,
    seed_labels: SeedLabels,
    queue: BinaryHeap<Candidate>,
    iter: Vec<u32>,
    sigma: u64,
    trace: Vec<TraceEvent>,
}

impl<'a> SeedState<'a> {
    /// Queue seeded with the initial gains; every vertex starts fresh for
    /// `|S| = 0`.
    pub fn new(labels: &'a LabelMatrix, sizes: &'a ComponentSizeTable, initial_gains: &[u64]) -> Self {
        let n = labels.num_vertices();
        assert_eq!(initial_gains.len(), n);
        let queue = initial_gains
            .iter()
            .enumerate()
            .map(|(v, &gain)| Candidate { vertex: v as u32, gain })
            .collect();
        SeedState {
            labels,
            sizes,
            seeds: Vec::new(),
            seed_gains: Vec::new(),
            in_seeds: vec![false; n],
            seed_labels: SeedLabels::new(n, labels.lanes()),
            queue,
            iter: vec![0; n],
            sigma: 0,
            trace: Vec::new(),
        }
    }

    pub fn seeds(&self) -> &[u32] {
        &self.seeds
    }

    pub fn sigma(&self) -> u64 {
        self.sigma
    }

    pub fn seed_labels(&self) -> &SeedLabels {
        &self.seed_labels
    }

    pub fn marginal_gain(&self, u: u32) -> u64 {
        marginal_gain(u, self.labels, self.sizes, &self.seed_labels)
    }

    /// Adds `u` to the seed set with gain `gain`.
    pub fn commit_seed(&mut self, u: u32, gain: u64) -> Result<()> {
        if self.in_seeds[u as usize] {
            return Err(Error::Internal(format!("vertex {u} committed twice")));
        }
        self.in_seeds[u as usize] = true;
        for (r, &l) in self.labels.row(u).iter().enumerate() {
            self.seed_labels.insert(l, r);
        }
        self.seeds.push(u);
        self.seed_gains.push(gain);
        self.sigma += gain;
        Ok(())
    }

    /// Runs the lazy loop until `k` seeds are committed.
    pub fn run(&mut self, k: usize) -> Result<()> {
        while self.seeds.len() < k {
            let top = self
                .queue
                .pop()
                .ok_or_else(|| Error::Internal("queue exhausted before K seeds".into()))?;
            let size = self.seeds.len();
            let mut event = TraceEvent {
                vertex: top.vertex,
                stale_gain: top.gain,
                fresh_gain: None,
                committed: false,
                seeds_before: size,
                next_priority: self.queue.peek().map(|c| c.gain),
            };
            if self.iter[top.vertex as usize] as usize == size {
                self.commit_seed(top.vertex, top.gain)?;
                event.committed = true;
            } else {
                let gain = self.marginal_gain(top.vertex);
                self.iter[top.vertex as usize] = size as u32;
                self.queue.push(Candidate {
                    vertex: top.vertex,
                    gain,
                });
                event.fresh_gain = Some(gain);
            }
            self.trace.push(event);
        }
        Ok(())
    }

    pub fn into_selection(self) -> Selection {
        Selection {
            seeds: self.seeds,
            gains: self.seed_gains,
            sigma: self.sigma,
            simulations: self.labels.simulations(),
            trace: self.trace,
        }
    }
}

/// Result of seed selection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub seeds: Vec<u32>,
    /// Gain of each commit, in commit order.
    pub gains: Vec<u64>,
    /// Sum of `gains`: covered vertices summed over simulations.
    pub sigma: u64,
    pub simulations: usize,
    pub trace: Vec<TraceEvent>,
}

impl Selection {
    /// Memoized influence estimate `sigma / R`.
    pub fn influence(&self) -> f64 {
        self.sigma as f64 / self.simulations as f64
    }

    /// Writes the trace as CSV: `vertex,stale_gain,fresh_gain,committed`.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "vertex,stale_gain,fresh_gain,committed")?;
        for e in &self.trace {
            let fresh = e.fresh_gain.map(|g| g.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", e.vertex, e.stale_gain, fresh, e.committed)?;
        }
        Ok(())
    }
}

/// Gain of adding `u`: per scored simulation, the size of `u`'s component
/// unless a seed already owns it.
pub fn marginal_gain(u: u32, labels: &LabelMatrix, sizes: &ComponentSizeTable, seed_labels: &SeedLabels) -> u64 {
    let row = labels.row(u);
    let sims = labels.simulations();
    let batch = |r0: usize, r1: usize| -> u64 {
        (r0..r1)
            .filter(|&r| !seed_labels.contains(row[r], r))
            .map(|r| sizes.size(row[r], r) as u64)
            .sum()
    };
    const CHUNK: usize = 4096;
    if sims <= CHUNK {
        batch(0, sims)
    } else {
        par::range_sum(sims.div_ceil(CHUNK), |c| batch(c * CHUNK, ((c + 1) * CHUNK).min(sims)))
    }
}

/// Selects `k` seeds: the first is the argmax of `initial_gains` (ties to
/// the smaller ID), the rest come from the CELF loop.
pub fn select_seeds(
    labels: &LabelMatrix,
    sizes: &ComponentSizeTable,
    initial_gains: &[u64],
    k: usize,
) -> Result<Selection> {
    let n = labels.num_vertices();
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Constraint(format!("K = {k} exceeds n = {n}")));
    }
    let mut state = SeedState::new(labels, sizes, initial_gains);
    state.run(k)?;
    Ok(state.into_selection())
}

/// Covered vertices summed over scored simulations, recomputed from scratch.
pub fn coverage(labels: &LabelMatrix, seed_labels: &SeedLabels) -> u64 {
    let sims = labels.simulations();
    par::range_sum(labels.num_vertices(), |v| {
        let row = labels.row(v as u32);
        (0..sims).filter(|&r| seed_labels.contains(row[r], r)).count() as u64
    })
}
