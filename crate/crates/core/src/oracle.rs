//! Reference algorithms with explicit samples.
//!
//! These are deliberately simple: every simulation materializes its sampled
//! subgraph as a slot bitmap and runs BFS over it. They serve as correctness
//! oracles for the fused pipeline and as the one-sample-per-simulation
//! baseline for timing.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hash::{EdgeHashTable, SimulationRandoms};

/// Largest undirected edge count [`exact_influence`] will enumerate.
pub const EXACT_MAX_EDGES: usize = 22;

/// A live-edge world over `parent`: one flag per adjacency slot, equal for
/// both slots of an edge.
#[derive(Clone, Debug)]
pub struct SampledSubgraph<'g> {
    parent: &'g Graph,
    live: Vec<bool>,
}

impl<'g> SampledSubgraph<'g> {
    pub fn parent(&self) -> &'g Graph {
        self.parent
    }

    #[inline]
    pub fn is_live(&self, slot: usize) -> bool {
        self.live[slot]
    }

    pub fn live_slots(&self) -> &[bool] {
        &self.live
    }

    pub fn live_edge_count(&self) -> usize {
        self.live.iter().filter(|&&b| b).count() / 2
    }

    /// Vertices reachable from `seeds` over live edges, in BFS order.
    pub fn reachable(&self, seeds: &[u32]) -> Vec<u32> {
        reachability(self, seeds)
    }

    /// Component label per vertex: the smallest vertex ID of its component.
    pub fn component_labels(&self) -> Vec<u32> {
        let g = self.parent;
        let n = g.num_vertices();
        let mut label = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        for root in 0..n as u32 {
            if label[root as usize] != u32::MAX {
                continue;
            }
            label[root as usize] = root;
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                for s in g.slots(u) {
                    let v = g.adj()[s];
                    if self.live[s] && label[v as usize] == u32::MAX {
                        label[v as usize] = root;
                        queue.push_back(v);
                    }
                }
            }
        }
        label
    }
}

/// Materializes simulation `r` of the hash-based sampler, one scalar test per
/// slot.
pub fn sample_explicit<'g>(
    g: &'g Graph,
    table: &EdgeHashTable,
    randoms: &SimulationRandoms,
    r: usize,
) -> SampledSubgraph<'g> {
    assert!(r < randoms.lanes(), "simulation {r} out of range");
    let x = randoms.get(r);
    let live = (0..g.num_slots())
        .map(|s| crate::hash::sample_prob(table.hash(s), x) < table.threshold(s))
        .collect();
    SampledSubgraph { parent: g, live }
}

/// Classical sampling: one uniform draw per undirected edge (in canonical
/// slot order), the edge is live iff the draw is below its weight.
pub fn sample_rng<'g, R: Rng + ?Sized>(g: &'g Graph, rng: &mut R) -> SampledSubgraph<'g> {
    let mut live = vec![false; g.num_slots()];
    for u in 0..g.num_vertices() as u32 {
        for s in g.slots(u) {
            let v = g.adj()[s];
            if v > u {
                let keep = rng.random::<f64>() < g.weight(s);
                if keep {
                    live[s] = true;
                    live[g.find_slot(v, u).expect("symmetric CSR")] = true;
                }
            }
        }
    }
    SampledSubgraph { parent: g, live }
}

/// BFS closure of `seeds` over the live edges of `sub`.
pub fn reachability(sub: &SampledSubgraph<'_>, seeds: &[u32]) -> Vec<u32> {
    let g = sub.parent;
    let mut seen = vec![false; g.num_vertices()];
    let mut order = Vec::new();
    for &s in seeds {
        if !seen[s as usize] {
            seen[s as usize] = true;
            order.push(s);
        }
    }
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for s in g.slots(u) {
            let v = g.adj()[s];
            if sub.live[s] && !seen[v as usize] {
                seen[v as usize] = true;
                order.push(v);
            }
        }
    }
    order
}

/// Source of live-edge worlds for the reference algorithms.
pub trait Sampler {
    /// World for simulation index `r`. Samplers may ignore `r` and draw a
    /// fresh world on every call.
    fn sample<'g>(&mut self, g: &'g Graph, r: usize) -> SampledSubgraph<'g>;
}

/// Replays the hash-based simulations, so the same `r` always yields the
/// same world.
pub struct HashSampler<'a> {
    pub table: &'a EdgeHashTable,
    pub randoms: &'a SimulationRandoms,
}

impl Sampler for HashSampler<'_> {
    fn sample<'g>(&mut self, g: &'g Graph, r: usize) -> SampledSubgraph<'g> {
        sample_explicit(g, self.table, self.randoms, r)
    }
}

/// Fresh independent worlds from a seeded PRNG.
pub struct RngSampler {
    rng: ChaCha8Rng,
}

impl RngSampler {
    pub fn new(seed: u64) -> Self {
        RngSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Sampler for RngSampler {
    fn sample<'g>(&mut self, g: &'g Graph, _r: usize) -> SampledSubgraph<'g> {
        sample_rng(g, &mut self.rng)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyOutcome {
    pub seeds: Vec<u32>,
    /// Gain sums of the last round (vertices x simulations); zero for seeds.
    pub gains: Vec<u64>,
}

/// Plain greedy: every round samples `r` worlds and adds the vertex with the
/// largest summed component size outside the current reach.
pub fn new_greedy<S: Sampler>(g: &Graph, k: usize, r: usize, sampler: &mut S) -> Result<GreedyOutcome> {
    let n = g.num_vertices();
    check_k(k, n)?;
    let mut seeds: Vec<u32> = Vec::with_capacity(k);
    let mut in_seeds = vec![false; n];
    let mut gains = vec![0u64; n];
    for _ in 0..k {
        gains.iter_mut().for_each(|x| *x = 0);
        for sim in 0..r {
            let world = sampler.sample(g, sim);
            let labels = world.component_labels();
            let mut size = vec![0u64; n];
            for &l in &labels {
                size[l as usize] += 1;
            }
            let mut covered = vec![false; n];
            for v in world.reachable(&seeds) {
                covered[v as usize] = true;
            }
            for v in 0..n {
                if !in_seeds[v] && !covered[v] {
                    gains[v] += size[labels[v] as usize];
                }
            }
        }
        let best = (0..n)
            .filter(|&v| !in_seeds[v])
            .max_by(|&a, &b| gains[a].cmp(&gains[b]).then(b.cmp(&a)))
            .expect("k <= n leaves a candidate");
        in_seeds[best] = true;
        seeds.push(best as u32);
    }
    Ok(GreedyOutcome { seeds, gains })
}

/// Summed reach of `seeds` over `r` worlds.
pub fn rand_cas_total<S: Sampler>(g: &Graph, seeds: &[u32], r: usize, sampler: &mut S) -> u64 {
    (0..r)
        .map(|sim| sampler.sample(g, sim).reachable(seeds).len() as u64)
        .sum()
}

/// Mean reach of `seeds` over `r` worlds.
pub fn rand_cas<S: Sampler>(g: &Graph, seeds: &[u32], r: usize, sampler: &mut S) -> f64 {
    rand_cas_total(g, seeds, r, sampler) as f64 / r as f64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixGreedyOutcome {
    pub seeds: Vec<u32>,
    /// Gain of each commit in units of vertices x simulations.
    pub gains: Vec<i64>,
    /// Number of reach re-estimations performed by the lazy loop.
    pub evaluations: usize,
}

/// One greedy round for the first seed, then lazy re-evaluation where each
/// stale candidate's gain is re-estimated as `reach(S + u) - reach(S)`.
pub fn mix_greedy<S: Sampler>(g: &Graph, k: usize, r: usize, sampler: &mut S) -> Result<MixGreedyOutcome> {
    let n = g.num_vertices();
    check_k(k, n)?;
    let first = new_greedy(g, 1, r, sampler)?;
    let s0 = first.seeds[0];
    let mut seeds = vec![s0];
    let mut sigma = first.gains[s0 as usize] as i64;
    let mut commit_gains = vec![sigma];
    // (vertex, priority, round of last refresh)
    let mut queue: Vec<(u32, i64, usize)> = (0..n as u32)
        .filter(|&v| v != s0)
        .map(|v| (v, first.gains[v as usize] as i64, 0))
        .collect();
    let mut evaluations = 0;
    while seeds.len() < k {
        let top = (0..queue.len())
            .max_by(|&a, &b| {
                let (va, ga, _) = queue[a];
                let (vb, gb, _) = queue[b];
                ga.cmp(&gb).then(vb.cmp(&va))
            })
            .expect("candidates remain while |S| < k <= n");
        let (u, gain, round) = queue[top];
        if round == seeds.len() {
            queue.swap_remove(top);
            seeds.push(u);
            sigma += gain;
            commit_gains.push(gain);
        } else {
            let mut with_u = seeds.clone();
            with_u.push(u);
            let fresh = rand_cas_total(g, &with_u, r, sampler) as i64 - sigma;
            evaluations += 1;
            queue[top] = (u, fresh, seeds.len());
        }
    }
    Ok(MixGreedyOutcome {
        seeds,
        gains: commit_gains,
        evaluations,
    })
}

/// Exact expected reach of `seeds` by enumerating every live-edge world.
pub fn exact_influence(g: &Graph, seeds: &[u32]) -> Result<f64> {
    let n = g.num_vertices();
    if let Some(&s) = seeds.iter().find(|&&s| s as usize >= n) {
        return Err(Error::InvalidParameter(format!("seed {s} out of range")));
    }
    let mut reached = vec![false; n];
    let mut total = 0.0;
    for_each_world(g, |edges, world, prob| {
        reached.iter_mut().for_each(|x| *x = false);
        for &s in seeds {
            reached[s as usize] = true;
        }
        let mut changed = true;
        while changed {
            changed = false;
            for (i, &(a, b, _)) in edges.iter().enumerate() {
                if world >> i & 1 == 1 && reached[a as usize] != reached[b as usize] {
                    reached[a as usize] = true;
                    reached[b as usize] = true;
                    changed = true;
                }
            }
        }
        total += prob * reached.iter().filter(|&&x| x).count() as f64;
    })?;
    Ok(total)
}

/// Exact influence of every single vertex, `result[v] = exact_influence(g, &[v])`,
/// from one pass over the live-edge worlds.
pub fn exact_single_influences(g: &Graph) -> Result<Vec<f64>> {
    let n = g.num_vertices();
    let mut parent = vec![0u32; n];
    let mut size = vec![0u32; n];
    let mut totals = vec![0.0; n];
    for_each_world(g, |edges, world, prob| {
        parent.iter_mut().enumerate().for_each(|(i, p)| *p = i as u32);
        for (i, &(a, b, _)) in edges.iter().enumerate() {
            if world >> i & 1 == 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb) as usize] = ra.min(rb);
            }
        }
        size.iter_mut().for_each(|x| *x = 0);
        for v in 0..n as u32 {
            let root = find(&mut parent, v);
            size[root as usize] += 1;
        }
        for v in 0..n as u32 {
            let root = find(&mut parent, v);
            totals[v as usize] += prob * size[root as usize] as f64;
        }
    })?;
    Ok(totals)
}

fn find(parent: &mut [u32], mut v: u32) -> u32 {
    while parent[v as usize] != v {
        let up = parent[parent[v as usize] as usize];
        parent[v as usize] = up;
        v = up;
    }
    v
}

/// Calls `f(edges, world, probability)` for every live-edge world with
/// non-zero probability; bit `i` of `world` says whether `edges[i]` is live.
fn for_each_world<F>(g: &Graph, mut f: F) -> Result<()>
where
    F: FnMut(&[(u32, u32, f64)], u32, f64),
{
    let edges: Vec<(u32, u32, f64)> = g.edges().collect();
    if edges.len() > EXACT_MAX_EDGES {
        return Err(Error::Constraint(format!(
            "{} edges; exact enumeration supports at most {EXACT_MAX_EDGES}",
            edges.len()
        )));
    }
    for world in 0u32..(1u32 << edges.len()) {
        let mut prob = 1.0;
        for (i, &(_, _, w)) in edges.iter().enumerate() {
            prob *= if world >> i & 1 == 1 { w } else { 1.0 - w };
        }
        if prob != 0.0 {
            f(&edges, world, prob);
        }
    }
    Ok(())
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Constraint(format!("K = {k} exceeds n = {n}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightScheme;

    fn path(n: u32, p: f64) -> Graph {
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, p)).collect();
        Graph::from_edges(n as usize, &edges).unwrap()
    }

    #[test]
    fn explicit_sample_extremes() {
        let g = Graph::erdos_renyi(40, 4.0, 1).unwrap();
        let randoms = SimulationRandoms::generate(3, 16);
        let table = EdgeHashTable::build(&g);
        for r in 0..16 {
            let world = sample_explicit(&g, &table, &randoms, r);
            assert_eq!(world.live_edge_count(), g.num_edges());
        }
        let g0 = g.with_weights(&WeightScheme::Constant(0.0), 0).unwrap();
        let table0 = EdgeHashTable::build(&g0);
        assert_eq!(sample_explicit(&g0, &table0, &randoms, 5).live_edge_count(), 0);
    }

    #[test]
    fn explicit_sample_matches_lane_membership() {
        let g = Graph::erdos_renyi(30, 3.0, 2)
            .unwrap()
            .with_weights(&WeightScheme::Uniform { lo: 0.0, hi: 1.0 }, 4)
            .unwrap();
        let table = EdgeHashTable::build(&g);
        let randoms = SimulationRandoms::generate(8, 24);
        for r in 0..24 {
            let world = sample_explicit(&g, &table, &randoms, r);
            for s in 0..g.num_slots() {
                let mask = table.lane_membership(s, r / 8 * 8, &randoms);
                assert_eq!(world.is_live(s), mask >> (r % 8) & 1 == 1);
            }
        }
    }

    #[test]
    fn rng_sample_extremes_and_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let full = Graph::erdos_renyi(30, 4.0, 1).unwrap();
        assert_eq!(sample_rng(&full, &mut rng).live_edge_count(), full.num_edges());
        let none = full.with_weights(&WeightScheme::Constant(0.0), 0).unwrap();
        assert_eq!(sample_rng(&none, &mut rng).live_edge_count(), 0);

        // Binomial: 1e5 draws at p = 0.3 have sd 0.00145; 0.005 is > 3 sd.
        let k2 = Graph::from_edges(2, &[(0, 1, 0.3)]).unwrap();
        let hits = (0..100_000).filter(|_| sample_rng(&k2, &mut rng).is_live(0)).count();
        assert!((hits as f64 / 1e5 - 0.3).abs() < 0.005, "{hits}");
    }

    #[test]
    fn reachability_basics() {
        let g = path(5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let world = sample_rng(&g, &mut rng);
        assert_eq!(world.reachable(&[2]).len(), 5);
        let empty = g.with_weights(&WeightScheme::Constant(0.0), 0).unwrap();
        assert_eq!(sample_rng(&empty, &mut rng).reachable(&[3]), vec![3]);
    }

    #[test]
    fn rand_cas_cases() {
        let g = path(4, 0.5);
        let mut s = RngSampler::new(1);
        assert_eq!(rand_cas(&g, &[0, 1, 2, 3], 50, &mut s), 4.0);
        let lone = Graph::from_edges(3, &[]).unwrap();
        assert_eq!(rand_cas(&lone, &[1], 20, &mut s), 1.0);

        let p = 0.3;
        let k2 = Graph::from_edges(2, &[(0, 1, p)]).unwrap();
        let r = 100_000;
        let est = rand_cas(&k2, &[0], r, &mut s);
        let sd = (p * (1.0 - p) / r as f64).sqrt();
        assert!((est - (1.0 + p)).abs() < 3.0 * sd, "{est}");
    }

    #[test]
    fn greedy_small_cases() {
        let lone = Graph::from_edges(4, &[]).unwrap();
        let mut s = RngSampler::new(2);
        assert_eq!(new_greedy(&lone, 1, 8, &mut s).unwrap().seeds, vec![0]);
        assert_eq!(mix_greedy(&lone, 3, 8, &mut s).unwrap().seeds, vec![0, 1, 2]);

        let tri = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(mix_greedy(&tri, 1, 8, &mut s).unwrap().seeds, vec![0]);

        let p6 = path(6, 1.0);
        let out = new_greedy(&p6, 2, 8, &mut s).unwrap();
        assert_eq!(out.seeds[0], 0);
        assert!(out.gains.iter().all(|&g| g == 0));
        assert!(matches!(new_greedy(&p6, 7, 8, &mut s), Err(Error::Constraint(_))));
        assert!(matches!(mix_greedy(&p6, 7, 8, &mut s), Err(Error::Constraint(_))));
    }

    #[test]
    fn exact_influence_closed_forms() {
        let lone = Graph::from_edges(3, &[]).unwrap();
        assert_eq!(exact_influence(&lone, &[1]).unwrap(), 1.0);
        let p = 0.3;
        let k2 = Graph::from_edges(2, &[(0, 1, p)]).unwrap();
        assert!((exact_influence(&k2, &[0]).unwrap() - (1.0 + p)).abs() < 1e-12);
        let p3 = path(3, p);
        let want = 1.0 + p + p * p;
        assert!((exact_influence(&p3, &[0]).unwrap() - want).abs() < 1e-12);
        // Triangle, seed 0: each other vertex is reached unless both paths
        // to it are dead: 1 - (1-p)(1 - p^2).
        let tri = Graph::from_edges(3, &[(0, 1, p), (1, 2, p), (0, 2, p)]).unwrap();
        let reach_one = 1.0 - (1.0 - p) * (1.0 - p * p);
        assert!((exact_influence(&tri, &[0]).unwrap() - (1.0 + 2.0 * reach_one)).abs() < 1e-12);
    }

    #[test]
    fn exact_influence_rejects_large_graphs() {
        let g = path(24, 0.5);
        assert!(matches!(exact_influence(&g, &[0]), Err(Error::Constraint(_))));
    }

    #[test]
    fn single_influences_match_per_vertex_enumeration() {
        let g = Graph::from_edges(5, &[(0, 1, 0.3), (1, 2, 0.7), (2, 0, 0.5), (2, 3, 0.2), (3, 4, 0.9)]).unwrap();
        let all = exact_single_influences(&g).unwrap();
        for v in 0..5u32 {
            assert!((all[v as usize] - exact_influence(&g, &[v]).unwrap()).abs() < 1e-12);
        }
        assert!(exact_single_influences(&path(24, 0.5)).is_err());
    }
}
