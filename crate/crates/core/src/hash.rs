//! Hash-based implicit sampling.
//!
//! Each undirected edge gets one 31-bit hash, shared by both of its slots.
//! Simulation `r` owns a 31-bit random `X[r]`; the edge is live in that
//! simulation iff `X[r] ^ hash < floor(w * HASH_MAX)`. Since XOR with a fixed
//! value permutes `[0, HASH_MAX]`, every edge is live with probability `w`
//! (up to one part in 2^31) and no subgraph is ever materialized.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

/// Simulations processed per batched step.
pub const LANES: usize = 8;

/// Largest hash / random value; also the denominator of sampling probabilities.
pub const HASH_MAX: u32 = i32::MAX as u32;

/// Murmur3 seed used for edge hashes.
pub const EDGE_HASH_SEED: u32 = 0;

/// Lane bitmask: bit `b` refers to simulation `r0 + b`.
pub type LaneMask = u8;

/// 32-bit MurmurHash3 (x86_32 variant).
pub fn murmur3_32(key: &[u8], seed: u32) -> u32 {
    const C1: u32 = 0xcc9e_2d51;
    const C2: u32 = 0x1b87_3593;

    let mut h = seed;
    let mut blocks = key.chunks_exact(4);
    for block in &mut blocks {
        let mut k = u32::from_le_bytes(block.try_into().unwrap());
        k = k.wrapping_mul(C1).rotate_left(15).wrapping_mul(C2);
        h ^= k;
        h = h.rotate_left(13).wrapping_mul(5).wrapping_add(0xe654_6b64);
    }
    let tail = blocks.remainder();
    if !tail.is_empty() {
        let mut k = 0u32;
        for (i, &b) in tail.iter().enumerate() {
            k |= (b as u32) << (8 * i);
        }
        k = k.wrapping_mul(C1).rotate_left(15).wrapping_mul(C2);
        h ^= k;
    }
    h ^= key.len() as u32;
    fmix32(h)
}

#[inline]
fn fmix32(mut h: u32) -> u32 {
    h ^= h >> 16;
    h = h.wrapping_mul(0x85eb_ca6b);
    h ^= h >> 13;
    h = h.wrapping_mul(0xc2b2_ae35);
    h ^ (h >> 16)
}

/// Direction-oblivious 31-bit edge hash: Murmur3 of the two IDs as
/// little-endian u32, smaller first.
pub fn edge_hash(u: u32, v: u32) -> u32 {
    let (a, b) = (u.min(v), u.max(v));
    let mut key = [0u8; 8];
    key[..4].copy_from_slice(&a.to_le_bytes());
    key[4..].copy_from_slice(&b.to_le_bytes());
    murmur3_32(&key, EDGE_HASH_SEED) & HASH_MAX
}

/// Integer sampling probability of an edge in one simulation; divide by
/// [`HASH_MAX`] for the real value.
#[inline]
pub fn sample_prob(hash: u32, x: u32) -> u32 {
    x ^ hash
}

/// Integer inclusion threshold `floor(w * HASH_MAX)`.
#[inline]
pub fn threshold(w: f64) -> u32 {
    (w.clamp(0.0, 1.0) * HASH_MAX as f64).floor() as u32
}

/// Scalar inclusion test for one simulation.
#[inline]
pub fn in_sample(hash: u32, x: u32, threshold: u32) -> bool {
    sample_prob(hash, x) < threshold
}

/// Inclusion test for `LANES` simulations at once: bit `b` is set iff
/// `xs[b] ^ hash < threshold`.
#[inline]
pub fn lane_mask(hash: u32, threshold: u32, xs: &[u32; LANES]) -> LaneMask {
    #[cfg(target_arch = "x86_64")]
    {
        lane_mask_sse2(hash, threshold, xs)
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        lane_mask_scalar(hash, threshold, xs)
    }
}

/// Masks for consecutive batches: `out[i]` is the [`lane_mask`] of
/// `xs[i * LANES..(i + 1) * LANES]`.
pub fn lane_masks(hash: u32, threshold: u32, xs: &[u32], out: &mut [LaneMask]) {
    assert_eq!(xs.len(), out.len() * LANES, "one mask per batch");
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2, checked just above.
        unsafe { lane_masks_avx2(hash, threshold, xs, out) };
        return;
    }
    for (mask, batch) in out.iter_mut().zip(xs.chunks_exact(LANES)) {
        *mask = lane_mask(hash, threshold, batch.try_into().unwrap());
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn lane_masks_avx2(hash: u32, threshold: u32, xs: &[u32], out: &mut [LaneMask]) {
    use std::arch::x86_64::*;
    const SIGN: u32 = 1 << 31;
    let h = _mm256_set1_epi32((hash ^ SIGN) as i32);
    let t = _mm256_set1_epi32((threshold ^ SIGN) as i32);
    for (mask, batch) in out.iter_mut().zip(xs.chunks_exact(LANES)) {
        // SAFETY: `batch` holds exactly 8 u32s; the load is unaligned.
        let x = unsafe { _mm256_loadu_si256(batch.as_ptr() as *const __m256i) };
        let below = _mm256_cmpgt_epi32(t, _mm256_xor_si256(x, h));
        *mask = _mm256_movemask_ps(_mm256_castsi256_ps(below)) as LaneMask;
    }
}

#[inline]
pub fn lane_mask_scalar(hash: u32, threshold: u32, xs: &[u32; LANES]) -> LaneMask {
    let mut mask = 0;
    for (b, &x) in xs.iter().enumerate() {
        mask |= ((x ^ hash < threshold) as u8) << b;
    }
    mask
}

/// SSE2 (part of the x86-64 baseline) form of [`lane_mask_scalar`]. SSE2
/// only compares signed lanes, so both sides get their sign bit flipped,
/// which turns the signed compare into an unsigned one; for the hash side
/// the flip is folded into the XOR.
#[cfg(target_arch = "x86_64")]
#[inline]
fn lane_mask_sse2(hash: u32, threshold: u32, xs: &[u32; LANES]) -> LaneMask {
    use std::arch::x86_64::*;
    const SIGN: u32 = 1 << 31;
    // SAFETY: SSE2 is always available on x86_64, and both unaligned loads
    // stay inside the 8-element array.
    unsafe {
        let h = _mm_set1_epi32((hash ^ SIGN) as i32);
        let t = _mm_set1_epi32((threshold ^ SIGN) as i32);
        let lo = _mm_loadu_si128(xs.as_ptr() as *const __m128i);
        let hi = _mm_loadu_si128(xs.as_ptr().add(4) as *const __m128i);
        let lo = _mm_cmplt_epi32(_mm_xor_si128(lo, h), t);
        let hi = _mm_cmplt_epi32(_mm_xor_si128(hi, h), t);
        let words = _mm_packs_epi32(lo, hi);
        let bytes = _mm_packs_epi16(words, words);
        (_mm_movemask_epi8(bytes) & 0xff) as LaneMask
    }
}

/// Per-slot hashes and thresholds, aligned with `Graph::adj`.
///
/// Thresholds come from [`Graph::canonical_weight`], so both slots of an
/// edge agree on membership even under direction-dependent weights.
#[derive(Clone, Debug)]
pub struct EdgeHashTable {
    hashes: Vec<u32>,
    thresholds: Vec<u32>,
}

impl EdgeHashTable {
    pub fn build(g: &Graph) -> Self {
        let mut hashes = Vec::with_capacity(g.num_slots());
        let mut thresholds = Vec::with_capacity(g.num_slots());
        for u in 0..g.num_vertices() as u32 {
            for s in g.slots(u) {
                let v = g.adj()[s];
                hashes.push(edge_hash(u, v));
                let w = if u < v {
                    g.weight(s)
                } else {
                    g.weight(g.find_slot(v, u).expect("symmetric CSR"))
                };
                thresholds.push(threshold(w));
            }
        }
        EdgeHashTable { hashes, thresholds }
    }

    /// Table from raw per-slot values; used to probe the analyzers with
    /// degenerate hash families.
    pub fn from_parts(hashes: Vec<u32>, thresholds: Vec<u32>) -> Self {
        assert_eq!(hashes.len(), thresholds.len());
        EdgeHashTable {
            hashes: hashes.into_iter().map(|h| h & HASH_MAX).collect(),
            thresholds,
        }
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    #[inline]
    pub fn hash(&self, slot: usize) -> u32 {
        self.hashes[slot]
    }

    #[inline]
    pub fn threshold(&self, slot: usize) -> u32 {
        self.thresholds[slot]
    }

    pub fn hashes(&self) -> &[u32] {
        &self.hashes
    }

    /// Lanes `r0..r0 + LANES` in which the edge of `slot` is live.
    #[inline]
    pub fn lane_membership(&self, slot: usize, r0: usize, randoms: &SimulationRandoms) -> LaneMask {
        lane_mask(self.hashes[slot], self.thresholds[slot], randoms.batch(r0))
    }

    /// Membership of `slot` in simulation `r`.
    #[inline]
    pub fn contains(&self, slot: usize, r: usize, randoms: &SimulationRandoms) -> bool {
        in_sample(self.hashes[slot], randoms.get(r), self.thresholds[slot])
    }
}

/// The per-simulation randoms `X[0..lanes]`.
///
/// `simulations` is the requested count; storage is padded up to a multiple
/// of [`LANES`] and the padding lanes are computed but never scored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationRandoms {
    xs: Vec<u32>,
    simulations: usize,
    master_seed: u64,
}

impl SimulationRandoms {
    pub fn generate(master_seed: u64, simulations: usize) -> Self {
        let lanes = padded_lanes(simulations);
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        let xs = (0..lanes).map(|_| rng.next_u32() & HASH_MAX).collect();
        SimulationRandoms {
            xs,
            simulations,
            master_seed,
        }
    }

    /// Explicit randoms; padding lanes are filled with zero.
    pub fn from_values(values: &[u32]) -> Self {
        let mut xs: Vec<u32> = values.iter().map(|&x| x & HASH_MAX).collect();
        xs.resize(padded_lanes(values.len()), 0);
        SimulationRandoms {
            xs,
            simulations: values.len(),
            master_seed: 0,
        }
    }

    pub fn simulations(&self) -> usize {
        self.simulations
    }

    /// Padded lane count, a multiple of [`LANES`].
    pub fn lanes(&self) -> usize {
        self.xs.len()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    #[inline]
    pub fn get(&self, r: usize) -> u32 {
        self.xs[r]
    }

    pub fn values(&self) -> &[u32] {
        &self.xs
    }

    #[inline]
    pub fn batch(&self, r0: usize) -> &[u32; LANES] {
        debug_assert_eq!(r0 % LANES, 0);
        self.xs[r0..r0 + LANES].try_into().unwrap()
    }
}

/// `r` rounded up to a positive multiple of [`LANES`].
pub fn padded_lanes(r: usize) -> usize {
    r.max(1).div_ceil(LANES) * LANES
}
