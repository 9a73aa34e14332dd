//! Deterministic randomness keyed to tree nodes.
//!
//! Every node of every simulated tree gets its own 128-bit key, derived from
//! (seed, stream, tree index) at the root and extended child-by-child. The
//! node's draws come from a counter-based SplitMix64 stream over that key, so
//! the random field {clock, branch draws}_v is a pure function of the key —
//! independent of traversal order, worker count, horizon, or depth cap.
//! Couplings over horizons and caps therefore reuse *identical* clocks and
//! frequencies, which is what makes the monotonicity audits exact rather
//! than statistical.

/// SplitMix64 finalizer; the standard 64-bit avalanche mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[inline]
fn mix128(hi: u64, lo: u64) -> (u64, u64) {
    let a = mix64(lo ^ 0x6a09e667f3bcc908);
    let b = mix64(hi.wrapping_add(a).rotate_left(23) ^ 0xbb67ae8584caa73b);
    (mix64(a ^ b.rotate_left(41)), mix64(b.wrapping_add(a)))
}

/// Identifies one node of one simulated tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeKey {
    hi: u64,
    lo: u64,
}

impl NodeKey {
    /// Root key for tree `index` of the experiment (seed, stream).
    ///
    /// `stream` separates independent experiments that share a seed (e.g. the
    /// two arms of a two-sample comparison).
    pub fn tree_root(seed: u64, stream: u64, index: u64) -> NodeKey {
        let (hi, lo) = mix128(seed ^ mix64(stream), mix64(index ^ 0x243f6a8885a308d3));
        NodeKey { hi, lo }
    }

    /// Key of child 1 (the sampled frequency) or child 2 (the complement).
    #[inline]
    pub fn child(self, which: u8) -> NodeKey {
        debug_assert!(which == 1 || which == 2);
        let (hi, lo) = mix128(
            self.hi ^ (which as u64).wrapping_mul(0x452821e638d01377),
            self.lo.wrapping_add(0x082efa98ec4e6c89 ^ (which as u64)),
        );
        NodeKey { hi, lo }
    }

    /// The node's draw stream.
    #[inline]
    pub fn rng(self) -> NodeRng {
        NodeRng {
            state: self.lo,
            gamma: (self.hi | 1).wrapping_mul(0x9e3779b97f4a7c15) | 1,
            counter: 0,
        }
    }
}

/// Counter-based SplitMix64 stream: draw k is mix64(state + (k+1)·gamma).
///
/// The odd per-key increment `gamma` decorrelates streams whose states are
/// close; within a stream this is the classic SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct NodeRng {
    state: u64,
    gamma: u64,
    counter: u64,
}

impl NodeRng {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.state.wrapping_add(self.counter.wrapping_mul(self.gamma)))
    }

    /// Uniform on [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / ((1u64 << 53) as f64))
    }

    /// Uniform on (0, 1]; safe to feed into a logarithm.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        1.0 - self.next_f64()
    }

    /// Standard exponential via inverse transform (kept explicit so streams
    /// stay stable across dependency upgrades).
    #[inline]
    pub fn next_exp(&mut self) -> f64 {
        -self.next_f64_open().ln()
    }
}

impl rand::RngCore for NodeRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        NodeRng::next_u64(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        let mut chunks = dest.chunks_exact_mut(8);
        for chunk in &mut chunks {
            chunk.copy_from_slice(&NodeRng::next_u64(self).to_le_bytes());
        }
        let rem = chunks.into_remainder();
        if !rem.is_empty() {
            let bytes = NodeRng::next_u64(self).to_le_bytes();
            rem.copy_from_slice(&bytes[..rem.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Handle for deriving per-tree roots of one experiment.
#[derive(Debug, Clone, Copy)]
pub struct TreeRandomness {
    pub seed: u64,
    pub stream: u64,
}

impl TreeRandomness {
    pub fn new(seed: u64, stream: u64) -> Self {
        TreeRandomness { seed, stream }
    }

    #[inline]
    pub fn tree(&self, index: u64) -> NodeKey {
        NodeKey::tree_root(self.seed, self.stream, index)
    }
}
