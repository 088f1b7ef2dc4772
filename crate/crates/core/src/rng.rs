//! Named, forkable random streams.
//!
//! A stream is identified by a root seed and a slash-separated label path
//! (`"episode/agent-3/actions"`). The path is hashed into a ChaCha stream
//! number, so two streams with different paths never share draws and a
//! child's draws never advance its parent.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure, Result};

/// A reproducible random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: String,
    counter: u64,
    rng: ChaCha8Rng,
    children: BTreeSet<String>,
}

/// FNV-1a over the label path, finished with a SplitMix64 avalanche.
fn path_hash(path: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in path.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: &str) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_hash(stream_id));
        Self {
            seed,
            stream_id: stream_id.to_string(),
            counter: 0,
            rng,
            children: BTreeSet::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }

    /// Number of 32/64-bit words handed out so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Derives an independent child stream named `label`.
    ///
    /// The child depends only on the parent's identity and the label, never
    /// on how many draws the parent has made. Forking the same label twice
    /// from one parent instance is a contract violation.
    pub fn fork(&mut self, label: &str) -> Result<RngStream> {
        ensure!(
            !label.is_empty() && !label.contains('/'),
            "fork label {label:?} must be non-empty and contain no '/'"
        );
        ensure!(
            self.children.insert(label.to_string()),
            "label {label:?} already forked from stream {:?}",
            self.stream_id
        );
        Ok(RngStream::new(self.seed, &format!("{}/{}", self.stream_id, label)))
    }

    /// Uniform draw on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's multiply-shift over 64-bit words; bias is < n / 2^64.
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// A fresh 64-bit seed drawn from this stream.
    pub fn next_seed(&mut self) -> u64 {
        self.next_u64()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.counter += 1;
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.counter += dst.len().div_ceil(4) as u64;
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn draws(s: &mut RngStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| s.next_u64()).collect()
    }

    #[test]
    fn same_seed_and_id_replay() {
        let mut a = RngStream::new(7, "root");
        let mut b = RngStream::new(7, "root");
        assert_eq!(draws(&mut a, 32), draws(&mut b, 32));
        assert_eq!(a.counter(), 32);
    }

    #[test]
    fn different_ids_differ() {
        let mut a = RngStream::new(7, "root");
        let mut b = RngStream::new(7, "other");
        assert_ne!(draws(&mut a, 8), draws(&mut b, 8));
    }

    #[test]
    fn fork_same_label_from_same_state_is_identical() {
        let mut p1 = RngStream::new(3, "root");
        let mut p2 = p1.clone();
        let mut c1 = p1.fork("agent-0").unwrap();
        let mut c2 = p2.fork("agent-0").unwrap();
        assert_eq!(draws(&mut c1, 16), draws(&mut c2, 16));
    }

    #[test]
    fn sibling_forks_differ() {
        let mut p = RngStream::new(3, "root");
        let mut c0 = p.fork("agent-0").unwrap();
        let mut c1 = p.fork("agent-1").unwrap();
        assert_ne!(draws(&mut c0, 16), draws(&mut c1, 16));
    }

    #[test]
    fn child_draws_leave_parent_untouched() {
        let mut reference = RngStream::new(11, "root");
        let expected = draws(&mut reference, 20);

        let mut parent = RngStream::new(11, "root");
        let mut head = draws(&mut parent, 5);
        let mut child = parent.fork("x").unwrap();
        draws(&mut child, 1000);
        head.extend(draws(&mut parent, 15));
        assert_eq!(head, expected);
    }

    #[test]
    fn fork_does_not_depend_on_parent_position() {
        let mut early = RngStream::new(5, "root");
        let mut late = RngStream::new(5, "root");
        draws(&mut late, 100);
        let mut a = early.fork("k").unwrap();
        let mut b = late.fork("k").unwrap();
        assert_eq!(draws(&mut a, 8), draws(&mut b, 8));
    }

    #[test]
    fn duplicate_fork_label_is_rejected() {
        let mut p = RngStream::new(1, "root");
        p.fork("agent-0").unwrap();
        assert!(p.fork("agent-0").is_err());
        assert!(p.fork("").is_err());
        assert!(p.fork("a/b").is_err());
    }

    #[test]
    fn below_stays_in_range_and_covers() {
        let mut s = RngStream::new(9, "root");
        let mut seen = [0usize; 5];
        for _ in 0..5000 {
            seen[s.below(5)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 850 && c < 1150), "{seen:?}");
    }
}
