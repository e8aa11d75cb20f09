//! Reproducible, splittable random streams.
//!
//! A stream is identified by a `(seed, stream_id)` pair. The pair is mixed
//! through SplitMix64 into a ChaCha12 key, so distinct ids give statistically
//! independent streams and the draw sequence for a given pair is identical
//! on every platform and under any task schedule.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A seeded, owned random stream. Cheap to clone and safe to move between
/// tasks; each task should own its own stream (or a derived substream).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut state = seed ^ stream_id.wrapping_mul(0xd6e8feb86659fd93);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        RngStream { seed, stream_id, rng: ChaCha12Rng::from_seed(key) }
    }

    /// Derives an independent child stream, keyed off this stream's
    /// identity. Substreams of distinct ids never collide, so per-sample
    /// parallel work stays schedule-independent.
    pub fn substream(&self, id: u64) -> Self {
        let mut state = self.seed ^ self.stream_id.wrapping_mul(0xa0761d6478bd642f);
        let child_seed = splitmix64(&mut state);
        RngStream::new(child_seed, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub(crate) fn inner(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

/// Stable 64-bit FNV-1a, for mapping series identifiers to stream ids.
pub fn stream_id_for(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
