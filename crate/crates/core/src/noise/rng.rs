//! Counter-based Gaussian streams.
//!
//! A ChaCha8 key is derived from `(seed, replica, tag)`, the stream id is the time step and
//! the word position is fixed by the mode slot, so each draw is a pure function of
//! `(seed, replica, tag, step, slot)`. Slots are consumed in pairs by Box-Muller.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TWO_POW_53: f64 = (1u64 << 53) as f64;

/// Identifies one family of streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
    pub tag: u64,
}

impl StreamKey {
    fn generator(&self, step: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replica.to_le_bytes());
        key[16..24].copy_from_slice(&self.tag.to_le_bytes());
        key[24..].copy_from_slice(b"stefanBM");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(step);
        rng
    }

    /// Standard normals for slots `0..count` at `step`.
    pub fn normals(&self, step: u64, count: usize, out: &mut Vec<f64>) {
        out.clear();
        let mut rng = self.generator(step);
        while out.len() < count {
            let (z0, z1) = box_muller(rng.next_u64(), rng.next_u64());
            out.push(z0);
            if out.len() < count {
                out.push(z1);
            }
        }
    }

    /// The standard normal in `slot` at `step`, without generating the others.
    pub fn normal(&self, step: u64, slot: usize) -> f64 {
        let mut rng = self.generator(step);
        // two u64 = four 32-bit words per Box-Muller pair
        rng.set_word_pos(4 * (slot / 2) as u128);
        let (z0, z1) = box_muller(rng.next_u64(), rng.next_u64());
        if slot.is_multiple_of(2) {
            z0
        } else {
            z1
        }
    }
}

#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let u1 = ((a >> 11) + 1) as f64 / TWO_POW_53;
    let u2 = (b >> 11) as f64 / TWO_POW_53;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}
