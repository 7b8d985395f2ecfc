//! Counter-based random number generation: every draw is addressed by
//! `(run seed, path index, step index)`, so parallel ensembles are
//! reproducible regardless of scheduling and any step's noise can be
//! regenerated in isolation.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// 32-bit words of stream position reserved per step (8 u64 draws).
const WORDS_PER_STEP: u128 = 16;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Keyed generator factory; one instance per run.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: [u8; 32],
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { key }
    }

    /// Generator for one path (the path index selects the stream).
    pub fn path(&self, path: u64) -> PathRng {
        let mut rng = ChaCha12Rng::from_seed(self.key);
        rng.set_stream(path);
        PathRng { rng }
    }
}

/// Per-path generator with counter-addressed steps.
#[derive(Debug, Clone)]
pub struct PathRng {
    rng: ChaCha12Rng,
}

impl PathRng {
    fn seek(&mut self, step: u64) {
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
    }

    /// Uniform draws in (0, 1] for the given step (at most 8).
    pub fn uniforms(&mut self, step: u64, out: &mut [f64]) {
        assert!(out.len() <= 8, "a step addresses at most 8 draws");
        self.seek(step);
        for v in out.iter_mut() {
            *v = ((self.rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
        }
    }

    /// Standard normal draws for the given step (at most 8), produced in
    /// fixed-consumption pairs so the counter layout never shifts.
    pub fn normals(&mut self, step: u64, out: &mut [f64]) {
        assert!(out.len() <= 8, "a step addresses at most 8 draws");
        self.seek(step);
        let mut i = 0;
        while i < out.len() {
            let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
            let u2 = (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = 2.0 * std::f64::consts::PI * u2;
            out[i] = radius * angle.cos();
            if i + 1 < out.len() {
                out[i + 1] = radius * angle.sin();
            }
            i += 2;
        }
    }
}
