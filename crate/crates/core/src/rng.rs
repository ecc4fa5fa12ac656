//! Keyed randomness. Every lattice site gets its own 128-bit key derived by
//! hashing `(seed, coefficients)`; the key seeds a ChaCha20 stream, which is
//! a counter-based generator, so a draw is a pure function of the key.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

const SITE_DOMAIN: &[u8] = b"lattice-echo/site-key/v1";
const STREAM_DOMAIN: [u8; 16] = *b"lattice-echo/xi\0";

/// A 128-bit key selecting one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NoiseKey(pub u128);

impl NoiseKey {
    /// Key for the lattice site with the given coefficients under `seed`.
    pub fn for_site(seed: u64, coeffs: &[i64]) -> Self {
        let mut h = Sha256::new();
        h.update(SITE_DOMAIN);
        h.update(seed.to_le_bytes());
        h.update((coeffs.len() as u64).to_le_bytes());
        for c in coeffs {
            h.update(c.to_le_bytes());
        }
        let digest = h.finalize();
        let mut bytes = [0u8; 16];
        bytes.copy_from_slice(&digest[..16]);
        NoiseKey(u128::from_le_bytes(bytes))
    }

    /// Key for an auxiliary stream (test sequences, diagnostics).
    pub fn for_stream(seed: u64, label: &str, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"lattice-echo/stream/v1");
        h.update(seed.to_le_bytes());
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        let digest = h.finalize();
        let mut bytes = [0u8; 16];
        bytes.copy_from_slice(&digest[..16]);
        NoiseKey(u128::from_le_bytes(bytes))
    }
}

/// Uniform variates expanded from a key.
pub struct UniformStream {
    rng: ChaCha20Rng,
}

impl UniformStream {
    pub fn new(key: NoiseKey) -> Self {
        let mut seed = [0u8; 32];
        seed[..16].copy_from_slice(&key.0.to_le_bytes());
        seed[16..].copy_from_slice(&STREAM_DOMAIN);
        Self { rng: ChaCha20Rng::from_seed(seed) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1), on the grid `(k + 1/2) 2^-53`.
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal pair by Box–Muller.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.open01();
        let u2 = self.open01();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(core::f64::consts::TAU * u2);
        (r * c, r * s)
    }
}
