//! Fixed-order summation and phase kernels.
//!
//! Terms are grouped in blocks of [`BLOCK`]; each block is summed with eight
//! strided lanes combined in a fixed tree, and the block sums are combined
//! pairwise. The order depends only on the number of terms.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;

pub const BLOCK: usize = 1024;
const LANES: usize = 8;

#[inline]
fn lane_tree(l: &[f64; LANES]) -> f64 {
    ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7]))
}

/// Sum of at most [`BLOCK`] terms in the fixed lane order.
#[inline]
fn block_sum(xs: &[f64]) -> f64 {
    let mut lanes = [0.0f64; LANES];
    let mut chunks = xs.chunks_exact(LANES);
    for c in &mut chunks {
        for k in 0..LANES {
            lanes[k] += c[k];
        }
    }
    for (k, x) in chunks.remainder().iter().enumerate() {
        lanes[k] += x;
    }
    lane_tree(&lanes)
}

/// Pairwise reduction of partial sums: adjacent pairs are added level by level.
pub fn tree_reduce(parts: &mut Vec<f64>) -> f64 {
    if parts.is_empty() {
        return 0.0;
    }
    while parts.len() > 1 {
        let half = parts.len() / 2;
        for i in 0..half {
            parts[i] = parts[2 * i] + parts[2 * i + 1];
        }
        if parts.len() % 2 == 1 {
            parts[half] = parts[parts.len() - 1];
            parts.truncate(half + 1);
        } else {
            parts.truncate(half);
        }
    }
    parts[0]
}

/// Blocked pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    let mut parts: Vec<f64> = xs.chunks(BLOCK).map(block_sum).collect();
    tree_reduce(&mut parts)
}

/// Blocked pairwise sum of `n` generated complex terms; the same order as
/// [`pairwise_sum`] applied to the materialized real and imaginary parts.
pub fn pairwise_sum_with<F: FnMut(usize) -> Complex64>(n: usize, mut term: F) -> Complex64 {
    let mut re = [0.0f64; BLOCK];
    let mut im = [0.0f64; BLOCK];
    let mut parts_re = Vec::with_capacity(n / BLOCK + 1);
    let mut parts_im = Vec::with_capacity(n / BLOCK + 1);
    let mut start = 0;
    while start < n {
        let len = BLOCK.min(n - start);
        for k in 0..len {
            let z = term(start + k);
            re[k] = z.re;
            im[k] = z.im;
        }
        parts_re.push(block_sum(&re[..len]));
        parts_im.push(block_sum(&im[..len]));
        start += len;
    }
    Complex64::new(tree_reduce(&mut parts_re), tree_reduce(&mut parts_im))
}

/// Blocked pairwise sum of complex terms, real and imaginary parts kept apart.
pub fn pairwise_sum_complex(re: &[f64], im: &[f64]) -> Complex64 {
    Complex64::new(pairwise_sum(re), pairwise_sum(im))
}

/// `(cos 2 pi t, sin 2 pi t)` after reducing `t` to `[-1/2, 1/2]`.
#[inline]
pub fn cis_turns(t: f64) -> (f64, f64) {
    let f = t - libm::round(t);
    let (s, c) = libm::sincos(TAU * f);
    (c, s)
}

/// `conj(e(t)) = exp(-2 pi i t)`.
#[inline]
pub fn conj_e(t: f64) -> Complex64 {
    let (c, s) = cis_turns(t);
    Complex64::new(c, -s)
}

/// `e(t) = exp(2 pi i t)`.
#[inline]
pub fn e(t: f64) -> Complex64 {
    let (c, s) = cis_turns(t);
    Complex64::new(c, s)
}

/// Sums the current phases `z` (split into `zr`, `zi`) in blocked order and
/// then multiplies every phase by its step `s`. This is the inner loop of
/// regular-grid evaluation. `parts` is scratch space.
pub fn sum_and_advance(
    zr: &mut [f64],
    zi: &mut [f64],
    sr: &[f64],
    si: &[f64],
    parts_re: &mut Vec<f64>,
    parts_im: &mut Vec<f64>,
) -> Complex64 {
    parts_re.clear();
    parts_im.clear();
    let n = zr.len();
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let (br, bi) = (&mut zr[start..end], &mut zi[start..end]);
        let (tr, ti) = (&sr[start..end], &si[start..end]);
        let mut lr = [0.0f64; LANES];
        let mut li = [0.0f64; LANES];
        let full = br.len() / LANES * LANES;
        let mut i = 0;
        while i < full {
            for k in 0..LANES {
                let (a, b) = (br[i + k], bi[i + k]);
                lr[k] += a;
                li[k] += b;
                let (c, d) = (tr[i + k], ti[i + k]);
                br[i + k] = a * c - b * d;
                bi[i + k] = a * d + b * c;
            }
            i += LANES;
        }
        for k in 0..br.len() - full {
            let j = full + k;
            let (a, b) = (br[j], bi[j]);
            lr[k] += a;
            li[k] += b;
            br[j] = a * tr[j] - b * ti[j];
            bi[j] = a * ti[j] + b * tr[j];
        }
        parts_re.push(lane_tree(&lr));
        parts_im.push(lane_tree(&li));
        start = end;
    }
    Complex64::new(tree_reduce(parts_re), tree_reduce(parts_im))
}

/// Compensated running sum (Neumaier) for incremental accumulations.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pairwise_matches_exact_integer_sum() {
        let xs: Vec<f64> = (0..5000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4999.0 * 5000.0 / 2.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn advance_multiplies_by_step() {
        let mut zr = vec![1.0; 3000];
        let mut zi = vec![0.0; 3000];
        let sr = vec![0.0; 3000];
        let si = vec![1.0; 3000];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let s0 = sum_and_advance(&mut zr, &mut zi, &sr, &si, &mut a, &mut b);
        assert_eq!(s0, Complex64::new(3000.0, 0.0));
        let s1 = sum_and_advance(&mut zr, &mut zi, &sr, &si, &mut a, &mut b);
        assert_eq!(s1, Complex64::new(0.0, 3000.0));
    }

    #[test]
    fn turns_reduction_is_periodic() {
        let (c0, s0) = cis_turns(0.125);
        let (c1, s1) = cis_turns(1e6 + 0.125);
        assert!((c0 - c1).abs() < 1e-9 && (s0 - s1).abs() < 1e-9);
        assert_eq!(conj_e(0.0), Complex64::new(1.0, -0.0));
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let mut acc = Neumaier::default();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 10.0);
    }
}
