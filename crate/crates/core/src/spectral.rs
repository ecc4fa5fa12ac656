//! Periodogram measures on the fundamental cell of the dual lattice and
//! their Hellinger affinity.
//!
//! Points of the cell are written `x = B* t` with `t` in `[0,1)^d`, so for a
//! lattice point `n = B k` the pairing `<n, x>` is just `k . t` and the whole
//! module works in coefficient space.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{BallPoints, LatticePoint};
use crate::sum::{conj_e, pairwise_sum, pairwise_sum_with};

/// A nonnegative density sampled at the nodes `j / grid_n` of `[0,1)^d`,
/// row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMeasure {
    dim: usize,
    grid_n: usize,
    density: Vec<f64>,
    cell_volume: f64,
}

impl DensityMeasure {
    pub fn new(dim: usize, grid_n: usize, density: Vec<f64>) -> Result<Self> {
        if dim == 0 || grid_n == 0 {
            return Err(Error::InvalidParameter { name: "grid_n", reason: "need dim >= 1 and grid_n >= 1".to_string() });
        }
        let nodes = grid_n.checked_pow(dim as u32).ok_or(Error::GridTooLarge { nodes: u64::MAX, cap: u64::MAX })?;
        if density.len() != nodes {
            return Err(Error::LengthMismatch { expected: nodes, got: density.len() });
        }
        if density.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter { name: "density", reason: "must be finite and >= 0".to_string() });
        }
        let cell_volume = libm::pow(grid_n as f64, -(dim as f64));
        Ok(Self { dim, grid_n, density, cell_volume })
    }

    /// The uniform measure with constant density `level`.
    pub fn constant(dim: usize, grid_n: usize, level: f64) -> Result<Self> {
        let nodes = grid_n.pow(dim as u32);
        Self::new(dim, grid_n, vec![level; nodes])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.density) * self.cell_volume
    }

    /// Cell coordinates `t` of node `i`.
    pub fn node(&self, mut i: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.dim];
        for j in (0..self.dim).rev() {
            t[j] = (i % self.grid_n) as f64 / self.grid_n as f64;
            i /= self.grid_n;
        }
        t
    }

    /// Averages over blocks of `factor^d` nodes; `grid_n` must be divisible by `factor`.
    pub fn coarsen(&self, factor: usize) -> Result<DensityMeasure> {
        if factor == 0 || !self.grid_n.is_multiple_of(factor) {
            return Err(Error::InvalidParameter { name: "factor", reason: "must divide grid_n".to_string() });
        }
        let m = self.grid_n / factor;
        let d = self.dim;
        let mut out = vec![0.0; m.pow(d as u32)];
        let mut idx = vec![0usize; d];
        for &x in &self.density {
            let coarse = idx.iter().fold(0, |acc, &i| acc * m + i / factor);
            out[coarse] += x;
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < self.grid_n {
                    break;
                }
                idx[j] = 0;
            }
        }
        let scale = libm::pow(factor as f64, -(d as f64));
        for x in &mut out {
            *x *= scale;
        }
        DensityMeasure::new(d, m, out)
    }

    /// `sum |density - mean| / sum density`: zero for a flat measure.
    pub fn l1_deviation_from_mean(&self) -> f64 {
        let total = pairwise_sum(&self.density);
        if total == 0.0 {
            return 0.0;
        }
        let mean = total / self.density.len() as f64;
        let dev: Vec<f64> = self.density.iter().map(|x| libm::fabs(x - mean)).collect();
        pairwise_sum(&dev) / total
    }

    fn same_grid(&self, other: &DensityMeasure) -> Result<()> {
        if self.dim != other.dim || self.grid_n != other.grid_n {
            Err(Error::GridMismatch)
        } else {
            Ok(())
        }
    }
}

/// `(1 / |B_R ∩ L|_expected) |sum_n u(n) conj(e(<n, x>))|^2` sampled on the
/// cell grid. The sign convention makes the Fourier coefficient at `k` equal
/// to the windowed correlation `sum u(n) conj(u(n + k))`.
pub fn periodogram_density(ball: &BallPoints, u: &[Complex64], grid_n: usize) -> Result<DensityMeasure> {
    if u.len() != ball.len() {
        return Err(Error::LengthMismatch { expected: ball.len(), got: u.len() });
    }
    if grid_n < 2 {
        return Err(Error::InvalidParameter { name: "grid_n", reason: "must be >= 2".to_string() });
    }
    let d = ball.dim();
    let nodes = grid_n.pow(d as u32);
    if ball.is_empty() {
        return DensityMeasure::new(d, grid_n, vec![0.0; nodes]);
    }
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for i in 0..ball.len() {
        for (j, &k) in ball.coeffs(i).iter().enumerate() {
            lo[j] = lo[j].min(k);
            hi[j] = hi[j].max(k);
        }
    }
    let mut shape: Vec<usize> = (0..d).map(|j| (hi[j] - lo[j] + 1) as usize).collect();
    let mut data = vec![Complex64::new(0.0, 0.0); shape.iter().product()];
    for i in 0..ball.len() {
        let flat = ball.coeffs(i).iter().enumerate().fold(0, |acc, (j, &k)| acc * shape[j] + (k - lo[j]) as usize);
        data[flat] += u[i];
    }
    let twiddle: Vec<Complex64> = (0..grid_n).map(|m| conj_e(m as f64 / grid_n as f64)).collect();
    let n = grid_n as i64;
    for axis in 0..d {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let len = shape[axis];
        let mut next = vec![Complex64::new(0.0, 0.0); outer * grid_n * inner];
        for o in 0..outer {
            for t in 0..grid_n {
                for k in 0..len {
                    let m = ((lo[axis] + k as i64) * t as i64).rem_euclid(n) as usize;
                    let w = twiddle[m];
                    let src = &data[(o * len + k) * inner..(o * len + k + 1) * inner];
                    let dst = &mut next[(o * grid_n + t) * inner..(o * grid_n + t + 1) * inner];
                    for (z, s) in dst.iter_mut().zip(src) {
                        *z += s * w;
                    }
                }
            }
        }
        data = next;
        shape[axis] = grid_n;
    }
    let scale = ball.site_normalization();
    DensityMeasure::new(d, grid_n, data.iter().map(|z| z.norm_sqr() / scale).collect())
}

/// `int density(t) conj(e(k . t)) dt` by the grid rule.
pub fn measure_fourier_coeff(m: &DensityMeasure, k: &LatticePoint) -> Complex64 {
    let n = m.grid_n as i64;
    let twiddle: Vec<Complex64> = (0..m.grid_n).map(|j| conj_e(j as f64 / m.grid_n as f64)).collect();
    let d = m.dim;
    pairwise_sum_with(m.len(), |i| {
        let mut rest = i;
        let mut phase = 0i64;
        for j in (0..d).rev() {
            let t = (rest % m.grid_n) as i64;
            rest /= m.grid_n;
            phase = (phase + k.coeffs[j].rem_euclid(n) * t).rem_euclid(n);
        }
        twiddle[phase as usize] * m.density[i]
    }) * m.cell_volume
}

/// `sum sqrt(f g) * cell_volume`, densities taken against the uniform cell measure.
pub fn hellinger_affinity(mu: &DensityMeasure, nu: &DensityMeasure) -> Result<f64> {
    mu.same_grid(nu)?;
    let terms: Vec<f64> = mu.density.iter().zip(&nu.density).map(|(f, g)| libm::sqrt(f * g)).collect();
    Ok(pairwise_sum(&terms) * mu.cell_volume)
}

/// The affinity computed against another reference measure `sigma`, with
/// `f` and `g` the densities of the two measures relative to `sigma`.
pub fn hellinger_affinity_wrt(f: &DensityMeasure, g: &DensityMeasure, sigma: &DensityMeasure) -> Result<f64> {
    f.same_grid(g)?;
    f.same_grid(sigma)?;
    let terms: Vec<f64> = (0..f.len()).map(|i| libm::sqrt(f.density[i] * g.density[i]) * sigma.density[i]).collect();
    Ok(pairwise_sum(&terms) * f.cell_volume)
}
