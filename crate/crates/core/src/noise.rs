//! Perturbation laws: sampling, characteristic functions and tail bounds.
//!
//! Characteristic functions follow the conjugated convention
//! `phi(lambda) = E[conj(e(<xi, lambda>))]`, the same one used by the
//! exponential sum, so that `M_R(m) -> phi(m)` on the dual lattice.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::rng::{NoiseKey, UniformStream};
use crate::sum::conj_e;

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    /// Density `(pi a)^{-d/2} exp(-|x|^2 / a)`; per-coordinate variance `a / 2`.
    Gaussian { a: f64 },
    /// Independent uniform coordinates on `[-h, h]`.
    UniformBox { h: f64 },
    /// Uniform on the centered fundamental cell of `cell` (columns are the
    /// cell edges). Its characteristic function vanishes on the nonzero
    /// points of the dual of the lattice generated by `cell`.
    UniformCell { cell: Matrix },
    /// Independent Laplace coordinates with scale `b`.
    Laplace { b: f64 },
    /// Deterministic displacement `v`.
    PointMass { v: Vec<f64> },
    /// Independent Cauchy coordinates with scale `gamma`.
    Cauchy { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    dim: usize,
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: "must be finite and > 0".to_string() })
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidParameter { name: "dim", reason: "must be at least 1".to_string() })
    } else {
        Ok(())
    }
}

/// `sin(pi x)`, exactly zero at the integers.
fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * libm::round(x / 2.0);
    if r > 0.5 {
        libm::sin(PI * (1.0 - r))
    } else if r < -0.5 {
        -libm::sin(PI * (1.0 + r))
    } else {
        libm::sin(PI * r)
    }
}

/// `sin(pi x) / (pi x)`, equal to 1 at 0.
fn sinc_pi(x: f64) -> f64 {
    if libm::fabs(x) < 1e-8 {
        1.0 - PI * PI * x * x / 6.0
    } else {
        sin_pi(x) / (PI * x)
    }
}

impl NoiseModel {
    pub fn gaussian(dim: usize, a: f64) -> Result<Self> {
        check_dim(dim)?;
        positive("noise.a", a)?;
        Ok(Self { kind: NoiseKind::Gaussian { a }, dim })
    }

    pub fn uniform_box(dim: usize, h: f64) -> Result<Self> {
        check_dim(dim)?;
        positive("noise.h", h)?;
        Ok(Self { kind: NoiseKind::UniformBox { h }, dim })
    }

    pub fn uniform_cell(cell: &Matrix) -> Result<Self> {
        crate::lattice::make_lattice(cell.clone())?;
        Ok(Self { kind: NoiseKind::UniformCell { cell: cell.clone() }, dim: cell.dim() })
    }

    pub fn laplace(dim: usize, b: f64) -> Result<Self> {
        check_dim(dim)?;
        positive("noise.b", b)?;
        Ok(Self { kind: NoiseKind::Laplace { b }, dim })
    }

    pub fn point_mass(v: Vec<f64>) -> Result<Self> {
        check_dim(v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter { name: "noise.v", reason: "must be finite".to_string() });
        }
        Ok(Self { dim: v.len(), kind: NoiseKind::PointMass { v } })
    }

    pub fn cauchy(dim: usize, gamma: f64) -> Result<Self> {
        check_dim(dim)?;
        positive("noise.gamma", gamma)?;
        Ok(Self { kind: NoiseKind::Cauchy { gamma }, dim })
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            NoiseKind::Gaussian { .. } => "gaussian",
            NoiseKind::UniformBox { .. } => "uniform_box",
            NoiseKind::UniformCell { .. } => "uniform_cell",
            NoiseKind::Laplace { .. } => "laplace",
            NoiseKind::PointMass { .. } => "point_mass",
            NoiseKind::Cauchy { .. } => "cauchy",
        }
    }

    /// Whether `E|xi|^{d + eps} < infinity` for some `eps > 0`.
    pub fn moment_exponent_ok(&self) -> bool {
        !matches!(self.kind, NoiseKind::Cauchy { .. })
    }

    /// Symmetric about the origin, so `phi` is real.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            NoiseKind::PointMass { v } => v.iter().all(|&x| x == 0.0),
            _ => true,
        }
    }

    pub fn char_fn(&self, lambda: &[f64]) -> Complex64 {
        debug_assert_eq!(lambda.len(), self.dim);
        let real = |x: f64| Complex64::new(x, 0.0);
        match &self.kind {
            NoiseKind::Gaussian { a } => real(libm::exp(-a * PI * PI * dot(lambda, lambda))),
            NoiseKind::UniformBox { h } => real(lambda.iter().map(|&l| sinc_pi(2.0 * h * l)).product()),
            NoiseKind::UniformCell { cell } => {
                let s = cell.transpose().mul_vec(lambda);
                real(s.iter().map(|&x| sinc_pi(x)).product())
            }
            NoiseKind::Laplace { b } => {
                real(lambda.iter().map(|&l| 1.0 / (1.0 + 4.0 * PI * PI * b * b * l * l)).product())
            }
            NoiseKind::PointMass { v } => conj_e(dot(v, lambda)),
            NoiseKind::Cauchy { gamma } => {
                real(libm::exp(-2.0 * PI * gamma * lambda.iter().map(|l| libm::fabs(*l)).sum::<f64>()))
            }
        }
    }

    /// One draw of `xi`, a pure function of the key.
    pub fn sample(&self, key: NoiseKey) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(key, &mut out);
        out
    }

    pub fn sample_into(&self, key: NoiseKey, out: &mut [f64]) {
        let d = self.dim;
        if let NoiseKind::PointMass { v } = &self.kind {
            out.copy_from_slice(v);
            return;
        }
        let mut s = UniformStream::new(key);
        match &self.kind {
            NoiseKind::Gaussian { a } => {
                let sigma = libm::sqrt(a / 2.0);
                let mut j = 0;
                while j < d {
                    let (z0, z1) = s.normal_pair();
                    out[j] = sigma * z0;
                    if j + 1 < d {
                        out[j + 1] = sigma * z1;
                    }
                    j += 2;
                }
            }
            NoiseKind::UniformBox { h } => {
                for x in out.iter_mut() {
                    *x = h * (2.0 * s.open01() - 1.0);
                }
            }
            NoiseKind::UniformCell { cell } => {
                let u: Vec<f64> = (0..d).map(|_| s.open01() - 0.5).collect();
                out.copy_from_slice(&cell.mul_vec(&u));
            }
            NoiseKind::Laplace { b } => {
                for x in out.iter_mut() {
                    let u = s.open01() - 0.5;
                    let mag = -b * libm::log(1.0 - 2.0 * libm::fabs(u));
                    *x = if u < 0.0 { -mag } else { mag };
                }
            }
            NoiseKind::Cauchy { gamma } => {
                for x in out.iter_mut() {
                    *x = gamma * libm::tan(PI * (s.open01() - 0.5));
                }
            }
            NoiseKind::PointMass { .. } => unreachable!(),
        }
    }

    /// A radius `r` with `P(|xi| > r) <= p`.
    pub fn tail_quantile(&self, p: f64) -> f64 {
        let d = self.dim as f64;
        if !(p > 0.0) {
            return f64::INFINITY;
        }
        match &self.kind {
            NoiseKind::PointMass { v } => norm(v),
            NoiseKind::UniformBox { h } => h * libm::sqrt(d),
            NoiseKind::UniformCell { cell } => half_diagonal(cell),
            _ if p >= 1.0 => 0.0,
            NoiseKind::Gaussian { a } => libm::sqrt(a / 2.0) * libm::sqrt(chi_square_quantile(self.dim, p)),
            NoiseKind::Laplace { b } => b * libm::sqrt(d) * libm::log(d / p).max(0.0),
            NoiseKind::Cauchy { gamma } => gamma * libm::sqrt(d) / libm::tan(PI * p / (2.0 * d)),
        }
    }
}

/// Largest `|cell * s / 2|` over sign vectors `s`.
fn half_diagonal(cell: &Matrix) -> f64 {
    let d = cell.dim();
    let mut best: f64 = 0.0;
    for mask in 0u32..(1u32 << d) {
        let s: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { 0.5 } else { -0.5 }).collect();
        best = best.max(norm(&cell.mul_vec(&s)));
    }
    best
}

/// Upper bound on `P(chi^2_d > x)`: exact for even `d`, Chernoff otherwise.
fn chi_square_tail_bound(d: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if d.is_multiple_of(2) {
        let half = x / 2.0;
        let mut term = 1.0;
        let mut acc = 1.0;
        for i in 1..d / 2 {
            term *= half / i as f64;
            acc += term;
        }
        (libm::exp(-half) * acc).min(1.0)
    } else {
        let df = d as f64;
        if x <= df {
            1.0
        } else {
            libm::exp(-(x - df - df * libm::log(x / df)) / 2.0)
        }
    }
}

/// Smallest `x` (to bisection accuracy, rounded up) with tail bound `<= p`.
fn chi_square_quantile(d: usize, p: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = d as f64 + 10.0;
    while chi_square_tail_bound(d, hi) > p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_tail_bound(d, mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn char_fn(model: &NoiseModel, lambda: &[f64]) -> Complex64 {
    model.char_fn(lambda)
}

pub fn sample_noise(model: &NoiseModel, key: NoiseKey) -> Vec<f64> {
    model.sample(key)
}

pub fn tail_quantile(model: &NoiseModel, p: f64) -> f64 {
    model.tail_quantile(p)
}
