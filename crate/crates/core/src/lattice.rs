//! Lattice geometry: bases and duals, ball enumeration, point counts,
//! basis reduction and equivalence.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{dist_to_int, dot, norm, norm_sq, Matrix};

/// Default cap on the number of points a single enumeration may produce.
pub const DEFAULT_POINT_CAP: u64 = 100_000_000;

/// Relative slack on the ball boundary so points lying exactly on the
/// sphere are kept despite rounding in `basis * coeffs`.
const BOUNDARY_SLACK: f64 = 1e-12;

/// A full-rank lattice. Basis columns are the generators and
/// `dual_basis = basis^{-T}`, so `basis^T * dual_basis = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    basis: Matrix,
    dual_basis: Matrix,
    covolume: f64,
}

/// A lattice point: integer coordinates in the basis and the position `basis * coeffs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePoint {
    pub coeffs: Vec<i64>,
    pub position: Vec<f64>,
}

impl LatticeSpec {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn dual_basis(&self) -> &Matrix {
        &self.dual_basis
    }

    pub fn covolume(&self) -> f64 {
        self.covolume
    }

    /// Points per unit volume.
    pub fn density(&self) -> f64 {
        1.0 / self.covolume
    }

    pub fn point(&self, coeffs: &[i64]) -> LatticePoint {
        LatticePoint { coeffs: coeffs.to_vec(), position: self.basis.mul_int(coeffs) }
    }

    /// Real coordinates of `x` in the basis, i.e. `basis^{-1} x`.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        self.dual_basis.transpose().mul_vec(x)
    }

    /// The lattice with every generator multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<LatticeSpec> {
        make_lattice(self.basis.scaled(s))
    }
}

/// Validates a basis and caches its covolume and dual.
pub fn make_lattice(basis: Matrix) -> Result<LatticeSpec> {
    let d = basis.dim();
    if d == 0 {
        return Err(Error::InvalidParameter { name: "basis", reason: "dimension must be at least 1".into() });
    }
    if basis.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter { name: "basis", reason: "entries must be finite".into() });
    }
    let det = basis.det();
    let scale = libm::pow(basis.max_column_norm(), d as f64);
    if !(libm::fabs(det) >= 1e-12 * scale) || scale == 0.0 {
        return Err(Error::SingularBasis { det });
    }
    let dual_basis = basis.inverse()?.transpose();
    Ok(LatticeSpec { covolume: libm::fabs(det), basis, dual_basis })
}

/// The dual lattice `{m : <n, m> in Z for all n in L}`.
pub fn dual_lattice(lat: &LatticeSpec) -> LatticeSpec {
    // The dual basis of a valid lattice is itself well conditioned enough to pass.
    make_lattice(lat.dual_basis.clone()).expect("dual of a valid lattice is valid")
}

/// `m_d(B_R) = pi^{d/2} R^d / Gamma(d/2 + 1)`.
pub fn ball_volume(dim: usize, radius: f64) -> f64 {
    let h = dim as f64 / 2.0;
    libm::pow(PI, h) * libm::pow(radius, dim as f64) / libm::tgamma(h + 1.0)
}

/// Lattice points of a ball, stored flat and sorted lexicographically by coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoints {
    dim: usize,
    radius: f64,
    covolume: f64,
    coeffs: Vec<i64>,
    positions: Vec<f64>,
}

impl BallPoints {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn covolume(&self) -> f64 {
        self.covolume
    }

    pub fn len(&self) -> usize {
        self.coeffs.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coeffs(&self, i: usize) -> &[i64] {
        &self.coeffs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn flat_coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn flat_positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn point(&self, i: usize) -> LatticePoint {
        LatticePoint { coeffs: self.coeffs(i).to_vec(), position: self.position(i).to_vec() }
    }

    pub fn iter(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Index of the point with the given coefficients, by binary search.
    pub fn index_of(&self, coeffs: &[i64]) -> Option<usize> {
        search_sorted(&self.coeffs, self.dim, coeffs)
    }

    /// Normalization turning a sum over the ball into an average per lattice
    /// site: `m_d(B_R) / covolume`, the expected number of points.
    pub fn site_normalization(&self) -> f64 {
        ball_volume(self.dim, self.radius) / self.covolume
    }
}

/// Binary search in a flat, lexicographically sorted coefficient list.
pub(crate) fn search_sorted(flat: &[i64], dim: usize, key: &[i64]) -> Option<usize> {
    let n = flat.len() / dim;
    let (mut lo, mut hi) = (0usize, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        match flat[mid * dim..(mid + 1) * dim].cmp(key) {
            core::cmp::Ordering::Less => lo = mid + 1,
            core::cmp::Ordering::Greater => hi = mid,
            core::cmp::Ordering::Equal => return Some(mid),
        }
    }
    None
}

/// Enumerates `L ∩ B_R` through the coefficient box `|k_i| <= R |m_i|`
/// (`m_i` the dual generators) followed by an exact norm filter.
pub fn enumerate_ball(lat: &LatticeSpec, radius: f64, cap: u64) -> Result<BallPoints> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter { name: "radius", reason: "must be finite and nonnegative".into() });
    }
    let d = lat.dim();
    let predicted = ball_volume(d, radius + lat.basis.max_column_norm()) / lat.covolume;
    if predicted > cap as f64 {
        return Err(Error::WindowTooLarge { predicted: predicted as u64, cap });
    }
    let bounds: Vec<i64> = (0..d)
        .map(|i| libm::floor(radius * norm(&lat.dual_basis.column(i)) * (1.0 + 1e-12)) as i64)
        .collect();
    let box_count: f64 = bounds.iter().map(|&b| (2 * b + 1) as f64).product();
    if box_count > 64.0 * cap as f64 {
        return Err(Error::WindowTooLarge { predicted: box_count as u64, cap });
    }
    let r2 = radius * radius * (1.0 + BOUNDARY_SLACK);
    let mut coeffs = Vec::new();
    let mut positions = Vec::new();
    let mut k: Vec<i64> = bounds.iter().map(|b| -b).collect();
    let mut x = vec![0.0; d];
    loop {
        for i in 0..d {
            x[i] = (0..d).map(|j| lat.basis[(i, j)] * k[j] as f64).sum();
        }
        if norm_sq(&x) <= r2 {
            coeffs.extend_from_slice(&k);
            positions.extend_from_slice(&x);
        }
        // Odometer with the last coordinate fastest gives lexicographic order.
        let mut axis = d;
        loop {
            if axis == 0 {
                return Ok(BallPoints { dim: d, radius, covolume: lat.covolume, coeffs, positions });
            }
            axis -= 1;
            if k[axis] < bounds[axis] {
                k[axis] += 1;
                break;
            }
            k[axis] = -bounds[axis];
        }
    }
}

/// All lattice points with `|n| <= R`, lexicographic in coefficients.
pub fn points_in_ball(lat: &LatticeSpec, radius: f64) -> Result<Vec<LatticePoint>> {
    Ok(enumerate_ball(lat, radius, DEFAULT_POINT_CAP)?.iter().collect())
}

/// `N_L(R)` and `|N_L(R) - m_d(B_R) / covolume|`.
pub fn gauss_discrepancy(lat: &LatticeSpec, radius: f64) -> Result<(u64, f64)> {
    let ball = enumerate_ball(lat, radius, DEFAULT_POINT_CAP)?;
    let count = ball.len() as u64;
    Ok((count, libm::fabs(count as f64 - ball.site_normalization())))
}

/// Reduces a basis: exact Lagrange–Gauss in dimension 2, LLL with `delta = 3/4`
/// otherwise. Generators are sign-normalized so their first significant
/// entry is positive.
pub fn reduce_basis(basis: &Matrix) -> Result<Matrix> {
    let lat = make_lattice(basis.clone())?;
    let d = lat.dim();
    let mut cols = basis.columns();
    match d {
        1 => {}
        2 => lagrange_gauss(&mut cols),
        _ => lll(&mut cols, 0.75),
    }
    for c in &mut cols {
        normalize_sign(c);
    }
    Matrix::from_columns(&cols)
}

fn normalize_sign(v: &mut [f64]) {
    let scale = norm(v);
    if let Some(&x) = v.iter().find(|x| libm::fabs(**x) > 1e-9 * scale) {
        if x < 0.0 {
            v.iter_mut().for_each(|y| *y = -*y);
        }
    }
}

fn sub_scaled(a: &mut [f64], b: &[f64], mu: f64) {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= mu * y;
    }
}

fn lagrange_gauss(cols: &mut [Vec<f64>]) {
    if norm_sq(&cols[0]) > norm_sq(&cols[1]) {
        cols.swap(0, 1);
    }
    for _ in 0..10_000 {
        let mu = libm::round(dot(&cols[0], &cols[1]) / norm_sq(&cols[0]));
        if mu != 0.0 {
            let b0 = cols[0].clone();
            sub_scaled(&mut cols[1], &b0, mu);
        }
        if norm_sq(&cols[1]) < norm_sq(&cols[0]) {
            cols.swap(0, 1);
        } else {
            break;
        }
    }
}

fn gram_schmidt(cols: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = cols.len();
    let mut star: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut mu = vec![vec![0.0; d]; d];
    for i in 0..d {
        let mut v = cols[i].clone();
        for j in 0..i {
            mu[i][j] = dot(&cols[i], &star[j]) / norm_sq(&star[j]);
            sub_scaled(&mut v, &star[j], mu[i][j]);
        }
        star.push(v);
    }
    (star, mu)
}

fn lll(cols: &mut [Vec<f64>], delta: f64) {
    let d = cols.len();
    let mut k = 1;
    let mut guard = 0usize;
    while k < d && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let (_, mu) = gram_schmidt(cols);
            let q = libm::round(mu[k][j]);
            if q != 0.0 {
                let bj = cols[j].clone();
                sub_scaled(&mut cols[k], &bj, q);
            }
        }
        let (star, mu) = gram_schmidt(cols);
        let lhs = norm_sq(&star[k]);
        let rhs = (delta - mu[k][k - 1] * mu[k][k - 1]) * norm_sq(&star[k - 1]);
        if lhs >= rhs {
            k += 1;
        } else {
            cols.swap(k, k - 1);
            k = if k > 1 { k - 1 } else { 1 };
        }
    }
}

/// True when each basis is an integer combination of the other, i.e. both
/// `A^{-1} B` and `B^{-1} A` are integral to within `tol`.
pub fn lattices_equivalent(a: &LatticeSpec, b: &LatticeSpec, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let ab = a.basis.inverse()?.mul(&b.basis);
    let ba = b.basis.inverse()?.mul(&a.basis);
    let integral = |m: &Matrix| m.as_slice().iter().all(|&x| dist_to_int(x) <= tol);
    Ok(integral(&ab) && integral(&ba))
}
