//! The random exponential sum `M_R(lambda)` and the correlation statistics
//! built on the centered phases `A_lambda(n) = conj(e(<xi_n, lambda>)) - phi(lambda)`.
//!
//! Sums are normalized by `m_d(B_R) / covolume`, the expected number of
//! points in the ball, so the limit on the dual lattice is `phi(lambda)` for
//! every covolume.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::lattice::{BallPoints, LatticePoint, LatticeSpec};
use crate::linalg::{dot, norm, norm_sq};
use crate::noise::NoiseModel;
use crate::sampler::Realization;
use crate::sum::{conj_e, pairwise_sum_with, sum_and_advance, Neumaier};

/// Default cap on the number of frequencies in one grid evaluation.
pub const DEFAULT_NODE_CAP: u64 = 20_000_000;

/// Regular-grid lines are re-seeded with exact phases every this many nodes.
const RESEED_EVERY: usize = 256;

/// Frequencies evaluated per task for explicit point lists.
const POINT_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub lattice: LatticeSpec,
    pub noise: NoiseModel,
    pub seed: u64,
}

/// A regular grid with one spacing shared by all axes. Nodes are stored
/// row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularGrid {
    spacing: f64,
    axes: Vec<Vec<f64>>,
}

impl RegularGrid {
    pub fn new(origin: &[f64], spacing: f64, shape: &[usize]) -> Result<Self> {
        if origin.len() != shape.len() || origin.is_empty() {
            return Err(Error::DimensionMismatch { expected: shape.len(), got: origin.len() });
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter { name: "spacing", reason: "must be finite and > 0".to_string() });
        }
        if shape.contains(&0) {
            return Err(Error::InvalidParameter { name: "shape", reason: "every axis needs a node".to_string() });
        }
        let axes = origin
            .iter()
            .zip(shape)
            .map(|(&o, &n)| (0..n).map(|i| o + i as f64 * spacing).collect())
            .collect();
        Ok(Self { spacing, axes })
    }

    /// Grid of the nodes `i * spacing` inside `[lo, hi]` on every axis; it
    /// contains the origin whenever `lo <= 0 <= hi`.
    pub fn integer_box(dim: usize, lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter { name: "box", reason: "need finite lo <= hi".to_string() });
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter { name: "spacing", reason: "must be finite and > 0".to_string() });
        }
        let first = libm::ceil(lo / spacing - 1e-9) as i64;
        let last = libm::floor(hi / spacing + 1e-9) as i64;
        if last < first {
            return Err(Error::InvalidParameter { name: "box", reason: "no grid node inside the box".to_string() });
        }
        let axis: Vec<f64> = (first..=last).map(|i| i as f64 * spacing).collect();
        Ok(Self { spacing, axes: vec![axis; dim] })
    }

    /// Grid from explicit per-axis coordinates (as reloaded from a file).
    pub fn from_axes(axes: Vec<Vec<f64>>, spacing: f64) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
            return Err(Error::InvalidParameter { name: "axes", reason: "every axis needs a node".to_string() });
        }
        Ok(Self { spacing, axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unravel(&self, mut index: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for j in (0..self.dim()).rev() {
            let n = self.axes[j].len();
            idx[j] = index % n;
            index /= n;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    pub fn node(&self, index: usize) -> Vec<f64> {
        self.unravel(index).iter().zip(&self.axes).map(|(&i, a)| a[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrequencySet {
    /// Explicit frequencies, stored flat.
    Points { dim: usize, coords: Vec<f64> },
    Regular(RegularGrid),
}

impl FrequencySet {
    pub fn points(list: &[Vec<f64>]) -> Result<Self> {
        let dim = list.first().map(|p| p.len()).unwrap_or(0);
        if list.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: 0 });
        }
        Ok(FrequencySet::Points { dim, coords: list.iter().flatten().copied().collect() })
    }

    pub fn dim(&self) -> usize {
        match self {
            FrequencySet::Points { dim, .. } => *dim,
            FrequencySet::Regular(g) => g.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FrequencySet::Points { dim, coords } => {
                if *dim == 0 {
                    0
                } else {
                    coords.len() / dim
                }
            }
            FrequencySet::Regular(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        match self {
            FrequencySet::Points { dim, coords } => coords[i * dim..(i + 1) * dim].to_vec(),
            FrequencySet::Regular(g) => g.node(i),
        }
    }
}

/// Values of `M_R` on a set of frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSumField {
    pub radius: f64,
    pub normalization: f64,
    pub window_count: usize,
    pub frequencies: FrequencySet,
    pub values: Vec<Complex64>,
    pub provenance: Option<Provenance>,
}

/// `M_R` for one realization and radius, with the window cached.
#[derive(Debug, Clone)]
pub struct ExpSumEvaluator {
    dim: usize,
    radius: f64,
    normalization: f64,
    positions: Vec<f64>,
}

impl ExpSumEvaluator {
    pub fn new(realization: &Realization, radius: f64) -> Result<Self> {
        let w = realization.window(radius)?;
        Ok(Self {
            dim: w.dim(),
            radius,
            normalization: w.normalization(),
            positions: w.flat_positions().to_vec(),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn count(&self) -> usize {
        self.positions.len() / self.dim
    }

    /// Typical size of `|M_R|` away from the dual lattice: `sqrt(count) / normalization`.
    pub fn noise_floor(&self) -> f64 {
        libm::sqrt(self.count() as f64) / self.normalization
    }

    fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Unnormalized sum of `conj(e(<w, lambda>))`.
    pub fn raw_sum(&self, lambda: &[f64]) -> Complex64 {
        pairwise_sum_with(self.count(), |i| conj_e(dot(self.position(i), lambda)))
    }

    pub fn eval(&self, lambda: &[f64]) -> Complex64 {
        self.raw_sum(lambda) / self.normalization
    }

    /// Evaluates a regular grid line by line with per-point phase recurrences.
    fn eval_regular<E: Executor>(&self, grid: &RegularGrid, exec: &E) -> Vec<Complex64> {
        let d = self.dim;
        let n = self.count();
        let axes = grid.axes();
        let last = axes[d - 1].len();
        let lines: usize = axes[..d - 1].iter().map(|a| a.len()).product();
        let h = grid.spacing();
        let (mut sr, mut si) = (vec![0.0; n], vec![0.0; n]);
        for p in 0..n {
            let z = conj_e(h * self.position(p)[d - 1]);
            sr[p] = z.re;
            si[p] = z.im;
        }
        let norm = self.normalization;
        // On a grid symmetric about the origin the second half of the lines
        // follows from M(-lambda) = conj(M(lambda)).
        let mirrored = axes.iter().all(|a| (0..a.len()).all(|i| a[i] == -a[a.len() - 1 - i]));
        let computed = if mirrored { lines.div_ceil(2) } else { lines };
        let mut rows = exec.map_indexed(computed, |line| {
            let mut lambda = vec![0.0; d];
            let mut rest = line;
            for j in (0..d - 1).rev() {
                let len = axes[j].len();
                lambda[j] = axes[j][rest % len];
                rest /= len;
            }
            let (mut zr, mut zi) = (vec![0.0; n], vec![0.0; n]);
            let (mut pr, mut pi) = (Vec::new(), Vec::new());
            let mut out = Vec::with_capacity(last);
            for i in 0..last {
                if i % RESEED_EVERY == 0 {
                    lambda[d - 1] = axes[d - 1][i];
                    for p in 0..n {
                        let z = conj_e(dot(self.position(p), &lambda));
                        zr[p] = z.re;
                        zi[p] = z.im;
                    }
                }
                out.push(sum_and_advance(&mut zr, &mut zi, &sr, &si, &mut pr, &mut pi) / norm);
            }
            out
        });
        for line in computed..lines {
            let mut row = rows[lines - 1 - line].clone();
            row.reverse();
            row.iter_mut().for_each(|z| *z = z.conj());
            rows.push(row);
        }
        rows.into_iter().flatten().collect()
    }
}

/// `M_R(lambda)` for one frequency.
pub fn exp_sum(realization: &Realization, radius: f64, lambda: &[f64]) -> Result<Complex64> {
    check_dim(realization, lambda)?;
    Ok(ExpSumEvaluator::new(realization, radius)?.eval(lambda))
}

fn check_dim(realization: &Realization, lambda: &[f64]) -> Result<()> {
    if lambda.len() != realization.dim() {
        Err(Error::DimensionMismatch { expected: realization.dim(), got: lambda.len() })
    } else {
        Ok(())
    }
}

/// `M_R` at every frequency of the set.
pub fn exp_sum_grid<E: Executor>(
    realization: &Realization,
    radius: f64,
    frequencies: &FrequencySet,
    exec: &E,
) -> Result<ExpSumField> {
    exp_sum_grid_capped(realization, radius, frequencies, DEFAULT_NODE_CAP, exec)
}

pub fn exp_sum_grid_capped<E: Executor>(
    realization: &Realization,
    radius: f64,
    frequencies: &FrequencySet,
    node_cap: u64,
    exec: &E,
) -> Result<ExpSumField> {
    if frequencies.dim() != realization.dim() {
        return Err(Error::DimensionMismatch { expected: realization.dim(), got: frequencies.dim() });
    }
    let nodes = frequencies.len() as u64;
    if nodes > node_cap {
        return Err(Error::GridTooLarge { nodes, cap: node_cap });
    }
    let ev = ExpSumEvaluator::new(realization, radius)?;
    let values = match frequencies {
        FrequencySet::Regular(grid) => ev.eval_regular(grid, exec),
        FrequencySet::Points { .. } => {
            let n = frequencies.len();
            let chunks = n.div_ceil(POINT_CHUNK);
            exec.map_indexed(chunks, |c| {
                (c * POINT_CHUNK..((c + 1) * POINT_CHUNK).min(n))
                    .map(|i| ev.eval(&frequencies.point(i)))
                    .collect::<Vec<_>>()
            })
            .into_iter()
            .flatten()
            .collect()
        }
    };
    Ok(ExpSumField {
        radius,
        normalization: ev.normalization(),
        window_count: ev.count(),
        frequencies: frequencies.clone(),
        values,
        provenance: Some(Provenance {
            lattice: realization.lattice().clone(),
            noise: realization.noise().clone(),
            seed: realization.seed(),
        }),
    })
}

/// `M_R(lambda)` for each radius, accumulated once over the points sorted by norm.
pub fn radius_sweep(realization: &Realization, radii: &[f64], lambda: &[f64]) -> Result<Vec<(f64, Complex64)>> {
    check_dim(realization, lambda)?;
    let max = radii.iter().copied().fold(0.0, f64::max);
    if radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidParameter { name: "radii", reason: "must be >= 0".to_string() });
    }
    let w = realization.window(max)?;
    let mut order: Vec<(f64, usize)> = (0..w.len()).map(|i| (norm_sq(w.position(i)), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut wanted: Vec<(f64, usize)> = radii.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    wanted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = vec![(0.0, Complex64::new(0.0, 0.0)); radii.len()];
    let (mut re, mut im) = (Neumaier::default(), Neumaier::default());
    let mut next = 0;
    let covolume = realization.lattice().covolume();
    for (r, slot) in wanted {
        let r2 = r * r;
        while next < order.len() && order[next].0 <= r2 {
            let z = conj_e(dot(w.position(order[next].1), lambda));
            re.add(z.re);
            im.add(z.im);
            next += 1;
        }
        let normalization = crate::lattice::ball_volume(realization.dim(), r) / covolume;
        out[slot] = (r, Complex64::new(re.value(), im.value()) / normalization);
    }
    Ok(out)
}

/// The centered phases `A_lambda(n)` on `L ∩ B_R`, aligned with the
/// lexicographic ball order.
pub fn centered_phases(realization: &Realization, lambda: &[f64], radius: f64) -> Result<(BallPoints, Vec<Complex64>)> {
    check_dim(realization, lambda)?;
    realization.check_radius(radius)?;
    let ball = crate::lattice::enumerate_ball(realization.lattice(), radius, crate::lattice::DEFAULT_POINT_CAP)?;
    let phi = realization.noise().char_fn(lambda);
    let mut u = Vec::with_capacity(ball.len());
    for i in 0..ball.len() {
        let entry = realization.index_of(ball.coeffs(i)).expect("ball inside the generated window");
        u.push(conj_e(dot(&realization.displacement(entry), lambda)) - phi);
    }
    Ok((ball, u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub lambda: Vec<f64>,
    pub k: LatticePoint,
    pub radius: f64,
    pub value: Complex64,
}

/// `F_{R,k}(lambda)`: the windowed correlation of `A_lambda` at lag `k`.
pub fn wiener_correlation(
    realization: &Realization,
    lambda: &[f64],
    k: &LatticePoint,
    radius: f64,
) -> Result<CorrelationEstimate> {
    check_dim(realization, lambda)?;
    let reach = radius + norm(&k.position);
    if reach > realization.gen_radius() {
        return Err(Error::RadiusExceedsWindow { radius: reach, gen_radius: realization.gen_radius() });
    }
    let (ball, u) = centered_phases(realization, lambda, radius)?;
    let phi = realization.noise().char_fn(lambda);
    let d = realization.dim();
    let mut shifted = vec![0i64; d];
    let value = pairwise_sum_with(ball.len(), |i| {
        for j in 0..d {
            shifted[j] = ball.coeffs(i)[j] + k.coeffs[j];
        }
        let e = realization.index_of(&shifted).expect("shifted site inside the generated window");
        let a_shift = conj_e(dot(&realization.displacement(e), lambda)) - phi;
        u[i] * a_shift.conj()
    }) / ball.site_normalization();
    Ok(CorrelationEstimate { lambda: lambda.to_vec(), k: k.clone(), radius, value })
}

/// `sum u(n) conj(v(n))` over the ball, averaged per lattice site.
pub fn cross_correlation(ball: &BallPoints, u: &[Complex64], v: &[Complex64]) -> Result<Complex64> {
    if u.len() != ball.len() {
        return Err(Error::LengthMismatch { expected: ball.len(), got: u.len() });
    }
    if v.len() != ball.len() {
        return Err(Error::LengthMismatch { expected: ball.len(), got: v.len() });
    }
    Ok(pairwise_sum_with(u.len(), |i| u[i] * v[i].conj()) / ball.site_normalization())
}

/// Field values at an explicit list of frequencies, sequentially.
pub fn exp_sum_points(realization: &Realization, radius: f64, list: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    Ok(exp_sum_grid(realization, radius, &FrequencySet::points(list)?, &Sequential)?.values)
}
