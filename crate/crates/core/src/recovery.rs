//! Lattice recovery from one realization: find the peaks of `M_R`, read off
//! a dual basis, confirm the predicted peaks at a larger radius and estimate
//! the offset and Gaussian dispersion from the peak values.

use alloc::collections::VecDeque;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimator::{exp_sum_grid_capped, ExpSumEvaluator, ExpSumField, FrequencySet, RegularGrid, DEFAULT_NODE_CAP};
use crate::exec::Executor;
use crate::lattice::{enumerate_ball, make_lattice, reduce_basis, DEFAULT_POINT_CAP};
use crate::linalg::{dist_to_int, dot, norm, norm_sq, Matrix};
use crate::sampler::Realization;
use crate::sum::e;

/// How grid values are scored against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Score {
    Real,
    Modulus,
}

impl Score {
    fn of(self, z: Complex64) -> f64 {
        match self {
            Score::Real => z.re,
            Score::Modulus => z.norm(),
        }
    }
}

/// Representative of one connected cluster of grid nodes above threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdHit {
    pub lambda: Vec<f64>,
    pub value: Complex64,
    pub node: usize,
    pub cluster_size: usize,
}

/// `X_{R,beta}`: nodes with `Re M_R > beta`, one representative per cluster.
pub fn threshold_set(field: &ExpSumField, beta: f64) -> Vec<ThresholdHit> {
    threshold_set_by(field, beta, Score::Real)
}

/// Clusters nodes whose score exceeds `beta`. On a regular grid nodes that
/// share a face are merged; explicit point lists are not clustered. The
/// representative is the highest-scoring node (lowest index on ties) and
/// clusters come out in order of their first node.
pub fn threshold_set_by(field: &ExpSumField, beta: f64, score: Score) -> Vec<ThresholdHit> {
    let pass: Vec<bool> = field.values.iter().map(|&z| score.of(z) > beta).collect();
    let grid = match &field.frequencies {
        FrequencySet::Regular(g) => g,
        FrequencySet::Points { .. } => {
            return (0..pass.len())
                .filter(|&i| pass[i])
                .map(|i| ThresholdHit {
                    lambda: field.frequencies.point(i),
                    value: field.values[i],
                    node: i,
                    cluster_size: 1,
                })
                .collect();
        }
    };
    let shape = grid.shape();
    let d = shape.len();
    let mut strides = vec![1usize; d];
    for j in (0..d.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * shape[j + 1];
    }
    let mut seen = vec![false; pass.len()];
    let mut hits = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..pass.len() {
        if !pass[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut best, mut size) = (start, 0usize);
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (si, sb) = (score.of(field.values[i]), score.of(field.values[best]));
            if si > sb || (si == sb && i < best) {
                best = i;
            }
            for j in 0..d {
                let coord = (i / strides[j]) % shape[j];
                let mut visit = |n: usize| {
                    if pass[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                };
                if coord > 0 {
                    visit(i - strides[j]);
                }
                if coord + 1 < shape[j] {
                    visit(i + strides[j]);
                }
            }
        }
        hits.push(ThresholdHit { lambda: grid.node(best), value: field.values[best], node: best, cluster_size: size });
    }
    hits
}

/// A located peak of `M_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub lambda: Vec<f64>,
    pub value: Complex64,
    pub radius: f64,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    /// Stop once the probing step is below this.
    pub tol: f64,
    /// First probing step; `0.15 / R` when absent.
    pub initial_step: Option<f64>,
    /// Give up when the maximizer wanders further than this; `1 / R` when absent.
    pub max_travel: Option<f64>,
    /// Give up when `|M_R(lambda0)|` is at most this multiple of the noise floor.
    pub flat_factor: f64,
    pub max_sweeps: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { tol: 1e-4, initial_step: None, max_travel: None, flat_factor: 3.0, max_sweeps: 200 }
    }
}

/// Coordinate ascent on `|M_R|` with a three-point parabola per axis.
pub fn refine_peak(realization: &Realization, radius: f64, lambda0: &[f64], opts: &RefineOptions) -> Result<Peak> {
    let ev = ExpSumEvaluator::new(realization, radius)?;
    refine_with(&ev, lambda0, opts)
}

fn refine_with(ev: &ExpSumEvaluator, lambda0: &[f64], opts: &RefineOptions) -> Result<Peak> {
    let radius = ev.radius();
    let v0 = ev.eval(lambda0);
    let no_ascent = || Error::NoAscent { lambda: lambda0.to_vec(), value: (v0.re, v0.im) };
    if v0.norm() <= opts.flat_factor * ev.noise_floor() {
        return Err(no_ascent());
    }
    let max_travel = opts.max_travel.unwrap_or(1.0 / radius);
    let mut step = opts.initial_step.unwrap_or(0.15 / radius);
    let mut x = lambda0.to_vec();
    let mut fx = v0.norm();
    let mut vx = v0;
    let mut probe = x.clone();
    let f_at = |probe: &mut Vec<f64>, x: &[f64], j: usize, delta: f64| {
        probe.copy_from_slice(x);
        probe[j] += delta;
        let v = ev.eval(probe);
        (v.norm(), v)
    };
    for _ in 0..opts.max_sweeps {
        let mut moved = 0.0f64;
        for j in 0..x.len() {
            let (fm, _) = f_at(&mut probe, &x, j, -step);
            let (fp, _) = f_at(&mut probe, &x, j, step);
            let delta = if fx >= fm && fx >= fp {
                let curv = fm - 2.0 * fx + fp;
                if curv < 0.0 {
                    (0.5 * step * (fm - fp) / curv).clamp(-step, step)
                } else {
                    0.0
                }
            } else if fp > fm {
                step
            } else {
                -step
            };
            if delta != 0.0 {
                let (fy, vy) = f_at(&mut probe, &x, j, delta);
                if fy > fx {
                    x[j] += delta;
                    fx = fy;
                    vx = vy;
                    moved = moved.max(libm::fabs(delta));
                }
            }
        }
        let travel = norm(&x.iter().zip(lambda0).map(|(a, b)| a - b).collect::<Vec<_>>());
        if travel > max_travel {
            return Err(no_ascent());
        }
        if moved < 0.5 * step {
            if step < opts.tol {
                return Ok(Peak { lambda: x, value: vx, radius, refined: true });
            }
            step *= 0.5;
        }
    }
    Ok(Peak { lambda: x, value: vx, radius, refined: true })
}

/// Builds a dual basis from peak positions: the shortest linearly
/// independent peaks are taken first (lexicographic order on equal norms),
/// then every peak must be an integer combination of them to within `tol`.
/// When some peak lands on a rational point of the candidate basis, the
/// lattice spanned by all peaks is formed exactly and tried instead.
pub fn extract_dual_basis(peaks: &[Vec<f64>], dim: usize, tol: f64) -> Result<Matrix> {
    if peaks.iter().any(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: peaks.iter().map(|p| p.len()).find(|&l| l != dim).unwrap_or(0) });
    }
    let mut pts: Vec<&Vec<f64>> = peaks.iter().filter(|p| norm(p) > 10.0 * tol).collect();
    pts.sort_by(|a, b| {
        norm_sq(a).total_cmp(&norm_sq(b)).then_with(|| {
            a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal)
        })
    });
    let mut chosen: Vec<Vec<f64>> = Vec::new();
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for p in &pts {
        if chosen.len() == dim {
            break;
        }
        let mut r = (*p).clone();
        for q in &ortho {
            let mu = dot(&r, q) / norm_sq(q);
            r.iter_mut().zip(q).for_each(|(x, y)| *x -= mu * y);
        }
        if norm(&r) > tol {
            chosen.push((*p).clone());
            ortho.push(r);
        }
    }
    if chosen.len() < dim {
        return Err(Error::RankDeficient { found: chosen.len(), needed: dim });
    }
    let mut basis = Matrix::from_columns(&chosen)?;
    if let Some(bad) = uncovered(&basis, &pts, tol)? {
        basis = rational_span(&basis, &pts, tol).ok_or_else(|| Error::NotALattice { peak: bad.clone() })?;
        if let Some(bad) = uncovered(&basis, &pts, tol)? {
            return Err(Error::NotALattice { peak: bad.clone() });
        }
    }
    reduce_basis(&basis)
}

fn uncovered<'a>(basis: &Matrix, pts: &[&'a Vec<f64>], tol: f64) -> Result<Option<&'a Vec<f64>>> {
    let inv = basis.inverse()?;
    for p in pts {
        let k: Vec<i64> = inv.mul_vec(p).iter().map(|c| libm::round(*c) as i64).collect();
        let fit = basis.mul_int(&k);
        let miss = norm(&fit.iter().zip(p.iter()).map(|(a, b)| a - b).collect::<Vec<_>>());
        if miss > tol {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

const MAX_DENOMINATOR: i64 = 12;

/// Basis of the lattice generated by all peaks, using coordinates in
/// `basis` rounded to a common denominator.
fn rational_span(basis: &Matrix, pts: &[&Vec<f64>], tol: f64) -> Option<Matrix> {
    let inv = basis.inverse().ok()?;
    let d = basis.dim();
    let coords: Vec<Vec<f64>> = pts.iter().map(|p| inv.mul_vec(p)).collect();
    // Coordinate tolerance for a peak off by `tol` in position.
    let ctol = tol * inv.max_column_norm() * libm::sqrt(d as f64);
    let mut denom = 1i64;
    for c in &coords {
        let q = (1..=MAX_DENOMINATOR).find(|&q| c.iter().all(|x| dist_to_int(x * q as f64) <= ctol * q as f64))?;
        denom = lcm(denom, q);
        if denom > 64 * MAX_DENOMINATOR {
            return None;
        }
    }
    let mut rows: Vec<Vec<i128>> = (0..d).map(|i| (0..d).map(|j| if i == j { denom as i128 } else { 0 }).collect()).collect();
    rows.extend(coords.iter().map(|c| c.iter().map(|x| libm::round(x * denom as f64) as i128).collect()));
    let span = integer_row_basis(rows, d);
    if span.len() != d {
        return None;
    }
    let cols: Vec<Vec<f64>> = span
        .iter()
        .map(|r| {
            let t: Vec<f64> = r.iter().map(|&x| x as f64 / denom as f64).collect();
            basis.mul_vec(&t)
        })
        .collect();
    Matrix::from_columns(&cols).ok()
}

fn lcm(a: i64, b: i64) -> i64 {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

/// Echelon basis of the integer row lattice spanned by `rows`.
fn integer_row_basis(mut rows: Vec<Vec<i128>>, d: usize) -> Vec<Vec<i128>> {
    let mut out = Vec::new();
    for col in 0..d {
        loop {
            let mut nz: Vec<usize> = (0..rows.len()).filter(|&i| rows[i][col] != 0).collect();
            if nz.len() <= 1 {
                break;
            }
            nz.sort_by_key(|&i| rows[i][col].unsigned_abs());
            let pivot = rows[nz[0]].clone();
            for &i in &nz[1..] {
                let q = rows[i][col] / pivot[col];
                rows[i].iter_mut().zip(&pivot).for_each(|(x, y)| *x -= q * y);
            }
        }
        if let Some(i) = (0..rows.len()).find(|&i| rows[i][col] != 0) {
            out.push(rows.swap_remove(i));
        }
    }
    out
}

/// Offset `c` from peak phases, `arg M(lambda) = -2 pi <lambda, c>`. The
/// generators of `dual_basis` fix `c` modulo the primal lattice; a weighted
/// wrapped-phase least-squares pass over all peaks then refines it. The
/// result is the representative with primal coordinates in `[-1/2, 1/2)`. With
/// `sign_folding` only doubled phases are used, which tolerates negative
/// characteristic-function values but leaves `c` ambiguous by half a cell.
pub fn estimate_offset(
    peaks: &[(Vec<f64>, Complex64)],
    dual_basis: &Matrix,
    beta: f64,
    sign_folding: bool,
) -> Result<Vec<f64>> {
    let d = dual_basis.dim();
    let primal = dual_basis.inverse()?.transpose();
    let fold = if sign_folding { 2.0 } else { 1.0 };
    let phase = |z: Complex64| if sign_folding { (z * z).arg() } else { z.arg() };
    let strong: Vec<&(Vec<f64>, Complex64)> = peaks.iter().filter(|(l, v)| norm(l) > 0.0 && v.norm() > 2.0 * beta).collect();
    let mut t = vec![0.0; d];
    for i in 0..d {
        let m = dual_basis.column(i);
        let tol = 0.25 * norm(&m);
        let found = peaks
            .iter()
            .filter_map(|(l, v)| {
                let plus = norm(&l.iter().zip(&m).map(|(a, b)| a - b).collect::<Vec<_>>());
                let minus = norm(&l.iter().zip(&m).map(|(a, b)| a + b).collect::<Vec<_>>());
                if plus <= tol {
                    Some((plus, *v))
                } else if minus <= tol {
                    Some((minus, v.conj()))
                } else {
                    None
                }
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let magnitude = found.map(|f| f.1.norm()).unwrap_or(0.0);
        if magnitude <= 2.0 * beta {
            return Err(Error::PhaseUnidentifiable { index: i, magnitude });
        }
        t[i] = -phase(found.unwrap().1) / (2.0 * PI * fold);
    }
    let mut c = primal.mul_vec(&t);
    let wrap = |x: f64| x - 2.0 * PI * libm::round(x / (2.0 * PI));
    for _ in 0..20 {
        let mut normal = Matrix::zeros(d);
        let mut rhs = vec![0.0; d];
        for (l, v) in &strong {
            let w = v.norm_sqr();
            let r = wrap(phase(*v) + 2.0 * PI * fold * dot(l, &c));
            for a in 0..d {
                rhs[a] += w * 2.0 * PI * fold * l[a] * r;
                for b in 0..d {
                    normal[(a, b)] += w * 4.0 * PI * PI * fold * fold * l[a] * l[b];
                }
            }
        }
        let step = match normal.solve(&rhs) {
            Ok(s) => s,
            Err(_) => break,
        };
        c.iter_mut().zip(&step).for_each(|(x, s)| *x -= s);
        if norm(&step) < 1e-14 {
            break;
        }
    }
    let coords: Vec<f64> = dual_basis.transpose().mul_vec(&c).iter().map(|x| x - libm::floor(x + 0.5)).collect();
    Ok(primal.mul_vec(&coords))
}

/// Fit of `|M| ~ exp(-a pi^2 |lambda|^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionFit {
    pub a: f64,
    /// `| |value| - exp(-a pi^2 |lambda|^2) |` per fitted peak.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub used: usize,
}

/// Least-squares slope through the origin of `-ln|value|` against
/// `pi^2 |lambda|^2`, weighting each peak by `|value|^2` (the inverse
/// variance of the log under additive noise). Peaks at the origin or with
/// `|value| <= beta` are skipped.
pub fn estimate_dispersion(peaks: &[(Vec<f64>, Complex64)], beta: f64) -> Result<DispersionFit> {
    let used: Vec<(f64, f64)> = peaks
        .iter()
        .filter(|(l, v)| norm(l) > 1e-9 && v.norm() > beta)
        .map(|(l, v)| (PI * PI * norm_sq(l), v.norm()))
        .collect();
    if used.len() < 2 {
        return Err(Error::InsufficientPeaks { found: used.len(), needed: 2 });
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, m) in &used {
        let w = m * m;
        sxy += w * x * -libm::log(m);
        sxx += w * x * x;
    }
    let a = sxy / sxx;
    let residuals: Vec<f64> = used.iter().map(|&(x, m)| libm::fabs(m - libm::exp(-a * x))).collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(DispersionFit { a, residuals, max_residual, used: used.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryParams {
    pub r_detect: f64,
    pub r_verify: f64,
    pub box_lo: f64,
    pub box_hi: f64,
    /// Stage-one grid spacing; clamped to at most `1 / (3 r_detect)`.
    pub spacing: Option<f64>,
    pub beta_detect: f64,
    pub beta: f64,
    /// Candidates are the provisional dual points with norm at most this;
    /// the radius of the ball inscribed in the box when absent.
    pub target_radius: Option<f64>,
    pub refine: RefineOptions,
    pub span_tol: f64,
    pub node_cap: u64,
    /// Dispersion fits whose largest residual exceeds this are flagged.
    pub misfit_threshold: f64,
    pub sign_folding: bool,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        Self {
            r_detect: 60.0,
            r_verify: 250.0,
            box_lo: -2.5,
            box_hi: 2.5,
            spacing: None,
            beta_detect: 0.05,
            beta: 0.007,
            target_radius: None,
            refine: RefineOptions::default(),
            span_tol: 0.02,
            node_cap: DEFAULT_NODE_CAP,
            misfit_threshold: 0.02,
            sign_folding: false,
        }
    }
}

impl RecoveryParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| Err(Error::InvalidParameter { name, reason: reason.to_string() });
        if !(self.r_detect > 0.0) || !self.r_detect.is_finite() {
            return bad("r_detect", "must be finite and > 0");
        }
        if !(self.r_verify >= self.r_detect) || !self.r_verify.is_finite() {
            return bad("r_verify", "must be finite and >= r_detect");
        }
        if !(self.box_lo < 0.0 && self.box_hi > 0.0) {
            return bad("box", "must contain the origin in its interior");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta", "must lie in (0, 1)");
        }
        if !(self.beta_detect > 0.0 && self.beta_detect < 1.0) {
            return bad("beta_detect", "must lie in (0, 1)");
        }
        if let Some(s) = self.spacing {
            if !(s > 0.0) {
                return bad("spacing", "must be > 0");
            }
        }
        if let Some(t) = self.target_radius {
            if !(t > 0.0) {
                return bad("target_radius", "must be > 0");
            }
        }
        Ok(())
    }

    pub fn grid_spacing(&self) -> f64 {
        let cap = 1.0 / (3.0 * self.r_detect);
        self.spacing.map_or(cap, |s| s.min(cap))
    }

    pub fn candidate_radius(&self) -> f64 {
        self.target_radius.unwrap_or(libm::fabs(self.box_lo).min(self.box_hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub dim: usize,
    pub seed: u64,
    pub params: RecoveryParams,
    /// Stage-one peaks at `r_detect`, origin included.
    pub detected: Vec<Peak>,
    /// Confirmed peaks at `r_verify`, origin included, closed under negation.
    pub verified: Vec<Peak>,
    pub dual_basis: Option<Matrix>,
    pub primal_basis: Option<Matrix>,
    pub offset: Option<Vec<f64>>,
    pub dispersion: Option<DispersionFit>,
    pub dispersion_misfit: bool,
    pub cloaked: bool,
}

impl RecoveryReport {
    pub fn verified_count(&self) -> usize {
        self.verified.len()
    }

    pub fn nonzero_verified(&self) -> usize {
        self.verified.iter().filter(|p| norm(&p.lambda) > 0.0).count()
    }
}

/// Peaks closer than this many main-lobe widths `1/R` to a much stronger
/// peak are treated as its sidelobes.
const SIDELOBE_REACH: f64 = 6.0;
const SIDELOBE_RATIO: f64 = 0.2;

/// The full pipeline: coarse scan at `r_detect`, clustering, sidelobe
/// suppression, refinement, basis extraction, candidate verification at
/// `r_verify`, then the final basis, offset and dispersion.
///
/// Candidates are confirmed on the phase-corrected real part
/// `Re(M(lambda) e(<lambda, c_hat>))`, where `c_hat` comes from the stage-one
/// peaks, taking the larger of its value at the lattice point and at the
/// refined maximizer. Stage one thresholds `|M|` since the offset is not yet
/// known there.
pub fn recover_lattice<E: Executor>(realization: &Realization, params: &RecoveryParams, exec: &E) -> Result<RecoveryReport> {
    params.validate()?;
    realization.check_radius(params.r_verify)?;
    let d = realization.dim();
    let grid = RegularGrid::integer_box(d, params.box_lo, params.box_hi, params.grid_spacing())?;
    let field = exp_sum_grid_capped(realization, params.r_detect, &FrequencySet::Regular(grid), params.node_cap, exec)?;
    let mut hits = threshold_set_by(&field, params.beta_detect, Score::Modulus);
    drop(field);
    suppress_sidelobes(&mut hits, params.r_detect);

    let detect_ev = ExpSumEvaluator::new(realization, params.r_detect)?;
    let detected: Vec<Peak> = exec.map_indexed(hits.len(), |i| {
        let h = &hits[i];
        refine_with(&detect_ev, &h.lambda, &params.refine).unwrap_or(Peak {
            lambda: h.lambda.clone(),
            value: h.value,
            radius: params.r_detect,
            refined: false,
        })
    });

    let verify_ev = ExpSumEvaluator::new(realization, params.r_verify)?;
    let origin = vec![0.0; d];
    let origin_peak = Peak { lambda: origin.clone(), value: verify_ev.eval(&origin), radius: params.r_verify, refined: false };
    let nonzero: Vec<Vec<f64>> =
        detected.iter().filter(|p| norm(&p.lambda) > 10.0 * params.span_tol).map(|p| p.lambda.clone()).collect();
    if nonzero.is_empty() {
        let verified = if origin_peak.value.re > params.beta { vec![origin_peak] } else { Vec::new() };
        return Ok(RecoveryReport {
            dim: d,
            seed: realization.seed(),
            params: params.clone(),
            detected,
            verified,
            dual_basis: None,
            primal_basis: None,
            offset: None,
            dispersion: None,
            dispersion_misfit: false,
            cloaked: true,
        });
    }
    let provisional = extract_dual_basis(&nonzero, d, params.span_tol)?;
    let stage_one: Vec<(Vec<f64>, Complex64)> = detected.iter().map(|p| (p.lambda.clone(), p.value)).collect();
    let c_hat = estimate_offset(&stage_one, &provisional, params.beta_detect, params.sign_folding)
        .unwrap_or_else(|_| vec![0.0; d]);

    let candidates = canonical_candidates(&provisional, params)?;
    let verify_opts = RefineOptions {
        initial_step: Some(0.1 / params.r_verify),
        max_travel: Some(0.5 / params.r_verify),
        flat_factor: 0.0,
        ..params.refine.clone()
    };
    let corrected = |l: &[f64], v: Complex64| (v * e(dot(l, &c_hat))).re;
    let checked: Vec<Option<Peak>> = exec.map_indexed(candidates.len(), |i| {
        let m = &candidates[i];
        let at_point = Peak { lambda: m.clone(), value: verify_ev.eval(m), radius: params.r_verify, refined: false };
        let best = match refine_with(&verify_ev, m, &verify_opts) {
            Ok(p) if corrected(&p.lambda, p.value) > corrected(m, at_point.value) => p,
            _ => at_point,
        };
        (corrected(&best.lambda, best.value) > params.beta).then_some(best)
    });
    let mut verified = Vec::new();
    if corrected(&origin, origin_peak.value) > params.beta {
        verified.push(origin_peak);
    }
    for p in checked.into_iter().flatten() {
        let mirror = Peak { lambda: p.lambda.iter().map(|x| -x).collect(), value: p.value.conj(), ..p.clone() };
        verified.push(p);
        verified.push(mirror);
    }
    verified.sort_by(|a, b| {
        norm_sq(&a.lambda).total_cmp(&norm_sq(&b.lambda)).then_with(|| {
            a.lambda.iter().zip(&b.lambda).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(core::cmp::Ordering::Equal)
        })
    });

    let dual = refit_basis(&provisional, &verified)?;
    let primal = dual.inverse()?.transpose();
    let pairs: Vec<(Vec<f64>, Complex64)> = verified.iter().map(|p| (p.lambda.clone(), p.value)).collect();
    let offset = estimate_offset(&pairs, &dual, params.beta, params.sign_folding).ok();
    let dispersion = estimate_dispersion(&pairs, params.beta).ok();
    let dispersion_misfit = dispersion.as_ref().is_some_and(|f| f.max_residual > params.misfit_threshold);
    let cloaked = verified.iter().all(|p| norm(&p.lambda) == 0.0);
    Ok(RecoveryReport {
        dim: d,
        seed: realization.seed(),
        params: params.clone(),
        detected,
        verified,
        dual_basis: Some(dual),
        primal_basis: Some(primal),
        offset,
        dispersion,
        dispersion_misfit,
        cloaked,
    })
}

fn suppress_sidelobes(hits: &mut Vec<ThresholdHit>, radius: f64) {
    let reach = SIDELOBE_REACH / radius;
    let strength: Vec<f64> = hits.iter().map(|h| h.value.norm()).collect();
    let keep: Vec<bool> = (0..hits.len())
        .map(|q| {
            !(0..hits.len()).any(|p| {
                p != q
                    && strength[q] < SIDELOBE_RATIO * strength[p]
                    && norm(&hits[p].lambda.iter().zip(&hits[q].lambda).map(|(a, b)| a - b).collect::<Vec<_>>()) < reach
            })
        })
        .collect();
    let mut i = 0;
    hits.retain(|_| {
        i += 1;
        keep[i - 1]
    });
}

/// Nonzero provisional dual points within the candidate radius and the box,
/// one per `±` pair (first nonzero coefficient positive).
fn canonical_candidates(dual: &Matrix, params: &RecoveryParams) -> Result<Vec<Vec<f64>>> {
    let lat = make_lattice(dual.clone())?;
    let ball = enumerate_ball(&lat, params.candidate_radius(), DEFAULT_POINT_CAP)?;
    let inside = |x: &[f64]| x.iter().all(|&t| t >= params.box_lo - 1e-12 && t <= params.box_hi + 1e-12);
    Ok((0..ball.len())
        .filter(|&i| ball.coeffs(i).iter().find(|&&k| k != 0).is_some_and(|&k| k > 0))
        .map(|i| ball.position(i).to_vec())
        .filter(|x| inside(x) && inside(&x.iter().map(|t| -t).collect::<Vec<_>>()))
        .collect())
}

/// Weighted least-squares basis `B` minimizing `sum |v|^2 |lambda - B k|^2`
/// over verified refined peaks, `k` their integer coordinates in the
/// provisional basis; the provisional basis is kept if the peaks do not
/// pin every direction.
fn refit_basis(provisional: &Matrix, verified: &[Peak]) -> Result<Matrix> {
    let d = provisional.dim();
    let inv = provisional.inverse()?;
    let mut kk = Matrix::zeros(d);
    let mut lk = Matrix::zeros(d);
    let mut used = 0;
    for p in verified.iter().filter(|p| p.refined && norm(&p.lambda) > 0.0) {
        let k: Vec<f64> = inv.mul_vec(&p.lambda).iter().map(|c| libm::round(*c)).collect();
        let w = p.value.norm_sqr();
        for a in 0..d {
            for b in 0..d {
                kk[(a, b)] += w * k[a] * k[b];
                lk[(a, b)] += w * p.lambda[a] * k[b];
            }
        }
        used += 1;
    }
    if used < d || libm::fabs(kk.det()) < 1e-12 * libm::pow(kk.max_column_norm(), d as f64) {
        return reduce_basis(provisional);
    }
    let fitted = lk.mul(&kk.inverse()?);
    // The fit must stay a relabeling of the provisional lattice.
    let moved = inv.mul(&fitted);
    if moved.as_slice().iter().any(|&x| dist_to_int(x) > 0.05) {
        return reduce_basis(provisional);
    }
    reduce_basis(&fitted)
}
