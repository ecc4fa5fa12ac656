//! Numerical checks of the supporting estimates: boundary counts, lattice
//! point discrepancy, the correlations of the centered phases and the
//! Hellinger inequality for periodograms.

use lattice_echo_core::lattice::enumerate_ball;
use lattice_echo_core::rng::UniformStream;
use lattice_echo_core::spectral::hellinger_affinity_wrt;
use lattice_echo_core::{
    ball_volume, boundary_counts, cross_correlation, gauss_discrepancy, hellinger_affinity, make_lattice,
    periodogram_density, wiener_correlation, Complex64, DensityMeasure, Executor, LatticeSpec, Matrix, NoiseKey,
    Realization,
};
use serde::Serialize;

use crate::config::RunConfig;

pub const BOUNDARY_TOL: f64 = 0.01;
pub const GAUSS_BOUND: f64 = 6.0;
pub const WIENER_TOL: f64 = 0.05;
pub const AFFINITY_TOL: f64 = 0.01;
pub const CAUCHY_SCHWARZ_PAIRS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryRow {
    pub radius: f64,
    pub escaped: u64,
    pub entered: u64,
    /// `(escaped + entered)` over the expected number of sites in the ball.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySuite {
    pub rows: Vec<BoundaryRow>,
    pub tolerance: f64,
    /// Absent when the noise has no finite moment of the required order.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussRow {
    pub radius: f64,
    pub count: u64,
    pub discrepancy: f64,
    /// `discrepancy / R^(d-1)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussSuite {
    pub rows: Vec<GaussRow>,
    pub max_ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerRow {
    pub radius: f64,
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
    pub expected: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerSuite {
    pub lambda: Vec<f64>,
    pub phi: f64,
    pub rows: Vec<WienerRow>,
    pub tolerance: f64,
    /// Judged on the rows at the largest radius.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinitySuite {
    pub grid_n: usize,
    pub radius: f64,
    pub pairs: usize,
    pub self_affinity_error: f64,
    pub disjoint_affinity: f64,
    pub reference_change_error: f64,
    pub cauchy_schwarz_violations: usize,
    /// Largest `|cross_correlation(u, v)| - affinity(periodograms)` over the pairs.
    pub max_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub seed: u64,
    pub noise: String,
    pub boundary: BoundarySuite,
    pub gauss: GaussSuite,
    pub wiener: WienerSuite,
    pub affinity: AffinitySuite,
    pub pass: bool,
}

impl Diagnostics {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }
}

pub fn boundary_suite<E: Executor>(cfg: &RunConfig, exec: &E) -> lattice_echo_core::Result<BoundarySuite> {
    let radii = &cfg.diagnostics.radii;
    let max = radii.iter().copied().fold(0.0, f64::max);
    let lat = cfg.lattice_spec();
    let real = Realization::generate(&lat, &cfg.noise, &cfg.offset, cfg.seed, cfg.gen_radius.unwrap_or(max), exec)?;
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let (escaped, entered) = boundary_counts(&real, r)?;
        let expected = ball_volume(lat.dim(), r) / lat.covolume();
        rows.push(BoundaryRow { radius: r, escaped, entered, ratio: (escaped + entered) as f64 / expected });
    }
    let pass = cfg.noise.moment_exponent_ok().then(|| {
        let zeros = rows.iter().all(|r| r.escaped + r.entered == 0);
        zeros
            || (rows.windows(2).all(|w| w[1].ratio < w[0].ratio)
                && rows.last().is_some_and(|r| r.ratio < BOUNDARY_TOL))
    });
    Ok(BoundarySuite { rows, tolerance: BOUNDARY_TOL, pass })
}

pub fn gauss_suite(lat: &LatticeSpec, radii: &[f64]) -> lattice_echo_core::Result<GaussSuite> {
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let (count, discrepancy) = gauss_discrepancy(lat, r)?;
        let ratio = discrepancy / r.powi(lat.dim() as i32 - 1);
        rows.push(GaussRow { radius: r, count, discrepancy, ratio });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(GaussSuite { rows, max_ratio, bound: GAUSS_BOUND, pass: max_ratio <= GAUSS_BOUND })
}

/// Lags `0`, each generator and the sum of all generators.
fn lags(d: usize) -> Vec<Vec<i64>> {
    let mut ks = vec![vec![0; d]];
    for i in 0..d {
        ks.push((0..d).map(|j| i64::from(i == j)).collect());
    }
    if d > 1 {
        ks.push(vec![1; d]);
    }
    ks
}

pub fn wiener_suite<E: Executor>(cfg: &RunConfig, exec: &E) -> lattice_echo_core::Result<WienerSuite> {
    let lat = cfg.lattice_spec();
    let d = lat.dim();
    let lambda = &cfg.diagnostics.lambda;
    let top = cfg.diagnostics.wiener_radius;
    let ks: Vec<_> = lags(d).into_iter().map(|k| lat.point(&k)).collect();
    let reach = ks.iter().map(|k| k.position.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let gen = cfg.gen_radius.unwrap_or(top + reach + 1.0);
    let real = Realization::generate(&lat, &cfg.noise, &cfg.offset, cfg.seed, gen, exec)?;
    let phi = cfg.noise.char_fn(lambda);
    let mut ladder: Vec<f64> = cfg.diagnostics.radii.iter().copied().filter(|&r| r < top).collect();
    ladder.push(top);
    let jobs: Vec<(f64, usize)> = ladder.iter().flat_map(|&r| (0..ks.len()).map(move |j| (r, j))).collect();
    let values = exec.map_indexed(jobs.len(), |i| {
        let (r, j) = jobs[i];
        wiener_correlation(&real, lambda, &ks[j], r).map(|f| f.value)
    });
    let mut rows = Vec::with_capacity(jobs.len());
    for (&(r, j), v) in jobs.iter().zip(values) {
        let v = v?;
        let expected = if j == 0 { 1.0 - phi.norm_sqr() } else { 0.0 };
        rows.push(WienerRow {
            radius: r,
            k: ks[j].coeffs.clone(),
            re: v.re,
            im: v.im,
            expected,
            error: (v - expected).norm(),
        });
    }
    let pass = rows.iter().filter(|r| r.radius == top).all(|r| r.error <= WIENER_TOL);
    Ok(WienerSuite { lambda: lambda.clone(), phi: phi.re, rows, tolerance: WIENER_TOL, pass })
}

fn gaussian_sequence(seed: u64, label: &str, index: u64, len: usize) -> Vec<Complex64> {
    let mut s = UniformStream::new(NoiseKey::for_stream(seed, label, index));
    (0..len)
        .map(|_| {
            let (a, b) = s.normal_pair();
            Complex64::new(a, b)
        })
        .collect()
}

fn uniform_density(seed: u64, label: &str, index: u64, n: usize) -> DensityMeasure {
    let mut s = UniformStream::new(NoiseKey::for_stream(seed, label, index));
    let density = (0..n).map(|_| s.open01()).collect();
    DensityMeasure::new(1, n, density).expect("uniform draws are valid densities")
}

/// Hellinger checks on `Z ∩ [-R, R]`. `R` is capped at `grid_n / 4` so the
/// grid resolves the main lobe of every periodogram.
pub fn affinity_suite(seed: u64, pairs: usize, radius: f64, grid_n: usize) -> lattice_echo_core::Result<AffinitySuite> {
    let radius = radius.min((grid_n / 4) as f64);
    let z1 = make_lattice(Matrix::identity(1))?;
    let ball = enumerate_ball(&z1, radius, u64::MAX)?;

    let u = gaussian_sequence(seed, "affinity/self", 0, ball.len());
    let mu = periodogram_density(&ball, &u, grid_n)?;
    let self_affinity_error = (hellinger_affinity(&mu, &mu)? - mu.mass()).abs() / mu.mass().max(1.0);

    let left = uniform_density(seed, "affinity/disjoint", 0, grid_n);
    let right = uniform_density(seed, "affinity/disjoint", 1, grid_n);
    let half = grid_n / 2;
    let left = DensityMeasure::new(1, grid_n, left.density().iter().enumerate().map(|(i, &x)| if i < half { x } else { 0.0 }).collect())?;
    let right = DensityMeasure::new(1, grid_n, right.density().iter().enumerate().map(|(i, &x)| if i < half { 0.0 } else { x }).collect())?;
    let disjoint_affinity = hellinger_affinity(&left, &right)?;

    let mut cauchy_schwarz_violations = 0;
    let mut reference_change_error = 0.0f64;
    for i in 0..CAUCHY_SCHWARZ_PAIRS as u64 {
        let f = uniform_density(seed, "affinity/cs-f", i, grid_n);
        let g = uniform_density(seed, "affinity/cs-g", i, grid_n);
        let rho = hellinger_affinity(&f, &g)?;
        if rho > (f.mass() * g.mass()).sqrt() * (1.0 + 1e-12) {
            cauchy_schwarz_violations += 1;
        }
        let sigma = uniform_density(seed, "affinity/sigma", i, grid_n);
        let rel = |m: &DensityMeasure| {
            DensityMeasure::new(1, grid_n, m.density().iter().zip(sigma.density()).map(|(a, s)| a / s).collect())
        };
        let changed = hellinger_affinity_wrt(&rel(&f)?, &rel(&g)?, &sigma)?;
        reference_change_error = reference_change_error.max((changed - rho).abs());
    }

    let mut max_gap = f64::NEG_INFINITY;
    for i in 0..pairs as u64 {
        let u = gaussian_sequence(seed, "affinity/lemma-u", i, ball.len());
        let v = gaussian_sequence(seed, "affinity/lemma-v", i, ball.len());
        let cc = cross_correlation(&ball, &u, &v)?.norm();
        let rho = hellinger_affinity(&periodogram_density(&ball, &u, grid_n)?, &periodogram_density(&ball, &v, grid_n)?)?;
        max_gap = max_gap.max(cc - rho);
    }
    if pairs == 0 {
        max_gap = 0.0;
    }
    let pass = self_affinity_error <= 1e-10
        && disjoint_affinity == 0.0
        && cauchy_schwarz_violations == 0
        && reference_change_error <= 1e-10
        && max_gap <= AFFINITY_TOL;
    Ok(AffinitySuite {
        grid_n,
        radius,
        pairs,
        self_affinity_error,
        disjoint_affinity,
        reference_change_error,
        cauchy_schwarz_violations,
        max_gap,
        tolerance: AFFINITY_TOL,
        pass,
    })
}

pub fn verify_lemmas<E: Executor>(cfg: &RunConfig, exec: &E) -> lattice_echo_core::Result<Diagnostics> {
    let boundary = boundary_suite(cfg, exec)?;
    let gauss = gauss_suite(&cfg.lattice_spec(), &cfg.diagnostics.gauss_radii)?;
    let wiener = wiener_suite(cfg, exec)?;
    let dg = &cfg.diagnostics;
    let affinity = affinity_suite(cfg.seed, dg.affinity_pairs, dg.affinity_radius, dg.grid_n)?;
    let pass = boundary.pass != Some(false) && gauss.pass && wiener.pass && affinity.pass;
    Ok(Diagnostics { seed: cfg.seed, noise: cfg.noise.name().to_string(), boundary, gauss, wiener, affinity, pass })
}
