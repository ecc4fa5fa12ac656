//! Finite, reproducible realizations of `W = { n + c + xi_n }`.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::lattice::{ball_volume, enumerate_ball, LatticeSpec, DEFAULT_POINT_CAP};
use crate::linalg::{norm, norm_sq};
use crate::noise::{NoiseKind, NoiseModel};
use crate::rng::NoiseKey;

/// Probability budget for a point outside the generated window landing inside it.
pub const COVERAGE_BUDGET: f64 = 1e-12;

/// Sites sampled per executor task.
const SAMPLE_CHUNK: usize = 4096;

/// A realization on the sites `|n| <= gen_radius + slack`, sorted
/// lexicographically by coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    lattice: LatticeSpec,
    noise: NoiseModel,
    offset: Vec<f64>,
    seed: u64,
    gen_radius: f64,
    slack: f64,
    coeffs: Vec<i64>,
    sites: Vec<f64>,
    positions: Vec<f64>,
}

/// Window slack: a radius beyond which no site is expected to reach back
/// inside `B_{gen_radius}` within the coverage budget.
pub fn window_slack(lattice: &LatticeSpec, noise: &NoiseModel, offset: &[f64], gen_radius: f64) -> f64 {
    let d = lattice.dim();
    let surface = d as f64 * ball_volume(d, 1.0) * libm::pow(gen_radius, (d - 1) as f64) / lattice.covolume();
    let budget = COVERAGE_BUDGET / surface.max(1.0);
    let mut q = noise.tail_quantile(budget);
    if let NoiseKind::Cauchy { gamma } = noise.kind() {
        q = q.min(50.0 * gamma);
    }
    q.max(1.0) + norm(offset)
}

/// Generates a realization with the sequential executor.
pub fn realize(
    lattice: &LatticeSpec,
    noise: &NoiseModel,
    offset: &[f64],
    seed: u64,
    gen_radius: f64,
) -> Result<Realization> {
    Realization::generate(lattice, noise, offset, seed, gen_radius, &Sequential)
}

impl Realization {
    pub fn generate<E: Executor>(
        lattice: &LatticeSpec,
        noise: &NoiseModel,
        offset: &[f64],
        seed: u64,
        gen_radius: f64,
        exec: &E,
    ) -> Result<Realization> {
        let d = lattice.dim();
        if noise.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: noise.dim() });
        }
        if offset.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: offset.len() });
        }
        if !(gen_radius >= 0.0) || !gen_radius.is_finite() {
            return Err(Error::InvalidParameter { name: "gen_radius", reason: "must be finite and >= 0".to_string() });
        }
        let slack = window_slack(lattice, noise, offset, gen_radius);
        let ball = enumerate_ball(lattice, gen_radius + slack, DEFAULT_POINT_CAP)?;
        let n = ball.len();
        let chunks = n.div_ceil(SAMPLE_CHUNK);
        let parts = exec.map_indexed(chunks, |c| {
            let lo = c * SAMPLE_CHUNK;
            let hi = (lo + SAMPLE_CHUNK).min(n);
            let mut out = Vec::with_capacity((hi - lo) * d);
            let mut xi = alloc::vec![0.0; d];
            for i in lo..hi {
                noise.sample_into(NoiseKey::for_site(seed, ball.coeffs(i)), &mut xi);
                let site = ball.position(i);
                for j in 0..d {
                    out.push(site[j] + offset[j] + xi[j]);
                }
            }
            out
        });
        let positions: Vec<f64> = parts.into_iter().flatten().collect();
        Ok(Realization {
            lattice: lattice.clone(),
            noise: noise.clone(),
            offset: offset.to_vec(),
            seed,
            gen_radius,
            slack,
            coeffs: ball.flat_coeffs().to_vec(),
            sites: ball.flat_positions().to_vec(),
            positions,
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gen_radius(&self) -> f64 {
        self.gen_radius
    }

    pub fn slack(&self) -> f64 {
        self.slack
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self, i: usize) -> &[i64] {
        let d = self.dim();
        &self.coeffs[i * d..(i + 1) * d]
    }

    /// Lattice site `n` of entry `i`.
    pub fn site(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.sites[i * d..(i + 1) * d]
    }

    /// Displaced point `w = n + c + xi_n` of entry `i`.
    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.positions[i * d..(i + 1) * d]
    }

    pub fn flat_positions(&self) -> &[f64] {
        &self.positions
    }

    /// `xi_n = w - n - c` for entry `i`.
    pub fn displacement(&self, i: usize) -> Vec<f64> {
        let (w, n) = (self.position(i), self.site(i));
        (0..self.dim()).map(|j| w[j] - n[j] - self.offset[j]).collect()
    }

    /// Entry index of the site with the given coefficients.
    pub fn index_of(&self, coeffs: &[i64]) -> Option<usize> {
        crate::lattice::search_sorted(&self.coeffs, self.dim(), coeffs)
    }

    pub(crate) fn check_radius(&self, radius: f64) -> Result<()> {
        if radius > self.gen_radius || !(radius >= 0.0) {
            Err(Error::RadiusExceedsWindow { radius, gen_radius: self.gen_radius })
        } else {
            Ok(())
        }
    }

    /// The same realization with every length multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Realization> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter { name: "scale", reason: "must be finite and > 0".to_string() });
        }
        let noise = match self.noise.kind() {
            NoiseKind::Gaussian { a } => NoiseModel::gaussian(self.dim(), a * s * s)?,
            NoiseKind::UniformBox { h } => NoiseModel::uniform_box(self.dim(), h * s)?,
            NoiseKind::UniformCell { cell } => NoiseModel::uniform_cell(&cell.scaled(s))?,
            NoiseKind::Laplace { b } => NoiseModel::laplace(self.dim(), b * s)?,
            NoiseKind::PointMass { v } => NoiseModel::point_mass(v.iter().map(|x| x * s).collect())?,
            NoiseKind::Cauchy { gamma } => NoiseModel::cauchy(self.dim(), gamma * s)?,
        };
        Ok(Realization {
            lattice: self.lattice.scaled(s)?,
            noise,
            offset: self.offset.iter().map(|x| x * s).collect(),
            seed: self.seed,
            gen_radius: self.gen_radius * s,
            slack: self.slack * s,
            coeffs: self.coeffs.clone(),
            sites: self.sites.iter().map(|x| x * s).collect(),
            positions: self.positions.iter().map(|x| x * s).collect(),
        })
    }

    /// The points of `W ∩ B_R`, in entry order.
    pub fn window(&self, radius: f64) -> Result<Window> {
        self.check_radius(radius)?;
        let d = self.dim();
        let r2 = radius * radius;
        let mut positions = Vec::new();
        let mut entries = Vec::new();
        for i in 0..self.len() {
            let w = self.position(i);
            if norm_sq(w) <= r2 {
                positions.extend_from_slice(w);
                entries.push(i);
            }
        }
        Ok(Window { dim: d, radius, normalization: ball_volume(d, radius) / self.lattice.covolume(), positions, entries })
    }
}

/// Points of a realization inside a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    dim: usize,
    radius: f64,
    normalization: f64,
    positions: Vec<f64>,
    entries: Vec<usize>,
}

impl Window {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `m_d(B_R) / covolume`, the expected number of points.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn flat_positions(&self) -> &[f64] {
        &self.positions
    }

    /// Realization entry index of each window point.
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.position(i).to_vec()).collect()
    }
}

pub fn window(realization: &Realization, radius: f64) -> Result<Window> {
    realization.window(radius)
}

/// `(#{|n| <= R, |w_n| > R}, #{|n| > R, |w_n| <= R})`.
pub fn boundary_counts(realization: &Realization, radius: f64) -> Result<(u64, u64)> {
    realization.check_radius(radius)?;
    let r2 = radius * radius;
    let (mut escaped, mut entered) = (0u64, 0u64);
    for i in 0..realization.len() {
        let inside_site = norm_sq(realization.site(i)) <= r2;
        let inside_point = norm_sq(realization.position(i)) <= r2;
        match (inside_site, inside_point) {
            (true, false) => escaped += 1,
            (false, true) => entered += 1,
            _ => {}
        }
    }
    Ok((escaped, entered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_lattice;
    use crate::linalg::Matrix;
    use alloc::vec;

    fn z2() -> LatticeSpec {
        make_lattice(Matrix::identity(2)).unwrap()
    }

    #[test]
    fn zero_noise_reproduces_sites() {
        let noise = NoiseModel::point_mass(vec![0.0, 0.0]).unwrap();
        let r = realize(&z2(), &noise, &[0.0, 0.0], 1, 2.0).unwrap();
        let w = r.window(2.0).unwrap();
        assert_eq!(w.len(), 13);
        for i in 0..w.len() {
            let p = w.position(i);
            assert!(p.iter().all(|x| x.fract() == 0.0));
        }
        assert_eq!(boundary_counts(&r, 1.5).unwrap(), (0, 0));
    }

    #[test]
    fn same_seed_same_entries() {
        let noise = NoiseModel::gaussian(2, 0.1).unwrap();
        let a = realize(&z2(), &noise, &[0.0, 0.0], 7, 10.0).unwrap();
        let b = realize(&z2(), &noise, &[0.0, 0.0], 7, 10.0).unwrap();
        assert_eq!(a, b);
        let c = realize(&z2(), &noise, &[0.0, 0.0], 8, 10.0).unwrap();
        assert_ne!(a.flat_positions(), c.flat_positions());
    }

    #[test]
    fn larger_window_agrees_on_shared_sites() {
        let noise = NoiseModel::gaussian(2, 0.1).unwrap();
        let small = realize(&z2(), &noise, &[0.0, 0.0], 42, 50.0).unwrap();
        let big = realize(&z2(), &noise, &[0.0, 0.0], 42, 100.0).unwrap();
        for i in 0..small.len() {
            let j = big.index_of(small.coeffs(i)).unwrap();
            assert_eq!(small.position(i), big.position(j));
        }
        assert_eq!(small.window(40.0).unwrap().flat_positions(), big.window(40.0).unwrap().flat_positions());
    }

    #[test]
    fn radius_beyond_window_is_rejected() {
        let noise = NoiseModel::gaussian(2, 0.1).unwrap();
        let r = realize(&z2(), &noise, &[0.0, 0.0], 1, 5.0).unwrap();
        assert!(matches!(r.window(5.5), Err(Error::RadiusExceedsWindow { .. })));
        assert!(matches!(boundary_counts(&r, 6.0), Err(Error::RadiusExceedsWindow { .. })));
        assert!(r.window(0.0).unwrap().len() <= 1);
    }

    #[test]
    fn bounded_noise_escapes_only_from_the_rim() {
        let noise = NoiseModel::uniform_box(2, 0.4).unwrap();
        let r = realize(&z2(), &noise, &[0.0, 0.0], 3, 30.0).unwrap();
        for radius in [10.0, 17.5, 25.0] {
            let (escaped, _) = boundary_counts(&r, radius).unwrap();
            let rim = (0..r.len())
                .filter(|&i| {
                    let n = norm(r.site(i));
                    n > radius - 0.6 && n <= radius
                })
                .count() as u64;
            assert!(escaped <= rim, "{escaped} > {rim}");
        }
    }

    #[test]
    fn offset_enters_positions_and_slack() {
        let noise = NoiseModel::point_mass(vec![0.0, 0.0]).unwrap();
        let r = realize(&z2(), &noise, &[0.25, 0.0], 1, 4.0).unwrap();
        assert!((r.slack() - 1.25).abs() < 1e-15);
        let i = r.index_of(&[0, 0]).unwrap();
        assert_eq!(r.position(i), &[0.25, 0.0]);
        assert_eq!(r.displacement(i), vec![0.0, 0.0]);
    }
}
