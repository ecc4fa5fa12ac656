//! Simulation and recovery engine for randomly perturbed lattices.
//!
//! The point process is `W = { n + c + xi_n : n in L }` with i.i.d. noise
//! `xi_n`. Its normalized exponential sum
//!
//! ```text
//! M_R(lambda) = covol(L) / |B_R| * sum_{w in W, |w| <= R} conj(e(<w, lambda>)),   e(t) = exp(2 pi i t)
//! ```
//!
//! concentrates on the dual lattice, which is what [`recovery`] exploits to
//! reconstruct `L` (and the offset `c`) from one realization.
//!
//! The crate is `no_std` with `alloc`. All transcendental functions go
//! through `libm` so results are bit-identical across platforms, and all
//! long reductions use a fixed blocked tree order so they do not depend on
//! how work is split across an [`Executor`].

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimator;
pub mod exec;
pub mod lattice;
pub mod linalg;
pub mod noise;
pub mod recovery;
pub mod rng;
pub mod sampler;
pub mod spectral;
pub mod sum;

pub use error::{Error, Result};
pub use estimator::{
    cross_correlation, exp_sum, exp_sum_grid, radius_sweep, wiener_correlation, CorrelationEstimate,
    ExpSumEvaluator, ExpSumField, FrequencySet, Provenance, RegularGrid,
};
pub use exec::{Executor, Sequential};
pub use lattice::{
    ball_volume, dual_lattice, gauss_discrepancy, lattices_equivalent, make_lattice, points_in_ball,
    reduce_basis, BallPoints, LatticePoint, LatticeSpec,
};
pub use linalg::Matrix;
pub use noise::{char_fn, sample_noise, tail_quantile, NoiseKind, NoiseModel};
pub use num_complex::Complex64;
pub use recovery::{
    estimate_dispersion, estimate_offset, extract_dual_basis, recover_lattice, refine_peak, threshold_set,
    DispersionFit, Peak, RecoveryParams, RecoveryReport, RefineOptions, ThresholdHit,
};
pub use rng::NoiseKey;
pub use sampler::{boundary_counts, realize, window, Realization, Window};
pub use spectral::{hellinger_affinity, measure_fourier_coeff, periodogram_density, DensityMeasure};
