use lattice_echo_core::estimator::centered_phases;
use lattice_echo_core::lattice::enumerate_ball;
use lattice_echo_core::{
    cross_correlation, hellinger_affinity, make_lattice, measure_fourier_coeff, periodogram_density, realize, Complex64,
    DensityMeasure, Matrix, NoiseModel,
};
use lattice_echo_core::spectral::hellinger_affinity_wrt;
use proptest::prelude::*;

fn densities(len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(0.0f64..5.0, len), prop::collection::vec(0.0f64..5.0, len))
}

fn sequence(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn affinity_obeys_cauchy_schwarz((f, g) in densities(64)) {
        let mu = DensityMeasure::new(1, 64, f).unwrap();
        let nu = DensityMeasure::new(1, 64, g).unwrap();
        let rho = hellinger_affinity(&mu, &nu).unwrap();
        prop_assert!(rho <= (mu.mass() * nu.mass()).sqrt() + 1e-12);
        prop_assert!((hellinger_affinity(&mu, &mu).unwrap() - mu.mass()).abs() < 1e-10);
    }

    #[test]
    fn affinity_ignores_the_reference((f, g) in densities(16 * 16), s in prop::collection::vec(0.1f64..10.0, 16 * 16)) {
        let mu = DensityMeasure::new(2, 16, f.clone()).unwrap();
        let nu = DensityMeasure::new(2, 16, g.clone()).unwrap();
        let sigma = DensityMeasure::new(2, 16, s.clone()).unwrap();
        let fs = DensityMeasure::new(2, 16, f.iter().zip(&s).map(|(a, b)| a / b).collect()).unwrap();
        let gs = DensityMeasure::new(2, 16, g.iter().zip(&s).map(|(a, b)| a / b).collect()).unwrap();
        let direct = hellinger_affinity(&mu, &nu).unwrap();
        let via = hellinger_affinity_wrt(&fs, &gs, &sigma).unwrap();
        prop_assert!((direct - via).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// |<u, v>| over the window is bounded by the affinity of the periodograms.
    #[test]
    fn correlation_bounded_by_affinity(u in sequence(101), v in sequence(101)) {
        let ball = enumerate_ball(&make_lattice(Matrix::identity(1)).unwrap(), 50.0, 1 << 20).unwrap();
        let pu = periodogram_density(&ball, &u, 256).unwrap();
        let pv = periodogram_density(&ball, &v, 256).unwrap();
        let c = cross_correlation(&ball, &u, &v).unwrap();
        prop_assert!(c.norm() <= hellinger_affinity(&pu, &pv).unwrap() + 0.01);
    }
}

#[test]
fn periodogram_coefficients_are_correlations() {
    let lat = make_lattice(Matrix::identity(1)).unwrap();
    let ball = enumerate_ball(&lat, 30.0, 1 << 20).unwrap();
    let u: Vec<Complex64> = (0..ball.len()).map(|i| Complex64::from_polar(1.0, 0.7 * (i * i) as f64)).collect();
    let p = periodogram_density(&ball, &u, 256).unwrap();
    for k in [0i64, 1, 3, -2] {
        let direct: Complex64 = (0..ball.len())
            .filter_map(|i| {
                let j = i as i64 + k;
                (0..ball.len() as i64).contains(&j).then(|| u[i] * u[j as usize].conj())
            })
            .sum::<Complex64>()
            / ball.site_normalization();
        let coeff = measure_fourier_coeff(&p, &lat.point(&[k]));
        assert!((coeff - direct).norm() < 1e-9, "k={k}: {coeff} vs {direct}");
    }
}

/// Centered phases of i.i.d. noise have a flat spectrum; the cell averages
/// are taken from a grid fine enough to resolve the window.
#[test]
fn centered_phase_spectrum_is_flat() {
    let lat = make_lattice(Matrix::identity(2)).unwrap();
    let r = realize(&lat, &NoiseModel::gaussian(2, 0.1).unwrap(), &[0.0, 0.0], 1, 200.0).unwrap();
    let (ball, a) = centered_phases(&r, &[1.0, 0.0], 200.0).unwrap();
    let fine = periodogram_density(&ball, &a, 1024).unwrap();
    let cells = fine.coarsen(16).unwrap();
    assert_eq!(cells.grid_n(), 64);
    let dev = cells.l1_deviation_from_mean();
    assert!(dev < 0.15, "{dev}");
    // Its level is the variance 1 - |phi|^2.
    let level = cells.mass();
    assert!((level - 0.8611).abs() < 0.02, "{level}");
}
