use lattice_echo_core::{
    exp_sum, exp_sum_grid, lattices_equivalent, make_lattice, realize, recover_lattice, threshold_set, FrequencySet,
    LatticeSpec, Matrix, NoiseModel, RecoveryParams, RecoveryReport, RegularGrid, Sequential,
};

fn l2() -> LatticeSpec {
    make_lattice(Matrix::from_rows(&[[2.0, 0.5], [0.0, 0.5]]).unwrap()).unwrap()
}

/// A scaled-down pipeline that still sees the first few shells.
fn small_params() -> RecoveryParams {
    RecoveryParams { r_detect: 40.0, r_verify: 80.0, box_lo: -1.6, box_hi: 1.6, beta: 0.03, ..RecoveryParams::default() }
}

fn check_report(rep: &RecoveryReport) {
    let lam: Vec<&Vec<f64>> = rep.verified.iter().map(|p| &p.lambda).collect();
    assert!(lam.iter().any(|l| l.iter().all(|&x| x == 0.0)), "origin missing");
    for l in &lam {
        let neg: Vec<f64> = l.iter().map(|x| -x).collect();
        assert!(lam.iter().any(|m| m.iter().zip(&neg).all(|(a, b)| (a - b).abs() < 1e-12)), "{l:?} without its negative");
    }
    if let (Some(dual), Some(primal)) = (&rep.dual_basis, &rep.primal_basis) {
        let gram = dual.transpose().mul(primal);
        for (i, row) in gram.rows().iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                assert!((g - g.round()).abs() < 1e-6, "gram[{i}][{j}] = {g}");
            }
        }
        assert!((gram.det().abs() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn small_recovery_is_consistent_and_deterministic() {
    let noise = NoiseModel::gaussian(2, 0.1).unwrap();
    for lat in [make_lattice(Matrix::identity(2)).unwrap(), l2()] {
        let r = realize(&lat, &noise, &[0.1, 0.2], 3, 80.0).unwrap();
        let a = recover_lattice(&r, &small_params(), &Sequential).unwrap();
        check_report(&a);
        let primal = make_lattice(a.primal_basis.clone().unwrap()).unwrap();
        assert!(lattices_equivalent(&primal, &lat, 1e-3).unwrap());
        let b = recover_lattice(&r, &small_params(), &Sequential).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn recovery_scales_with_the_realization() {
    let noise = NoiseModel::gaussian(2, 0.1).unwrap();
    let r = realize(&l2(), &noise, &[0.0, 0.0], 5, 80.0).unwrap();
    let base = recover_lattice(&r, &small_params(), &Sequential).unwrap();
    let s = 2.0;
    let p = small_params();
    let scaled_params = RecoveryParams {
        r_detect: p.r_detect * s,
        r_verify: p.r_verify * s,
        box_lo: p.box_lo / s,
        box_hi: p.box_hi / s,
        ..p
    };
    let big = recover_lattice(&r.scaled(s).unwrap(), &scaled_params, &Sequential).unwrap();
    check_report(&big);
    let expected = make_lattice(base.primal_basis.unwrap().scaled(s)).unwrap();
    let got = make_lattice(big.primal_basis.unwrap()).unwrap();
    assert!(lattices_equivalent(&expected, &got, 1e-6).unwrap());
    assert_eq!(base.verified.len(), big.verified.len());
}

#[test]
fn origin_clears_any_threshold() {
    for (lat, seed) in [(make_lattice(Matrix::identity(2)).unwrap(), 1), (l2(), 2)] {
        let r = realize(&lat, &NoiseModel::laplace(2, 0.3).unwrap(), &[0.4, 0.0], seed, 40.0).unwrap();
        assert!(exp_sum(&r, 40.0, &[0.0, 0.0]).unwrap().re > 0.9);
    }
}

fn threshold_scan(noise: NoiseModel) -> Vec<(Vec<f64>, f64)> {
    let lat = make_lattice(Matrix::identity(2)).unwrap();
    let r = realize(&lat, &noise, &[0.0, 0.0], 1, 100.0).unwrap();
    // The inner 3x3 block of the dual lattice, at the stated resolution.
    let grid = RegularGrid::integer_box(2, -1.5, 1.5, 1.0 / 400.0).unwrap();
    let field = exp_sum_grid(&r, 100.0, &FrequencySet::Regular(grid), &Sequential).unwrap();
    threshold_set(&field, 0.007).into_iter().map(|h| (h.lambda, h.value.re)).collect()
}

fn near_dual(l: &[f64], within: f64) -> Option<[i64; 2]> {
    let k = [l[0].round() as i64, l[1].round() as i64];
    ((l[0] - k[0] as f64).abs() <= within && (l[1] - k[1] as f64).abs() <= within).then_some(k)
}

#[test]
fn threshold_set_lands_on_dual_points() {
    let spacing = 1.0 / 400.0;
    let hits = threshold_scan(NoiseModel::gaussian(2, 0.1).unwrap());
    for k in [[0i64, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]] {
        assert!(hits.iter().any(|(l, _)| near_dual(l, spacing) == Some(k)), "no cluster at {k:?}");
    }
    // Everything strong is one of them or a ring of its window kernel,
    // which reaches a few multiples of 1/R; the rest is the noise floor.
    for (l, v) in &hits {
        if *v > 0.05 {
            assert!(near_dual(l, 6.0 / 100.0).is_some(), "{l:?} {v}");
        }
    }
}

#[test]
fn cloaked_threshold_set_avoids_dual_points() {
    let spacing = 1.0 / 400.0;
    let hits = threshold_scan(NoiseModel::uniform_cell(&Matrix::identity(2)).unwrap());
    for (l, v) in &hits {
        if let Some(k) = near_dual(l, spacing) {
            assert_eq!(k, [0, 0], "cluster at {l:?} ({v})");
        }
    }
}
