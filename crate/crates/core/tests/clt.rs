use approx::assert_relative_eq;
use mdsclt::clt::{
    align, bound_checks, decompose, growth_check, hetero_theory_cov, theory_cov,
};
use mdsclt::linalg::double_center;
use mdsclt::noise::NoiseSpec;
use mdsclt::points::{moments, sample, DistributionSpec};
use mdsclt::rng::{derive_seed, CounterRng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use serde_json::json;

fn triangle() -> DistributionSpec {
    DistributionSpec::right_triangle_masses()
}

fn rotation(theta: f64, reflect: bool) -> DMatrix<f64> {
    let s = if reflect { -1.0 } else { 1.0 };
    DMatrix::from_row_slice(2, 2, &[theta.cos(), -s * theta.sin(), theta.sin(), s * theta.cos()])
}

fn gaussian2() -> DistributionSpec {
    DistributionSpec::Gaussian {
        mean: vec![0.0, 0.0],
        covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    }
}

#[test]
fn homogeneous_theory() {
    let noise = NoiseSpec::new("model1", json!({"law": {"gaussian": {"sigma": 2.0}}})).build().unwrap();
    let t = theory_cov(&gaussian2(), noise.as_ref()).unwrap();
    assert!(t.z_free);
    assert_relative_eq!(t.per_class[0].sigma, DMatrix::identity(2, 2), epsilon = 1e-12);

    let silent = NoiseSpec::new("model1", json!({"law": {"gaussian": {"sigma": 0.0}}})).build().unwrap();
    let t = theory_cov(&gaussian2(), silent.as_ref()).unwrap();
    assert_eq!(t.per_class[0].sigma, DMatrix::zeros(2, 2));
}

#[test]
fn masked_theory_has_shrunk_center() {
    let noise = NoiseSpec::new("model3", json!({"q": 0.49})).build().unwrap();
    let t = theory_cov(&triangle(), noise.as_ref()).unwrap();
    assert_relative_eq!(t.center_scale, 0.7, epsilon = 1e-12);
    assert_eq!(t.per_class.len(), 3);
}

#[test]
fn hetero_theory_reductions() {
    let n = 101;
    let sigma = 1.5;
    let xi = moments(&triangle()).unwrap().xi;
    let h = hetero_theory_cov(&triangle(), &|_, _| sigma, 7, n).unwrap();
    let mean_sigma2 = sigma * sigma * (n - 1) as f64 / n as f64;
    assert_relative_eq!(h.sigma_i, &xi * mean_sigma2, max_relative = 1e-12);
    let noise = NoiseSpec::new("model1", json!({"law": {"gaussian": {"sigma": sigma}}})).build().unwrap();
    let homo = &theory_cov(&triangle(), noise.as_ref()).unwrap().per_class[0].sigma;
    assert_relative_eq!(h.implied, homo, max_relative = 0.01);

    let zero = hetero_theory_cov(&triangle(), &|_, _| 0.0, 0, n).unwrap();
    assert_eq!(zero.sigma_i, DMatrix::zeros(2, 2));
    assert!(zero.whitening.is_none());

    // Rule symmetric in its arguments: sigma = c when both indices are even.
    let c = 2.0;
    let rule = |i: usize, j: usize| if i.is_multiple_of(2) && j.is_multiple_of(2) { c } else { 0.0 };
    let i = 4;
    let even_partners = (0..n).filter(|&j| j.is_multiple_of(2) && j != i).count();
    let h = hetero_theory_cov(&triangle(), &rule, i, n).unwrap();
    assert_relative_eq!(h.sigma_i, &xi * (even_partners as f64 / n as f64 * c * c), max_relative = 1e-12);
}

#[test]
fn alignment_exact_cases() {
    let mut rng = CounterRng::new(354);
    let src = DMatrix::from_fn(50, 2, |_, _| rng.next_draw().normal());
    let id = align(&src, &src).unwrap();
    assert_relative_eq!(id.rotation, DMatrix::identity(2, 2), epsilon = 1e-10);
    for (theta, reflect) in [(0.3, false), (2.0, true), (-1.1, false)] {
        let r = rotation(theta, reflect);
        let w = align(&src, &(&src * &r)).unwrap();
        assert_relative_eq!(w.rotation, r, epsilon = 1e-9);
    }
}

#[test]
fn alignment_beats_grid_search() {
    let mut rng = CounterRng::new(362);
    let src = DMatrix::from_fn(50, 2, |_, _| rng.next_draw().normal());
    let r = rotation(0.77, true);
    let target = &src * &r + DMatrix::from_fn(50, 2, |_, _| 0.01 * rng.next_draw().normal());
    let w = align(&src, &target).unwrap().rotation;
    let loss = |m: &DMatrix<f64>| (&src * m - &target).norm();
    let mut best = f64::INFINITY;
    for k in 0..20_000 {
        let theta = k as f64 * std::f64::consts::TAU / 20_000.0;
        for reflect in [false, true] {
            best = best.min(loss(&rotation(theta, reflect)));
        }
    }
    assert!(loss(&w) <= best + 1e-9);
    assert!((&w - &r).norm() < 1e-2);
}

#[test]
fn decomposition_of_identical_matrices_vanishes() {
    let cloud = sample(&triangle(), 60, 1).unwrap();
    let b = double_center(&cloud.squared_distances()).unwrap();
    let rep = decompose(&b, &b, 2).unwrap();
    for row in &rep.term_rows {
        assert!(row.iter().all(|v| v.abs() < 1e-9), "{row:?}");
    }
    assert!(rep.identity_residual < 1e-9);
}

#[test]
fn decomposition_remainder_shrinks() {
    let noise = NoiseSpec::new("model2", json!({"law": {"uniform": {"a": 4.0}}})).build().unwrap();
    let median_remainder = |n: usize| {
        let mut acc = 0.0;
        for r in 0..5u64 {
            let cloud = sample(&triangle(), n, derive_seed(&[n as u64, r, 0])).unwrap();
            let p = noise.perturb(&cloud.distances(), derive_seed(&[n as u64, r, 1])).unwrap();
            let b = double_center(&cloud.squared_distances()).unwrap();
            let b_hat = double_center(&p.delta_sq).unwrap();
            acc += decompose(&b, &b_hat, 2).unwrap().summary().median_remainder;
        }
        acc / 5.0
    };
    let (small, large) = (median_remainder(100), median_remainder(1000));
    assert!(large < small, "{small} -> {large}");
}

#[test]
fn noiseless_bounds() {
    let silent = NoiseSpec::new("model2", json!({"law": {"uniform": {"a": 0.0}}})).build().unwrap();
    let table = bound_checks(&triangle(), silent.as_ref(), &[100, 200, 400], 3, 2, 1).unwrap();
    for row in &table.rows {
        assert_eq!(row.medians.perturbation_norm, 0.0);
        assert!(row.medians.eigenvalue_growth > 0.0);
    }
    assert!(table.spread("eigenvalue_growth").unwrap().variation < 1.1);
}

#[test]
fn growth_check_cases() {
    assert!(!growth_check(&mdsclt::SymmetricMatrix::zeros(5)).ok);
    let big = sample(&triangle(), 1000, 2).unwrap();
    assert!(growth_check(&big.distances()).ok);
    let tiny = sample(
        &DistributionSpec::UniformBox { lo: vec![0.0, 0.0], hi: vec![0.5, 0.5] },
        4,
        3,
    )
    .unwrap();
    assert!(!growth_check(&tiny.distances()).ok);
    assert!(mdsclt::cmds::embed(&tiny.squared_distances(), 2).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn alignment_is_orthogonal_and_rotation_equivariant(seed in any::<u64>(), theta in 0.0..6.28f64) {
        let mut rng = CounterRng::new(seed);
        let src = DMatrix::from_fn(30, 2, |_, _| rng.next_draw().normal());
        let tgt = DMatrix::from_fn(30, 2, |_, _| rng.next_draw().normal());
        let w = align(&src, &tgt).unwrap().rotation;
        prop_assert!((w.transpose() * &w - DMatrix::<f64>::identity(2, 2)).norm() < 1e-10);
        // Rotating the source is undone by the fitted map.
        let r = rotation(theta, false);
        let w2 = align(&(&src * &r), &tgt).unwrap().rotation;
        prop_assert!((&r * &w2 - &w).norm() < 1e-8);
    }

    #[test]
    fn six_term_identity_holds(seed in any::<u64>(), n in 8usize..50, sigma in 0.01..1.0f64) {
        let cloud = sample(&triangle(), n, seed).unwrap();
        let noise = NoiseSpec::new("model1", json!({"law": {"gaussian": {"sigma": sigma}}})).build().unwrap();
        let p = noise.perturb(&cloud.distances(), seed ^ 1).unwrap();
        let b = double_center(&cloud.squared_distances()).unwrap();
        let b_hat = double_center(&p.delta_sq).unwrap();
        if let Ok(rep) = decompose(&b, &b_hat, 2) {
            prop_assert!(rep.relative_residual <= 1e-7);
        }
    }
}
