use mdsclt::cmds::{embed, select_dim, select_dim_from_eigenvalues, strain, sub_embed};
use mdsclt::linalg::double_center;
use mdsclt::points::{sample, DistributionSpec};
use mdsclt::SymmetricMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn triangle_sq() -> SymmetricMatrix {
    let d2 = [[0.0, 9.0, 16.0], [9.0, 0.0, 25.0], [16.0, 25.0, 0.0]];
    SymmetricMatrix::hollow_from_fn(3, |i, j| d2[i][j])
}

fn pair_dist(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (x.row(i) - x.row(j)).norm()
}

#[test]
fn triangle_is_reproduced() {
    let e = embed(&triangle_sq(), 2).unwrap();
    let x = &e.config;
    assert!((pair_dist(x, 0, 1) - 3.0).abs() < 1e-9);
    assert!((pair_dist(x, 0, 2) - 4.0).abs() < 1e-9);
    assert!((pair_dist(x, 1, 2) - 5.0).abs() < 1e-9);
    let b = double_center(&triangle_sq()).unwrap();
    assert!(strain(x, &b).unwrap() <= 1e-8 * b.frobenius_norm());
}

#[test]
fn two_points_sit_at_half_distance() {
    let c = 2.5;
    let e = embed(&SymmetricMatrix::hollow_from_fn(2, |_, _| c * c), 1).unwrap();
    let mut v = [e.config[(0, 0)], e.config[(1, 0)]];
    v.sort_by(f64::total_cmp);
    assert!((v[0] + c / 2.0).abs() < 1e-12 && (v[1] - c / 2.0).abs() < 1e-12);
}

#[test]
fn dimension_rule() {
    assert_eq!(select_dim_from_eigenvalues(&[150.0, 120.0, 80.0, 1.0], 1000), 2);
    let zero = select_dim(&SymmetricMatrix::zeros(10), 3).unwrap();
    assert_eq!(zero.d_hat, 0);
    let cloud = sample(&DistributionSpec::right_triangle_masses(), 1000, 11).unwrap();
    let sel = select_dim(&cloud.squared_distances(), 4).unwrap();
    assert_eq!(sel.d_hat, 2);
    assert!((sel.threshold - 100.0).abs() < 1e-9);
}

#[test]
fn sub_embedding() {
    let e = embed(&triangle_sq(), 2).unwrap();
    let same = sub_embed(&e, 2).unwrap();
    assert_eq!(same.config, e.config);
    let one = sub_embed(&e, 1).unwrap();
    let direct = embed(&triangle_sq(), 1).unwrap();
    assert!((one.config - direct.config).norm() < 1e-12);
    assert!(sub_embed(&e, 3).is_err());

    // Square: the two leading eigenvalues tie.
    let sq = [[0.0, 1.0, 2.0, 1.0], [1.0, 0.0, 1.0, 2.0], [2.0, 1.0, 0.0, 1.0], [1.0, 2.0, 1.0, 0.0]];
    let e = embed(&SymmetricMatrix::hollow_from_fn(4, |i, j| sq[i][j]), 2).unwrap();
    assert!(sub_embed(&e, 1).unwrap().flags.degenerate);
}

#[test]
fn deficient_spectrum_is_an_error_by_default() {
    // Two coincident points and one apart: rank one.
    let sq = SymmetricMatrix::hollow_from_fn(3, |i, j| if i == 0 && j == 1 { 0.0 } else { 4.0 });
    let err = embed(&sq, 2).unwrap_err();
    assert!(err.is_numerical(), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_configurations_round_trip(seed in any::<u64>(), n in 5usize..60, d in 1usize..4) {
        let spec = DistributionSpec::Gaussian {
            mean: vec![0.0; d],
            covariance: (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 + i as f64 } else { 0.0 }).collect()).collect(),
        };
        let cloud = sample(&spec, n.max(d + 2), seed).unwrap();
        let e = embed(&cloud.squared_distances(), d).unwrap();
        let x = &e.config;
        let dist = cloud.distances();
        for i in 0..cloud.n() {
            for j in 0..i {
                prop_assert!((pair_dist(x, i, j) - dist.get(i, j)).abs() < 1e-9);
            }
        }
        // Centered columns, orthogonal with squared norms equal to eigenvalues.
        let scale = x.norm();
        for c in 0..d {
            prop_assert!(x.column(c).sum().abs() <= 1e-8 * scale);
        }
        let g = x.transpose() * x;
        let tr = g.trace();
        for a in 0..d {
            prop_assert!((g[(a, a)] - e.eigenvalues[a]).abs() <= 1e-8 * tr);
            for b in 0..a {
                prop_assert!(g[(a, b)].abs() <= 1e-8 * tr);
            }
        }
    }
}
