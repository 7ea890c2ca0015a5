use approx::assert_relative_eq;
use mdsclt::clt::theory_cov;
use mdsclt::noise::NoiseSpec;
use mdsclt::points::{class_counts, moments, sample, sigma_tilde, DistributionSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;
use serde_json::json;

fn triangle() -> DistributionSpec {
    DistributionSpec::right_triangle_masses()
}

fn counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for &l in labels {
        c[l] += 1;
    }
    c
}

#[test]
fn mixture_counts_follow_weights() {
    let cloud = sample(&triangle(), 1000, 1).unwrap();
    assert_eq!(counts(cloud.labels.as_ref().unwrap(), 3), vec![200, 300, 500]);
}

#[test]
fn sampling_is_deterministic() {
    let spec = DistributionSpec::Gaussian {
        mean: vec![0.0, 0.0],
        covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    };
    let a = sample(&spec, 10, 42).unwrap();
    let b = sample(&spec, 10, 42).unwrap();
    assert_eq!(a.points, b.points);
    let c = sample(&spec, 10, 43).unwrap();
    assert_ne!(a.points, c.points);
}

#[test]
fn single_location_mixture() {
    let spec = DistributionSpec::PointMassMixture {
        locations: vec![vec![1.5, -2.0]],
        weights: vec![1.0],
    };
    let cloud = sample(&spec, 17, 3).unwrap();
    for i in 0..17 {
        assert_eq!(cloud.points.row(i).iter().copied().collect::<Vec<_>>(), vec![1.5, -2.0]);
    }
}

#[test]
fn gaussian_moments_are_parameters() {
    let cov = vec![vec![2.0, 0.3], vec![0.3, 1.0]];
    let spec = DistributionSpec::Gaussian {
        mean: vec![1.0, -1.0],
        covariance: cov.clone(),
    };
    let m = moments(&spec).unwrap();
    assert_eq!(m.mu.as_slice(), &[1.0, -1.0]);
    assert_eq!(m.xi, DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]));
}

#[test]
fn symmetric_two_point_moments() {
    let spec = DistributionSpec::PointMassMixture {
        locations: vec![vec![-1.0], vec![1.0]],
        weights: vec![0.5, 0.5],
    };
    let m = moments(&spec).unwrap();
    assert_relative_eq!(m.mu[0], 0.0);
    assert_relative_eq!(m.xi[(0, 0)], 1.0);
}

#[test]
fn triangle_moments_match_monte_carlo() {
    let exact = moments(&triangle()).unwrap().xi;
    // Independent oracle: categorical draws via inverse CDF.
    let locs = triangle().locations().unwrap().to_vec();
    let cdf = [0.2, 0.5, 1.0];
    let mut rng = mdsclt::rng::CounterRng::new(150);
    let m = 1_000_000;
    let (mut s, mut ss) = ([0.0; 2], [[0.0; 2]; 2]);
    for _ in 0..m {
        let u = rng.next_draw().uniform(0);
        let k = cdf.iter().position(|&c| u < c).unwrap();
        let p = &locs[k];
        for a in 0..2 {
            s[a] += p[a];
            for b in 0..2 {
                ss[a][b] += p[a] * p[b];
            }
        }
    }
    for a in 0..2 {
        for b in 0..2 {
            let cov = ss[a][b] / m as f64 - s[a] * s[b] / (m as f64).powi(2);
            let scale = exact.norm();
            assert!((cov - exact[(a, b)]).abs() <= 0.005 * scale, "entry ({a},{b}): {cov} vs {}", exact[(a, b)]);
        }
    }
}

#[test]
fn sigma_tilde_degenerate_weights_vanish() {
    let z = triangle().locations().unwrap()[0].clone();
    let full = NoiseSpec::new("model3", json!({"q": 1.0})).build().unwrap();
    let st = sigma_tilde(&triangle(), &z, full.as_ref(), 1000, 1).unwrap();
    assert_eq!(st.matrix, DMatrix::zeros(2, 2));

    let silent = NoiseSpec::new("model2", json!({"law": {"uniform": {"a": 0.0}}})).build().unwrap();
    let st = sigma_tilde(&triangle(), &z, silent.as_ref(), 1000, 1).unwrap();
    assert_eq!(st.matrix, DMatrix::zeros(2, 2));
}

#[test]
fn reference_class_one_covariance_up_to_rotation() {
    let noise = NoiseSpec::new("model2", json!({"law": {"uniform": {"a": 4.0}}})).build().unwrap();
    let theory = theory_cov(&triangle(), noise.as_ref()).unwrap();
    let sigma = &theory.per_class[0].sigma;
    // Rotation-invariant comparison: trace and determinant.
    let reference = DMatrix::from_row_slice(2, 2, &[13.56, -3.06, -3.06, 22.65]);
    assert_relative_eq!(sigma.trace(), reference.trace(), max_relative = 0.005);
    assert_relative_eq!(sigma.determinant(), reference.determinant(), max_relative = 0.01);
}

#[test]
fn invalid_specs_are_rejected() {
    let bad_weights = DistributionSpec::PointMassMixture {
        locations: vec![vec![0.0], vec![1.0]],
        weights: vec![0.5, 0.6],
    };
    assert!(bad_weights.validate().is_err());
    let bad_cov = DistributionSpec::Gaussian {
        mean: vec![0.0, 0.0],
        covariance: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
    };
    assert!(bad_cov.validate().is_err());
    assert!(sample(&triangle(), 3, 0).is_err());
    let collinear = DistributionSpec::PointMassMixture {
        locations: vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        weights: vec![0.5, 0.5],
    };
    assert!(moments(&collinear).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn class_counts_sum_and_track_weights(raw in proptest::collection::vec(0.01..1.0f64, 1..6), n in 1usize..2000) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let c = class_counts(&weights, n);
        prop_assert_eq!(c.iter().sum::<usize>(), n);
        for (k, w) in c.iter().zip(&weights) {
            prop_assert!((*k as f64 - w * n as f64).abs() < 1.0);
        }
    }

    #[test]
    fn samples_are_finite_and_labels_valid(seed in any::<u64>(), n in 4usize..200) {
        let cloud = sample(&triangle(), n, seed).unwrap();
        prop_assert!(cloud.points.iter().all(|v| v.is_finite()));
        prop_assert!(cloud.labels.unwrap().iter().all(|&l| l < 3));
        let box_spec = DistributionSpec::UniformBox { lo: vec![-1.0, 0.0], hi: vec![1.0, 2.0] };
        let cloud = sample(&box_spec, n, seed).unwrap();
        for i in 0..n {
            prop_assert!((-1.0..1.0).contains(&cloud.points[(i, 0)]));
            prop_assert!((0.0..2.0).contains(&cloud.points[(i, 1)]));
        }
    }
}
