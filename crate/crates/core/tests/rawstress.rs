use mdsclt::clt::align;
use mdsclt::noise::NoiseSpec;
use mdsclt::points::{sample, DistributionSpec};
use mdsclt::rawstress::{minimize_stress, raw_stress, StressInit, StressOptions};
use mdsclt::rng::CounterRng;
use mdsclt::SymmetricMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use serde_json::json;

fn oracle(config: &DMatrix<f64>, delta: &SymmetricMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..config.nrows() {
        for j in (i + 1)..config.nrows() {
            let d = (config.row(i) - config.row(j)).norm();
            s += (delta.get(i, j) - d).powi(2);
        }
    }
    s
}

#[test]
fn stress_examples() {
    let cloud = sample(&DistributionSpec::right_triangle_masses(), 10, 1).unwrap();
    assert_eq!(raw_stress(&cloud.points, &cloud.distances()).unwrap(), 0.0);

    let pts = DMatrix::from_row_slice(2, 1, &[0.0, 3.0]);
    let delta = SymmetricMatrix::hollow_from_fn(2, |_, _| 5.0);
    assert_eq!(raw_stress(&pts, &delta).unwrap(), 4.0);

    let mut rng = CounterRng::new(438);
    let pts = DMatrix::from_fn(5, 2, |_, _| rng.next_draw().normal());
    let delta = SymmetricMatrix::hollow_from_fn(5, |_, _| rng.next_draw().uniform(0) * 3.0);
    let got = raw_stress(&pts, &delta).unwrap();
    assert!((got - oracle(&pts, &delta)).abs() <= 1e-12 * got.max(1.0));
}

#[test]
fn exact_input_reaches_zero() {
    let cloud = sample(&DistributionSpec::right_triangle_masses(), 80, 2).unwrap();
    let delta = cloud.distances();
    let total: f64 = delta.as_matrix().iter().map(|v| v * v).sum::<f64>() / 2.0;
    let st = minimize_stress(&delta, 2, &StressOptions::default()).unwrap();
    assert!(st.stress <= 1e-10 * total, "{} vs {}", st.stress, total);
}

#[test]
fn class_means_near_truth_at_moderate_n() {
    let spec = DistributionSpec::right_triangle_masses();
    let noise = NoiseSpec::new("model2", json!({"law": {"uniform": {"a": 4.0}}})).build().unwrap();
    let n = 500;
    let reps = 3;
    let locs = spec.locations().unwrap().to_vec();
    let mut sums = vec![DVector::<f64>::zeros(2); 3];
    let mut counts = [0usize; 3];
    for r in 0..reps {
        let cloud = sample(&spec, n, 100 + r).unwrap();
        let p = noise.perturb(&cloud.distances(), 200 + r).unwrap();
        let st = minimize_stress(p.delta.as_ref().unwrap(), 2, &StressOptions::default()).unwrap();
        assert!(st.max_relative_increase() <= 1e-12);
        let target = cloud.centered();
        let w = align(&st.config, &target).unwrap().rotation;
        let aligned = &st.config * w;
        for (i, &l) in cloud.labels.as_ref().unwrap().iter().enumerate() {
            sums[l] += aligned.row(i).transpose();
            counts[l] += 1;
        }
    }
    for k in 0..3 {
        let mean = &sums[k] / counts[k] as f64;
        let truth = DVector::from_column_slice(&locs[k]);
        assert!((mean - truth).norm() < 0.5);
    }
}

#[test]
fn options_reject_unknown_fields() {
    assert!(serde_json::from_value::<StressOptions>(json!({"max_iter": 10, "bogus": 1})).is_err());
    let o: StressOptions = serde_json::from_value(json!({"init": {"random": {"seed": 3}}})).unwrap();
    assert_eq!(o.init, StressInit::Random { seed: 3 });
    assert_eq!(o.max_iter, 500);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stress_never_increases(seed in any::<u64>(), n in 4usize..25, shift in -1.0..2.0f64, random_init in any::<bool>()) {
        let mut rng = CounterRng::new(seed);
        let delta = SymmetricMatrix::hollow_from_fn(n, |_, _| rng.next_draw().uniform(0) * 4.0 + shift);
        let opts = StressOptions {
            init: if random_init { StressInit::Random { seed } } else { StressInit::Cmds },
            max_iter: 100,
            ..Default::default()
        };
        let st = minimize_stress(&delta, 2, &opts).unwrap();
        for w in st.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "{} -> {}", w[0], w[1]);
        }
        prop_assert!((st.stress - oracle(&st.config, &delta)).abs() <= 1e-9 * st.stress.max(1.0));
    }
}
