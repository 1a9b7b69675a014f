use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use tcilab::stats::stream_rng;
use tcilab::tensorize::{
    backward_coefficients, forward_coefficient, joint_law, marton_coupling, tensorized_constant,
    weight_constraint_lhs, weight_vector, SequentialModel,
};
use tcilab::verify::{check_tp, default_lambda_grid, tilt_family};
use tcilab::{
    kl_divergence, lipschitz_regularize, product_space, wasserstein_exact, DiscreteMeasure,
    FiniteMetricSpace,
};

fn row(rng: &mut rand_chacha::ChaCha8Rng, k: usize) -> Vec<f64> {
    use rand::Rng;
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

fn random_markov(seed: u64, k: usize, n: usize, base: &FiniteMetricSpace) -> SequentialModel {
    let mut rng = stream_rng(seed, 0);
    let init = row(&mut rng, k);
    let t = (0..k).map(|_| row(&mut rng, k)).collect();
    SequentialModel::markov(base.clone(), n, init, t).unwrap()
}

#[test]
fn iid_sequences_have_no_dependence() {
    let e = FiniteMetricSpace::trivial(3);
    let m = SequentialModel::iid(e, 3, vec![0.2, 0.3, 0.5]).unwrap();
    let prof = backward_coefficients(&m, 1.0).unwrap();
    assert_eq!(prof.r, 0.0);
    assert_eq!(forward_coefficient(&m).unwrap(), 0.0);
}

#[test]
fn history_and_markov_forms_agree() {
    let e = FiniteMetricSpace::trivial(2);
    let t = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
    let markov = SequentialModel::markov(e.clone(), 3, vec![0.5, 0.5], t.clone()).unwrap();
    let rows = vec![
        vec![vec![0.5, 0.5]],
        t.clone(),
        (0..4).map(|h| t[h % 2].clone()).collect(),
    ];
    let history = SequentialModel::from_rows(e, rows).unwrap();
    assert_eq!(joint_law(&markov).unwrap(), joint_law(&history).unwrap());
    let a = backward_coefficients(&history, 1.0).unwrap();
    assert_abs_diff_eq!(a.a[0], 0.3, epsilon = 1e-15);
    assert_eq!(a.a[1], 0.0);
    assert_abs_diff_eq!(backward_coefficients(&markov, 1.0).unwrap().r, 0.3, epsilon = 1e-15);
    assert_abs_diff_eq!(forward_coefficient(&markov).unwrap(), forward_coefficient(&history).unwrap(), epsilon = 1e-12);
}

#[test]
fn models_load_from_json() {
    let text = r#"{"space": {"points": ["a", "b"], "dist": [[0, 1], [1, 0]]},
                   "horizon": 4,
                   "markov": {"initial": [0.5, 0.5], "transition": [[0.9, 0.1], [0.2, 0.8]]}}"#;
    let m = SequentialModel::from_json(text).unwrap();
    assert_eq!(m.horizon(), 4);
    assert!(m.is_markov());
    assert!(SequentialModel::from_json(r#"{"space": {"points": ["a"], "dist": [[0]]}}"#).is_err());
}

#[test]
fn constants_are_monotone() {
    let mut last_r = 0.0;
    for r in [0.0, 0.2, 0.5, 0.9, 0.99] {
        let c = tensorized_constant(0.25, r, 5, 1.0).unwrap();
        assert!(c >= last_r);
        last_r = c;
    }
    let mut last_n = 0.0;
    for n in 1..20 {
        let c = tensorized_constant(0.25, 0.3, n, 1.5).unwrap();
        assert!(c >= last_n);
        last_n = c;
        assert_eq!(tensorized_constant(0.25, 0.3, n, 2.0).unwrap(), tensorized_constant(0.25, 0.3, 1, 2.0).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weight_vectors_satisfy_their_constraint(
        a in prop::collection::vec(0.0..2.0f64, 0..12),
        n in 1usize..15,
        delta in 0.05..0.95f64,
    ) {
        let z = weight_vector(&a, n, delta).unwrap();
        prop_assert!((z.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(z.iter().all(|x| *x > 0.0));
        for (lhs, zk) in weight_constraint_lhs(&z, &a).iter().zip(&z) {
            prop_assert!(*lhs <= delta * zk * (1.0 + 1e-12));
        }
    }

    #[test]
    fn coupling_is_valid_and_within_the_bound(seed in 0u64..10_000, k in 2usize..4, n in 1usize..4) {
        let base = FiniteMetricSpace::line(&(0..k).map(|i| i as f64 * 0.5).collect::<Vec<_>>()).unwrap();
        let p = random_markov(seed, k, n, &base);
        let q = random_markov(seed + 1_000_000, k, n, &base);
        let c = marton_coupling(&p, &q, 1.0).unwrap();
        let (jq, jp) = (joint_law(&q).unwrap(), joint_law(&p).unwrap());
        for (x, y) in c.q_marginal().iter().zip(jq.weights()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
        for (x, y) in c.p_marginal().iter().zip(jp.weights()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
        let prod = product_space(&base, n, 1.0).unwrap();
        let w = wasserstein_exact(&jq, &jp, &prod, 1.0).unwrap().0;
        prop_assert!(c.cost >= w - 1e-10);

        // every row of P passes T_1(C) against its own tilts at C = diam²/4
        let c_row = base.max_distance().powi(2) / 4.0;
        let prof = backward_coefficients(&p, 1.0).unwrap();
        let t = p.transition().unwrap();
        let rows_pass = (0..k).all(|x| {
            let mu = DiscreteMeasure::new(t[x].clone()).unwrap();
            let f = lipschitz_regularize(&base.points().iter().enumerate().map(|(i, _)| i as f64).collect::<Vec<_>>(), 1.0, &base).unwrap();
            let tilts = tilt_family(&mu, &f, &default_lambda_grid(f.lip_const())).unwrap();
            check_tp(&mu, &tilts, &base, 1.0, c_row).unwrap().pass
        });
        if prof.r < 1.0 && rows_pass {
            let bound = tensorized_constant(c_row, prof.r, n, 1.0).unwrap() * kl_divergence(&jq, &jp).sqrt();
            prop_assert!(c.cost <= bound + 1e-10, "{} > {bound}", c.cost);
        }
    }
}
