use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use tcilab::dynamics::{
    chain_additive_mean, chain_functional_samples, coupling_decay, euler_maruyama,
    euler_maruyama_pair, inf_convolution, l1_contraction_estimate, noise_tail_condition,
    tail_vs_bound, BoundSpec, Centering, QuadraticForm, RandomMapSystem, SdeSpec, SimConfig,
};
use tcilab::tensorize::{backward_coefficients, SequentialModel};
use tcilab::FiniteMetricSpace;

fn cfg(seed: u64, n_paths: usize) -> SimConfig {
    SimConfig {
        dt: 0.01,
        horizon: 2.0,
        n_paths,
        seed,
        shared_noise: false,
    }
}

#[test]
fn ensembles_are_reproducible() {
    let sde = SdeSpec::ornstein_uhlenbeck(0.5, 1.0, 2).unwrap();
    let a = euler_maruyama(&sde, &[1.0, -1.0], &cfg(5, 40)).unwrap();
    let b = euler_maruyama(&sde, &[1.0, -1.0], &cfg(5, 40)).unwrap();
    assert_eq!(a, b);
    let c = euler_maruyama(&sde, &[1.0, -1.0], &cfg(6, 40)).unwrap();
    assert_ne!(a.paths, c.paths);
}

#[test]
fn shared_noise_pairs_reuse_increments() {
    let sde = SdeSpec::brownian(1).unwrap();
    let shared = SimConfig {
        shared_noise: true,
        ..cfg(3, 10)
    };
    let (a, b) = euler_maruyama_pair(&sde, &[0.0], &[2.0], &shared).unwrap();
    for (p, q) in a.paths.iter().zip(&b.paths) {
        for (x, y) in p.iter().zip(q) {
            assert_abs_diff_eq!(y - x, 2.0, epsilon = 1e-12);
        }
    }
    let (a, b) = euler_maruyama_pair(&sde, &[0.0], &[2.0], &cfg(3, 10)).unwrap();
    assert!(a.paths.iter().zip(&b.paths).any(|(p, q)| (q[50] - p[50] - 2.0).abs() > 1e-6));
}

#[test]
fn constant_diffusion_gap_is_identical_across_paths() {
    let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, -0.3, -0.5]);
    let sde = SdeSpec::linear(m, DMatrix::identity(2, 2) * 0.7).unwrap();
    let shared = SimConfig {
        shared_noise: true,
        ..cfg(8, 300)
    };
    let d = coupling_decay(&sde, &[1.0, 1.0], &[-1.0, 0.5], &shared).unwrap();
    assert!(d.pass);
    assert!(d.spread.iter().zip(&d.curve).all(|(s, c)| *s <= 1e-12 * (1.0 + c)));
}

#[test]
fn gaussian_noise_moment_matches_closed_form_in_two_dimensions() {
    let sys = RandomMapSystem::linear(DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.4]), 1.0).unwrap();
    let delta = 0.1;
    let t = noise_tail_condition(&sys, delta, &[vec![0.0, 0.0], vec![3.0, -1.0]], 200_000, 21).unwrap();
    let exact = 1.0 / (1.0 - 4.0 * delta);
    for p in &t.per_x {
        assert!((p.mean - exact).abs() <= 3.0 * p.std_err, "{} ± {} vs {exact}", p.mean, p.std_err);
    }
    assert!(t.sup.is_some());
}

#[test]
fn linear_contraction_matches_the_matrix() {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 0.3]);
    let sys = RandomMapSystem::linear(a.clone(), 1.0).unwrap();
    let svd = a.clone().svd(true, true);
    let (k, _) = svd.singular_values.argmax();
    let v = svd.v_t.as_ref().unwrap().row(k).transpose();
    let pairs = vec![
        (vec![0.0, 0.0], vec![v[0], v[1]]),
        (vec![1.0, 1.0], vec![2.0, 1.0]),
    ];
    let est = l1_contraction_estimate(&sys, &pairs, 60, 5, 2).unwrap();
    assert_abs_diff_eq!(est.r_hat, svd.singular_values[k], epsilon = 1e-12);
    // S_hat = max over the pairs of Σ_n |A^n u| / |u|
    let mut best = 0.0f64;
    for (x, y) in &pairs {
        let u = nalgebra::DVector::from_iterator(2, x.iter().zip(y).map(|(p, q)| q - p));
        let mut w = u.clone();
        let mut s = 0.0;
        for _ in 0..60 {
            w = &a * w;
            s += w.norm() / u.norm();
        }
        best = best.max(s);
    }
    assert_abs_diff_eq!(est.s_hat, best, epsilon = 1e-10);
    assert!(!est.truncated);
}

#[test]
fn chain_tails_respect_the_dependent_hoeffding_bound() {
    let base = FiniteMetricSpace::trivial(2);
    let n = 30;
    let model = SequentialModel::markov(base, n, vec![0.5, 0.5], vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
    let r = backward_coefficients(&model, 1.0).unwrap().r;
    let g = [0.0, 1.0];
    let mean = chain_additive_mean(&model, &g).unwrap();
    let samples = chain_functional_samples(&model, &|p: &[usize]| p.iter().map(|&x| g[x]).sum(), 50_000, 4).unwrap();
    let spec = BoundSpec::DependentHoeffding { c: 0.25, r, n };
    let grid: Vec<f64> = (1..=8).map(|k| k as f64).collect();
    let table = tail_vs_bound(&samples, Centering::Exact(mean), &grid, 1.0, &spec).unwrap();
    assert!(table.pass);
    assert!(table.rows.iter().all(|row| row.empirical <= row.bound));
    let csv = table.to_csv();
    assert_eq!(csv.lines().count(), grid.len() + 1);
}

#[test]
fn quadratic_inf_convolution_matches_the_minimizer() {
    // f(y) = ½|y|² + ⟨c, y⟩: inf_y f(y) + ½|x − y|² at y = (x − c)/2
    let c = nalgebra::DVector::from_vec(vec![1.0, -2.0]);
    let f = QuadraticForm {
        f0: 0.5,
        c: c.clone(),
        m: Some(DMatrix::identity(2, 2)),
    };
    let x = nalgebra::DVector::from_vec(vec![3.0, 1.0]);
    let y = (&x - &c) / 2.0;
    let expected = f.eval(&y) + 0.5 * (&x - &y).norm_squared();
    assert_abs_diff_eq!(inf_convolution(&f, &x).unwrap(), expected, epsilon = 1e-12);
}
