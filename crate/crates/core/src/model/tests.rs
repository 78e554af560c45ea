use super::*;
use crate::dirichlet::{sample, DirichletParams};
use crate::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(n: usize, k: usize, m: usize, j: usize, seed: u64) -> DbwqsData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Matrix::zeros(n, k);
    for i in 0..n {
        let draw = sample(&DirichletParams::new(vec![2.0; k]).unwrap(), &mut rng).unwrap();
        y.row_mut(i).copy_from_slice(draw.values());
    }
    let scores: Vec<u32> = (0..n * m).map(|_| rng.random_range(0..4)).collect();
    let q = QuantileMatrix::new(n, m, scores, 4).unwrap();
    let x = Matrix::from_vec(n, j, (0..n * j).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap();
    DbwqsData::new(CompositionMatrix::new(y).unwrap(), q, x).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn mixture_index_examples() {
    let w = SimplexVector::new(vec![0.8, 0.0 + 1e-300, 0.2 - 1e-300]).unwrap();
    assert!((mixture_index(&[2, 3, 1], &w).unwrap() - 1.8).abs() < 1e-12);
    let uniform = SimplexVector::uniform(4);
    assert!((mixture_index(&[2, 2, 2, 2], &uniform).unwrap() - 2.0).abs() < 1e-12);
    assert!(mixture_index(&[1, 2], &uniform).is_err());
}

#[test]
fn degenerate_weight_picks_first_score() {
    // w = (1, 0, 0) is on the closed simplex; compute directly
    let q = [3u32, 1, 0];
    let s: f64 = q.iter().zip([1.0, 0.0, 0.0]).map(|(&a, b)| a as f64 * b).sum();
    assert_eq!(s, 3.0);
}

#[test]
fn compute_means_examples() {
    let x = Matrix::zeros(2, 0);
    let mu = compute_means(&[0.5, 2.0], &x, &[0.0; 4], &Matrix::zeros(4, 0)).unwrap();
    for i in 0..2 {
        for c in 0..4 {
            assert!((mu.get(i, c) - 0.25).abs() < 1e-15);
        }
    }
    let mu = compute_means(&[1.0], &Matrix::zeros(1, 0), &[0.0, 0.0, -0.9], &Matrix::zeros(3, 0)).unwrap();
    let expect = [0.41557, 0.41557, 0.16886];
    let denom = 2.0 + (-0.9f64).exp();
    let exact = [1.0 / denom, 1.0 / denom, (-0.9f64).exp() / denom];
    for c in 0..3 {
        assert!((mu.get(0, c) - expect[c]).abs() < 1e-4, "{}", mu.get(0, c));
        assert!((mu.get(0, c) - exact[c]).abs() < 1e-15);
    }
    let sum: f64 = mu.row(0).iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn softmax_is_shift_invariant() {
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    softmax_into(&[0.3, -1.2, 2.0], &mut a);
    softmax_into(&[700.3, 698.8, 702.0], &mut b);
    for c in 0..3 {
        assert!((a[c] - b[c]).abs() < 1e-12);
    }
}

#[test]
fn compute_means_rejects_bad_reference() {
    let x = Matrix::zeros(1, 0);
    assert!(compute_means(&[1.0], &x, &[0.1, 0.0], &Matrix::zeros(2, 0)).is_err());
    assert!(compute_means(&[f64::INFINITY], &x, &[0.0, 1.0], &Matrix::zeros(2, 0)).is_err());
}

#[test]
fn empty_data_gives_log_prior_only() {
    let full = random_data(12, 3, 2, 1, 1);
    let empty = DbwqsData::new(
        CompositionMatrix::new(Matrix::zeros(0, 3)).unwrap(),
        QuantileMatrix::new(0, 2, vec![], 4).unwrap(),
        Matrix::zeros(0, 1),
    )
    .unwrap();
    let priors = PriorConfig::default();
    let model_full = DbwqsModel::new(full.clone(), priors).unwrap();
    let model_empty = DbwqsModel::new(empty.clone(), priors).unwrap();
    let v = vec![0.2, -0.3, 0.5, 0.1, 0.4, -0.2, 0.3, 0.7];
    assert_eq!(v.len(), model_full.dim());
    let (state, jac) = model_empty.constrain(&v).unwrap();
    let prior_only = log_density_constrained(&state, &empty, &priors) + jac;
    assert!((model_empty.log_posterior(&v) - prior_only).abs() < 1e-10);
    assert!(model_full.log_posterior(&v) != model_empty.log_posterior(&v));
}

#[test]
fn duplicating_rows_doubles_likelihood() {
    let data = random_data(20, 3, 3, 2, 7);
    let doubled = data.concat(&data).unwrap();
    let priors = PriorConfig::default();
    let empty = DbwqsData::new(
        CompositionMatrix::new(Matrix::zeros(0, 3)).unwrap(),
        QuantileMatrix::new(0, 3, vec![], 4).unwrap(),
        Matrix::zeros(0, 2),
    )
    .unwrap();
    let single = DbwqsModel::new(data, priors).unwrap();
    let double = DbwqsModel::new(doubled, priors).unwrap();
    let prior = DbwqsModel::new(empty, priors).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let v = random_state(&mut rng, single.dim());
        let lp0 = prior.log_posterior(&v);
        let l1 = single.log_posterior(&v) - lp0;
        let l2 = double.log_posterior(&v) - lp0;
        assert!((l2 - 2.0 * l1).abs() < 1e-9 * l1.abs().max(1.0));
    }
}

#[test]
fn gradient_matches_central_differences() {
    let data = random_data(30, 4, 3, 2, 11);
    let model = DbwqsModel::new(data, PriorConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = 1e-5;
    for _ in 0..25 {
        let mut v = random_state(&mut rng, model.dim());
        let g = model.grad_log_posterior(&v).unwrap();
        for d in 0..v.len() {
            let orig = v[d];
            v[d] = orig + h;
            let up = model.log_posterior(&v);
            v[d] = orig - h;
            let down = model.log_posterior(&v);
            v[d] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g[d]).abs() / g[d].abs().max(1.0);
            assert!(rel < 1e-5, "coord {d}: analytic {} fd {fd}", g[d]);
        }
    }
}

#[test]
fn theta_prior_gradient_vanishes_at_zero() {
    let empty = DbwqsData::new(
        CompositionMatrix::new(Matrix::zeros(0, 3)).unwrap(),
        QuantileMatrix::new(0, 2, vec![], 4).unwrap(),
        Matrix::zeros(0, 1),
    )
    .unwrap();
    let model = DbwqsModel::new(empty, PriorConfig::default()).unwrap();
    let mut v = vec![0.0; model.dim()];
    v[model.shape().stick_offset()] = 0.4;
    let g = model.grad_log_posterior(&v).unwrap();
    assert_eq!(g[0], 0.0);
    assert_eq!(g[1], 0.0);
    // ln phi coordinate at phi = 1: a_phi - b_phi from prior and Jacobian
    let p = PriorConfig::default();
    assert!((g[model.shape().log_phi_offset()] - (p.a_phi - p.b_phi)).abs() < 1e-12);
}

#[test]
fn exposure_permutation_leaves_density_unchanged() {
    let data = random_data(25, 3, 4, 1, 5);
    let priors = PriorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let perm = [2usize, 0, 3, 1];
    let q_perm = data.q().select_columns(&perm);
    let permuted = DbwqsData::new(data.y().clone(), q_perm, data.x().clone()).unwrap();
    for _ in 0..10 {
        let v = random_state(&mut rng, data.shape().dim());
        let (state, _) = constrain(&v, data.shape()).unwrap();
        let mut other = state.clone();
        other.w = perm.iter().map(|&p| state.w[p]).collect();
        other.pi = perm.iter().map(|&p| state.pi[p]).collect();
        let a = log_density_constrained(&state, &data, &priors);
        let b = log_density_constrained(&other, &permuted, &priors);
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn sigma_beta_only_moves_beta_prior() {
    let data = random_data(15, 3, 2, 2, 21);
    let small = PriorConfig { sigma_beta: 3.0, ..PriorConfig::default() };
    let huge = PriorConfig { sigma_beta: 1e8, ..PriorConfig::default() };
    let a = DbwqsModel::new(data.clone(), small).unwrap();
    let b = DbwqsModel::new(data, huge).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v = random_state(&mut rng, a.dim());
    let (state, _) = a.constrain(&v).unwrap();
    let beta_prior = |sigma: f64| -> f64 {
        let mut acc = 0.0;
        for c in 1..3 {
            for &bv in state.beta.row(c) {
                acc += -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - 0.5 * (bv / sigma).powi(2);
            }
        }
        acc
    };
    let diff = a.log_posterior(&v) - b.log_posterior(&v);
    assert!((diff - (beta_prior(3.0) - beta_prior(1e8))).abs() < 1e-9);
}

#[test]
fn means_rows_sum_to_one_for_extreme_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let theta: Vec<f64> = std::iter::once(0.0).chain((0..4).map(|_| rng.random_range(-40.0..40.0))).collect();
        let s: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..3.0)).collect();
        let mu = compute_means(&s, &Matrix::zeros(5, 0), &theta, &Matrix::zeros(5, 0)).unwrap();
        for i in 0..5 {
            let sum: f64 = mu.row(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn composition_parsing_and_zero_policy() {
    let raw = Matrix::from_rows(&[vec![0.2, 0.3, 0.5], vec![0.4, 0.3, 0.2]]).unwrap();
    let err = CompositionMatrix::from_raw(raw, ZeroPolicy::Reject, 1e-6).unwrap_err();
    assert!(err.to_string().contains("row 2 not on simplex"), "{err}");

    let zero = Matrix::from_rows(&[vec![0.0, 0.5, 0.5]]).unwrap();
    assert!(CompositionMatrix::from_raw(zero.clone(), ZeroPolicy::Reject, 1e-6).is_err());
    let fixed = CompositionMatrix::from_raw(zero, ZeroPolicy::Replace(1e-6), 1e-6).unwrap();
    let row = fixed.row(0);
    assert!(row[0] > 0.0 && (row.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    assert_eq!("reject".parse::<ZeroPolicy>().unwrap(), ZeroPolicy::Reject);
    assert_eq!("replace:0.001".parse::<ZeroPolicy>().unwrap(), ZeroPolicy::Replace(0.001));
    assert!("replace:-1".parse::<ZeroPolicy>().is_err());
    assert!("drop".parse::<ZeroPolicy>().is_err());
}

#[test]
fn rejected_states_are_negative_infinity() {
    let data = random_data(10, 3, 2, 0, 1);
    let model = DbwqsModel::new(data, PriorConfig::default()).unwrap();
    let mut v = vec![0.0; model.dim()];
    v[model.shape().log_phi_offset()] = 800.0;
    assert_eq!(model.log_posterior(&v), f64::NEG_INFINITY);
    assert!(model.grad_log_posterior(&v).is_err());
    assert_eq!(model.log_posterior(&[0.0]), f64::NEG_INFINITY);
}
