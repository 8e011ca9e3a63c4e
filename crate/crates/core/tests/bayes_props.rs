use nalgebra::{DMatrix, DVector};
use predrep::bayes::*;
use predrep::linalg::min_eigenvalue;
use predrep::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_rows(seed: u64, t: usize, d: usize) -> (Vec<DVector<f64>>, Vec<f64>) {
    let mut r = rng::seeded(seed);
    let xs: Vec<DVector<f64>> = (0..t).map(|_| DVector::from_fn(d, |_, _| r.random_range(-1.0..1.0))).collect();
    let ys: Vec<f64> = (0..t).map(|_| r.random_range(-2.0..2.0)).collect();
    (xs, ys)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_equals_batch_posterior(seed in any::<u64>(), t in 1usize..40, d in 1usize..5, noise in 0.1f64..2.0) {
        let (xs, ys) = random_rows(seed, t, d);
        let mut order: Vec<usize> = (0..t).collect();
        order.shuffle(&mut rng::seeded(seed ^ 1));
        let mut b = GaussianBelief::isotropic(d, 1.0, 0.0, noise).unwrap();
        for &i in &order {
            kalman_step(&mut b, &xs[i], ys[i]).unwrap();
        }
        let x = DMatrix::from_fn(t, d, |i, j| xs[i][j]);
        let (mean, cov) = batch_regression(&DVector::zeros(d), &DMatrix::identity(d, d), noise, &x, &DVector::from_vec(ys)).unwrap();
        prop_assert!((b.mean - mean).norm() <= 1e-8);
        prop_assert!((b.cov - cov).norm() <= 1e-8);
    }

    #[test]
    fn zero_discount_td_is_the_filter(seed in any::<u64>(), t in 1usize..30) {
        let (xs, ys) = random_rows(seed, t + 1, 3);
        let mut a = GaussianBelief::default_prior(3);
        let mut b = a.clone();
        for i in 0..t {
            let da = kalman_step(&mut a, &xs[i], ys[i]).unwrap();
            let db = kalman_td_step(&mut b, &xs[i], &xs[i + 1], 0.0, ys[i]).unwrap();
            prop_assert_eq!(da, db);
            prop_assert!(a.mean.iter().zip(b.mean.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
            prop_assert!(a.cov.iter().zip(b.cov.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn crp_priors_are_distributions(counts in prop::collection::vec(0.0f64..50.0, 0..6), alpha in 0.01f64..5.0, nu in 0.0f64..10.0) {
        let plain = crp_prior(&counts, alpha).unwrap();
        prop_assert!((plain.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let prev = if counts.is_empty() { None } else { Some(counts.len() - 1) };
        let sticky = sticky_crp_prior(&counts, alpha, nu, prev).unwrap();
        prop_assert!((sticky.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(sticky_crp_prior(&counts, alpha, 0.0, prev).unwrap(), plain);
    }
}

#[test]
fn covariance_stays_psd_over_long_runs() {
    let mut r = rng::seeded(77);
    let mut b = GaussianBelief::default_prior(4);
    for t in 0..100_000 {
        let phi = DVector::from_fn(4, |_, _| if r.random_bool(0.5) { r.random_range(-1.0..1.0) } else { 0.0 });
        let next = DVector::from_fn(4, |_, _| r.random_range(0.0..1.0));
        kalman_td_step(&mut b, &phi, &next, 0.9, r.random_range(-1.0..1.0)).unwrap();
        if t % 1000 == 0 {
            assert!(min_eigenvalue(&b.cov) >= -1e-8);
        }
    }
    assert!(min_eigenvalue(&b.cov) >= -1e-8);
}

#[test]
fn pre_exposure_lowers_the_gain() {
    for seed in 0..100 {
        let (pre, a, b) = latent_inhibition_trials(seed, 20 + (seed as usize % 10), 0.1);
        let mut exposed = GaussianBelief::isotropic(2, 1.0, 0.0, 1.0).unwrap();
        let records = run_trials(&mut exposed, &pre, 0.0).unwrap();
        assert!(records.windows(2).all(|w| w[1].gain[0] <= w[0].gain[0]));
        let mut novel = exposed.clone();
        let ga = run_trials(&mut exposed, &[a], 0.0).unwrap()[0].gain[0];
        let gb = run_trials(&mut novel, &[b], 0.0).unwrap()[0].gain[1];
        assert!(ga < gb);
    }
}

#[test]
fn backward_blocking_unlearns_the_absent_cue() {
    for seed in 0..100 {
        let (p1, p2) = backward_blocking_trials(seed, 20, 20, 0.1);
        let mut b = GaussianBelief::default_prior(2);
        run_trials(&mut b, &p1, 0.0).unwrap();
        assert!(b.cov[(0, 1)] < 0.0);
        let before = b.mean[1];
        let rec = run_trials(&mut b, &p2, 0.0).unwrap();
        assert!(rec.last().unwrap().mean[1] < before);
    }
}

#[test]
fn second_order_cue_gains_value() {
    for seed in 0..20 {
        let (p1, p2) = second_order_trials(seed, 20, 10, 0.1);
        let mut b = GaussianBelief::default_prior(2);
        run_trials(&mut b, &p1, 0.9).unwrap();
        run_trials(&mut b, &p2, 0.9).unwrap();
        assert!(b.mean[0] > 0.0);
    }
}

#[test]
fn context_suite_directions() {
    let proto = ContextProtocol::default();
    let mut delays: Vec<usize> = (0..20).map(|s| switch_detection_delay(s, &proto, 100).unwrap().unwrap_or(usize::MAX)).collect();
    delays.sort();
    assert!(delays[10] <= 5, "{delays:?}");
    let outcomes: Vec<ReminderOutcome> = (0..20).map(|s| reminder_protocol(s, &proto).unwrap()).collect();
    let mean = |f: fn(&ReminderOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / 20.0;
    assert!(mean(|o| o.immediate) < mean(|o| o.delayed));
    assert!(mean(|o| o.reminded) < mean(|o| o.delayed));
}
