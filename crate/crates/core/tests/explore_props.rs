use nalgebra::{DMatrix, DVector};
use predrep::explore::*;
use predrep::grid::{GridRewards, GridWorld};
use predrep::mdp::LearningRate;
use predrep::sf::{sf_closed_form, sf_cosine_matrix, FeatureMap, SfTensor};
use predrep::sr::{sr_closed_form, SrInit, SrTdLearner};
use predrep::{linalg, rng, worlds, Policy};
use proptest::prelude::*;
use rand::Rng;

fn four_rooms() -> (GridWorld, predrep::Mdp) {
    let g = GridWorld::parse(worlds::FOUR_ROOMS).unwrap();
    let m = g.to_mdp(&GridRewards { gamma: 0.9, goal_reward: 0.0, step_reward: 0.0 }).unwrap();
    (g, m)
}

fn uniform_sf(m: &predrep::Mdp) -> SfTensor {
    sf_closed_form(m, &Policy::uniform(m.n_states(), m.n_actions()), &FeatureMap::one_hot(m.n_states())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eigenvectors_orthonormal_and_truncation_improves(seed in any::<u64>(), n in 2usize..=9) {
        let mut r = rng::seeded(seed);
        let mdp = worlds::random_mdp(&mut r, n, 2, 0.9).unwrap();
        let sr = sr_closed_form(&mdp, &worlds::random_policy(&mut r, n, 2)).unwrap();
        let pairs = eigen_decompose_sr(&sr.m, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((pairs.vectors[i].dot(&pairs.vectors[j]) - want).abs() < 1e-8);
            }
        }
        let sym = linalg::symmetrize(&sr.m);
        let mut approx = DMatrix::zeros(n, n);
        let mut last = (&sym - &approx).norm();
        for k in 0..n {
            approx += &pairs.vectors[k] * pairs.vectors[k].transpose() * pairs.values[k];
            let err = (&sym - &approx).norm();
            prop_assert!(err <= last + 1e-10);
            last = err;
        }
        prop_assert!(last < 1e-8);
    }

    #[test]
    fn intrinsic_rewards_telescope(seed in any::<u64>(), len in 1usize..40) {
        let mut r = rng::seeded(seed);
        let n = 7;
        let e = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
        let f = FeatureMap::new(DMatrix::from_fn(n, 3, |_, _| r.random_range(0.0..1.0))).unwrap();
        let e3 = DVector::from_fn(3, |i, _| e[i]);
        let path: Vec<usize> = (0..=len).map(|_| r.random_range(0..n)).collect();
        let total: f64 = path.windows(2).map(|w| eigenoption_reward(&e3, &f, w[0], w[1])).sum();
        let phi = f.matrix();
        let direct: f64 = (0..3).map(|k| e3[k] * (phi[(path[len], k)] - phi[(path[0], k)])).sum();
        prop_assert!((total - direct).abs() < 1e-12);
    }

    #[test]
    fn landmarks_stay_dissimilar(seed in any::<u64>(), eps in 0.3f64..0.95) {
        let g = worlds::two_rooms(6).unwrap();
        let m = g.to_mdp(&GridRewards { gamma: 0.9, goal_reward: 0.0, step_reward: 0.0 }).unwrap();
        let sim = sf_cosine_matrix(&uniform_sf(&m));
        let mut r = rng::seeded(seed);
        let mut lg = LandmarkGraph::new(eps);
        for _ in 0..200 {
            lg.maybe_add(&sim, r.random_range(0..m.n_states()));
        }
        prop_assert!(lg.max_pairwise_similarity(&sim) < eps);
        prop_assert!(lg.counts.iter().all(|&c| c >= 1));
    }
}

#[test]
fn options_raise_visit_entropy_on_four_rooms() {
    let (g, m) = four_rooms();
    let start = g.starts().first().copied().unwrap_or(0);
    let cfg = EigenoptionConfig { n_rounds: 8, start, ..Default::default() };
    for seed in 0..20 {
        let run = discover_eigenoptions(&m, &cfg, &mut rng::stream(seed, 0)).unwrap();
        let with = episodic_walk_with_options(&m, &run.options, start, 10_000, 50, cfg.option_cap, &mut rng::stream(seed, 1));
        let without = episodic_walk_with_options(&m, &[], start, 10_000, 50, cfg.option_cap, &mut rng::stream(seed, 2));
        let (h1, h0) = (visit_entropy(&with, m.n_states()), visit_entropy(&without, m.n_states()));
        assert!(h1 >= h0, "seed {seed}: {h1} < {h0}");
    }
}

#[test]
fn first_option_leaves_the_dense_region() {
    let (g, m) = four_rooms();
    let start = g.starts().first().copied().unwrap_or(0);
    for seed in 0..10 {
        let mut r = rng::stream(seed, 0);
        let run = discover_eigenoptions(&m, &EigenoptionConfig { start, ..Default::default() }, &mut r).unwrap();
        let opt = &run.options[0];
        let busiest = (0..m.n_states()).max_by_key(|&s| run.visit_counts[s]).unwrap();
        let potential = DVector::from_vec(opt.eigenvector.clone());
        let mut s = busiest;
        for _ in 0..200 {
            if opt.termination[s] {
                break;
            }
            s = m.step(s, opt.policy.sample(s, &mut r), &mut r);
        }
        assert!(opt.termination[s]);
        assert!(potential[s] > potential[busiest]);
        assert!(run.visit_counts[s] < run.visit_counts[busiest], "seed {seed}");
    }
}

#[test]
fn posterior_samples_match_pushed_covariance() {
    let mut r = rng::seeded(4);
    let mdp = worlds::random_mdp(&mut r, 4, 2, 0.8).unwrap();
    let f = FeatureMap::new(DMatrix::from_fn(4, 3, |_, _| r.random_range(0.0..1.0))).unwrap();
    let sf = sf_closed_form(&mdp, &Policy::uniform(4, 2), &f).unwrap();
    let a = DMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0));
    let belief = RewardBelief { mean: DVector::from_vec(vec![0.5, -1.0, 2.0]), cov: &a * a.transpose() + DMatrix::identity(3, 3) * 0.1, noise: 1.0 };
    let draws = 50_000;
    let samples: Vec<DVector<f64>> = (0..draws)
        .map(|_| {
            let q = posterior_q_sample(&sf, &belief, &mut r).unwrap();
            DVector::from_iterator(8, q.iter().cloned())
        })
        .collect();
    let mean = samples.iter().fold(DVector::zeros(8), |acc, x| acc + x) / draws as f64;
    let mut cov = DMatrix::zeros(8, 8);
    for x in &samples {
        let d = x - &mean;
        cov += &d * d.transpose();
    }
    cov /= (draws - 1) as f64;
    let psi = DMatrix::from_fn(8, 3, |i, k| sf.psi[i / 4][(i % 4, k)]);
    let expected = &psi * &belief.cov * psi.transpose();
    assert!((&cov - &expected).norm() <= 0.05 * expected.norm());
    let mu = &psi * &belief.mean;
    for i in 0..8 {
        let se = (expected[(i, i)] / draws as f64).sqrt();
        assert!((mean[i] - mu[i]).abs() <= 3.0 * se, "entry {i}");
    }
}

#[test]
fn bandit_posterior_sampling_concentrates() {
    let arms = [0.2, 0.5, 0.9];
    let mut sf = SfTensor::zeros(1, 3, 3, 0.0, "bandit");
    for a in 0..3 {
        sf.psi[a][(0, a)] = 1.0;
    }
    let mut belief = RewardBelief::prior(3, 0.25);
    let mut r = rng::seeded(12);
    let mut late_best = 0;
    for t in 0..2000 {
        let q = posterior_q_sample(&sf, &belief, &mut r).unwrap();
        let a = (0..3).max_by(|&i, &j| q[(0, i)].total_cmp(&q[(0, j)])).unwrap();
        let reward = arms[a] + 0.5 * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut r);
        let mut phi = DVector::zeros(3);
        phi[a] = 1.0;
        belief.observe(&phi, reward).unwrap();
        if t >= 1000 && a == 2 {
            late_best += 1;
        }
    }
    assert!(late_best >= 950, "{late_best}");
}

#[test]
fn corridor_bonus_favours_the_unvisited_end() {
    let n = 12;
    let g = GridWorld::open(n, 1);
    let m = g.to_mdp(&GridRewards { gamma: 0.9, goal_reward: 0.0, step_reward: 0.0 }).unwrap();
    let mut learner = SrTdLearner::new(n, 0.9, 1.0, LearningRate::Constant { eta: 0.1 }, SrInit::Zeros).unwrap();
    let mut r = rng::seeded(2);
    let mut s = 0;
    for _ in 0..100 {
        let s2 = m.step(s, r.random_range(0..4), &mut r);
        learner.observe(s, s2).unwrap();
        s = s2;
    }
    assert!(count_bonus_sr(&learner.m, n - 1, 10.0) > count_bonus_sr(&learner.m, 0, 10.0));
    let exact = sr_closed_form(&m, &Policy::uniform(n, 4)).unwrap();
    for s in 0..n {
        assert!((count_bonus_sr(&exact.m, s, 10.0) - 0.1).abs() < 1e-10);
    }
}

#[test]
fn frontier_landmarks_beat_random_walk_between_rooms() {
    let g = worlds::two_rooms(6).unwrap();
    let m = g.to_mdp(&GridRewards { gamma: 0.9, goal_reward: 0.0, step_reward: 0.0 }).unwrap();
    let sf = uniform_sf(&m);
    let start = g.state_at(0, 0).unwrap();
    let door_col = 3;
    let targets: Vec<bool> = (0..m.n_states()).map(|s| g.coords(s).1 > door_col).collect();
    let mut lm = Vec::new();
    let mut rw = Vec::new();
    for seed in 0..20 {
        let o = landmark_explore(&m, &sf, start, &targets, &LandmarkExploreConfig::default(), &mut rng::stream(seed, 0));
        lm.push(o.steps_to_target.unwrap_or(usize::MAX));
        rw.push(random_walk_to_target(&m, start, &targets, 5000, &mut rng::stream(seed, 1)).unwrap_or(usize::MAX));
    }
    lm.sort();
    rw.sort();
    let median = |v: &[usize]| (v[9] as f64 + v[10] as f64) / 2.0;
    assert!(median(&lm) < median(&rw), "{lm:?} vs {rw:?}");
}
