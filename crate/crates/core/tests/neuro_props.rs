use nalgebra::DMatrix;
use predrep::grid::{GridRewards, GridWorld};
use predrep::mdp::{policy_transition_matrix, value_iteration};
use predrep::neuro::*;
use predrep::sr::sr_closed_form;
use predrep::{worlds, Mdp, Policy};
use proptest::prelude::*;

fn uniform_sr(g: &GridWorld, gamma: f64) -> DMatrix<f64> {
    let m = g.to_mdp(&GridRewards { gamma, goal_reward: 0.0, step_reward: 0.0 }).unwrap();
    sr_closed_form(&m, &Policy::uniform(m.n_states(), 4)).unwrap().m
}

/// Need by truncated power series, gain by enumerating the backed-up row.
fn oracle_sequence(mdp: &Mdp, agent: usize, max: usize) -> Vec<usize> {
    let (n, n_a, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let mut q = DMatrix::<f64>::zeros(n, n_a);
    let mut out = Vec::new();
    let greedy = |row: &[f64]| -> Vec<f64> {
        let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let k = row.iter().filter(|&&x| x >= best - 1e-12).count() as f64;
        row.iter().map(|&x| if x >= best - 1e-12 { 1.0 / k } else { 0.0 }).collect()
    };
    while out.len() < max {
        let mut tp = DMatrix::<f64>::zeros(n, n);
        for s in 0..n {
            let p = greedy(&q.row(s).iter().cloned().collect::<Vec<_>>());
            for a in 0..n_a {
                for s2 in 0..n {
                    tp[(s, s2)] += p[a] * mdp.transition(a)[(s, s2)];
                }
            }
        }
        let mut need = vec![0.0f64; n];
        let mut dist = tp.row(agent).transpose();
        let mut disc = 1.0;
        for _ in 0..3000 {
            for s in 0..n {
                need[s] += disc * dist[s];
            }
            dist = tp.transpose() * dist;
            disc *= gamma;
        }
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for s in 0..n {
            for a in 0..n_a {
                let mut target = 0.0;
                for s2 in 0..n {
                    let p = mdp.transition(a)[(s, s2)];
                    if p > 0.0 {
                        let vmax = q.row(s2).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        target += p * (mdp.reward()[s2] + gamma * vmax);
                    }
                }
                let old: Vec<f64> = q.row(s).iter().cloned().collect();
                let mut new = old.clone();
                new[a] = target;
                let (po, pn) = (greedy(&old), greedy(&new));
                let gain: f64 = (0..n_a).map(|b| (pn[b] - po[b]) * new[b]).sum();
                let evb = need[s] * gain;
                if best.is_none_or(|b| evb > b.0 + 1e-12) {
                    best = Some((evb, s, a, target));
                }
            }
        }
        let (evb, s, a, target) = best.unwrap();
        if evb <= 1e-6 {
            break;
        }
        q[(s, a)] = target;
        out.push(s);
    }
    out
}

#[test]
fn reverse_replay_chain_matches_brute_force() {
    for n in 2..=8 {
        let mdp = restart_track(n, 0.9, 1.0).unwrap();
        let run = replay_simulate(&mdp, &DMatrix::zeros(n, 2), 0, &all_pairs(&mdp), &ReplayConfig { max_backups: 3 * n, ..Default::default() }).unwrap();
        let got: Vec<usize> = run.sequence.iter().map(|c| c.state).collect();
        let expected: Vec<usize> = (0..n - 1).rev().collect();
        assert_eq!(&got[..n - 1], &expected[..], "n={n}");
        assert_eq!(got, oracle_sequence(&mdp, 0, 3 * n), "n={n}");
    }
}

#[test]
fn converged_values_replay_forward_by_need() {
    let mdp = restart_track(6, 0.9, 1.0).unwrap();
    let (v, _) = value_iteration(&mdp, 1e-12).unwrap();
    let q = mdp.q_from_values(&v);
    let pi = behaviour_policy(&q, 0.0);
    let need = predrep::sr::sr_from_transition(&policy_transition_matrix(&mdp, &pi).unwrap(), 0.9).unwrap();
    let ranked = replay_priorities(&need, &q, &mdp, 0, &all_pairs(&mdp), 1e-3).unwrap();
    let mut order: Vec<usize> = Vec::new();
    for c in &ranked {
        if !order.contains(&c.state) {
            order.push(c.state);
        }
    }
    assert_eq!(&order[..5], &[1, 2, 3, 4, 5]);
}

proptest! {
    #[test]
    fn evb_order_ignores_need_scale(scale in 1e-3f64..1e3, n in 3usize..8, agent in 0usize..3) {
        let mdp = restart_track(n, 0.8, 1.0).unwrap();
        let q = DMatrix::from_fn(n, 2, |s, a| ((s * 5 + a * 3) % 7) as f64 * 0.1);
        let need = predrep::sr::sr_from_transition(&policy_transition_matrix(&mdp, &Policy::uniform(n, 2)).unwrap(), 0.8).unwrap();
        let a = replay_priorities(&need, &q, &mdp, agent, &all_pairs(&mdp), 0.0).unwrap();
        let b = replay_priorities(&(&need * scale), &q, &mdp, agent, &all_pairs(&mdp), 0.0).unwrap();
        let key = |v: &[ReplayCandidate]| v.iter().map(|c| (c.state, c.action)).collect::<Vec<_>>();
        prop_assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn population_totals_match_horizon(w in 2usize..7, h in 2usize..7, gamma in 0.5f64..0.95) {
        let g = GridWorld::open(w, h);
        let sr = uniform_sr(&g, gamma);
        let geom = Geometry::from_grid(&g);
        for s in 0..g.n_states() {
            let total: f64 = population_vector(&sr, &geom, s).unwrap().values.iter().flatten().sum();
            prop_assert!((total - 1.0 / (1.0 - gamma)).abs() < 1e-8);
        }
    }
}

#[test]
fn goal_field_follows_shortest_paths() {
    let g = GridWorld::parse(worlds::HALLWAY_MAZE).unwrap();
    let mdp = g.to_mdp(&GridRewards::hallway(0.99)).unwrap();
    let (_, best) = value_iteration(&mdp, 1e-12).unwrap();
    let sr = sr_closed_form(&mdp, &best).unwrap();
    let goal = g.goals()[0];
    let dist = g.bfs_distances(goal);
    for s in 0..g.n_states() {
        if s == goal {
            continue;
        }
        let d = dist[s].unwrap() as i32;
        let expected = 0.99f64.powi(d - 1) / (1.0 - 0.99);
        assert!((sr.m[(s, goal)] - expected).abs() < 1e-8 * expected);
    }
    let row = population_vector(&sr.m, &Geometry::from_grid(&g), worlds::HALLWAY_AGENT).unwrap();
    let on_path = row.values.iter().flatten().filter(|&&x| x > 0.0).count();
    assert_eq!(on_path, dist[worlds::HALLWAY_AGENT].unwrap());
}

#[test]
fn fields_stay_inside_a_sealed_room() {
    let g = GridWorld::from_mask(9, 6, |_, c| c != 4).unwrap();
    let sr = uniform_sr(&g, 0.9);
    let geom = Geometry::from_grid(&g);
    let left = g.state_at(2, 1).unwrap();
    let field = place_field(&sr, &geom, left).unwrap();
    for r in 0..6 {
        for c in 5..9 {
            assert_eq!(field.get(r, c), Some(0.0));
        }
    }
}

#[test]
fn open_room_eigenvectors_are_periodic() {
    let g = GridWorld::open(20, 20);
    let fields = grid_fields(&uniform_sr(&g, 0.95), &Geometry::from_grid(&g), 12, false).unwrap();
    let periodic = fields[1..]
        .iter()
        .filter(|f| secondary_peaks(&autocorrelation(f, 100), 0.1).len() >= 2)
        .count();
    assert!(periodic >= 8, "{periodic}");
    let rect = grid_fields(&uniform_sr(&g, 0.95), &Geometry::from_grid(&g), 4, true).unwrap();
    assert!(rect.iter().all(|f| f.values.iter().flatten().all(|&x| x >= 0.0)));
}

#[test]
fn trapezoid_bends_the_lattice() {
    let sq = GridWorld::open(16, 16);
    let tr = worlds::trapezoid(16, 16, 6).unwrap();
    let fs = grid_fields(&uniform_sr(&sq, 0.95), &Geometry::from_grid(&sq), 10, false).unwrap();
    let ft = grid_fields(&uniform_sr(&tr, 0.95), &Geometry::from_grid(&tr), 10, false).unwrap();
    assert_eq!(peak_angle_shift(&fs, &fs, 60, 0.1), 0.0);
    assert!(peak_angle_shift(&fs, &ft, 60, 0.1) > 10.0);
}

#[test]
fn larger_rooms_carry_more_components() {
    let counts: Vec<usize> = [8, 12, 16]
        .iter()
        .map(|&n| significant_components(&uniform_sr(&GridWorld::open(n, n), 0.95), 0.5).unwrap())
        .collect();
    assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
}

#[test]
fn track_skew_is_backward_everywhere() {
    let n = 15;
    let directed = ring_sr(n, 0.9, 0.9).unwrap();
    let diffusive = ring_sr(n, 0.5, 0.9).unwrap();
    for cell in 0..n {
        let d = ring_field_skew(&directed, cell, 1.0).unwrap();
        assert!(d.value < 0.0);
        assert!(ring_field_skew(&diffusive, cell, 1.0).unwrap().value.abs() < d.value.abs());
    }
}

#[test]
fn field_csv_marks_walls() {
    let g = GridWorld::from_mask(3, 2, |r, c| !(r == 0 && c == 1)).unwrap();
    let sr = uniform_sr(&g, 0.5);
    let text = place_field(&sr, &Geometry::from_grid(&g), 0).unwrap().to_csv(&[("state", "0".into())]);
    assert!(text.starts_with("# state=0"));
    assert!(text.contains("nan"));
}
