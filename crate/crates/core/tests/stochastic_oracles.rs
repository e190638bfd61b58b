use urtu_core::graph::generate_small_world;
use urtu_core::meanfield::uniform_grid;
use urtu_core::params::SamplingConfig;
use urtu_core::stochastic::{
    ensemble_average, exact_distribution, exact_marginals_small, gillespie_path, initial_state_random, InitPolicy,
    SparseGenerator,
};
use urtu_core::{DirectedNetwork, Matrix, NodeState, OsnState, RateFamily, Trajectory, UrtuParams};

fn single_node(delta_r: f64) -> UrtuParams {
    UrtuParams {
        b_u: Matrix::zeros(1),
        b_t: Matrix::zeros(1),
        c_u: Matrix::zeros(1),
        c_r: Matrix::zeros(1),
        d_r: vec![delta_r],
        d_t: vec![1.0],
    }
}

fn state(digits: &[u8]) -> OsnState {
    OsnState::new(digits.iter().map(|&d| NodeState::from_digit(d).unwrap()).collect())
}

fn max_marginal_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.times(), b.times());
    let mut gap: f64 = 0.0;
    for k in 0..a.len() {
        for (x, y) in a.rumor_at(k).iter().zip(b.rumor_at(k)).chain(a.truth_at(k).iter().zip(b.truth_at(k))) {
            gap = gap.max((x - y).abs());
        }
    }
    gap
}

/// Heterogeneous rates on the 4-node cycle `0 <- 1 <- 2 <- 3 <- 0`.
fn cycle_fixture() -> (DirectedNetwork, UrtuParams) {
    let net = DirectedNetwork::directed_cycle(4).unwrap();
    let mut p = UrtuParams::homogeneous(&net, &net, 1.2, 0.4, 0.9, 0.5, 0.3, 0.35).unwrap();
    p.b_u[(1, 2)] = 1.6;
    p.c_u[(3, 0)] = 0.7;
    p.d_r[2] = 0.5;
    (net, p)
}

#[test]
fn random_seeding_is_uniform() {
    let n = 10;
    let draws = 10_000;
    let mut rumor = vec![0usize; n];
    let mut truth = vec![0usize; n];
    for seed in 0..draws {
        let s = initial_state_random(n, seed).unwrap();
        assert_eq!(s.count(NodeState::Rumor), 1);
        assert_eq!(s.count(NodeState::Truth), 1);
        for (i, &x) in s.states().iter().enumerate() {
            match x {
                NodeState::Rumor => rumor[i] += 1,
                NodeState::Truth => truth[i] += 1,
                NodeState::Uncertain => {}
            }
        }
    }
    for i in 0..n {
        let fr = rumor[i] as f64 / draws as f64;
        let ft = truth[i] as f64 / draws as f64;
        assert!((fr - 0.1).abs() <= 0.01, "node {i} rumor frequency {fr}");
        assert!((ft - 0.1).abs() <= 0.01, "node {i} truth frequency {ft}");
    }
    assert_eq!(initial_state_random(n, 77).unwrap(), initial_state_random(n, 77).unwrap());
}

#[test]
fn single_node_exit_time_is_exponential() {
    let p = single_node(1.0);
    let fam = RateFamily::linear(&p);
    let init = state(&[1]);
    let paths = 10_000;
    let mut total = 0.0;
    for seed in 0..paths {
        let events = gillespie_path(&fam, &init, 1e6, seed).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].new_state, NodeState::Uncertain);
        total += events[0].t;
    }
    let mean = total / paths as f64;
    assert!((mean - 1.0).abs() < 0.03, "mean exit time {mean}");
}

#[test]
fn single_node_ensemble_within_binomial_band() {
    let p = single_node(1.0);
    let fam = RateFamily::linear(&p);
    let m = 10_000;
    let grid = uniform_grid(5.0, 20);
    let traj = ensemble_average(&fam, &InitPolicy::Fixed { state: state(&[1]) }, &grid, m, 3).unwrap();
    for (k, &t) in grid.iter().enumerate() {
        let exact = (-t).exp();
        let band = 4.0 * (exact * (1.0 - exact) / m as f64).sqrt();
        let got = traj.rumor_at(k)[0];
        assert!((got - exact).abs() <= band, "t = {t}: {got} vs {exact} (band {band})");
    }
}

#[test]
fn cycle_ensemble_matches_uniformization() {
    let (_, p) = cycle_fixture();
    let fam = RateFamily::linear(&p);
    let init = state(&[1, 0, 2, 0]);
    let grid = uniform_grid(6.0, 25);
    let exact = exact_marginals_small(&fam, &init, &grid).unwrap();
    let ensemble = ensemble_average(&fam, &InitPolicy::Fixed { state: init }, &grid, 10_000, 17).unwrap();
    let gap = max_marginal_gap(&exact, &ensemble);
    assert!(gap <= 0.02, "max marginal gap {gap}");
}

#[test]
fn small_fixtures_within_monte_carlo_bound() {
    let m = 4_000;
    let bound = 4.0 * (0.25 / m as f64).sqrt();
    let ring5 = DirectedNetwork::ring(5).unwrap();
    let triangle = DirectedNetwork::new(3, [(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)]).unwrap();
    let fixtures = [
        (UrtuParams::homogeneous(&ring5, &ring5, 0.8, 0.3, 0.6, 0.2, 0.4, 0.5).unwrap(), state(&[1, 0, 0, 2, 0])),
        (UrtuParams::homogeneous(&triangle, &triangle, 0.5, 0.5, 0.9, 0.1, 1.0, 0.2).unwrap(), state(&[2, 1, 0])),
        (UrtuParams::homogeneous(&ring5, &ring5, 0.2, 0.1, 0.3, 0.3, 0.9, 0.9).unwrap(), state(&[1, 1, 2, 0, 0])),
    ];
    let grid = uniform_grid(5.0, 21);
    for (idx, (p, init)) in fixtures.iter().enumerate() {
        let fam = RateFamily::linear(p);
        let exact = exact_marginals_small(&fam, init, &grid).unwrap();
        let policy = InitPolicy::Fixed { state: init.clone() };
        let ensemble = ensemble_average(&fam, &policy, &grid, m, 100 + idx as u64).unwrap();
        let gap = max_marginal_gap(&exact, &ensemble);
        assert!(gap <= bound, "fixture {idx}: gap {gap} > {bound}");
    }
}

#[test]
fn rumor_never_returns_after_dying_out() {
    let net = generate_small_world(20, 4, 0.2, 1).unwrap();
    let p = UrtuParams::sample_random(&net, &net, &SamplingConfig::default(), 8).unwrap();
    let fam = RateFamily::linear(&p);
    for seed in 0..200 {
        let init = initial_state_random(20, seed).unwrap();
        let mut rumor = 1i64;
        let mut truth = 1i64;
        let mut current = init.clone();
        let mut rumor_dead = false;
        let mut truth_dead = false;
        for ev in gillespie_path(&fam, &init, 50.0, seed).unwrap() {
            let old = current.states()[ev.node];
            for (s, delta) in [(old, -1), (ev.new_state, 1)] {
                match s {
                    NodeState::Rumor => rumor += delta,
                    NodeState::Truth => truth += delta,
                    NodeState::Uncertain => {}
                }
            }
            current.set(ev.node, ev.new_state);
            assert!(!(rumor_dead && rumor > 0), "rumor reappeared at t = {}", ev.t);
            assert!(!(truth_dead && truth > 0), "truth reappeared at t = {}", ev.t);
            rumor_dead |= rumor == 0;
            truth_dead |= truth == 0;
        }
    }
}

#[test]
fn uniformization_is_symmetric_under_swap() {
    let (_, p) = cycle_fixture();
    let swapped = p.swapped();
    let init = state(&[1, 0, 2, 1]);
    let grid = uniform_grid(4.0, 9);
    let a = exact_marginals_small(&RateFamily::linear(&p), &init, &grid).unwrap();
    let b = exact_marginals_small(&RateFamily::linear(&swapped), &init.swapped(), &grid).unwrap();
    for k in 0..grid.len() {
        for i in 0..4 {
            assert!((a.rumor_at(k)[i] - b.truth_at(k)[i]).abs() < 1e-14);
            assert!((a.truth_at(k)[i] - b.rumor_at(k)[i]).abs() < 1e-14);
        }
    }
}

#[test]
fn ensemble_is_statistically_symmetric_under_swap() {
    let (_, p) = cycle_fixture();
    let swapped = p.swapped();
    let init = state(&[1, 0, 2, 0]);
    let grid = uniform_grid(5.0, 11);
    let m = 10_000;
    let a = ensemble_average(&RateFamily::linear(&p), &InitPolicy::Fixed { state: init.clone() }, &grid, m, 5).unwrap();
    let b = ensemble_average(
        &RateFamily::linear(&swapped),
        &InitPolicy::Fixed { state: init.swapped() },
        &grid,
        m,
        6,
    )
    .unwrap();
    // Difference of two independent frequencies: 4 sigma at the worst case p = 1/2.
    let bound = 4.0 * (2.0 * 0.25 / m as f64).sqrt();
    for k in 0..grid.len() {
        for i in 0..4 {
            assert!((a.rumor_at(k)[i] - b.truth_at(k)[i]).abs() <= bound);
            assert!((a.truth_at(k)[i] - b.rumor_at(k)[i]).abs() <= bound);
        }
    }
}

#[test]
fn exact_distribution_marginals_agree_with_trajectory() {
    let (_, p) = cycle_fixture();
    let generator = SparseGenerator::build(&p).unwrap();
    let grid = [0.0, 0.5, 2.0];
    let (dists, traj) = exact_distribution(&generator, &state(&[1, 2, 0, 0]), &grid).unwrap();
    for (k, dist) in dists.iter().enumerate() {
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(dist.iter().all(|&x| x >= 0.0));
        let mut rumor0 = 0.0;
        for (s, &mass) in dist.iter().enumerate() {
            if OsnState::decode(s, 4).states()[0] == NodeState::Rumor {
                rumor0 += mass;
            }
        }
        assert!((rumor0 - traj.rumor_at(k)[0]).abs() < 1e-15);
        let (r, t) = traj.aggregate_fractions();
        let mean_r = traj.rumor_at(k).iter().sum::<f64>() / 4.0;
        let mean_t = traj.truth_at(k).iter().sum::<f64>() / 4.0;
        assert!((r[k] - mean_r).abs() < 1e-15 && (t[k] - mean_t).abs() < 1e-15);
    }
}
