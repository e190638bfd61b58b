use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urtu_core::analysis::{
    build_q, classify_regime, corollary_criteria, dominant_equilibrium, fixed_point_iteration, fixed_point_map,
    spectral_report, EquilibriumKind, Regime,
};
use urtu_core::graph::{generate_random, generate_small_world};
use urtu_core::linalg::{perron_pair, spectral_abscissa, spectral_radius};
use urtu_core::params::{SamplingConfig, UniformRange};
use urtu_core::{DirectedNetwork, Error, Matrix, RateFamily, RateKind, UrtuParams};

/// Random `B_U` on an irreducible support with a random overall scale, and
/// forgetting rates in `[0.1, 1]`.
fn random_pair<R: Rng>(n: usize, rng: &mut R) -> (Matrix, Vec<f64>) {
    let net = generate_random(n, 0.3, rng.gen()).unwrap();
    let scale = 10f64.powf(rng.gen_range(-1.5..0.5));
    let mut b = Matrix::zeros(n);
    for &(i, j) in net.arcs() {
        b[(i, j)] = scale * rng.gen_range(0.01..1.0);
    }
    let d = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    (b, d)
}

fn random_params(n: usize, seed: u64, config: &SamplingConfig) -> UrtuParams {
    let gr = generate_random(n, 0.3, seed).unwrap();
    let gt = generate_random(n, 0.3, seed.wrapping_add(1 << 32)).unwrap();
    UrtuParams::sample_random(&gr, &gt, config, seed).unwrap()
}

fn scaled_config<R: Rng>(rng: &mut R) -> SamplingConfig {
    let hi = 10f64.powf(rng.gen_range(-1.5..0.3));
    SamplingConfig {
        beta_u: UniformRange::new(0.0, hi),
        gamma_u: UniformRange::new(0.0, hi),
        homogeneous: rng.gen(),
        ..SamplingConfig::default()
    }
}

#[test]
fn threshold_sign_matches_radius_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut above, mut below) = (0, 0);
    for _ in 0..1000 {
        let (b, d) = random_pair(10, &mut rng);
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let s = spectral_abscissa(&b.add_diagonal(&neg)).unwrap();
        if s.abs() <= 1e-8 {
            continue;
        }
        let rho = spectral_radius(&b.div_columns(&d)).unwrap();
        assert_eq!(s > 0.0, rho > 1.0, "s = {s}, rho = {rho}");
        if s > 0.0 {
            above += 1;
        } else {
            below += 1;
        }
    }
    assert!(above > 50 && below > 50, "{above} above, {below} below");
}

#[test]
fn abscissa_shifts_with_the_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let (b, d) = random_pair(8, &mut rng);
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        let a = b.add_diagonal(&neg);
        let c = rng.gen_range(0.0..10.0);
        let shifted = a.add_diagonal(&[c; 8]);
        let gap = spectral_abscissa(&shifted).unwrap() - spectral_abscissa(&a).unwrap() - c;
        assert!(gap.abs() < 1e-9, "gap {gap}");
    }
}

#[test]
fn radius_matches_characteristic_polynomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let m: Vec<f64> = (0..4).map(|_| rng.gen_range(0.01..3.0)).collect();
        let a = Matrix::from_rows(&[vec![m[0], m[1]], vec![m[2], m[3]]]).unwrap();
        let (tr, det) = (m[0] + m[3], m[0] * m[3] - m[1] * m[2]);
        let root = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        let got = spectral_radius(&a).unwrap();
        assert!((got - root).abs() <= 1e-9 * root.max(1.0));
    }
}

#[test]
fn criterion_b_implies_criterion_a() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut b_true = 0;
    for k in 0..1000 {
        let config = scaled_config(&mut rng);
        let p = random_params(8, k, &config);
        let fam = RateFamily::linear(&p);
        let crit = corollary_criteria(&fam).unwrap();
        if crit.b {
            b_true += 1;
            assert!(crit.a, "instance {k}: (b) without (a)");
        }
    }
    assert!(b_true > 100);
}

#[test]
fn any_criterion_predicts_extinction() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hits = [0usize; 4];
    for k in 0..500 {
        let config = scaled_config(&mut rng);
        let p = random_params(10, 10_000 + k, &config);
        for kind in [RateKind::Linear, RateKind::Saturating { c: 2.0 }] {
            let fam = RateFamily::new(&p, kind).unwrap();
            let report = spectral_report(&fam).unwrap();
            let c = report.criteria;
            for (h, flag) in hits.iter_mut().zip([c.a, c.b, c.c, c.d]) {
                *h += flag as usize;
            }
            if c.any() {
                assert_eq!(report.regime, Regime::BothExtinct, "instance {k}: {c:?} with s = ({}, {})", report.s1, report.s2);
            }
        }
    }
    assert!(hits.iter().all(|&h| h > 0), "{hits:?}");
}

#[test]
fn random_sampling_covers_both_threshold_signs() {
    let net = generate_small_world(20, 4, 0.2, 12).unwrap();
    let (mut pos, mut neg) = (0, 0);
    for seed in 0..1000 {
        let p = UrtuParams::sample_random(&net, &net, &SamplingConfig::default(), seed).unwrap();
        assert!(p.validate(&net, &net).unwrap().is_ok());
        let (q1, _) = build_q(&RateFamily::linear(&p));
        if spectral_abscissa(&q1).unwrap() > 0.0 {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    assert!(pos > 0 && neg > 0, "{pos} positive, {neg} nonpositive");
}

#[test]
fn regular_graph_closed_form() {
    for (net, d) in [
        (DirectedNetwork::ring(7).unwrap(), 2.0),
        (generate_small_world(12, 4, 0.0, 0).unwrap(), 4.0),
        (DirectedNetwork::ring(2).unwrap(), 1.0),
    ] {
        let delta = 0.3;
        let beta = 2.0 * delta;
        let p = UrtuParams::homogeneous(&net, &net, beta, beta, 0.01, 0.01, delta, 1.0).unwrap();
        let eq = dominant_equilibrium(&RateFamily::linear(&p), EquilibriumKind::RumorDominant).unwrap();
        let expected = 1.0 - delta / (d * beta);
        for &x in &eq.point {
            assert!((x - expected).abs() < 1e-10, "{x} vs {expected}");
        }
        assert!(eq.fixed_point_residual < 1e-11);
    }
}

#[test]
fn sandwich_from_small_multiple_of_perron_vector() {
    let net = generate_random(15, 0.25, 8).unwrap();
    let config = SamplingConfig {
        beta_u: UniformRange::new(0.5, 1.0),
        homogeneous: false,
        ..SamplingConfig::default()
    };
    let p = UrtuParams::sample_random(&net, &net, &config, 8).unwrap();
    for kind in [RateKind::Linear, RateKind::Saturating { c: 1.5 }] {
        let fam = RateFamily::new(&p, kind).unwrap();
        let (q1, _) = build_q(&fam);
        let perron = perron_pair(&q1).unwrap();
        assert!(perron.value > 0.0);
        let vmax = perron.vector.iter().cloned().fold(0.0, f64::max);
        let lower: Vec<f64> = perron.vector.iter().map(|v| 1e-6 * v / vmax).collect();
        // A small multiple of the Perron vector is a subsolution.
        let mut image = vec![0.0; 15];
        fixed_point_map(&fam, EquilibriumKind::RumorDominant, &lower, &mut image);
        assert!(image.iter().zip(&lower).all(|(h, x)| h >= x));

        let (from_below, _) = fixed_point_iteration(&fam, EquilibriumKind::RumorDominant, &lower).unwrap();
        let from_above = dominant_equilibrium(&fam, EquilibriumKind::RumorDominant).unwrap();
        for (a, b) in from_below.iter().zip(&from_above.point) {
            assert!(a <= &(b + 1e-10));
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn equilibrium_is_permutation_equivariant() {
    let net = generate_random(9, 0.35, 21).unwrap();
    let config = SamplingConfig { homogeneous: false, ..SamplingConfig::default() };
    let p = UrtuParams::sample_random(&net, &net, &config, 21).unwrap();
    let perm = [3, 7, 0, 8, 1, 5, 2, 6, 4];
    let q = p.permuted(&perm).unwrap();
    let relabeled = net.relabel(&perm).unwrap();
    assert!(q.validate(&relabeled, &relabeled).unwrap().is_ok());
    let a = dominant_equilibrium(&RateFamily::linear(&p), EquilibriumKind::RumorDominant).unwrap();
    let b = dominant_equilibrium(&RateFamily::linear(&q), EquilibriumKind::RumorDominant).unwrap();
    for k in 0..9 {
        assert!((a.point[k] - b.point[perm[k]]).abs() < 1e-10);
    }
}

#[test]
fn truth_equilibrium_mirrors_rumor_equilibrium() {
    let net = generate_random(10, 0.3, 30).unwrap();
    let p = UrtuParams::sample_random(&net, &net, &SamplingConfig::default(), 30).unwrap();
    let rumor = dominant_equilibrium(&RateFamily::linear(&p), EquilibriumKind::RumorDominant).unwrap();
    let swapped = p.swapped();
    let truth = dominant_equilibrium(&RateFamily::linear(&swapped), EquilibriumKind::TruthDominant).unwrap();
    assert_eq!(rumor.point, truth.point);
}

#[test]
fn subcritical_instances_have_no_equilibrium() {
    let net = DirectedNetwork::ring(4).unwrap();
    let p = UrtuParams::homogeneous(&net, &net, 0.1, 0.05, 0.1, 0.05, 1.0, 1.0).unwrap();
    let err = dominant_equilibrium(&RateFamily::linear(&p), EquilibriumKind::TruthDominant).unwrap_err();
    assert!(matches!(err, Error::NoPositiveEquilibrium { abscissa } if abscissa < 0.0));
    assert_eq!(classify_regime(0.0, 0.0), Regime::BothExtinct);
}
