use lpavg_core::densities::{coordinate_density_finite, finite_support_radius};
use lpavg_core::sampler::*;
use lpavg_core::stats::{ks_test, ks_test_density, mean_and_variance};
use lpavg_core::{BallSpec, PExponent, Quadrant};
use proptest::prelude::*;
use rand::RngCore;

fn p(s: &str) -> PExponent {
    s.parse().unwrap()
}

fn draws(n: usize, f: impl FnMut() -> f64) -> Vec<f64> {
    std::iter::repeat_with(f).take(n).collect()
}

#[test]
fn generalized_gaussian_examples() {
    let mut rng = SeedSpec::new(11, 0).stream();
    let gauss = GeneralizedGaussian::new(p("2"), true).unwrap();
    let (_, var) = mean_and_variance(&draws(100_000, || gauss.sample(&mut rng)));
    assert!((var - 1.0).abs() < 0.02, "{var}");

    let expo = GeneralizedGaussian::new(p("1"), false).unwrap();
    let (mean, _) = mean_and_variance(&draws(100_000, || expo.sample(&mut rng)));
    assert!((mean - 1.0).abs() < 0.02, "{mean}");

    for ps in ["1", "4/3", "3/2", "2", "3", "4", "15/2"] {
        let pe = p(ps);
        let gg = GeneralizedGaussian::new(pe, pe.admits(Quadrant::Full)).unwrap();
        let xs = draws(100_000, || pe.abs_pow(gg.sample(&mut rng)));
        let (m, _) = mean_and_variance(&xs);
        assert!((m - 1.0).abs() < 0.03, "p={ps}: E|x|^p = {m}");
    }
}

#[test]
fn generalized_gaussian_ks() {
    // p = 1 unsigned is Exp(1); p = 2 signed is N(0,1) (CDF by density).
    let mut rng = SeedSpec::new(12, 0).stream();
    let expo = GeneralizedGaussian::new(p("1"), false).unwrap();
    let mut xs = draws(50_000, || expo.sample(&mut rng));
    assert!(ks_test(&mut xs, |x| 1.0 - (-x).exp()).passes(0.01));
    let gauss = GeneralizedGaussian::new(p("2"), true).unwrap();
    let mut ys = draws(50_000, || gauss.sample(&mut rng));
    let phi = |x: f64| (-0.5 * x * x).exp() / 2.506_628_274_631_000_7;
    assert!(ks_test_density(&mut ys, phi, -12.0, 0.01).passes(0.01));
}

#[test]
fn one_dimensional_ball_is_uniform_interval() {
    let spec = BallSpec::natural(p("2"), 1.0).unwrap();
    let sampler = BallSampler::new(1, spec).unwrap();
    let mut rng = SeedSpec::new(13, 0).stream();
    let xs = draws(100_000, || sampler.sample(&mut rng).coords[0]);
    let (mean, var) = mean_and_variance(&xs);
    assert!(mean.abs() < 3.0 * (var / xs.len() as f64).sqrt());
    assert!((var - 1.0 / 3.0).abs() < 0.01);
}

#[test]
fn disk_radial_law() {
    let spec = BallSpec::natural(p("2"), 1.0).unwrap();
    let sampler = BallSampler::new(2, spec).unwrap();
    let mut rng = SeedSpec::new(14, 0).stream();
    let mut u = draws(100_000, || {
        let x = sampler.sample(&mut rng).coords;
        (x[0] * x[0] + x[1] * x[1]) / 2.0
    });
    assert!(ks_test(&mut u, |v| v.clamp(0.0, 1.0)).passes(0.01));
}

#[test]
fn marginals_match_finite_density() {
    for ps in ["1", "2", "4"] {
        for n in [1usize, 2, 16, 64] {
            let spec = BallSpec::natural(p(ps), 1.0).unwrap();
            let sampler = BallSampler::new(n, spec).unwrap();
            let mut rng = derive_substream(SeedSpec::new(15, n as u64), p(ps).value() as u64);
            let mut xs = draws(100_000, || sampler.sample(&mut rng).coords[0]);
            let edge = finite_support_radius(n, &spec);
            let start = if spec.is_full() { -edge } else { 0.0 };
            let ks = ks_test_density(
                &mut xs,
                |x| coordinate_density_finite(x, n, &spec).unwrap(),
                start,
                edge / 20_000.0,
            );
            assert!(
                ks.statistic < ks.critical_value(0.01),
                "p={ps} n={n}: D={} crit={}",
                ks.statistic,
                ks.critical_value(0.01)
            );
        }
    }
}

#[test]
fn sign_symmetry() {
    let spec = BallSpec::natural(p("4"), 1.0).unwrap();
    let sampler = BallSampler::new(8, spec).unwrap();
    let mut rng = SeedSpec::new(16, 0).stream();
    let pts: Vec<Vec<f64>> = (0..20_000).map(|_| sampler.sample(&mut rng).coords).collect();
    for k in 0..8 {
        let col: Vec<f64> = pts.iter().map(|x| x[k]).collect();
        let (m, v) = mean_and_variance(&col);
        assert!(m.abs() < 4.0 * (v / col.len() as f64).sqrt(), "coordinate {k}: {m}");
    }
}

#[test]
fn positive_quadrant_has_no_negative_coordinates() {
    let spec = BallSpec::new(p("2"), 1.0, Quadrant::Positive).unwrap();
    let mut rng = SeedSpec::new(17, 0).stream();
    for _ in 0..1000 {
        let pt = sample_ball_uniform(5, spec, &mut rng).unwrap();
        assert!(pt.coords.iter().all(|&x| x >= 0.0));
        assert!(pt.in_ball());
    }
}

#[test]
fn uniform_weights_match_plain_ball() {
    let spec = BallSpec::natural(p("2"), 1.5).unwrap();
    let n = 8;
    let weights = vec![1.0 / n as f64; n];
    let weighted = WeightedBallSampler::new(spec, &weights).unwrap();
    let plain = BallSampler::new(n, spec).unwrap();
    let mut a = SeedSpec::new(18, 0).stream();
    let mut b = SeedSpec::new(18, 0).stream();
    for _ in 0..100 {
        let x = weighted.sample(&mut a).coords;
        let y = plain.sample(&mut b).coords;
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() <= 1e-14 * v.abs().max(1.0));
        }
    }
}

#[test]
fn ellipse_radial_law_and_membership() {
    let spec = BallSpec::natural(p("2"), 1.0).unwrap();
    let weights = [0.25, 0.75];
    let sampler = WeightedBallSampler::new(spec, &weights).unwrap();
    let mut rng = SeedSpec::new(19, 0).stream();
    let mut u = draws(100_000, || {
        let x = sampler.sample(&mut rng).coords;
        let s = x[0] * x[0] * 0.25 + x[1] * x[1] * 0.75;
        assert!(s <= 1.0 + 1e-12);
        s
    });
    assert!(ks_test(&mut u, |v| v.clamp(0.0, 1.0)).passes(0.01));
    assert!(WeightedBallSampler::new(spec, &[0.0, 1.0]).is_err());
    assert!(WeightedBallSampler::new(spec, &[-0.2, 1.2]).is_err());
}

#[test]
fn identical_seeds_repeat() {
    let spec = BallSpec::natural(p("3/2"), 2.0).unwrap();
    let seed = SeedSpec::new(99, 4);
    let run = || {
        let mut rng = seed.stream();
        (0..50).map(|_| sample_ball_uniform(7, spec, &mut rng).unwrap().coords).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
    let mut other = seed.with_index(5).stream();
    assert_ne!(run()[0], sample_ball_uniform(7, spec, &mut other).unwrap().coords);
}

#[test]
fn child_seeds_are_distinct() {
    let s = SeedSpec::new(1, 0);
    let mut seen = std::collections::HashSet::new();
    for tag in 0..1000 {
        assert!(seen.insert(s.child(tag)));
    }
    assert_ne!(derive_substream(s.child(3), 0).next_u64(), derive_substream(s, 0).next_u64());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_point_is_in_its_ball(
        n in 1usize..40,
        k in 0usize..6,
        r in 0.05f64..20.0,
        positive in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let pe = p(["1", "2", "4", "4/3", "3", "5/2"][k]);
        let quadrant = if positive || !pe.admits(Quadrant::Full) { Quadrant::Positive } else { Quadrant::Full };
        let spec = BallSpec::new(pe, r, quadrant).unwrap();
        let sampler = BallSampler::new(n, spec).unwrap();
        let mut rng = SeedSpec::new(seed, 0).stream();
        for _ in 0..20 {
            let pt = sampler.sample(&mut rng);
            prop_assert_eq!(pt.n(), n);
            prop_assert!(pt.in_ball());
        }
    }

    #[test]
    fn weighted_points_respect_weights(
        raw in proptest::collection::vec(0.01f64..1.0, 1..12),
        seed in any::<u64>(),
    ) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let spec = BallSpec::natural(p("4"), 1.3).unwrap();
        let sampler = WeightedBallSampler::new(spec, &weights).unwrap();
        let mut rng = SeedSpec::new(seed, 1).stream();
        for _ in 0..20 {
            let x = sampler.sample(&mut rng).coords;
            let s: f64 = x.iter().zip(&weights).map(|(v, w)| v.powi(4) * w).sum();
            prop_assert!(s <= 1.3f64.powi(4) * (1.0 + 1e-12));
        }
    }
}
