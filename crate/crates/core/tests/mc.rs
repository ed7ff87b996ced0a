//! Monte Carlo estimators against exact finite-n oracles.
//!
//! For a uniform point of `{Σ x_k² ≤ n}` in ℝⁿ:
//! `E x_k² = n/(n+2)`, `E x_k⁴ = 3n²/((n+2)(n+4))`,
//! `E x_j² x_k² = n²/((n+2)(n+4))` for `j ≠ k`, and for `Y_n = (1/n)Σ x_k²`
//! `Var Y_n = 4n/((n+2)²(n+4))`.

use lpavg_core::averages::{BlockScheme, Functional, FunctionalSpec, Interval, TimeWeight};
use lpavg_core::expr::parse;
use lpavg_core::mc::*;
use lpavg_core::quadrature::{GrowthBound, QuadratureSettings};
use lpavg_core::sampler::SeedSpec;
use lpavg_core::stats::z_distance;
use lpavg_core::{BallSpec, PExponent};

fn gauss_ball() -> BallSpec {
    BallSpec::natural(PExponent::integer(2).unwrap(), 1.0).unwrap()
}

fn g(src: &str) -> Functional {
    Functional::from_expr(&parse(src, &["x"]).unwrap()).unwrap()
}

fn single(src: &str) -> FunctionalSpec {
    FunctionalSpec::single(g(src)).unwrap()
}

fn mc(samples: usize, seed: u64) -> MonteCarlo {
    MonteCarlo::new(samples, SeedSpec::new(seed, 0))
}

fn second_moment(n: f64) -> f64 {
    n / (n + 2.0)
}

fn fourth_moment(n: f64) -> f64 {
    3.0 * n * n / ((n + 2.0) * (n + 4.0))
}

fn var_mean_square(n: f64) -> f64 {
    4.0 * n / ((n + 2.0) * (n + 2.0) * (n + 4.0))
}

#[test]
fn constant_functional_is_exact() {
    let est = mc_functional_average(&single("1"), 50, &gauss_ball(), &mc(500, 1)).unwrap();
    assert!((est.mean - 1.0).abs() < 1e-14);
    assert!(est.variance < 1e-28);
}

#[test]
fn one_dimensional_second_moment() {
    let est = mc_functional_average(&single("x^2"), 1, &gauss_ball(), &mc(20_000, 2)).unwrap();
    assert!(est.z_score(1.0 / 3.0) < 3.0, "{est:?}");
}

#[test]
fn finite_n_second_moment() {
    for n in [16usize, 256] {
        let est = mc_functional_average(&single("x^2"), n, &gauss_ball(), &mc(10_000, 3)).unwrap();
        assert!(est.z_score(second_moment(n as f64)) < 3.0, "n={n}: {est:?}");
        let rel = est.variance / var_mean_square(n as f64) - 1.0;
        assert!(rel.abs() < 0.1, "n={n}: variance off by {rel}");
    }
}

#[test]
fn fourth_moment_and_subinterval() {
    let n = 40;
    let est = mc_functional_average(&single("x^4"), n, &gauss_ball(), &mc(20_000, 4)).unwrap();
    assert!(est.z_score(fourth_moment(n as f64)) < 3.0, "{est:?}");
    // Indices 11..=30 of 40: half the cells.
    let half = FunctionalSpec::new(g("x^4"), vec![Interval::new(0.25, 0.75).unwrap()], None).unwrap();
    let est = mc_functional_average(&half, n, &gauss_ball(), &mc(20_000, 5)).unwrap();
    assert!(est.z_score(0.5 * fourth_moment(n as f64)) < 3.0, "{est:?}");
}

#[test]
fn bivariate_functional() {
    let n = 20;
    let nf = n as f64;
    let f2 = Functional::from_expr(&parse("x1^2*x2^2", &["x1", "x2"]).unwrap()).unwrap();
    let spec_f = FunctionalSpec::new(f2.clone(), vec![Interval::unit(); 2], None).unwrap();
    let est = mc_functional_average(&spec_f, n, &gauss_ball(), &mc(20_000, 6)).unwrap();
    assert!(est.z_score(nf / (nf + 4.0)) < 3.0, "{est:?}");
    // With weight t1: Σ_i (i/n)/n = (n+1)/(2n) on the first factor.
    let w = TimeWeight::from_expr(&parse("t1", &["t1", "t2"]).unwrap());
    let weighted = FunctionalSpec::new(f2, vec![Interval::unit(); 2], Some(w)).unwrap();
    let est = mc_functional_average(&weighted, n, &gauss_ball(), &mc(20_000, 7)).unwrap();
    let truth = (nf + 1.0) / (2.0 * nf) * nf / (nf + 4.0);
    assert!(est.z_score(truth) < 3.0, "{est:?} vs {truth}");
}

#[test]
fn repeated_runs_agree_with_oracle() {
    // Independent seeds; at most two of forty runs may miss by 3 stderr.
    let n = 64;
    let truth = second_moment(n as f64);
    let misses = (0..40)
        .filter(|&s| {
            let est = mc_functional_average(&single("x^2"), n, &gauss_ball(), &mc(2_000, 100 + s))
                .unwrap();
            est.z_score(truth) >= 3.0
        })
        .count();
    assert!(misses <= 2, "{misses} misses");
}

#[test]
fn variance_decay_matches_exact_rate() {
    let rec = mc_variance_decay(
        &single("x^2"),
        &[25, 50, 100, 200, 400],
        &gauss_ball(),
        &mc(10_000, 8),
        &QuadratureSettings::default(),
    )
    .unwrap();
    assert!((rec.target - 1.0).abs() < 1e-10);
    for (n, est) in &rec.entries {
        let rel = est.variance / var_mean_square(*n as f64) - 1.0;
        assert!(rel.abs() < 0.1, "n={n}: {rel}");
    }
    let v100 = rec.entries[2].1.variance;
    let v400 = rec.entries[4].1.variance;
    assert!(v400 < v100 / 2.0);
    // x² is pinned by the ball constraint, so the decay is 1/n², not 1/n.
    let slope = rec.decay_exponent.unwrap();
    assert!((slope + 2.0).abs() < 0.15, "{slope}");
}

#[test]
fn generic_integrands_decay_like_one_over_n() {
    for src in ["x^4", "cos(x)"] {
        let rec = mc_variance_decay(
            &single(src),
            &[100, 200, 400],
            &gauss_ball(),
            &mc(10_000, 9),
            &QuadratureSettings::default(),
        )
        .unwrap();
        let scaled: Vec<f64> = rec.entries.iter().map(|(n, e)| *n as f64 * e.variance).collect();
        let hi = scaled.iter().copied().fold(0.0, f64::max);
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(hi < 2.0 * lo, "{src}: {scaled:?}");
    }
}

#[test]
fn constant_has_no_variance_anywhere() {
    let rec = mc_variance_decay(
        &single("2"),
        &[10, 20],
        &gauss_ball(),
        &mc(100, 1),
        &QuadratureSettings::default(),
    )
    .unwrap();
    assert!(rec.entries.iter().all(|(_, e)| e.variance < 1e-28));
    assert!(rec.decay_exponent.is_none());
}

#[test]
fn uniform_scheme_matches_plain_estimator() {
    let n = 100;
    let a = mc_block_scheme(&g("x^4"), &BlockScheme::uniform(), n, &gauss_ball(), &mc(10_000, 10))
        .unwrap();
    let b = mc_functional_average(&single("x^4"), n, &gauss_ball(), &mc(10_000, 11)).unwrap();
    assert!(z_distance(a.mean, a.stderr, b.mean, b.stderr) < 2.576);
}

#[test]
fn block_scheme_finite_n_oracle() {
    // E Σ Δt_k x_k⁴ = 3 Σ 1/Δt_k /((n+2)(n+4)) = 4n²/((n+2)(n+4)).
    let n = 400;
    let nf = n as f64;
    let scheme: BlockScheme = "(0.5,0.5);(0.5,1.5)".parse().unwrap();
    let est = mc_block_scheme(&g("x^4"), &scheme, n, &gauss_ball(), &mc(10_000, 12)).unwrap();
    let truth = 4.0 * nf * nf / ((nf + 2.0) * (nf + 4.0));
    assert!(est.z_score(truth) < 3.0, "{est:?} vs {truth}");
    let quad = mc_block_scheme(&g("x^2"), &scheme, n, &gauss_ball(), &mc(10_000, 13)).unwrap();
    assert!(quad.z_score(second_moment(nf)) < 3.0, "{quad:?}");
    assert!(mc_block_scheme(&g("x^2"), &scheme, 401, &gauss_ball(), &mc(10, 1)).is_err());
}

#[test]
fn exchange_gaps() {
    let s = QuadratureSettings::default();
    let ident = mc_exchange_gap(|y| y, &single("x^2"), &[400], &gauss_ball(), &mc(10_000, 14), &s)
        .unwrap();
    // Identity: gap is exactly the discretisation bias 2/(n+2) plus noise.
    let bias = 1.0 - second_moment(400.0);
    assert!((ident[0].gap - bias).abs() < 3.0 * ident[0].stderr);

    let square = mc_exchange_gap(|y| y * y, &single("x^2"), &[25, 400], &gauss_ball(), &mc(10_000, 15), &s)
        .unwrap();
    assert!(square[1].gap < square[0].gap);
    // E[Y_n²] = Var + mean² exactly.
    for row in &square {
        let nf = row.n as f64;
        let truth = var_mean_square(nf) + second_moment(nf).powi(2);
        assert!((row.mean_h - truth).abs() < 3.0 * row.stderr, "{row:?}");
    }

    let exp = mc_exchange_gap(f64::exp, &single("x"), &[25, 400], &gauss_ball(), &mc(10_000, 16), &s)
        .unwrap();
    assert_eq!(exp[0].h_of_mean, 1.0);
    assert!(exp[1].gap < exp[0].gap);
    assert!(exp[1].gap < 0.01);
}

#[test]
fn annulus_matches_ball() {
    let spec_f = single("x^2");
    let r0 = mc_annulus(&spec_f, 0.0, &gauss_ball(), 30, &mc(2_000, 17)).unwrap();
    let direct = mc_functional_average(
        &spec_f,
        30,
        &gauss_ball(),
        &mc(2_000, 17).with_seed(SeedSpec::new(17, 0).child(ANNULUS_STREAM)),
    )
    .unwrap();
    assert_eq!(r0.annulus, direct);
    assert_eq!(r0.rejections, 0);

    let rep = mc_annulus(&spec_f, 0.9, &gauss_ball(), 200, &mc(10_000, 18)).unwrap();
    let z = z_distance(rep.annulus.mean, rep.annulus.stderr, rep.ball.mean, rep.ball.stderr);
    assert!(z < 3.0, "{rep:?}");
    assert!((rep.volume_ratio / 7.055_079_108_655_333e-10 - 1.0).abs() < 1e-12);
    assert_eq!(rep.rejections, 0);
    assert!(mc_annulus(&spec_f, 1.0, &gauss_ball(), 10, &mc(10, 1)).is_err());
}

#[test]
fn interpolated_path_functionals() {
    let n = 256;
    let nf = n as f64;
    // The t = 0 cell is flat at x₁; the others average x_k² and x_{k+1}²
    // with a vanishing cross term, giving (1 + 2(n−1)/3)/n · n/(n+2).
    let sq = mc_general_functional(|x| x.integral_of_square(), n, &gauss_ball(), &mc(10_000, 19))
        .unwrap();
    let truth = (1.0 + 2.0 * (nf - 1.0) / 3.0) / nf * second_moment(nf);
    assert!(sq.z_score(truth) < 3.0, "{sq:?} vs {truth}");

    let mid = mc_general_functional(|x| x.eval(0.5), n, &gauss_ball(), &mc(10_000, 20)).unwrap();
    assert!(mid.z_score(0.0) < 3.0);

    let m1 = mc_general_functional(|x| x.max(), 64, &gauss_ball(), &mc(2_000, 21)).unwrap();
    let big = BallSpec::natural(PExponent::integer(2).unwrap(), 2.0).unwrap();
    let m2 = mc_general_functional(|x| x.max(), 64, &big, &mc(2_000, 21)).unwrap();
    assert!(m2.mean > m1.mean);
    assert!((m2.mean - 2.0 * m1.mean).abs() < 1e-12 * m2.mean);
}

#[test]
fn kernel_report_examples() {
    let s = QuadratureSettings::default();
    let p2 = PExponent::integer(2).unwrap();
    let rows = kernel_limit_report(|_| 1.0, &GrowthBound::default(), p2, 0, &[10, 100, 1000], &s)
        .unwrap();
    let expected = [5.0 / 3.0, 200.0 / 102.0, 2000.0 / 1002.0];
    for (row, e) in rows.iter().zip(expected) {
        assert!((row.kernel - e).abs() < 1e-10);
        assert!((row.limit - 2.0).abs() < 1e-10);
    }
    assert!(rows.windows(2).all(|w| w[1].gap < w[0].gap));
    let lin = kernel_limit_report(
        |x| x,
        &GrowthBound::polynomial(1.0, 1.0),
        PExponent::integer(1).unwrap(),
        0,
        &[1000],
        &s,
    )
    .unwrap();
    assert!((lin[0].limit - 1.0).abs() < 1e-10);
    let a = kernel_limit_report(|_| 1.0, &GrowthBound::default(), p2, 0, &[1000], &s).unwrap();
    let b = kernel_limit_report(|_| 1.0, &GrowthBound::default(), p2, 5, &[1000], &s).unwrap();
    assert!((a[0].gap - b[0].gap).abs() < 1e-2);
}

#[test]
fn seeded_runs_repeat_across_thread_counts() {
    let base = mc(3_000, 22);
    let one = mc_functional_average(&single("x^4 - x"), 33, &gauss_ball(), &base).unwrap();
    let again = mc_functional_average(&single("x^4 - x"), 33, &gauss_ball(), &base).unwrap();
    let four = mc_functional_average(&single("x^4 - x"), 33, &gauss_ball(), &base.with_threads(4))
        .unwrap();
    assert_eq!(one, again);
    assert_eq!(one, four);
    let other = mc_functional_average(&single("x^4 - x"), 33, &gauss_ball(), &mc(3_000, 23)).unwrap();
    assert_ne!(one.mean, other.mean);
}

#[test]
fn argument_checks() {
    assert!(mc_functional_average(&single("x"), 5, &gauss_ball(), &mc(1, 1)).is_err());
    let f2 = Functional::from_expr(&parse("x1*x2", &["x1", "x2"]).unwrap()).unwrap();
    let spec_f = FunctionalSpec::new(f2, vec![Interval::unit(); 2], None).unwrap();
    assert!(mc_functional_average(&spec_f, 1, &gauss_ball(), &mc(10, 1)).is_err());
    assert!(mc_functional_average(&single("x"), 5, &gauss_ball(), &mc(10, 1).with_threads(0)).is_err());
}
