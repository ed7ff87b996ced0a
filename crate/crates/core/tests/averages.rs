use lpavg_core::averages::*;
use lpavg_core::expr::parse;
use lpavg_core::quadrature::{GrowthBound, QuadratureSettings};
use lpavg_core::{BallSpec, PExponent, Quadrant};
use proptest::prelude::*;

fn p(s: &str) -> PExponent {
    s.parse().unwrap()
}

fn ball(ps: &str, r: f64) -> BallSpec {
    BallSpec::natural(p(ps), r).unwrap()
}

fn s() -> QuadratureSettings {
    QuadratureSettings::default()
}

fn g1(src: &str) -> Functional {
    Functional::from_expr(&parse(src, &["x"]).unwrap()).unwrap()
}

fn g2(src: &str) -> Functional {
    Functional::from_expr(&parse(src, &["x1", "x2"]).unwrap()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn single_examples() {
    let v = average_single(&g1("x^2"), &ball("2", 1.0), &s()).unwrap().value;
    assert!(close(v, 1.0, 1e-10), "{v}");
    let odd = average_single(&g1("x"), &ball("2", 1.0), &s()).unwrap().value;
    assert!(odd.abs() < 1e-12);
    let pos = average_single(&g1("x"), &ball("1", 1.0), &s()).unwrap().value;
    assert!(close(pos, 1.0, 1e-10), "{pos}");
}

#[test]
fn gaussian_moment_oracle_across_radii() {
    // E[x^{2j}] under N(0, R²) is R^{2j}(2j−1)!!.
    for (src, dfact) in [("x^2", 1.0), ("x^4", 3.0), ("x^6", 15.0)] {
        let deg: i32 = src[2..].parse().unwrap();
        for r in [0.5, 1.0, 3.0] {
            let v = average_single(&g1(src), &ball("2", r), &s()).unwrap().value;
            let truth = dfact * r.powi(deg);
            assert!(close(v, truth, 1e-9 * truth), "{src} R={r}: {v}");
        }
    }
}

#[test]
fn subinterval_examples() {
    let g = g1("x^2");
    let b = ball("2", 1.0);
    let full = average_single(&g, &b, &s()).unwrap();
    assert_eq!(average_subinterval(&g, Interval::unit(), &b, &s()).unwrap(), full);
    let half = average_subinterval(&g, Interval::new(0.0, 0.5).unwrap(), &b, &s()).unwrap();
    assert!(close(half.value, 0.5, 1e-10));
    let empty = average_subinterval(&g, Interval::new(0.3, 0.3).unwrap(), &b, &s()).unwrap();
    assert_eq!(empty.value, 0.0);
}

#[test]
fn subinterval_additivity() {
    let g = g1("x^4 + abs(x)");
    let b = ball("4/3", 1.3);
    let i = average_subinterval(&g, Interval::new(0.1, 0.35).unwrap(), &b, &s()).unwrap().value;
    let j = average_subinterval(&g, Interval::new(0.35, 0.9).unwrap(), &b, &s()).unwrap().value;
    let ij = average_subinterval(&g, Interval::new(0.1, 0.9).unwrap(), &b, &s()).unwrap().value;
    assert!(close(i + j, ij, 1e-10 * ij.abs().max(1.0)));
}

#[test]
fn multivariate_examples() {
    let b = ball("2", 1.0);
    let unit = [Interval::unit(), Interval::unit()];
    let odd = average_multivariate(&g2("x1*x2"), &unit, &b, &s()).unwrap().value;
    assert!(odd.abs() < 1e-10);
    let prod = average_multivariate(&g2("x1^2*x2^2"), &unit, &b, &s()).unwrap().value;
    assert!(close(prod, 1.0, 1e-9), "{prod}");
    let sum = average_multivariate(&g2("x1^2 + x2^2"), &unit, &b, &s()).unwrap().value;
    assert!(close(sum, 2.0, 1e-9), "{sum}");
    let boxed = [Interval::new(0.0, 0.5).unwrap(), Interval::new(0.2, 0.6).unwrap()];
    let part = average_multivariate(&g2("x1^2 + x2^2"), &boxed, &b, &s()).unwrap().value;
    assert!(close(part, 0.4, 1e-9), "{part}");
}

#[test]
fn time_weighted_examples() {
    let b = ball("2", 1.0);
    let g = g1("x^2");
    let one = TimeWeight::from_expr(&parse("1", &["t"]).unwrap());
    let w1 = average_time_weighted(&one, &g, &b, &s()).unwrap().value;
    let plain = average_multivariate(&g, &[Interval::unit()], &b, &s()).unwrap().value;
    assert!(close(w1, plain, 1e-12));
    let lin = TimeWeight::from_expr(&parse("t", &["t"]).unwrap());
    let v = average_time_weighted(&lin, &g, &b, &s()).unwrap().value;
    assert!(close(v, 0.5, 1e-10), "{v}");
    let zero = TimeWeight::from_expr(&parse("0", &["t"]).unwrap());
    assert_eq!(average_time_weighted(&zero, &g, &b, &s()).unwrap().value, 0.0);
    // Two time variables: ∫∫ t1 t2 = 1/4.
    let tw = TimeWeight::from_expr(&parse("t1*t2", &["t1", "t2"]).unwrap());
    let v2 = average_time_weighted(&tw, &g2("x1^2*x2^2"), &b, &s()).unwrap().value;
    assert!(close(v2, 0.25, 1e-9), "{v2}");
}

#[test]
fn block_examples() {
    let b = ball("2", 1.0);
    let uniform = BlockScheme::uniform();
    let scheme: BlockScheme = "(0.5,0.5);(0.5,1.5)".parse().unwrap();
    let g4 = g1("x^4");
    let single = average_single(&g4, &b, &s()).unwrap();
    assert_eq!(average_blocks(&g4, &uniform, &b, &s()).unwrap(), single);
    let v = average_blocks(&g4, &scheme, &b, &s()).unwrap().value;
    assert!(close(v, 4.0, 1e-9), "{v}");
    assert!(close(single.value, 3.0, 1e-9));
    let q = average_blocks(&g1("x^2"), &scheme, &b, &s()).unwrap().value;
    assert!(close(q, 1.0, 1e-10), "{q}");
}

#[test]
fn variance_is_zero() {
    let b = ball("2", 1.0);
    for src in ["x^2", "3", "sin(x)"] {
        let f = FunctionalSpec::single(g1(src)).unwrap();
        assert_eq!(variance_closed_form(&f, &b).variance, 0.0);
    }
}

#[test]
fn exchange_examples() {
    let b = ball("2", 1.0);
    let ey = average_single(&g1("x^2"), &b, &s()).unwrap().value;
    assert_eq!(nonlinear_exchange(|y| y, &g1("x^2"), &b, &s()).unwrap(), ey);
    let sq = nonlinear_exchange(|y| y * y, &g1("x^2"), &b, &s()).unwrap();
    assert!(close(sq, 1.0, 1e-9));
    let e = nonlinear_exchange(f64::exp, &g1("x"), &b, &s()).unwrap();
    assert!(close(e, 1.0, 1e-12));
    // Composition.
    let h = |y: f64| (y + 1.0).ln();
    let h2 = |y: f64| y * y * y;
    let composed = nonlinear_exchange(|y| h(h2(y)), &g1("x^4"), &b, &s()).unwrap();
    assert!(close(composed, h(h2(3.0)), 1e-9));
    let multi = nonlinear_exchange_multi(
        |y| y[0] * y[1],
        &[FunctionalSpec::single(g1("x^2")).unwrap(), FunctionalSpec::single(g1("x^4")).unwrap()],
        &b,
        &s(),
    )
    .unwrap();
    assert!(close(multi, 3.0, 1e-8));
}

#[test]
fn annulus_examples() {
    let b = ball("2", 1.0);
    let g = g1("x^2");
    let ball_avg = average_single(&g, &b, &s()).unwrap();
    let a0 = annulus_average(&g, 0.0, &b, 10, &s()).unwrap();
    assert_eq!(a0.value, ball_avg);
    let a9 = annulus_average(&g, 0.9, &b, 200, &s()).unwrap();
    assert!(close(a9.value.value, 1.0, 1e-10));
    assert!((a9.volume_ratio / 0.9f64.powi(200) - 1.0).abs() < 1e-12);
    assert!(annulus_average(&g, 1.0, &b, 10, &s()).is_err());
}

#[test]
fn sweep_examples() {
    let b = ball("2", 1.0);
    let c = SweepCriteria::default();
    let flat = whole_space_sweep(&g1("2.5"), &b, &[1.0, 2.0, 4.0], &c, &s()).unwrap();
    assert_eq!(flat.verdict, SweepVerdict::Converged);
    assert!(flat.points.iter().all(|(_, e)| close(e.value, 2.5, 1e-10)));
    let quad = whole_space_sweep(&g1("x^2"), &b, &[1.0, 2.0, 4.0, 8.0], &c, &s()).unwrap();
    assert_eq!(quad.verdict, SweepVerdict::Diverged);
    for (r, e) in &quad.points {
        assert!(close(e.value, r * r, 1e-9 * r * r));
    }
    let grid: Vec<f64> = (0..9).map(|k| 10f64.powi(k)).collect();
    let lorentz = whole_space_sweep(&g1("1/(1+x^2)"), &b, &grid, &c, &s()).unwrap();
    assert_eq!(lorentz.verdict, SweepVerdict::Converged);
    let vals: Vec<f64> = lorentz.points.iter().map(|p| p.1.value).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
    assert!(*vals.last().unwrap() < 1e-6);
}

#[test]
fn unbounded_growth_requires_manual_certificate() {
    let e = parse("exp(x)", &["x"]).unwrap();
    assert!(Functional::from_expr(&e).is_err());
    let g = Functional::from_expr_with_growth(&e, GrowthBound::exponential(1.0, 0.0, 1.0)).unwrap();
    // E e^{X}, X ~ N(0,1): e^{1/2}.
    let v = average_single(&g, &ball("2", 1.0), &s()).unwrap().value;
    assert!(close(v, 0.5f64.exp(), 1e-10));
}

#[test]
fn positive_quadrant_of_odd_exponent() {
    // p = 3 on [0, ∞): E x³ = 3^{4/3−1}Γ(4/3)/(3^{1/3−1}Γ(1/3)) = 1.
    let b = BallSpec::new(p("3"), 1.0, Quadrant::Positive).unwrap();
    let v = average_single(&g1("x^3"), &b, &s()).unwrap().value;
    assert!(close(v, 1.0, 1e-10), "{v}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linearity(a in -3.0f64..3.0, c in -3.0f64..3.0, r in 0.3f64..2.5) {
        let b = ball("2", r);
        let f1 = g1("x^2");
        let f2 = g1("cos(x) + x^4");
        let lhs = average_single(
            &Functional::unary(move |x| a * x * x + c * (x.cos() + x.powi(4)),
                GrowthBound::polynomial(1.0 + a.abs() + 2.0 * c.abs(), 4.0), "mix"),
            &b, &s()).unwrap().value;
        let rhs = a * average_single(&f1, &b, &s()).unwrap().value
            + c * average_single(&f2, &b, &s()).unwrap().value;
        prop_assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn radius_substitution(r in 0.2f64..4.0, k in 0usize..3) {
        let ps = ["2", "4", "1"][k];
        let b = ball(ps, r);
        let direct = average_single(&g1("abs(x)^3 + sin(x)"), &b, &s()).unwrap().value;
        let scaled = Functional::unary(move |x| (r * x).abs().powi(3) + (r * x).sin(),
            GrowthBound::polynomial(2.0, 3.0).scaled(r), "g(Rx)");
        let unit = average_single(&scaled, &b.with_radius(1.0).unwrap(), &s()).unwrap().value;
        prop_assert!((direct - unit).abs() < 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn quadratic_block_invariance(s1 in 0.05f64..0.95, r1 in 0.1f64..1.0) {
        // Choose r2 so that Σ s r = 1.
        let s2 = 1.0 - s1;
        let r2 = (1.0 - s1 * r1) / s2;
        let scheme = BlockScheme::new(vec![(s1, r1), (s2, r2)]).unwrap();
        let v = average_blocks(&g1("x^2"), &scheme, &ball("2", 1.0), &s()).unwrap().value;
        prop_assert!((v - 1.0).abs() < 1e-9);
    }
}
