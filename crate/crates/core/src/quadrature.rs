//! Integration against the weights `e^{−|x|ᵖ/p}` and the finite-n kernels
//! `(1 − x/n)^{(n−n₀)/p}`.
//!
//! One-dimensional integrals use globally adaptive Gauss–Kronrod (7/15)
//! on a finite window whose end is placed from the integrand's growth
//! certificate. Up to three dimensions are handled by nesting; beyond that
//! the weight is sampled directly and a standard error is reported.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::RngCore;

use crate::error::{domain, Error, Result};
use crate::geometry::{PExponent, Quadrant};
use crate::sampler::{derive_substream, GeneralizedGaussian, SeedSpec};
use crate::special::log_half_weight_mass;
use crate::stats::{mean_and_variance, CompensatedSum};

/// Tolerances and limits for the integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Bound on the neglected tail mass beyond the cutoff.
    pub tail_cutoff_tol: f64,
    /// Maximum number of interval bisections per 1-D integral.
    pub max_subdivisions: usize,
    /// Sample count for the Monte Carlo path (dimension above 3).
    pub mc_samples: usize,
    pub mc_seed: SeedSpec,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            tail_cutoff_tol: 1e-14,
            max_subdivisions: 2000,
            mc_samples: 200_000,
            mc_seed: SeedSpec::new(0x5eed, 0),
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
            ("tail_cutoff_tol", self.tail_cutoff_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_subdivisions == 0 {
            return domain("max_subdivisions must be positive");
        }
        Ok(())
    }
}

/// Growth certificate `|f(x)| ≤ C (1+|x|)^k e^{a|x|}`.
///
/// For several variables the bound is read per coordinate, as a product.
/// It is trusted, not checked, and only decides where the tail is cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound {
    pub constant: f64,
    pub degree: f64,
    pub exp_rate: f64,
}

impl GrowthBound {
    pub fn bounded(constant: f64) -> Self {
        Self { constant, degree: 0.0, exp_rate: 0.0 }
    }

    pub fn polynomial(constant: f64, degree: f64) -> Self {
        Self { constant, degree, exp_rate: 0.0 }
    }

    pub fn exponential(constant: f64, degree: f64, exp_rate: f64) -> Self {
        Self { constant, degree, exp_rate }
    }

    /// Certificate for `x ↦ f(Rx)`.
    pub fn scaled(&self, radius: f64) -> Self {
        let r = radius.abs().max(1.0);
        Self {
            constant: self.constant * r.powf(self.degree),
            degree: self.degree,
            exp_rate: self.exp_rate * radius.abs(),
        }
    }

    fn ln_bound(&self, x: f64) -> f64 {
        self.constant.max(f64::MIN_POSITIVE).ln() + self.degree * x.ln_1p() + self.exp_rate * x
    }

    fn ln_slope(&self, x: f64) -> f64 {
        self.degree / (1.0 + x) + self.exp_rate
    }
}

impl Default for GrowthBound {
    fn default() -> Self {
        Self::polynomial(1.0, 0.0)
    }
}

/// A numerical value with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Error bound for deterministic results, standard error for
    /// stochastic ones.
    pub abs_error: f64,
    pub stochastic: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, abs_error: 0.0, stochastic: false }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            abs_error: self.abs_error * factor.abs(),
            stochastic: self.stochastic,
        }
    }

    pub fn map_value(self, f: impl FnOnce(f64) -> f64) -> Self {
        Self { value: f(self.value), ..self }
    }
}

// ---------------------------------------------------------------------------
// Gauss–Kronrod core

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn eval(f: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite { at: x })
    }
}

fn kronrod15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<Panel> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval(f, centre)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(f, centre - dx)?;
        let f2 = eval(f, centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    res_asc *= h;
    res_abs *= h;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value: res_k * half, error: err })
}

/// Globally adaptive integration over consecutive `breaks`.
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<Estimate> {
    let mut heap = BinaryHeap::new();
    let mut finished = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod15(f, w[0], w[1])?);
        }
    }
    let totals = |heap: &BinaryHeap<Panel>, done: &[Panel]| {
        let mut v = CompensatedSum::new();
        let mut e = 0.0;
        for p in heap.iter().chain(done) {
            v.add(p.value);
            e += p.error;
        }
        (v.value(), e)
    };
    let mut subdivisions = 0;
    loop {
        let (value, error) = totals(&heap, &finished);
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Estimate { value, abs_error: error, stochastic: false });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => {
                return Err(Error::Accuracy { estimate: value, error_bound: error, subdivisions })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        let too_narrow = mid <= worst.a || mid >= worst.b
            || (worst.b - worst.a) < 1e-13 * worst.a.abs().max(worst.b.abs()).max(1e-300);
        if too_narrow {
            finished.push(worst);
            continue;
        }
        if subdivisions >= max_subdivisions {
            heap.push(worst);
            let (value, error) = totals(&heap, &finished);
            return Err(Error::Accuracy { estimate: value, error_bound: error, subdivisions });
        }
        heap.push(kronrod15(f, worst.a, mid)?);
        heap.push(kronrod15(f, mid, worst.b)?);
        subdivisions += 1;
    }
}

// ---------------------------------------------------------------------------
// Weighted integrals

/// `ln ∫ e^{−|x|ᵖ/p}` over the quadrant: the one-dimensional weight mass.
pub fn log_weight_mass(p: f64, domain: Quadrant) -> f64 {
    let half = log_half_weight_mass(p);
    match domain {
        Quadrant::Full => half + std::f64::consts::LN_2,
        Quadrant::Positive => half,
    }
}

/// Cutoff `X*` beyond which `sides · ∫_X^∞ bound(x) e^{−xᵖ/p} dx < tol`.
///
/// Past a point where the log-derivative of the bounded integrand is at
/// most `−½`, the tail is below twice its value there.
pub fn tail_cutoff(p: f64, growth: &GrowthBound, sides: f64, tol: f64) -> Result<f64> {
    if p <= 1.0 && growth.exp_rate >= 1.0 {
        return domain("growth certificate is not integrable against the weight");
    }
    let ln_target = (tol / (2.0 * sides)).ln();
    let mut x: f64 = 1.0;
    for _ in 0..20_000 {
        let decays = growth.ln_slope(x) - x.powf(p - 1.0) <= -0.5;
        let small = growth.ln_bound(x) - x.powf(p) / p < ln_target;
        if decays && small {
            return Ok(x);
        }
        x *= 1.01;
    }
    domain("could not place a tail cutoff for the growth certificate")
}

fn initial_breaks(x_max: f64, scale: f64) -> Vec<f64> {
    // Panels of width about `scale` near the origin, widening outward.
    let mut breaks = vec![0.0];
    let mut x = 0.0;
    let mut width = 0.25 * scale;
    while x + width < x_max {
        x += width;
        breaks.push(x);
        width = (width * 1.25).min(scale);
    }
    breaks.push(x_max);
    breaks
}

/// `∫ f(x) e^{−|x|ᵖ/p} dx` over ℝ (`Full`) or `[0, ∞)` (`Positive`).
pub fn weighted_integral_1d(
    f: impl Fn(f64) -> f64,
    p: PExponent,
    domain: Quadrant,
    growth: &GrowthBound,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    settings.validate()?;
    let pv = p.value();
    let sides = if domain == Quadrant::Full { 2.0 } else { 1.0 };
    let x_max = tail_cutoff(pv, growth, sides, settings.tail_cutoff_tol)?;
    let weight = |x: f64| (-p.abs_pow(x) / pv).exp();
    let integrand: Box<dyn Fn(f64) -> f64 + '_> = match domain {
        Quadrant::Full => Box::new(move |x: f64| {
            let w = weight(x);
            if w == 0.0 {
                0.0
            } else {
                (f(x) + f(-x)) * w
            }
        }),
        Quadrant::Positive => Box::new(move |x: f64| {
            let w = weight(x);
            if w == 0.0 {
                0.0
            } else {
                f(x) * w
            }
        }),
    };
    let breaks = initial_breaks(x_max, 1.0);
    let mut est = adaptive(
        integrand.as_ref(),
        &breaks,
        settings.abs_tol,
        settings.rel_tol,
        settings.max_subdivisions,
    )?;
    est.abs_error += settings.tail_cutoff_tol;
    Ok(est)
}

/// `∫⋯∫ f(x₁,…,x_m) Π e^{−|x_i|ᵖ/p} dx`.
///
/// Nested adaptive quadrature for `m ≤ 3`; above that, importance
/// sampling with `settings.mc_samples` draws from the weight itself.
pub fn weighted_integral_nd(
    f: impl Fn(&[f64]) -> f64 + Sync,
    m: usize,
    p: PExponent,
    domain: Quadrant,
    growth: &GrowthBound,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    if m == 0 {
        return self::domain("integral dimension must be at least 1");
    }
    settings.validate()?;
    if m == 1 {
        return weighted_integral_1d(|x| f(&[x]), p, domain, growth, settings);
    }
    if m <= 3 {
        return nested(&f, m, p, domain, growth, settings);
    }
    weighted_integral_mc(&f, m, p, domain, settings)
}

fn nested(
    f: &dyn Fn(&[f64]) -> f64,
    m: usize,
    p: PExponent,
    domain: Quadrant,
    growth: &GrowthBound,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    // Inner integrals run tighter so their errors stay below the outer
    // tolerance once multiplied by the outer weight mass.
    let mass = log_weight_mass(p.value(), domain).exp().max(1.0);
    let inner_settings = QuadratureSettings {
        abs_tol: settings.abs_tol / (4.0 * mass),
        rel_tol: settings.rel_tol / 4.0,
        tail_cutoff_tol: settings.tail_cutoff_tol / (m as f64 * mass),
        ..*settings
    };
    let outer_settings = QuadratureSettings {
        tail_cutoff_tol: settings.tail_cutoff_tol / (m as f64 * mass.powi(m as i32 - 1)),
        ..*settings
    };
    let inner_error = std::cell::Cell::new(0.0f64);
    let failure = std::cell::RefCell::new(None::<Error>);
    let outer = weighted_integral_1d(
        |x1| {
            let g = |rest: &[f64]| {
                let mut point = Vec::with_capacity(m);
                point.push(x1);
                point.extend_from_slice(rest);
                f(&point)
            };
            let inner = if m == 2 {
                weighted_integral_1d(|x| g(&[x]), p, domain, growth, &inner_settings)
            } else {
                nested(&g, m - 1, p, domain, growth, &inner_settings)
            };
            match inner {
                Ok(est) => {
                    inner_error.set(inner_error.get().max(est.abs_error));
                    est.value
                }
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        },
        p,
        domain,
        growth,
        &outer_settings,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut est = outer?;
    est.abs_error += inner_error.get() * mass;
    Ok(est)
}

fn weighted_integral_mc(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    m: usize,
    p: PExponent,
    domain: Quadrant,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    if settings.mc_samples < 2 {
        return self::domain("Monte Carlo path needs at least two samples");
    }
    let gg = GeneralizedGaussian::new(p, false)?;
    let mut rng = derive_substream(settings.mc_seed, 0);
    let mut point = vec![0.0; m];
    let mut values = Vec::with_capacity(settings.mc_samples);
    for _ in 0..settings.mc_samples {
        for x in point.iter_mut() {
            let g = gg.sample(&mut rng);
            *x = if domain == Quadrant::Full && rng.next_u32() & 1 == 1 { -g } else { g };
        }
        let y = f(&point);
        if !y.is_finite() {
            return Err(Error::NonFinite { at: point[0] });
        }
        values.push(y);
    }
    let (mean, var) = mean_and_variance(&values);
    let mass = (m as f64 * log_weight_mass(p.value(), domain)).exp();
    Ok(Estimate {
        value: mean * mass,
        abs_error: (var / values.len() as f64).sqrt() * mass,
        stochastic: true,
    })
}

/// `∫_a^b f(x) dx` by adaptive Gauss–Kronrod.
pub fn integrate_interval(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    settings.validate()?;
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return domain(format!("bad integration bounds [{a}, {b}]"));
    }
    adaptive(&f, &[a, b], settings.abs_tol, settings.rel_tol, settings.max_subdivisions)
}

/// `∫_{[0,1]ᵐ} f(t) dt`: nested for `m ≤ 3`, plain Monte Carlo above.
pub fn unit_cube_integral(
    f: impl Fn(&[f64]) -> f64,
    m: usize,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    if m == 0 {
        return domain("integral dimension must be at least 1");
    }
    settings.validate()?;
    if m > 3 {
        let mut rng = derive_substream(settings.mc_seed, 1);
        let mut point = vec![0.0; m];
        let mut values = Vec::with_capacity(settings.mc_samples);
        for _ in 0..settings.mc_samples.max(2) {
            for t in point.iter_mut() {
                *t = rand::Rng::random::<f64>(&mut rng);
            }
            values.push(f(&point));
        }
        let (mean, var) = mean_and_variance(&values);
        return Ok(Estimate {
            value: mean,
            abs_error: (var / values.len() as f64).sqrt(),
            stochastic: true,
        });
    }
    cube_nested(&f, m, &[], settings)
}

fn cube_nested(
    f: &dyn Fn(&[f64]) -> f64,
    m: usize,
    prefix: &[f64],
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    let inner_settings =
        QuadratureSettings { abs_tol: settings.abs_tol / 4.0, rel_tol: settings.rel_tol / 4.0, ..*settings };
    let failure = std::cell::RefCell::new(None::<Error>);
    let inner_error = std::cell::Cell::new(0.0f64);
    let outer = integrate_interval(
        |t| {
            let mut point = prefix.to_vec();
            point.push(t);
            if point.len() == m {
                return f(&point);
            }
            match cube_nested(f, m, &point, &inner_settings) {
                Ok(e) => {
                    inner_error.set(inner_error.get().max(e.abs_error));
                    e.value
                }
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        1.0,
        settings,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut est = outer?;
    est.abs_error += inner_error.get();
    Ok(est)
}

// ---------------------------------------------------------------------------
// Finite-n kernels

fn kernel_breaks(n: f64, scale: f64) -> Vec<f64> {
    let mut breaks = vec![0.0];
    let mut x = 0.125 * scale;
    while x < n {
        breaks.push(x);
        x *= 2.0;
    }
    breaks.push(n);
    breaks
}

/// `∫₀ⁿ f(x) (1 − x/n)^{(n−n₀)/p} dx`.
pub fn kernel_integral_finite_n(
    f: impl Fn(f64) -> f64,
    n: u64,
    n0: i64,
    p: PExponent,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    settings.validate()?;
    if n == 0 {
        return domain("n must be positive");
    }
    if (n as i128) <= n0 as i128 {
        return domain(format!("n = {n} must exceed n0 = {n0}"));
    }
    let nf = n as f64;
    let pv = p.value();
    let exponent = (nf - n0 as f64) / pv;
    let kernel = |x: f64| {
        let u = -x / nf;
        if u <= -1.0 {
            0.0
        } else {
            (exponent * u.ln_1p()).exp()
        }
    };
    let integrand = |x: f64| f(x) * kernel(x);
    adaptive(
        &integrand,
        &kernel_breaks(nf, pv),
        settings.abs_tol,
        settings.rel_tol,
        settings.max_subdivisions,
    )
}

/// The limit `∫₀^∞ f(x) e^{−x/p} dx` of the finite-n kernel integrals.
pub fn kernel_limit(
    f: impl Fn(f64) -> f64,
    p: PExponent,
    growth: &GrowthBound,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    settings.validate()?;
    let pv = p.value();
    // Substituting x = p·u turns the weight into e^{−u}.
    let u_max = tail_cutoff(1.0, &growth.scaled(pv), pv, settings.tail_cutoff_tol)?;
    let integrand = |u: f64| pv * f(pv * u) * (-u).exp();
    let mut est = adaptive(
        &integrand,
        &initial_breaks(u_max, 1.0),
        settings.abs_tol,
        settings.rel_tol,
        settings.max_subdivisions,
    )?;
    est.abs_error += settings.tail_cutoff_tol;
    Ok(est)
}
