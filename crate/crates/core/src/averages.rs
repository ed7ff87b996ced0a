//! Closed-form average values of integral functionals over ℓᵖ balls.
//!
//! Every evaluator reduces to a weighted integral
//! `(1/c₁ᵐ) ∫ g(Rx) Π e^{−|x_i|ᵖ/p} dx`, where `c₁` is the mass of the
//! one-dimensional weight on the quadrant.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{config, domain, Error, Result};
use crate::expr::Expr;
use crate::geometry::BallSpec;
use crate::quadrature::{
    log_weight_mass, unit_cube_integral, weighted_integral_1d, weighted_integral_nd, Estimate,
    GrowthBound, QuadratureSettings,
};

type RealFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// An integrand `g: ℝᵐ → ℝ` with its growth certificate.
#[derive(Clone)]
pub struct Functional {
    arity: usize,
    g: RealFn,
    growth: GrowthBound,
    label: String,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional")
            .field("arity", &self.arity)
            .field("label", &self.label)
            .field("growth", &self.growth)
            .finish()
    }
}

impl Functional {
    pub fn new(
        arity: usize,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        growth: GrowthBound,
        label: impl Into<String>,
    ) -> Result<Self> {
        if arity == 0 {
            return domain("functional arity must be at least 1");
        }
        Ok(Self { arity, g: Arc::new(g), growth, label: label.into() })
    }

    /// Single-variable functional.
    pub fn unary(
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        growth: GrowthBound,
        label: impl Into<String>,
    ) -> Self {
        Self { arity: 1, g: Arc::new(move |x: &[f64]| g(x[0])), growth, label: label.into() }
    }

    /// Wraps a parsed expression; its variables are the arguments in order.
    /// Fails if no polynomial growth certificate can be derived.
    pub fn from_expr(expr: &Expr) -> Result<Self> {
        let growth = expr.growth_certificate().to_growth_bound().ok_or_else(|| {
            Error::Config(format!(
                "cannot certify polynomial growth of `{expr}`; supply a growth bound"
            ))
        })?;
        Self::from_expr_with_growth(expr, growth)
    }

    pub fn from_expr_with_growth(expr: &Expr, growth: GrowthBound) -> Result<Self> {
        let e = expr.clone();
        Self::new(expr.vars().len(), move |x| e.eval_or_nan(x), growth, expr.to_string())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn growth(&self) -> &GrowthBound {
        &self.growth
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.g)(x)
    }

    fn require_arity(&self, m: usize) -> Result<()> {
        if self.arity != m {
            return domain(format!("functional `{}` has arity {}, expected {m}", self.label, self.arity));
        }
        Ok(())
    }
}

/// A closed subinterval of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
            return domain(format!("interval [{a}, {b}] is not inside [0, 1]"));
        }
        Ok(Self { a, b })
    }

    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }
}

impl FromStr for Interval {
    type Err = Error;

    /// `a:b` or `[a,b]`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('[').trim_end_matches(']');
        let (a, b) = t
            .split_once(':')
            .or_else(|| t.split_once(','))
            .ok_or_else(|| Error::Config(format!("interval `{s}` should look like a:b")))?;
        let parse = |v: &str| {
            v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad interval bound `{v}`")))
        };
        Interval::new(parse(a)?, parse(b)?)
    }
}

/// Optional weight `a(t₁, …, t_m)` on the time variables.
#[derive(Clone)]
pub struct TimeWeight {
    arity: usize,
    a: RealFn,
    label: String,
}

impl fmt::Debug for TimeWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeWeight").field("arity", &self.arity).field("label", &self.label).finish()
    }
}

impl TimeWeight {
    pub fn new(
        arity: usize,
        a: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Self {
        Self { arity, a: Arc::new(a), label: label.into() }
    }

    pub fn from_expr(expr: &Expr) -> Self {
        let e = expr.clone();
        Self::new(expr.vars().len(), move |t| e.eval_or_nan(t), expr.to_string())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        (self.a)(t)
    }
}

/// `Y = ∫_{I₁×⋯×I_m} a(t) g(x(t₁), …, x(t_m)) dt`.
#[derive(Debug, Clone)]
pub struct FunctionalSpec {
    pub functional: Functional,
    pub intervals: Vec<Interval>,
    pub time_weight: Option<TimeWeight>,
}

impl FunctionalSpec {
    /// `∫₀¹ g(x(t)) dt`.
    pub fn single(functional: Functional) -> Result<Self> {
        Self::new(functional, vec![Interval::unit()], None)
    }

    pub fn new(
        functional: Functional,
        intervals: Vec<Interval>,
        time_weight: Option<TimeWeight>,
    ) -> Result<Self> {
        if intervals.len() != functional.arity() {
            return domain(format!(
                "{} interval(s) given for a functional of arity {}",
                intervals.len(),
                functional.arity()
            ));
        }
        if let Some(w) = &time_weight {
            if w.arity != functional.arity() {
                return domain("time weight arity must match the functional");
            }
        }
        Ok(Self { functional, intervals, time_weight })
    }

    pub fn arity(&self) -> usize {
        self.functional.arity()
    }

    /// Product of interval lengths.
    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(Interval::length).product()
    }
}

/// Non-uniform partition with blocks of relative size `s_j` and cell
/// width `r_j / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockScheme {
    blocks: Vec<(f64, f64)>,
}

impl BlockScheme {
    pub fn new(blocks: Vec<(f64, f64)>) -> Result<Self> {
        if blocks.is_empty() {
            return config("block scheme is empty");
        }
        for &(s, r) in &blocks {
            if !(s.is_finite() && s > 0.0 && r.is_finite() && r > 0.0) {
                return config(format!("block ({s}, {r}) must have positive s and r"));
            }
        }
        let sum_s: f64 = blocks.iter().map(|b| b.0).sum();
        let sum_sr: f64 = blocks.iter().map(|b| b.0 * b.1).sum();
        if (sum_s - 1.0).abs() > 1e-12 {
            return config(format!("block sizes must sum to 1, got {sum_s}"));
        }
        if (sum_sr - 1.0).abs() > 1e-12 {
            return config(format!("block widths must satisfy Σ s·r = 1, got {sum_sr}"));
        }
        Ok(Self { blocks })
    }

    pub fn uniform() -> Self {
        Self { blocks: vec![(1.0, 1.0)] }
    }

    pub fn blocks(&self) -> &[(f64, f64)] {
        &self.blocks
    }
}

impl FromStr for BlockScheme {
    type Err = Error;

    /// `(s,r);(s,r);…`
    fn from_str(s: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let inner = part
                .strip_prefix('(')
                .and_then(|p| p.strip_suffix(')'))
                .ok_or_else(|| Error::Config(format!("block `{part}` should look like (s,r)")))?;
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("block `{part}` should look like (s,r)")))?;
            let num = |v: &str| {
                v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{v}` in block")))
            };
            blocks.push((num(a)?, num(b)?));
        }
        BlockScheme::new(blocks)
    }
}

impl fmt::Display for BlockScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|(s, r)| format!("({s},{r})")).collect();
        f.write_str(&parts.join(";"))
    }
}

// ---------------------------------------------------------------------------

/// `(1/c₁ᵐ) ∫ g(Rx) Π e^{−|x_i|ᵖ/p} dx`.
fn normalized_integral(
    g: &Functional,
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    let m = g.arity();
    let r = spec.radius;
    let growth = g.growth.scaled(r);
    let log_mass = m as f64 * log_weight_mass(spec.p_value(), spec.quadrant);
    let norm = (-log_mass).exp();
    let est = if m == 1 {
        weighted_integral_1d(|x| g.eval(&[r * x]), spec.p, spec.quadrant, &growth, settings)
    } else {
        weighted_integral_nd(
            |x: &[f64]| {
                let scaled: Vec<f64> = x.iter().map(|v| r * v).collect();
                g.eval(&scaled)
            },
            m,
            spec.p,
            spec.quadrant,
            &growth,
            settings,
        )
    };
    est.map(|e| e.scale(norm)).map_err(|e| e.scaled(norm))
}

/// `EY` for `Y = ∫₀¹ g(x(t)) dt`.
pub fn average_single(
    g: &Functional,
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    g.require_arity(1)?;
    average_blocks(g, &BlockScheme::uniform(), spec, settings)
}

/// `EY` for `Y = ∫_I g(x(t)) dt`: the interval length times the full average.
pub fn average_subinterval(
    g: &Functional,
    interval: Interval,
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    if interval.length() == 0.0 {
        g.require_arity(1)?;
        return Ok(Estimate::exact(0.0));
    }
    let len = interval.length();
    average_single(g, spec, settings).map(|e| e.scale(len)).map_err(|e| e.scaled(len))
}

/// `EY` for `Y = ∫_{I₁×⋯×I_m} g(x(t₁), …, x(t_m)) dt`.
pub fn average_multivariate(
    g: &Functional,
    intervals: &[Interval],
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    g.require_arity(intervals.len())?;
    let volume: f64 = intervals.iter().map(Interval::length).product();
    if volume == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    normalized_integral(g, spec, settings).map(|e| e.scale(volume)).map_err(|e| e.scaled(volume))
}

/// `EY` for `Y = ∫_{[0,1]ᵐ} a(t) g(x(t₁), …, x(t_m)) dt`:
/// `(∫ a dt)` times the normalised weighted integral of `g`.
pub fn average_time_weighted(
    a: &TimeWeight,
    g: &Functional,
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    g.require_arity(a.arity)?;
    let weight_mass = unit_cube_integral(|t| a.eval(t), a.arity, settings)?;
    if weight_mass.value == 0.0 && weight_mass.abs_error == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let inner = normalized_integral(g, spec, settings)?;
    Ok(Estimate {
        value: weight_mass.value * inner.value,
        abs_error: weight_mass.abs_error * inner.value.abs()
            + weight_mass.value.abs() * inner.abs_error,
        stochastic: weight_mass.stochastic || inner.stochastic,
    })
}

/// Dispatches on the shape of a [`FunctionalSpec`].
pub fn average_functional(
    spec_f: &FunctionalSpec,
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    match &spec_f.time_weight {
        Some(a) => {
            // Intervals restrict the time integral of a.
            let restricted = restrict_weight(a, &spec_f.intervals);
            average_time_weighted(&restricted, &spec_f.functional, spec, settings)
        }
        None => average_multivariate(&spec_f.functional, &spec_f.intervals, spec, settings),
    }
}

fn restrict_weight(a: &TimeWeight, intervals: &[Interval]) -> TimeWeight {
    if intervals.iter().all(|i| *i == Interval::unit()) {
        return a.clone();
    }
    let inner = a.a.clone();
    let iv = intervals.to_vec();
    TimeWeight::new(
        a.arity,
        move |t: &[f64]| {
            if t.iter().zip(&iv).all(|(x, i)| *x >= i.a && *x <= i.b) {
                inner(t)
            } else {
                0.0
            }
        },
        a.label.clone(),
    )
}

/// `EY` under a block discretisation:
/// `(1/c₁) ∫ Σ_j s_j r_j g(R r_j^{−1/p} x) e^{−|x|ᵖ/p} dx`.
pub fn average_blocks(
    g: &Functional,
    scheme: &BlockScheme,
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    g.require_arity(1)?;
    let inv_p = 1.0 / spec.p_value();
    let r = spec.radius;
    let terms: Vec<(f64, f64)> =
        scheme.blocks.iter().map(|&(s, rj)| (s * rj, r * rj.powf(-inv_p))).collect();
    let max_scale = terms.iter().map(|t| t.1).fold(0.0, f64::max);
    let weight_sum: f64 = terms.iter().map(|t| t.0).sum();
    let mut growth = g.growth.scaled(max_scale);
    growth.constant *= weight_sum;
    let integrand = |x: f64| terms.iter().map(|&(w, scale)| w * g.eval(&[scale * x])).sum::<f64>();
    let norm = (-log_weight_mass(spec.p_value(), spec.quadrant)).exp();
    weighted_integral_1d(integrand, spec.p, spec.quadrant, &growth, settings)
        .map(|e| e.scale(norm))
        .map_err(|e| e.scaled(norm))
}

/// Variance of an integral functional over the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCertificate {
    pub variance: f64,
    pub note: &'static str,
}

/// `DY = 0` for every functional of integral form.
///
/// In the limit distinct coordinates decouple, so `E(g(x_i)g(x_j))`
/// factors and `E(Y²) = (EY)²`.
pub fn variance_closed_form(_functional: &FunctionalSpec, _spec: &BallSpec) -> VarianceCertificate {
    VarianceCertificate {
        variance: 0.0,
        note: "E(Y^2) = (EY)^2: cross moments of distinct coordinates factor in the limit",
    }
}

/// `Eh(Y) = h(EY)`.
pub fn nonlinear_exchange(
    h: impl Fn(f64) -> f64,
    g: &Functional,
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let ey = average_single(g, spec, settings)?;
    Ok(h(ey.value))
}

/// `Eh(Y₁, …, Y_k) = h(EY₁, …, EY_k)`.
pub fn nonlinear_exchange_multi(
    h: impl Fn(&[f64]) -> f64,
    functionals: &[FunctionalSpec],
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let means = functionals
        .iter()
        .map(|f| average_functional(f, spec, settings).map(|e| e.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(h(&means))
}

/// Average over the annulus `M_R \ M_r` and the finite-n volume ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusAverage {
    pub value: Estimate,
    /// `(r/R)ⁿ`, the share of `M_n` taken by the inner ball.
    pub volume_ratio: f64,
}

/// The annulus average equals the ball average; `n` only sets the
/// reported volume ratio.
pub fn annulus_average(
    g: &Functional,
    inner_radius: f64,
    spec: &BallSpec,
    n: usize,
    settings: &QuadratureSettings,
) -> Result<AnnulusAverage> {
    if !(inner_radius >= 0.0 && inner_radius < spec.radius) {
        return domain(format!(
            "inner radius {inner_radius} must lie in [0, R) with R = {}",
            spec.radius
        ));
    }
    Ok(AnnulusAverage {
        value: average_single(g, spec, settings)?,
        volume_ratio: volume_ratio(inner_radius, spec.radius, n),
    })
}

/// `(r/R)ⁿ`.
pub fn volume_ratio(r: f64, big_r: f64, n: usize) -> f64 {
    let q = r / big_r;
    match i32::try_from(n) {
        Ok(k) => q.powi(k),
        Err(_) => (n as f64 * q.ln()).exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVerdict {
    Converged,
    Diverged,
    Undetermined,
}

impl SweepVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVerdict::Converged => "CONVERGED",
            SweepVerdict::Diverged => "DIVERGED",
            SweepVerdict::Undetermined => "UNDETERMINED",
        }
    }
}

impl fmt::Display for SweepVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Thresholds for [`whole_space_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCriteria {
    /// Converged when the last step is below `tolerance · max(1, |EY|)`.
    pub tolerance: f64,
    /// Diverged when `|EY|` exceeds this.
    pub divergence_bound: f64,
}

impl Default for SweepCriteria {
    fn default() -> Self {
        Self { tolerance: 1e-6, divergence_bound: 1e12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub points: Vec<(f64, Estimate)>,
    pub verdict: SweepVerdict,
}

/// `EY` over balls of growing radius, with a verdict on the limit.
///
/// Diverged also covers the case where the last two steps have the same
/// sign and the later one is no smaller, which catches polynomial growth
/// long before any absolute bound.
pub fn whole_space_sweep(
    g: &Functional,
    base: &BallSpec,
    radii: &[f64],
    criteria: &SweepCriteria,
    settings: &QuadratureSettings,
) -> Result<Sweep> {
    if radii.is_empty() {
        return domain("radius grid is empty");
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return domain("radius grid must be strictly increasing");
    }
    let points = radii
        .iter()
        .map(|&r| Ok((r, average_single(g, &base.with_radius(r)?, settings)?)))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = points.iter().map(|p| p.1.value).collect();
    Ok(Sweep { verdict: sweep_verdict(&values, criteria), points })
}

fn sweep_verdict(values: &[f64], criteria: &SweepCriteria) -> SweepVerdict {
    let last = *values.last().expect("nonempty");
    if values.iter().any(|v| v.abs() > criteria.divergence_bound) {
        return SweepVerdict::Diverged;
    }
    let steps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let Some(&d_last) = steps.last() else {
        return SweepVerdict::Undetermined;
    };
    if d_last.abs() < criteria.tolerance * last.abs().max(1.0) {
        return SweepVerdict::Converged;
    }
    if steps.len() >= 2 {
        let d_prev = steps[steps.len() - 2];
        if d_prev != 0.0 && d_prev.signum() == d_last.signum() && d_last.abs() >= d_prev.abs() {
            return SweepVerdict::Diverged;
        }
    }
    SweepVerdict::Undetermined
}
