//! Monte Carlo estimates of discretised functionals over `M_n`.
//!
//! Samples are generated in fixed-size blocks, each drawn from its own
//! substream of the run seed, and collected in block order. Results are
//! therefore identical for every worker count.

use rayon::prelude::*;

use crate::averages::{
    average_blocks, average_functional, volume_ratio, BlockScheme, Functional, FunctionalSpec,
    Interval,
};
use crate::error::{domain, Error, Result};
use crate::geometry::BallSpec;
use crate::quadrature::{
    kernel_integral_finite_n, kernel_limit, GrowthBound, QuadratureSettings,
};
use crate::geometry::PExponent;
use crate::sampler::{derive_substream, BallSampler, SeedSpec, SeedStream, WeightedBallSampler};
use crate::stats::{log_log_slope, mean_and_variance};

/// Samples per substream block.
pub const BLOCK_SAMPLES: usize = 256;

/// Sample count, seed and worker count for a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: SeedSpec,
    pub threads: usize,
}

impl MonteCarlo {
    pub fn new(samples: usize, seed: SeedSpec) -> Self {
        Self { samples, seed, threads: 1 }
    }

    pub fn with_threads(self, threads: usize) -> Self {
        Self { threads, ..self }
    }

    pub fn with_seed(self, seed: SeedSpec) -> Self {
        Self { seed, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return domain(format!("need at least 2 samples, got {}", self.samples));
        }
        if self.threads == 0 {
            return domain("thread count must be at least 1");
        }
        Ok(())
    }
}

/// Mean and spread of `Y_n` over sampled points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    /// Sample variance of `Y_n` itself, not of the mean.
    pub variance: f64,
    /// `√(variance / samples)`.
    pub stderr: f64,
    pub n: usize,
    pub samples: usize,
    pub seed: SeedSpec,
}

impl MCEstimate {
    fn from_values(values: &[f64], n: usize, seed: SeedSpec) -> Self {
        let (mean, variance) = mean_and_variance(values);
        let variance = variance.max(0.0);
        Self {
            mean,
            variance,
            stderr: (variance / values.len() as f64).sqrt(),
            n,
            samples: values.len(),
            seed,
        }
    }

    /// `|mean − target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if self.stderr == 0.0 {
            if gap == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            gap / self.stderr
        }
    }
}

/// Variance of `Y_n` across an n-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub entries: Vec<(usize, MCEstimate)>,
    /// Closed-form `EY`.
    pub target: f64,
    /// Least-squares slope of `ln Var[Y_n]` against `ln n`; `None` when
    /// some variance is zero.
    pub decay_exponent: Option<f64>,
}

// ---------------------------------------------------------------------------
// Engine

/// Runs `block(rng, count, out)` over the sample blocks and returns the
/// concatenated outputs in block order.
fn run_blocks<T, F>(mc: &MonteCarlo, block: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut SeedStream, usize, &mut Vec<T>) + Sync,
{
    mc.validate()?;
    let blocks = mc.samples.div_ceil(BLOCK_SAMPLES);
    let one = |b: usize| {
        let count = BLOCK_SAMPLES.min(mc.samples - b * BLOCK_SAMPLES);
        let mut rng = derive_substream(mc.seed, b as u64);
        let mut out = Vec::with_capacity(count);
        block(&mut rng, count, &mut out);
        out
    };
    let parts: Vec<Vec<T>> = if mc.threads == 1 {
        (0..blocks).map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(mc.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..blocks).into_par_iter().map(one).collect())
    };
    Ok(parts.into_iter().flatten().collect())
}

/// Draws uniform points of `M_n` and maps each through `statistic`.
fn sample_statistic(
    n: usize,
    spec: &BallSpec,
    mc: &MonteCarlo,
    statistic: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<Vec<f64>> {
    let sampler = BallSampler::new(n, *spec)?;
    run_blocks(mc, |rng, count, out| {
        let mut x = vec![0.0; n];
        for _ in 0..count {
            sampler.sample_into(rng, &mut x);
            out.push(statistic(&x));
        }
    })
}

// ---------------------------------------------------------------------------
// Discretisation

/// Coordinates (0-based) whose grid points `t_k = k/n` fall in `I`:
/// `k = ⌈na⌉+1, …, ⌊nb⌋`.
pub fn interval_indices(interval: &Interval, n: usize) -> std::ops::Range<usize> {
    let nf = n as f64;
    // Snap products that are integers up to rounding.
    let snap = |v: f64| if (v - v.round()).abs() < 1e-9 { v.round() } else { v };
    let first = snap(nf * interval.a).ceil() as usize;
    let last = (snap(nf * interval.b).floor() as usize).min(n);
    first..last.max(first)
}

/// Smallest multiple of `n` at which every interval endpoint that is a
/// rational with denominator at most 64 lands on the grid.
pub fn aligned_dimension(n: usize, intervals: &[Interval]) -> usize {
    let mut l = 1usize;
    for iv in intervals {
        for v in [iv.a, iv.b] {
            if let Some(q) = small_denominator(v, 64) {
                l = lcm(l, q);
            }
        }
    }
    lcm(n.max(1), l)
}

fn small_denominator(v: f64, max_q: usize) -> Option<usize> {
    (1..=max_q).find(|&q| {
        let scaled = v * q as f64;
        (scaled - scaled.round()).abs() < 1e-12 * q as f64
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// `Y_n` evaluated on one point: `(1/nᵐ) Σ a(t) g(x_{k₁}, …, x_{k_m})`
/// over grid indices inside the intervals.
#[derive(Debug, Clone)]
pub struct Discretization {
    spec: FunctionalSpec,
    n: usize,
    ranges: Vec<std::ops::Range<usize>>,
}

impl Discretization {
    pub fn new(spec: &FunctionalSpec, n: usize) -> Result<Self> {
        let m = spec.arity();
        if n < m {
            return domain(format!("n = {n} must be at least the arity {m}"));
        }
        let ranges = spec.intervals.iter().map(|iv| interval_indices(iv, n)).collect();
        Ok(Self { spec: spec.clone(), n, ranges })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let nf = self.n as f64;
        let g = &self.spec.functional;
        let m = self.ranges.len();
        if m == 1 && self.spec.time_weight.is_none() {
            let total: f64 = x[self.ranges[0].clone()].iter().map(|&v| g.eval(&[v])).sum();
            return total / nf;
        }
        if self.ranges.iter().any(|r| r.is_empty()) {
            return 0.0;
        }
        let mut idx: Vec<usize> = self.ranges.iter().map(|r| r.start).collect();
        let mut args = vec![0.0; m];
        let mut times = vec![0.0; m];
        let mut total = 0.0;
        loop {
            for j in 0..m {
                args[j] = x[idx[j]];
                times[j] = (idx[j] + 1) as f64 / nf;
            }
            let w = self.spec.time_weight.as_ref().map_or(1.0, |a| a.eval(&times));
            if w != 0.0 {
                total += w * g.eval(&args);
            }
            // Odometer over the index box.
            let mut j = m;
            loop {
                if j == 0 {
                    return total / nf.powi(m as i32);
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < self.ranges[j].end {
                    break;
                }
                idx[j] = self.ranges[j].start;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Estimators

/// Estimate of `E[Y_n]` over uniform points of `M_n`.
pub fn mc_functional_average(
    functional: &FunctionalSpec,
    n: usize,
    spec: &BallSpec,
    mc: &MonteCarlo,
) -> Result<MCEstimate> {
    let disc = Discretization::new(functional, n)?;
    let values = sample_statistic(n, spec, mc, |x| disc.evaluate(x))?;
    Ok(MCEstimate::from_values(&values, n, mc.seed))
}

/// `Var[Y_n]` over an increasing list of `n`, with the fitted decay rate.
/// Entry `i` uses the seed `mc.seed.child(n_i)`.
pub fn mc_variance_decay(
    functional: &FunctionalSpec,
    n_list: &[usize],
    spec: &BallSpec,
    mc: &MonteCarlo,
    settings: &QuadratureSettings,
) -> Result<ConvergenceRecord> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return domain("n list must be nonempty and strictly increasing");
    }
    let target = average_functional(functional, spec, settings)?.value;
    let entries = n_list
        .iter()
        .map(|&n| {
            let run = mc.with_seed(mc.seed.child(n as u64));
            Ok((n, mc_functional_average(functional, n, spec, &run)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<f64> = entries.iter().map(|e| e.0 as f64).collect();
    let vars: Vec<f64> = entries.iter().map(|e| e.1.variance).collect();
    Ok(ConvergenceRecord { decay_exponent: log_log_slope(&ns, &vars), entries, target })
}

/// Smallest positive `n` with every `s_j·n` an integer, if one exists with
/// denominators up to 10⁶.
pub fn block_granularity(scheme: &BlockScheme) -> Option<usize> {
    scheme
        .blocks()
        .iter()
        .try_fold(1usize, |l, &(s, _)| small_denominator(s, 1_000_000).map(|q| lcm(l, q)))
}

fn block_weights(scheme: &BlockScheme, n_base: usize) -> Result<Vec<f64>> {
    let mut weights = Vec::with_capacity(n_base);
    for &(s, r) in scheme.blocks() {
        let size = s * n_base as f64;
        if (size - size.round()).abs() > 1e-9 || size.round() < 1.0 {
            let hint = match block_granularity(scheme) {
                Some(q) => {
                    let smallest = n_base.div_ceil(q).max(1) * q;
                    format!("; the smallest valid n_base is {q} (next valid at or above {n_base}: {smallest})")
                }
                None => String::new(),
            };
            return domain(format!("block size s·n = {s}·{n_base} is not an integer{hint}"));
        }
        let count = size.round() as usize;
        weights.extend(std::iter::repeat_n(r / n_base as f64, count));
    }
    if weights.len() != n_base {
        return domain(format!("blocks cover {} points, expected {n_base}", weights.len()));
    }
    Ok(weights)
}

/// Estimate of `E[Σ g(x_k) Δt_k]` over the weighted ball of a block scheme.
pub fn mc_block_scheme(
    g: &Functional,
    scheme: &BlockScheme,
    n_base: usize,
    spec: &BallSpec,
    mc: &MonteCarlo,
) -> Result<MCEstimate> {
    if g.arity() != 1 {
        return domain("block schemes take a single-variable functional");
    }
    let weights = block_weights(scheme, n_base)?;
    let sampler = WeightedBallSampler::new(*spec, &weights)?;
    let values = run_blocks(mc, |rng, count, out| {
        let mut x = vec![0.0; n_base];
        for _ in 0..count {
            sampler.sample_into(rng, &mut x);
            out.push(x.iter().zip(&weights).map(|(&v, &w)| w * g.eval(&[v])).sum());
        }
    })?;
    Ok(MCEstimate::from_values(&values, n_base, mc.seed))
}

/// One row of an exchange-gap table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeRow {
    pub n: usize,
    /// Sample mean of `h(Y_n)`.
    pub mean_h: f64,
    pub stderr: f64,
    /// `h(EY)` from the closed form.
    pub h_of_mean: f64,
    /// `|mean_h − h_of_mean|`.
    pub gap: f64,
    pub estimate: MCEstimate,
}

/// `|Ê h(Y_n) − h(EY)|` across `n_list`; entry `i` uses `mc.seed.child(n_i)`.
pub fn mc_exchange_gap(
    h: impl Fn(f64) -> f64 + Sync,
    functional: &FunctionalSpec,
    n_list: &[usize],
    spec: &BallSpec,
    mc: &MonteCarlo,
    settings: &QuadratureSettings,
) -> Result<Vec<ExchangeRow>> {
    let h_of_mean = h(average_functional(functional, spec, settings)?.value);
    n_list
        .iter()
        .map(|&n| {
            let run = mc.with_seed(mc.seed.child(n as u64));
            let disc = Discretization::new(functional, n)?;
            let values = sample_statistic(n, spec, &run, |x| h(disc.evaluate(x)))?;
            let estimate = MCEstimate::from_values(&values, n, run.seed);
            Ok(ExchangeRow {
                n,
                mean_h: estimate.mean,
                stderr: estimate.stderr,
                h_of_mean,
                gap: (estimate.mean - h_of_mean).abs(),
                estimate,
            })
        })
        .collect()
}

/// Ball and annulus estimates of `E[Y_n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusReport {
    pub annulus: MCEstimate,
    pub ball: MCEstimate,
    /// `(r/R)ⁿ`.
    pub volume_ratio: f64,
    /// Ball points rejected for falling inside radius `r`.
    pub rejections: u64,
}

/// Seed tag of the annulus stream in [`mc_annulus`].
pub const ANNULUS_STREAM: u64 = 0xA77;

/// Annulus points come from rejection on the ball, using the independent
/// seed `mc.seed.child(ANNULUS_STREAM)`; the ball estimate uses `mc.seed`.
pub fn mc_annulus(
    functional: &FunctionalSpec,
    inner_radius: f64,
    spec: &BallSpec,
    n: usize,
    mc: &MonteCarlo,
) -> Result<AnnulusReport> {
    if !(inner_radius >= 0.0 && inner_radius < spec.radius) {
        return domain(format!("inner radius {inner_radius} must lie in [0, {})", spec.radius));
    }
    let ball = mc_functional_average(functional, n, spec, mc)?;
    let disc = Discretization::new(functional, n)?;
    let sampler = BallSampler::new(n, *spec)?;
    let floor = n as f64 * spec.p.abs_pow(inner_radius);
    let run = mc.with_seed(mc.seed.child(ANNULUS_STREAM));
    let pairs: Vec<(f64, u64)> = run_blocks(&run, |rng, count, out| {
        let mut x = vec![0.0; n];
        for _ in 0..count {
            let mut rejected = 0;
            loop {
                sampler.sample_into(rng, &mut x);
                let s: f64 = x.iter().map(|&v| spec.p.abs_pow(v)).sum();
                if s >= floor {
                    break;
                }
                rejected += 1;
            }
            out.push((disc.evaluate(&x), rejected));
        }
    })?;
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    Ok(AnnulusReport {
        annulus: MCEstimate::from_values(&values, n, run.seed),
        ball,
        volume_ratio: volume_ratio(inner_radius, spec.radius, n),
        rejections: pairs.iter().map(|p| p.1).sum(),
    })
}

/// The piecewise-linear interpolant of a sampled path with knots at
/// `t_k = k/n` and the value at `t = 0` copied from `x₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    values: Vec<f64>,
}

impl PiecewiseLinearPath {
    pub fn from_coords(coords: &[f64]) -> Self {
        let mut values = Vec::with_capacity(coords.len() + 1);
        values.push(coords[0]);
        values.extend_from_slice(coords);
        Self { values }
    }

    fn refill(&mut self, coords: &[f64]) {
        self.values.clear();
        self.values.push(coords[0]);
        self.values.extend_from_slice(coords);
    }

    /// Number of cells.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    /// Knot values at `t = 0, 1/n, …, 1`.
    pub fn knots(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.n();
        let s = t.clamp(0.0, 1.0) * n as f64;
        let k = (s.floor() as usize).min(n - 1);
        let frac = s - k as f64;
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    /// `∫₀¹ x̃(t) dt`.
    pub fn integral(&self) -> f64 {
        let h = 1.0 / self.n() as f64;
        self.values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
    }

    /// `∫₀¹ x̃(t)² dt`, exact on each linear piece.
    pub fn integral_of_square(&self) -> f64 {
        let h = 1.0 / self.n() as f64;
        self.values.windows(2).map(|w| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0).sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Estimate of `E f(x̃_n)` for a functional of the interpolated path.
pub fn mc_general_functional(
    f: impl Fn(&PiecewiseLinearPath) -> f64 + Sync,
    n: usize,
    spec: &BallSpec,
    mc: &MonteCarlo,
) -> Result<MCEstimate> {
    let sampler = BallSampler::new(n, *spec)?;
    let values = run_blocks(mc, |rng, count, out| {
        let mut x = vec![0.0; n];
        let mut path = PiecewiseLinearPath { values: Vec::with_capacity(n + 1) };
        for _ in 0..count {
            sampler.sample_into(rng, &mut x);
            path.refill(&x);
            out.push(f(&path));
        }
    })?;
    Ok(MCEstimate::from_values(&values, n, mc.seed))
}

/// One row of a kernel-limit report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRow {
    pub n: u64,
    pub kernel: f64,
    pub limit: f64,
    pub gap: f64,
}

/// Finite-n kernel integrals against their limit `∫₀^∞ f e^{−x/p}`.
pub fn kernel_limit_report(
    f: impl Fn(f64) -> f64,
    growth: &GrowthBound,
    p: PExponent,
    n0: i64,
    n_list: &[u64],
    settings: &QuadratureSettings,
) -> Result<Vec<KernelRow>> {
    let limit = kernel_limit(&f, p, growth, settings)?.value;
    n_list
        .iter()
        .map(|&n| {
            let kernel = kernel_integral_finite_n(&f, n, n0, p, settings)?.value;
            Ok(KernelRow { n, kernel, limit, gap: (kernel - limit).abs() })
        })
        .collect()
}

/// Closed-form block average, for pairing with [`mc_block_scheme`].
pub fn block_target(
    g: &Functional,
    scheme: &BlockScheme,
    spec: &BallSpec,
    settings: &QuadratureSettings,
) -> Result<f64> {
    Ok(average_blocks(g, scheme, spec, settings)?.value)
}
