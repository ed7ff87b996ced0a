//! Exact uniform sampling on the discretised balls `M_n` and `M_n⁺`.
//!
//! Points are built from generalized-Gaussian coordinates normalised by an
//! independent exponential variate, which gives the uniform law on the
//! ℓᵖ ball without rejection.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{domain, Result};
use crate::geometry::{BallSpec, PExponent, Parity, Quadrant};

/// Random stream used by every sampler in the crate.
pub type SeedStream = ChaCha8Rng;

const STREAM_TAG: &[u8; 16] = b"lpavg/substreams";

/// Root of a family of reproducible streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(root_seed: u64, stream_index: u64) -> Self {
        Self { root_seed, stream_index }
    }

    /// The stream for worker 0.
    pub fn stream(&self) -> SeedStream {
        derive_substream(*self, 0)
    }

    /// The same root with a different stream index.
    pub fn with_index(&self, stream_index: u64) -> Self {
        Self { root_seed: self.root_seed, stream_index }
    }

    /// A seed for a named sub-experiment, e.g. one entry of an n-sweep.
    pub fn child(&self, tag: u64) -> Self {
        self.with_index(splitmix64(self.stream_index ^ splitmix64(tag.wrapping_add(1))))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `worker` under `seed`.
///
/// The key encodes `(root_seed, stream_index)` and the ChaCha stream
/// selector encodes `worker`, so distinct triples never share a keystream.
pub fn derive_substream(seed: SeedSpec, worker: u64) -> SeedStream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.root_seed.to_le_bytes());
    key[8..16].copy_from_slice(&seed.stream_index.to_le_bytes());
    key[16..].copy_from_slice(STREAM_TAG);
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(worker);
    rng
}

fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1]
    1.0 - rng.random::<f64>()
}

/// Natural log of a Gamma(shape, 1) variate.
///
/// Marsaglia–Tsang for shape ≥ 1; shapes below 1 use
/// `Γ(a) = Γ(a+1)·U^{1/a}` in log space so tiny variates do not underflow.
pub fn log_gamma_variate<R: RngCore + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let boosted = log_gamma_variate(shape + 1.0, rng);
        return boosted + open_unit(rng).ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

/// Law with density ∝ `e^{−|x|ᵖ/p}` on ℝ (signed) or `[0, ∞)`.
#[derive(Debug, Clone, Copy)]
pub struct GeneralizedGaussian {
    p: f64,
    inv_p: f64,
    ln_p: f64,
    signed: bool,
}

/// One draw together with `|g|ᵖ`, which the ball construction reuses.
#[derive(Debug, Clone, Copy)]
struct GgDraw {
    value: f64,
    abs_pow: f64,
}

impl GeneralizedGaussian {
    pub fn new(p: PExponent, signed: bool) -> Result<Self> {
        if signed && p.parity() != Parity::EvenNumerator {
            return domain(format!("signed sampling needs an even-numerator exponent, got p = {p}"));
        }
        let pv = p.value();
        Ok(Self { p: pv, inv_p: 1.0 / pv, ln_p: pv.ln(), signed })
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> GgDraw {
        // |g|ᵖ = p·Z with Z ~ Gamma(1/p).
        let ln_z = log_gamma_variate(self.inv_p, rng);
        let ln_abs_pow = self.ln_p + ln_z;
        let magnitude = (ln_abs_pow * self.inv_p).exp();
        let value = if self.signed && rng.next_u32() & 1 == 1 { -magnitude } else { magnitude };
        GgDraw { value, abs_pow: ln_abs_pow.exp() }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.draw(rng).value
    }

    /// Exponent of the law.
    pub fn p(&self) -> f64 {
        self.p
    }
}

/// One generalized-Gaussian draw.
pub fn sample_generalized_gaussian<R: RngCore + ?Sized>(
    p: PExponent,
    signed: bool,
    rng: &mut R,
) -> Result<f64> {
    Ok(GeneralizedGaussian::new(p, signed)?.sample(rng))
}

/// A point of `M_n` (or a weighted variant) with the ball it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub coords: Vec<f64>,
    pub spec: BallSpec,
}

impl SamplePoint {
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// `Σ |x_k|ᵖ`.
    pub fn power_sum(&self) -> f64 {
        self.coords.iter().map(|&x| self.spec.p.abs_pow(x)).sum()
    }

    /// Membership in `M_n` with `1e-12` relative slack.
    pub fn in_ball(&self) -> bool {
        let n = self.n() as f64;
        let bound = n * self.spec.p.abs_pow(self.spec.radius);
        let quadrant_ok =
            self.spec.quadrant == Quadrant::Full || self.coords.iter().all(|&x| x >= 0.0);
        quadrant_ok && self.power_sum() <= bound * (1.0 + 1e-12)
    }
}

/// Reusable uniform sampler for `M_n`.
#[derive(Debug, Clone)]
pub struct BallSampler {
    spec: BallSpec,
    n: usize,
    gg: GeneralizedGaussian,
    scale: f64,
}

impl BallSampler {
    pub fn new(n: usize, spec: BallSpec) -> Result<Self> {
        if n == 0 {
            return domain("ball dimension n must be at least 1");
        }
        let gg = GeneralizedGaussian::new(spec.p, spec.quadrant == Quadrant::Full)?;
        let scale = spec.radius * (n as f64).powf(1.0 / spec.p_value());
        Ok(Self { spec, n, gg, scale })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &BallSpec {
        &self.spec
    }

    /// Fill `out` (length `n`) with one uniform point.
    pub fn sample_into<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.n, "output buffer has the wrong length");
        let mut total = 0.0;
        for slot in out.iter_mut() {
            let g = self.gg.draw(rng);
            *slot = g.value;
            total += g.abs_pow;
        }
        let w: f64 = rng.sample(Exp1);
        total += self.gg.p * w;
        let factor = self.scale / total.powf(self.gg.inv_p);
        for slot in out.iter_mut() {
            *slot *= factor;
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> SamplePoint {
        let mut coords = vec![0.0; self.n];
        self.sample_into(rng, &mut coords);
        SamplePoint { coords, spec: self.spec }
    }
}

/// One uniform point of `M_n` (or `M_n⁺`).
pub fn sample_ball_uniform<R: RngCore + ?Sized>(
    n: usize,
    spec: BallSpec,
    rng: &mut R,
) -> Result<SamplePoint> {
    Ok(BallSampler::new(n, spec)?.sample(rng))
}

/// Uniform sampler for `{Σ |x_k|ᵖ Δt_k ≤ Rᵖ}`.
#[derive(Debug, Clone)]
pub struct WeightedBallSampler {
    inner: BallSampler,
    factors: Vec<f64>,
}

impl WeightedBallSampler {
    pub fn new(spec: BallSpec, weights: &[f64]) -> Result<Self> {
        validate_weights(weights)?;
        let inner = BallSampler::new(weights.len(), spec)?;
        let inv_p = 1.0 / spec.p_value();
        let n = weights.len() as f64;
        // Strip the n^{1/p} scaling, then stretch by Δt_k^{−1/p}.
        let factors = weights.iter().map(|&w| (n * w).powf(-inv_p)).collect();
        Ok(Self { inner, factors })
    }

    pub fn sample_into<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.inner.sample_into(rng, out);
        for (x, f) in out.iter_mut().zip(&self.factors) {
            *x *= f;
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> SamplePoint {
        let mut coords = vec![0.0; self.factors.len()];
        self.sample_into(rng, &mut coords);
        SamplePoint { coords, spec: self.inner.spec }
    }
}

/// Checks that `weights` is a nonempty list of positive numbers summing to 1.
pub fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return domain("weight list is empty");
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return domain(format!("weights must be positive, found {w}"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return domain(format!("weights must sum to 1, got {sum}"));
    }
    Ok(())
}

/// One uniform point of the weighted ball `{Σ |x_k|ᵖ Δt_k ≤ Rᵖ}`.
pub fn sample_weighted_ball_uniform<R: RngCore + ?Sized>(
    spec: BallSpec,
    weights: &[f64],
    rng: &mut R,
) -> Result<SamplePoint> {
    Ok(WeightedBallSampler::new(spec, weights)?.sample(rng))
}
