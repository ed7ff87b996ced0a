//! Gamma-function machinery and the normalising constants of the
//! coordinate densities.
//!
//! Every constant is assembled in log space and exponentiated once, so the
//! finite-dimensional coefficients `Γ(1+n/p)/Γ(1+(n−1)/p)` stay finite for
//! very large `n`.

use crate::error::{config, domain, Result};
use crate::geometry::{PExponent, Quadrant};

/// `½ ln(2π)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ζ(k) − 1` for `k = 2, 3, …, 40`.
const ZETA_MINUS_ONE: [f64; 39] = [
    0.644_934_066_848_226_4,
    0.202_056_903_159_594_3,
    0.082_323_233_711_138_19,
    0.036_927_755_143_369_93,
    0.017_343_061_984_449_14,
    0.008_349_277_381_922_827,
    0.004_077_356_197_944_339,
    0.002_008_392_826_082_214,
    9.945_751_278_180_853e-4,
    4.941_886_041_194_646e-4,
    2.460_865_533_080_483e-4,
    1.227_133_475_784_891_5e-4,
    6.124_813_505_870_483e-5,
    3.058_823_630_702_049e-5,
    1.528_225_940_865_187e-5,
    7.637_197_637_899_762e-6,
    3.817_293_264_999_84e-6,
    1.908_212_716_553_939e-6,
    9.539_620_338_727_961e-7,
    4.769_329_867_878_065e-7,
    2.384_505_027_277_33e-7,
    1.192_199_259_653_110_7e-7,
    5.960_818_905_125_948e-8,
    2.980_350_351_465_228e-8,
    1.490_155_482_836_504e-8,
    7.450_711_789_835_429e-9,
    3.725_334_024_788_457e-9,
    1.862_659_723_513_049e-9,
    9.313_274_324_196_682e-10,
    4.656_629_065_033_784e-10,
    2.328_311_833_676_505_5e-10,
    1.164_155_017_270_052e-10,
    5.820_772_087_902_701e-11,
    2.910_385_044_497_1e-11,
    1.455_192_189_104_198_4e-11,
    7.275_959_835_057_481e-12,
    3.637_979_547_378_651e-12,
    1.818_989_650_307_066e-12,
    9.094_947_840_263_889e-13,
];

/// `ln Γ(1 + ε)` for `|ε| ≤ 1/2` from the zeta series. Accurate to a few ulp
/// in the relative sense, including near the zero at `ε = 0`.
fn log_gamma_1p(eps: f64) -> f64 {
    let mut sum = 0.0;
    let mut power = -eps;
    for (i, z) in ZETA_MINUS_ONE.iter().enumerate() {
        power *= -eps;
        let k = (i + 2) as f64;
        let term = z * power / k;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    // ln Γ(1+ε) = ε(1−γ) − ln(1+ε) + Σ_{k≥2} (−1)^k (ζ(k)−1) ε^k / k
    (eps - eps.ln_1p()) - EULER_GAMMA * eps + sum
}

fn log_gamma_lanczos(x: f64) -> f64 {
    let z = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + a.ln()
}

/// `ln Γ(x)` for `x > 0`.
///
/// Uses the zeta series of `ln Γ(1+ε)` on `(0, 2.5)`, which keeps full
/// relative accuracy near the zeros at 1 and 2, and a Lanczos sum above.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("log_gamma requires a finite positive argument, got {x}"));
    }
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(1+x)/x
        log_gamma_1p(x) - x.ln()
    } else if x < 1.5 {
        log_gamma_1p(x - 1.0)
    } else if x < 2.5 {
        // Γ(x) = (x−1) Γ(x−1)
        let eps = x - 2.0;
        eps.ln_1p() + log_gamma_1p(eps)
    } else {
        log_gamma_lanczos(x)
    }
}

/// `ln(√(2π) s^{s−½} e^{−s})`, the leading Stirling term. Only used to
/// cross-check [`log_gamma`] for large arguments.
pub fn stirling_log_gamma(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return domain(format!("stirling_log_gamma requires s > 0, got {s}"));
    }
    Ok(LN_SQRT_2PI + (s - 0.5) * s.ln() - s)
}

/// Stirling correction `ln Γ(z) − [(z−½) ln z − z + ½ ln 2π]` for `z ≥ 8`.
fn stirling_correction(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    r * (1.0 / 12.0
        + r2 * (-1.0 / 360.0
            + r2 * (1.0 / 1260.0 + r2 * (-1.0 / 1680.0 + r2 * (1.0 / 1188.0)))))
}

/// `ln Γ(a + δ) − ln Γ(a)` without forming the two large logarithms when
/// `a` is large.
pub fn log_gamma_ratio(a: f64, delta: f64) -> Result<f64> {
    if !(a > 0.0) || !(a + delta > 0.0) || !delta.is_finite() {
        return domain(format!("log_gamma_ratio requires a > 0 and a + delta > 0, got ({a}, {delta})"));
    }
    let b = a + delta;
    if a.min(b) < 8.0 {
        return Ok(log_gamma_unchecked(b) - log_gamma_unchecked(a));
    }
    // (b−½) ln b − (a−½) ln a − δ = (a−½) ln(1+δ/a) + δ ln b − δ
    Ok((a - 0.5) * (delta / a).ln_1p() + delta * b.ln() - delta + stirling_correction(b)
        - stirling_correction(a))
}

/// `ln Γ(1/p) + (1/p − 1) ln p`, the log of `∫₀^∞ e^{−xᵖ/p} dx`.
pub fn log_half_weight_mass(p: f64) -> f64 {
    let inv = 1.0 / p;
    log_gamma_unchecked(inv) + (inv - 1.0) * p.ln()
}

/// The constant `c` with `ρ(x) = e^{−|x|ᵖ/(pRᵖ)} / c` for the limiting
/// coordinate density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationConstant {
    pub value: f64,
    pub p: PExponent,
    pub radius: f64,
    pub quadrant: Quadrant,
}

impl NormalizationConstant {
    pub fn ln(&self) -> f64 {
        self.value.ln()
    }

    /// The density prefactor `1/c`.
    pub fn prefactor(&self) -> f64 {
        1.0 / self.value
    }
}

/// `2RΓ(1/p)p^{1/p−1}` on the full ball, half of it on the positive orthant.
pub fn normalization_constant(
    p: PExponent,
    radius: f64,
    quadrant: Quadrant,
) -> Result<NormalizationConstant> {
    if !(radius.is_finite() && radius > 0.0) {
        return domain(format!("radius {radius} must be positive and finite"));
    }
    if !p.admits(quadrant) {
        return config(format!("exponent p = {p} only admits the positive quadrant"));
    }
    let mut log_value = radius.ln() + log_half_weight_mass(p.value());
    if quadrant == Quadrant::Full {
        log_value += std::f64::consts::LN_2;
    }
    Ok(NormalizationConstant {
        value: log_value.exp(),
        p,
        radius,
        quadrant,
    })
}

/// `Γ(x)` for moderate positive `x`; convenience for tests and reporting.
pub fn gamma(x: f64) -> Result<f64> {
    log_gamma(x).map(f64::exp)
}
