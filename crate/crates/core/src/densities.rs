//! Coordinate densities on `M_n` and their `n → ∞` limits.
//!
//! For points drawn uniformly from `M_n = {Σ|x_k|ᵖ ≤ nRᵖ}` any `k` fixed
//! coordinates have density
//!
//! ```text
//! ρ_n(x₁..x_k) = pᵏ Γ(1+n/p) / ((2R)ᵏ n^{k/p} Γ(1/p)ᵏ Γ(1+(n−k)/p))
//!                · (1 − Σ|x_i|ᵖ/(nRᵖ))^{(n−k)/p}
//! ```
//!
//! on the support `Σ|x_i|ᵖ ≤ nRᵖ` (drop the `2ᵏ` on the positive orthant).
//! As `n → ∞` this tends to the product of `e^{−|x|ᵖ/(pRᵖ)}/c`, the
//! high-order normal (even numerator) or exponent (positive orthant) laws.

use crate::error::{domain, Result};
use crate::geometry::{BallSpec, Quadrant};
use crate::special::{log_gamma_ratio, log_gamma_unchecked, normalization_constant};

fn outside_quadrant(xs: &[f64], spec: &BallSpec) -> bool {
    spec.quadrant == Quadrant::Positive && xs.iter().any(|&x| x < 0.0)
}

/// Log of the finite-`n` coefficient for `k` coordinates.
fn log_finite_coefficient(k: usize, n: usize, spec: &BallSpec) -> f64 {
    let p = spec.p_value();
    let (kf, nf) = (k as f64, n as f64);
    let mut log_c = kf * p.ln()
        + log_gamma_ratio(1.0 + (nf - kf) / p, kf / p).expect("positive gamma arguments")
        - kf * spec.radius.ln()
        - (kf / p) * nf.ln()
        - kf * log_gamma_unchecked(1.0 / p);
    if spec.quadrant == Quadrant::Full {
        log_c -= kf * std::f64::consts::LN_2;
    }
    log_c
}

/// `(1 − u)^{e}` on `u ∈ [0, 1]`, zero beyond. `0⁰ = 1` keeps the `k = n`
/// densities (uniform on the section) correct on the boundary.
fn kernel_power(u: f64, exponent: f64) -> f64 {
    if u > 1.0 {
        0.0
    } else if exponent == 0.0 {
        1.0
    } else if u == 1.0 {
        0.0
    } else {
        (exponent * (-u).ln_1p()).exp()
    }
}

/// Density of a single coordinate of a uniform point of `M_n` (or `M_n⁺`).
pub fn coordinate_density_finite(x: f64, n: usize, spec: &BallSpec) -> Result<f64> {
    joint_density_finite(&[x], n, spec)
}

/// Joint density of `k = xs.len()` distinct coordinates of a uniform point
/// of `M_n`.
pub fn joint_density_finite(xs: &[f64], n: usize, spec: &BallSpec) -> Result<f64> {
    let k = xs.len();
    if k == 0 {
        return domain("joint density needs at least one coordinate");
    }
    if n == 0 || k > n {
        return domain(format!("need 1 <= k <= n, got k = {k}, n = {n}"));
    }
    if outside_quadrant(xs, spec) {
        return Ok(0.0);
    }
    let p = spec.p_value();
    let scale = n as f64 * spec.p.abs_pow(spec.radius);
    let u: f64 = xs.iter().map(|&x| spec.p.abs_pow(x)).sum::<f64>() / scale;
    let factor = kernel_power(u, (n - k) as f64 / p);
    if factor == 0.0 {
        return Ok(0.0);
    }
    Ok((log_finite_coefficient(k, n, spec)).exp() * factor)
}

/// Limiting density `e^{−|x|ᵖ/(pRᵖ)}/c` of a coordinate.
pub fn coordinate_density_limit(x: f64, spec: &BallSpec) -> f64 {
    if spec.quadrant == Quadrant::Positive && x < 0.0 {
        return 0.0;
    }
    let c = normalization_constant(spec.p, spec.radius, spec.quadrant)
        .expect("BallSpec is validated on construction");
    let p = spec.p_value();
    (-(spec.p.abs_pow(x / spec.radius)) / p).exp() / c.value
}

/// Limiting joint density; coordinates decouple, so this is the product of
/// the marginals.
pub fn joint_density_limit(xs: &[f64], spec: &BallSpec) -> Result<f64> {
    if xs.is_empty() {
        return domain("joint density needs at least one coordinate");
    }
    Ok(xs.iter().map(|&x| coordinate_density_limit(x, spec)).product())
}

/// Gamma density with shape `alpha` and rate `beta`:
/// `β^α/Γ(α) z^{α−1} e^{−βz}`. With `α = 1/p, β = 1` it is the law of
/// `|x|ᵖ/p` when `x` follows the limiting density with `R = 1`.
pub fn gamma_transform_density(z: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
        return domain(format!("gamma density needs alpha, beta > 0, got ({alpha}, {beta})"));
    }
    if z < 0.0 {
        return Ok(0.0);
    }
    if z == 0.0 {
        return Ok(if alpha < 1.0 {
            f64::INFINITY
        } else if alpha == 1.0 {
            beta
        } else {
            0.0
        });
    }
    let log_density = alpha * beta.ln() - log_gamma_unchecked(alpha) + (alpha - 1.0) * z.ln() - beta * z;
    Ok(log_density.exp())
}

/// Right end of the support of a coordinate of `M_n`: `R n^{1/p}`.
pub fn finite_support_radius(n: usize, spec: &BallSpec) -> f64 {
    spec.radius * spec.p.root(n as f64)
}
