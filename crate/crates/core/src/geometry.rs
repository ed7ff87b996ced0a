//! Norm exponents and ball descriptors.
//!
//! A ball `{x : ∫₀¹ |x(t)|ᵖ dt ≤ Rᵖ}` is discretised on the uniform grid
//! `t_k = k/n` into `M_n = {Σ |x_k|ᵖ ≤ n Rᵖ}`. Whether the whole ball or only
//! its positive orthant is admissible depends on the arithmetic form of `p`:
//! a rational `p₀/q₀` in lowest terms with even `p₀` makes `xᵖ` an even real
//! function, every other exponent only makes sense for `x ≥ 0`.

use std::fmt;
use std::str::FromStr;

use crate::error::{config, domain, Error, Result};

/// Which part of the ball is sampled or integrated over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrant {
    /// The whole symmetric ball `M`.
    Full,
    /// The orthant `M⁺ = M ∩ {x ≥ 0}`.
    Positive,
}

impl Quadrant {
    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::Full => "full",
            Quadrant::Positive => "positive",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quadrant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Quadrant::Full),
            "positive" | "pos" | "plus" => Ok(Quadrant::Positive),
            other => config(format!("unknown quadrant '{other}' (expected full|positive)")),
        }
    }
}

/// Parity class of a norm exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// `p = p₀/q₀` with `p₀` even: the full ball is admissible.
    EvenNumerator,
    /// Odd numerator or a general real exponent: positive orthant only.
    OddOrReal,
}

/// The norm exponent `p ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PExponent {
    /// `num/den` in lowest terms.
    Rational { num: u64, den: u64 },
    /// A general real exponent.
    Real(f64),
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl PExponent {
    /// Builds `num/den`, reducing to lowest terms.
    pub fn rational(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return domain(format!("exponent {num}/{den} must have positive terms"));
        }
        let g = gcd(num, den);
        let (num, den) = (num / g, den / g);
        if num < den {
            return domain(format!("exponent {num}/{den} is below 1"));
        }
        Ok(PExponent::Rational { num, den })
    }

    pub fn integer(p: u64) -> Result<Self> {
        Self::rational(p, 1)
    }

    pub fn real(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 1.0 {
            return domain(format!("exponent {value} must be a finite real >= 1"));
        }
        Ok(PExponent::Real(value))
    }

    pub fn value(&self) -> f64 {
        match *self {
            PExponent::Rational { num, den } => num as f64 / den as f64,
            PExponent::Real(v) => v,
        }
    }

    pub fn parity(&self) -> Parity {
        match *self {
            PExponent::Rational { num, .. } if num % 2 == 0 => Parity::EvenNumerator,
            _ => Parity::OddOrReal,
        }
    }

    pub fn admits(&self, quadrant: Quadrant) -> bool {
        quadrant == Quadrant::Positive || self.parity() == Parity::EvenNumerator
    }

    /// The quadrant the exponent naturally lives on.
    pub fn natural_quadrant(&self) -> Quadrant {
        match self.parity() {
            Parity::EvenNumerator => Quadrant::Full,
            Parity::OddOrReal => Quadrant::Positive,
        }
    }

    fn integer_value(&self) -> Option<i32> {
        match *self {
            PExponent::Rational { num, den: 1 } if num <= i32::MAX as u64 => Some(num as i32),
            _ => None,
        }
    }

    /// `|x|ᵖ`. For the even-numerator class this is the real value of `xᵖ`.
    pub fn abs_pow(&self, x: f64) -> f64 {
        let a = x.abs();
        match self.integer_value() {
            Some(k) => a.powi(k),
            None => a.powf(self.value()),
        }
    }

    /// `y^{1/p}` for `y ≥ 0`.
    pub fn root(&self, y: f64) -> f64 {
        match self.integer_value() {
            Some(1) => y,
            Some(2) => y.sqrt(),
            _ => y.powf(1.0 / self.value()),
        }
    }
}

impl fmt::Display for PExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PExponent::Rational { num, den: 1 } => write!(f, "{num}"),
            PExponent::Rational { num, den } => write!(f, "{num}/{den}"),
            PExponent::Real(v) => write!(f, "{v:?}"),
        }
    }
}

impl FromStr for PExponent {
    type Err = Error;

    /// Accepts `p0/q0`, an integer, or a decimal. Decimals with an integral
    /// value are read as integers so that `2.0` keeps the even class.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num = a
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad exponent numerator in '{s}'")))?;
            let den = b
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad exponent denominator in '{s}'")))?;
            return Self::rational(num, den);
        }
        if let Ok(k) = s.parse::<u64>() {
            return Self::integer(k);
        }
        let v = s
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("cannot parse exponent '{s}'")))?;
        if v.is_finite() && v.fract() == 0.0 && v >= 1.0 && v < 1e15 {
            Self::integer(v as u64)
        } else {
            Self::real(v)
        }
    }
}

/// `(p, R, quadrant)`: identifies `M` or `M⁺`, and `M_n`/`M_n⁺` once a
/// dimension is supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSpec {
    pub p: PExponent,
    pub radius: f64,
    pub quadrant: Quadrant,
}

impl BallSpec {
    pub fn new(p: PExponent, radius: f64, quadrant: Quadrant) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return domain(format!("radius {radius} must be positive and finite"));
        }
        if !p.admits(quadrant) {
            return config(format!(
                "exponent p = {p} has an odd numerator or is real; only the positive quadrant is admissible"
            ));
        }
        Ok(BallSpec { p, radius, quadrant })
    }

    /// The ball on the exponent's natural quadrant.
    pub fn natural(p: PExponent, radius: f64) -> Result<Self> {
        Self::new(p, radius, p.natural_quadrant())
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.p, radius, self.quadrant)
    }

    pub fn p_value(&self) -> f64 {
        self.p.value()
    }

    pub fn is_full(&self) -> bool {
        self.quadrant == Quadrant::Full
    }
}
