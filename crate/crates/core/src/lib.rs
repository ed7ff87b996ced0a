//! Average values and variances of integral functionals on `ℓᵖ` balls of
//! `C[0,1]`.
//!
//! The ball `M = {x : ∫₀¹ |x(t)|ᵖ dt ≤ Rᵖ}` carries no Lebesgue measure, but
//! averages of functionals such as `Y = ∫₀¹ g(x(t)) dt` are well defined as
//! limits of uniform averages over the discretised balls
//! `M_n = {Σ |x_k|ᵖ ≤ nRᵖ}`. This crate provides both sides of that limit:
//!
//! * [`averages`]: closed forms, reduced to one- or low-dimensional
//!   integrals against `e^{−|x|ᵖ/p}` and evaluated by [`quadrature`];
//! * [`mc`]: Monte Carlo estimates of `E[Y_n]`, `Var[Y_n]` on `M_n` using
//!   the exact uniform samplers in [`sampler`].
//!
//! [`densities`] holds the finite-`n` and limiting coordinate densities,
//! [`expr`] a small expression language for integrands.

pub mod averages;
pub mod densities;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod mc;
pub mod quadrature;
pub mod sampler;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{BallSpec, PExponent, Parity, Quadrant};
