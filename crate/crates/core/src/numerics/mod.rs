//! Special functions and reference quadrature.
//!
//! The incomplete gamma routines cover the whole real parameter line because
//! the series terms of the service transform need `Γ(s - n - 2, x)` with
//! arbitrarily negative first argument. Every routine here is a pure function.

mod gamma;
mod quadrature;

pub use gamma::{
    ln_incomplete_gamma_between, ln_lower_incomplete_gamma, log_upper_incomplete_gamma,
    upper_incomplete_gamma,
};
pub use quadrature::{integrate_adaptive, Bounds, Integral, QuadratureSpec};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NumericsError {
    #[error("argument out of domain: {0}")]
    Domain(&'static str),
    #[error("Γ({a}, {x}) exceeds the f64 range (ln value {ln_value}); use the log-domain variant")]
    Overflow { a: f64, x: f64, ln_value: f64 },
    #[error("incomplete gamma expansion did not converge for a = {a}, x = {x}")]
    NoConvergence { a: f64, x: f64 },
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate}, error {error})")]
    QuadratureFailed {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("integrand returned a non-finite value at {at}")]
    NonFiniteIntegrand { at: f64 },
}

/// `ln(e^p - e^q)` for `p >= q`; returns `-inf` when the difference rounds to zero.
pub(crate) fn ln_sub_exp(p: f64, q: f64) -> f64 {
    if q == f64::NEG_INFINITY {
        return p;
    }
    let d = q - p;
    if d >= 0.0 {
        return f64::NEG_INFINITY;
    }
    p + (-d.exp_m1()).ln()
}

/// `ln(e^p + e^q)`.
pub(crate) fn ln_add_exp(p: f64, q: f64) -> f64 {
    let (hi, lo) = if p >= q { (p, q) } else { (q, p) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
