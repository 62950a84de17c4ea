//! Mellin transform of the per-slot service factor `g(γ) = (1 + γ)^𝒩`.
//!
//! With partial-fraction weights `u_i` the transform is
//! `M(s) = 1 + (s - 1) Σ u_i J_i(s)` where `J_i` is the per-interferer integral
//! evaluated in [`lemma`]. Every value carries a bracket `[lower, upper]`
//! that contains the exact transform; bound computations consume `upper`.

mod lemma;

use thiserror::Error;

use crate::channel::{ChannelError, ChannelSpec};
use crate::numerics::{integrate_adaptive, log_upper_incomplete_gamma, Bounds, Integral, NumericsError, QuadratureSpec};

use lemma::LemmaSeries;

/// Split widths below this are treated as the `δ → 0` limit and the window
/// integral is skipped.
pub const DELTA_SKIP: f64 = 1e-8;
pub const DEFAULT_DELTA: f64 = 1e-9;
pub const DEFAULT_ORDER: usize = 16;
pub const MAX_ORDER: usize = 4096;
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Per-integral target used inside the series path, well below the overall
/// tolerance so that the weighted sum can absorb some cancellation.
const LEMMA_REL_TOL: f64 = 1e-11;
const CLOSED_FORM_SLACK: f64 = 1e-13;
const QUADRATURE_SLACK: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MellinError {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("Mellin argument s = {0} must satisfy s <= 1")]
    ArgumentTooLarge(f64),
    #[error("series produced a non-finite term")]
    NonFinite,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Exact,
    ClosedForm,
    /// Series truncated after index `order`.
    Series { order: usize },
    Quadrature { subdivisions: usize },
}

/// A certified enclosure of a transform value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MellinValue {
    pub lower: f64,
    pub upper: f64,
    pub point: f64,
    pub method: Method,
}

impl MellinValue {
    pub fn exact(value: f64) -> Self {
        Self {
            lower: value,
            upper: value,
            point: value,
            method: Method::Exact,
        }
    }

    pub(crate) fn bracket(lower: f64, upper: f64, method: Method) -> Self {
        Self {
            lower,
            upper,
            point: 0.5 * (lower + upper),
            method,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    fn clamp_unit(mut self) -> Self {
        self.lower = self.lower.max(0.0);
        self.upper = self.upper.min(1.0);
        self.point = self.point.clamp(self.lower, self.upper);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MellinParams {
    pub s: f64,
    /// Starting truncation order; the series path doubles it as needed.
    pub k: usize,
    pub max_order: usize,
    pub delta: f64,
    pub use_quadrature: bool,
    /// Target bracket width relative to `min(M, 1 - M)`.
    pub rel_tol: f64,
    pub quadrature: QuadratureSpec,
}

impl MellinParams {
    pub fn new(s: f64) -> Self {
        Self {
            s,
            k: DEFAULT_ORDER,
            max_order: MAX_ORDER,
            delta: DEFAULT_DELTA,
            use_quadrature: false,
            rel_tol: DEFAULT_REL_TOL,
            quadrature: QuadratureSpec::default(),
        }
    }

    pub fn at(&self, s: f64) -> Self {
        Self { s, ..*self }
    }

    pub fn quadrature_only(mut self) -> Self {
        self.use_quadrature = true;
        self
    }
}

impl Default for MellinParams {
    fn default() -> Self {
        Self::new(0.5)
    }
}

fn effective_delta(delta: f64) -> f64 {
    if delta < DELTA_SKIP {
        0.0
    } else {
        delta
    }
}

/// Truncated series for `∫_0^∞ (1+x)^(s-2) / (a+x) · e^(-x/γ∅) dx` after
/// index `k`, with the bracket `[Ψ^(k+1), Ψ^k]` for `a > 1` and the partial
/// sum plus geometric tail bound for `a <= 1`.
pub fn lemma1_integral(ratio: f64, avg_snr: f64, s: f64, k: usize, delta: f64) -> Result<MellinValue, MellinError> {
    let mut series = LemmaSeries::new(ratio, Some(avg_snr), s, effective_delta(delta), &QuadratureSpec::default())?;
    series.truncation_bracket(k)
}

/// Same as [`lemma1_integral`] without noise: `∫_0^∞ (1+x)^(s-2) / (a+x) dx`.
pub fn lemma2_integral(ratio: f64, s: f64, k: usize, delta: f64) -> Result<MellinValue, MellinError> {
    let mut series = LemmaSeries::new(ratio, None, s, effective_delta(delta), &QuadratureSpec::default())?;
    series.truncation_bracket(k)
}

/// Per-interferer integral evaluated to the tolerance of `params` (with
/// `avg_snr = None` for the interference-limited integral). The bracket is
/// returned even if the order limit was hit before the target width.
pub fn lemma_integral(ratio: f64, avg_snr: Option<f64>, params: &MellinParams) -> Result<MellinValue, MellinError> {
    check_argument(params.s)?;
    if params.s == 1.0 {
        return Err(MellinError::InvalidArgument("series evaluation requires s < 1"));
    }
    let mut series = LemmaSeries::new(ratio, avg_snr, params.s, effective_delta(params.delta), &params.quadrature)?;
    let (value, converged) = series.converge(params.k + 1, params.max_order + 1, LEMMA_REL_TOL)?;
    if !converged {
        log::warn!("series for ratio {ratio} stopped at order {} with relative width {:e}", params.max_order, value.width() / value.point);
    }
    Ok(value)
}

/// Rayleigh-fading transform `e^(1/γ) γ^(s-1) Γ(s, 1/γ)` for `s <= 1`,
/// using whichever of the two equivalent forms avoids cancellation.
pub fn rayleigh_mellin(avg_snr: f64, s: f64) -> Result<f64, MellinError> {
    if !(avg_snr > 0.0) || !avg_snr.is_finite() {
        return Err(MellinError::InvalidArgument("average SNR must be positive and finite"));
    }
    if s.is_nan() || s > 1.0 {
        return Err(MellinError::ArgumentTooLarge(s));
    }
    if s == 1.0 {
        return Ok(1.0);
    }
    let x = 1.0 / avg_snr;
    let ln_g = avg_snr.ln();
    if s < 0.5 {
        Ok((x + (s - 1.0) * ln_g + log_upper_incomplete_gamma(s, x)?).exp())
    } else {
        let t = (x + (s - 1.0) * ln_g + log_upper_incomplete_gamma(s - 1.0, x)?).exp();
        Ok(1.0 + (s - 1.0) * t)
    }
}

fn check_argument(s: f64) -> Result<(), MellinError> {
    if s.is_nan() || s > 1.0 {
        return Err(MellinError::ArgumentTooLarge(s));
    }
    if s == f64::NEG_INFINITY {
        return Err(MellinError::InvalidArgument("Mellin argument must be finite"));
    }
    Ok(())
}

/// `M_{g^𝒩}(s) = M_g(𝒩 (s - 1) + 1)`.
fn scaled_argument(spec: &ChannelSpec, s: f64) -> f64 {
    spec.service_scale() * (s - 1.0) + 1.0
}

/// `E[(1 + γ)^(𝒩 (s-1))]` for the interference channel.
pub fn mellin_service(spec: &ChannelSpec, params: &MellinParams) -> Result<MellinValue, MellinError> {
    check_argument(params.s)?;
    let sigma = scaled_argument(spec, params.s);
    transform(spec.interferer_ratios(), Some(spec.avg_snr()), sigma, params)
}

/// The transform with noise removed (`γ∅ → ∞`); the SNR stored in `spec` is ignored.
pub fn mellin_interference_limited(spec: &ChannelSpec, params: &MellinParams) -> Result<MellinValue, MellinError> {
    check_argument(params.s)?;
    if spec.is_noise_limited() {
        return Err(MellinError::InvalidArgument(
            "interference-limited transform needs at least one interferer",
        ));
    }
    let sigma = scaled_argument(spec, params.s);
    transform(spec.interferer_ratios(), None, sigma, params)
}

/// Quadrature of the integration-by-parts form using the product-form CDF.
/// The returned error is the quadrature's own estimate.
pub fn mellin_service_quadrature(spec: &ChannelSpec, s: f64, q: &QuadratureSpec) -> Result<Integral, MellinError> {
    check_argument(s)?;
    let sigma = scaled_argument(spec, s);
    if sigma == 1.0 {
        return Ok(Integral {
            value: 1.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    transform_quadrature(spec.interferer_ratios(), Some(spec.avg_snr()), sigma, q)
}

fn transform(ratios: &[f64], noise: Option<f64>, sigma: f64, params: &MellinParams) -> Result<MellinValue, MellinError> {
    if sigma == 1.0 {
        return Ok(MellinValue::exact(1.0));
    }
    if ratios.is_empty() {
        let g = noise.ok_or(MellinError::InvalidArgument("channel has neither noise nor interference"))?;
        let v = rayleigh_mellin(g, sigma)?;
        let slack = CLOSED_FORM_SLACK * v.min(1.0 - v) + 4.0 * f64::EPSILON * v;
        return Ok(MellinValue::bracket(v - slack, v + slack, Method::ClosedForm).clamp_unit());
    }
    if !params.use_quadrature {
        let weights = crate::channel::partial_fraction_weights(ratios)?;
        if !weights.is_ill_conditioned() {
            if let Some(v) = transform_series(ratios, &weights.weights, noise, sigma, params)? {
                return Ok(v);
            }
            log::debug!("series bracket too wide at s = {sigma}; using quadrature");
        }
    }
    let q = transform_quadrature(ratios, noise, sigma, &params.quadrature)?;
    // the panel error estimate is heuristic; keep a relative floor under it
    let slack = q.error + QUADRATURE_SLACK * q.value;
    Ok(MellinValue::bracket(
        q.value - slack,
        q.value + slack,
        Method::Quadrature {
            subdivisions: q.subdivisions,
        },
    )
    .clamp_unit())
}

/// `None` when the composed bracket misses the tolerance.
fn transform_series(
    ratios: &[f64],
    weights: &[f64],
    noise: Option<f64>,
    sigma: f64,
    params: &MellinParams,
) -> Result<Option<MellinValue>, MellinError> {
    let delta = effective_delta(params.delta);
    let mut sum_lo = 0.0;
    let mut sum_hi = 0.0;
    let mut magnitude = 0.0;
    let mut order = 0;
    for (&a, &u) in ratios.iter().zip(weights) {
        let mut series = LemmaSeries::new(a, noise, sigma, delta, &params.quadrature)?;
        let (j, converged) = series.converge(params.k + 1, params.max_order + 1, LEMMA_REL_TOL)?;
        if !converged {
            return Ok(None);
        }
        order = order.max(match j.method {
            Method::Series { order } => order,
            _ => 0,
        });
        let (lo, hi) = if u >= 0.0 { (u * j.lower, u * j.upper) } else { (u * j.upper, u * j.lower) };
        sum_lo += lo;
        sum_hi += hi;
        magnitude += (u * j.point).abs();
    }
    let rounding = 4.0 * (ratios.len() as f64 + 1.0) * f64::EPSILON * magnitude;
    let factor = sigma - 1.0;
    let lower = 1.0 + factor * (sum_hi + rounding);
    let upper = 1.0 + factor * (sum_lo - rounding);
    let value = MellinValue::bracket(lower, upper, Method::Series { order });
    let scale = value.point.min(1.0 - value.point);
    if !(scale > 0.0) || value.width() > params.rel_tol * scale {
        return Ok(None);
    }
    Ok(Some(value.clamp_unit()))
}

/// Breakpoints that separate the length scales of the integrand.
fn breakpoints(ratios: &[f64], noise: Option<f64>, sigma: f64) -> Vec<f64> {
    let mut points: Vec<f64> = ratios.to_vec();
    points.push(1.0);
    points.push(1.0 / (2.0 - sigma));
    if let Some(g) = noise {
        points.push(g);
    }
    points.retain(|p| p.is_finite() && *p > 0.0);
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

fn integrate_half_line<F: Fn(f64) -> f64>(f: F, points: &[f64], q: &QuadratureSpec) -> Result<Integral, MellinError> {
    let mut total = Integral {
        value: 0.0,
        error: 0.0,
        subdivisions: 0,
    };
    let mut start = 0.0;
    for &p in points {
        let piece = integrate_adaptive(&f, Bounds::Finite(start, p), q)?;
        total.value += piece.value;
        total.error += piece.error;
        total.subdivisions += piece.subdivisions;
        start = p;
    }
    let tail = integrate_adaptive(&f, Bounds::UpperInfinite(start), q)?;
    total.value += tail.value;
    total.error += tail.error;
    total.subdivisions += tail.subdivisions;
    Ok(total)
}

/// `ln(1 - F(x))` from the product form.
fn ln_survival(ratios: &[f64], noise: Option<f64>, x: f64) -> f64 {
    let decay = noise.map_or(0.0, |g| -x / g);
    decay - ratios.iter().map(|a| (x / a).ln_1p()).sum::<f64>()
}

/// `M = 1 - (1-σ) ∫ (1+x)^(σ-2) (1 - F) dx` for `σ > 0`. For `σ <= 0`, where
/// `M` can be small and that difference would cancel, the equivalent
/// `M = (1-σ) ∫ (1+x)^(σ-2) F dx` is used; its integrand then decays at
/// least like `x^-2`, which the mapped tail panel handles well.
fn transform_quadrature(ratios: &[f64], noise: Option<f64>, sigma: f64, q: &QuadratureSpec) -> Result<Integral, MellinError> {
    let points = breakpoints(ratios, noise, sigma);
    let c = 1.0 - sigma;
    if sigma > 0.0 {
        let survival = integrate_half_line(
            |x: f64| ((sigma - 2.0) * x.ln_1p() + ln_survival(ratios, noise, x)).exp(),
            &points,
            q,
        )?;
        return Ok(Integral {
            value: 1.0 - c * survival.value,
            error: c * survival.error,
            subdivisions: survival.subdivisions,
        });
    }
    let cdf = integrate_half_line(
        |x: f64| ((sigma - 2.0) * x.ln_1p()).exp() * -ln_survival(ratios, noise, x).exp_m1(),
        &points,
        q,
    )?;
    Ok(Integral {
        value: c * cdf.value,
        error: c * cdf.error,
        subdivisions: cdf.subdivisions,
    })
}

/// `-(1/s) ln M_{g^𝒩}(1 - s)`, in bits per slot when `N` symbols per slot are set.
pub fn effective_capacity(spec: &ChannelSpec, s: f64, params: &MellinParams) -> Result<f64, MellinError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(MellinError::InvalidArgument("effective capacity needs a positive, finite s"));
    }
    let m = mellin_service(spec, &params.at(1.0 - s))?;
    Ok(-m.point.ln() / s)
}

/// `E[𝒩 ln(1 + γ)] = 𝒩 ∫_0^∞ (1 - F(x)) / (1 + x) dx`.
pub fn average_capacity(spec: &ChannelSpec, q: &QuadratureSpec) -> Result<f64, MellinError> {
    let ratios = spec.interferer_ratios();
    let noise = Some(spec.avg_snr());
    let points = breakpoints(ratios, noise, 1.0);
    let integral = integrate_half_line(
        |x: f64| (ln_survival(ratios, noise, x) - x.ln_1p()).exp(),
        &points,
        q,
    )?;
    Ok(spec.service_scale() * integral.value)
}
