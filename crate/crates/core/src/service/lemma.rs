//! Series evaluation of the per-interferer integral
//!
//! ```text
//! J(a) = ∫_0^∞ (1+x)^(s-2) / (a + x) · e^(-x/γ∅) dx
//!      = e^(1/γ∅) ∫_1^∞ z^(s-2) / (z + a - 1) · e^(-z/γ∅) dz
//! ```
//!
//! The range `[1, ∞)` is cut at `a - 1 ∓ δ` so that `1/(1 + b)` can be
//! expanded geometrically on each side. Below the cut the expansion variable
//! is `z/(a-1)`, above it `(a-1)/z`; both pieces give terms
//! `(-1)^n c_n` with `c_n ≥ 0`. For `a > 1` the magnitudes `c_n` are moments
//! `∫ w(r) r^n dr` of a positive weight on `r ∈ (0, 1)`, hence completely
//! monotone. That makes every partial sum an alternating bound (the
//! truncation bracket), and it stays true after any number of rounds of
//! pairwise averaging of consecutive partial sums, which converge far faster
//! than the raw sums when `r` approaches one near the cut.
//!
//! For `a < 1` both pieces are non-alternating (`1 - a > 0`) and the tail
//! after `N` terms is bounded by `c_(N+1) / a`.
//!
//! Setting `avg_snr` to infinity gives the interference-limited integral
//! (no exponential factor), where each term has an elementary closed form.

use crate::numerics::{
    integrate_adaptive, ln_incomplete_gamma_between, log_upper_incomplete_gamma, Bounds, QuadratureSpec,
};

use super::{MellinError, MellinValue, Method};

/// Relative floating-point slack added to every bracket so that rounding in
/// the incomplete gamma evaluations cannot invert it.
const ROUNDING_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    /// `a > 1`: terms alternate in sign.
    Alternating,
    /// `a <= 1`: positive terms, tail ratio at most `1 - a`.
    Geometric,
}

pub(crate) struct LemmaSeries {
    ratio: f64,
    /// `None` for the interference-limited case.
    avg_snr: Option<f64>,
    s: f64,
    shape: Shape,
    /// Upper end of the inner piece, `a - 1 - δ`; `None` when that piece is empty.
    inner_end: Option<f64>,
    /// Lower end of the outer piece, `max(1, a - 1 + δ)`.
    outer_start: f64,
    /// `e^(1/γ∅)`, or one when interference-limited.
    prefactor: f64,
    /// `∫` over the cut window, already evaluated.
    window: f64,
    magnitudes: Vec<f64>,
}

impl LemmaSeries {
    pub(crate) fn new(
        ratio: f64,
        avg_snr: Option<f64>,
        s: f64,
        delta: f64,
        quadrature: &QuadratureSpec,
    ) -> Result<Self, MellinError> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(MellinError::InvalidArgument("interferer ratio must be positive and finite"));
        }
        if !(s < 1.0) || !s.is_finite() {
            return Err(MellinError::InvalidArgument("series evaluation requires s < 1"));
        }
        if !(delta >= 0.0) || delta >= 0.5 {
            return Err(MellinError::InvalidArgument("split width must satisfy 0 <= delta < 0.5"));
        }
        if let Some(g) = avg_snr {
            if !(g > 0.0) || !g.is_finite() {
                return Err(MellinError::InvalidArgument("average SNR must be positive and finite"));
            }
        }
        let shape = if ratio > 1.0 { Shape::Alternating } else { Shape::Geometric };
        let inner_end = (ratio > 2.0 + delta).then_some(ratio - 1.0 - delta);
        let outer_start = (ratio - 1.0 + delta).max(1.0);
        let window_start = (ratio - 1.0 - delta).max(1.0);
        let window = if outer_start > window_start {
            let g = avg_snr;
            let f = |z: f64| {
                let decay = g.map_or(1.0, |g| (-z / g).exp());
                z.powf(s - 2.0) / (z + ratio - 1.0) * decay
            };
            integrate_adaptive(f, Bounds::Finite(window_start, outer_start), quadrature)?.value
        } else {
            0.0
        };
        Ok(Self {
            ratio,
            avg_snr,
            s,
            shape,
            inner_end,
            outer_start,
            prefactor: avg_snr.map_or(1.0, |g| (1.0 / g).exp()),
            window,
            magnitudes: Vec::new(),
        })
    }

    /// `c_n = |I₁ term n| + |I₂ term n|`.
    fn magnitude(&self, n: usize) -> Result<f64, MellinError> {
        let nf = n as f64;
        let a1 = self.ratio - 1.0;
        let inner = match self.inner_end {
            None => 0.0,
            Some(end) => {
                let ln_scale = -(nf + 1.0) * a1.ln();
                let p = self.s - 1.0 + nf;
                let ln_integral = match self.avg_snr {
                    Some(g) => p * g.ln() + ln_incomplete_gamma_between(p, 1.0 / g, end / g)?,
                    None => ln_power_difference(p, end.ln()),
                };
                (ln_scale + ln_integral).exp()
            }
        };
        let outer = if n > 0 && a1 == 0.0 {
            0.0
        } else {
            let ln_scale = if n == 0 { 0.0 } else { nf * a1.abs().ln() };
            let p = self.s - 2.0 - nf;
            let ln_integral = match self.avg_snr {
                Some(g) => p * g.ln() + log_upper_incomplete_gamma(p, self.outer_start / g)?,
                None => p * self.outer_start.ln() - (-p).ln(),
            };
            (ln_scale + ln_integral).exp()
        };
        Ok(inner + outer)
    }

    fn extend_to(&mut self, count: usize) -> Result<(), MellinError> {
        while self.magnitudes.len() < count {
            let c = self.magnitude(self.magnitudes.len())?;
            if !c.is_finite() {
                return Err(MellinError::NonFinite);
            }
            self.magnitudes.push(c);
        }
        Ok(())
    }

    fn sign(&self, n: usize) -> f64 {
        match self.shape {
            Shape::Alternating if n % 2 == 1 => -1.0,
            _ => 1.0,
        }
    }

    /// `Ψ^k`: prefactor times the sums truncated after index `k`, plus the window.
    pub(crate) fn psi(&mut self, k: usize) -> Result<f64, MellinError> {
        self.extend_to(k + 1)?;
        let partial: f64 = (0..=k).map(|n| self.sign(n) * self.magnitudes[n]).sum();
        Ok(self.prefactor * (partial + self.window))
    }

    fn slack(&self, count: usize) -> f64 {
        let total: f64 = self.magnitudes[..count].iter().sum();
        self.prefactor * (ROUNDING_SLACK * (total + self.window.abs()) + f64::EPSILON * count as f64 * total)
    }

    /// Truncation bracket at order `k`: `[Ψ^(k+1), Ψ^k]` (ordered) for
    /// alternating terms, `[Ψ^k, Ψ^k + tail bound]` otherwise.
    pub(crate) fn truncation_bracket(&mut self, k: usize) -> Result<MellinValue, MellinError> {
        let psi_k = self.psi(k)?;
        let psi_next = self.psi(k + 1)?;
        let slack = self.slack(k + 2);
        let (lower, upper) = match self.shape {
            Shape::Alternating => (psi_k.min(psi_next) - slack, psi_k.max(psi_next) + slack),
            Shape::Geometric => {
                let tail = self.prefactor * self.magnitudes[k + 1] / self.ratio;
                (psi_k - slack, psi_k + tail + slack)
            }
        };
        Ok(MellinValue::bracket(lower, upper, Method::Series { order: k }))
    }

    /// Tightest certified bracket from `count` terms. Alternating series use
    /// repeated averaging of partial sums; the even-indexed entries of every
    /// averaged row stay above the limit and the odd-indexed ones below.
    fn accelerated_bracket(&mut self, count: usize) -> Result<MellinValue, MellinError> {
        self.extend_to(count + 1)?;
        let slack = self.slack(count + 1);
        let (lower, upper) = match self.shape {
            Shape::Geometric => {
                let partial: f64 = self.magnitudes[..count].iter().sum();
                let tail = self.magnitudes[count] / self.ratio;
                let base = self.prefactor * (partial + self.window);
                (base - slack, base + self.prefactor * tail + slack)
            }
            Shape::Alternating => {
                let mut row: Vec<f64> = self.magnitudes[..count]
                    .iter()
                    .enumerate()
                    .scan(0.0, |acc, (n, &c)| {
                        *acc += if n % 2 == 1 { -c } else { c };
                        Some(*acc)
                    })
                    .collect();
                let mut upper = f64::INFINITY;
                let mut lower = f64::NEG_INFINITY;
                while !row.is_empty() {
                    for (k, &v) in row.iter().enumerate() {
                        if k % 2 == 0 {
                            upper = upper.min(v);
                        } else {
                            lower = lower.max(v);
                        }
                    }
                    row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
                }
                (
                    self.prefactor * (lower + self.window) - slack,
                    self.prefactor * (upper + self.window) + slack,
                )
            }
        };
        Ok(MellinValue::bracket(lower, upper, Method::Series { order: count - 1 }))
    }

    /// Doubles the number of terms from `initial` until the bracket width is
    /// below `rel_tol` of its midpoint or `max_terms` is reached. The flag
    /// reports whether the target was met.
    pub(crate) fn converge(
        &mut self,
        initial: usize,
        max_terms: usize,
        rel_tol: f64,
    ) -> Result<(MellinValue, bool), MellinError> {
        let mut count = initial.max(2);
        loop {
            let value = self.accelerated_bracket(count)?;
            if value.width() <= rel_tol * value.point.abs() {
                return Ok((value, true));
            }
            if count >= max_terms {
                return Ok((value, false));
            }
            count = (count * 2).min(max_terms);
        }
    }
}

/// `ln((A^p - 1)/p)` given `ln A > 0`, continuous through `p = 0`.
fn ln_power_difference(p: f64, ln_a: f64) -> f64 {
    if p == 0.0 {
        return ln_a.ln();
    }
    let v = p * ln_a;
    if v > 30.0 {
        v + (-(-v).exp_m1()).ln() - p.ln()
    } else {
        (v.exp_m1() / p).ln()
    }
}
