//! Delay bounds for a constant-rate source served by the fading channel.
//!
//! With `M = M_g(1 - s)` (upper bracket) and `x = e^(ρs) M`, the single-hop
//! steady-state kernel is `K(s, -w) = M^w / (1 - x)`, valid while `x < 1`.
//! For `H` identical hops in tandem the kernel becomes
//! `Σ_v x^v C(H-1+v+w, H-1) M^w`. The violation probability bound is the
//! infimum of `K` over `s > 0`; any `s` gives a valid bound, so the optimizer
//! only affects tightness.

use std::cell::RefCell;
use std::collections::HashMap;

use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::channel::ChannelSpec;
use crate::service::{mellin_service, MellinError, MellinParams, MellinValue};

/// Lower and upper exponent of the geometric s-grid, base two.
pub const S_GRID_EXPONENTS: (i32, i32) = (-20, 6);
pub const S_GRID_POINTS_PER_OCTAVE: usize = 4;
pub const RATE_TOLERANCE: f64 = 1e-4;
/// `w` reported by [`delay_bound`] when no stable `s` exists.
pub const UNBOUNDED_DELAY: u64 = u64::MAX;

const GOLDEN_ITERATIONS: usize = 48;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SncError {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("stability condition fails at s = {s} (margin {margin})")]
    Unstable { s: f64, margin: f64 },
    #[error(transparent)]
    Mellin(#[from] MellinError),
}

/// Constant-rate arrivals of `rate` bits per slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalSpec {
    rate: f64,
}

impl ArrivalSpec {
    pub fn new(rate: f64) -> Result<Self, SncError> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(SncError::InvalidArgument("arrival rate must be finite and non-negative"));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Number of identical hops in tandem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HopCount(u32);

impl HopCount {
    pub const ONE: HopCount = HopCount(1);

    pub fn new(hops: u32) -> Result<Self, SncError> {
        if hops == 0 {
            return Err(SncError::InvalidArgument("hop count must be at least one"));
        }
        Ok(Self(hops))
    }

    pub fn get(&self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBoundResult {
    /// Target delay in slots; [`UNBOUNDED_DELAY`] if no bound exists.
    pub w: u64,
    /// Violation probability bound, capped at one.
    pub epsilon: f64,
    pub s_star: f64,
    pub stable: bool,
    /// `K(s*, -w)` before capping.
    pub kernel_value: f64,
    pub mellin_bracket_used: Option<MellinValue>,
}

impl DelayBoundResult {
    fn unstable(w: u64) -> Self {
        Self {
            w,
            epsilon: 1.0,
            s_star: f64::NAN,
            stable: false,
            kernel_value: f64::INFINITY,
            mellin_bracket_used: None,
        }
    }
}

/// `M_α(s, τ, τ + interval) = e^(ρ (s-1) interval)`.
pub fn arrival_mellin(a: &ArrivalSpec, s: f64, interval: u64) -> f64 {
    if a.rate == 0.0 {
        return 1.0;
    }
    (a.rate * (s - 1.0) * interval as f64).exp()
}

/// Evaluates bounds for one channel, caching service transforms by `s`.
/// Every quantity depending on the arrival rate is recomputed on demand, so
/// one analyzer can serve a whole rate sweep.
pub struct SncAnalyzer<'a> {
    spec: &'a ChannelSpec,
    params: MellinParams,
    cache: RefCell<HashMap<u64, Result<MellinValue, MellinError>>>,
}

/// One candidate `s` with its service transform.
#[derive(Clone, Copy)]
struct Point {
    s: f64,
    ln_m: f64,
    value: MellinValue,
}

impl<'a> SncAnalyzer<'a> {
    pub fn new(spec: &'a ChannelSpec) -> Self {
        Self::with_params(spec, MellinParams::default())
    }

    pub fn with_params(spec: &'a ChannelSpec, params: MellinParams) -> Self {
        Self {
            spec,
            params,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &ChannelSpec {
        self.spec
    }

    /// `M_g(1 - s)` with its bracket.
    pub fn service(&self, s: f64) -> Result<MellinValue, SncError> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(SncError::InvalidArgument("s must be positive and finite"));
        }
        let mut cache = self.cache.borrow_mut();
        let entry = cache
            .entry(s.to_bits())
            .or_insert_with(|| mellin_service(self.spec, &self.params.at(1.0 - s)));
        Ok(entry.clone()?)
    }

    fn point(&self, s: f64) -> Result<Point, SncError> {
        let value = self.service(s)?;
        Ok(Point {
            s,
            ln_m: value.upper.ln(),
            value,
        })
    }

    /// `1 - M_α(1+s) M_g(1-s)`.
    pub fn stability_margin(&self, a: &ArrivalSpec, s: f64) -> Result<f64, SncError> {
        let p = self.point(s)?;
        Ok(-(a.rate * s + p.ln_m).exp_m1())
    }

    /// `ln K(s, -w)`; errors when the stability condition fails at `s`.
    pub fn ln_kernel(&self, a: &ArrivalSpec, hops: HopCount, s: f64, w: u64) -> Result<f64, SncError> {
        let p = self.point(s)?;
        ln_kernel_at(a.rate, hops, &p, w)
    }

    pub fn kernel(&self, a: &ArrivalSpec, hops: HopCount, s: f64, w: u64) -> Result<f64, SncError> {
        Ok(self.ln_kernel(a, hops, s, w)?.exp())
    }

    fn grid(&self) -> Vec<Point> {
        let (lo, hi) = S_GRID_EXPONENTS;
        let steps = (hi - lo) as usize * S_GRID_POINTS_PER_OCTAVE;
        (0..=steps)
            .filter_map(|j| {
                let s = 2f64.powf(lo as f64 + j as f64 / S_GRID_POINTS_PER_OCTAVE as f64);
                match self.point(s) {
                    Ok(p) if p.ln_m < 0.0 => Some(p),
                    Ok(_) => None,
                    Err(e) => {
                        log::debug!("skipping s = {s}: {e}");
                        None
                    }
                }
            })
            .collect()
    }

    /// Minimizes `objective` over the s-grid, then refines by golden-section
    /// search in `ln s` between the neighbours of the best grid point. Returns
    /// the best point found and its objective value.
    fn minimize<F>(&self, grid: &[Point], objective: F) -> Option<(Point, f64)>
    where
        F: Fn(&Point) -> f64,
    {
        let values: Vec<f64> = grid.iter().map(&objective).collect();
        let (best, &best_value) = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|x, y| x.1.total_cmp(y.1))?;
        let mut result = (grid[best], best_value);
        let lo = grid[best.saturating_sub(1)].s.ln();
        let hi = grid[(best + 1).min(grid.len() - 1)].s.ln();
        if hi <= lo {
            return Some(result);
        }
        let eval = |ln_s: f64| -> Option<(Point, f64)> {
            let p = self.point(ln_s.exp()).ok()?;
            if p.ln_m >= 0.0 {
                return None;
            }
            let v = objective(&p);
            v.is_finite().then_some((p, v))
        };
        let score = |r: &Option<(Point, f64)>| r.map_or(f64::INFINITY, |(_, v)| v);
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = eval(c);
        let mut fd = eval(d);
        for _ in 0..GOLDEN_ITERATIONS {
            if score(&fc) < score(&fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = eval(d);
            }
        }
        for candidate in [fc, fd].into_iter().flatten() {
            if candidate.1 < result.1 {
                result = candidate;
            }
        }
        Some(result)
    }

    /// `inf_s K(s, -w)`, capped at one.
    pub fn violation_probability(&self, a: &ArrivalSpec, hops: HopCount, w: u64) -> DelayBoundResult {
        let grid = self.grid();
        self.violation_on(&grid, a, hops, w)
    }

    fn violation_on(&self, grid: &[Point], a: &ArrivalSpec, hops: HopCount, w: u64) -> DelayBoundResult {
        let objective = |p: &Point| ln_kernel_at(a.rate, hops, p, w).unwrap_or(f64::INFINITY);
        match self.minimize(grid, objective) {
            None => DelayBoundResult::unstable(w),
            Some((p, ln_k)) => DelayBoundResult {
                w,
                epsilon: ln_k.exp().min(1.0),
                s_star: p.s,
                stable: true,
                kernel_value: ln_k.exp(),
                mellin_bracket_used: Some(p.value),
            },
        }
    }

    /// Smallest `w` whose violation bound is at most `epsilon`.
    pub fn delay_bound(&self, a: &ArrivalSpec, hops: HopCount, epsilon: f64) -> Result<DelayBoundResult, SncError> {
        if !(epsilon > 0.0) || epsilon > 1.0 {
            return Err(SncError::InvalidArgument("target probability must lie in (0, 1]"));
        }
        let grid = self.grid();
        if epsilon == 1.0 {
            let mut r = self.violation_on(&grid, a, hops, 0);
            if r.stable {
                r.epsilon = 1.0;
            }
            return Ok(r);
        }
        let ln_eps = epsilon.ln();
        // Per-s smallest delay; its minimum over the grid is attained by some
        // s, hence an upper bound on the answer.
        let best = grid
            .iter()
            .filter_map(|p| smallest_delay(a.rate, hops, p, ln_eps).map(|w| (w, p)))
            .min_by_key(|(w, _)| *w);
        let Some((mut w, _)) = best else {
            return Ok(DelayBoundResult::unstable(UNBOUNDED_DELAY));
        };
        let mut result = self.violation_on(&grid, a, hops, w);
        // Refinement between grid points can only lower the delay.
        while w > 0 {
            let trial = self.violation_on(&grid, a, hops, w - 1);
            if !(trial.stable && trial.kernel_value <= epsilon) {
                break;
            }
            w -= 1;
            result = trial;
        }
        Ok(result)
    }

    /// Largest constant rate whose violation bound at delay `w` is at most `epsilon`.
    pub fn max_rate(&self, hops: HopCount, w: u64, epsilon: f64) -> Result<f64, SncError> {
        if !(epsilon > 0.0) || epsilon >= 1.0 {
            return Err(SncError::InvalidArgument("target probability must lie in (0, 1)"));
        }
        let grid = self.grid();
        let ln_eps = epsilon.ln();
        let objective = |p: &Point| -rate_at(hops, p, w, ln_eps).unwrap_or(f64::NEG_INFINITY);
        Ok(self.minimize(&grid, objective).map_or(0.0, |(_, v)| (-v).max(0.0)))
    }
}

/// `ln Σ_v x^v C(H-1+v+w, H-1) M^w`, `x = e^(ρs) M`.
///
/// The series is a negative-binomial tail scaled by `(1-x)^-H`, which gives
/// the finite form `M^w (1-x)^-H Σ_{j<H} C(w+H-1, j) (1-x)^j x^(H-1-j)`.
fn ln_kernel_at(rate: f64, hops: HopCount, p: &Point, w: u64) -> Result<f64, SncError> {
    let ln_x = rate * p.s + p.ln_m;
    if ln_x >= 0.0 {
        return Err(SncError::Unstable {
            s: p.s,
            margin: -ln_x.exp_m1(),
        });
    }
    let wf = w as f64;
    let h = hops.get() as u64;
    let ln_gap = (-ln_x.exp_m1()).ln();
    let head = wf * p.ln_m - h as f64 * ln_gap;
    if h == 1 {
        return Ok(head);
    }
    let ln_sum = (0..h)
        .map(|j| ln_binomial(w + h - 1, j) + j as f64 * ln_gap + (h - 1 - j) as f64 * ln_x)
        .fold(f64::NEG_INFINITY, ln_add);
    Ok(head + ln_sum)
}

fn ln_add(p: f64, q: f64) -> f64 {
    let (hi, lo) = if p >= q { (p, q) } else { (q, p) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Smallest integer `w` with `K(s, -w) <= ε` at this `s`, if stable.
fn smallest_delay(rate: f64, hops: HopCount, p: &Point, ln_eps: f64) -> Option<u64> {
    let ln_x = rate * p.s + p.ln_m;
    if ln_x >= 0.0 {
        return None;
    }
    if hops.get() == 1 {
        let w = ((ln_eps + (-ln_x.exp_m1()).ln()) / p.ln_m).ceil().max(0.0);
        if w >= u64::MAX as f64 / 2.0 {
            return None;
        }
        let mut w = w as u64;
        // guard the ceiling against rounding at the boundary
        while ln_kernel_at(rate, hops, p, w).ok()? > ln_eps {
            w += 1;
        }
        while w > 0 && ln_kernel_at(rate, hops, p, w - 1).ok()? <= ln_eps {
            w -= 1;
        }
        return Some(w);
    }
    let feasible = |w: u64| ln_kernel_at(rate, hops, p, w).map(|k| k <= ln_eps);
    if feasible(0).ok()? {
        return Some(0);
    }
    let mut hi = 1u64;
    while !feasible(hi).ok()? {
        hi = hi.checked_mul(2)?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid).ok()? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Largest rate with `K(s, -w) <= ε` at this `s`.
fn rate_at(hops: HopCount, p: &Point, w: u64, ln_eps: f64) -> Option<f64> {
    if hops.get() == 1 {
        // M^w / (1 - e^(ρs) M) <= ε  ⇔  e^(ρs) <= (1 - M^w/ε) / M
        let slack = -((w as f64) * p.ln_m - ln_eps).exp_m1();
        if !(slack > 0.0) {
            return None;
        }
        return Some((slack.ln() - p.ln_m) / p.s);
    }
    let feasible = |rate: f64| ln_kernel_at(rate, hops, p, w).is_ok_and(|k| k <= ln_eps);
    if !feasible(0.0) {
        return None;
    }
    // the stability limit -ln M / s bounds every feasible rate
    let (mut lo, mut hi) = (0.0, -p.ln_m / p.s);
    while hi - lo > 1e-3 * RATE_TOLERANCE * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

pub fn stability_margin(a: &ArrivalSpec, spec: &ChannelSpec, s: f64) -> Result<f64, SncError> {
    SncAnalyzer::new(spec).stability_margin(a, s)
}

/// `M_g(1-s)^w / (1 - M_α(1+s) M_g(1-s))`.
pub fn kernel_single_hop(a: &ArrivalSpec, spec: &ChannelSpec, s: f64, w: u64) -> Result<f64, SncError> {
    SncAnalyzer::new(spec).kernel(a, HopCount::ONE, s, w)
}

pub fn kernel_multi_hop(a: &ArrivalSpec, spec: &ChannelSpec, hops: HopCount, s: f64, w: u64) -> Result<f64, SncError> {
    SncAnalyzer::new(spec).kernel(a, hops, s, w)
}

pub fn violation_probability(a: &ArrivalSpec, spec: &ChannelSpec, hops: HopCount, w: u64) -> DelayBoundResult {
    SncAnalyzer::new(spec).violation_probability(a, hops, w)
}

pub fn delay_bound(
    a: &ArrivalSpec,
    spec: &ChannelSpec,
    hops: HopCount,
    epsilon: f64,
) -> Result<DelayBoundResult, SncError> {
    SncAnalyzer::new(spec).delay_bound(a, hops, epsilon)
}

pub fn max_rate(spec: &ChannelSpec, hops: HopCount, w: u64, epsilon: f64) -> Result<f64, SncError> {
    SncAnalyzer::new(spec).max_rate(hops, w, epsilon)
}
