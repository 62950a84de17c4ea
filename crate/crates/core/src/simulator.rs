//! Discrete-time fluid queue driven by the fading channel.
//!
//! Each slot, `ρ` bits arrive at the first hop and hop `h` can send
//! `𝒩 ln(1 + γ_t^h)` bits. Bits leaving a hop are offered to the next hop in
//! the same slot, so the tandem realizes exactly the min-plus convolution of
//! the per-hop service processes that the analytic bound assumes.
//!
//! The virtual delay of slot `t` is `W(t) = min{u : D(t+u) >= A(t)}`. With
//! constant-rate arrivals, `D(t') >= A(t)` holds iff the total backlog at `t'`
//! is at most `ρ (t' - t)`, so pending slots never need their own records:
//! they always form the contiguous range from the oldest unresolved slot to
//! the current one.

use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::channel::{sample_sinr, stream_rng, ChannelSpec};
use crate::snc::{ArrivalSpec, HopCount};

/// One-sided confidence level of the reported upper limits.
pub const CONFIDENCE: f64 = 0.99;
const RESOLVE_TOL: f64 = 1e-9;
const CP_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("{pending} slots awaiting service at slot {slot}; the queue looks unstable")]
    MemoryGuard { pending: u64, slot: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub spec: ChannelSpec,
    pub arrivals: ArrivalSpec,
    pub slots: u64,
    pub seed: u64,
    /// Ascending delays (slots) at which violation frequencies are recorded.
    pub delay_grid: Vec<u64>,
    pub hops: HopCount,
    /// Abort once more than this many slots are unresolved at once.
    pub max_pending: Option<u64>,
}

impl SimConfig {
    pub fn new(spec: ChannelSpec, arrivals: ArrivalSpec, slots: u64, seed: u64, delay_grid: Vec<u64>) -> Self {
        Self {
            spec,
            arrivals,
            slots,
            seed,
            delay_grid,
            hops: HopCount::ONE,
            max_pending: None,
        }
    }

    pub fn with_hops(mut self, hops: HopCount) -> Self {
        self.hops = hops;
        self
    }

    pub fn with_max_pending(mut self, cap: u64) -> Self {
        self.max_pending = Some(cap);
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.slots == 0 {
            return Err(SimError::InvalidConfig("at least one slot is required"));
        }
        if self.delay_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidConfig("delay grid must be strictly ascending"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub delay_grid: Vec<u64>,
    /// Empirical `Pr[W > w]` per grid entry.
    pub violation_freq: Vec<f64>,
    pub violations: Vec<u64>,
    /// Slots whose `W > w` status is known, per grid entry.
    pub observed: Vec<u64>,
    /// One-sided 99% Clopper–Pearson upper limit on `Pr[W > w]`.
    pub ccdf_upper_99: Vec<f64>,
    /// Largest total backlog seen, in bits.
    pub max_backlog: f64,
    pub slots_run: u64,
}

/// Fluid tandem of work-conserving queues.
#[derive(Debug, Clone)]
pub struct FluidTandem {
    backlog: Vec<f64>,
}

impl FluidTandem {
    pub fn new(hops: HopCount) -> Self {
        Self {
            backlog: vec![0.0; hops.get() as usize],
        }
    }

    /// Advances one slot with `arrivals` offered to the first hop and
    /// `capacities[h]` available at hop `h`. Returns the bits leaving the last hop.
    pub fn step(&mut self, arrivals: f64, capacities: &[f64]) -> f64 {
        debug_assert_eq!(capacities.len(), self.backlog.len());
        let mut offered = arrivals;
        for (q, &c) in self.backlog.iter_mut().zip(capacities) {
            let available = *q + offered;
            let sent = available.min(c);
            *q = (available - sent).max(0.0);
            offered = sent;
        }
        offered
    }

    pub fn backlog(&self) -> f64 {
        self.backlog.iter().sum()
    }

    pub fn hop_backlogs(&self) -> &[f64] {
        &self.backlog
    }
}

/// Turns per-slot backlogs into virtual-delay counts on a fixed grid.
#[derive(Debug, Clone)]
pub struct DelayTracker {
    rate: f64,
    grid: Vec<u64>,
    /// `exceed[j]`: resolved slots with `W > grid[j]`.
    exceed: Vec<u64>,
    resolved: u64,
    oldest_pending: u64,
    next_slot: u64,
}

impl DelayTracker {
    pub fn new(rate: f64, grid: Vec<u64>) -> Self {
        let n = grid.len();
        Self {
            rate,
            grid,
            exceed: vec![0; n],
            resolved: 0,
            oldest_pending: 0,
            next_slot: 0,
        }
    }

    /// Records the end of the next slot, given the total backlog after it.
    pub fn record(&mut self, backlog: f64) {
        let now = self.next_slot;
        self.next_slot += 1;
        let last_resolved = if self.rate == 0.0 || backlog <= RESOLVE_TOL * self.rate {
            Some(now)
        } else {
            let lag = backlog / self.rate - RESOLVE_TOL;
            let lag = lag.ceil().max(0.0);
            (lag <= now as f64).then(|| now - lag as u64)
        };
        if let Some(last) = last_resolved {
            if last >= self.oldest_pending {
                for t in self.oldest_pending..=last {
                    self.observe(now - t);
                }
                self.oldest_pending = last + 1;
            }
        }
    }

    fn observe(&mut self, delay: u64) {
        self.resolved += 1;
        let k = self.grid.partition_point(|&w| w < delay);
        for e in &mut self.exceed[..k] {
            *e += 1;
        }
    }

    pub fn pending(&self) -> u64 {
        self.next_slot - self.oldest_pending
    }

    /// `(violations, observed)` per grid entry. Unresolved slots count as
    /// violations once they have waited longer than `w`, and are left out otherwise.
    pub fn counts(&self) -> (Vec<u64>, Vec<u64>) {
        let last = self.next_slot.saturating_sub(1);
        self.grid
            .iter()
            .zip(&self.exceed)
            .map(|(&w, &e)| {
                // pending slot t has waited last - t slots without completing
                let censored = if self.next_slot == 0 || self.oldest_pending > last {
                    0
                } else {
                    let newest_known = last.checked_sub(w);
                    newest_known.map_or(0, |n| n.saturating_add(1).saturating_sub(self.oldest_pending))
                };
                (e + censored, self.resolved + censored)
            })
            .unzip()
    }
}

/// One-sided upper confidence limit for a binomial proportion: the
/// `confidence` quantile of `Beta(k+1, n-k)`, found by bisection on its CDF
/// (the library quantile search does not terminate for some large `n`).
pub fn clopper_pearson_upper(successes: u64, trials: u64, confidence: f64) -> f64 {
    if trials == 0 || successes >= trials {
        return 1.0;
    }
    if successes == 0 {
        return -((1.0 - confidence).ln() / trials as f64).exp_m1();
    }
    let beta = Beta::new(successes as f64 + 1.0, (trials - successes) as f64)
        .expect("beta parameters are positive");
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..CP_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if beta.cdf(mid) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    hi
}

pub fn run_queue(config: &SimConfig) -> Result<SimOutcome, SimError> {
    config.validate()?;
    let hops = config.hops.get() as usize;
    let rate = config.arrivals.rate();
    let mut rngs: Vec<_> = (0..hops).map(|h| stream_rng(config.seed, h as u64)).collect();
    let mut tandem = FluidTandem::new(config.hops);
    let mut tracker = DelayTracker::new(rate, config.delay_grid.clone());
    let mut capacities = vec![0.0; hops];
    let mut max_backlog: f64 = 0.0;
    for slot in 0..config.slots {
        for (c, rng) in capacities.iter_mut().zip(rngs.iter_mut()) {
            *c = config.spec.capacity(sample_sinr(&config.spec, rng));
        }
        tandem.step(rate, &capacities);
        let backlog = tandem.backlog();
        max_backlog = max_backlog.max(backlog);
        tracker.record(backlog);
        if let Some(cap) = config.max_pending {
            if tracker.pending() > cap {
                return Err(SimError::MemoryGuard {
                    pending: tracker.pending(),
                    slot,
                });
            }
        }
    }
    let (violations, observed) = tracker.counts();
    let violation_freq = violations
        .iter()
        .zip(&observed)
        .map(|(&v, &n)| if n == 0 { 0.0 } else { v as f64 / n as f64 })
        .collect();
    let ccdf_upper_99 = violations
        .iter()
        .zip(&observed)
        .map(|(&v, &n)| clopper_pearson_upper(v, n, CONFIDENCE))
        .collect();
    Ok(SimOutcome {
        delay_grid: config.delay_grid.clone(),
        violation_freq,
        violations,
        observed,
        ccdf_upper_99,
        max_backlog,
        slots_run: config.slots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Sample mean and standard error of `(1 + γ)^(𝒩 (s-1))`.
pub fn estimate_mellin_mc(spec: &ChannelSpec, s: f64, n_samples: u64, seed: u64) -> MonteCarloEstimate {
    if s == 1.0 {
        return MonteCarloEstimate {
            mean: 1.0,
            std_error: 0.0,
        };
    }
    let power = spec.service_scale() * (s - 1.0);
    let mut rng = stream_rng(seed, 0);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_samples {
        let v = (power * sample_sinr(spec, &mut rng).ln_1p()).exp();
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    let var = if n_samples > 1 { m2 / (n_samples - 1) as f64 } else { 0.0 };
    MonteCarloEstimate {
        mean,
        std_error: (var / n_samples.max(1) as f64).sqrt(),
    }
}

/// Draws `n` per-slot capacities; handy for checking the service process.
pub fn sample_capacities<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| spec.capacity(sample_sinr(spec, rng))).collect()
}
