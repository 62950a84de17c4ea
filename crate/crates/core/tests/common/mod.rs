#![allow(dead_code)]

use ifdelay_core::numerics::{integrate_adaptive, Bounds, QuadratureSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1};

pub fn oracle_spec() -> QuadratureSpec {
    QuadratureSpec::new(1e-13, 0.0, 50_000).unwrap()
}

/// Quadrature of `f` over `[0, ∞)` with panels split at `points`.
pub fn half_line(f: impl Fn(f64) -> f64, points: &[f64]) -> f64 {
    let spec = oracle_spec();
    let mut cuts: Vec<f64> = points.iter().copied().filter(|p| *p > 0.0 && p.is_finite()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut start = 0.0;
    let mut total = 0.0;
    for c in cuts {
        total += integrate_adaptive(&f, Bounds::Finite(start, c), &spec).unwrap().value;
        start = c;
    }
    total + integrate_adaptive(&f, Bounds::UpperInfinite(start), &spec).unwrap().value
}

/// `∫_0^∞ (1+x)^(s-2) / (a+x) · e^(-x/γ) dx`, with `γ = ∞` allowed.
pub fn lemma_by_quadrature(a: f64, avg_snr: f64, s: f64) -> f64 {
    let decay = if avg_snr.is_finite() { 1.0 / avg_snr } else { 0.0 };
    half_line(
        |x| ((s - 2.0) * x.ln_1p() - x * decay).exp() / (a + x),
        &[1.0, a, (a - 1.0).abs(), avg_snr],
    )
}

/// `E[(1+γ)^p]` straight from the SINR survival function:
/// `1 + p ∫_0^∞ (1+x)^(p-1) (1 - F(x)) dx`.
pub fn mellin_by_quadrature(avg_snr: f64, ratios: &[f64], p: f64) -> f64 {
    let mut points = ratios.to_vec();
    points.extend([1.0, avg_snr]);
    let integral = half_line(
        |x| {
            let product: f64 = ratios.iter().map(|a| a / (a + x)).product();
            ((p - 1.0) * x.ln_1p() - x / avg_snr).exp() * product
        },
        &points,
    );
    1.0 + p * integral
}

pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Sample mean of `f(γ)` over `n` SINR draws, generated independently of the
/// library sampler.
pub fn monte_carlo(avg_snr: f64, ratios: &[f64], n: usize, seed: u64, f: impl Fn(f64) -> f64) -> Estimate {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        let e0: f64 = Exp1.sample(&mut rng);
        let mut interference = 0.0;
        for a in ratios {
            let e: f64 = Exp1.sample(&mut rng);
            interference += e * avg_snr / a;
        }
        let v = f(avg_snr * e0 / (1.0 + interference));
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    Estimate {
        mean,
        std_error: (m2 / (n as f64 - 1.0) / n as f64).sqrt(),
    }
}

/// Finite-horizon steady-state kernel of a two-hop path, with the network
/// service bounded by the explicit (min,+) convolution over split points.
pub fn two_hop_brute_force(rate: f64, m: f64, s: f64, w: u64, horizon: u64) -> f64 {
    let mut total = 0.0;
    for back in 0..=horizon {
        // arrivals over `back` slots, service over `back + w` slots
        let span = back + w;
        let service: f64 = (0..=span)
            .map(|k| m.powi(k as i32) * m.powi((span - k) as i32))
            .sum();
        total += (rate * s * back as f64).exp() * service;
    }
    total
}
