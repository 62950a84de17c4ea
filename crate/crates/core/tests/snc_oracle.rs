mod common;

use ifdelay_core::channel::{db_to_linear, ChannelSpec, ScenarioSpec};
use ifdelay_core::numerics::QuadratureSpec;
use ifdelay_core::service::{average_capacity, mellin_service, MellinParams};
use ifdelay_core::snc::{ArrivalSpec, HopCount, SncAnalyzer, SncError};
use proptest::prelude::*;

fn bits(snr_db: f64, sinr_db: f64, n: usize) -> ChannelSpec {
    ScenarioSpec::from_db(snr_db, sinr_db, n)
        .with_symbols_per_slot(1.0)
        .to_channel()
        .unwrap()
}

#[test]
fn one_hop_series_equals_closed_form() {
    let spec = bits(15.0, 4.0, 3);
    let an = SncAnalyzer::new(&spec);
    let a = ArrivalSpec::new(1.0).unwrap();
    for s in [0.05, 0.2, 0.5, 1.0] {
        for w in [0, 1, 5, 20] {
            let m = mellin_service(&spec, &MellinParams::new(1.0 - s)).unwrap().upper;
            let closed = m.powi(w as i32) / (1.0 - (a.rate() * s).exp() * m);
            let k = an.kernel(&a, HopCount::ONE, s, w).unwrap();
            assert!((k - closed).abs() <= 1e-12 * closed, "s {s} w {w}: {k} vs {closed}");
        }
    }
}

#[test]
fn two_hops_match_convolution_oracle() {
    let spec = bits(15.0, 4.0, 3);
    let an = SncAnalyzer::new(&spec);
    let a = ArrivalSpec::new(0.2).unwrap();
    let two = HopCount::new(2).unwrap();
    for s in [0.8, 1.5, 3.0] {
        let m = mellin_service(&spec, &MellinParams::new(1.0 - s)).unwrap().upper;
        // the horizon must make the neglected tail invisible at 1e-9
        assert!((a.rate() * s).exp() * m < 0.6, "s {s} too close to instability");
        for w in [0, 3, 10] {
            let oracle = common::two_hop_brute_force(a.rate(), m, s, w, 60);
            let k = an.kernel(&a, two, s, w).unwrap();
            assert!((k - oracle).abs() <= 1e-9 * oracle, "s {s} w {w}: {k} vs {oracle}");
        }
    }
}

#[test]
fn unstable_s_is_rejected() {
    let spec = bits(15.0, 0.0, 1);
    let an = SncAnalyzer::new(&spec);
    let a = ArrivalSpec::new(50.0).unwrap();
    assert!(matches!(an.kernel(&a, HopCount::ONE, 0.5, 3), Err(SncError::Unstable { .. })));
    let r = an.violation_probability(&a, HopCount::ONE, 3);
    assert!(!r.stable);
    assert_eq!(r.epsilon, 1.0);
}

#[test]
fn delay_bound_grows_with_hops() {
    let spec = bits(15.0, 4.0, 3);
    let an = SncAnalyzer::new(&spec);
    let a = ArrivalSpec::new(0.85).unwrap();
    let delays: Vec<u64> = (1..=4)
        .map(|h| an.delay_bound(&a, HopCount::new(h).unwrap(), 1e-6).unwrap().w)
        .collect();
    assert!(delays.windows(2).all(|d| d[0] <= d[1]), "{delays:?}");
    assert!(delays[3] > delays[0]);
}

#[test]
fn delay_bound_is_the_smallest_feasible_delay() {
    let spec = bits(15.0, 0.0, 1);
    let an = SncAnalyzer::new(&spec);
    let a = ArrivalSpec::new(0.85).unwrap();
    for eps in [1e-2, 1e-4, 1e-6] {
        let r = an.delay_bound(&a, HopCount::ONE, eps).unwrap();
        assert!(an.violation_probability(&a, HopCount::ONE, r.w).epsilon <= eps);
        if r.w > 0 {
            assert!(an.violation_probability(&a, HopCount::ONE, r.w - 1).epsilon > eps);
        }
    }
}

#[test]
fn far_interferer_reduces_to_noise_limited() {
    let g = db_to_linear(10.0);
    let rayleigh = ChannelSpec::noise_limited(g).unwrap().with_symbols_per_slot(1.0).unwrap();
    let far = ChannelSpec::new(g, vec![1e8]).unwrap().with_symbols_per_slot(1.0).unwrap();
    for rate in [0.5, 1.0, 1.5, 2.0, 2.5] {
        let a = ArrivalSpec::new(rate).unwrap();
        let w0 = SncAnalyzer::new(&rayleigh).delay_bound(&a, HopCount::ONE, 1e-6).unwrap().w;
        let w1 = SncAnalyzer::new(&far).delay_bound(&a, HopCount::ONE, 1e-6).unwrap().w;
        assert!(w0.abs_diff(w1) <= 1, "rate {rate}: {w0} vs {w1}");
    }
}

/// Largest rate whose delay bound is at most `w`, found by bisection on the
/// public delay-bound routine alone.
fn max_rate_oracle(an: &SncAnalyzer, w: u64, eps: f64, hi: f64) -> f64 {
    let ok = |r: f64| {
        let a = ArrivalSpec::new(r).unwrap();
        an.delay_bound(&a, HopCount::ONE, eps).map_or(false, |d| d.stable && d.w <= w)
    };
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn max_rate_agrees_with_bisection_over_delay_bounds() {
    let q = QuadratureSpec::default();
    for (snr, sinr, n) in [(15.0, 8.0, 1), (20.0, 8.0, 3)] {
        let spec = bits(snr, sinr, n);
        let an = SncAnalyzer::new(&spec);
        let r = an.max_rate(HopCount::ONE, 10, 1e-6).unwrap();
        let cap = average_capacity(&spec, &q).unwrap();
        assert!(r > 0.0 && r < cap, "rate {r} capacity {cap}");
        let oracle = max_rate_oracle(&an, 10, 1e-6, cap);
        assert!((r - oracle).abs() <= 2e-3 * oracle, "{r} vs {oracle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn violation_bound_decreases_with_delay(sinr_db in 0.0f64..10.0, n in 1usize..4, rate in 0.2f64..1.2) {
        let spec = bits(15.0, sinr_db, n);
        let an = SncAnalyzer::new(&spec);
        let a = ArrivalSpec::new(rate).unwrap();
        let mut previous = f64::INFINITY;
        for w in 0..12 {
            let e = an.violation_probability(&a, HopCount::ONE, w).epsilon;
            prop_assert!((0.0..=1.0).contains(&e));
            prop_assert!(e <= previous * (1.0 + 1e-9), "w {} e {} prev {}", w, e, previous);
            previous = e;
        }
    }

    #[test]
    fn kernel_grows_with_hops(s in 0.05f64..1.0, w in 0u64..20) {
        let spec = bits(15.0, 4.0, 2);
        let an = SncAnalyzer::new(&spec);
        let a = ArrivalSpec::new(0.3).unwrap();
        let mut previous = f64::NEG_INFINITY;
        for h in 1..=4 {
            match an.ln_kernel(&a, HopCount::new(h).unwrap(), s, w) {
                Ok(k) => {
                    prop_assert!(k >= previous - 1e-12);
                    previous = k;
                }
                Err(_) => break,
            }
        }
    }
}

#[test]
fn log_bound_decays_with_slope_of_log_transform() {
    for (sinr, n) in [(0.0, 1), (4.0, 1), (4.0, 5)] {
        let spec = bits(15.0, sinr, n);
        let an = SncAnalyzer::new(&spec);
        let a = ArrivalSpec::new(0.85).unwrap();
        let w = 200;
        let here = an.violation_probability(&a, HopCount::ONE, w);
        let next = an.violation_probability(&a, HopCount::ONE, w + 1);
        let slope = next.kernel_value.ln() - here.kernel_value.ln();
        let ln_m = here.mellin_bracket_used.unwrap().upper.ln();
        assert!((slope - ln_m).abs() <= 0.01 * ln_m.abs(), "slope {slope} vs {ln_m}");
    }
}
