//! One line per acceptance criterion. Delay and rate scenarios use bits
//! (one symbol per slot); the closed-form checks use the natural scale.

mod common;

use std::process::ExitCode;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use common::{lemma_by_quadrature, monte_carlo, two_hop_brute_force};
use ifdelay_core::channel::{db_to_linear, ChannelSpec, ScenarioSpec};
use ifdelay_core::numerics::{upper_incomplete_gamma, QuadratureSpec};
use ifdelay_core::service::{
    average_capacity, effective_capacity, lemma1_integral, mellin_service, rayleigh_mellin, MellinParams,
    DEFAULT_DELTA,
};
use ifdelay_core::simulator::{estimate_mellin_mc, run_queue, SimConfig};
use ifdelay_core::snc::{ArrivalSpec, HopCount, SncAnalyzer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SNR_GRID: [f64; 4] = [1.0, 10.0, 31.62, 251.0];
const S_GRID: [f64; 5] = [-1.0, 0.0, 0.3, 0.7, 0.9];

/// `(criterion, passed, line)` for every reported criterion.
static RESULTS: Mutex<Vec<(u32, bool, String)>> = Mutex::new(Vec::new());

fn report(n: u32, title: &str, pass: bool, detail: String, elapsed: Duration, limit: Duration) {
    let within = elapsed <= limit;
    let pass = pass && within;
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n:>2} {verdict} {title}: {detail} [{elapsed:.2?} of {limit:.0?}]");
    RESULTS.lock().unwrap().push((n, pass, line));
}

fn bits(snr_db: f64, sinr_db: f64, n: usize) -> ChannelSpec {
    ScenarioSpec::from_db(snr_db, sinr_db, n)
        .with_symbols_per_slot(1.0)
        .to_channel()
        .unwrap()
}

fn noise_limited_bits(snr_db: f64) -> ChannelSpec {
    ChannelSpec::noise_limited(db_to_linear(snr_db))
        .unwrap()
        .with_symbols_per_slot(1.0)
        .unwrap()
}

fn first(failures: &[String]) -> String {
    failures.first().map_or_else(String::new, |f| format!(", first: {f}"))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_01_truncation_brackets() {
    let start = Instant::now();
    let mut checks = 0;
    let mut failures = vec![];
    for a in [1.5, 2.5, 5.0, 20.0, 100.0] {
        for g in SNR_GRID {
            for s in S_GRID {
                let q = lemma_by_quadrature(a, g, s);
                for k in [2, 4, 8, 16, 32] {
                    let v = lemma1_integral(a, g, s, k, DEFAULT_DELTA).unwrap();
                    checks += 1;
                    let ok = v.lower <= q * (1.0 + 1e-12) && q <= v.upper * (1.0 + 1e-12);
                    if !ok {
                        failures.push(format!("a={a} γ={g} s={s} k={k}: [{}, {}] vs {q}", v.lower, v.upper));
                    }
                }
            }
        }
    }
    let detail = format!("{} of {checks} brackets hold the quadrature value{}", checks - failures.len(), first(&failures));
    report(1, "truncated series brackets", failures.is_empty(), detail, start.elapsed(), Duration::from_secs(10));
}

fn criterion_02_closed_forms() {
    let start = Instant::now();
    let mut worst_recurrence: f64 = 0.0;
    let mut worst_equal: f64 = 0.0;
    for g in SNR_GRID {
        let x = 1.0 / g;
        for s in S_GRID {
            let direct = x.exp() * g.powf(s - 1.0) * upper_incomplete_gamma(s, x).unwrap();
            let recurrence = 1.0 + (s - 1.0) * x.exp() * g.powf(s - 1.0) * upper_incomplete_gamma(s - 1.0, x).unwrap();
            worst_recurrence = worst_recurrence.max(rel(recurrence, direct));
            let library = rayleigh_mellin(g, s).unwrap();
            worst_recurrence = worst_recurrence.max(rel(library, direct));

            let equal = 1.0 + (s - 1.0) * x.exp() * g.powf(s - 2.0) * upper_incomplete_gamma(s - 2.0, x).unwrap();
            let spec = ChannelSpec::new(g, vec![1.0]).unwrap();
            let v = mellin_service(&spec, &MellinParams::new(s)).unwrap();
            worst_equal = worst_equal.max(rel(v.point, equal));
        }
    }
    let pass = worst_recurrence <= 1e-10 && worst_equal <= 1e-10;
    let detail = format!("worst relative error: recurrence {worst_recurrence:.1e}, equal power {worst_equal:.1e}");
    report(2, "closed-form equivalences", pass, detail, start.elapsed(), Duration::from_secs(1));
}

fn criterion_03_monte_carlo_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..12 {
        let snr = db_to_linear(rng.random_range(0.0..25.0));
        let n = rng.random_range(1..=5);
        let ratios: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
        let spec = ChannelSpec::new(snr, ratios).unwrap();
        for s in [0.2, 0.5, 0.8] {
            let v = mellin_service(&spec, &MellinParams::new(s)).unwrap();
            let mc = estimate_mellin_mc(&spec, s, 10_000_000, 100 + i);
            let outside = (v.lower - mc.mean).max(mc.mean - v.upper).max(0.0);
            let z = outside / mc.std_error;
            worst = worst.max(z);
            if z > 3.0 {
                failures += 1;
            }
        }
    }
    let detail = format!("36 comparisons, {failures} outside 3 SE, largest distance {worst:.2} SE");
    report(3, "Monte Carlo oracle", failures == 0, detail, start.elapsed(), Duration::from_secs(120));
}

struct Validation {
    label: String,
    utilization: f64,
    violations: Vec<u64>,
    freq: Vec<f64>,
    ucl: Vec<f64>,
    bound: Vec<f64>,
    ln_m: Vec<f64>,
}

fn validation_runs() -> Vec<Validation> {
    let q = QuadratureSpec::default();
    let a = ArrivalSpec::new(0.85).unwrap();
    let grid: Vec<u64> = (0..=40).collect();
    let mut runs = vec![];
    for (sinr, n) in [(0.0, 1), (4.0, 1), (0.0, 5), (4.0, 5)] {
        let spec = bits(15.0, sinr, n);
        let out = run_queue(&SimConfig::new(spec.clone(), a, 10_000_000, 7, grid.clone())).unwrap();
        let an = SncAnalyzer::new(&spec);
        let results: Vec<_> = grid.iter().map(|&w| an.violation_probability(&a, HopCount::ONE, w)).collect();
        runs.push(Validation {
            label: format!("γ̄={sinr}dB |I|={n}"),
            utilization: a.rate() / average_capacity(&spec, &q).unwrap(),
            violations: out.violations,
            freq: out.violation_freq,
            ucl: out.ccdf_upper_99,
            bound: results.iter().map(|r| r.epsilon).collect(),
            ln_m: results
                .iter()
                .map(|r| r.mellin_bracket_used.map_or(0.0, |m| m.upper.ln()))
                .collect(),
        });
    }
    runs
}

/// Least-squares slope of `ln freq` against `w` over the resolvable range
/// (`w >= 1`, at least 100 violations), with the last `w` used.
fn fitted_slope(run: &Validation) -> Option<(f64, usize)> {
    let points: Vec<(f64, f64)> = (1..run.freq.len())
        .filter(|&w| run.violations[w] >= 100)
        .map(|w| (w as f64, run.freq[w].ln()))
        .collect();
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx, points.last().unwrap().0 as usize))
}

fn criterion_04_05_simulation() {
    let start = Instant::now();
    let runs = validation_runs();
    let elapsed = start.elapsed();

    let mut checked = 0;
    let mut violated = vec![];
    for run in &runs {
        for w in 0..run.freq.len() {
            if run.ucl[w] > 1e-4 {
                checked += 1;
                if run.freq[w] > run.bound[w] {
                    violated.push(format!("{} w={w}: {} > {}", run.label, run.freq[w], run.bound[w]));
                }
            }
        }
    }
    let detail = format!("{checked} (configuration, w) pairs resolvable, {} above the bound{}", violated.len(), first(&violated));
    let pass4 = violated.is_empty();

    let mut by_load: Vec<&Validation> = runs.iter().collect();
    by_load.sort_by(|x, y| x.utilization.total_cmp(&y.utilization));
    let mut notes = vec![];
    let mut pass5 = true;
    for run in by_load.iter().take(2) {
        match fitted_slope(run) {
            Some((slope, w)) => {
                let err = rel(slope, run.ln_m[w]);
                pass5 &= err <= 0.15;
                notes.push(format!(
                    "{} (load {:.2}): slope {slope:.3} vs {:.3} ({:.1}%)",
                    run.label,
                    run.utilization,
                    run.ln_m[w],
                    100.0 * err
                ));
            }
            None => {
                pass5 = false;
                notes.push(format!("{}: too few resolvable points", run.label));
            }
        }
    }
    let limit = Duration::from_secs(900);
    report(4, "bound validity vs simulation", pass4, detail, elapsed, limit);
    report(5, "slope match", pass5, notes.join("; "), elapsed, limit);
}

fn criterion_06_interferer_ordering() {
    let start = Instant::now();
    let a = ArrivalSpec::new(2.0).unwrap();
    let reference = SncAnalyzer::new(&noise_limited_bits(8.0)).delay_bound(&a, HopCount::ONE, 1e-6).unwrap().w;
    let mut pass = true;
    let mut rows = vec![];
    for eta in [1e-3, 1e-2, 5e-2] {
        let delays: Vec<u64> = (1..=8)
            .map(|n| {
                let spec = ScenarioSpec::from_db(15.0, 8.0, n)
                    .with_perturbation(eta)
                    .with_symbols_per_slot(1.0)
                    .to_channel()
                    .unwrap();
                SncAnalyzer::new(&spec).delay_bound(&a, HopCount::ONE, 1e-6).unwrap().w
            })
            .collect();
        pass &= delays.windows(2).all(|d| d[0] <= d[1]) && delays.iter().all(|&d| d <= reference);
        rows.push(format!("η={eta}: {delays:?}"));
    }
    let detail = format!("{} against noise-limited {reference}", rows.join(", "));
    report(6, "more interferers, longer delays", pass, detail, start.elapsed(), Duration::from_secs(60));
}

fn criterion_07_limits() {
    let start = Instant::now();
    let g = db_to_linear(10.0);
    let rayleigh = noise_limited_bits(10.0);
    let far = ChannelSpec::new(g, vec![1e8]).unwrap().with_symbols_per_slot(1.0).unwrap();
    let mut worst_far = 0;
    for rate in [0.5, 1.0, 1.5, 2.0, 2.5] {
        let a = ArrivalSpec::new(rate).unwrap();
        let w0 = SncAnalyzer::new(&rayleigh).delay_bound(&a, HopCount::ONE, 1e-6).unwrap().w;
        let w1 = SncAnalyzer::new(&far).delay_bound(&a, HopCount::ONE, 1e-6).unwrap().w;
        worst_far = worst_far.max(w0.abs_diff(w1));
    }
    let pass_a = worst_far <= 1;

    let a = ArrivalSpec::new(2.2).unwrap();
    let reference = SncAnalyzer::new(&noise_limited_bits(8.0)).delay_bound(&a, HopCount::ONE, 1e-6).unwrap().w;
    let delays: Vec<u64> = [1, 3, 8, 20]
        .iter()
        .map(|&n| SncAnalyzer::new(&bits(15.0, 8.0, n)).delay_bound(&a, HopCount::ONE, 1e-6).unwrap().w)
        .collect();
    let gaps: Vec<u64> = delays.iter().map(|d| d.abs_diff(reference)).collect();
    let last_gap = gaps[3] as f64 / reference as f64;
    let pass_b = reference >= 5 && last_gap <= 0.10 && gaps.windows(2).all(|g| g[0] >= g[1]);
    let detail = format!(
        "(a) worst gap {worst_far} slot(s); (b) delays {delays:?} vs {reference}, gaps {gaps:?}, |I|=20 off by {:.1}%",
        100.0 * last_gap
    );
    report(7, "limit degenerations", pass_a && pass_b, detail, start.elapsed(), Duration::from_secs(120));
}

fn criterion_08_multi_hop() {
    let start = Instant::now();
    let spec = bits(15.0, 4.0, 3);
    let an = SncAnalyzer::new(&spec);
    let slow = ArrivalSpec::new(0.2).unwrap();
    let mut worst_one: f64 = 0.0;
    let mut worst_two: f64 = 0.0;
    for s in [0.8, 1.5, 3.0] {
        let m = mellin_service(&spec, &MellinParams::new(1.0 - s)).unwrap().upper;
        for w in [0, 3, 10] {
            let closed = m.powi(w as i32) / (1.0 - (slow.rate() * s).exp() * m);
            worst_one = worst_one.max(rel(an.kernel(&slow, HopCount::ONE, s, w).unwrap(), closed));
            let oracle = two_hop_brute_force(slow.rate(), m, s, w, 60);
            worst_two = worst_two.max(rel(an.kernel(&slow, HopCount::new(2).unwrap(), s, w).unwrap(), oracle));
        }
    }
    let a = ArrivalSpec::new(0.85).unwrap();
    let delays: Vec<u64> = (1..=4)
        .map(|h| an.delay_bound(&a, HopCount::new(h).unwrap(), 1e-6).unwrap().w)
        .collect();
    let pass = worst_one <= 1e-12 && worst_two <= 1e-9 && delays.windows(2).all(|d| d[0] <= d[1]);
    let detail = format!("H=1 error {worst_one:.1e}, H=2 error {worst_two:.1e}, delays over H=1..4 {delays:?}");
    report(8, "multi-hop kernel", pass, detail, start.elapsed(), Duration::from_secs(60));
}

fn criterion_09_effective_capacity() {
    let start = Instant::now();
    let params = MellinParams::default();
    let s_grid: Vec<f64> = (0..=40).map(|i| 1e-3 * 10f64.powf(i as f64 / 10.0)).collect();
    let mut decreasing = true;
    let mut dominated = true;
    let mut worst_limit: f64 = 0.0;
    for db in [0.0, 4.0, 8.0, 10.0] {
        let g = db_to_linear(db);
        let plain = noise_limited_bits(db);
        let equal = ChannelSpec::new(g, vec![1.0]).unwrap().with_symbols_per_slot(1.0).unwrap();
        for spec in [&plain, &equal] {
            let curve: Vec<f64> = s_grid.iter().map(|&s| effective_capacity(spec, s, &params).unwrap()).collect();
            decreasing &= curve.windows(2).all(|c| c[1] < c[0]);
            let mc = monte_carlo(g, spec.interferer_ratios(), 1_000_000, 9, |x| x.ln_1p() / std::f64::consts::LN_2);
            let limit = effective_capacity(spec, 1e-6, &params).unwrap();
            worst_limit = worst_limit.max(rel(limit, mc.mean));
        }
        for &s in &s_grid {
            dominated &= effective_capacity(&plain, s, &params).unwrap() > effective_capacity(&equal, s, &params).unwrap();
        }
    }
    let pass = decreasing && dominated && worst_limit <= 0.005;
    let detail = format!(
        "decreasing {decreasing}, noise-limited above {dominated}, small-s limit vs Monte Carlo {:.3}%",
        100.0 * worst_limit
    );
    report(9, "effective capacity", pass, detail, start.elapsed(), Duration::from_secs(60));
}

fn criterion_10_max_rate_trends() {
    let start = Instant::now();
    let q = QuadratureSpec::default();
    let snrs: Vec<f64> = (0..=7).map(|i| 10.0 + 2.0 * i as f64).collect();
    let mut increasing = true;
    let mut ordered = true;
    let mut below = true;
    let mut largest_share: f64 = 0.0;
    for sinr in [8.0, 9.0] {
        let mut curves = vec![];
        for n in [1, 3, 8] {
            let mut curve = vec![];
            for &snr in &snrs {
                let spec = bits(snr, sinr, n);
                let r = SncAnalyzer::new(&spec).max_rate(HopCount::ONE, 10, 1e-6).unwrap();
                let cap = average_capacity(&spec, &q).unwrap();
                below &= r < cap;
                largest_share = largest_share.max(r / cap);
                curve.push(r);
            }
            increasing &= curve.windows(2).all(|c| c[1] > c[0]);
            curves.push(curve);
        }
        for i in 0..snrs.len() {
            ordered &= curves[0][i] > curves[1][i] && curves[1][i] > curves[2][i];
        }
    }
    let pass = increasing && ordered && below;
    let detail = format!(
        "increasing in SNR {increasing}, decreasing in |I| {ordered}, below average capacity {below} (largest share {largest_share:.3})"
    );
    report(10, "maximum rate trends", pass, detail, start.elapsed(), Duration::from_secs(300));
}

fn main() -> ExitCode {
    let criteria: [(&[u32], fn()); 9] = [
        (&[1], criterion_01_truncation_brackets),
        (&[2], criterion_02_closed_forms),
        (&[3], criterion_03_monte_carlo_oracle),
        (&[4, 5], criterion_04_05_simulation),
        (&[6], criterion_06_interferer_ordering),
        (&[7], criterion_07_limits),
        (&[8], criterion_08_multi_hop),
        (&[9], criterion_09_effective_capacity),
        (&[10], criterion_10_max_rate_trends),
    ];
    let handles: Vec<_> = criteria.iter().map(|&(ids, f)| (ids, thread::spawn(f))).collect();
    for (ids, handle) in handles {
        if handle.join().is_err() {
            let mut results = RESULTS.lock().unwrap();
            for &n in ids {
                if !results.iter().any(|r| r.0 == n) {
                    results.push((n, false, format!("criterion {n:>2} FAIL: panicked before reporting")));
                }
            }
        }
    }
    let mut results = RESULTS.lock().unwrap();
    results.sort_by_key(|r| r.0);
    for (_, _, line) in results.iter() {
        println!("{line}");
    }
    let failed = results.iter().filter(|r| !r.1).count();
    println!("acceptance: {} criteria, {failed} failed", results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
