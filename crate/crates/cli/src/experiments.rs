//! One dataset per experiment kind. Sweep points run on a rayon pool and
//! are merged in sweep order, so the output does not depend on the thread
//! count.

use ifdelay_core::channel::{db_to_linear, ChannelError, ChannelSpec, ScenarioSpec};
use ifdelay_core::numerics::QuadratureSpec;
use ifdelay_core::service::{average_capacity, effective_capacity, MellinParams};
use ifdelay_core::simulator::{run_queue, SimConfig, SimOutcome};
use ifdelay_core::snc::{ArrivalSpec, DelayBoundResult, HopCount, SncAnalyzer};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ExperimentConfig, Kind};
use crate::dataset::{int_list, num, num_list, Dataset};

/// A simulated frequency is only turned into a delay quantile when the
/// target probability is expected to produce this many violations.
const MIN_EXPECTED_VIOLATIONS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot build thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

type Row = Vec<String>;

pub fn run_experiment(config: &ExperimentConfig) -> Result<Dataset, ExperimentError> {
    config.validate()?;
    let run = || match config.kind {
        Kind::EffectiveCapacity => effective_capacity_curves(config),
        Kind::DelayVsEpsilon => delay_vs_epsilon(config),
        Kind::DelayVsRate => delay_vs_rate(config),
        Kind::DelayVsInterferers => delay_vs_interferers(config),
        Kind::MaxrateVsSnr => maxrate_vs_snr(config),
        Kind::AvgcapVsSnr => avgcap_vs_snr(config),
        Kind::Validate => validate(config),
    };
    let mut data = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(run),
        None => run(),
    };
    let mut header = metadata(config);
    header.append(&mut data.metadata);
    data.metadata = header;
    Ok(data)
}

fn metadata(c: &ExperimentConfig) -> Vec<(String, String)> {
    let s = &c.scenario;
    let a = &c.analysis;
    let linear: Vec<f64> = s.avg_snr_db.iter().map(|d| db_to_linear(*d)).collect();
    let sinr_linear: Vec<f64> = s.avg_sinr_db.iter().map(|d| db_to_linear(*d)).collect();
    let mut m = vec![
        ("tool", format!("ifdelay {}", env!("CARGO_PKG_VERSION"))),
        ("kind", c.kind.to_string()),
        ("seed", c.seed.to_string()),
        (
            "units",
            "rates and capacities in bits; per-symbol values are per-slot values divided by symbols_per_slot".into(),
        ),
        ("symbols_per_slot", num(s.symbols_per_slot)),
        ("avg_snr_db", num_list(&s.avg_snr_db)),
        ("avg_snr_linear", num_list(&linear)),
        ("avg_sinr_db", num_list(&s.avg_sinr_db)),
        ("avg_sinr_linear", num_list(&sinr_linear)),
        ("interferers", int_list(&s.interferers)),
        ("perturbation", num(s.perturbation)),
        ("rates_bits_per_slot", num_list(&a.rates)),
        ("epsilons", num_list(&a.epsilons)),
        ("delays", int_list(&a.delays)),
        ("hops", a.hops.to_string()),
        ("slots", c.simulation.slots.to_string()),
        ("max_delay", c.simulation.max_delay.to_string()),
    ];
    if let Some(r) = s.noise_reference_db {
        m.push(("noise_reference_db", num(r)));
        m.push(("noise_reference_linear", num(db_to_linear(r))));
    }
    if c.kind == Kind::EffectiveCapacity {
        m.push(("s_values", num_list(&a.s_values)));
    }
    m.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Runs `f` over `items` in parallel and concatenates the rows in item order.
fn par_rows<T: Sync>(items: &[T], f: impl Fn(usize, &T) -> Vec<Row> + Sync + Send) -> Vec<Row> {
    items
        .par_iter()
        .enumerate()
        .map(|(i, item)| f(i, item))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Independent simulation seed for sweep point `index`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, Copy)]
struct Point {
    snr_db: f64,
    sinr_db: f64,
    interferers: usize,
}

fn scenario_points(c: &ExperimentConfig) -> Vec<Point> {
    let mut out = vec![];
    for &snr_db in &c.scenario.avg_snr_db {
        for &sinr_db in &c.scenario.avg_sinr_db {
            for &interferers in &c.scenario.interferers {
                out.push(Point {
                    snr_db,
                    sinr_db,
                    interferers,
                });
            }
        }
    }
    out
}

fn channel(c: &ExperimentConfig, p: &Point) -> Result<ChannelSpec, ChannelError> {
    ScenarioSpec::from_db(p.snr_db, p.sinr_db, p.interferers)
        .with_perturbation(c.scenario.perturbation)
        .with_symbols_per_slot(c.scenario.symbols_per_slot)
        .to_channel()
}

fn noise_limited(c: &ExperimentConfig, snr_db: f64) -> Result<ChannelSpec, ChannelError> {
    ChannelSpec::noise_limited(db_to_linear(snr_db))?.with_symbols_per_slot(c.scenario.symbols_per_slot)
}

fn hops(c: &ExperimentConfig) -> HopCount {
    HopCount::new(c.analysis.hops).expect("validated hop count")
}

fn failure(e: impl std::fmt::Display) -> String {
    format!("error: {e}")
}

/// `(delay, s*, status)` cells of a delay bound.
fn delay_cells(result: Result<DelayBoundResult, impl std::fmt::Display>) -> [String; 3] {
    match result {
        Ok(r) if r.stable => [r.w.to_string(), num(r.s_star), "ok".into()],
        Ok(_) => [String::new(), String::new(), "unstable".into()],
        Err(e) => [String::new(), String::new(), failure(e)],
    }
}

/// Smallest simulated delay whose violation frequency is at most `eps`,
/// when `eps` is resolvable at the simulated scale.
fn simulated_delay(out: &SimOutcome, eps: f64) -> Option<u64> {
    let observed = *out.observed.first()? as f64;
    if eps * observed < MIN_EXPECTED_VIOLATIONS {
        return None;
    }
    out.delay_grid
        .iter()
        .zip(&out.violation_freq)
        .find(|(_, f)| **f <= eps)
        .map(|(w, _)| *w)
}

fn effective_capacity_curves(c: &ExperimentConfig) -> Dataset {
    let mut data = Dataset::new(&[
        "avg_snr_db",
        "avg_snr",
        "channel",
        "s",
        "rate_bits_per_slot",
        "rate_bits_per_symbol",
        "status",
    ]);
    data.meta("interference_channel", "single interferer with the signal's average power");
    let mut items = vec![];
    for &snr_db in &c.scenario.avg_snr_db {
        items.push((snr_db, "interference"));
        items.push((snr_db, "noise-limited"));
    }
    let n = c.scenario.symbols_per_slot;
    data.rows = par_rows(&items, |_, &(snr_db, kind)| {
        let g = db_to_linear(snr_db);
        let spec = if kind == "noise-limited" {
            noise_limited(c, snr_db)
        } else {
            ChannelSpec::new(g, vec![1.0]).and_then(|s| s.with_symbols_per_slot(n))
        };
        let params = MellinParams::default();
        c.analysis
            .s_values
            .iter()
            .map(|&s| {
                let value = spec.as_ref().map_err(failure).and_then(|spec| {
                    effective_capacity(spec, s, &params).map_err(failure)
                });
                let (rate, status) = match value {
                    Ok(r) => (Some(r), "ok".to_string()),
                    Err(e) => (None, e),
                };
                vec![
                    num(snr_db),
                    num(g),
                    kind.to_string(),
                    num(s),
                    rate.map(num).unwrap_or_default(),
                    rate.map(|r| num(r / n)).unwrap_or_default(),
                    status,
                ]
            })
            .collect()
    });
    data
}

const DELAY_COLUMNS: [&str; 11] = [
    "avg_snr_db",
    "avg_sinr_db",
    "interferers",
    "rate_bits_per_slot",
    "rate_bits_per_symbol",
    "epsilon",
    "delay_bound",
    "s_star",
    "sim_delay",
    "sim_slots",
    "status",
];

fn delay_rows(c: &ExperimentConfig, index: usize, p: &Point, rate: f64) -> Vec<Row> {
    let n = c.scenario.symbols_per_slot;
    let base = |eps: f64| {
        vec![
            num(p.snr_db),
            num(p.sinr_db),
            p.interferers.to_string(),
            num(rate),
            num(rate / n),
            num(eps),
        ]
    };
    let spec = match channel(c, p) {
        Ok(s) => s,
        Err(e) => {
            return c
                .analysis
                .epsilons
                .iter()
                .map(|&eps| {
                    let mut row = base(eps);
                    row.extend(["".into(), "".into(), "".into(), "".into(), failure(&e)]);
                    row
                })
                .collect()
        }
    };
    let arrivals = ArrivalSpec::new(rate).expect("validated rate");
    let sim = (c.simulation.slots > 0).then(|| {
        let grid = (0..=c.simulation.max_delay).collect();
        let config = SimConfig::new(spec.clone(), arrivals, c.simulation.slots, point_seed(c.seed, index), grid)
            .with_hops(hops(c));
        run_queue(&config)
    });
    let an = SncAnalyzer::new(&spec);
    c.analysis
        .epsilons
        .iter()
        .map(|&eps| {
            let [w, s_star, status] = delay_cells(an.delay_bound(&arrivals, hops(c), eps));
            let (sim_delay, status) = match &sim {
                None => (String::new(), status),
                Some(Ok(out)) => (simulated_delay(out, eps).map(|w| w.to_string()).unwrap_or_default(), status),
                Some(Err(e)) => (String::new(), format!("{status}; simulation {}", failure(e))),
            };
            let mut row = base(eps);
            row.extend([w, s_star, sim_delay, c.simulation.slots.to_string(), status]);
            row
        })
        .collect()
}

fn delay_vs_epsilon(c: &ExperimentConfig) -> Dataset {
    let mut data = Dataset::new(&DELAY_COLUMNS);
    let items: Vec<(Point, f64)> = scenario_points(c)
        .into_iter()
        .flat_map(|p| c.analysis.rates.iter().map(move |&r| (p, r)))
        .collect();
    data.rows = par_rows(&items, |i, (p, rate)| delay_rows(c, i, p, *rate));
    data
}

fn delay_vs_rate(c: &ExperimentConfig) -> Dataset {
    // same rows, swept over rates
    let mut data = delay_vs_epsilon(c);
    data.meta("sweep", "rate");
    data
}

fn delay_vs_interferers(c: &ExperimentConfig) -> Dataset {
    let mut data = Dataset::new(&[
        "avg_snr_db",
        "avg_sinr_db",
        "channel",
        "interferers",
        "rate_bits_per_slot",
        "rate_bits_per_symbol",
        "epsilon",
        "delay_bound",
        "s_star",
        "status",
    ]);
    let n = c.scenario.symbols_per_slot;
    let mut items: Vec<(Option<Point>, f64, f64)> = vec![];
    for &rate in &c.analysis.rates {
        for &eps in &c.analysis.epsilons {
            for p in scenario_points(c) {
                items.push((Some(p), rate, eps));
            }
            if c.scenario.noise_reference_db.is_some() {
                items.push((None, rate, eps));
            }
        }
    }
    data.rows = par_rows(&items, |_, (p, rate, eps)| {
        let (spec, snr, sinr, label, count) = match p {
            Some(p) => (channel(c, p), p.snr_db, p.sinr_db, "interference", p.interferers),
            None => {
                let r = c.scenario.noise_reference_db.expect("reference present");
                (noise_limited(c, r), r, r, "noise-limited", 0)
            }
        };
        let cells = match spec {
            Ok(spec) => {
                let arrivals = ArrivalSpec::new(*rate).expect("validated rate");
                delay_cells(SncAnalyzer::new(&spec).delay_bound(&arrivals, hops(c), *eps))
            }
            Err(e) => [String::new(), String::new(), failure(e)],
        };
        let mut row = vec![
            num(snr),
            num(sinr),
            label.to_string(),
            count.to_string(),
            num(*rate),
            num(rate / n),
            num(*eps),
        ];
        row.extend(cells);
        vec![row]
    });
    data
}

fn maxrate_vs_snr(c: &ExperimentConfig) -> Dataset {
    let mut data = Dataset::new(&[
        "avg_snr_db",
        "avg_sinr_db",
        "interferers",
        "delay",
        "epsilon",
        "max_rate_bits_per_slot",
        "max_rate_bits_per_symbol",
        "avg_capacity_bits_per_slot",
        "status",
    ]);
    let n = c.scenario.symbols_per_slot;
    let q = QuadratureSpec::default();
    data.rows = par_rows(&scenario_points(c), |_, p| {
        let spec = channel(c, p);
        let capacity = spec.as_ref().ok().and_then(|s| average_capacity(s, &q).ok());
        let an = spec.as_ref().ok().map(SncAnalyzer::new);
        let mut rows = vec![];
        for &w in &c.analysis.delays {
            for &eps in &c.analysis.epsilons {
                let rate = match (&spec, &an) {
                    (Ok(_), Some(an)) => an.max_rate(hops(c), w, eps).map_err(failure),
                    (Err(e), _) => Err(failure(e)),
                    _ => unreachable!("analyzer exists for every valid channel"),
                };
                let (rate, status) = match rate {
                    Ok(r) => (Some(r), "ok".to_string()),
                    Err(e) => (None, e),
                };
                rows.push(vec![
                    num(p.snr_db),
                    num(p.sinr_db),
                    p.interferers.to_string(),
                    w.to_string(),
                    num(eps),
                    rate.map(num).unwrap_or_default(),
                    rate.map(|r| num(r / n)).unwrap_or_default(),
                    capacity.map(num).unwrap_or_default(),
                    status,
                ]);
            }
        }
        rows
    });
    data
}

fn avgcap_vs_snr(c: &ExperimentConfig) -> Dataset {
    let mut data = Dataset::new(&[
        "avg_snr_db",
        "avg_sinr_db",
        "interferers",
        "avg_capacity_bits_per_slot",
        "avg_capacity_bits_per_symbol",
        "status",
    ]);
    let n = c.scenario.symbols_per_slot;
    let q = QuadratureSpec::default();
    data.rows = par_rows(&scenario_points(c), |_, p| {
        let cap = channel(c, p)
            .map_err(failure)
            .and_then(|spec| average_capacity(&spec, &q).map_err(failure));
        let (cap, status) = match cap {
            Ok(v) => (Some(v), "ok".to_string()),
            Err(e) => (None, e),
        };
        vec![vec![
            num(p.snr_db),
            num(p.sinr_db),
            p.interferers.to_string(),
            cap.map(num).unwrap_or_default(),
            cap.map(|v| num(v / n)).unwrap_or_default(),
            status,
        ]]
    });
    data
}

/// Short stable identifier of a simulated configuration.
fn config_hash(c: &ExperimentConfig, p: &Point, rate: f64) -> String {
    let key = format!(
        "snr_db={};sinr_db={};interferers={};perturbation={};symbols={};rate={};hops={}",
        p.snr_db, p.sinr_db, p.interferers, c.scenario.perturbation, c.scenario.symbols_per_slot, rate, c.analysis.hops
    );
    let digest = Sha256::digest(key.as_bytes());
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

fn validate(c: &ExperimentConfig) -> Dataset {
    let mut data = Dataset::new(&[
        "config_hash",
        "avg_snr_db",
        "avg_sinr_db",
        "interferers",
        "rate_bits_per_slot",
        "hops",
        "w",
        "analytic_epsilon",
        "violation_freq",
        "ccdf_upper_99",
        "violations",
        "observed",
        "slots",
        "seed",
        "status",
    ]);
    let items: Vec<(Point, f64)> = scenario_points(c)
        .into_iter()
        .flat_map(|p| c.analysis.rates.iter().map(move |&r| (p, r)))
        .collect();
    data.rows = par_rows(&items, |i, (p, rate)| {
        let seed = point_seed(c.seed, i);
        let prefix = |w: u64| {
            vec![
                config_hash(c, p, *rate),
                num(p.snr_db),
                num(p.sinr_db),
                p.interferers.to_string(),
                num(*rate),
                c.analysis.hops.to_string(),
                w.to_string(),
            ]
        };
        let spec = match channel(c, p) {
            Ok(s) => s,
            Err(e) => {
                let mut row = prefix(0);
                row.extend(std::iter::repeat_n(String::new(), 5));
                row.extend([c.simulation.slots.to_string(), seed.to_string(), failure(e)]);
                return vec![row];
            }
        };
        let arrivals = ArrivalSpec::new(*rate).expect("validated rate");
        let grid: Vec<u64> = (0..=c.simulation.max_delay).collect();
        let config = SimConfig::new(spec.clone(), arrivals, c.simulation.slots, seed, grid.clone()).with_hops(hops(c));
        let outcome = run_queue(&config);
        let an = SncAnalyzer::new(&spec);
        grid.iter()
            .enumerate()
            .map(|(j, &w)| {
                let bound = an.violation_probability(&arrivals, hops(c), w);
                let mut row = prefix(w);
                match &outcome {
                    Ok(out) => {
                        row.extend([
                            num(bound.epsilon),
                            num(out.violation_freq[j]),
                            num(out.ccdf_upper_99[j]),
                            out.violations[j].to_string(),
                            out.observed[j].to_string(),
                        ]);
                        row.extend([c.simulation.slots.to_string(), seed.to_string(), "ok".into()]);
                    }
                    Err(e) => {
                        row.extend([num(bound.epsilon), String::new(), String::new(), String::new(), String::new()]);
                        row.extend([c.simulation.slots.to_string(), seed.to_string(), failure(e)]);
                    }
                }
                row
            })
            .collect()
    });
    data
}
