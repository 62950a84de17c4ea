//! Ordering claims each emitted dataset should satisfy.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::config::Kind;
use crate::dataset::{Dataset, DatasetError};

/// Slack for comparisons between computed floats.
const REL_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("dataset has no `kind` metadata")]
    MissingKind,
    #[error(transparent)]
    Kind(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub entries: Vec<CheckEntry>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    fn push(&mut self, name: &str, failures: Vec<String>, checked: usize) {
        let passed = failures.is_empty();
        let detail = match failures.first() {
            None => format!("{checked} comparisons"),
            Some(first) => format!("{} of {checked} comparisons fail, first: {first}", failures.len()),
        };
        self.entries.push(CheckEntry {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let mark = if e.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{mark} {}: {}", e.name, e.detail)?;
        }
        let failed = self.entries.iter().filter(|e| !e.passed).count();
        write!(f, "{} checks, {failed} failed", self.entries.len())
    }
}

pub fn check_reproduction(data: &Dataset) -> Result<Report, CheckError> {
    let kind: Kind = data.get_meta("kind").ok_or(CheckError::MissingKind)?.parse()?;
    let mut report = Report::default();
    let ok = ok_rows(data)?;
    match kind {
        Kind::EffectiveCapacity => effective_capacity(data, &ok, &mut report)?,
        Kind::DelayVsEpsilon | Kind::DelayVsRate => delay_curves(data, &ok, &mut report)?,
        Kind::DelayVsInterferers => interferers(data, &ok, &mut report)?,
        Kind::MaxrateVsSnr => {
            let r = "max_rate_bits_per_slot";
            trend(data, &ok, &mut report, "max rate increases with SNR", r, "avg_snr_db", &["avg_sinr_db", "interferers", "delay", "epsilon"], Order::Increasing)?;
            trend(data, &ok, &mut report, "max rate decreases with interferers", r, "interferers", &["avg_snr_db", "avg_sinr_db", "delay", "epsilon"], Order::Decreasing)?;
            let (failures, n) = pairwise(data, &ok, r, "avg_capacity_bits_per_slot", |a, b| a < b)?;
            report.push("max rate below average capacity", failures, n);
        }
        Kind::AvgcapVsSnr => {
            let c = "avg_capacity_bits_per_slot";
            trend(data, &ok, &mut report, "average capacity increases with SNR", c, "avg_snr_db", &["avg_sinr_db", "interferers"], Order::Increasing)?;
            trend(data, &ok, &mut report, "average capacity decreases with interferers", c, "interferers", &["avg_snr_db", "avg_sinr_db"], Order::Decreasing)?;
        }
        Kind::Validate => {
            let (failures, n) = pairwise(data, &ok, "analytic_epsilon", "violation_freq", |a, b| a >= b)?;
            report.push("bound above violation frequency", failures, n);
        }
    }
    Ok(report)
}

/// Rows whose status is `ok`.
fn ok_rows(data: &Dataset) -> Result<Vec<usize>, DatasetError> {
    Ok(data
        .text("status")?
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == "ok")
        .map(|(i, _)| i)
        .collect())
}

#[derive(Clone, Copy, PartialEq)]
enum Order {
    Increasing,
    Decreasing,
    NonIncreasing,
    NonDecreasing,
}

impl Order {
    fn holds(self, prev: f64, next: f64) -> bool {
        let slack = REL_SLACK * prev.abs().max(next.abs());
        match self {
            Order::Increasing => next > prev,
            Order::Decreasing => next < prev,
            Order::NonIncreasing => next <= prev + slack,
            Order::NonDecreasing => next >= prev - slack,
        }
    }
}

/// Groups `rows` by the text of `keys`, orders each group by `x` and checks
/// `y` along it.
#[allow(clippy::too_many_arguments)]
fn trend(
    data: &Dataset,
    rows: &[usize],
    report: &mut Report,
    name: &str,
    y: &str,
    x: &str,
    keys: &[&str],
    order: Order,
) -> Result<(), DatasetError> {
    let (failures, n) = trend_failures(data, rows, y, x, keys, order)?;
    report.push(name, failures, n);
    Ok(())
}

fn trend_failures(
    data: &Dataset,
    rows: &[usize],
    y: &str,
    x: &str,
    keys: &[&str],
    order: Order,
) -> Result<(Vec<String>, usize), DatasetError> {
    let ys = data.numbers(y)?;
    let xs = data.numbers(x)?;
    let key_cols = keys.iter().map(|k| data.column(k)).collect::<Result<Vec<_>, _>>()?;
    let mut groups: BTreeMap<Vec<&str>, Vec<(f64, f64)>> = BTreeMap::new();
    for &i in rows {
        let (Some(xv), Some(yv)) = (xs[i], ys[i]) else {
            continue;
        };
        let key = key_cols.iter().map(|&j| data.rows[i][j].as_str()).collect();
        groups.entry(key).or_default().push((xv, yv));
    }
    let mut failures = vec![];
    let mut checked = 0;
    for (key, mut points) in groups {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in points.windows(2) {
            checked += 1;
            if !order.holds(pair[0].1, pair[1].1) {
                failures.push(format!(
                    "{y} {} at {x}={} then {} at {x}={} ({})",
                    pair[0].1,
                    pair[0].0,
                    pair[1].1,
                    pair[1].0,
                    describe(keys, &key)
                ));
            }
        }
    }
    Ok((failures, checked))
}

/// Checks `holds(a, b)` on every row where both columns are numbers.
fn pairwise(
    data: &Dataset,
    rows: &[usize],
    a: &str,
    b: &str,
    holds: impl Fn(f64, f64) -> bool,
) -> Result<(Vec<String>, usize), DatasetError> {
    let av = data.numbers(a)?;
    let bv = data.numbers(b)?;
    let mut failures = vec![];
    let mut checked = 0;
    for &i in rows {
        if let (Some(x), Some(y)) = (av[i], bv[i]) {
            checked += 1;
            if !holds(x, y) {
                failures.push(format!("row {}: {a} {x}, {b} {y}", i + 1));
            }
        }
    }
    Ok((failures, checked))
}

fn describe(keys: &[&str], values: &[&str]) -> String {
    keys.iter()
        .zip(values)
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn effective_capacity(data: &Dataset, ok: &[usize], report: &mut Report) -> Result<(), DatasetError> {
    let r = "rate_bits_per_slot";
    trend(data, ok, report, "effective capacity decreases in s", r, "s", &["avg_snr_db", "channel"], Order::NonIncreasing)?;

    let rates = data.numbers(r)?;
    let channel = data.column("channel")?;
    let snr = data.column("avg_snr_db")?;
    let s = data.column("s")?;
    // gap between the noise-limited and interference curves per (snr, s)
    type NoiseAndInterference = (Option<f64>, Option<f64>);
    let mut pairs: BTreeMap<(&str, &str), NoiseAndInterference> = BTreeMap::new();
    for &i in ok {
        let row = &data.rows[i];
        let entry = pairs.entry((row[snr].as_str(), row[s].as_str())).or_default();
        match row[channel].as_str() {
            "noise-limited" => entry.0 = rates[i],
            _ => entry.1 = rates[i],
        }
    }
    let mut above = vec![];
    let mut gaps: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    let mut compared = 0;
    for ((snr_text, s_text), values) in &pairs {
        let (Some(noise), Some(interference)) = values else {
            continue;
        };
        compared += 1;
        if noise <= interference {
            above.push(format!("avg_snr_db={snr_text}, s={s_text}: {noise} vs {interference}"));
        }
        if let Ok(snr_value) = snr_text.parse::<f64>() {
            gaps.entry(s_text).or_default().push((snr_value, noise - interference));
        }
    }
    report.push("noise-limited curve above interference curve", above, compared);

    let mut widening = vec![];
    let mut checked = 0;
    for (s_text, mut points) in gaps {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in points.windows(2) {
            checked += 1;
            if !Order::NonDecreasing.holds(pair[0].1, pair[1].1) {
                widening.push(format!("s={s_text}: gap {} at {} dB then {} at {} dB", pair[0].1, pair[0].0, pair[1].1, pair[1].0));
            }
        }
    }
    report.push("gap widens with SNR", widening, checked);
    Ok(())
}

fn delay_curves(data: &Dataset, ok: &[usize], report: &mut Report) -> Result<(), DatasetError> {
    let d = "delay_bound";
    let (failures, n) = pairwise(data, ok, d, "sim_delay", |bound, sim| bound >= sim)?;
    report.push("bound at or above simulated delay", failures, n);
    let scenario = ["avg_snr_db", "avg_sinr_db", "interferers"];
    let mut by_rate = scenario.to_vec();
    by_rate.push("rate_bits_per_slot");
    let mut by_eps = scenario.to_vec();
    by_eps.push("epsilon");
    trend(data, ok, report, "delay bound nonincreasing in epsilon", d, "epsilon", &by_rate, Order::NonIncreasing)?;
    trend(data, ok, report, "delay bound nondecreasing in rate", d, "rate_bits_per_slot", &by_eps, Order::NonDecreasing)?;
    Ok(())
}

fn interferers(data: &Dataset, ok: &[usize], report: &mut Report) -> Result<(), DatasetError> {
    let d = "delay_bound";
    let channel = data.column("channel")?;
    let (reference, interference): (Vec<usize>, Vec<usize>) =
        ok.iter().partition(|&&i| data.rows[i][channel] == "noise-limited");
    let keys = ["avg_snr_db", "avg_sinr_db", "rate_bits_per_slot", "epsilon"];
    trend(data, &interference, report, "delay bound nondecreasing in interferers", d, "interferers", &keys, Order::NonDecreasing)?;

    let delays = data.numbers(d)?;
    let rate = data.column("rate_bits_per_slot")?;
    let eps = data.column("epsilon")?;
    let mut failures = vec![];
    let mut checked = 0;
    for &r in &reference {
        let Some(limit) = delays[r] else { continue };
        for &i in &interference {
            let same = data.rows[i][rate] == data.rows[r][rate] && data.rows[i][eps] == data.rows[r][eps];
            if let (true, Some(v)) = (same, delays[i]) {
                checked += 1;
                if v > limit {
                    failures.push(format!("row {}: {v} above noise-limited {limit}", i + 1));
                }
            }
        }
    }
    report.push("delay bound at or below noise-limited reference", failures, checked);
    Ok(())
}
