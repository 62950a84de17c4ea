//! Experiment configuration. Every kind starts from a preset;
//! a TOML file and command-line flags override individual keys.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    EffectiveCapacity,
    DelayVsEpsilon,
    DelayVsRate,
    DelayVsInterferers,
    MaxrateVsSnr,
    AvgcapVsSnr,
    Validate,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::EffectiveCapacity,
        Kind::DelayVsEpsilon,
        Kind::DelayVsRate,
        Kind::DelayVsInterferers,
        Kind::MaxrateVsSnr,
        Kind::AvgcapVsSnr,
        Kind::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::EffectiveCapacity => "effective-capacity",
            Kind::DelayVsEpsilon => "delay-vs-epsilon",
            Kind::DelayVsRate => "delay-vs-rate",
            Kind::DelayVsInterferers => "delay-vs-interferers",
            Kind::MaxrateVsSnr => "maxrate-vs-snr",
            Kind::AvgcapVsSnr => "avgcap-vs-snr",
            Kind::Validate => "validate",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::Invalid {
                key: "kind",
                reason: format!("unknown experiment kind `{s}`"),
            })
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config is for `{file}` but `{requested}` was requested")]
    KindMismatch { file: Kind, requested: Kind },
    #[error("{key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSweep {
    pub avg_snr_db: Vec<f64>,
    pub avg_sinr_db: Vec<f64>,
    pub interferers: Vec<usize>,
    pub perturbation: f64,
    pub symbols_per_slot: f64,
    /// Average SNR of the noise-limited reference rows, if any.
    pub noise_reference_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSweep {
    /// Arrival rates in bits per slot.
    pub rates: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub delays: Vec<u64>,
    pub s_values: Vec<f64>,
    pub hops: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    /// Zero disables simulation where it is optional.
    pub slots: u64,
    pub max_delay: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub scenario: ScenarioSweep,
    pub analysis: AnalysisSweep,
    pub simulation: SimulationSettings,
}

fn log_grid(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (n - 1) as f64))
        .collect()
}

fn linear_grid(lo: f64, step: f64, n: usize) -> Vec<f64> {
    // rounded so that grid values print as short decimals
    (0..n).map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9).collect()
}

impl ExperimentConfig {
    /// Default sweep for `kind`, in bits (one symbol per slot).
    pub fn preset(kind: Kind) -> Self {
        let mut scenario = ScenarioSweep {
            avg_snr_db: vec![15.0],
            avg_sinr_db: vec![0.0, 4.0],
            interferers: vec![1, 5],
            perturbation: ifdelay_core::channel::DEFAULT_PERTURBATION,
            symbols_per_slot: 1.0,
            noise_reference_db: None,
        };
        let mut analysis = AnalysisSweep {
            rates: vec![0.85],
            epsilons: vec![1e-6],
            delays: vec![10],
            s_values: vec![],
            hops: 1,
        };
        let mut simulation = SimulationSettings {
            slots: 0,
            max_delay: 60,
        };
        match kind {
            Kind::EffectiveCapacity => {
                scenario.avg_snr_db = vec![0.0, 4.0, 8.0, 10.0];
                scenario.avg_sinr_db = vec![];
                scenario.interferers = vec![];
                analysis.s_values = log_grid(-2.0, 1.0, 31);
            }
            Kind::DelayVsEpsilon => {
                analysis.epsilons = log_grid(-1.0, -6.0, 21);
                simulation.slots = 10_000_000;
            }
            Kind::DelayVsRate => {
                analysis.rates = linear_grid(0.05, 0.05, 30);
            }
            Kind::DelayVsInterferers => {
                scenario.avg_sinr_db = vec![8.0];
                scenario.interferers = (1..=8).collect();
                scenario.noise_reference_db = Some(8.0);
                analysis.rates = vec![1.8, 2.0, 2.2];
            }
            Kind::MaxrateVsSnr | Kind::AvgcapVsSnr => {
                scenario.avg_snr_db = linear_grid(10.0, 1.0, 15);
                scenario.avg_sinr_db = vec![8.0, 9.0];
                scenario.interferers = vec![1, 3, 8];
            }
            Kind::Validate => {
                simulation.slots = 10_000_000;
                simulation.max_delay = 40;
            }
        }
        Self {
            kind,
            seed: 1,
            output: None,
            threads: None,
            scenario,
            analysis,
            simulation,
        }
    }

    /// Preset for `kind` overridden by the TOML text.
    pub fn from_toml(kind: Kind, text: &str, path: &Path) -> Result<Self, ConfigError> {
        let file: FileConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(k) = file.kind {
            if k != kind {
                return Err(ConfigError::KindMismatch { file: k, requested: kind });
            }
        }
        let mut config = Self::preset(kind);
        file.apply(&mut config);
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(kind: Kind, path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(kind, &text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key, reason: &str| {
            Err(ConfigError::Invalid {
                key,
                reason: reason.to_string(),
            })
        };
        let s = &self.scenario;
        let a = &self.analysis;
        if !(s.symbols_per_slot > 0.0) || !s.symbols_per_slot.is_finite() {
            return invalid("scenario.symbols_per_slot", "must be positive and finite");
        }
        if !(s.perturbation >= 0.0) || !s.perturbation.is_finite() {
            return invalid("scenario.perturbation", "must be non-negative and finite");
        }
        if s.avg_snr_db.is_empty() {
            return invalid("scenario.avg_snr_db", "must not be empty");
        }
        if s.avg_snr_db.iter().chain(&s.avg_sinr_db).any(|v| !v.is_finite()) {
            return invalid("scenario", "powers in dB must be finite");
        }
        if self.threads == Some(0) {
            return invalid("threads", "must be at least 1");
        }
        if a.hops == 0 {
            return invalid("analysis.hops", "must be at least 1");
        }
        if a.epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return invalid("analysis.epsilons", "values must lie in (0, 1]");
        }
        if a.rates.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return invalid("analysis.rates", "values must be positive and finite");
        }
        if self.kind == Kind::EffectiveCapacity {
            if a.s_values.is_empty() {
                return invalid("analysis.s_values", "must not be empty");
            }
            if a.s_values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return invalid("analysis.s_values", "values must be positive and finite");
            }
            return Ok(());
        }
        if s.avg_sinr_db.is_empty() {
            return invalid("scenario.avg_sinr_db", "must not be empty");
        }
        if s.interferers.is_empty() {
            return invalid("scenario.interferers", "must not be empty");
        }
        let needs_rates = !matches!(self.kind, Kind::MaxrateVsSnr | Kind::AvgcapVsSnr);
        if needs_rates && a.rates.is_empty() {
            return invalid("analysis.rates", "must not be empty");
        }
        let needs_eps = !matches!(self.kind, Kind::AvgcapVsSnr | Kind::Validate);
        if needs_eps && a.epsilons.is_empty() {
            return invalid("analysis.epsilons", "must not be empty");
        }
        if self.kind == Kind::MaxrateVsSnr && a.delays.is_empty() {
            return invalid("analysis.delays", "must not be empty");
        }
        if self.kind == Kind::Validate && self.simulation.slots == 0 {
            return invalid("simulation.slots", "validation needs at least one slot");
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    kind: Option<Kind>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    threads: Option<usize>,
    #[serde(default)]
    scenario: FileScenario,
    #[serde(default)]
    analysis: FileAnalysis,
    #[serde(default)]
    simulation: FileSimulation,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScenario {
    avg_snr_db: Option<Vec<f64>>,
    avg_sinr_db: Option<Vec<f64>>,
    interferers: Option<Vec<usize>>,
    perturbation: Option<f64>,
    symbols_per_slot: Option<f64>,
    noise_reference_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAnalysis {
    rates: Option<Vec<f64>>,
    epsilons: Option<Vec<f64>>,
    delays: Option<Vec<u64>>,
    s_values: Option<Vec<f64>>,
    hops: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSimulation {
    slots: Option<u64>,
    max_delay: Option<u64>,
}

impl FileConfig {
    fn apply(self, c: &mut ExperimentConfig) {
        fn set<T>(target: &mut T, value: Option<T>) {
            if let Some(v) = value {
                *target = v;
            }
        }
        set(&mut c.seed, self.seed);
        c.output = self.output.or(c.output.take());
        c.threads = self.threads.or(c.threads);
        let s = self.scenario;
        set(&mut c.scenario.avg_snr_db, s.avg_snr_db);
        set(&mut c.scenario.avg_sinr_db, s.avg_sinr_db);
        set(&mut c.scenario.interferers, s.interferers);
        set(&mut c.scenario.perturbation, s.perturbation);
        set(&mut c.scenario.symbols_per_slot, s.symbols_per_slot);
        c.scenario.noise_reference_db = s.noise_reference_db.or(c.scenario.noise_reference_db);
        let a = self.analysis;
        set(&mut c.analysis.rates, a.rates);
        set(&mut c.analysis.epsilons, a.epsilons);
        set(&mut c.analysis.delays, a.delays);
        set(&mut c.analysis.s_values, a.s_values);
        set(&mut c.analysis.hops, a.hops);
        set(&mut c.simulation.slots, self.simulation.slots);
        set(&mut c.simulation.max_delay, self.simulation.max_delay);
    }
}
