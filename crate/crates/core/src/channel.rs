//! Interference-channel power model, SINR distribution and sampling.
//!
//! Noise power is normalized to one, so the signal of interest has mean
//! received power `γ∅` and interferer `i` has mean power `γ∅ / a_i`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `N` giving a service scale `𝒩 = N / ln 2` of exactly one, i.e. capacity in
/// natural units.
pub const NATURAL_SYMBOLS_PER_SLOT: f64 = std::f64::consts::LN_2;

/// Relative gap between interferer ratios below which the partial-fraction
/// weights are flagged as numerically unreliable.
pub const ILL_CONDITIONED_GAP: f64 = 1e-4;

/// Default relative spread used when splitting interference power.
pub const DEFAULT_PERTURBATION: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("average SNR must be positive and finite, got {0}")]
    InvalidSnr(f64),
    #[error("interferer ratio a[{index}] = {value} must be positive and finite")]
    InvalidRatio { index: usize, value: f64 },
    #[error("interferer ratios a[{first}] and a[{second}] are equal ({value}); partial fractions need distinct ratios")]
    DuplicateRatio { first: usize, second: usize, value: f64 },
    #[error("symbols per slot must be positive and finite, got {0}")]
    InvalidSymbols(f64),
    #[error("SINR argument must be non-negative, got {0}")]
    NegativeArgument(f64),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
}

/// Average signal-to-noise ratio and per-interferer power ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    avg_snr: f64,
    ratios: Vec<f64>,
    symbols_per_slot: f64,
}

impl ChannelSpec {
    /// `avg_snr` is `γ∅ = p₀/σ²`; `ratios` holds `a_i = p₀/p_i`.
    pub fn new(avg_snr: f64, ratios: Vec<f64>) -> Result<Self, ChannelError> {
        if !(avg_snr > 0.0) || !avg_snr.is_finite() {
            return Err(ChannelError::InvalidSnr(avg_snr));
        }
        for (index, &value) in ratios.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ChannelError::InvalidRatio { index, value });
            }
        }
        check_distinct(&ratios)?;
        Ok(Self {
            avg_snr,
            ratios,
            symbols_per_slot: NATURAL_SYMBOLS_PER_SLOT,
        })
    }

    pub fn noise_limited(avg_snr: f64) -> Result<Self, ChannelError> {
        Self::new(avg_snr, Vec::new())
    }

    pub fn with_symbols_per_slot(mut self, symbols: f64) -> Result<Self, ChannelError> {
        if !(symbols > 0.0) || !symbols.is_finite() {
            return Err(ChannelError::InvalidSymbols(symbols));
        }
        self.symbols_per_slot = symbols;
        Ok(self)
    }

    pub fn avg_snr(&self) -> f64 {
        self.avg_snr
    }

    pub fn interferer_ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn symbols_per_slot(&self) -> f64 {
        self.symbols_per_slot
    }

    /// `𝒩 = N / ln 2`: capacity per slot is `𝒩 ln(1 + γ)`.
    pub fn service_scale(&self) -> f64 {
        self.symbols_per_slot / std::f64::consts::LN_2
    }

    pub fn is_noise_limited(&self) -> bool {
        self.ratios.is_empty()
    }

    /// `p₀ / (σ² + Σ p_i)` with `σ² = 1`.
    pub fn avg_sinr(&self) -> f64 {
        let interference: f64 = self.ratios.iter().map(|a| self.avg_snr / a).sum();
        self.avg_snr / (1.0 + interference)
    }

    pub fn weights(&self) -> Result<PartialFractionWeights, ChannelError> {
        partial_fraction_weights(&self.ratios)
    }

    /// `1 - F_γ(x) = e^(-x/γ∅) Π a_i / (a_i + x)`.
    pub fn sinr_survival(&self, x: f64) -> f64 {
        let product: f64 = self.ratios.iter().map(|&a| a / (a + x)).product();
        (-x / self.avg_snr).exp() * product
    }

    /// Capacity of one slot at SINR `gamma`, in units of the service scale.
    pub fn capacity(&self, gamma: f64) -> f64 {
        self.service_scale() * gamma.ln_1p()
    }
}

fn check_distinct(ratios: &[f64]) -> Result<(), ChannelError> {
    for i in 0..ratios.len() {
        for j in (i + 1)..ratios.len() {
            if ratios[i] == ratios[j] {
                return Err(ChannelError::DuplicateRatio {
                    first: i,
                    second: j,
                    value: ratios[i],
                });
            }
        }
    }
    Ok(())
}

/// Signed coefficients `u_i` turning the product-form survival function into
/// `e^(-x/γ∅) Σ u_i / (a_i + x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionWeights {
    pub weights: Vec<f64>,
    /// `min_{i≠j} |a_i - a_j| / max(a_i, a_j)`; infinite for fewer than two interferers.
    pub min_relative_gap: f64,
}

impl PartialFractionWeights {
    pub fn is_ill_conditioned(&self) -> bool {
        self.min_relative_gap < ILL_CONDITIONED_GAP
    }
}

/// `u_i = Π_s a_s / Π_{t≠i} (a_t - a_i)`, formed as `a_i Π_{t≠i} a_t/(a_t - a_i)`.
pub fn partial_fraction_weights(ratios: &[f64]) -> Result<PartialFractionWeights, ChannelError> {
    for (index, &value) in ratios.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(ChannelError::InvalidRatio { index, value });
        }
    }
    check_distinct(ratios)?;
    let mut min_relative_gap = f64::INFINITY;
    let weights = ratios
        .iter()
        .enumerate()
        .map(|(i, &ai)| {
            ratios
                .iter()
                .enumerate()
                .filter(|&(t, _)| t != i)
                .fold(ai, |acc, (_, &at)| {
                    min_relative_gap = min_relative_gap.min((at - ai).abs() / at.max(ai));
                    acc * at / (at - ai)
                })
        })
        .collect();
    let result = PartialFractionWeights {
        weights,
        min_relative_gap,
    };
    if result.is_ill_conditioned() {
        log::warn!(
            "interferer ratios are within relative gap {:e}; partial-fraction weights are ill-conditioned",
            result.min_relative_gap
        );
    }
    Ok(result)
}

/// `F_γ(x) = 1 - e^(-x/γ∅) Π a_i / (a_i + x)`.
pub fn sinr_cdf(spec: &ChannelSpec, x: f64) -> Result<f64, ChannelError> {
    if x.is_nan() || x < 0.0 {
        return Err(ChannelError::NegativeArgument(x));
    }
    Ok(1.0 - spec.sinr_survival(x))
}

/// One SINR draw `X₀ / (Σ X_i + 1)` with independent exponential received powers.
pub fn sample_sinr<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> f64 {
    let e0: f64 = Exp1.sample(rng);
    let signal = spec.avg_snr * e0;
    let interference: f64 = spec
        .ratios
        .iter()
        .map(|&a| {
            let e: f64 = Exp1.sample(rng);
            spec.avg_snr / a * e
        })
        .sum();
    signal / (interference + 1.0)
}

/// Generator used for every seeded run.
pub type SimRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Interference scenario described by average SNR and average SINR, with the
/// interference power split almost equally among `n_interferers`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioConfig", into = "ScenarioConfig")]
pub struct ScenarioSpec {
    pub avg_snr: f64,
    pub avg_sinr: f64,
    pub n_interferers: usize,
    pub perturbation: f64,
    pub symbols_per_slot: f64,
}

impl ScenarioSpec {
    pub fn new(avg_snr: f64, avg_sinr: f64, n_interferers: usize) -> Self {
        Self {
            avg_snr,
            avg_sinr,
            n_interferers,
            perturbation: DEFAULT_PERTURBATION,
            symbols_per_slot: NATURAL_SYMBOLS_PER_SLOT,
        }
    }

    pub fn from_db(avg_snr_db: f64, avg_sinr_db: f64, n_interferers: usize) -> Self {
        Self::new(db_to_linear(avg_snr_db), db_to_linear(avg_sinr_db), n_interferers)
    }

    pub fn with_perturbation(mut self, perturbation: f64) -> Self {
        self.perturbation = perturbation;
        self
    }

    pub fn with_symbols_per_slot(mut self, symbols: f64) -> Self {
        self.symbols_per_slot = symbols;
        self
    }

    pub fn to_channel(&self) -> Result<ChannelSpec, ChannelError> {
        scenario_to_channel(self)
    }
}

/// Builds the channel: `σ² = 1`, `p₀ = γ∅`, total interference
/// `P_I = γ∅/γ̄ - 1` split as `p_i = (P_I/n)(1 + η(i - (n+1)/2))`.
pub fn scenario_to_channel(s: &ScenarioSpec) -> Result<ChannelSpec, ChannelError> {
    if !(s.avg_snr > 0.0) || !s.avg_snr.is_finite() {
        return Err(ChannelError::InvalidSnr(s.avg_snr));
    }
    if !(s.avg_sinr > 0.0) || !s.avg_sinr.is_finite() {
        return Err(ChannelError::Infeasible(format!("average SINR must be positive, got {}", s.avg_sinr)));
    }
    if s.avg_sinr > s.avg_snr {
        return Err(ChannelError::Infeasible(format!(
            "average SINR {} exceeds average SNR {}",
            s.avg_sinr, s.avg_snr
        )));
    }
    let channel = if s.n_interferers == 0 {
        if (s.avg_snr - s.avg_sinr).abs() > 1e-12 * s.avg_snr {
            return Err(ChannelError::Infeasible(
                "noise-limited scenario requires average SINR equal to average SNR".into(),
            ));
        }
        ChannelSpec::noise_limited(s.avg_snr)?
    } else {
        if s.avg_sinr >= s.avg_snr {
            return Err(ChannelError::Infeasible(
                "interferers present but average SINR equals average SNR".into(),
            ));
        }
        let n = s.n_interferers as f64;
        let eta = s.perturbation;
        if !(eta >= 0.0) || eta * (n - 1.0) / 2.0 >= 1.0 {
            return Err(ChannelError::Infeasible(format!(
                "perturbation {eta} makes some interferer power non-positive for {} interferers",
                s.n_interferers
            )));
        }
        let total = s.avg_snr / s.avg_sinr - 1.0;
        let ratios = (1..=s.n_interferers)
            .map(|i| {
                let p = total / n * (1.0 + eta * (i as f64 - (n + 1.0) / 2.0));
                s.avg_snr / p
            })
            .collect();
        ChannelSpec::new(s.avg_snr, ratios)?
    };
    channel.with_symbols_per_slot(s.symbols_per_slot)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Text-configuration form of [`ScenarioSpec`], with powers in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub avg_snr_db: f64,
    /// Defaults to `avg_snr_db` (no interference).
    #[serde(default)]
    pub avg_sinr_db: Option<f64>,
    #[serde(default)]
    pub n_interferers: usize,
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    #[serde(default = "default_symbols")]
    pub symbols_per_slot: f64,
}

fn default_perturbation() -> f64 {
    DEFAULT_PERTURBATION
}

fn default_symbols() -> f64 {
    NATURAL_SYMBOLS_PER_SLOT
}

impl TryFrom<ScenarioConfig> for ScenarioSpec {
    type Error = ChannelError;

    fn try_from(c: ScenarioConfig) -> Result<Self, Self::Error> {
        let spec = ScenarioSpec {
            avg_snr: db_to_linear(c.avg_snr_db),
            avg_sinr: db_to_linear(c.avg_sinr_db.unwrap_or(c.avg_snr_db)),
            n_interferers: c.n_interferers,
            perturbation: c.perturbation,
            symbols_per_slot: c.symbols_per_slot,
        };
        scenario_to_channel(&spec)?;
        Ok(spec)
    }
}

impl From<ScenarioSpec> for ScenarioConfig {
    fn from(s: ScenarioSpec) -> Self {
        ScenarioConfig {
            avg_snr_db: linear_to_db(s.avg_snr),
            avg_sinr_db: Some(linear_to_db(s.avg_sinr)),
            n_interferers: s.n_interferers,
            perturbation: s.perturbation,
            symbols_per_slot: s.symbols_per_slot,
        }
    }
}
