//! Delay and rate bounds for Rayleigh-fading links with interference.
//!
//! The service of a slot is `𝒩 ln(1 + γ)` bits, where `γ` is the SINR of a
//! Rayleigh-faded signal against independent Rayleigh-faded interferers and
//! noise. [`service`] computes the Mellin transform of that service with
//! certified brackets, [`snc`] turns it into delay and rate bounds, and
//! [`simulator`] runs the queue the bounds describe.

pub mod channel;
pub mod numerics;
pub mod service;
pub mod simulator;
pub mod snc;

pub use channel::{ChannelError, ChannelSpec, ScenarioConfig, ScenarioSpec};
pub use numerics::{NumericsError, QuadratureSpec};
pub use service::{MellinError, MellinParams, MellinValue, Method};
pub use simulator::{MonteCarloEstimate, SimConfig, SimError, SimOutcome};
pub use snc::{ArrivalSpec, DelayBoundResult, HopCount, SncAnalyzer, SncError};
