//! Core library for simulating the timescale-separated learning dynamics of
//! wide two-layer networks on single-index data.
//!
//! The numerical layer (Hermite kernels, the four gradient-flow systems, the
//! closed-form matched-asymptotic predictions, and the discrete GD/SGD
//! dynamics) is generic over the scalar type; trace analysis and verdicts
//! operate on `f64` time series.

pub mod activations;
pub mod analysis;
pub mod asymptotics;
pub mod flow;
pub mod hermite;
pub mod kernels;
pub mod ode;
pub mod scalar;
pub mod sgd;
pub mod trace;

pub use scalar::Real;

/// Concrete double-precision aliases for the main generic types.
pub type HermiteSeries64 = hermite::HermiteSeries<f64>;
pub type GaussHermite64 = hermite::GaussHermite<f64>;
pub type KernelPair64 = kernels::KernelPair<f64>;
pub type FullState64 = flow::FullState<f64>;
pub type ReducedState64 = flow::ReducedState<f64>;
pub type MeanFieldState64 = flow::MeanFieldState<f64>;
pub type SimplifiedState64 = flow::SimplifiedState<f64>;
pub type FlowConfig64 = flow::FlowConfig<f64>;
pub type AsymptoticParams64 = asymptotics::AsymptoticParams<f64>;

/// Single-precision aliases, mainly exercised by cross-precision tests.
pub type HermiteSeries32 = hermite::HermiteSeries<f32>;
pub type KernelPair32 = kernels::KernelPair<f32>;
pub type MeanFieldState32 = flow::MeanFieldState<f32>;
