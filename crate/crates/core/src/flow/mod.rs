//! The four deterministic gradient-flow systems and their risk evaluators:
//! the full d-dimensional projected flow, the d-independent reduced
//! (a, s, R) flow, the mean-field (a, s) flow, and the per-level rescaled
//! simplified model.

mod risk;
mod state;
mod system;

pub use risk::*;
pub use state::*;
pub use system::*;

use crate::ode::{self, OdeError, OdeOptions, OdeStats};
use crate::scalar::Real;
use crate::trace::RiskTrace;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("weight law rejected: {0}")]
    WeightLaw(String),
    #[error("atom list has {got} entries for m = {expected} particles")]
    AtomCount { expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Integration controls shared by all flow systems.
#[derive(Debug, Clone)]
pub struct FlowConfig<S> {
    /// Timescale ratio ε of the second-layer weights.
    pub eps: S,
    /// Integration horizon.
    pub t_end: S,
    pub rtol: S,
    pub atol: S,
    /// Optional step cap after the fast transient.
    pub max_step: Option<S>,
    /// Seed recorded alongside runs that sample their initialization.
    pub seed: u64,
}

impl<S: Real> FlowConfig<S> {
    pub fn new(eps: S, t_end: S) -> Self {
        Self {
            eps,
            t_end,
            rtol: S::of(1e-9),
            atol: S::of(1e-12),
            max_step: None,
            seed: 0,
        }
    }

    pub fn with_tols(mut self, rtol: S, atol: S) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    /// Step control for the slow-fast systems: first step ε/100 and a cap of
    /// min(t_end/1000, 10ε) while t < 10ε, released afterwards.
    fn stiff_options(&self) -> OdeOptions<S> {
        let ten_eps = S::of(10.0) * self.eps;
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            initial_step: Some(self.eps / S::of(100.0)),
            max_step: self.max_step,
            transient_cap: Some((ten_eps, (self.t_end / S::of(1000.0)).min(ten_eps))),
        }
    }

    /// Step control for the already-rescaled simplified model (no fast block).
    fn plain_options(&self) -> OdeOptions<S> {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            initial_step: None,
            max_step: self.max_step,
            transient_cap: None,
        }
    }
}

/// Output of one integrated flow: flat state snapshots at the sample times
/// plus the risk trace evaluated from them.
#[derive(Debug, Clone)]
pub struct FlowRun<S> {
    pub times: Vec<S>,
    pub states: Vec<Vec<S>>,
    pub trace: RiskTrace,
    pub stats: OdeStats,
}

fn run_system<S, Sys>(
    system: &Sys,
    y0: Vec<S>,
    cfg: &FlowConfig<S>,
    sample_times: &[S],
    opts: OdeOptions<S>,
) -> Result<FlowRun<S>, FlowError>
where
    S: Real,
    Sys: FlowSystem<S>,
{
    let mut scratch = system.new_scratch();
    let needs_projection = system.projects();
    let projector = if needs_projection {
        Some(|y: &mut [S]| system.project(y))
    } else {
        None
    };
    let sol = ode::integrate(
        |_t, y: &[S], dy: &mut [S]| system.rhs(y, dy, &mut scratch),
        &y0,
        (S::zero(), cfg.t_end),
        sample_times,
        &opts,
        projector,
    )?;
    let mut trace = RiskTrace::with_capacity(sol.times.len());
    for (t, y) in sol.times.iter().zip(&sol.states) {
        let (risk, comps) = system.risk_with_components(y);
        trace.push(
            t.to_f64_lossy(),
            risk.to_f64_lossy(),
            comps.iter().map(|c| c.to_f64_lossy()).collect(),
        );
    }
    Ok(FlowRun {
        times: sol.times,
        states: sol.states,
        trace,
        stats: sol.stats,
    })
}

/// Integrate the full d-dimensional projected flow.
pub fn integrate_full<S: Real>(
    system: &FullSystem<S>,
    state0: &FullState<S>,
    cfg: &FlowConfig<S>,
    sample_times: &[S],
) -> Result<FlowRun<S>, FlowError> {
    run_system(system, state0.to_flat(), cfg, sample_times, cfg.stiff_options())
}

/// Integrate the reduced (a, s, R) flow.
pub fn integrate_reduced<S: Real>(
    system: &ReducedSystem<S>,
    state0: &ReducedState<S>,
    cfg: &FlowConfig<S>,
    sample_times: &[S],
) -> Result<FlowRun<S>, FlowError> {
    run_system(system, state0.to_flat(), cfg, sample_times, cfg.stiff_options())
}

/// Integrate the mean-field (a, s) flow.
pub fn integrate_meanfield<S: Real>(
    system: &MeanFieldSystem<S>,
    state0: &MeanFieldState<S>,
    cfg: &FlowConfig<S>,
    sample_times: &[S],
) -> Result<FlowRun<S>, FlowError> {
    run_system(system, state0.to_flat(), cfg, sample_times, cfg.stiff_options())
}

/// Integrate the rescaled level-l simplified model (time variable τ).
pub fn integrate_simplified<S: Real>(
    system: &SimplifiedSystem<S>,
    state0: &SimplifiedState<S>,
    cfg: &FlowConfig<S>,
    sample_times: &[S],
) -> Result<FlowRun<S>, FlowError> {
    run_system(system, state0.to_flat(), cfg, sample_times, cfg.plain_options())
}
