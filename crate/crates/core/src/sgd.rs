//! Single-index data generation and the discrete-time dynamics: population
//! gradient descent, one-pass stochastic gradient descent, and projected SGD
//! with exact re-projection onto the sphere, plus the empirical coupling
//! measurement against the gradient flow.

use crate::activations::Activation;
use crate::flow::{
    init_full, integrate_full, risk_reduced, FlowConfig, FlowError, FullState, FullSystem, Model,
    ReducedState, WeightLaw,
};
use crate::scalar::{dot, normalize, Real};
use crate::trace::RiskTrace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SgdError {
    #[error("dynamics diverged at step {step}: {what}")]
    Diverged { step: usize, what: String },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Controls of a projected-SGD run. The horizon is T = n_steps · eta.
#[derive(Debug, Clone)]
pub struct SgdConfig {
    pub d: usize,
    pub m: usize,
    pub eta: f64,
    pub eps: f64,
    pub n_steps: usize,
    pub seed: u64,
    /// Tail parameter of the coupling-bound shape √η(√(d + log m) + z);
    /// reporting only.
    pub z: f64,
    /// Record coupling and risk every this many steps.
    pub checkpoint_every: usize,
    /// Tolerances of the matched gradient-flow reference integration.
    pub gf_rtol: f64,
    pub gf_atol: f64,
}

impl SgdConfig {
    pub fn horizon(&self) -> f64 {
        self.eta * self.n_steps as f64
    }
}

/// Discrete-time particle state: second-layer weights and unit rows.
#[derive(Debug, Clone)]
pub struct SgdState<S> {
    pub a: Vec<S>,
    /// m rows of length d, flattened, each exactly unit norm after a step.
    pub u: Vec<S>,
    pub d: usize,
}

impl<S: Real> SgdState<S> {
    pub fn from_full(state: &FullState<S>) -> Self {
        Self {
            a: state.a.clone(),
            u: state.u.clone(),
            d: state.d,
        }
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.u[i * self.d..(i + 1) * self.d]
    }

    /// Gram data of the current iterate (for exact population risk).
    pub fn reduced(&self, u_star: &[S]) -> ReducedState<S> {
        let full = FullState {
            a: self.a.clone(),
            u: self.u.clone(),
            u_star: u_star.to_vec(),
            d: self.d,
        };
        ReducedState::from_full(&full)
    }
}

/// Draw `count` single-index samples: x ~ N(0, I_d), y = φ(⟨u_*, x⟩).
pub fn sample_batch<S: Real, R: Rng>(
    d: usize,
    count: usize,
    u_star: &[S],
    phi: impl Fn(S) -> S,
    rng: &mut R,
) -> Vec<(Vec<S>, S)> {
    (0..count)
        .map(|_| {
            let x: Vec<S> = (0..d).map(|_| S::std_normal(rng)).collect();
            let y = phi(dot(u_star, &x));
            (x, y)
        })
        .collect()
}

/// One population-gradient step: the full-flow right-hand side scaled by η,
/// with tangential projection in the u-block and renormalization after.
pub fn gd_step<S: Real>(state: &mut SgdState<S>, model: &Model<S>, u_star: &[S], eta: S, eps: S) {
    let (m, d) = (state.m(), state.d);
    let kp = &model.kernels;
    let inv_m = S::one() / S::of(m as f64);
    let s: Vec<S> = (0..m).map(|i| dot(state.row(i), u_star)).collect();
    let mut r = vec![S::one(); m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = dot(state.row(i), state.row(j));
            r[i * m + j] = v;
            r[j * m + i] = v;
        }
    }
    let a_old = state.a.clone();
    for i in 0..m {
        let mut drive = S::zero();
        for j in 0..m {
            drive += a_old[j] * kp.u(r[i * m + j]);
        }
        state.a[i] += eta / eps * (kp.v(s[i]) - inv_m * drive);
    }
    let u_old = state.u.clone();
    let row_old = |i: usize| &u_old[i * d..(i + 1) * d];
    for i in 0..m {
        let alpha = a_old[i] * kp.v_prime(s[i]);
        let mut self_coef = -alpha * s[i];
        let mut delta = vec![S::zero(); d];
        for t in 0..d {
            delta[t] = alpha * u_star[t];
        }
        for j in 0..m {
            let g = a_old[i] * inv_m * a_old[j] * kp.u_prime(r[i * m + j]);
            self_coef += g * r[i * m + j];
            let uj = row_old(j);
            for t in 0..d {
                delta[t] -= g * uj[t];
            }
        }
        let ui = row_old(i);
        let out = &mut state.u[i * d..(i + 1) * d];
        for t in 0..d {
            out[t] = ui[t] + eta * (delta[t] + self_coef * ui[t]);
        }
        normalize(out);
    }
}

/// One projected-SGD step on a fresh sample (x, y):
/// ā_i += ε⁻¹η (y - f̂) σ(⟨ū_i, x⟩),
/// ū_i ← Proj_sphere(ū_i + η ā_i (y - f̂) σ'(⟨ū_i, x⟩) x),
/// all right-hand sides evaluated at the pre-step iterate.
pub fn psgd_step<S: Real>(
    state: &mut SgdState<S>,
    x: &[S],
    y: S,
    sigma: impl Fn(S) -> S,
    sigma_prime: impl Fn(S) -> S,
    eta: S,
    eps: S,
) -> Result<(), SgdError> {
    let (m, d) = (state.m(), state.d);
    let inv_m = S::one() / S::of(m as f64);
    let pre: Vec<S> = (0..m).map(|i| dot(state.row(i), x)).collect();
    let acts: Vec<S> = pre.iter().map(|&p| sigma(p)).collect();
    let out: S = state
        .a
        .iter()
        .zip(&acts)
        .map(|(&a, &act)| a * act)
        .sum::<S>()
        * inv_m;
    let resid = y - out;
    if !resid.is_finite() {
        return Err(SgdError::Diverged {
            step: 0,
            what: format!("non-finite residual (network output {})", out.to_f64_lossy()),
        });
    }
    let a_old = state.a.clone();
    for i in 0..m {
        state.a[i] += eta / eps * resid * acts[i];
    }
    for i in 0..m {
        let gain = eta * a_old[i] * resid * sigma_prime(pre[i]);
        let row = &mut state.u[i * d..(i + 1) * d];
        for t in 0..d {
            row[t] += gain * x[t];
        }
        normalize(row);
    }
    Ok(())
}

/// Per-checkpoint coupling measurements against the matched gradient flow.
#[derive(Debug, Clone)]
pub struct CouplingReport {
    pub checkpoint_steps: Vec<usize>,
    pub times: Vec<f64>,
    /// Running sup over checkpoints of max_i ‖θ_i(kη) - θ̄_i(k)‖₂.
    pub theta_gap_sup: Vec<f64>,
    /// |R(GF at kη) - R(PSGD at k)| per checkpoint.
    pub risk_gap: Vec<f64>,
    /// Bound shape √η (√(d + log m) + z) for overlay.
    pub reference_shape: f64,
}

impl CouplingReport {
    /// Largest risk gap over all checkpoints.
    pub fn sup_risk_gap(&self) -> f64 {
        self.risk_gap.iter().cloned().fold(0.0, f64::max)
    }
}

/// Outcome of a one-pass projected SGD run.
#[derive(Debug, Clone)]
pub struct PsgdRun {
    pub trace: RiskTrace,
    pub coupling: CouplingReport,
    pub final_state: SgdState<f64>,
}

/// Run one-pass projected SGD over n fresh samples and couple it to the
/// matched full gradient flow started from the same initialization.
///
/// Population risk at checkpoints is computed exactly from inner products
/// (the kernel form of the risk), never estimated from data.
pub fn run_psgd(
    cfg: &SgdConfig,
    phi: &Activation,
    sigma: &Activation,
    pa: &WeightLaw,
) -> Result<PsgdRun, SgdError> {
    let model = Model::<f64>::new(phi.series_as(), sigma.series_as());
    let init = init_full::<f64>(cfg.m, cfg.d, pa, cfg.seed)?;
    let u_star = init.u_star.clone();

    // checkpoint schedule (always includes the final step)
    let mut checkpoint_steps: Vec<usize> = (1..=cfg.n_steps)
        .filter(|k| k % cfg.checkpoint_every == 0)
        .collect();
    if checkpoint_steps.last() != Some(&cfg.n_steps) {
        checkpoint_steps.push(cfg.n_steps);
    }
    let times: Vec<f64> = checkpoint_steps.iter().map(|&k| k as f64 * cfg.eta).collect();

    // matched gradient-flow reference, sampled at the checkpoint times
    let gf_system = FullSystem::new(model.clone(), &init, cfg.eps);
    let gf_cfg = FlowConfig {
        eps: cfg.eps,
        t_end: cfg.horizon(),
        rtol: cfg.gf_rtol,
        atol: cfg.gf_atol,
        max_step: None,
        seed: cfg.seed,
    };
    let gf = integrate_full(&gf_system, &init, &gf_cfg, &times)?;

    // data stream on an independent RNG stream of the same seed
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut state = SgdState::from_full(&init);
    let sigma_f = |x: f64| sigma.eval(x);
    let sigma_df = |x: f64| sigma.deriv(x);
    let phi_f = |x: f64| phi.eval(x);

    let mut trace = RiskTrace::with_capacity(checkpoint_steps.len());
    let mut theta_gap_sup = Vec::with_capacity(checkpoint_steps.len());
    let mut risk_gap = Vec::with_capacity(checkpoint_steps.len());
    let mut running_sup = 0.0f64;
    let mut next_cp = 0usize;

    let a_bound = 1e6;
    for k in 1..=cfg.n_steps {
        let x: Vec<f64> = (0..cfg.d).map(|_| f64::std_normal(&mut rng)).collect();
        let y = phi_f(dot(&u_star, &x));
        psgd_step(&mut state, &x, y, sigma_f, sigma_df, cfg.eta, cfg.eps)
            .map_err(|e| match e {
                SgdError::Diverged { what, .. } => SgdError::Diverged { step: k, what },
                other => other,
            })?;
        if state.a.iter().any(|a| !a.is_finite() || a.abs() > a_bound) {
            return Err(SgdError::Diverged {
                step: k,
                what: format!(
                    "second-layer weight left [-{a_bound}, {a_bound}]; largest |a| = {:e}",
                    state.a.iter().fold(0.0f64, |acc, a| acc.max(a.abs()))
                ),
            });
        }

        if next_cp < checkpoint_steps.len() && k == checkpoint_steps[next_cp] {
            let red = state.reduced(&u_star);
            let risk = risk_reduced(&red, &model.kernels, model.phi_norm_sq());
            let w = vec![1.0 / cfg.m as f64; cfg.m];
            let (_, comps) =
                crate::flow::risk_hermite(&red.a, &red.s, &w, &model.phi, &model.sigma);
            trace.push(times[next_cp], risk, comps);

            let gf_state = gf_system.decode(&gf.states[next_cp]);
            let mut max_theta = 0.0f64;
            for i in 0..cfg.m {
                let da = gf_state.a[i] - state.a[i];
                let du_sq: f64 = gf_state
                    .row(i)
                    .iter()
                    .zip(state.row(i))
                    .map(|(&g, &s)| (g - s) * (g - s))
                    .sum();
                max_theta = max_theta.max((da * da + du_sq).sqrt());
            }
            running_sup = running_sup.max(max_theta);
            theta_gap_sup.push(running_sup);
            risk_gap.push((gf.trace.risk[next_cp] - risk).abs());
            next_cp += 1;
        }
    }

    let reference_shape =
        cfg.eta.sqrt() * ((cfg.d as f64 + (cfg.m as f64).ln()).sqrt() + cfg.z);
    Ok(PsgdRun {
        trace,
        coupling: CouplingReport {
            checkpoint_steps,
            times,
            theta_gap_sup,
            risk_gap,
            reference_shape,
        },
        final_state: state,
    })
}

/// Monte Carlo estimate of the population risk, as a cross-check of the
/// exact kernel evaluation.
pub fn risk_monte_carlo<S: Real, R: Rng>(
    state: &SgdState<S>,
    u_star: &[S],
    phi: impl Fn(S) -> S,
    sigma: impl Fn(S) -> S,
    n: usize,
    rng: &mut R,
) -> S {
    let m = state.m();
    let inv_m = S::one() / S::of(m as f64);
    let mut acc = S::zero();
    for _ in 0..n {
        let x: Vec<S> = (0..state.d).map(|_| S::std_normal(rng)).collect();
        let y = phi(dot(u_star, &x));
        let out: S = (0..m)
            .map(|i| state.a[i] * sigma(dot(state.row(i), &x)))
            .sum::<S>()
            * inv_m;
        let gap = y - out;
        acc += gap * gap;
    }
    S::of(0.5) * acc / S::of(n as f64)
}
