//! Execute one RunConfig: build the model, initialize, integrate or iterate,
//! and assemble the trace table.

use crate::config::{RunConfig, SimplifiedMode, SystemKind};
use crate::csvio::TraceTable;
use anyhow::{Context, Result};
use slowfast_core::activations::{self, Activation};
use slowfast_core::flow::{
    init_full, init_meanfield, integrate_full, integrate_meanfield, integrate_reduced,
    integrate_simplified, risk_hermite, risk_reduced, FlowConfig, FullSystem, MeanFieldSystem,
    Model, ReducedState, ReducedSystem, SimplifiedInit, SimplifiedState, SimplifiedSystem,
};
use slowfast_core::scalar::{dot, Real};
use slowfast_core::sgd::{run_psgd, SgdConfig, SgdState};
use slowfast_core::trace::log_grid;

pub struct Prepared {
    pub phi: Activation,
    pub sigma: Activation,
    pub model: Model<f64>,
}

pub fn prepare_model(cfg: &RunConfig) -> Result<Prepared> {
    let phi = activations::resolve_with_truncation(&cfg.phi, cfg.truncation)
        .with_context(|| format!("field 'phi' = '{}'", cfg.phi))?;
    let sigma = activations::resolve_with_truncation(&cfg.sigma, cfg.truncation)
        .with_context(|| format!("field 'sigma' = '{}'", cfg.sigma))?;
    let model = Model::new(phi.series_as(), sigma.series_as());
    Ok(Prepared { phi, sigma, model })
}

fn sample_grid(cfg: &RunConfig) -> Vec<f64> {
    log_grid(cfg.t_start(), cfg.t_end, cfg.samples)
}

/// Run the configured system and return its trace table.
pub fn run_one(cfg: &RunConfig) -> Result<TraceTable> {
    cfg.validate()?;
    let prep = prepare_model(cfg)?;
    match cfg.system {
        SystemKind::Meanfield => run_meanfield(cfg, &prep),
        SystemKind::Reduced => run_reduced(cfg, &prep),
        SystemKind::Full => run_full(cfg, &prep),
        SystemKind::Simplified => run_simplified(cfg, &prep),
        SystemKind::Gd => run_gd(cfg, &prep),
        SystemKind::Sgd => run_sgd(cfg, &prep),
        SystemKind::Psgd => run_psgd_cfg(cfg, &prep),
    }
}

fn flow_config(cfg: &RunConfig) -> FlowConfig<f64> {
    FlowConfig {
        eps: cfg.eps,
        t_end: cfg.t_end,
        rtol: cfg.rtol,
        atol: cfg.atol,
        max_step: None,
        seed: cfg.seed,
    }
}

fn run_meanfield(cfg: &RunConfig, prep: &Prepared) -> Result<TraceTable> {
    let st = init_meanfield::<f64>(cfg.m, &cfg.pa.to_law(), cfg.seed)?;
    let sys = MeanFieldSystem::new(prep.model.clone(), st.weights.clone(), cfg.eps);
    let grid = sample_grid(cfg);
    let run = integrate_meanfield(&sys, &st, &flow_config(cfg), &grid)?;
    let mut table = TraceTable {
        trace: run.trace,
        ..Default::default()
    };
    if cfg.dump_state {
        for y in &run.states {
            table.a_cols.push(y[..cfg.m].to_vec());
            table.s_cols.push(y[cfg.m..2 * cfg.m].to_vec());
        }
    }
    Ok(table)
}

fn run_reduced(cfg: &RunConfig, prep: &Prepared) -> Result<TraceTable> {
    let mf = init_meanfield::<f64>(cfg.m, &cfg.pa.to_law(), cfg.seed)?;
    let st = ReducedState::centered(mf.a);
    let sys = ReducedSystem::new(prep.model.clone(), cfg.m, cfg.eps);
    let grid = sample_grid(cfg);
    let run = integrate_reduced(&sys, &st, &flow_config(cfg), &grid)?;
    let mut table = TraceTable {
        trace: run.trace,
        ..Default::default()
    };
    if cfg.dump_state {
        for y in &run.states {
            table.a_cols.push(y[..cfg.m].to_vec());
            table.s_cols.push(y[cfg.m..2 * cfg.m].to_vec());
        }
    }
    Ok(table)
}

fn run_full(cfg: &RunConfig, prep: &Prepared) -> Result<TraceTable> {
    let d = cfg.d.expect("validated");
    let st = init_full::<f64>(cfg.m, d, &cfg.pa.to_law(), cfg.seed)?;
    let sys = FullSystem::new(prep.model.clone(), &st, cfg.eps);
    let grid = sample_grid(cfg);
    let run = integrate_full(&sys, &st, &flow_config(cfg), &grid)?;
    let mut table = TraceTable {
        trace: run.trace,
        ..Default::default()
    };
    if cfg.dump_state {
        for y in &run.states {
            let full = sys.decode(y);
            table.a_cols.push(full.a.clone());
            table.s_cols.push(full.overlaps());
        }
    }
    Ok(table)
}

fn run_simplified(cfg: &RunConfig, prep: &Prepared) -> Result<TraceTable> {
    let level = cfg.level.expect("validated");
    let sigma_l = prep.model.sigma.coeff(level);
    let phi_l = prep.model.phi.coeff(level);
    let mode = match cfg.simplified_mode.unwrap_or_default() {
        SimplifiedMode::Aligned => SimplifiedInit::Aligned,
        SimplifiedMode::Opposed => SimplifiedInit::Opposed,
    };
    // sign convention handles φ_l = 0 sources too
    let sign = if sigma_l * phi_l == 0.0 {
        1.0
    } else {
        sigma_l * phi_l
    };
    let st = SimplifiedState::<f64>::init(cfg.m, level, cfg.eps, mode, sign, cfg.seed);
    let sys = SimplifiedSystem::new(&st, sigma_l, phi_l);
    let grid = sample_grid(cfg);
    let run = integrate_simplified(&sys, &st, &flow_config(cfg), &grid)?;
    let q0 = st.conserved();
    let mut drift_col = Vec::with_capacity(run.states.len());
    let mut table = TraceTable {
        trace: run.trace,
        ..Default::default()
    };
    for y in &run.states {
        let dec = sys.decode(y);
        let drift = dec
            .conserved()
            .iter()
            .zip(&q0)
            .map(|(q, q0)| (q - q0).abs())
            .fold(0.0f64, f64::max);
        drift_col.push(drift);
        if cfg.dump_state {
            table.a_cols.push(dec.a_tilde.clone());
            table.s_cols.push(dec.s_tilde.clone());
        }
    }
    table.extra.push(("q_drift".into(), drift_col));
    Ok(table)
}

fn checkpoint_schedule(cfg: &RunConfig) -> (usize, Vec<usize>) {
    let n = cfg.n_steps.expect("validated");
    let every = cfg
        .checkpoint_every
        .unwrap_or_else(|| (n / cfg.samples.min(n).max(1)).max(1));
    let mut steps: Vec<usize> = (1..=n).filter(|k| k % every == 0).collect();
    if steps.last() != Some(&n) {
        steps.push(n);
    }
    (every, steps)
}

fn record_discrete_checkpoint(
    table: &mut TraceTable,
    cfg: &RunConfig,
    prep: &Prepared,
    state: &SgdState<f64>,
    u_star: &[f64],
    t: f64,
) {
    let red = state.reduced(u_star);
    let risk = risk_reduced(&red, &prep.model.kernels, prep.model.phi_norm_sq());
    let w = vec![1.0 / cfg.m as f64; cfg.m];
    let (_, comps) = risk_hermite(&red.a, &red.s, &w, &prep.model.phi, &prep.model.sigma);
    table.trace.push(t, risk, comps);
    if cfg.dump_state {
        table.a_cols.push(red.a.clone());
        table.s_cols.push(red.s.clone());
    }
}

fn run_gd(cfg: &RunConfig, prep: &Prepared) -> Result<TraceTable> {
    let d = cfg.d.expect("validated");
    let eta = cfg.eta.expect("validated");
    let init = init_full::<f64>(cfg.m, d, &cfg.pa.to_law(), cfg.seed)?;
    let u_star = init.u_star.clone();
    let mut state = SgdState::from_full(&init);
    let (_, steps) = checkpoint_schedule(cfg);
    let mut table = TraceTable::default();
    let mut next = 0usize;
    for k in 1..=cfg.n_steps.unwrap() {
        slowfast_core::sgd::gd_step(&mut state, &prep.model, &u_star, eta, cfg.eps);
        if next < steps.len() && k == steps[next] {
            record_discrete_checkpoint(&mut table, cfg, prep, &state, &u_star, k as f64 * eta);
            next += 1;
        }
    }
    Ok(table)
}

/// One-pass SGD with the tangential (unprojected) update of the plain SGD
/// dynamics. The row norms drift at O(η²) per step; `u_norm_max` tracks the
/// drift and the reported risk uses the raw inner products.
fn run_sgd(cfg: &RunConfig, prep: &Prepared) -> Result<TraceTable> {
    use rand::SeedableRng;
    let d = cfg.d.expect("validated");
    let eta = cfg.eta.expect("validated");
    let init = init_full::<f64>(cfg.m, d, &cfg.pa.to_law(), cfg.seed)?;
    let u_star = init.u_star.clone();
    let mut state = SgdState::from_full(&init);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let (_, steps) = checkpoint_schedule(cfg);
    let mut table = TraceTable::default();
    let mut norm_col = Vec::new();
    let mut next = 0usize;
    for k in 1..=cfg.n_steps.unwrap() {
        let x: Vec<f64> = (0..d).map(|_| f64::std_normal(&mut rng)).collect();
        let y = prep.phi.eval(dot(&u_star, &x));
        sgd_tangential_step(&mut state, &x, y, &prep.sigma, eta, cfg.eps);
        if next < steps.len() && k == steps[next] {
            record_discrete_checkpoint(&mut table, cfg, prep, &state, &u_star, k as f64 * eta);
            let max_norm = (0..cfg.m)
                .map(|i| dot(state.row(i), state.row(i)).sqrt())
                .fold(0.0f64, f64::max);
            norm_col.push(max_norm);
            next += 1;
        }
    }
    table.extra.push(("u_norm_max".into(), norm_col));
    Ok(table)
}

/// Plain SGD step: ū_i += η (I - ū_iū_iᵀ) Ĝ_i, no re-projection.
fn sgd_tangential_step(
    state: &mut SgdState<f64>,
    x: &[f64],
    y: f64,
    sigma: &Activation,
    eta: f64,
    eps: f64,
) {
    let (m, d) = (state.m(), state.d);
    let inv_m = 1.0 / m as f64;
    let pre: Vec<f64> = (0..m).map(|i| dot(state.row(i), x)).collect();
    let acts: Vec<f64> = pre.iter().map(|&p| sigma.eval(p)).collect();
    let out: f64 = state
        .a
        .iter()
        .zip(&acts)
        .map(|(&a, &act)| a * act)
        .sum::<f64>()
        * inv_m;
    let resid = y - out;
    let a_old = state.a.clone();
    for i in 0..m {
        state.a[i] += eta / eps * resid * acts[i];
    }
    for i in 0..m {
        let gain = eta * a_old[i] * resid * sigma.deriv(pre[i]);
        let row = &mut state.u[i * d..(i + 1) * d];
        let radial: f64 = row.iter().zip(x).map(|(&u, &xi)| u * xi).sum();
        for t in 0..d {
            row[t] += gain * (x[t] - radial * row[t]);
        }
    }
}

fn run_psgd_cfg(cfg: &RunConfig, prep: &Prepared) -> Result<TraceTable> {
    let (every, _) = checkpoint_schedule(cfg);
    let sgd_cfg = SgdConfig {
        d: cfg.d.expect("validated"),
        m: cfg.m,
        eta: cfg.eta.expect("validated"),
        eps: cfg.eps,
        n_steps: cfg.n_steps.expect("validated"),
        seed: cfg.seed,
        z: 0.0,
        checkpoint_every: every,
        gf_rtol: cfg.rtol.max(1e-8),
        gf_atol: cfg.atol.max(1e-11),
    };
    let run = run_psgd(&sgd_cfg, &prep.phi, &prep.sigma, &cfg.pa.to_law())?;
    let mut table = TraceTable {
        trace: run.trace,
        ..Default::default()
    };
    table
        .extra
        .push(("risk_gap_gf".into(), run.coupling.risk_gap.clone()));
    table
        .extra
        .push(("theta_gap_sup".into(), run.coupling.theta_gap_sup.clone()));
    if cfg.dump_state {
        // final state only is meaningful for the discrete chain; overlaps
        // per checkpoint already live in the risk components
        let red = run.final_state.reduced(&full_u_star(cfg)?);
        table.a_cols = vec![red.a.clone(); table.trace.len()];
        table.s_cols = vec![red.s.clone(); table.trace.len()];
    }
    Ok(table)
}

fn full_u_star(cfg: &RunConfig) -> Result<Vec<f64>> {
    let init = init_full::<f64>(
        cfg.m,
        cfg.d.expect("validated"),
        &cfg.pa.to_law(),
        cfg.seed,
    )?;
    Ok(init.u_star)
}

/// Resolve φ/σ and rebuild the initialization to produce the closed-form
/// predicted risk curve on the same grid convention as a simulation.
pub fn predicted_risk_curve(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let prep = prepare_model(cfg)?;
    let st = init_meanfield::<f64>(cfg.m, &cfg.pa.to_law(), cfg.seed)?;
    let params = slowfast_core::asymptotics::AsymptoticParams::new(
        &st.a,
        &st.weights,
        &prep.model.phi,
        &prep.model.sigma,
        cfg.eps,
    );
    let grid = sample_grid(cfg);
    let curve = grid
        .iter()
        .map(|&t| slowfast_core::asymptotics::predicted_risk(&params, &prep.model.phi, t, cfg.eps))
        .collect();
    Ok((grid, curve))
}
