//! Closed-form matched-asymptotic predictions for the first three time
//! scales of the slow-fast mean-field flow, the induced piecewise plateau
//! risk, and the exponent tables of the per-level analysis.

use crate::hermite::HermiteSeries;
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error("constant mode skipped: |σ_0| = {sigma0} below threshold, the phase-1 relaxation is vacuous")]
    ConstantModeSkipped { sigma0: f64 },
    #[error("degenerate amplitude: ‖a_⊥,init‖ = 0, the later time scales cannot proceed")]
    DegenerateAmplitude,
    #[error("σ_1 φ_1 = 0: no linear component to learn")]
    NoLinearComponent,
}

/// Scalar data of the matched expansion: leading Hermite coefficients, the
/// decomposition of the initial second-layer weights into mean and
/// orthogonal part, and the timescale ratio.
#[derive(Debug, Clone)]
pub struct AsymptoticParams<S> {
    pub sigma0: S,
    pub sigma1: S,
    pub phi0: S,
    pub phi1: S,
    pub a_mean_init: S,
    pub a_perp_init: Vec<S>,
    pub weights: Vec<S>,
    pub a_perp_norm_sq: S,
    pub eps: S,
}

impl<S: Real> AsymptoticParams<S> {
    /// Decompose an initialization against the particle measure.
    pub fn new(
        a_init: &[S],
        weights: &[S],
        phi: &HermiteSeries<S>,
        sigma: &HermiteSeries<S>,
        eps: S,
    ) -> Self {
        let a_mean_init: S = a_init.iter().zip(weights).map(|(&a, &w)| w * a).sum();
        let a_perp_init: Vec<S> = a_init.iter().map(|&a| a - a_mean_init).collect();
        let a_perp_norm_sq: S = a_perp_init
            .iter()
            .zip(weights)
            .map(|(&p, &w)| w * p * p)
            .sum();
        Self {
            sigma0: sigma.coeff(0),
            sigma1: sigma.coeff(1),
            phi0: phi.coeff(0),
            phi1: phi.coeff(1),
            a_mean_init,
            a_perp_init,
            weights: weights.to_vec(),
            a_perp_norm_sq,
            eps,
        }
    }

    fn check_linear(&self) -> Result<(), AsymptoticsError> {
        if self.sigma1 * self.phi1 == S::zero() {
            return Err(AsymptoticsError::NoLinearComponent);
        }
        if self.a_perp_norm_sq <= S::zero() {
            return Err(AsymptoticsError::DegenerateAmplitude);
        }
        Ok(())
    }

    /// |σ_1 φ_1|.
    pub fn linear_rate(&self) -> S {
        (self.sigma1 * self.phi1).abs()
    }
}

/// Scale-1 mean of the second-layer weights in fast time t_1 = t/ε:
/// ⟨a⟩(t_1) = e^{-σ_0² t_1} ⟨a_init⟩ + (1 - e^{-σ_0² t_1}) φ_0/σ_0.
pub fn phase1_mean<S: Real>(params: &AsymptoticParams<S>, t1: S) -> Result<S, AsymptoticsError> {
    if params.sigma0.abs() < S::of(1e-12) {
        return Err(AsymptoticsError::ConstantModeSkipped {
            sigma0: params.sigma0.to_f64_lossy(),
        });
    }
    let decay = (-params.sigma0 * params.sigma0 * t1).exp();
    Ok(decay * params.a_mean_init + (S::one() - decay) * params.phi0 / params.sigma0)
}

/// Scale-2 profiles in t_2 = t/√ε:
/// a = (φ_0/σ_0) 𝟙 + cosh(φ_1σ_1 t_2) a_⊥init,
/// s^(1) = σ_1φ_1 (φ_0/σ_0) t_2 𝟙 + sinh(φ_1σ_1 t_2) a_⊥init
/// (the actual overlap is √ε · s^(1)).
pub fn phase2_solution<S: Real>(
    params: &AsymptoticParams<S>,
    t2: S,
) -> Result<(Vec<S>, Vec<S>), AsymptoticsError> {
    if params.sigma0.abs() < S::of(1e-12) {
        return Err(AsymptoticsError::ConstantModeSkipped {
            sigma0: params.sigma0.to_f64_lossy(),
        });
    }
    let rate = params.phi1 * params.sigma1 * t2;
    let (ch, sh) = (rate.cosh(), rate.sinh());
    let mean_a = params.phi0 / params.sigma0;
    let mean_s = params.sigma1 * params.phi1 * mean_a * t2;
    let a = params.a_perp_init.iter().map(|&p| mean_a + ch * p).collect();
    let s = params.a_perp_init.iter().map(|&p| mean_s + sh * p).collect();
    Ok((a, s))
}

/// Scale-3 amplitude λ(t_3) with the matched initial condition:
/// λ = |φ_1|^½ / (|σ_1|‖a_⊥init‖² + 4|φ_1| e^{-2|σ_1φ_1| t_3})^½.
pub fn phase3_lambda<S: Real>(params: &AsymptoticParams<S>, t3: S) -> Result<S, AsymptoticsError> {
    params.check_linear()?;
    let abs_p1 = params.phi1.abs();
    let denom = params.sigma1.abs() * params.a_perp_norm_sq
        + S::of(4.0) * abs_p1 * (-S::of(2.0) * params.linear_rate() * t3).exp();
    Ok(abs_p1.sqrt() / denom.sqrt())
}

/// General Bernoulli solution with arbitrary initial amplitude λ(0).
pub fn bernoulli_lambda<S: Real>(
    params: &AsymptoticParams<S>,
    lambda0: S,
    t3: S,
) -> Result<S, AsymptoticsError> {
    params.check_linear()?;
    let abs_p1 = params.phi1.abs();
    let gamma = params.sigma1.abs() * params.a_perp_norm_sq;
    let denom = gamma
        + (abs_p1 / (lambda0 * lambda0) - gamma) * (-S::of(2.0) * params.linear_rate() * t3).exp();
    Ok(abs_p1.sqrt() / denom.sqrt())
}

/// Scale-3 profiles: a^(-1) = λ a_⊥init and s^(1) = sign(σ_1φ_1) λ a_⊥init
/// (the actual a is ε^{-1/4} a^(-1) + (φ_0/σ_0) 𝟙, the overlap ε^{1/4} s^(1)).
pub fn phase3_solution<S: Real>(
    params: &AsymptoticParams<S>,
    t3: S,
) -> Result<(Vec<S>, Vec<S>), AsymptoticsError> {
    let lambda = phase3_lambda(params, t3)?;
    let sign = (params.sigma1 * params.phi1).signum();
    let a = params.a_perp_init.iter().map(|&p| lambda * p).collect();
    let s = params.a_perp_init.iter().map(|&p| sign * lambda * p).collect();
    Ok((a, s))
}

/// Exponents of the level-l analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentRow {
    pub level: usize,
    /// Overlap scale: s = O(ε^{β_l}), β_l = 1/(2(l+1)).
    pub beta: f64,
    /// Second-layer scale: a = O(ε^{-ω_l}), ω_l = l β_l.
    pub omega: f64,
    /// Transition center in original time: t = Θ(ε^{μ_l}), μ_l = 1/(2l).
    pub mu: f64,
    /// Transition width in original time: Δt = O(ε^{ν_l}), ν_l = 1/(l+1).
    pub nu: f64,
    /// Rescaled crossing time: τ(Δ) = Θ(ε^{-(l-1)/(2l(l+1))}).
    pub tau_exponent: f64,
}

/// Exponent table for levels 2..=l_max.
pub fn exponent_table(l_max: usize) -> Vec<ExponentRow> {
    (2..=l_max)
        .map(|l| {
            let lf = l as f64;
            ExponentRow {
                level: l,
                beta: 1.0 / (2.0 * (lf + 1.0)),
                omega: lf / (2.0 * (lf + 1.0)),
                mu: 1.0 / (2.0 * lf),
                nu: 1.0 / (lf + 1.0),
                tau_exponent: (lf - 1.0) / (2.0 * lf * (lf + 1.0)),
            }
        })
        .collect()
}

/// Predicted transition structure per level.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionPrediction {
    /// Level 0: O(ε) relaxation of the constant component at rate σ_0².
    Relaxation { rate: f64 },
    /// Level 1: explicit center and width scale.
    Center { time: f64, width_scale: f64 },
    /// Level ≥ 2: exponents only, the constant c_l is not predicted.
    ExponentOnly {
        center_exponent: f64,
        width_exponent: f64,
    },
}

/// Transition predictions for levels 0..=l_max.
pub fn predicted_transitions<S: Real>(
    params: &AsymptoticParams<S>,
    eps: f64,
    l_max: usize,
) -> Vec<(usize, TransitionPrediction)> {
    let mut out = Vec::with_capacity(l_max + 1);
    let s0 = params.sigma0.to_f64_lossy();
    out.push((0, TransitionPrediction::Relaxation { rate: s0 * s0 }));
    if l_max >= 1 {
        let rate = params.linear_rate().to_f64_lossy();
        let time = eps.sqrt() * (1.0 / eps).ln() / (4.0 * rate);
        out.push((
            1,
            TransitionPrediction::Center {
                time,
                width_scale: eps.sqrt(),
            },
        ));
    }
    for row in exponent_table(l_max) {
        out.push((
            row.level,
            TransitionPrediction::ExponentOnly {
                center_exponent: row.mu,
                width_exponent: row.nu,
            },
        ));
    }
    out
}

/// Piecewise plateau risk over time scales 1-3, stitched at geometric
/// midpoints in log time between adjacent scale centers (ε, √ε, and the
/// level-1 center √ε·log(1/ε)/(4|σ_1φ_1|)).
pub fn predicted_risk<S: Real>(
    params: &AsymptoticParams<S>,
    phi: &HermiteSeries<S>,
    t: S,
    eps: S,
) -> S {
    let half = S::of(0.5);
    let tail_from = |k0: usize| -> S {
        (k0..=phi.truncation())
            .map(|k| {
                let c = phi.coeff(k);
                c * c
            })
            .sum::<S>()
            * half
    };
    let plateau1 = tail_from(1);

    if params.sigma0.abs() < S::of(1e-12) || params.linear_rate() == S::zero() {
        // no constant mode: the phase-1 drop is vacuous and ⟨a⟩ frozen
        let gap = params.phi0 - params.sigma0 * params.a_mean_init;
        return half * gap * gap + plateau1;
    }

    let rate = params.linear_rate();
    let log_inv_eps = (S::one() / eps).ln();
    let c1 = eps;
    let c2 = eps.sqrt();
    let c3 = eps.sqrt() * log_inv_eps / (S::of(4.0) * rate);
    let b12 = (c1 * c2).sqrt();
    let b23 = (c2 * c3).sqrt();

    if t < b12 {
        let gap = params.phi0 - params.sigma0 * params.a_mean_init;
        let decay = (-S::of(2.0) * params.sigma0 * params.sigma0 * t / eps).exp();
        half * decay * gap * gap + plateau1
    } else if t < b23 {
        plateau1
    } else {
        let t3 = t / eps.sqrt() - log_inv_eps / (S::of(4.0) * rate);
        let ratio =
            S::of(4.0) * params.phi1.abs() / (params.sigma1.abs() * params.a_perp_norm_sq);
        let frac = S::one() / (S::one() + ratio * (-S::of(2.0) * rate * t3).exp());
        let gap = S::one() - frac;
        half * params.phi1 * params.phi1 * gap * gap + tail_from(2)
    }
}
