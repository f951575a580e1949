//! Explicit embedded Runge-Kutta 5(4) integration (Dormand-Prince pair) with
//! adaptive step control, dense output at requested sample times, and an
//! optional post-step projection hook.
//!
//! Error control is per-component on atol + rtol·max(|y|, |y_new|), combined
//! with the max-norm over the state. The slow-fast systems integrated here
//! are stiff in the fast block for small ε, so steps settle near the explicit
//! stability limit; the optional transient cap keeps the initial relaxation
//! resolved.

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h}); the system is too stiff for the explicit integrator — reduce t_end or increase eps")]
    StepUnderflow { t: f64, h: f64 },
    #[error("right-hand side returned a non-finite value at t = {t}")]
    NonFiniteRhs { t: f64 },
    #[error("sample time {t} outside the integration span [{t0}, {t1}]")]
    SampleOutOfSpan { t: f64, t0: f64, t1: f64 },
    #[error("sample times must be non-decreasing")]
    UnsortedSamples,
}

/// Integration controls.
#[derive(Debug, Clone)]
pub struct OdeOptions<S> {
    pub rtol: S,
    pub atol: S,
    /// First step; defaults to a conservative fraction of the span.
    pub initial_step: Option<S>,
    /// Hard cap on the step size over the whole span.
    pub max_step: Option<S>,
    /// Tighter cap `(until_t, cap)` applied while t < until_t, released after.
    pub transient_cap: Option<(S, S)>,
}

impl<S: Real> Default for OdeOptions<S> {
    fn default() -> Self {
        Self {
            rtol: S::of(1e-9),
            atol: S::of(1e-12),
            initial_step: None,
            max_step: None,
            transient_cap: None,
        }
    }
}

/// Integration counters.
#[derive(Debug, Clone, Default)]
pub struct OdeStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
}

/// Dense solution samples at the requested times.
#[derive(Debug, Clone)]
pub struct OdeSolution<S> {
    pub times: Vec<S>,
    pub states: Vec<Vec<S>>,
    pub stats: OdeStats,
}

// Dormand-Prince coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// 5th-order weights (b) equal A[5]; error weights b - b̂:
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];
// dense-output coefficients for the 4th-order continuous extension
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrate dy/dt = rhs(t, y) over `t_span`, returning dense samples at
/// `sample_times` (must be non-decreasing and inside the span).
///
/// `project`, when given, is applied to the state after every accepted step
/// (used to re-normalize sphere-constrained coordinates); the first stage is
/// then recomputed from the projected state.
pub fn integrate<S, F, P>(
    mut rhs: F,
    y0: &[S],
    t_span: (S, S),
    sample_times: &[S],
    opts: &OdeOptions<S>,
    mut project: Option<P>,
) -> Result<OdeSolution<S>, OdeError>
where
    S: Real,
    F: FnMut(S, &[S], &mut [S]),
    P: FnMut(&mut [S]),
{
    let (t0, t_end) = t_span;
    let span = t_end - t0;
    assert!(span > S::zero(), "t_end must exceed t0");
    let n = y0.len();
    for w in sample_times.windows(2) {
        if w[1] < w[0] {
            return Err(OdeError::UnsortedSamples);
        }
    }
    if let (Some(&first), Some(&last)) = (sample_times.first(), sample_times.last()) {
        if first < t0 || last > t_end {
            let bad = if first < t0 { first } else { last };
            return Err(OdeError::SampleOutOfSpan {
                t: bad.to_f64_lossy(),
                t0: t0.to_f64_lossy(),
                t1: t_end.to_f64_lossy(),
            });
        }
    }

    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<S>> = (0..7).map(|_| vec![S::zero(); n]).collect();
    let mut y_stage = vec![S::zero(); n];
    let mut y_new = vec![S::zero(); n];

    rhs(t, &y, &mut k[0]);
    stats.rhs_evals += 1;
    if k[0].iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFiniteRhs {
            t: t.to_f64_lossy(),
        });
    }

    let cap_at = |t: S| -> S {
        let mut cap = opts.max_step.unwrap_or(span);
        if let Some((until, c)) = opts.transient_cap {
            if t < until {
                cap = cap.min(c);
            }
        }
        cap
    };
    let mut h = opts
        .initial_step
        .unwrap_or_else(|| span * S::of(1e-4))
        .min(cap_at(t0))
        .min(span);
    let h_floor = span * S::of(1e-15);

    let mut samples_out: Vec<Vec<S>> = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0usize;
    // emit any samples exactly at t0
    while next_sample < sample_times.len() && sample_times[next_sample] <= t0 {
        samples_out.push(y.clone());
        next_sample += 1;
    }

    let order_inv = S::of(0.2);
    let safety = S::of(0.9);
    let min_factor = S::of(0.2);
    let mut max_factor = S::of(10.0);

    while t < t_end {
        if h < h_floor {
            return Err(OdeError::StepUnderflow {
                t: t.to_f64_lossy(),
                h: h.to_f64_lossy(),
            });
        }
        h = h.min(cap_at(t)).min(t_end - t);

        // stages 2..7
        for s in 0..6 {
            for i in 0..n {
                let mut acc = S::zero();
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += S::of(a) * kj[i];
                    }
                }
                y_stage[i] = y[i] + h * acc;
            }
            let ts = t + S::of(C[s]) * h;
            let (head, tail) = k.split_at_mut(s + 1);
            let _ = head;
            rhs(ts, &y_stage, &mut tail[0]);
            stats.rhs_evals += 1;
        }
        // 5th-order solution is the last stage state (k7 evaluated at it)
        y_new.copy_from_slice(&y_stage);

        let mut finite = true;
        let mut err = S::zero();
        for i in 0..n {
            let mut e = S::zero();
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += S::of(E[j]) * kj[i];
                }
            }
            e *= h;
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = e / scale;
            if !r.is_finite() {
                finite = false;
                break;
            }
            err = err.max(r.abs());
        }

        if finite && err <= S::one() {
            // accept: dense output for samples strictly inside the step;
            // samples on the step end use the (possibly projected) state below
            let t_next = t + h;
            while next_sample < sample_times.len() && sample_times[next_sample] < t_next {
                let ts = sample_times[next_sample];
                let theta = (ts - t) / h;
                samples_out.push(dense_eval(&y, &y_new, &k, h, theta));
                next_sample += 1;
            }
            std::mem::swap(&mut y, &mut y_new);
            t = t_next;
            stats.steps_accepted += 1;

            let mut need_k1 = false;
            if let Some(p) = project.as_mut() {
                p(&mut y);
                need_k1 = true;
            }
            while next_sample < sample_times.len() && sample_times[next_sample] <= t {
                samples_out.push(y.clone());
                next_sample += 1;
            }
            if need_k1 {
                rhs(t, &y, &mut k[0]);
                stats.rhs_evals += 1;
            } else {
                // FSAL: last stage of the accepted step is the next first stage
                let (first, rest, last) = {
                    let (a, b) = k.split_at_mut(1);
                    let (mid, c) = b.split_at_mut(5);
                    (a, mid, c)
                };
                let _ = rest;
                first[0].copy_from_slice(&last[0]);
            }
            if k[0].iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFiniteRhs {
                    t: t.to_f64_lossy(),
                });
            }

            let factor = if err == S::zero() {
                max_factor
            } else {
                (safety * err.powf(-order_inv)).min(max_factor).max(min_factor)
            };
            h *= factor;
            max_factor = S::of(10.0);
        } else {
            stats.steps_rejected += 1;
            let factor = if finite {
                (safety * err.powf(-order_inv)).max(min_factor)
            } else {
                min_factor
            };
            h *= factor;
            max_factor = S::one();
        }
    }

    // any trailing samples equal to t_end (within rounding)
    while next_sample < sample_times.len() {
        samples_out.push(y.clone());
        next_sample += 1;
    }

    Ok(OdeSolution {
        times: sample_times.to_vec(),
        states: samples_out,
        stats,
    })
}

/// 4th-order dense interpolant on one accepted step.
fn dense_eval<S: Real>(y: &[S], y_new: &[S], k: &[Vec<S>], h: S, theta: S) -> Vec<S> {
    let n = y.len();
    let one = S::one();
    let mut out = vec![S::zero(); n];
    for i in 0..n {
        let ydiff = y_new[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        let r1 = y[i];
        let r2 = ydiff;
        let r3 = bspl;
        let r4 = ydiff - h * k[6][i] - bspl;
        let mut r5 = S::zero();
        for (j, kj) in k.iter().enumerate() {
            if D[j] != 0.0 {
                r5 += S::of(D[j]) * kj[i];
            }
        }
        r5 *= h;
        out[i] = r1 + theta * (r2 + (one - theta) * (r3 + theta * (r4 + (one - theta) * r5)));
    }
    out
}

/// Convenience wrapper when no projection is needed.
pub fn integrate_plain<S, F>(
    rhs: F,
    y0: &[S],
    t_span: (S, S),
    sample_times: &[S],
    opts: &OdeOptions<S>,
) -> Result<OdeSolution<S>, OdeError>
where
    S: Real,
    F: FnMut(S, &[S], &mut [S]),
{
    integrate(rhs, y0, t_span, sample_times, opts, None::<fn(&mut [S])>)
}
