//! Right-hand sides of the four flow systems over their flat state layouts.

use super::risk::{risk_hermite, risk_reduced, Model};
use super::state::{
    pair_index, FullState, MeanFieldState, ReducedState, SimplifiedState,
};
use crate::scalar::{dot, normalize, Real};

/// Reusable buffers for right-hand-side evaluation.
#[derive(Debug)]
pub struct Scratch<S> {
    buf1: Vec<S>,
    buf2: Vec<S>,
}

impl<S> Scratch<S> {
    fn empty() -> Self {
        Self { buf1: Vec::new(), buf2: Vec::new() }
    }
}

/// Common interface the integrator wrappers drive.
pub trait FlowSystem<S: Real> {
    fn dim(&self) -> usize;
    fn new_scratch(&self) -> Scratch<S>;
    fn rhs(&self, y: &[S], dy: &mut [S], scratch: &mut Scratch<S>);
    fn projects(&self) -> bool {
        false
    }
    fn project(&self, _y: &mut [S]) {}
    fn risk_with_components(&self, y: &[S]) -> (S, Vec<S>);
}

/// Full projected gradient flow in (a_i, u_i), ε-scaled in the a-block:
/// ε ∂_t a_i = V(s_i) - (1/m) Σ_j a_j U(r_ij),
/// ∂_t u_i = a_i (V'(s_i)(u_* - s_i u_i) - (1/m) Σ_j a_j U'(r_ij)(u_j - r_ij u_i)).
pub struct FullSystem<S> {
    pub model: Model<S>,
    pub u_star: Vec<S>,
    pub m: usize,
    pub d: usize,
    pub eps: S,
}

impl<S: Real> FullSystem<S> {
    pub fn new(model: Model<S>, state0: &FullState<S>, eps: S) -> Self {
        Self {
            model,
            u_star: state0.u_star.clone(),
            m: state0.m(),
            d: state0.d,
            eps,
        }
    }

    pub fn decode(&self, y: &[S]) -> FullState<S> {
        FullState::from_flat(y, self.d, self.u_star.clone())
    }
}

impl<S: Real> FlowSystem<S> for FullSystem<S> {
    fn dim(&self) -> usize {
        self.m * (self.d + 1)
    }

    fn new_scratch(&self) -> Scratch<S> {
        Scratch {
            buf1: vec![S::zero(); self.m],
            buf2: vec![S::zero(); self.m * self.m],
        }
    }

    fn rhs(&self, y: &[S], dy: &mut [S], scratch: &mut Scratch<S>) {
        let (m, d) = (self.m, self.d);
        let kp = &self.model.kernels;
        let inv_m = S::one() / S::of(m as f64);
        let (a, u) = y.split_at(m);
        let row = |i: usize| &u[i * d..(i + 1) * d];

        let s = &mut scratch.buf1;
        for i in 0..m {
            s[i] = dot(row(i), &self.u_star);
        }
        let r = &mut scratch.buf2;
        for i in 0..m {
            r[i * m + i] = S::one();
            for j in (i + 1)..m {
                let v = dot(row(i), row(j));
                r[i * m + j] = v;
                r[j * m + i] = v;
            }
        }

        let (da, du) = dy.split_at_mut(m);
        for i in 0..m {
            let mut drive = S::zero();
            for j in 0..m {
                drive += a[j] * kp.u(r[i * m + j]);
            }
            da[i] = (kp.v(s[i]) - inv_m * drive) / self.eps;
        }
        for i in 0..m {
            let alpha = a[i] * kp.v_prime(s[i]);
            // coefficient of u_i collects -alpha s_i + a_i/m Σ_j a_j U'(r_ij) r_ij
            let mut self_coef = -alpha * s[i];
            let out = &mut du[i * d..(i + 1) * d];
            for t in 0..d {
                out[t] = alpha * self.u_star[t];
            }
            for j in 0..m {
                let g = a[i] * inv_m * a[j] * kp.u_prime(r[i * m + j]);
                self_coef += g * r[i * m + j];
                let uj = &u[j * d..(j + 1) * d];
                for t in 0..d {
                    out[t] -= g * uj[t];
                }
            }
            let ui = &u[i * d..(i + 1) * d];
            for t in 0..d {
                out[t] += self_coef * ui[t];
            }
        }
    }

    fn projects(&self) -> bool {
        true
    }

    fn project(&self, y: &mut [S]) {
        let (_, u) = y.split_at_mut(self.m);
        for i in 0..self.m {
            normalize(&mut u[i * self.d..(i + 1) * self.d]);
        }
    }

    fn risk_with_components(&self, y: &[S]) -> (S, Vec<S>) {
        let st = self.decode(y);
        let red = ReducedState::from_full(&st);
        let risk = risk_reduced(&red, &self.model.kernels, self.model.phi_norm_sq());
        let w = vec![S::one() / S::of(self.m as f64); self.m];
        let (_, comps) = risk_hermite(&red.a, &red.s, &w, &self.model.phi, &self.model.sigma);
        (risk, comps)
    }
}

/// Reduced d-independent flow in (a, s, R), diagonal of R pinned to one.
pub struct ReducedSystem<S> {
    pub model: Model<S>,
    pub m: usize,
    pub eps: S,
}

impl<S: Real> ReducedSystem<S> {
    pub fn new(model: Model<S>, m: usize, eps: S) -> Self {
        Self { model, m, eps }
    }

    pub fn decode(&self, y: &[S]) -> ReducedState<S> {
        ReducedState::from_flat(y, self.m)
    }
}

impl<S: Real> FlowSystem<S> for ReducedSystem<S> {
    fn dim(&self) -> usize {
        2 * self.m + self.m * (self.m - 1) / 2
    }

    fn new_scratch(&self) -> Scratch<S> {
        Scratch {
            buf1: vec![S::zero(); self.m * self.m],
            buf2: vec![S::zero(); self.m * self.m],
        }
    }

    fn rhs(&self, y: &[S], dy: &mut [S], scratch: &mut Scratch<S>) {
        let m = self.m;
        let kp = &self.model.kernels;
        let inv_m = S::one() / S::of(m as f64);
        let a = &y[..m];
        let s = &y[m..2 * m];
        let r_upper = &y[2 * m..];

        // materialize R and the weighted derivative kernel W[i][p] = (a_p/m) U'(r_ip)
        let r = &mut scratch.buf1;
        for i in 0..m {
            r[i * m + i] = S::one();
            for j in (i + 1)..m {
                let v = r_upper[pair_index(m, i, j)];
                r[i * m + j] = v;
                r[j * m + i] = v;
            }
        }
        let w = &mut scratch.buf2;
        for i in 0..m {
            for p in 0..m {
                w[i * m + p] = inv_m * a[p] * kp.u_prime(r[i * m + p]);
            }
        }

        let vp: Vec<S> = s.iter().map(|&si| kp.v_prime(si)).collect();
        for i in 0..m {
            let mut drive = S::zero();
            for j in 0..m {
                drive += a[j] * kp.u(r[i * m + j]);
            }
            dy[i] = (kp.v(s[i]) - inv_m * drive) / self.eps;

            let mut interact = S::zero();
            for j in 0..m {
                interact += w[i * m + j] * (s[j] - r[i * m + j] * s[i]);
            }
            dy[m + i] = a[i] * (vp[i] * (S::one() - s[i] * s[i]) - interact);
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let rij = r[i * m + j];
                let mut term_i = vp[i] * (s[j] - s[i] * rij);
                let mut term_j = vp[j] * (s[i] - s[j] * rij);
                let mut acc_i = S::zero();
                let mut acc_j = S::zero();
                for p in 0..m {
                    acc_i += w[i * m + p] * (r[j * m + p] - r[i * m + p] * rij);
                    acc_j += w[j * m + p] * (r[i * m + p] - r[j * m + p] * rij);
                }
                term_i -= acc_i;
                term_j -= acc_j;
                dy[2 * m + pair_index(m, i, j)] = a[i] * term_i + a[j] * term_j;
            }
        }
    }

    fn risk_with_components(&self, y: &[S]) -> (S, Vec<S>) {
        let st = self.decode(y);
        let risk = risk_reduced(&st, &self.model.kernels, self.model.phi_norm_sq());
        let w = vec![S::one() / S::of(self.m as f64); self.m];
        let (_, comps) = risk_hermite(&st.a, &st.s, &w, &self.model.phi, &self.model.sigma);
        (risk, comps)
    }
}

/// Mean-field flow in (a, s) with fixed particle weights:
/// ε ∂_t a_i = V(s_i) - Σ_j w_j a_j U(s_i s_j),
/// ∂_t s_i = a_i (1 - s_i²)(V'(s_i) - Σ_j w_j a_j U'(s_i s_j) s_j).
pub struct MeanFieldSystem<S> {
    pub model: Model<S>,
    pub weights: Vec<S>,
    pub eps: S,
}

impl<S: Real> MeanFieldSystem<S> {
    pub fn new(model: Model<S>, weights: Vec<S>, eps: S) -> Self {
        Self { model, weights, eps }
    }

    pub fn decode(&self, y: &[S]) -> MeanFieldState<S> {
        MeanFieldState::from_flat(y, self.weights.clone())
    }
}

impl<S: Real> FlowSystem<S> for MeanFieldSystem<S> {
    fn dim(&self) -> usize {
        2 * self.weights.len()
    }

    fn new_scratch(&self) -> Scratch<S> {
        Scratch::empty()
    }

    fn rhs(&self, y: &[S], dy: &mut [S], _scratch: &mut Scratch<S>) {
        let m = self.weights.len();
        let kp = &self.model.kernels;
        let (a, s) = y.split_at(m);
        let (da, ds) = dy.split_at_mut(m);
        for i in 0..m {
            let mut drive = S::zero();
            let mut slope = S::zero();
            for j in 0..m {
                let wa = self.weights[j] * a[j];
                let x = s[i] * s[j];
                drive += wa * kp.u(x);
                slope += wa * kp.u_prime(x) * s[j];
            }
            da[i] = (kp.v(s[i]) - drive) / self.eps;
            ds[i] = a[i] * (S::one() - s[i] * s[i]) * (kp.v_prime(s[i]) - slope);
        }
    }

    fn risk_with_components(&self, y: &[S]) -> (S, Vec<S>) {
        let st = self.decode(y);
        risk_hermite(&st.a, &st.s, &st.weights, &self.model.phi, &self.model.sigma)
    }
}

/// Level-l simplified model in rescaled variables and time τ:
/// ∂_τ ã = σ_l s̃^l (φ_l - σ_l ∫ ã s̃^l dρ),
/// ∂_τ s̃ = l σ_l ã s̃^{l-1} (1 - ε^{2β_l} s̃²)(φ_l - σ_l ∫ ã s̃^l dρ).
pub struct SimplifiedSystem<S> {
    pub level: usize,
    pub eps: S,
    pub sigma_l: S,
    pub phi_l: S,
    pub weights: Vec<S>,
}

impl<S: Real> SimplifiedSystem<S> {
    pub fn new(state0: &SimplifiedState<S>, sigma_l: S, phi_l: S) -> Self {
        Self {
            level: state0.level,
            eps: state0.eps,
            sigma_l,
            phi_l,
            weights: state0.weights.clone(),
        }
    }

    fn eps_2beta(&self) -> S {
        let beta = S::one() / S::of(2.0 * (self.level as f64 + 1.0));
        self.eps.powf(S::of(2.0) * beta)
    }

    /// Weighted moment ∫ ã s̃^l dρ.
    pub fn moment(&self, y: &[S]) -> S {
        let m = self.weights.len();
        let (a, s) = y.split_at(m);
        let mut acc = S::zero();
        for i in 0..m {
            acc += self.weights[i] * a[i] * s[i].powi(self.level as i32);
        }
        acc
    }

    pub fn decode(&self, y: &[S]) -> SimplifiedState<S> {
        let m = self.weights.len();
        SimplifiedState {
            a_tilde: y[..m].to_vec(),
            s_tilde: y[m..2 * m].to_vec(),
            weights: self.weights.clone(),
            level: self.level,
            eps: self.eps,
        }
    }
}

impl<S: Real> FlowSystem<S> for SimplifiedSystem<S> {
    fn dim(&self) -> usize {
        2 * self.weights.len()
    }

    fn new_scratch(&self) -> Scratch<S> {
        Scratch::empty()
    }

    fn rhs(&self, y: &[S], dy: &mut [S], _scratch: &mut Scratch<S>) {
        let m = self.weights.len();
        let l = self.level as i32;
        let lf = S::of(self.level as f64);
        let e2b = self.eps_2beta();
        let bracket = self.phi_l - self.sigma_l * self.moment(y);
        let (a, s) = y.split_at(m);
        let (da, ds) = dy.split_at_mut(m);
        for i in 0..m {
            let sl1 = s[i].powi(l - 1);
            da[i] = self.sigma_l * sl1 * s[i] * bracket;
            ds[i] = lf * self.sigma_l * a[i] * sl1 * (S::one() - e2b * s[i] * s[i]) * bracket;
        }
    }

    fn risk_with_components(&self, y: &[S]) -> (S, Vec<S>) {
        let gap = self.phi_l - self.sigma_l * self.moment(y);
        let risk = S::of(0.5) * gap * gap;
        let mut comps = vec![S::zero(); self.level + 1];
        comps[self.level] = risk;
        (risk, comps)
    }
}
