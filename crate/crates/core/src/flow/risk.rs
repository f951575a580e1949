//! Risk evaluators for the flow systems, plus trajectory diagnostics.

use super::state::{FullState, MeanFieldState, ReducedState};
use crate::hermite::HermiteSeries;
use crate::kernels::KernelPair;
use crate::scalar::Real;

/// Target and activation bundled with their kernel pair, padded to a common
/// truncation.
#[derive(Debug, Clone)]
pub struct Model<S> {
    pub phi: HermiteSeries<S>,
    pub sigma: HermiteSeries<S>,
    pub kernels: KernelPair<S>,
}

impl<S: Real> Model<S> {
    pub fn new(phi: HermiteSeries<S>, sigma: HermiteSeries<S>) -> Self {
        let k = phi.truncation().max(sigma.truncation());
        let phi = phi.padded(k);
        let sigma = sigma.padded(k);
        let kernels = KernelPair::new(&phi, &sigma);
        Self { phi, sigma, kernels }
    }

    pub fn truncation(&self) -> usize {
        self.phi.truncation()
    }

    /// Truncated squared target norm Σ_{k≤K} φ_k².
    pub fn phi_norm_sq(&self) -> S {
        self.phi.norm_sq()
    }
}

/// Reduced-form risk ½‖φ‖² - (1/m) Σ a_i V(s_i) + (1/2m²) Σ a_i a_j U(r_ij).
pub fn risk_reduced<S: Real>(state: &ReducedState<S>, kp: &KernelPair<S>, phi_norm_sq: S) -> S {
    let m = state.m();
    let inv_m = S::one() / S::of(m as f64);
    let half = S::of(0.5);
    let mut lin = S::zero();
    let mut quad = S::zero();
    for i in 0..m {
        lin += state.a[i] * kp.v(state.s[i]);
        quad += state.a[i] * state.a[i] * kp.u_at_one();
        for j in (i + 1)..m {
            quad += S::of(2.0) * state.a[i] * state.a[j] * kp.u(state.r(i, j));
        }
    }
    half * phi_norm_sq - inv_m * lin + half * inv_m * inv_m * quad
}

/// Mean-field risk with R = s sᵀ and general particle weights.
pub fn risk_meanfield<S: Real>(
    state: &MeanFieldState<S>,
    kp: &KernelPair<S>,
    phi_norm_sq: S,
) -> S {
    let m = state.m();
    let half = S::of(0.5);
    let mut lin = S::zero();
    let mut quad = S::zero();
    for i in 0..m {
        lin += state.weights[i] * state.a[i] * kp.v(state.s[i]);
        for j in 0..m {
            quad += state.weights[i]
                * state.weights[j]
                * state.a[i]
                * state.a[j]
                * kp.u(state.s[i] * state.s[j]);
        }
    }
    half * phi_norm_sq - lin + half * quad
}

/// Hermite decomposition of the mean-field risk: per-degree components
/// ½(φ_k - σ_k M_k)² with moments M_k = Σ_i w_i a_i s_i^k. Returns the total
/// (equal to the sum of components) and the component vector, k = 0..=K.
pub fn risk_hermite<S: Real>(
    a: &[S],
    s: &[S],
    weights: &[S],
    phi: &HermiteSeries<S>,
    sigma: &HermiteSeries<S>,
) -> (S, Vec<S>) {
    let k_max = phi.truncation().max(sigma.truncation());
    let half = S::of(0.5);
    let mut power: Vec<S> = vec![S::one(); a.len()];
    let mut components = Vec::with_capacity(k_max + 1);
    let mut total = S::zero();
    for k in 0..=k_max {
        if k > 0 {
            for (p, &si) in power.iter_mut().zip(s) {
                *p *= si;
            }
        }
        let moment: S = a
            .iter()
            .zip(weights)
            .zip(&power)
            .map(|((&ai, &wi), &pi)| wi * ai * pi)
            .sum();
        let gap = phi.coeff(k) - sigma.coeff(k) * moment;
        let comp = half * gap * gap;
        components.push(comp);
        total += comp;
    }
    (total, components)
}

/// Population risk of a full-dimensional state via its Gram data.
pub fn risk_full<S: Real>(state: &FullState<S>, kp: &KernelPair<S>, phi_norm_sq: S) -> S {
    risk_reduced(&ReducedState::from_full(state), kp, phi_norm_sq)
}

/// Mean square of the off-target Gram components over ordered pairs,
/// (1/m²) Σ_{i≠j} (r_ij - s_i s_j)².
pub fn rperp_mean_square<S: Real>(state: &ReducedState<S>) -> S {
    let m = state.m();
    let mut acc = S::zero();
    for i in 0..m {
        for j in (i + 1)..m {
            let rp = state.r_perp(i, j);
            acc += S::of(2.0) * rp * rp;
        }
    }
    acc / S::of((m * m) as f64)
}

/// Paired particle distance (1/m) Σ_i ((a_i - a'_i)² + (s_i - s'_i)²)
/// between two particle clouds of equal size.
pub fn paired_mean_square_distance<S: Real>(a1: &[S], s1: &[S], a2: &[S], s2: &[S]) -> S {
    let m = a1.len();
    debug_assert!(m == s1.len() && m == a2.len() && m == s2.len());
    let mut acc = S::zero();
    for i in 0..m {
        let da = a1[i] - a2[i];
        let ds = s1[i] - s2[i];
        acc += da * da + ds * ds;
    }
    acc / S::of(m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations;
    use approx::assert_abs_diff_eq;

    fn example_model() -> Model<f64> {
        Model::new(
            activations::example_target().series_as(),
            activations::relu(16).series_as(),
        )
    }

    #[test]
    fn hermite_form_equals_kernel_form_for_polynomials() {
        // identical truncations make the two routes algebraically equal
        let phi = HermiteSeries::new(vec![0.7, -0.4, 0.3, 0.1]).unwrap();
        let sigma = HermiteSeries::new(vec![0.2, 1.1, -0.5, 0.9]).unwrap();
        let model = Model::new(phi, sigma);
        let st = MeanFieldState {
            a: vec![0.4, -1.3, 2.0],
            s: vec![0.1, -0.6, 0.8],
            weights: vec![0.5, 0.25, 0.25],
        };
        let kernel_route = risk_meanfield(&st, &model.kernels, model.phi_norm_sq());
        let (hermite_route, comps) =
            risk_hermite(&st.a, &st.s, &st.weights, &model.phi, &model.sigma);
        assert_abs_diff_eq!(kernel_route, hermite_route, epsilon = 1e-13);
        assert_abs_diff_eq!(comps.iter().sum::<f64>(), hermite_route, epsilon = 1e-15);
    }

    #[test]
    fn centered_risk_matches_brute_force_double_sum() {
        // s = 0, R = I: compare against a direct evaluation of the double sum
        let model = example_model();
        let m = 6;
        let a: Vec<f64> = vec![1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let st = ReducedState::centered(a.clone());
        let risk = risk_reduced(&st, &model.kernels, model.phi_norm_sq());

        let s0 = model.sigma.coeff(0);
        let p0 = model.phi.coeff(0);
        let u1 = model.kernels.u_at_one();
        let mut brute = 0.5 * model.phi_norm_sq();
        for i in 0..m {
            brute -= a[i] * p0 * s0 / m as f64;
            for j in 0..m {
                let u = if i == j { u1 } else { s0 * s0 };
                brute += 0.5 * a[i] * a[j] * u / (m * m) as f64;
            }
        }
        assert_abs_diff_eq!(risk, brute, epsilon = 1e-14);
    }

    #[test]
    fn initial_risk_approaches_limit_for_large_m() {
        // Rademacher a, s = 0: risk → ½φ_0² + ½Σ_{k≥1}φ_k² = 11/9 up to O(1/m)
        let model = example_model();
        let m = 4000;
        let st = crate::flow::init_meanfield::<f64>(m, &super::super::WeightLaw::Rademacher, 7)
            .unwrap();
        let red = ReducedState::centered(st.a.clone());
        let risk = risk_reduced(&red, &model.kernels, model.phi_norm_sq());
        let limit = 0.5 * (1.0 + 1.0 + 4.0 / 9.0);
        assert!(
            (risk - limit).abs() < 25.0 / m as f64,
            "risk {risk} vs limit {limit}"
        );
    }

    #[test]
    fn full_state_risk_equals_reduced_on_induced_gram() {
        let model = example_model();
        let full = crate::flow::init_full::<f64>(5, 64, &super::super::WeightLaw::Rademacher, 3)
            .unwrap();
        let red = ReducedState::from_full(&full);
        assert_abs_diff_eq!(
            risk_full(&full, &model.kernels, model.phi_norm_sq()),
            risk_reduced(&red, &model.kernels, model.phi_norm_sq()),
            epsilon = 1e-14
        );
    }

    #[test]
    fn rperp_zero_at_matched_initialization() {
        let st = ReducedState::centered(vec![1.0, -1.0, 1.0]);
        assert_eq!(rperp_mean_square(&st), 0.0);
    }

    #[test]
    fn paired_distance_basics() {
        let d = paired_mean_square_distance(
            &[1.0, 2.0],
            &[0.0, 0.5],
            &[1.0, 1.0],
            &[0.0, 0.0],
        );
        assert_abs_diff_eq!(d, (1.0 + 0.25) / 2.0, epsilon = 1e-15);
    }
}
