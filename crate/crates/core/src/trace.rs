//! Time-stamped risk traces shared by the flow engine, the SGD harness and
//! the analysis layer. Traces are plain `f64` data regardless of the scalar
//! type the dynamics ran in.

use serde::{Deserialize, Serialize};

/// Risk values over time plus the per-degree Hermite components
/// ½(φ_k - σ_k Σ_i w_i a_i s_i^k)².
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RiskTrace {
    pub times: Vec<f64>,
    pub risk: Vec<f64>,
    pub components: Vec<Vec<f64>>,
}

impl RiskTrace {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            risk: Vec::with_capacity(n),
            components: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, risk: f64, components: Vec<f64>) {
        self.times.push(t);
        self.risk.push(risk);
        self.components.push(components);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest risk value (usually the initial one).
    pub fn max_risk(&self) -> f64 {
        self.risk.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Risk at the final sample.
    pub fn terminal_risk(&self) -> f64 {
        *self.risk.last().expect("non-empty trace")
    }
}

/// n points spaced log-uniformly on [t_min, t_max], endpoints included.
pub fn log_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    assert!(t_min > 0.0 && t_max > t_min && n >= 2);
    let (a, b) = (t_min.ln(), t_max.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = t_min;
    grid[n - 1] = t_max;
    grid
}

/// Equivalent grid in another scalar type, for passing to the integrator.
pub fn log_grid_as<S: crate::scalar::Real>(t_min: f64, t_max: f64, n: usize) -> Vec<S> {
    log_grid(t_min, t_max, n).into_iter().map(S::of).collect()
}
