//! Built-in activation / target functions, each carrying a pointwise closure,
//! its derivative, and Hermite coefficients.
//!
//! Selector strings used by run configs:
//!   "relu"            max(x, 0); closed-form coefficients
//!   "erf"             erf(x/√2), a tanh-like sigmoid; quadrature coefficients
//!   "he_k:<k>"        the normalized Hermite polynomial he_k
//!   "poly:<c0,c1,..>" coefficients given directly in the Hermite basis

use crate::hermite::{GaussHermite, HermiteSeries};
use crate::scalar::Real;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ActivationError {
    #[error("unknown activation selector '{0}'")]
    Unknown(String),
    #[error("bad activation argument in '{0}': {1}")]
    BadArgument(String, String),
}

type Fn64 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A named scalar function with derivative and Hermite decomposition.
#[derive(Clone)]
pub struct Activation {
    name: String,
    f: Fn64,
    df: Fn64,
    series: HermiteSeries<f64>,
}

impl std::fmt::Debug for Activation {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("Activation")
            .field("name", &self.name)
            .field("series", &self.series)
            .finish()
    }
}

impl Activation {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    pub fn series(&self) -> &HermiteSeries<f64> {
        &self.series
    }

    /// Series coefficients cast into another scalar type.
    pub fn series_as<S: Real>(&self) -> HermiteSeries<S> {
        let coeffs = self.series.coeffs().iter().map(|&c| S::of(c)).collect();
        HermiteSeries::new(coeffs).expect("finite coefficients stay finite")
    }
}

/// ReLU Hermite coefficients in closed form:
/// c_0 = 1/√(2π), c_1 = 1/2, c_k = 0 for odd k ≥ 3 and
/// c_k = (-1)^{k/2+1} (k-3)!! / √(2π k!) for even k ≥ 2.
pub fn relu_coefficient(k: usize) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    match k {
        0 => two_pi.sqrt().recip(),
        1 => 0.5,
        _ if k % 2 == 1 => 0.0,
        _ => {
            let sign = if (k / 2) % 2 == 0 { -1.0 } else { 1.0 };
            let mut dfact = 1.0f64;
            let mut i = k as i64 - 3;
            while i > 1 {
                dfact *= i as f64;
                i -= 2;
            }
            let mut fact = 1.0f64;
            for j in 2..=k {
                fact *= j as f64;
            }
            sign * dfact / (two_pi * fact).sqrt()
        }
    }
}

/// ReLU truncated at degree `truncation`.
pub fn relu(truncation: usize) -> Activation {
    let coeffs = (0..=truncation).map(relu_coefficient).collect();
    Activation {
        name: "relu".into(),
        f: Arc::new(|x| x.max(0.0)),
        df: Arc::new(|x| if x > 0.0 { 1.0 } else { 0.0 }),
        series: HermiteSeries::new(coeffs).unwrap(),
    }
}

/// The tanh-like sigmoid erf(x/√2), with quadrature-extracted coefficients.
pub fn erf_like(truncation: usize) -> Activation {
    let f = |x: f64| libm::erf(x / std::f64::consts::SQRT_2);
    let df = |x: f64| (2.0 / std::f64::consts::PI).sqrt() * (-x * x / 2.0).exp();
    let quad = GaussHermite::new((2 * truncation + 2).max(200)).unwrap();
    let proj = HermiteSeries::project(f, truncation, &quad).unwrap();
    Activation {
        name: "erf".into(),
        f: Arc::new(f),
        df: Arc::new(df),
        series: proj.series,
    }
}

/// Function assembled from explicit Hermite-basis coefficients.
pub fn from_series(name: impl Into<String>, series: HermiteSeries<f64>) -> Activation {
    let s = series.clone();
    let d = series.derivative();
    Activation {
        name: name.into(),
        f: Arc::new(move |x| s.eval(x)),
        df: Arc::new(move |x| d.eval(x)),
        series,
    }
}

/// The single normalized Hermite polynomial he_k.
pub fn hermite_single(degree: usize) -> Activation {
    from_series(format!("he_k:{degree}"), HermiteSeries::unit(degree))
}

/// Parse a selector string into an activation.
pub fn resolve(selector: &str) -> Result<Activation, ActivationError> {
    resolve_with_truncation(selector, 16)
}

/// Parse a selector string, truncating function-valued sources at `truncation`.
pub fn resolve_with_truncation(
    selector: &str,
    truncation: usize,
) -> Result<Activation, ActivationError> {
    if selector == "relu" {
        return Ok(relu(truncation));
    }
    if selector == "erf" || selector == "tanh-like" {
        return Ok(erf_like(truncation));
    }
    if let Some(arg) = selector.strip_prefix("he_k:") {
        let k: usize = arg
            .parse()
            .map_err(|e| ActivationError::BadArgument(selector.into(), format!("{e}")))?;
        return Ok(hermite_single(k));
    }
    if let Some(arg) = selector.strip_prefix("poly:") {
        let coeffs: Result<Vec<f64>, _> = arg.split(',').map(|t| t.trim().parse()).collect();
        let coeffs =
            coeffs.map_err(|e| ActivationError::BadArgument(selector.into(), format!("{e}")))?;
        if coeffs.is_empty() {
            return Err(ActivationError::BadArgument(
                selector.into(),
                "empty coefficient list".into(),
            ));
        }
        let series = HermiteSeries::new(coeffs)
            .map_err(|e| ActivationError::BadArgument(selector.into(), format!("{e}")))?;
        return Ok(from_series(selector, series));
    }
    Err(ActivationError::Unknown(selector.into()))
}

/// The degree-2 target used throughout the experiments:
/// φ = he_0 - he_1 + (2/3) he_2.
pub fn example_target() -> Activation {
    from_series(
        "poly:1,-1,0.6666666666666666",
        HermiteSeries::new(vec![1.0, -1.0, 2.0 / 3.0]).unwrap(),
    )
}
