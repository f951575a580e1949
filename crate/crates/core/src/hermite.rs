//! Normalized probabilists' Hermite polynomials, Gauss-Hermite quadrature and
//! coefficient extraction in L²(R, φ(x)dx) with φ the standard normal density.
//!
//! Everything here is expressed in the *normalized* basis he_k = He_k / √(k!),
//! so ⟨he_j, he_k⟩ = δ_jk and a square-integrable f decomposes as
//! f = Σ_k c_k he_k with c_k = E[f(G) he_k(G)], G ~ N(0,1).

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HermiteError {
    #[error("hermite polynomial overflowed at degree {degree}, x = {x}")]
    Overflow { degree: usize, x: f64 },
    #[error("non-finite quadrature sum for coefficient of degree {degree}")]
    NonFiniteCoefficient { degree: usize },
    #[error("non-finite coefficient at degree {degree}")]
    BadCoefficient { degree: usize },
    #[error("quadrature order {got} too small for truncation {truncation}; need at least {needed}")]
    QuadratureOrder {
        got: usize,
        needed: usize,
        truncation: usize,
    },
    #[error("Gauss-Hermite node {node} did not converge")]
    NodeNoConverge { node: usize },
    #[error("kernel argument s = {s} outside [-1, 1]")]
    KernelDomain { s: f64 },
    #[error("quadrature order must be positive")]
    EmptyRule,
}

/// Value of the L²-normalized probabilists' Hermite polynomial he_k(x).
///
/// Uses the normalized three-term recurrence
/// he_{k+1}(x) = (x he_k(x) - √k he_{k-1}(x)) / √(k+1),
/// which is algebraically He_k(x)/√(k!) but avoids forming k! explicitly.
pub fn hermite_eval<S: Real>(k: usize, x: S) -> Result<S, HermiteError> {
    let mut prev = S::zero();
    let mut cur = S::one();
    for j in 0..k {
        let jf = S::of(j as f64);
        let next = (x * cur - jf.sqrt() * prev) / (jf + S::one()).sqrt();
        prev = cur;
        cur = next;
    }
    if cur.is_finite() {
        Ok(cur)
    } else {
        Err(HermiteError::Overflow {
            degree: k,
            x: x.to_f64_lossy(),
        })
    }
}

/// Values he_0(x), ..., he_k(x) in one sweep of the recurrence.
pub fn hermite_eval_all<S: Real>(k: usize, x: S) -> Result<Vec<S>, HermiteError> {
    let mut out = Vec::with_capacity(k + 1);
    let mut prev = S::zero();
    let mut cur = S::one();
    out.push(cur);
    for j in 0..k {
        let jf = S::of(j as f64);
        let next = (x * cur - jf.sqrt() * prev) / (jf + S::one()).sqrt();
        prev = cur;
        cur = next;
        if !cur.is_finite() {
            return Err(HermiteError::Overflow {
                degree: j + 1,
                x: x.to_f64_lossy(),
            });
        }
        out.push(cur);
    }
    Ok(out)
}

/// Physicists' Gauss-Hermite rule: nodes x_i and weights w_i such that
/// ∫ e^{-x²} f(x) dx ≈ Σ w_i f(x_i), exact for polynomials of degree ≤ 2n-1.
///
/// Nodes come from the Golub-Welsch symmetric tridiagonal eigenproblem
/// (implicit-shift QL, eigenvalues only), polished by Newton on the
/// orthonormal recurrence; weights from the derivative values at the roots.
/// Expectations against the standard normal use the rescaling x ↦ √2 x.
#[derive(Debug, Clone)]
pub struct GaussHermite<S> {
    nodes: Vec<S>,
    weights: Vec<S>,
}

/// Orthonormal physicists' Hermite value p_n(z) and derivative factor
/// pp = √(2n) p_{n-1}(z).
fn hermite_phys<S: Real>(n: usize, z: S) -> (S, S) {
    let mut p1 = S::of(std::f64::consts::PI.powf(-0.25));
    let mut p2 = S::zero();
    for j in 0..n {
        let jf = S::of(j as f64);
        let p3 = p2;
        p2 = p1;
        p1 = z * (S::of(2.0) / (jf + S::one())).sqrt() * p2 - (jf / (jf + S::one())).sqrt() * p3;
    }
    (p1, (S::of(2.0 * n as f64)).sqrt() * p2)
}

/// Eigenvalues of a symmetric tridiagonal matrix by the implicit QL method
/// with Wilkinson shifts. `d` holds the diagonal, `e` the sub-diagonal in
/// e[0..n-1]; both are destroyed. Eigenvalues are returned in `d`, unsorted.
fn tridiag_eigenvalues<S: Real>(d: &mut [S], e: &mut [S]) -> Result<(), HermiteError> {
    let n = d.len();
    e[n - 1] = S::zero();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= S::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(HermiteError::NodeNoConverge { node: l });
            }
            let mut g = (d[l + 1] - d[l]) / (S::of(2.0) * e[l]);
            let mut r = g.hypot(S::one());
            let denom = g + if g >= S::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / denom;
            let mut s = S::one();
            let mut c = S::one();
            let mut p = S::zero();
            let mut underflowed = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == S::zero() {
                    d[i + 1] -= p;
                    e[m] = S::zero();
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + S::of(2.0) * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
            }
            if underflowed {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = S::zero();
        }
    }
    Ok(())
}

impl<S: Real> GaussHermite<S> {
    pub fn new(n: usize) -> Result<Self, HermiteError> {
        if n == 0 {
            return Err(HermiteError::EmptyRule);
        }
        // Jacobi matrix for the physicists' weight: zero diagonal,
        // off-diagonal √(j/2)
        let mut d = vec![S::zero(); n];
        let mut e: Vec<S> = (1..=n)
            .map(|j| (S::of(j as f64) / S::of(2.0)).sqrt())
            .collect();
        tridiag_eigenvalues(&mut d, &mut e)?;
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

        let mut nodes = vec![S::zero(); n];
        let mut weights = vec![S::zero(); n];
        for (i, &ev) in d.iter().enumerate() {
            let mut z = ev;
            let mut pp = S::one();
            for _ in 0..4 {
                let (p, dp) = hermite_phys(n, z);
                pp = dp;
                let dz = p / dp;
                z = z - dz;
                if dz.abs() <= S::epsilon() * z.abs().max(S::one()) {
                    break;
                }
            }
            if !z.is_finite() || !pp.is_finite() {
                return Err(HermiteError::NodeNoConverge { node: i });
            }
            nodes[i] = z;
            weights[i] = S::of(2.0) / (pp * pp);
        }
        // enforce exact symmetry of the rule
        for i in 0..n / 2 {
            let zi = (nodes[n - 1 - i] - nodes[i]) / S::of(2.0);
            nodes[i] = -zi;
            nodes[n - 1 - i] = zi;
            let wi = (weights[i] + weights[n - 1 - i]) / S::of(2.0);
            weights[i] = wi;
            weights[n - 1 - i] = wi;
        }
        if n % 2 == 1 {
            nodes[n / 2] = S::zero();
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    /// ∫ e^{-x²} f(x) dx.
    pub fn integrate<F: Fn(S) -> S>(&self, f: F) -> S {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// E[f(G)] for G ~ N(0,1): physicists' nodes rescaled by √2.
    pub fn expect<F: Fn(S) -> S>(&self, f: F) -> S {
        let sqrt2 = S::of(std::f64::consts::SQRT_2);
        let inv_sqrt_pi = S::of(1.0 / std::f64::consts::PI.sqrt());
        self.integrate(|x| f(sqrt2 * x)) * inv_sqrt_pi
    }

    /// E[f(G, G_s)] where (G, G_s) is a standard bivariate Gaussian pair with
    /// correlation s, via the tensor rule with G_s = s G + √(1-s²) Z.
    pub fn expect_bivariate<F: Fn(S, S) -> S>(&self, f: F, s: S) -> S {
        let sqrt2 = S::of(std::f64::consts::SQRT_2);
        let inv_pi = S::of(1.0 / std::f64::consts::PI);
        let c = (S::one() - s * s).max(S::zero()).sqrt();
        let mut acc = S::zero();
        for (&xi, &wi) in self.nodes.iter().zip(&self.weights) {
            let g = sqrt2 * xi;
            let mut inner = S::zero();
            for (&xj, &wj) in self.nodes.iter().zip(&self.weights) {
                let z = sqrt2 * xj;
                inner += wj * f(g, s * g + c * z);
            }
            acc += wi * inner;
        }
        acc * inv_pi
    }
}

/// Truncated coefficient sequence in the normalized Hermite basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries<S> {
    coeffs: Vec<S>,
}

/// Result of projecting a function onto the truncated basis: the series plus
/// the estimated squared-norm mass beyond the truncation.
#[derive(Debug, Clone)]
pub struct Projection<S> {
    pub series: HermiteSeries<S>,
    /// ‖f‖² - Σ_{k≤K} c_k², estimated by the same quadrature rule.
    pub tail_mass: S,
}

impl<S: Real> HermiteSeries<S> {
    pub fn new(coeffs: Vec<S>) -> Result<Self, HermiteError> {
        for (k, c) in coeffs.iter().enumerate() {
            if !c.is_finite() {
                return Err(HermiteError::BadCoefficient { degree: k });
            }
        }
        assert!(!coeffs.is_empty(), "series needs at least the degree-0 term");
        Ok(Self { coeffs })
    }

    /// Series with a single unit coefficient at `degree`.
    pub fn unit(degree: usize) -> Self {
        let mut coeffs = vec![S::zero(); degree + 1];
        coeffs[degree] = S::one();
        Self { coeffs }
    }

    /// c_k = E[f(G) he_k(G)] for k ≤ truncation, by Gauss-Hermite quadrature.
    ///
    /// Requires quadrature order ≥ 2·truncation + 2 so the c_k are exact for
    /// polynomial f up to the truncation degree.
    pub fn project<F: Fn(S) -> S>(
        f: F,
        truncation: usize,
        quad: &GaussHermite<S>,
    ) -> Result<Projection<S>, HermiteError> {
        let needed = 2 * truncation + 2;
        if quad.len() < needed {
            return Err(HermiteError::QuadratureOrder {
                got: quad.len(),
                needed,
                truncation,
            });
        }
        let sqrt2 = S::of(std::f64::consts::SQRT_2);
        let inv_sqrt_pi = S::of(1.0 / std::f64::consts::PI.sqrt());
        let mut coeffs = vec![S::zero(); truncation + 1];
        let mut norm_sq = S::zero();
        for (&x, &w) in quad.nodes().iter().zip(quad.weights()) {
            let g = sqrt2 * x;
            let fx = f(g);
            let he = hermite_eval_all(truncation, g)?;
            for (c, h) in coeffs.iter_mut().zip(&he) {
                *c += w * fx * *h;
            }
            norm_sq += w * fx * fx;
        }
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c *= inv_sqrt_pi;
            if !c.is_finite() {
                return Err(HermiteError::NonFiniteCoefficient { degree: k });
            }
        }
        norm_sq *= inv_sqrt_pi;
        let series = HermiteSeries::new(coeffs)?;
        let tail_mass = norm_sq - series.norm_sq();
        if tail_mass > S::of(1e-6) {
            log::warn!(
                "hermite truncation K={} leaves tail mass {:e}",
                truncation,
                tail_mass.to_f64_lossy()
            );
        }
        Ok(Projection { series, tail_mass })
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> S {
        self.coeffs.get(k).copied().unwrap_or_else(S::zero)
    }

    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Squared L²(φ) norm of the truncated series, Σ c_k².
    pub fn norm_sq(&self) -> S {
        self.coeffs.iter().map(|&c| c * c).sum()
    }

    /// Pointwise value Σ c_k he_k(x).
    pub fn eval(&self, x: S) -> S {
        let mut prev = S::zero();
        let mut cur = S::one();
        let mut acc = self.coeffs[0];
        for (j, &c) in self.coeffs.iter().enumerate().skip(1) {
            let jf = S::of((j - 1) as f64);
            let next = (x * cur - jf.sqrt() * prev) / (jf + S::one()).sqrt();
            prev = cur;
            cur = next;
            acc += c * cur;
        }
        acc
    }

    /// Derivative series: d/dx he_k = √k he_{k-1}.
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self {
                coeffs: vec![S::zero()],
            };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| S::of(k as f64).sqrt() * c)
            .collect();
        Self { coeffs }
    }

    /// Copy extended with zero coefficients up to truncation `k`.
    pub fn padded(&self, k: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(k + 1, S::zero());
        Self { coeffs }
    }
}
