//! The correlation kernels U, V of the population risk, as power series in
//! the overlap: V(s) = E[φ(G) σ(G_s)] = Σ φ_k σ_k s^k and
//! U(s) = E[σ(G) σ(G_s)] = Σ σ_k² s^k for a correlated standard Gaussian
//! pair (G, G_s).

use crate::hermite::{HermiteError, HermiteSeries};
use crate::scalar::Real;

/// Kernel selector for the checked evaluation entry point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    V,
    VPrime,
    U,
    UPrime,
    UDoublePrime,
}

/// Coefficients of the paired kernels: v_k = φ_k σ_k and u_k = σ_k².
#[derive(Debug, Clone)]
pub struct KernelPair<S> {
    v: Vec<S>,
    u: Vec<S>,
}

/// Horner evaluation of Σ c_k s^k.
fn horner<S: Real>(coeffs: &[S], s: S) -> S {
    coeffs
        .iter()
        .rev()
        .fold(S::zero(), |acc, &c| acc * s + c)
}

/// Horner evaluation of the term-wise derivative Σ k c_k s^{k-1}.
fn horner_d1<S: Real>(coeffs: &[S], s: S) -> S {
    let mut acc = S::zero();
    for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * s + S::of(k as f64) * c;
    }
    acc
}

/// Horner evaluation of Σ k(k-1) c_k s^{k-2}.
fn horner_d2<S: Real>(coeffs: &[S], s: S) -> S {
    let mut acc = S::zero();
    for (k, &c) in coeffs.iter().enumerate().skip(2).rev() {
        acc = acc * s + S::of((k * (k - 1)) as f64) * c;
    }
    acc
}

impl<S: Real> KernelPair<S> {
    /// Build the pair from target and activation series, zero-padding to the
    /// larger truncation when they differ.
    pub fn new(phi: &HermiteSeries<S>, sigma: &HermiteSeries<S>) -> Self {
        let k = phi.truncation().max(sigma.truncation());
        let v = (0..=k).map(|i| phi.coeff(i) * sigma.coeff(i)).collect();
        let u = (0..=k)
            .map(|i| {
                let c = sigma.coeff(i);
                c * c
            })
            .collect();
        Self { v, u }
    }

    pub fn truncation(&self) -> usize {
        self.v.len() - 1
    }

    pub fn v_coeffs(&self) -> &[S] {
        &self.v
    }

    pub fn u_coeffs(&self) -> &[S] {
        &self.u
    }

    /// Checked evaluation on the meaningful domain s ∈ [-1, 1].
    ///
    /// The unchecked methods below evaluate the underlying polynomial for any
    /// argument; integrator trial steps may momentarily leave the interval.
    pub fn eval(&self, which: Kernel, s: S) -> Result<S, HermiteError> {
        if s.abs() > S::one() {
            return Err(HermiteError::KernelDomain {
                s: s.to_f64_lossy(),
            });
        }
        Ok(match which {
            Kernel::V => self.v(s),
            Kernel::VPrime => self.v_prime(s),
            Kernel::U => self.u(s),
            Kernel::UPrime => self.u_prime(s),
            Kernel::UDoublePrime => self.u_double_prime(s),
        })
    }

    pub fn v(&self, s: S) -> S {
        horner(&self.v, s)
    }

    pub fn v_prime(&self, s: S) -> S {
        horner_d1(&self.v, s)
    }

    pub fn u(&self, s: S) -> S {
        horner(&self.u, s)
    }

    pub fn u_prime(&self, s: S) -> S {
        horner_d1(&self.u, s)
    }

    pub fn u_double_prime(&self, s: S) -> S {
        horner_d2(&self.u, s)
    }

    /// U(1) = Σ u_k, the truncated ‖σ‖².
    pub fn u_at_one(&self) -> S {
        self.u.iter().copied().sum()
    }
}
