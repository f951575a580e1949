//! Particle-state containers for the four systems, their flat ODE layouts,
//! and random initialization.

use super::FlowError;
use crate::scalar::{dot, normalize, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Law of the second-layer weights a_i at initialization. Laws with
/// unbounded support are rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightLaw {
    /// Atoms ±1 with equal mass.
    Rademacher,
    Uniform { lo: f64, hi: f64 },
    /// One deterministic value per particle.
    Atoms(Vec<f64>),
}

impl WeightLaw {
    fn validate(&self, m: usize) -> Result<(), FlowError> {
        match self {
            WeightLaw::Rademacher => Ok(()),
            WeightLaw::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    Err(FlowError::WeightLaw(format!(
                        "uniform({lo}, {hi}) is not supported on a finite interval"
                    )))
                } else {
                    Ok(())
                }
            }
            WeightLaw::Atoms(vals) => {
                if vals.len() != m {
                    return Err(FlowError::AtomCount {
                        expected: m,
                        got: vals.len(),
                    });
                }
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(FlowError::WeightLaw("non-finite atom".into()));
                }
                Ok(())
            }
        }
    }

    fn sample<S: Real, R: Rng>(&self, m: usize, rng: &mut R) -> Vec<S> {
        match self {
            WeightLaw::Rademacher => (0..m)
                .map(|_| if rng.gen::<bool>() { S::one() } else { -S::one() })
                .collect(),
            WeightLaw::Uniform { lo, hi } => (0..m)
                .map(|_| S::of(lo + (hi - lo) * rng.gen::<f64>()))
                .collect(),
            WeightLaw::Atoms(vals) => vals.iter().map(|&v| S::of(v)).collect(),
        }
    }
}

fn sample_sphere<S: Real, R: Rng>(d: usize, rng: &mut R) -> Vec<S> {
    let mut v: Vec<S> = (0..d).map(|_| S::std_normal(rng)).collect();
    normalize(&mut v);
    v
}

/// Full flow state: second-layer weights a_i and unit first-layer rows u_i,
/// plus the target direction u_*.
#[derive(Debug, Clone)]
pub struct FullState<S> {
    pub a: Vec<S>,
    /// m rows of length d, flattened row-major.
    pub u: Vec<S>,
    pub u_star: Vec<S>,
    pub d: usize,
}

impl<S: Real> FullState<S> {
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.u[i * self.d..(i + 1) * self.d]
    }

    /// Overlaps s_i = ⟨u_i, u_*⟩.
    pub fn overlaps(&self) -> Vec<S> {
        (0..self.m()).map(|i| dot(self.row(i), &self.u_star)).collect()
    }

    /// Gram entries r_ij = ⟨u_i, u_j⟩ as a full m×m matrix, row-major.
    pub fn gram(&self) -> Vec<S> {
        let m = self.m();
        let mut r = vec![S::zero(); m * m];
        for i in 0..m {
            r[i * m + i] = S::one();
            for j in (i + 1)..m {
                let v = dot(self.row(i), self.row(j));
                r[i * m + j] = v;
                r[j * m + i] = v;
            }
        }
        r
    }

    pub fn to_flat(&self) -> Vec<S> {
        let mut y = Vec::with_capacity(self.a.len() + self.u.len());
        y.extend_from_slice(&self.a);
        y.extend_from_slice(&self.u);
        y
    }

    pub fn from_flat(y: &[S], d: usize, u_star: Vec<S>) -> Self {
        let m = y.len() / (d + 1);
        Self {
            a: y[..m].to_vec(),
            u: y[m..].to_vec(),
            u_star,
            d,
        }
    }
}

/// Reduced d-independent state: (a, s, R) with r_ii = 1 pinned.
#[derive(Debug, Clone)]
pub struct ReducedState<S> {
    pub a: Vec<S>,
    pub s: Vec<S>,
    /// Strict upper triangle of R, row-major: (0,1), (0,2), ..., (m-2,m-1).
    pub r_upper: Vec<S>,
}

/// Index of the pair (i, j), i < j, in the strict upper triangle layout.
#[inline]
pub fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * (m - 1) - i * (i.saturating_sub(1)) / 2 + (j - i - 1)
}

impl<S: Real> ReducedState<S> {
    pub fn m(&self) -> usize {
        self.a.len()
    }

    /// Matched initialization of the high-dimensional limit: s = 0 and
    /// R = I off-diagonal zero.
    pub fn centered(a: Vec<S>) -> Self {
        let m = a.len();
        Self {
            a,
            s: vec![S::zero(); m],
            r_upper: vec![S::zero(); m * (m - 1) / 2],
        }
    }

    /// Gram data induced by a full state (matched-Gram initialization).
    pub fn from_full(full: &FullState<S>) -> Self {
        let m = full.m();
        let mut r_upper = Vec::with_capacity(m * (m - 1) / 2);
        for i in 0..m {
            for j in (i + 1)..m {
                r_upper.push(dot(full.row(i), full.row(j)));
            }
        }
        Self {
            a: full.a.clone(),
            s: full.overlaps(),
            r_upper,
        }
    }

    /// Entry r_ij with the diagonal pinned to one.
    pub fn r(&self, i: usize, j: usize) -> S {
        if i == j {
            S::one()
        } else {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            self.r_upper[pair_index(self.m(), lo, hi)]
        }
    }

    /// Off-target Gram component r⊥_ij = r_ij - s_i s_j.
    pub fn r_perp(&self, i: usize, j: usize) -> S {
        self.r(i, j) - self.s[i] * self.s[j]
    }

    pub fn to_flat(&self) -> Vec<S> {
        let mut y = Vec::with_capacity(2 * self.a.len() + self.r_upper.len());
        y.extend_from_slice(&self.a);
        y.extend_from_slice(&self.s);
        y.extend_from_slice(&self.r_upper);
        y
    }

    pub fn from_flat(y: &[S], m: usize) -> Self {
        Self {
            a: y[..m].to_vec(),
            s: y[m..2 * m].to_vec(),
            r_upper: y[2 * m..].to_vec(),
        }
    }
}

/// Mean-field state: (a_i, s_i) with particle weights summing to one.
#[derive(Debug, Clone)]
pub struct MeanFieldState<S> {
    pub a: Vec<S>,
    pub s: Vec<S>,
    pub weights: Vec<S>,
}

impl<S: Real> MeanFieldState<S> {
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn uniform(a: Vec<S>) -> Self {
        let m = a.len();
        let w = S::one() / S::of(m as f64);
        Self {
            a,
            s: vec![S::zero(); m],
            weights: vec![w; m],
        }
    }

    pub fn to_flat(&self) -> Vec<S> {
        let mut y = Vec::with_capacity(2 * self.a.len());
        y.extend_from_slice(&self.a);
        y.extend_from_slice(&self.s);
        y
    }

    pub fn from_flat(y: &[S], weights: Vec<S>) -> Self {
        let m = weights.len();
        Self {
            a: y[..m].to_vec(),
            s: y[m..2 * m].to_vec(),
            weights,
        }
    }
}

/// Rescaled state of the level-l simplified model.
#[derive(Debug, Clone)]
pub struct SimplifiedState<S> {
    pub a_tilde: Vec<S>,
    pub s_tilde: Vec<S>,
    pub weights: Vec<S>,
    pub level: usize,
    pub eps: S,
}

/// Sign pattern of the simplified-model initialization, matching the case
/// split of the single-level evolution theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplifiedInit {
    /// σ_l φ_l ã s̃^l > 0 for every particle.
    Aligned,
    /// σ_l φ_l ã s̃^l < 0 with s̃² < l·ã²: overlaps decay to zero.
    Opposed,
}

impl<S: Real> SimplifiedState<S> {
    pub fn m(&self) -> usize {
        self.a_tilde.len()
    }

    /// β_l = 1/(2(l+1)).
    pub fn beta(&self) -> S {
        S::one() / S::of(2.0 * (self.level as f64 + 1.0))
    }

    /// Initialization at the natural entry scale ε^{1/(2l(l+1))}, with
    /// per-particle multipliers drawn uniformly from [0.5, 1.5].
    ///
    /// `sign_of_product` should be the sign of σ_l φ_l so `Aligned` and
    /// `Opposed` land in the intended case of the level-l analysis.
    pub fn init(
        m: usize,
        level: usize,
        eps: S,
        mode: SimplifiedInit,
        sign_of_product: S,
        seed: u64,
    ) -> Self {
        assert!(level >= 2, "simplified model is defined for levels l >= 2");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = eps.powf(S::one() / S::of(2.0 * level as f64 * (level as f64 + 1.0)));
        let w = S::one() / S::of(m as f64);
        let mut a = Vec::with_capacity(m);
        let mut s = Vec::with_capacity(m);
        for _ in 0..m {
            let ca = S::of(0.5 + rng.gen::<f64>());
            let cs = S::of(0.5 + rng.gen::<f64>());
            match mode {
                SimplifiedInit::Aligned => {
                    // s̃ > 0 and ã carrying the sign that makes σφ ã s̃^l > 0
                    a.push(sign_of_product.signum() * ca * scale);
                    s.push(cs * scale);
                }
                SimplifiedInit::Opposed => {
                    // flip ã and shrink s̃ so s̃² < l ã²
                    let cs = cs.min(S::of(0.9) * ca * S::of(level as f64).sqrt());
                    a.push(-sign_of_product.signum() * ca * scale);
                    s.push(cs * scale);
                }
            }
        }
        Self {
            a_tilde: a,
            s_tilde: s,
            weights: vec![w; m],
            level,
            eps,
        }
    }

    pub fn to_flat(&self) -> Vec<S> {
        let mut y = Vec::with_capacity(2 * self.m());
        y.extend_from_slice(&self.a_tilde);
        y.extend_from_slice(&self.s_tilde);
        y
    }

    pub fn from_flat(&self, y: &[S]) -> Self {
        let m = self.m();
        Self {
            a_tilde: y[..m].to_vec(),
            s_tilde: y[m..2 * m].to_vec(),
            weights: self.weights.clone(),
            level: self.level,
            eps: self.eps,
        }
    }

    /// Per-particle conserved quantity ã² + ε^{-2β_l}/l · log(1 - ε^{2β_l} s̃²).
    pub fn conserved(&self) -> Vec<S> {
        let beta2 = self.eps.powf(S::of(2.0) * self.beta());
        let l = S::of(self.level as f64);
        self.a_tilde
            .iter()
            .zip(&self.s_tilde)
            .map(|(&a, &s)| a * a + (S::one() - beta2 * s * s).ln() / (beta2 * l))
            .collect()
    }
}

/// Sample a full-flow initialization: a_i i.i.d. from the weight law, u_i
/// uniform on the sphere, u_* uniform on the sphere.
pub fn init_full<S: Real>(
    m: usize,
    d: usize,
    pa: &WeightLaw,
    seed: u64,
) -> Result<FullState<S>, FlowError> {
    pa.validate(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = pa.sample::<S, _>(m, &mut rng);
    let u_star = sample_sphere(d, &mut rng);
    let mut u = Vec::with_capacity(m * d);
    for _ in 0..m {
        u.extend(sample_sphere::<S, _>(d, &mut rng));
    }
    Ok(FullState { a, u, u_star, d })
}

/// Sample a mean-field initialization: a_i i.i.d. from the weight law,
/// s_i = 0, uniform particle weights.
pub fn init_meanfield<S: Real>(
    m: usize,
    pa: &WeightLaw,
    seed: u64,
) -> Result<MeanFieldState<S>, FlowError> {
    pa.validate(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(MeanFieldState::uniform(pa.sample::<S, _>(m, &mut rng)))
}
