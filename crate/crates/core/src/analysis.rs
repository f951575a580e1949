//! Trace analysis: plateau segmentation, matching plateau levels against the
//! tail sums ½Σ_{k≥l}φ_k², transition-time extraction, log-log scaling fits,
//! and the per-level scenario verdict.

use crate::hermite::HermiteSeries;
use crate::trace::RiskTrace;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trace times must be strictly increasing and positive")]
    UnsortedTimes,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("scaling fit inputs must be positive")]
    NonPositiveInput,
    #[error("transition levels must satisfy from > to > 0 (got {from} -> {to})")]
    BadLevels { from: f64, to: f64 },
    #[error("risk never crosses {target} between levels {from} and {to}")]
    LevelsNotCrossed { target: f64, from: f64, to: f64 },
}

/// A maximal near-flat stretch of the risk curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateauSegment {
    pub level_value: f64,
    pub t_enter: f64,
    pub t_exit: f64,
    /// Degree l such that the level matches ½Σ_{k≥l}φ_k², i.e. "components
    /// ≥ l unlearned". Set by `match_levels`.
    pub matched_degree: Option<usize>,
}

impl PlateauSegment {
    pub fn span_decades(&self) -> f64 {
        (self.t_exit / self.t_enter).log10()
    }
}

/// Default slope threshold for plateau detection.
pub const SLOPE_TOL_DEFAULT: f64 = 0.01;
/// Default minimum plateau extent in decades of t.
pub const MIN_SPAN_DECADES_DEFAULT: f64 = 0.5;

/// Maximal segments where |d(risk)/d(log t)| < slope_tol · R_init, each
/// spanning at least `min_span_decades` decades. The trace is expected to be
/// sampled log-uniformly in t.
pub fn detect_plateaus(
    trace: &RiskTrace,
    slope_tol: f64,
    min_span_decades: f64,
) -> Result<Vec<PlateauSegment>, AnalysisError> {
    let n = trace.times.len();
    if n < 3 {
        return Err(AnalysisError::TooFewPoints { needed: 3, got: n });
    }
    if trace.times[0] <= 0.0 || trace.times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::UnsortedTimes);
    }
    let r_init = trace.risk[0];
    let threshold = slope_tol * r_init;
    let flat: Vec<bool> = (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let slope = (trace.risk[hi] - trace.risk[lo])
                / (trace.times[hi].ln() - trace.times[lo].ln());
            slope.abs() < threshold
        })
        .collect();

    let mut segments = Vec::new();
    let mut start = None;
    for i in 0..=n {
        let is_flat = i < n && flat[i];
        match (start, is_flat) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                let e = i - 1;
                let t_enter = trace.times[s];
                let t_exit = trace.times[e];
                if (t_exit / t_enter).log10() >= min_span_decades {
                    let mut vals: Vec<f64> = trace.risk[s..=e].to_vec();
                    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let level_value = vals[vals.len() / 2];
                    segments.push(PlateauSegment {
                        level_value,
                        t_enter,
                        t_exit,
                        matched_degree: None,
                    });
                }
                start = None;
            }
            _ => {}
        }
    }
    Ok(segments)
}

/// Level-matching outcome: segments annotated with degrees, plus any degree
/// claimed by more than one segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchReport {
    pub segments: Vec<PlateauSegment>,
    pub double_matched_degrees: Vec<usize>,
}

/// Tail level ½Σ_{k≥l} φ_k².
pub fn plateau_level(phi: &HermiteSeries<f64>, l: usize) -> f64 {
    (l..=phi.truncation()).map(|k| 0.5 * phi.coeff(k).powi(2)).sum()
}

/// Greedy nearest-level assignment of plateau values to tail sums
/// ½Σ_{k≥l}φ_k², within relative tolerance. Degrees claimed twice are
/// reported, not silently resolved.
pub fn match_levels(
    mut segments: Vec<PlateauSegment>,
    phi: &HermiteSeries<f64>,
    rel_tol: f64,
) -> MatchReport {
    let candidates: Vec<(usize, f64)> = (0..=phi.truncation())
        .map(|l| (l, plateau_level(phi, l)))
        .filter(|(_, v)| *v > 0.0)
        .collect();
    let mut claimed: Vec<usize> = Vec::new();
    let mut doubles = Vec::new();
    for seg in segments.iter_mut() {
        let best = candidates
            .iter()
            .map(|&(l, v)| (l, ((seg.level_value - v) / v).abs()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        if let Some((l, rel_err)) = best {
            if rel_err <= rel_tol {
                seg.matched_degree = Some(l);
                if claimed.contains(&l) {
                    doubles.push(l);
                } else {
                    claimed.push(l);
                }
            }
        }
    }
    MatchReport {
        segments,
        double_matched_degrees: doubles,
    }
}

fn crossing_time(trace: &RiskTrace, target: f64) -> Option<f64> {
    for i in 0..trace.len() - 1 {
        if trace.risk[i] >= target && trace.risk[i + 1] < target {
            // log-log interpolation
            let (r0, r1) = (trace.risk[i].max(1e-300), trace.risk[i + 1].max(1e-300));
            let (t0, t1) = (trace.times[i], trace.times[i + 1]);
            let frac = (target.ln() - r0.ln()) / (r1.ln() - r0.ln());
            return Some((t0.ln() + frac * (t1.ln() - t0.ln())).exp());
        }
    }
    None
}

/// Transition center and width between two plateau levels.
///
/// The center is where the risk crosses the log-midpoint √(from·to); the
/// width is the time between 10% and 90% of the drop, measured in log-risk.
pub fn extract_transition(
    trace: &RiskTrace,
    from_level: f64,
    to_level: f64,
) -> Result<(f64, f64), AnalysisError> {
    if !(from_level > to_level && to_level > 0.0) {
        return Err(AnalysisError::BadLevels {
            from: from_level,
            to: to_level,
        });
    }
    let drop = from_level.ln() - to_level.ln();
    let at = |frac: f64| (from_level.ln() - frac * drop).exp();
    let mid = at(0.5);
    let t_center = crossing_time(trace, mid).ok_or(AnalysisError::LevelsNotCrossed {
        target: mid,
        from: from_level,
        to: to_level,
    })?;
    let t10 = crossing_time(trace, at(0.1)).ok_or(AnalysisError::LevelsNotCrossed {
        target: at(0.1),
        from: from_level,
        to: to_level,
    })?;
    let t90 = crossing_time(trace, at(0.9)).ok_or(AnalysisError::LevelsNotCrossed {
        target: at(0.9),
        from: from_level,
        to: to_level,
    })?;
    Ok((t_center, t90 - t10))
}

/// Least-squares fit of log(time) against log(ε).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

pub fn fit_scaling(eps_values: &[f64], times: &[f64]) -> Result<ScalingFit, AnalysisError> {
    let n = eps_values.len();
    if n < 4 || times.len() != n {
        return Err(AnalysisError::TooFewPoints { needed: 4, got: n });
    }
    if eps_values.iter().chain(times).any(|&v| v <= 0.0) {
        return Err(AnalysisError::NonPositiveInput);
    }
    let span = eps_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        / eps_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if span.log10() < 3.0 {
        log::warn!("scaling fit spans only {:.2} decades of ε", span.log10());
    }
    let xs: Vec<f64> = eps_values.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n as f64;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let exponent = sxy / sxx;
    let intercept = ym - exponent * xm;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + exponent * x))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(ScalingFit {
        exponent,
        intercept,
        r_squared,
        residuals,
    })
}

/// Per-level evidence of the scenario verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelVerdict {
    pub level: usize,
    pub plateau_found: bool,
    /// Relative error of the matched plateau value against ½Σ_{k≥l}φ_k².
    pub level_error: Option<f64>,
    /// Fitted center exponent over the ε ladder (for level 1 the known
    /// log(1/ε) factor is divided out before fitting).
    pub center_exponent: Option<f64>,
    pub expected_center_exponent: f64,
    /// Fitted width exponent over the ε ladder.
    pub width_exponent: Option<f64>,
    pub expected_width_exponent: f64,
    pub passed: bool,
}

/// Scenario verdict over an ε ladder of traces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioVerdict {
    pub levels: Vec<LevelVerdict>,
    pub holds_up_to_level: usize,
    /// Relative tolerance applied to plateau levels.
    pub level_tol: f64,
    /// Absolute tolerance applied to fitted exponents.
    pub exponent_tol: f64,
}

/// Tolerances of `verify_scenario`.
pub const LEVEL_TOL_DEFAULT: f64 = 0.05;
pub const EXPONENT_TOL_DEFAULT: f64 = 0.05;

/// Combine plateau detection, level matching and transition fits over a
/// ladder of runs at decreasing ε. A level passes when its plateau level
/// matches within 5% and its fitted center exponent is within 0.05 of the
/// predicted value.
pub fn verify_scenario(
    runs: &[(f64, &RiskTrace)],
    phi: &HermiteSeries<f64>,
    l_max: usize,
) -> Result<ScenarioVerdict, AnalysisError> {
    assert!(!runs.is_empty());
    let mut sorted: Vec<&(f64, &RiskTrace)> = runs.iter().collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let smallest = sorted.last().unwrap();

    // plateau evidence from the best-separated trace
    let detected = detect_plateaus(smallest.1, SLOPE_TOL_DEFAULT, MIN_SPAN_DECADES_DEFAULT)?;
    let matched = match_levels(detected, phi, LEVEL_TOL_DEFAULT);

    let mut levels = Vec::new();
    for l in 1..=l_max {
        let target = plateau_level(phi, l);
        let seg = matched
            .segments
            .iter()
            .find(|s| s.matched_degree == Some(l));
        let plateau_found = seg.is_some();
        let level_error = seg.map(|s| ((s.level_value - target) / target).abs());

        // transition l: drop from ½Σ_{k≥l} to ½Σ_{k≥l+1}
        let from = plateau_level(phi, l);
        let to_nominal = plateau_level(phi, l + 1);
        let mut eps_ok = Vec::new();
        let mut centers = Vec::new();
        let mut widths = Vec::new();
        for &&(eps, trace) in &sorted {
            let floor = trace.risk.iter().cloned().fold(f64::INFINITY, f64::min);
            let to = to_nominal.max(floor.max(1e-14));
            if to >= from {
                continue;
            }
            if let Ok((c, w)) = extract_transition(trace, from, to) {
                eps_ok.push(eps);
                centers.push(c);
                widths.push(w);
            }
        }
        let expected_center = if l == 1 { 0.5 } else { 1.0 / (2.0 * l as f64) };
        let expected_width = 1.0 / (l as f64 + 1.0);
        let (center_exponent, width_exponent) = if eps_ok.len() >= 4 {
            // the level-1 center is (1/(4|σ_1φ_1|)) √ε log(1/ε): divide the
            // known log factor out so the fit sees the pure power
            let fit_centers: Vec<f64> = if l == 1 {
                centers
                    .iter()
                    .zip(&eps_ok)
                    .map(|(&c, &e): (&f64, &f64)| c / (1.0 / e).ln())
                    .collect()
            } else {
                centers.clone()
            };
            let ce = fit_scaling(&eps_ok, &fit_centers).ok().map(|f| f.exponent);
            let we = fit_scaling(&eps_ok, &widths).ok().map(|f| f.exponent);
            (ce, we)
        } else {
            (None, None)
        };

        let passed = plateau_found
            && level_error.map_or(false, |e| e <= LEVEL_TOL_DEFAULT)
            && center_exponent
                .map_or(false, |c| (c - expected_center).abs() <= EXPONENT_TOL_DEFAULT);
        levels.push(LevelVerdict {
            level: l,
            plateau_found,
            level_error,
            center_exponent,
            expected_center_exponent: expected_center,
            width_exponent,
            expected_width_exponent: expected_width,
            passed,
        });
    }
    let holds_up_to_level = levels
        .iter()
        .take_while(|lv| lv.passed)
        .map(|lv| lv.level)
        .last()
        .unwrap_or(0);
    Ok(ScenarioVerdict {
        levels,
        holds_up_to_level,
        level_tol: LEVEL_TOL_DEFAULT,
        exponent_tol: EXPONENT_TOL_DEFAULT,
    })
}
