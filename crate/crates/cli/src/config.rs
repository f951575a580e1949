//! Run and sweep configuration documents (JSON).

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use slowfast_core::flow::WeightLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Full,
    Reduced,
    Meanfield,
    Simplified,
    Gd,
    Sgd,
    Psgd,
}

impl SystemKind {
    pub fn needs_dimension(self) -> bool {
        matches!(self, SystemKind::Full | SystemKind::Gd | SystemKind::Sgd | SystemKind::Psgd)
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, SystemKind::Gd | SystemKind::Sgd | SystemKind::Psgd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Full => "full",
            SystemKind::Reduced => "reduced",
            SystemKind::Meanfield => "meanfield",
            SystemKind::Simplified => "simplified",
            SystemKind::Gd => "gd",
            SystemKind::Sgd => "sgd",
            SystemKind::Psgd => "psgd",
        }
    }
}

/// Second-layer weight law selector.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum PaSelector {
    Rademacher,
    Uniform { lo: f64, hi: f64 },
    Atoms { values: Vec<f64> },
}

impl Default for PaSelector {
    fn default() -> Self {
        PaSelector::Rademacher
    }
}

impl PaSelector {
    pub fn to_law(&self) -> WeightLaw {
        match self {
            PaSelector::Rademacher => WeightLaw::Rademacher,
            PaSelector::Uniform { lo, hi } => WeightLaw::Uniform { lo: *lo, hi: *hi },
            PaSelector::Atoms { values } => WeightLaw::Atoms(values.clone()),
        }
    }
}

/// Initialization mode of the simplified model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SimplifiedMode {
    #[default]
    Aligned,
    Opposed,
}

fn default_rtol() -> f64 {
    1e-9
}
fn default_atol() -> f64 {
    1e-12
}
fn default_samples() -> usize {
    400
}
fn default_truncation() -> usize {
    16
}

/// One simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemKind,
    /// Target selector ("relu", "erf", "he_k:<k>", "poly:<c0,c1,...>").
    pub phi: String,
    /// Activation selector, same grammar.
    pub sigma: String,
    pub eps: f64,
    pub m: usize,
    /// Ambient dimension; required for full/gd/sgd/psgd.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Hermite level of the simplified model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplified_mode: Option<SimplifiedMode>,
    pub t_end: f64,
    /// First sample time of the log-uniform grid; defaults to eps·1e-3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub pa: PaSelector,
    #[serde(default)]
    pub seed: u64,
    /// Log-uniform sample count for the deterministic flows.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Series truncation for function-valued activation sources.
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    /// Step size of the discrete dynamics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    /// Append per-particle a_i and s_i columns to the trace.
    #[serde(default)]
    pub dump_state: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.system.needs_dimension() && self.d.is_none() {
            bail!(
                "field 'd' is required for system '{}'",
                self.system.as_str()
            );
        }
        if !self.system.needs_dimension() && self.d.is_some() {
            bail!(
                "field 'd' is not applicable to system '{}'",
                self.system.as_str()
            );
        }
        if self.system == SystemKind::Simplified {
            match self.level {
                None => bail!("field 'level' is required for the simplified system"),
                Some(l) if l < 2 => bail!("field 'level' must be at least 2, got {l}"),
                _ => {}
            }
        } else if self.level.is_some() {
            bail!("field 'level' only applies to the simplified system");
        }
        if self.system.is_discrete() {
            if self.eta.is_none() || self.n_steps.is_none() {
                bail!(
                    "fields 'eta' and 'n_steps' are required for system '{}'",
                    self.system.as_str()
                );
            }
            if self.eta.unwrap() <= 0.0 {
                bail!("field 'eta' must be positive");
            }
        }
        if self.eps <= 0.0 {
            bail!("field 'eps' must be positive");
        }
        if self.m == 0 {
            bail!("field 'm' must be at least 1");
        }
        if self.t_end <= 0.0 {
            bail!("field 't_end' must be positive");
        }
        if self.rtol <= 0.0 || self.atol <= 0.0 {
            bail!("fields 'rtol' and 'atol' must be positive");
        }
        if self.samples < 2 {
            bail!("field 'samples' must be at least 2");
        }
        Ok(())
    }

    pub fn t_start(&self) -> f64 {
        self.t_start.unwrap_or(self.eps * 1e-3).min(self.t_end / 2.0)
    }
}

/// Parameter swept over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Eps,
    M,
    D,
    Eta,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Eps => "eps",
            SweepParam::M => "m",
            SweepParam::D => "d",
            SweepParam::Eta => "eta",
        }
    }
}

/// Transition to extract per cell, by plateau degree (drop from
/// ½Σ_{k≥level}φ_k² toward ½Σ_{k≥level+1}φ_k²).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionSpec {
    pub level: usize,
}

/// A grid of runs varying one parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    /// Extract this transition's center/width per cell and fit the scaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<TransitionSpec>,
    /// Also integrate the reduced flow per cell and report the paired
    /// particle distance (mean-field base system only).
    #[serde(default)]
    pub paired_with_reduced: bool,
    /// Scale t_end per cell as base.t_end · (value/values[0])^exponent
    /// (useful for ε ladders where horizons shrink with ε).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_scaling: Option<f64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            bail!("sweep needs at least one grid value");
        }
        if self.param == SweepParam::Eta && !self.base.system.is_discrete() {
            bail!("eta sweeps require a discrete system");
        }
        if self.paired_with_reduced && self.base.system != SystemKind::Meanfield {
            bail!("paired_with_reduced requires the meanfield system");
        }
        Ok(())
    }

    /// The base config with the swept parameter replaced.
    pub fn cell(&self, value: f64) -> Result<RunConfig> {
        let mut cfg = self.base.clone();
        match self.param {
            SweepParam::Eps => cfg.eps = value,
            SweepParam::M => cfg.m = value as usize,
            SweepParam::D => cfg.d = Some(value as usize),
            SweepParam::Eta => {
                // keep the horizon fixed: n_steps adapts to η
                let horizon = self.base.eta.unwrap() * self.base.n_steps.unwrap() as f64;
                cfg.eta = Some(value);
                cfg.n_steps = Some((horizon / value).round() as usize);
            }
        }
        if let Some(expo) = self.t_end_scaling {
            cfg.t_end = self.base.t_end * (value / self.values[0]).powf(expo);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_run_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sweep_config(path: &std::path::Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading sweep config {}", path.display()))?;
    let cfg: SweepConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing sweep config {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "system": "meanfield",
            "phi": "poly:1,-1,0.6666666666666666",
            "sigma": "relu",
            "eps": 1e-3,
            "m": 10,
            "t_end": 10.0
        })
    }

    #[test]
    fn minimal_config_roundtrips() {
        let cfg: RunConfig = serde_json::from_value(minimal_json()).unwrap();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.system, SystemKind::Meanfield);
        assert_eq!(back.samples, 400);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn field_level_errors() {
        let mut v = minimal_json();
        v["system"] = "full".into();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("'d'"), "{err}");

        let mut v = minimal_json();
        v["system"] = "simplified".into();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("'level'"));

        let mut v = minimal_json();
        v["system"] = "psgd".into();
        v["d"] = 50.into();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("'eta'"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v = minimal_json();
        v["typo_field"] = 1.into();
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }

    #[test]
    fn eta_sweep_keeps_horizon() {
        let mut base: RunConfig = serde_json::from_value(minimal_json()).unwrap();
        base.system = SystemKind::Psgd;
        base.d = Some(20);
        base.eta = Some(1e-3);
        base.n_steps = Some(2000);
        let sweep = SweepConfig {
            base,
            param: SweepParam::Eta,
            values: vec![1e-3, 5e-4],
            transition: None,
            paired_with_reduced: false,
            t_end_scaling: None,
        };
        let cell = sweep.cell(5e-4).unwrap();
        assert_eq!(cell.n_steps, Some(4000));
    }
}
