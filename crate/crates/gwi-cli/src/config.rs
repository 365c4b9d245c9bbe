//! Experiment configuration: TOML schema, validation with field-path
//! diagnostics, and conversion to the core model types.

use serde::{Deserialize, Serialize};

use gwi_core::{GwiModel, OffspringSpec, ScalarLaw, VectorLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One scalar offspring/immigration law: family tag + named parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Deterministic { value: u64 },
    Bernoulli { p: f64 },
    Binomial { n: u64, p: f64 },
    Poisson { lambda: f64 },
    Geometric { p: f64 },
    DiscretePareto { beta: f64 },
    FinitePmf { entries: Vec<PmfEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfEntry {
    pub value: u64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointEntry {
    pub counts: Vec<u64>,
    pub p: f64,
}

/// A d-dimensional law: independent per-component laws or a joint pmf.
/// Exactly one of the two fields must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorLawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<LawConfig>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<Vec<JointEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    /// One vector law per parent type; must have exactly d entries.
    pub offspring: Vec<VectorLawConfig>,
    pub immigration: VectorLawConfig,
}

fn default_eps() -> f64 {
    1e-6
}
fn default_confidence() -> f64 {
    0.999
}
fn default_format() -> OutputFormat {
    OutputFormat::Csv
}
fn default_k_fracs() -> Vec<f64> {
    vec![0.01]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub seed: u64,
    pub samples: u64,
    pub alphas: Vec<f64>,
    pub k_max: u32,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_bar: Option<f64>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
    /// Order-statistic fractions for the tail subcommand.
    #[serde(default = "default_k_fracs")]
    pub k_fracs: Vec<f64>,
}

impl LawConfig {
    fn to_law(&self) -> ScalarLaw {
        match self {
            LawConfig::Deterministic { value } => ScalarLaw::Deterministic(*value),
            LawConfig::Bernoulli { p } => ScalarLaw::Bernoulli(*p),
            LawConfig::Binomial { n, p } => ScalarLaw::Binomial { n: *n, p: *p },
            LawConfig::Poisson { lambda } => ScalarLaw::Poisson(*lambda),
            LawConfig::Geometric { p } => ScalarLaw::Geometric(*p),
            LawConfig::DiscretePareto { beta } => ScalarLaw::DiscretePareto(*beta),
            LawConfig::FinitePmf { entries } => {
                ScalarLaw::FinitePmf(entries.iter().map(|e| (e.value, e.p)).collect())
            }
        }
    }
}

impl VectorLawConfig {
    fn to_law(&self, d: usize, path: &str) -> Result<VectorLaw, String> {
        let law = match (&self.components, &self.joint) {
            (Some(comps), None) => {
                if comps.len() != d {
                    return Err(format!(
                        "{path}.components: expected {d} laws (model.d), got {}",
                        comps.len()
                    ));
                }
                VectorLaw::IndependentComponents(comps.iter().map(|c| c.to_law()).collect())
            }
            (None, Some(joint)) => VectorLaw::JointPmf(
                joint.iter().map(|e| (e.counts.clone(), e.p)).collect(),
            ),
            _ => {
                return Err(format!(
                    "{path}: exactly one of `components` or `joint` must be given"
                ))
            }
        };
        law.validate(d).map_err(|e| format!("{path}: {e}"))?;
        Ok(law)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model.d == 0 {
            return Err("model.d: must be at least 1".into());
        }
        if self.model.offspring.len() != self.model.d {
            return Err(format!(
                "model.offspring: expected {} vector laws (model.d), got {}",
                self.model.d,
                self.model.offspring.len()
            ));
        }
        for (i, o) in self.model.offspring.iter().enumerate() {
            o.to_law(self.model.d, &format!("model.offspring[{i}]"))?;
        }
        self.model
            .immigration
            .to_law(self.model.d, "model.immigration")?;
        if self.samples < 100 {
            return Err("samples: must be at least 100".into());
        }
        if self.alphas.is_empty() {
            return Err("alphas: must not be empty".into());
        }
        for (i, a) in self.alphas.iter().enumerate() {
            if !(*a > 0.0) || !a.is_finite() {
                return Err(format!("alphas[{i}]: must be a positive finite real"));
            }
        }
        if self.k_max < 1 {
            return Err("k_max: must be at least 1".into());
        }
        if !(self.eps > 0.0) {
            return Err("eps: must be positive".into());
        }
        if let Some(mb) = self.mu_bar {
            if !(0.0 < mb && mb < 1.0) {
                return Err("mu_bar: must lie in (0, 1)".into());
            }
        }
        if !(0.5 < self.confidence && self.confidence < 1.0) {
            return Err("confidence: must lie in (0.5, 1)".into());
        }
        for (i, f) in self.k_fracs.iter().enumerate() {
            if !(0.0 < *f && *f < 1.0) {
                return Err(format!("k_fracs[{i}]: must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Build the validated core model. Config-level errors were already
    /// caught by validate(); anything surfacing here carries the core's
    /// own message.
    pub fn build_model(&self) -> Result<GwiModel, String> {
        let d = self.model.d;
        let mut per_type = Vec::with_capacity(d);
        for (i, o) in self.model.offspring.iter().enumerate() {
            per_type.push(o.to_law(d, &format!("model.offspring[{i}]"))?);
        }
        let offspring = OffspringSpec::new(per_type).map_err(|e| format!("model.offspring: {e}"))?;
        let immigration = self.model.immigration.to_law(d, "model.immigration")?;
        GwiModel::new(offspring, immigration).map_err(|e| format!("model: {e}"))
    }
}
