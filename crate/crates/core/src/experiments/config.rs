use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use crate::circle::MIN_EXPERIMENT_BITS;
use crate::error::{Error, Result};
use crate::sequences::SequenceSpec;
use crate::window::WindowKind;

pub const DEFAULT_SAMPLES: usize = 32;
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Scan,
    Theorem1,
    Theorem2,
    Threegap,
    Primes,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Scan => "scan",
            ExperimentKind::Theorem1 => "theorem1",
            ExperimentKind::Theorem2 => "theorem2",
            ExperimentKind::Threegap => "threegap",
            ExperimentKind::Primes => "primes",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scan" => Ok(ExperimentKind::Scan),
            "theorem1" => Ok(ExperimentKind::Theorem1),
            "theorem2" => Ok(ExperimentKind::Theorem2),
            "threegap" => Ok(ExperimentKind::Threegap),
            "primes" => Ok(ExperimentKind::Primes),
            _ => Err(Error::config(format!(
                "unknown experiment {s:?} (expected scan, theorem1, theorem2, threegap or primes)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Precision `B`; derived from the sequence when absent.
    #[serde(default)]
    pub bits: Option<u32>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            bits: None,
        }
    }
}

/// The exponent in `M = c·N^p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MRuleKind {
    /// `p = 2 − η`
    TwoMinusEta,
    /// `p = 2 + η`
    TwoPlusEta,
    /// `p = 1`
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MRule {
    pub kind: MRuleKind,
    pub c: f64,
}

impl MRule {
    /// `M = ½·N^{2−η}`.
    pub fn theorem2() -> Self {
        MRule {
            kind: MRuleKind::TwoMinusEta,
            c: 0.5,
        }
    }

    /// `M = N^{2+η}/8`.
    pub fn theorem1() -> Self {
        MRule {
            kind: MRuleKind::TwoPlusEta,
            c: 0.125,
        }
    }

    /// `⌊c·N^p⌋`, at least 1.
    pub fn m(&self, n: usize, eta: f64) -> Result<u64> {
        let p = match self.kind {
            MRuleKind::TwoMinusEta => 2.0 - eta,
            MRuleKind::TwoPlusEta => 2.0 + eta,
            MRuleKind::Linear => 1.0,
        };
        let m = (self.c * (n as f64).powf(p)).floor();
        if m.is_nan() || m >= 2f64.powi(62) {
            return Err(Error::resource(
                "m-rule",
                format!("M = {m:e} at N = {n} does not fit in 62 bits"),
            ));
        }
        Ok((m as u64).max(1))
    }

    fn validate(&self) -> Result<()> {
        if self.c > 0.0 && self.c.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!("m_rule.c must be positive, got {}", self.c)))
        }
    }
}

/// Pass/fail gates for the sampled checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_max_violation")]
    pub max_violation: f64,
    #[serde(default = "default_min_satisfaction")]
    pub min_satisfaction: f64,
    /// Optional acceptance range for the median fitted slope.
    #[serde(default)]
    pub slope_min: Option<f64>,
    #[serde(default)]
    pub slope_max: Option<f64>,
}

fn default_max_violation() -> f64 {
    0.1
}

fn default_min_satisfaction() -> f64 {
    0.9
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_violation: default_max_violation(),
            min_satisfaction: default_min_satisfaction(),
            slope_min: None,
            slope_max: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::config(format!("unknown format {s:?} (expected csv or json)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

/// A declarative experiment run, usually read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub sequence: SequenceSpec,
    #[serde(alias = "Ns")]
    pub ns: GridSpec,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub window: WindowKind,
    #[serde(default)]
    pub alphas: AlphaConfig,
    #[serde(default)]
    pub m_rule: Option<MRule>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl ExperimentConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(experiment: ExperimentKind, sequence: SequenceSpec, ns: GridSpec) -> Self {
        ExperimentConfig {
            experiment,
            sequence,
            ns,
            eta: None,
            epsilon: DEFAULT_EPSILON,
            window: WindowKind::Triangle,
            alphas: AlphaConfig::default(),
            m_rule: None,
            thresholds: Thresholds::default(),
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta < 2.0) {
                return Err(Error::config(format!("eta must be in (0,2), got {eta}")));
            }
        }
        if matches!(
            self.experiment,
            ExperimentKind::Theorem1 | ExperimentKind::Theorem2
        ) && self.eta.is_none()
        {
            return Err(Error::config(format!(
                "experiment {} needs `eta`",
                self.experiment
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.alphas.samples == 0 {
            return Err(Error::config("alphas.samples must be ≥ 1"));
        }
        if let Some(bits) = self.alphas.bits {
            if bits < MIN_EXPERIMENT_BITS {
                return Err(Error::config(format!(
                    "alphas.bits must be ≥ {MIN_EXPERIMENT_BITS}, got {bits}"
                )));
            }
        }
        if let Some(rule) = &self.m_rule {
            rule.validate()?;
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("max_violation", t.max_violation),
            ("min_satisfaction", t.min_satisfaction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!(
                    "thresholds.{name} must be in [0,1], got {v}"
                )));
            }
        }
        if self.experiment == ExperimentKind::Threegap && self.sequence != SequenceSpec::Naturals {
            return Err(Error::config("experiment threegap needs sequence = \"naturals\""));
        }
        if self.experiment == ExperimentKind::Primes && self.sequence != SequenceSpec::Primes {
            return Err(Error::config("experiment primes needs sequence = \"primes\""));
        }
        self.grid()?;
        Ok(())
    }

    /// The expanded N grid.
    pub fn grid(&self) -> Result<Vec<usize>> {
        self.ns.expand(self.eta)
    }

    /// The configured M rule, or the experiment's default one.
    pub fn effective_m_rule(&self) -> Option<MRule> {
        self.m_rule.or(match self.experiment {
            ExperimentKind::Theorem1 => Some(MRule::theorem1()),
            ExperimentKind::Theorem2 => Some(MRule::theorem2()),
            _ => None,
        })
    }
}
