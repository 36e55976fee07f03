//! Experiment configuration files and the built-in presets.

use serde::{Deserialize, Serialize};

use crate::networks::{kan_param_count, mlp_param_count, NetworkError};
use crate::problems::ProblemId;
use crate::sampling::{RardConfig, SamplingPlan};
use crate::training::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Mlp,
    Kan,
}

impl BackboneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackboneKind::Mlp => "mlp",
            BackboneKind::Kan => "kan",
        }
    }
}

/// One training run. `seed` drives network initialization, collocation
/// sampling (unless `collocation_seed` is set), resampling and testing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    pub backbone: BackboneKind,
    pub widths: Vec<usize>,
    /// KAN grid intervals `G`; ignored for MLPs.
    #[serde(default = "default_grid")]
    pub grid_intervals: usize,
    /// KAN spline degree `m`; ignored for MLPs.
    #[serde(default = "default_order")]
    pub spline_order: usize,
    pub sampling: SamplingPlan,
    pub train: TrainConfig,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
    pub seed: u64,
    #[serde(default)]
    pub collocation_seed: Option<u64>,
}

fn default_grid() -> usize {
    10
}

fn default_order() -> usize {
    3
}

fn default_n_test() -> usize {
    crate::reporting::N_TEST_INTERIOR
}

/// A validation failure naming the offending field.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| err("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        crate::networks::check_widths(&self.widths).map_err(|e| match e {
            NetworkError::Invalid(m) => err("widths", m),
            other => err("widths", other.to_string()),
        })?;
        if self.backbone == BackboneKind::Kan {
            if self.grid_intervals == 0 {
                return Err(err("grid_intervals", "must be at least 1"));
            }
            if !(1..=crate::networks::spline::MAX_DEGREE).contains(&self.spline_order) {
                return Err(err("spline_order", "must lie in 1..=5"));
            }
        }
        let s = &self.sampling;
        for (name, v) in [
            ("sampling.n_interior1", s.n_interior1),
            ("sampling.n_interior2", s.n_interior2),
            ("sampling.n_interface", s.n_interface),
            ("sampling.n_boundary2", s.n_boundary2),
        ] {
            if v == 0 {
                return Err(err(name, "must be at least 1"));
            }
        }
        let has_b1 = matches!(self.problem, ProblemId::E5 | ProblemId::E6);
        if !has_b1 && s.n_boundary1 > 0 {
            return Err(err(
                "sampling.n_boundary1",
                format!("{} has no boundary of Ω₁ away from Γ; use 0", self.problem),
            ));
        }
        if self.n_test == 0 {
            return Err(err("n_test", "must be at least 1"));
        }
        self.train.validate().map_err(|m| {
            let field = m.split(' ').next().unwrap_or("train").to_string();
            ConfigError { field, message: m }
        })?;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        2 * match self.backbone {
            BackboneKind::Mlp => mlp_param_count(&self.widths),
            BackboneKind::Kan => kan_param_count(&self.widths, self.grid_intervals, self.spline_order),
        }
    }

    pub fn collocation_seed(&self) -> u64 {
        self.collocation_seed.unwrap_or(self.seed)
    }

    /// Training settings with the experiment seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Overrides the step count. The log period shrinks to the largest
    /// divisor of both when it no longer divides `n`.
    pub fn set_total_steps(&mut self, n: usize) {
        self.train.total_steps = n;
        let (mut a, mut b) = (n, self.train.log_period.max(1));
        while b != 0 {
            (a, b) = (b, a % b);
        }
        if n > 0 {
            self.train.log_period = a;
        }
    }

    /// File stem such as `e1_kan_rard`.
    pub fn run_name(&self) -> String {
        let mut s = format!("{}_{}", self.problem.as_str(), self.backbone.as_str());
        if self.train.rard.is_some() {
            s.push_str("_rard");
        }
        s
    }

    /// Built-in preset `e{1,4,5,6}-{kan,mlp}[-rard]`.
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let unknown = || err("preset", format!("unknown preset '{name}'; known: {}", preset_names().join(", ")));
        let parts: Vec<&str> = name.split('-').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(unknown());
        }
        let problem: ProblemId = parts[0].parse().map_err(|_| unknown())?;
        let backbone = match parts[1] {
            "kan" => BackboneKind::Kan,
            "mlp" => BackboneKind::Mlp,
            _ => return Err(unknown()),
        };
        let rard = match parts.get(2) {
            None => false,
            Some(&"rard") => true,
            Some(_) => return Err(unknown()),
        };
        Ok(preset(problem, backbone, rard))
    }
}

pub fn preset_names() -> Vec<String> {
    let mut out = Vec::new();
    for id in ProblemId::ALL {
        for b in ["kan", "mlp"] {
            out.push(format!("{id}-{b}"));
            out.push(format!("{id}-{b}-rard"));
        }
    }
    out
}

/// Schedules and point counts of the benchmark experiments.
pub fn preset(problem: ProblemId, backbone: BackboneKind, rard: bool) -> ExperimentConfig {
    // (N₁, N₂, N_Γ, N_∂Ω₁, N_∂Ω₂), steps, warmup, period, k, c, pool multiplier, KAN width, G
    let (counts, steps, warmup, period, k, c, pool, kan_width, grid) = match problem {
        ProblemId::E1 => ((200, 500, 300, 0, 800), 40_000, 20_000, 2_000, 2.0, 0.0, 6, 3, 10),
        ProblemId::E4 => ((300, 500, 300, 0, 800), 30_000, 20_000, 1_000, 2.0, 1.0, 5, 3, 5),
        ProblemId::E5 => ((300, 500, 300, 100, 800), 40_000, 20_000, 2_000, 2.0, 0.0, 11, 5, 5),
        ProblemId::E6 => ((300, 500, 300, 100, 300), 40_000, 20_000, 2_000, 2.0, 0.0, 5, 5, 5),
    };
    let widths = match backbone {
        BackboneKind::Kan => vec![2, kan_width, kan_width, kan_width, 1],
        BackboneKind::Mlp => vec![2, 20, 20, 20, 1],
    };
    ExperimentConfig {
        problem,
        backbone,
        widths,
        grid_intervals: grid,
        spline_order: 3,
        sampling: SamplingPlan {
            n_interior1: counts.0,
            n_interior2: counts.1,
            n_interface: counts.2,
            n_boundary1: counts.3,
            n_boundary2: counts.4,
        },
        train: TrainConfig {
            total_steps: steps,
            log_period: 100,
            checkpoint_period: 5_000,
            adam: Default::default(),
            weights: Default::default(),
            rard: rard.then_some(RardConfig {
                k,
                c,
                warmup_steps: warmup,
                resample_period: period,
                pool_multiplier: pool,
            }),
            seed: 0,
        },
        n_test: crate::reporting::N_TEST_INTERIOR,
        output_dir: None,
        seed: 0,
        collocation_seed: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate_and_round_trip() {
        for name in preset_names() {
            let cfg = ExperimentConfig::preset(&name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg, "{name}");
        }
    }

    #[test]
    fn e1_preset_counts() {
        let cfg = ExperimentConfig::preset("e1-kan-rard").unwrap();
        assert_eq!(cfg.widths, vec![2, 3, 3, 3, 1]);
        assert_eq!(cfg.parameter_count(), 2 * 405);
        let r = cfg.train.rard.unwrap();
        assert_eq!((r.warmup_steps, r.resample_period, r.k, r.c), (20_000, 2_000, 2.0, 0.0));
        assert_eq!(cfg.run_name(), "e1_kan_rard");
        assert_eq!(ExperimentConfig::preset("e1-mlp").unwrap().parameter_count(), 2 * 921);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::preset("e2-kan").is_err());
        assert!(ExperimentConfig::preset("e1-cnn").is_err());
        let mut cfg = ExperimentConfig::preset("e1-kan").unwrap();
        cfg.sampling.n_interior1 = 0;
        assert_eq!(cfg.validate().unwrap_err().field, "sampling.n_interior1");
        let json = ExperimentConfig::preset("e1-kan").unwrap().to_json().replacen('{', "{\"bogus\": 1,", 1);
        assert!(ExperimentConfig::from_json(&json).is_err());
    }

    #[test]
    fn step_override_keeps_config_valid() {
        let mut cfg = ExperimentConfig::preset("e4-mlp").unwrap();
        cfg.set_total_steps(250);
        assert_eq!(cfg.train.log_period, 50);
        cfg.validate().unwrap();
        cfg.set_total_steps(1200);
        assert_eq!(cfg.train.log_period, 50);
        cfg.set_total_steps(0);
        cfg.validate().unwrap();
    }
}
