use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{UcbConfig, UcbMode};
use crate::classifier::ClassifierConfig;
use crate::error::{Error, Result};
use crate::objectives::{CutInObjective, CutInSpec, GaussianObjective, Objective};
use crate::stopping::StopConfig;
use crate::tree::TreeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    #[serde(rename = "gaussian-2d")]
    Gaussian2d,
    #[serde(rename = "gaussian-4d")]
    Gaussian4d,
    #[serde(rename = "cutin-3d")]
    CutIn3d,
    /// Supplied by the caller (library or FFI); the CLI cannot build it.
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Budget {
    Fixed {
        samples: usize,
    },
    Stopping {
        max_samples: usize,
        #[serde(flatten)]
        criteria: StopConfig,
    },
}

impl Budget {
    pub fn max_samples(&self) -> usize {
        match *self {
            Budget::Fixed { samples } => samples,
            Budget::Stopping { max_samples, .. } => max_samples,
        }
    }

    pub fn stopping(&self) -> Option<&StopConfig> {
        match self {
            Budget::Fixed { .. } => None,
            Budget::Stopping { criteria, .. } => Some(criteria),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UcbSettings {
    pub c_p: f64,
    /// Sample count at which boundary dropout ends; defaults to 0.4 of the
    /// budget.
    pub dropout_k: Option<usize>,
    pub mode: UcbMode,
    pub batch_size: usize,
}

impl Default for UcbSettings {
    fn default() -> Self {
        let base = UcbConfig::for_budget(1);
        Self {
            c_p: base.c_p,
            dropout_k: None,
            mode: base.mode,
            batch_size: base.batch_size,
        }
    }
}

impl UcbSettings {
    pub fn resolve(&self, budget: usize) -> UcbConfig {
        let mut cfg = UcbConfig::for_budget(budget);
        cfg.c_p = self.c_p;
        cfg.mode = self.mode;
        cfg.batch_size = self.batch_size;
        if let Some(k) = self.dropout_k {
            cfg.dropout_k = k;
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSettings {
    /// Drive the search with classifier losses; defaults to whether the
    /// objective declares a behavior model.
    pub enabled: Option<bool>,
    #[serde(flatten)]
    pub model: ClassifierConfig,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            enabled: None,
            model: ClassifierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSettings {
    /// Ground-truth grid points per axis; `None` skips grid scoring.
    pub grid_resolution: Option<usize>,
    /// Grid points per axis for the hazard-ratio estimate; `None` skips it.
    pub hazard_ratio_resolution: Option<usize>,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            grid_resolution: None,
            hazard_ratio_resolution: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub objective: ObjectiveKind,
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Record the full score breakdown of every descent.
    #[serde(default)]
    pub trace: bool,
    /// Uniform samples before the first tree; defaults to 10 per dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_samples: Option<usize>,
    /// Overrides for the cut-in scenario parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutin: Option<CutInSpec>,
    pub budget: Budget,
    #[serde(default)]
    pub ucb: UcbSettings,
    #[serde(default)]
    pub classifier: ClassifierSettings,
    /// Partition settings; defaults to [`TreeConfig::for_dim`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeConfig>,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

pub const PRESETS: &[&str] = &[
    "gaussian-2d",
    "gaussian-4d",
    "gaussian-4d-full",
    "cutin-3d",
    "smoke",
];

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Named configurations used by the experiments.
    pub fn preset(name: &str) -> Result<Self> {
        let fixed = |objective, samples, seeds: Vec<u64>, grid| Self {
            objective,
            cutin: None,
            budget: Budget::Fixed { samples },
            ucb: UcbSettings::default(),
            classifier: ClassifierSettings::default(),
            tree: None,
            initial_samples: None,
            evaluation: EvaluationSettings {
                grid_resolution: Some(grid),
                hazard_ratio_resolution: None,
            },
            seeds,
            out_dir: PathBuf::from("runs").join(name),
            trace: false,
        };
        let cfg = match name {
            "gaussian-2d" => fixed(ObjectiveKind::Gaussian2d, 900, vec![1, 2, 3, 4, 5], 200),
            "gaussian-4d" => fixed(ObjectiveKind::Gaussian4d, 10_000, vec![1, 2, 3], 41),
            "gaussian-4d-full" => fixed(ObjectiveKind::Gaussian4d, 30_000, vec![1, 2, 3], 41),
            "smoke" => fixed(ObjectiveKind::Gaussian2d, 60, vec![1], 50),
            "cutin-3d" => Self {
                budget: Budget::Stopping {
                    max_samples: 10_000,
                    criteria: StopConfig::default(),
                },
                evaluation: EvaluationSettings {
                    grid_resolution: Some(30),
                    hazard_ratio_resolution: Some(30),
                },
                ucb: UcbSettings {
                    c_p: 2.0,
                    ..UcbSettings::default()
                },
                ..fixed(ObjectiveKind::CutIn3d, 0, vec![1], 30)
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.budget.max_samples() == 0 {
            return Err(Error::Config("sampling budget must be positive".into()));
        }
        if let Some(stop) = self.budget.stopping() {
            stop.validate()?;
        }
        self.ucb.resolve(self.budget.max_samples()).validate()?;
        if self.classifier.model.k == 0 {
            return Err(Error::Config("classifier k must be >= 1".into()));
        }
        if let Some(t) = &self.tree {
            if t.leaf_min == 0 || !(0.0..=1.0).contains(&t.min_split_accuracy) {
                return Err(Error::Config(
                    "tree needs leaf_min >= 1 and accuracy in [0, 1]".into(),
                ));
            }
        }
        if matches!(self.evaluation.grid_resolution, Some(r) if r < 2) {
            return Err(Error::Config(
                "evaluation grid needs at least 2 points per axis".into(),
            ));
        }
        if matches!(self.evaluation.hazard_ratio_resolution, Some(0)) {
            return Err(Error::Config(
                "hazard-ratio grid needs at least 1 point per axis".into(),
            ));
        }
        Ok(())
    }

    /// Builds the configured objective. `custom` has no built-in objective.
    pub fn build_objective(&self) -> Result<Box<dyn Objective + Send + Sync>> {
        Ok(match self.objective {
            ObjectiveKind::Gaussian2d => Box::new(GaussianObjective::standard(2)?),
            ObjectiveKind::Gaussian4d => Box::new(GaussianObjective::standard(4)?),
            ObjectiveKind::CutIn3d => {
                Box::new(CutInObjective::new(self.cutin.clone().unwrap_or_default())?)
            }
            ObjectiveKind::Custom => {
                return Err(Error::Config(
                    "objective \"custom\" must be supplied by the caller".into(),
                ))
            }
        })
    }

    /// Output directory, honoring the `HAZARD_SEARCH_OUT` override.
    pub fn resolved_out_dir(&self) -> PathBuf {
        std::env::var_os("HAZARD_SEARCH_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            let text = cfg.to_toml_string().unwrap();
            assert_eq!(
                RunConfig::from_toml_str(&text).unwrap(),
                cfg,
                "{name}:\n{text}"
            );
        }
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = RunConfig::from_toml_str(
            r#"
            objective = "gaussian-2d"
            seeds = [7]
            [budget]
            mode = "fixed"
            samples = 900
            "#,
        )
        .unwrap();
        assert_eq!(cfg.ucb.resolve(900).dropout_k, 360);
        assert_eq!(cfg.ucb.batch_size, 10);
        assert_eq!(cfg.classifier.model.k, 5);
        assert_eq!(cfg.out_dir, PathBuf::from("runs"));

        let stop = RunConfig::from_toml_str(
            r#"
            objective = "cutin-3d"
            seeds = [1]
            [budget]
            mode = "stopping"
            max_samples = 4000
            every = 500
            "#,
        )
        .unwrap();
        let criteria = stop.budget.stopping().unwrap();
        assert_eq!(
            (criteria.first_check, criteria.every, criteria.f_s),
            (500, 500, 0.9)
        );
    }

    #[test]
    fn rejects_bad_configs() {
        let base = "objective = \"gaussian-2d\"\n[budget]\nmode = \"fixed\"\nsamples = 10\n";
        assert!(RunConfig::from_toml_str(&format!("seeds = []\n{base}")).is_err());
        assert!(RunConfig::from_toml_str(
            "seeds = [1]\nobjective = \"gaussian-2d\"\n[budget]\nmode = \"fixed\"\nsamples = 0\n"
        )
        .is_err());
        assert!(RunConfig::from_toml_str(
            "seeds = [1]\nobjective = \"nope\"\n[budget]\nmode = \"fixed\"\nsamples = 5\n"
        )
        .is_err());
        assert!(
            RunConfig::from_toml_str(&format!("seeds = [1]\n{base}[ucb]\nbatch_size = 0\n"))
                .is_err()
        );
        let custom = RunConfig::from_toml_str(
            "seeds = [1]\nobjective = \"custom\"\n[budget]\nmode = \"fixed\"\nsamples = 5\n",
        )
        .unwrap();
        assert!(custom.build_objective().is_err());
    }
}
