//! The run configuration: one TOML document holding every knob.
//!
//! ```toml
//! [world]
//! seed = 7
//! noise_sigma = 1.0
//!
//! [experiment]
//! n_samples = 1000
//! ablation_max_k = 30
//!
//! [learners.forest]
//! n_trees = 100
//!
//! [analysis]
//! metric = "accuracy"
//! recovery = 0.98
//! ```
//!
//! `[world]` may also carry explicit `continents` and `roles` tables; when
//! absent the stock world for `seed` fills them in.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Metric;
use crate::error::{Error, Result};
use crate::harness::ProtocolConfig;
use crate::learners::LearnerSettings;
use crate::world::{validate_roles, Continent, PlantedRole, WorldConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub seed: u64,
    pub noise_sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continents: Option<Vec<Continent>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roles: Option<Vec<PlantedRole>>,
}

impl Default for WorldSection {
    fn default() -> Self {
        WorldSection { seed: 0, noise_sigma: 1.0, continents: None, roles: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    /// Metric whose mean curve defines the tipping point.
    pub metric: Metric,
    /// Fraction of the baseline mean the curve must reach.
    pub recovery: f64,
    /// Heatmap cell side in degrees.
    pub heatmap_cell_deg: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings { metric: Metric::Accuracy, recovery: 0.98, heatmap_cell_deg: 1.0 }
    }
}

impl AnalysisSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.recovery > 0.0 && self.recovery.is_finite()) {
            return Err(Error::config("analysis.recovery must be positive"));
        }
        if !(self.heatmap_cell_deg > 0.0 && self.heatmap_cell_deg.is_finite()) {
            return Err(Error::config("analysis.heatmap_cell_deg must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub world: WorldSection,
    pub experiment: ProtocolConfig,
    pub learners: LearnerSettings,
    pub analysis: AnalysisSettings,
}

impl RunConfig {
    /// Parse and validate. Syntax and type errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(roles) = &self.world.roles {
            validate_roles(roles)?;
        }
        self.experiment.validate()?;
        self.analysis.validate()?;
        self.world()?;
        Ok(())
    }

    /// The concrete world: stock continents and roles for `world.seed`,
    /// replaced by any explicitly configured ones.
    pub fn world(&self) -> Result<WorldConfig> {
        let mut world = WorldConfig::default_world(self.world.seed);
        world.noise_sigma = self.world.noise_sigma;
        if let Some(c) = &self.world.continents {
            world.continents = c.clone();
        }
        if let Some(r) = &self.world.roles {
            world.roles = r.clone();
        }
        world.validate()?;
        Ok(world)
    }

    /// Same configuration with the world spelled out in full, so the result
    /// no longer depends on the stock world generator.
    pub fn materialize(&self) -> Result<RunConfig> {
        let world = self.world()?;
        Ok(RunConfig {
            world: WorldSection {
                seed: world.seed,
                noise_sigma: world.noise_sigma,
                continents: Some(world.continents),
                roles: Some(world.roles),
            },
            ..self.clone()
        })
    }
}
