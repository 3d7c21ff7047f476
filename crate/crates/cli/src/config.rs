//! Run configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use action_shapley::agent::OptimizerKind;
use action_shapley::env::{make_env, EnvParams, EnvSpec, Family, MAX_SERIES_LEN};
use action_shapley::selection::EpisodeMode;
use action_shapley::valuation::EndToEndValuationConfig;
use action_shapley::subset::MAX_POINTS;
use action_shapley::world_model::TrainConfig;
use action_shapley::AlgoParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    /// Base seed for data generation, valuation and validation.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub env: EnvSection,
    pub data: DataSection,
    pub shapley: ShapleySection,
    pub model: ModelSection,
    pub agent: AgentSection,
    pub validation: ValidationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub family: Family,
    /// Replaces the family's training grid, one configuration per point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub overrides: EnvParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Observations per training series.
    pub series_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapleySection {
    pub epsilon: u32,
    pub min_cardinality: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_f: Option<f64>,
    /// One φ column per optimizer.
    pub optimizers: Vec<OptimizerKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub num_centers: usize,
    pub width_scale: f64,
    pub ridge: f64,
    pub kmeans_iterations: usize,
    pub pre_encode: bool,
    pub encoder_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    /// Objective evaluations per gain-tuning run.
    pub budget: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSection {
    pub episodes: usize,
    pub randoms_per_episode: usize,
    pub mode: EpisodeMode,
    /// Whose φ column drives selection.
    pub optimizer: OptimizerKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            output_dir: PathBuf::from("out"),
            env: EnvSection {
                family: Family::VmRightsizing,
                grid: None,
                overrides: EnvParams::default(),
            },
            data: DataSection::default(),
            shapley: ShapleySection::default(),
            model: ModelSection::default(),
            agent: AgentSection::default(),
            validation: ValidationSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        Self { series_len: 256 }
    }
}

impl Default for ShapleySection {
    fn default() -> Self {
        let algo = AlgoParams::default();
        Self {
            epsilon: algo.epsilon,
            min_cardinality: algo.min_cardinality,
            c_f: algo.c_f,
            optimizers: vec![OptimizerKind::SacpidLike, OptimizerKind::PpopidLike],
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = EndToEndValuationConfig::default().train;
        Self {
            num_centers: t.num_centers,
            width_scale: t.width_scale,
            ridge: t.ridge,
            kmeans_iterations: t.kmeans_iterations,
            pre_encode: t.pre_encode,
            encoder_dim: t.encoder_dim,
        }
    }
}

impl Default for AgentSection {
    fn default() -> Self {
        let v = EndToEndValuationConfig::default();
        Self {
            budget: v.budget,
            horizon: v.horizon,
            repeats: v.repeats,
        }
    }
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self {
            episodes: 25,
            randoms_per_episode: 4,
            mode: EpisodeMode::default(),
            optimizer: OptimizerKind::SacpidLike,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Builds the environment and checks every section against it.
    pub fn validate(&self) -> CliResult<EnvSpec> {
        let bad = |m: String| CliError::Config(m);
        if self.version != CONFIG_VERSION {
            return Err(bad(format!("unsupported config version {}", self.version)));
        }
        let env = self.env_spec()?;
        if env.n_points() > MAX_POINTS {
            return Err(bad(format!("at most {MAX_POINTS} training points are supported")));
        }
        if self.data.series_len == 0 || self.data.series_len > MAX_SERIES_LEN {
            return Err(bad(format!("data.series_len must be in 1..={MAX_SERIES_LEN}")));
        }
        self.algo_params()
            .validate(env.n_points())
            .map_err(|e| bad(format!("shapley: {e}")))?;
        if self.shapley.optimizers.is_empty() {
            return Err(bad("shapley.optimizers must not be empty".into()));
        }
        for (i, o) in self.shapley.optimizers.iter().enumerate() {
            if self.shapley.optimizers[..i].contains(o) {
                return Err(bad(format!("shapley.optimizers lists {o} twice")));
            }
        }
        self.valuation_config(self.validation.optimizer)
            .validate()
            .map_err(|e| bad(format!("model/agent: {e}")))?;
        if self.validation.episodes == 0 {
            return Err(bad("validation.episodes must be at least 1".into()));
        }
        if !self.shapley.optimizers.contains(&self.validation.optimizer) {
            return Err(bad(format!(
                "validation.optimizer {} is not among shapley.optimizers",
                self.validation.optimizer
            )));
        }
        Ok(env)
    }

    pub fn env_spec(&self) -> CliResult<EnvSpec> {
        let mut env = make_env(self.env.family, &self.env.overrides).map_err(|e| CliError::Config(format!("env: {e}")))?;
        if let Some(grid) = &self.env.grid {
            env.grid = grid.clone();
        }
        env.validate().map_err(|e| CliError::Config(format!("env: {e}")))?;
        Ok(env)
    }

    pub fn algo_params(&self) -> AlgoParams {
        AlgoParams {
            epsilon: self.shapley.epsilon,
            c_f: self.shapley.c_f,
            min_cardinality: self.shapley.min_cardinality,
        }
    }

    pub fn valuation_config(&self, optimizer: OptimizerKind) -> EndToEndValuationConfig {
        let m = &self.model;
        EndToEndValuationConfig {
            train: TrainConfig {
                num_centers: m.num_centers,
                width_scale: m.width_scale,
                ridge: m.ridge,
                kmeans_iterations: m.kmeans_iterations,
                seed: 0,
                pre_encode: m.pre_encode,
                encoder_dim: m.encoder_dim,
            },
            optimizer,
            budget: self.agent.budget,
            horizon: self.agent.horizon,
            repeats: self.agent.repeats,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["bogus = 1", "[model]\nwidth = 2.0", "[env]\nfamily = \"k8s\"\nextra = 1"] {
            assert!(matches!(RunConfig::parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn validation_catches_bad_sections() {
        let cases = [
            "version = 2",
            "[data]\nseries_len = 0",
            "[shapley]\nepsilon = 0",
            "[shapley]\noptimizers = []",
            "[shapley]\noptimizers = [\"ppopid_like\"]",
            "[validation]\nepisodes = 0",
            "[env]\nfamily = \"vm_rightsizing\"\ngrid = [[100.0, 1.0], [2.0, 4.0]]",
            "[model]\nwidth_scale = -1.0",
        ];
        for text in cases {
            let c = RunConfig::parse(text).unwrap();
            assert!(matches!(c.validate(), Err(CliError::Config(_))), "{text}");
        }
    }
}
