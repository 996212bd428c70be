//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use element_core::agents::{AgentConfig, MemoryBackend, RunConfig, ScheduleConfig};
use element_core::encoder::FixedEncoder;
use element_core::entropy::{Estimator, KernelConfig};
use element_core::envs::{Maze, PointMassConfig};
use element_core::knn_graph::SearchConfig;
use element_core::rewards::{EpisodicMode, LifelongDistance, RewardConfig};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("invalid value for `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentKind {
    Maze,
    Pointmass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Kde,
    Knn,
    Renyi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodicKind {
    PerEpisode,
    Tabular,
    KnnSmoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    KVectorNorm,
    KthDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Graph,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Steps per episode; the environment's own default when absent.
    pub episode_len: Option<usize>,
    /// Maze layout file; the bundled 20×20 maze when absent.
    pub maze_file: Option<PathBuf>,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub reward: RewardSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("element-out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub kind: EstimatorKind,
    pub sigma: f64,
    pub k: usize,
    pub alpha: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection {
            kind: EstimatorKind::Kde,
            sigma: 1.0,
            k: 3,
            alpha: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub beta: f64,
    pub k_lifelong: usize,
    /// `tabular` for the maze and `per_episode` for the point-mass when absent.
    pub episodic: Option<EpisodicKind>,
    pub smoothing_k: usize,
    pub lifelong_distance: DistanceKind,
    pub use_episodic: bool,
}

impl Default for RewardSection {
    fn default() -> Self {
        RewardSection {
            beta: 0.5,
            k_lifelong: 3,
            episodic: None,
            smoothing_k: 3,
            lifelong_distance: DistanceKind::KVectorNorm,
            use_episodic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub update_interval: u64,
    pub update_steps: u64,
    pub total_steps: u64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let s = ScheduleConfig::default();
        ScheduleSection {
            update_interval: s.update_interval,
            update_steps: s.update_steps,
            total_steps: s.total_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub r1: usize,
    pub r2: usize,
    pub depth: usize,
    /// Defaults to `reward.k_lifelong`.
    pub graph_degree: Option<usize>,
    /// `exact` for the maze and `graph` for the point-mass when absent.
    pub memory: Option<MemoryKind>,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = SearchConfig::default();
        SearchSection {
            r1: s.greedy_steps,
            r2: s.restarts,
            depth: s.depth,
            graph_degree: None,
            memory: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub updates_per_step: usize,
}

impl Default for AgentSection {
    fn default() -> Self {
        let a = AgentConfig::default();
        AgentSection {
            learning_rate: a.learning_rate,
            gamma: a.gamma,
            epsilon_start: a.epsilon_start,
            epsilon_end: a.epsilon_end,
            batch_size: a.batch_size,
            replay_capacity: a.replay_capacity,
            updates_per_step: a.updates_per_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    /// 1 for the maze and 0.05 for the point-mass when absent.
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub eval_every: usize,
    /// First episode that may be evaluated.
    pub eval_from: usize,
    pub snapshot_episodes: Vec<usize>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            eval_every: 10,
            eval_from: 1,
            snapshot_episodes: vec![5, 50, 300],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(field("seeds", "at least one seed is required"));
        }
        if self.episode_len == Some(0) {
            return Err(field("episode_len", "must be >= 1"));
        }
        if self.maze_file.is_some() && self.environment != EnvironmentKind::Maze {
            return Err(field("maze_file", "only valid with environment = \"maze\""));
        }

        let e = &self.estimator;
        positive("estimator.sigma", e.sigma)?;
        if e.k == 0 {
            return Err(field("estimator.k", "must be >= 1"));
        }
        if !(e.alpha.is_finite() && e.alpha > 0.0) || e.alpha == 1.0 {
            return Err(field("estimator.alpha", format!("must be positive and != 1, got {}", e.alpha)));
        }

        let r = &self.reward;
        if !(r.beta.is_finite() && r.beta >= 0.0) {
            return Err(field("reward.beta", format!("must be >= 0, got {}", r.beta)));
        }
        if r.k_lifelong == 0 {
            return Err(field("reward.k_lifelong", "must be >= 1"));
        }
        if r.smoothing_k == 0 {
            return Err(field("reward.smoothing_k", "must be >= 1"));
        }

        let s = &self.schedule;
        for (name, v) in [
            ("schedule.update_interval", s.update_interval),
            ("schedule.update_steps", s.update_steps),
            ("schedule.total_steps", s.total_steps),
        ] {
            if v == 0 {
                return Err(field(name, "must be >= 1"));
            }
        }
        if s.update_steps > s.update_interval {
            return Err(field(
                "schedule.update_steps",
                format!("{} exceeds update_interval {}", s.update_steps, s.update_interval),
            ));
        }

        let g = &self.search;
        for (name, v) in [("search.r1", g.r1), ("search.r2", g.r2), ("search.depth", g.depth)] {
            if v == 0 {
                return Err(field(name, "must be >= 1"));
            }
        }
        if let Some(d) = g.graph_degree {
            if d < r.k_lifelong {
                return Err(field(
                    "search.graph_degree",
                    format!("{d} is below reward.k_lifelong {}", r.k_lifelong),
                ));
            }
        }

        let a = &self.agent;
        if !(a.learning_rate > 0.0 && a.learning_rate <= 1.0) {
            return Err(field("agent.learning_rate", format!("must be in (0, 1], got {}", a.learning_rate)));
        }
        if !(0.0..=1.0).contains(&a.gamma) {
            return Err(field("agent.gamma", format!("must be in [0, 1], got {}", a.gamma)));
        }
        for (name, v) in [("agent.epsilon_start", a.epsilon_start), ("agent.epsilon_end", a.epsilon_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(field(name, format!("must be in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("agent.batch_size", a.batch_size),
            ("agent.replay_capacity", a.replay_capacity),
        ] {
            if v == 0 {
                return Err(field(name, "must be >= 1"));
            }
        }

        if let Some(scale) = self.encoder.scale {
            positive("encoder.scale", scale)?;
        }
        if self.evaluation.eval_every == 0 {
            return Err(field("evaluation.eval_every", "must be >= 1"));
        }
        if self.evaluation.snapshot_episodes.contains(&0) {
            return Err(field("evaluation.snapshot_episodes", "episodes are numbered from 1"));
        }
        Ok(())
    }

    pub fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let maze = self.environment == EnvironmentKind::Maze;
        let kernel = KernelConfig::new(self.estimator.sigma).map_err(|e| field("estimator.sigma", e.to_string()))?;
        let estimator = match self.estimator.kind {
            EstimatorKind::Kde => Estimator::Kde { kernel },
            EstimatorKind::Knn => Estimator::Knn { k: self.estimator.k },
            EstimatorKind::Renyi => Estimator::Renyi {
                alpha: self.estimator.alpha,
                kernel,
            },
        };
        let episodic_mode = match self.reward.episodic {
            Some(EpisodicKind::PerEpisode) => EpisodicMode::PerEpisodeConstant,
            Some(EpisodicKind::Tabular) => EpisodicMode::TabularRunningMean,
            Some(EpisodicKind::KnnSmoothed) => EpisodicMode::KnnSmoothed {
                k: self.reward.smoothing_k,
            },
            None if maze => EpisodicMode::TabularRunningMean,
            None => EpisodicMode::PerEpisodeConstant,
        };
        let memory = match self.search.memory {
            Some(MemoryKind::Graph) => MemoryBackend::Graph,
            Some(MemoryKind::Exact) => MemoryBackend::Exact,
            None if maze => MemoryBackend::Exact,
            None => MemoryBackend::Graph,
        };
        let a = &self.agent;
        let cfg = RunConfig {
            agent: AgentConfig {
                learning_rate: a.learning_rate,
                gamma: a.gamma,
                epsilon_start: a.epsilon_start,
                epsilon_end: a.epsilon_end,
                batch_size: a.batch_size,
                replay_capacity: a.replay_capacity,
                updates_per_step: a.updates_per_step,
            },
            reward: RewardConfig {
                beta: self.reward.beta,
                k_lifelong: self.reward.k_lifelong,
                episodic_mode,
                lifelong_distance: match self.reward.lifelong_distance {
                    DistanceKind::KVectorNorm => LifelongDistance::KVectorNorm,
                    DistanceKind::KthDistance => LifelongDistance::KthDistance,
                },
                ..RewardConfig::default()
            },
            schedule: ScheduleConfig {
                update_interval: self.schedule.update_interval,
                update_steps: self.schedule.update_steps,
                total_steps: self.schedule.total_steps,
            },
            search: SearchConfig {
                greedy_steps: self.search.r1,
                restarts: self.search.r2,
                depth: self.search.depth,
            },
            memory,
            graph_degree: self.search.graph_degree.unwrap_or(self.reward.k_lifelong),
            estimator,
            use_episodic: self.reward.use_episodic,
            eval_every: self.evaluation.eval_every,
            eval_from: self.evaluation.eval_from,
            snapshot_episodes: self.evaluation.snapshot_episodes.clone(),
        };
        cfg.validate().map_err(|e| field("config", e.to_string()))?;
        Ok(cfg)
    }

    pub fn encoder(&self) -> Result<FixedEncoder, ConfigError> {
        let default = match self.environment {
            EnvironmentKind::Maze => 1.0,
            EnvironmentKind::Pointmass => 0.05,
        };
        FixedEncoder::identity(2)
            .and_then(|e| e.with_scale(self.encoder.scale.unwrap_or(default)))
            .map_err(|e| field("encoder.scale", e.to_string()))
    }

    pub fn pointmass(&self) -> PointMassConfig {
        let mut pm = PointMassConfig::default();
        if let Some(len) = self.episode_len {
            pm.episode_len = len;
        }
        pm
    }

    /// The maze to run, read from `maze_file` when given.
    pub fn maze(&self) -> anyhow::Result<Maze> {
        let mut maze = match &self.maze_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| anyhow::anyhow!("cannot read maze file {}: {e}", path.display()))?;
                Maze::parse(&text)?
            }
            None => Maze::bundled(),
        };
        if let Some(len) = self.episode_len {
            maze.max_steps = len;
        }
        Ok(maze)
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field(name, format!("must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn minimal_config_uses_environment_defaults() {
        let cfg = parse("environment = \"maze\"").unwrap();
        let run = cfg.run_config().unwrap();
        assert_eq!(run.memory, MemoryBackend::Exact);
        assert_eq!(run.reward.episodic_mode, EpisodicMode::TabularRunningMean);
        assert_eq!(cfg.seeds, vec![0]);

        let cfg = parse("environment = \"pointmass\"").unwrap();
        let run = cfg.run_config().unwrap();
        assert_eq!(run.memory, MemoryBackend::Graph);
        assert_eq!(run.reward.episodic_mode, EpisodicMode::PerEpisodeConstant);
        assert_eq!(run.schedule, ScheduleConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse("environment = \"maze\"\nbetta = 1"), Err(ConfigError::Parse(_))));
        assert!(matches!(
            parse("environment = \"maze\"\n[reward]\nbetta = 1"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("[reward]\nbeta = -1.0", "reward.beta"),
            ("[estimator]\nsigma = 0.0", "estimator.sigma"),
            ("[estimator]\nalpha = 1.0", "estimator.alpha"),
            ("[schedule]\nupdate_steps = 10\nupdate_interval = 5", "schedule.update_steps"),
            ("[search]\nr1 = 0", "search.r1"),
            ("[search]\ngraph_degree = 2", "search.graph_degree"),
            ("[agent]\ngamma = 1.5", "agent.gamma"),
            ("[encoder]\nscale = -2.0", "encoder.scale"),
            ("[evaluation]\neval_every = 0", "evaluation.eval_every"),
            ("seeds = []", "seeds"),
        ];
        for (body, name) in cases {
            let text = format!("environment = \"pointmass\"\n{body}");
            match parse(&text) {
                Err(ConfigError::Field { field, .. }) => assert_eq!(field, name, "{body}"),
                other => panic!("{body}: expected field error, got {other:?}"),
            }
        }
    }
}
