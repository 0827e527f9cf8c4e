//! TOML experiment description.

use std::fmt;
use std::path::{Path, PathBuf};

use fedbandit::agents::ScheduleOptions;
use fedbandit::par::Execution;
use fedbandit::sim::{Algorithm, RegretMode};
use serde::Deserialize;

/// Environment variable naming the MovieLens directory when the config does not.
pub const MOVIELENS_ENV: &str = "FEDBANDIT_MOVIELENS_DIR";

/// A configuration problem, reported with the dotted path of the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() || self.field == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// One network, one or more algorithms.
    Synthetic,
    /// Complete, grid and random geometric graphs of one size.
    SigmaSweep,
    /// Ratings-derived losses on a complete graph over the cohort.
    Movielens,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "yes")]
    pub plot: bool,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default)]
    pub schedule: ScheduleOptions,
    #[serde(default)]
    pub network: Network,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub movielens: Movielens,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Simulation {
    pub algorithms: Vec<Algorithm>,
    pub arms: usize,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub regret_mode: RegretMode,
    pub execution: Execution,
    pub gucb_alpha: f64,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            algorithms: vec![Algorithm::FedExp3, Algorithm::Exp3],
            arms: 20,
            horizon: 3000,
            runs: 10,
            seed: 0,
            regret_mode: RegretMode::Realized,
            execution: Execution::default(),
            gucb_alpha: fedbandit::agents::GUCB_ALPHA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Complete,
    Grid,
    Rgg,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Network {
    pub kind: NetworkKind,
    pub nodes: usize,
    pub radius: f64,
    pub graph_seed: u64,
    /// Edge list for `kind = "file"`.
    pub edge_list: Option<PathBuf>,
    /// Dense gossip matrix; the max-degree matrix is used when absent.
    pub gossip_matrix: Option<PathBuf>,
}

impl Default for Network {
    fn default() -> Self {
        Self {
            kind: NetworkKind::Grid,
            nodes: 36,
            radius: 0.5,
            graph_seed: 7,
            edge_list: None,
            gossip_matrix: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentKind {
    ActivatedBernoulli,
    Constant,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environment {
    pub kind: EnvironmentKind,
    /// Fixed tensor seed; a fresh tensor per run when absent.
    pub seed: Option<u64>,
    /// Loss of every arm for `kind = "constant"`.
    pub value: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            kind: EnvironmentKind::ActivatedBernoulli,
            seed: None,
            value: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub nodes: usize,
    pub radii: Vec<f64>,
    pub graph_seed: u64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            nodes: 36,
            radii: vec![0.3, 0.5, 0.7, 0.9],
            graph_seed: 7,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Movielens {
    /// Directory with `ratings.csv` and `movies.csv`.
    pub dir: Option<PathBuf>,
    /// Keep only the first this many qualifying users.
    pub agents: Option<usize>,
    /// Keep only the first this many ratings per user and genre.
    pub max_ratings: Option<usize>,
    /// Defaults to the longest rating sequence in the cohort.
    pub horizon: Option<usize>,
}

impl Config {
    /// Parses TOML, naming the field of the first type or value error.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| ConfigError::new("", e.to_string().trim_end()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::new(field, e.into_inner().message())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut().filter(|p| p.is_relative()) {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.network.edge_list);
        rebase(&mut cfg.network.gossip_matrix);
        rebase(&mut cfg.movielens.dir);
        Ok(cfg)
    }

    /// Checks that the file cannot express: ranges and cross-field rules.
    pub fn check(&self) -> Result<(), ConfigError> {
        let sim = &self.simulation;
        if sim.algorithms.is_empty() {
            return Err(ConfigError::new(
                "simulation.algorithms",
                "at least one algorithm is required",
            ));
        }
        if let Some(dup) = sim
            .algorithms
            .iter()
            .enumerate()
            .find(|(i, a)| sim.algorithms[..*i].contains(a))
        {
            return Err(ConfigError::new(
                "simulation.algorithms",
                format!("{} listed twice", dup.1),
            ));
        }
        if self.experiment != Experiment::Movielens && sim.arms < 2 {
            return Err(ConfigError::new("simulation.arms", "need at least 2 arms"));
        }
        if self.experiment != Experiment::Movielens && sim.horizon == 0 {
            return Err(ConfigError::new("simulation.horizon", "must be positive"));
        }
        if sim.runs == 0 {
            return Err(ConfigError::new("simulation.runs", "must be positive"));
        }
        if !(sim.gucb_alpha > 0.0 && sim.gucb_alpha.is_finite()) {
            return Err(ConfigError::new(
                "simulation.gucb_alpha",
                "must be positive",
            ));
        }
        let s = &self.schedule;
        if !(s.gamma_cap > 0.0 && s.gamma_cap <= 1.0) {
            return Err(ConfigError::new("schedule.gamma_cap", "must lie in (0, 1]"));
        }
        if !(s.exploration_scale > 0.0 && s.exploration_scale.is_finite()) {
            return Err(ConfigError::new(
                "schedule.exploration_scale",
                "must be positive",
            ));
        }
        match self.experiment {
            Experiment::Synthetic => self.check_network()?,
            Experiment::SigmaSweep => {
                let side = (self.sweep.nodes as f64).sqrt().round() as usize;
                if self.sweep.nodes < 4 || side * side != self.sweep.nodes {
                    return Err(ConfigError::new(
                        "sweep.nodes",
                        "must be a perfect square of at least 4",
                    ));
                }
                if let Some(r) = self
                    .sweep
                    .radii
                    .iter()
                    .find(|r| !(**r > 0.0 && r.is_finite()))
                {
                    return Err(ConfigError::new(
                        "sweep.radii",
                        format!("radius {r} must be positive"),
                    ));
                }
            }
            Experiment::Movielens => {
                if self.environment.kind != EnvironmentKind::ActivatedBernoulli
                    || self.environment.seed.is_some()
                {
                    return Err(ConfigError::new(
                        "environment",
                        "not used by the movielens experiment",
                    ));
                }
                if self.movielens.agents.is_some_and(|n| n < 2) {
                    return Err(ConfigError::new(
                        "movielens.agents",
                        "need at least 2 agents",
                    ));
                }
                if self.movielens.max_ratings == Some(0) {
                    return Err(ConfigError::new(
                        "movielens.max_ratings",
                        "must be positive",
                    ));
                }
                let dir = self.movielens_dir()?;
                for f in ["ratings.csv", "movies.csv"] {
                    if !dir.join(f).is_file() {
                        return Err(ConfigError::new(
                            "movielens.dir",
                            format!("{} not found", dir.join(f).display()),
                        ));
                    }
                }
            }
        }
        if self.environment.kind == EnvironmentKind::Constant
            && !(0.0..=1.0).contains(&self.environment.value)
        {
            return Err(ConfigError::new("environment.value", "must lie in [0, 1]"));
        }
        Ok(())
    }

    fn check_network(&self) -> Result<(), ConfigError> {
        let net = &self.network;
        match net.kind {
            NetworkKind::Complete | NetworkKind::Rgg if net.nodes < 2 => {
                return Err(ConfigError::new("network.nodes", "need at least 2 nodes"));
            }
            NetworkKind::Grid => {
                let side = (net.nodes as f64).sqrt().round() as usize;
                if net.nodes < 4 || side * side != net.nodes {
                    return Err(ConfigError::new(
                        "network.nodes",
                        "a grid needs a perfect square of at least 4",
                    ));
                }
            }
            NetworkKind::Rgg if !(net.radius > 0.0 && net.radius.is_finite()) => {
                return Err(ConfigError::new("network.radius", "must be positive"));
            }
            NetworkKind::File => match &net.edge_list {
                None => {
                    return Err(ConfigError::new(
                        "network.edge_list",
                        "required when kind = \"file\"",
                    ))
                }
                Some(p) if !p.is_file() => {
                    return Err(ConfigError::new(
                        "network.edge_list",
                        format!("{} not found", p.display()),
                    ));
                }
                _ => {}
            },
            _ => {}
        }
        if let Some(p) = net.gossip_matrix.as_ref().filter(|p| !p.is_file()) {
            return Err(ConfigError::new(
                "network.gossip_matrix",
                format!("{} not found", p.display()),
            ));
        }
        Ok(())
    }

    /// The dataset root: the config value, else the environment variable.
    pub fn movielens_dir(&self) -> Result<PathBuf, ConfigError> {
        self.movielens
            .dir
            .clone()
            .or_else(|| std::env::var_os(MOVIELENS_ENV).map(PathBuf::from))
            .ok_or_else(|| {
                ConfigError::new(
                    "movielens.dir",
                    format!("not set and {MOVIELENS_ENV} is unset"),
                )
            })
    }
}
