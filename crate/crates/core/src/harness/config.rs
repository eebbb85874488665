//! TOML experiment configuration.
//!
//! ```toml
//! horizon = 20000
//! algorithm = "graph_ftrl"          # or "tsallis_inf"
//! seeds = 20                        # count (seeds 0..20) or an explicit list
//! trace_detail = "summary"          # or "full"
//!
//! [graph]
//! source = "disjoint_cliques"       # file | complete | edgeless | cycle | disjoint_cliques | erdos_renyi
//! sizes = [2, 2, 2, 2, 2]
//!
//! [cover]
//! method = "greedy"                 # greedy | exact | file
//!
//! [environment]
//! regime = "stochastic"
//! means = [0.25, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]
//! corruption = { strategy = "flip_best", budget = 200.0 }
//!
//! [monitors]
//! stability_ratio = true
//! shifted_loss = true
//! bound_rhs = true
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{alpha_for_conditional_floor, EtaSchedule};
use crate::environments::{
    load_loss_csv, AdversarialSpec, CorruptionSpec, CorruptionStrategy, Family, Regime, StochasticSpec,
};
use crate::error::{Error, Result};
use crate::graph::{exact_min_cover, greedy_clique_cover, parse_graph, CliqueCover, FeedbackGraph};
use crate::harness::run::{Algorithm, Monitors, Scenario, TraceDetail};
use crate::learner::default_params;

pub const DEFAULT_SEED_COUNT: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub trace_detail: TraceDetail,
    pub graph: GraphConfig,
    #[serde(default)]
    pub cover: CoverConfig,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub monitors: Monitors,
    #[serde(default)]
    pub params: ParamsOverride,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_algorithm() -> Algorithm {
    Algorithm::GraphFtrl
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Count(DEFAULT_SEED_COUNT)
    }
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Count(c) => (0..*c).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphConfig {
    File { path: PathBuf },
    Complete { n: usize },
    Edgeless { n: usize },
    Cycle { n: usize },
    DisjointCliques { sizes: Vec<usize> },
    ErdosRenyi { n: usize, p: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    #[default]
    Greedy,
    Exact,
    /// The `clique` lines of the graph file.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverConfig {
    #[serde(default)]
    pub method: CoverMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    #[default]
    Bernoulli,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Stochastic {
        means: Vec<f64>,
        #[serde(default)]
        family: FamilyName,
        /// Interval width of the uniform family.
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default)]
        corruption: Option<CorruptionSpec>,
    },
    Adversarial {
        pattern: PatternConfig,
    },
}

fn default_width() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternConfig {
    Alternating {
        period: usize,
        #[serde(default = "default_arms")]
        arms: [usize; 2],
        #[serde(default)]
        low: f64,
        #[serde(default = "default_high")]
        high: f64,
    },
    Sinusoidal {
        period: f64,
        amplitude: f64,
    },
    File {
        path: PathBuf,
    },
}

fn default_arms() -> [usize; 2] {
    [0, 1]
}

fn default_high() -> f64 {
    1.0
}

/// Replaces individual default parameters (`alpha = 2(ln^2(NT)+1)`, `beta = 9`,
/// `gamma = 1/(NT)`, `eta_t = 1/sqrt(t)`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsOverride {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    /// Constant step size instead of `1/sqrt(t)`.
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// A parsed config together with the directory relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = Self::from_toml(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, base_dir })
    }

    /// Builds the graph, cover, environment and parameters, and checks that they fit together.
    /// Also returns warnings about settings outside the range the theory covers.
    pub fn resolve(&self, base_dir: &Path) -> Result<(Scenario, Vec<String>)> {
        let mut warnings = Vec::new();
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.seeds.to_vec().is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let (graph, file_cover) = self.build_graph(base_dir)?;
        let cover = match self.cover.method {
            CoverMethod::Greedy => greedy_clique_cover(&graph),
            CoverMethod::Exact => exact_min_cover(&graph)?,
            CoverMethod::File => file_cover
                .ok_or_else(|| Error::Config("cover method `file` needs `clique` lines in a graph file".into()))?,
        };
        let n = graph.num_arms();
        let regime = self.build_regime(n, base_dir)?;

        let mut params = default_params(n, self.horizon);
        let o = self.params;
        params.alpha = o.alpha.unwrap_or(params.alpha);
        params.beta = o.beta.unwrap_or(params.beta);
        params.gamma = o.gamma.unwrap_or(params.gamma);
        if let Some(eta) = o.eta {
            params.eta = EtaSchedule::Constant(eta);
        }
        if params.gamma > 0.0 && params.alpha < alpha_for_conditional_floor(params.gamma) {
            warnings.push(format!(
                "alpha = {} is below 2(1 + ln^2(1/gamma)) = {}; the regularizer may be nonconvex",
                params.alpha,
                alpha_for_conditional_floor(params.gamma)
            ));
        }

        let scenario = Scenario {
            graph,
            cover,
            regime,
            horizon: self.horizon,
            algorithm: self.algorithm,
            params,
            monitors: self.monitors,
            detail: self.trace_detail,
        };
        scenario.validate()?;
        Ok((scenario, warnings))
    }

    fn build_graph(&self, base_dir: &Path) -> Result<(FeedbackGraph, Option<CliqueCover>)> {
        let graph = match &self.graph {
            GraphConfig::File { path } => {
                let path = base_dir.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read graph {}: {e}", path.display())))?;
                let doc = parse_graph(&text)?;
                return Ok((doc.graph, doc.cover));
            }
            GraphConfig::Complete { n } => FeedbackGraph::complete(*n)?,
            GraphConfig::Edgeless { n } => FeedbackGraph::edgeless(*n)?,
            GraphConfig::Cycle { n } => FeedbackGraph::cycle(*n)?,
            GraphConfig::DisjointCliques { sizes } => FeedbackGraph::disjoint_cliques(sizes)?,
            GraphConfig::ErdosRenyi { n, p, seed } => {
                FeedbackGraph::erdos_renyi(*n, *p, &mut ChaCha8Rng::seed_from_u64(*seed))?
            }
        };
        Ok((graph, None))
    }

    fn build_regime(&self, n: usize, base_dir: &Path) -> Result<Regime> {
        Ok(match &self.environment {
            EnvironmentConfig::Stochastic { means, family, width, corruption } => {
                if means.len() != n {
                    return Err(Error::Config(format!("{} means for a graph with {n} arms", means.len())));
                }
                let family = match family {
                    FamilyName::Bernoulli => Family::Bernoulli,
                    FamilyName::Uniform => Family::Uniform { width: *width },
                };
                let corruption = corruption.unwrap_or(CorruptionSpec::none());
                if corruption.strategy == CorruptionStrategy::None && corruption.budget > 0.0 {
                    return Err(Error::Config("corruption budget given with strategy `none`".into()));
                }
                Regime::Stochastic { spec: StochasticSpec::new(means.clone(), family)?, corruption }
            }
            EnvironmentConfig::Adversarial { pattern } => Regime::Adversarial(match pattern {
                PatternConfig::Alternating { period, arms, low, high } => {
                    AdversarialSpec::Alternating { period: *period, arms: (arms[0], arms[1]), low: *low, high: *high }
                }
                PatternConfig::Sinusoidal { period, amplitude } => {
                    AdversarialSpec::Sinusoidal { period: *period, amplitude: *amplitude }
                }
                PatternConfig::File { path } => {
                    AdversarialSpec::Fixed { losses: load_loss_csv(&base_dir.join(path))? }
                }
            }),
        })
    }
}
