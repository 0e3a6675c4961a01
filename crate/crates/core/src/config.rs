//! Run configuration read from TOML.
//!
//! ```toml
//! model = "double-well"      # built-in name, or a path to a model file
//! seed = 42
//! out_dir = "runs/dw"
//!
//! [overrides]
//! epsilon = 1.0
//!
//! [walks]
//! num_walks_per_node = 100
//! walk_length = 9
//!
//! [embed]
//! encoder = "layered"
//! iterations = 200
//!
//! [identify]
//! theta = 0.5
//! rounds = "auto"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::{EncoderKind, TrainConfig, WalkConfig};
use crate::error::{Error, Result};
use crate::identify::{PropagationRule, Rounds, DEFAULT_RESTARTS};
use crate::markov::GridAxis;
use crate::models::file::{load_model_file, AxisSpec, RegionSpec};
use crate::models::{BuiltinModel, BuiltinOptions, Model, Region};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: String,
    seed: u64,
    out_dir: Option<PathBuf>,
    #[serde(default)]
    overrides: RawOverrides,
    #[serde(default)]
    tpt: RawTpt,
    #[serde(default)]
    walks: RawWalks,
    #[serde(default)]
    embed: RawEmbed,
    #[serde(default)]
    identify: RawIdentify,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOverrides {
    epsilon: Option<f64>,
    h: Option<f64>,
    gap_width: Option<f64>,
    axes: Option<Vec<AxisSpec>>,
    reactant: Option<RegionSpec>,
    product: Option<RegionSpec>,
    product_tail: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTpt {
    sigmas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWalks {
    num_walks_per_node: Option<i64>,
    walk_length: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmbed {
    encoder: Option<EncoderKind>,
    dimension: Option<i64>,
    hidden_layers: Option<i64>,
    hidden_width: Option<i64>,
    learning_rate: Option<f64>,
    iterations: Option<i64>,
    init_scale: Option<f64>,
    backtracking: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawRounds {
    Count(i64),
    Word(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIdentify {
    tau: Option<f64>,
    theta: Option<f64>,
    clusters: Option<i64>,
    restarts: Option<i64>,
    rounds: Option<RawRounds>,
    rule: Option<PropagationRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Builtin(BuiltinModel),
    File(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelOverrides {
    pub builtin: BuiltinOptions,
    pub reactant: Option<Region>,
    pub product: Option<Region>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyConfig {
    pub tau: f64,
    pub theta: f64,
    pub clusters: usize,
    pub restarts: usize,
    pub rounds: Rounds,
    pub rule: PropagationRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSource,
    pub overrides: ModelOverrides,
    pub sigmas: Vec<f64>,
    pub walks: WalkConfig,
    pub embed: TrainConfig,
    pub identify: IdentifyConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub const DEFAULT_SIGMAS: [f64; 3] = [0.2, 0.1, 0.05];
pub const DEFAULT_TAU: f64 = 0.02;
pub const DEFAULT_THETA: f64 = 0.5;

fn positive(field: &str, v: Option<i64>, default: usize) -> Result<usize> {
    match v {
        None => Ok(default),
        Some(x) if x >= 1 => Ok(x as usize),
        Some(_) => Err(Error::validation(field, "must be >= 1")),
    }
}

fn in_unit(field: &str, v: Option<f64>, default: f64) -> Result<f64> {
    let x = v.unwrap_or(default);
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::validation(field, "must lie in [0, 1]"));
    }
    Ok(x)
}

fn nonneg(field: &str, v: Option<f64>, default: f64) -> Result<f64> {
    let x = v.unwrap_or(default);
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::validation(field, "must be finite and >= 0"));
    }
    Ok(x)
}

impl RunConfig {
    /// Default configuration for a built-in model.
    pub fn for_builtin(model: BuiltinModel, seed: u64) -> Self {
        parse_config(&format!("model = \"{}\"\nseed = {seed}\n", model.name())).expect("defaults are valid")
    }

    pub fn builtin(&self) -> Option<BuiltinModel> {
        match self.model {
            ModelSource::Builtin(b) => Some(b),
            ModelSource::File(_) => None,
        }
    }

    /// The model with overrides applied.
    pub fn build_model(&self) -> Result<Model> {
        let mut model = match &self.model {
            ModelSource::Builtin(b) => b.build(&self.overrides.builtin)?,
            ModelSource::File(path) => {
                let o = &self.overrides.builtin;
                if o.epsilon.is_some() || o.h.is_some() || o.gap_width.is_some() || o.product_tail.is_some() {
                    return Err(Error::validation("overrides", "model files take only axes, reactant, product"));
                }
                let mut net = load_model_file(path)?;
                if let Some(axes) = &o.axes {
                    net.axes = axes.clone();
                }
                Model::Reaction(net)
            }
        };
        if let Some(r) = &self.overrides.reactant {
            model.set_reactant(r.clone())?;
        }
        if let Some(p) = &self.overrides.product {
            model.set_product(p.clone())?;
        }
        Ok(model)
    }
}

/// Parses and validates a configuration, resolving model files relative to `base`.
pub fn parse_config_in(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let model = match raw.model.parse::<BuiltinModel>() {
        Ok(b) => ModelSource::Builtin(b),
        Err(_) if raw.model.ends_with(".toml") => {
            let p = PathBuf::from(&raw.model);
            ModelSource::File(match base {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            })
        }
        Err(e) => return Err(e),
    };
    let builtin = match &model {
        ModelSource::Builtin(b) => Some(*b),
        ModelSource::File(_) => None,
    };

    let o = raw.overrides;
    let axes = o
        .axes
        .map(|a| a.iter().enumerate().map(|(k, s)| s.to_axis(&format!("overrides.axes[{k}]"))).collect::<Result<Vec<GridAxis>>>())
        .transpose()?;
    if let Some(tail) = &o.product_tail {
        if builtin != Some(BuiltinModel::Sigma32) {
            return Err(Error::validation("overrides.product_tail", "only used by sigma32"));
        }
        if tail.len() != 3 {
            return Err(Error::validation("overrides.product_tail", "needs 3 values (E, E_sigma32, sigma32_J_comp)"));
        }
    }
    let overrides = ModelOverrides {
        builtin: BuiltinOptions { epsilon: o.epsilon, h: o.h, axes, gap_width: o.gap_width, product_tail: o.product_tail },
        reactant: o.reactant.map(Region::from),
        product: o.product.map(Region::from),
    };

    let sigmas = raw.tpt.sigmas.unwrap_or_else(|| DEFAULT_SIGMAS.to_vec());
    if sigmas.is_empty() || sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::validation("tpt.sigmas", "must be a nonempty list of positive numbers"));
    }

    let wd = WalkConfig::default();
    let walks = WalkConfig {
        num_walks_per_node: positive("walks.num_walks_per_node", raw.walks.num_walks_per_node, wd.num_walks_per_node)?,
        walk_length: positive("walks.walk_length", raw.walks.walk_length, wd.walk_length)?,
        rng_seed: raw.seed,
    };

    let ed = TrainConfig::default();
    let e = raw.embed;
    let embed = TrainConfig {
        encoder: e.encoder.unwrap_or(ed.encoder),
        dimension: positive("embed.dimension", e.dimension, builtin.map_or(ed.dimension, |b| b.default_embedding_dim()))?,
        hidden_layers: positive("embed.hidden_layers", e.hidden_layers, ed.hidden_layers)?,
        hidden_width: positive("embed.hidden_width", e.hidden_width, ed.hidden_width)?,
        learning_rate: nonneg("embed.learning_rate", e.learning_rate, ed.learning_rate)?,
        iterations: match e.iterations {
            None => ed.iterations,
            Some(x) if x >= 0 => x as usize,
            Some(_) => return Err(Error::validation("embed.iterations", "must be >= 0")),
        },
        init_scale: nonneg("embed.init_scale", e.init_scale, ed.init_scale)?,
        backtracking: e.backtracking.unwrap_or(ed.backtracking),
        seed: raw.seed,
    };

    let i = raw.identify;
    let rounds = match i.rounds {
        None => Rounds::Auto,
        Some(RawRounds::Word(w)) if w == "auto" => Rounds::Auto,
        Some(RawRounds::Count(c)) if c >= 0 => Rounds::Fixed(c as usize),
        Some(_) => return Err(Error::validation("identify.rounds", "must be \"auto\" or an integer >= 0")),
    };
    let identify = IdentifyConfig {
        tau: in_unit("identify.tau", i.tau, DEFAULT_TAU)?,
        theta: in_unit("identify.theta", i.theta, DEFAULT_THETA)?,
        clusters: positive("identify.clusters", i.clusters, builtin.map_or(3, |b| b.default_clusters()))?,
        restarts: positive("identify.restarts", i.restarts, DEFAULT_RESTARTS)?,
        rounds,
        rule: i.rule.unwrap_or(DEFAULT_RULE),
    };

    Ok(RunConfig {
        model,
        overrides,
        sigmas,
        walks,
        embed,
        identify,
        seed: raw.seed,
        out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
    })
}

pub const DEFAULT_RULE: PropagationRule = PropagationRule::Accumulate;

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_in(text, None)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config_in(&std::fs::read_to_string(path)?, path.parent())
}

/// Top-level values that replace (or supply) those of a configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopLevel {
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// Parses `text` (possibly empty) after substituting the given top-level values.
pub fn parse_config_with(text: &str, base: Option<&Path>, top: &TopLevel) -> Result<RunConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    if let Some(m) = &top.model {
        table.insert("model".into(), toml::Value::String(m.clone()));
    }
    if let Some(s) = top.seed {
        let s = i64::try_from(s).map_err(|_| Error::validation("seed", "must fit in a signed 64-bit integer"))?;
        table.insert("seed".into(), toml::Value::Integer(s));
    }
    if let Some(d) = &top.out_dir {
        table.insert("out_dir".into(), toml::Value::String(d.display().to_string()));
    }
    let text = toml::to_string(&table).map_err(|e| Error::Parse(e.to_string()))?;
    parse_config_in(&text, base)
}

/// Echo of the effective configuration, for the run summary.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub model: String,
    pub seed: u64,
    pub sigmas: Vec<f64>,
    pub num_walks_per_node: usize,
    pub walk_length: usize,
    pub encoder: EncoderKind,
    pub dimension: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub init_scale: f64,
    pub backtracking: bool,
    pub tau: f64,
    pub theta: f64,
    pub clusters: usize,
    pub restarts: usize,
    pub rounds: String,
    pub rule: PropagationRule,
}

impl From<&RunConfig> for ConfigEcho {
    fn from(c: &RunConfig) -> Self {
        ConfigEcho {
            model: match &c.model {
                ModelSource::Builtin(b) => b.name().to_string(),
                ModelSource::File(p) => p.display().to_string(),
            },
            seed: c.seed,
            sigmas: c.sigmas.clone(),
            num_walks_per_node: c.walks.num_walks_per_node,
            walk_length: c.walks.walk_length,
            encoder: c.embed.encoder,
            dimension: c.embed.dimension,
            hidden_layers: c.embed.hidden_layers,
            hidden_width: c.embed.hidden_width,
            learning_rate: c.embed.learning_rate,
            iterations: c.embed.iterations,
            init_scale: c.embed.init_scale,
            backtracking: c.embed.backtracking,
            tau: c.identify.tau,
            theta: c.identify.theta,
            clusters: c.identify.clusters,
            restarts: c.identify.restarts,
            rounds: match c.identify.rounds {
                Rounds::Auto => "auto".into(),
                Rounds::Fixed(r) => r.to_string(),
            },
            rule: c.identify.rule,
        }
    }
}
