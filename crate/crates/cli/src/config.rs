//! Experiment configs: JSON file, then `--override key=value`, then strict
//! typed parsing. Every field not given takes its value from [`crate::defaults`].

use std::path::{Path, PathBuf};

use fairloop_core::controller::ControlMode;
use fairloop_core::creators::{MarketConstraint, MarketSpec};
use fairloop_core::longterm::{DynamicsSpec, HorizonSpec, RewardSpec};
use fairloop_core::optimizer::ConstraintKind;
use fairloop_core::user_dynamics::{GroupSplit, OpinionParams, PopulationParams, TradeoffParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::defaults;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Controller,
    Creators,
    Longterm,
    Opinion,
    Population,
    Rank,
    Tradeoff,
}

impl Experiment {
    /// Alphabetical.
    pub const ALL: [Experiment; 7] = [
        Self::Controller,
        Self::Creators,
        Self::Longterm,
        Self::Opinion,
        Self::Population,
        Self::Rank,
        Self::Tradeoff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Controller => "controller",
            Self::Creators => "creators",
            Self::Longterm => "longterm",
            Self::Opinion => "opinion",
            Self::Population => "population",
            Self::Rank => "rank",
            Self::Tradeoff => "tradeoff",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::Controller => "cumulative exposure tracking with a P-controller or dual ascent over a relevance stream",
            Self::Creators => "creator retention and user utility across an exposure or opportunity floor sweep",
            Self::Longterm => "myopic versus best static exposure policy under engagement dynamics",
            Self::Opinion => "opinion trajectories under aligned or diversified recommendations",
            Self::Population => "group shares under churn with homophilous replacement",
            Self::Rank => "fairness-constrained stochastic ranking for one relevance matrix",
            Self::Tradeoff => "Monte Carlo engagement and polarization across diversity levels",
        }
    }

    pub fn from_name(name: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| CliError::Config(format!("unknown experiment `{name}`")))
    }
}

/// A file path or the value itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffConfig {
    pub epsilon_grid: Vec<f64>,
    pub alpha: f64,
    pub n_users: usize,
    pub horizon: usize,
    pub trials: usize,
    pub group_splits: Vec<GroupSplit>,
}

impl TradeoffConfig {
    pub fn params(&self) -> TradeoffParams {
        TradeoffParams {
            alpha: self.alpha,
            n_users: self.n_users,
            horizon: self.horizon,
            trials: self.trials,
            group_splits: self.group_splits.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreatorsConfig {
    pub market: MarketSpec,
    pub constraint: MarketConstraint,
    /// `None` selects the default grid for the constraint; resolved configs always hold it.
    pub epsilon_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// `stream[t][u][i]`, or a `step,user,<items>` CSV path.
    pub stream: Source<Vec<Vec<Vec<f64>>>>,
    pub groups: Vec<usize>,
    pub pi: Vec<f64>,
    pub targets: Vec<f64>,
    pub gain: f64,
    pub mode: ControlMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongtermConfig {
    pub v0: Vec<f64>,
    pub horizon: usize,
    pub gamma: f64,
    pub dynamics: DynamicsSpec,
    pub reward: RewardSpec,
    pub grid_step: f64,
}

impl LongtermConfig {
    pub fn spec(&self) -> HorizonSpec {
        HorizonSpec {
            horizon: self.horizon,
            gamma: self.gamma,
            dynamics: self.dynamics.clone(),
            reward: self.reward.clone(),
            grid_step: self.grid_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankConfig {
    /// Rows per user, or a `user,<items>` CSV path.
    pub relevance: Source<Vec<Vec<f64>>>,
    /// Group label per item, or an `item,group` CSV path.
    pub groups: Source<Vec<usize>>,
    pub constraint: ConstraintKind,
    /// One value per group; a single value is broadcast.
    pub epsilon: Vec<f64>,
    /// Per-user weights; `None` means 1 for every user.
    pub weights: Option<Vec<f64>>,
    /// Explicit position weights; `None` means DCG (optionally cut at `top_k`).
    pub pi: Option<Vec<f64>>,
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    Controller(ControllerConfig),
    Creators(CreatorsConfig),
    Longterm(LongtermConfig),
    Opinion(OpinionParams),
    Population(PopulationParams),
    Rank(RankConfig),
    Tradeoff(TradeoffConfig),
}

/// Fully resolved run: what the manifest echoes and what replay consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub params: Params,
}

/// Command-line inputs that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
    /// Value of `FAIRLOOP_OUT`, if set.
    pub env_out: Option<PathBuf>,
}

fn strict<T: DeserializeOwned>(value: Value, what: &str) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

/// Parses `key=value`. The value is JSON when it parses as JSON, otherwise a string.
pub fn parse_override(raw: &str) -> CliResult<(Vec<String>, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{raw}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("override `{raw}` has an empty key")));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.split('.').map(str::to_string).collect(), value))
}

/// Objects merge key by key; anything else replaces the default.
fn merge(base: &mut Map<String, Value>, given: Map<String, Value>) {
    for (k, v) in given {
        match (base.get_mut(&k), v) {
            (Some(Value::Object(b)), Value::Object(g)) => merge(b, g),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(target: &mut Map<String, Value>, path: &[String], value: Value) -> CliResult<()> {
    let (head, rest) = path.split_first().expect("non-empty path");
    if rest.is_empty() {
        target.insert(head.clone(), value);
        return Ok(());
    }
    match target.entry(head.clone()).or_insert_with(|| Value::Object(Map::new())) {
        Value::Object(inner) => set_path(inner, rest, value),
        _ => Err(CliError::Config(format!("override path `{}` crosses a non-object", path.join(".")))),
    }
}

/// Resolves a raw config document (already parsed JSON) against defaults,
/// overrides and command-line options.
pub fn resolve(raw: Value, opts: &RunOptions) -> CliResult<ExperimentConfig> {
    let Value::Object(mut top) = raw else {
        return Err(CliError::Config("config must be a JSON object".into()));
    };
    let mut overrides = Vec::new();
    for raw in &opts.overrides {
        let (path, value) = parse_override(raw)?;
        match path[0].as_str() {
            "experiment" | "seed" | "out_dir" if path.len() == 1 => {
                top.insert(path[0].clone(), value);
            }
            "params" if path.len() > 1 => overrides.push((path[1..].to_vec(), value)),
            _ => overrides.push((path, value)),
        }
    }
    for key in top.keys() {
        if !["experiment", "seed", "out_dir", "params"].contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown field `{key}` in config")));
        }
    }
    let experiment: Experiment = strict(
        top.remove("experiment").ok_or_else(|| CliError::Config("missing field `experiment`".into()))?,
        "experiment",
    )?;
    let seed: u64 = match (opts.seed, top.remove("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => strict(v, "seed")?,
        (None, None) => defaults::SEED,
    };
    let file_out: Option<PathBuf> = top.remove("out_dir").map(|v| strict(v, "out_dir")).transpose()?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| opts.env_out.clone())
        .or(file_out)
        .unwrap_or_else(|| Path::new("out").join(experiment.name()));

    let Value::Object(mut params) = defaults::params(experiment) else {
        unreachable!("defaults are objects")
    };
    match top.remove("params") {
        Some(Value::Object(given)) => merge(&mut params, given),
        Some(Value::Null) | None => {}
        Some(_) => return Err(CliError::Config("`params` must be an object".into())),
    }
    for (path, value) in overrides {
        set_path(&mut params, &path, value)?;
    }
    let params = typed_params(experiment, Value::Object(params))?;
    Ok(ExperimentConfig { experiment, seed, out_dir, params })
}

fn typed_params(experiment: Experiment, v: Value) -> CliResult<Params> {
    let what = format!("{} params", experiment.name());
    Ok(match experiment {
        Experiment::Controller => Params::Controller(strict(v, &what)?),
        Experiment::Creators => {
            let mut c: CreatorsConfig = strict(v, &what)?;
            c.epsilon_grid.get_or_insert_with(|| c.constraint.default_grid());
            Params::Creators(c)
        }
        Experiment::Longterm => Params::Longterm(strict(v, &what)?),
        Experiment::Opinion => Params::Opinion(strict(v, &what)?),
        Experiment::Population => Params::Population(strict(v, &what)?),
        Experiment::Rank => Params::Rank(strict(v, &what)?),
        Experiment::Tradeoff => Params::Tradeoff(strict(v, &what)?),
    })
}

/// Reads the config file and resolves it.
pub fn load(path: &Path, opts: &RunOptions) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    resolve(raw, opts)
}

/// Re-resolves a stored config so its params are checked against the
/// experiment's schema, not just the untagged union.
pub fn from_echo(value: Value, opts: &RunOptions) -> CliResult<ExperimentConfig> {
    resolve(value, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_fill_missing_params() {
        let cfg = resolve(json!({"experiment": "tradeoff"}), &RunOptions::default()).unwrap();
        let Params::Tradeoff(t) = cfg.params else { panic!() };
        assert_eq!((t.n_users, t.horizon, t.trials), (100, 30, 200));
        assert_eq!(t.epsilon_grid.len(), 11);
        assert_eq!(cfg.out_dir, PathBuf::from("out/tradeoff"));
    }

    #[test]
    fn unknown_param_key_is_named() {
        let err = resolve(json!({"experiment": "opinion", "params": {"alhpa": 0.2}}), &RunOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("alhpa"), "{err}");
        let err = resolve(json!({"experiment": "opinion", "sed": 3}), &RunOptions::default()).unwrap_err();
        assert!(err.to_string().contains("sed"));
    }

    #[test]
    fn overrides_and_precedence() {
        let opts = RunOptions {
            seed: Some(9),
            out: None,
            overrides: vec!["constraint=opportunity".into(), "market.theta=0.2".into(), "seed=4".into()],
            env_out: Some("env_dir".into()),
        };
        let cfg = resolve(json!({"experiment": "creators", "seed": 3, "out_dir": "file_dir"}), &opts).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.out_dir, PathBuf::from("env_dir"));
        let Params::Creators(c) = cfg.params else { panic!() };
        assert_eq!(c.constraint, MarketConstraint::Opportunity);
        assert_eq!(c.market.theta, 0.2);
    }

    #[test]
    fn every_experiment_resolves_from_defaults() {
        for e in Experiment::ALL {
            let cfg = resolve(json!({"experiment": e.name()}), &RunOptions::default()).unwrap();
            assert_eq!(cfg.experiment, e);
            assert_eq!(Experiment::from_name(e.name()).unwrap(), e);
        }
        assert!(Experiment::from_name("nope").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = resolve(json!({"experiment": "longterm", "seed": 5}), &RunOptions::default()).unwrap();
        let echoed = serde_json::to_value(&cfg).unwrap();
        assert_eq!(from_echo(echoed, &RunOptions::default()).unwrap(), cfg);
    }

    #[test]
    fn override_values() {
        assert_eq!(parse_override("a.b=3").unwrap(), (vec!["a".into(), "b".into()], json!(3)));
        assert_eq!(parse_override("mode=dual_ascent").unwrap().1, json!("dual_ascent"));
        assert!(parse_override("novalue").is_err());
    }
}
