//! Run configuration: one file (JSON or TOML) plus `--key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use rewardkit::refine::BcConfig;
use rewardkit::reward::{OracleNoise, RewardModality};
use rewardkit::training::HeadConfig;
use rewardkit::{EnvConfig, RefineConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A configuration problem: bad file, unknown key, or an invalid value.
/// Reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_demos: usize,
    pub noise_std: f64,
    pub levels: usize,
    pub gap_levels: usize,
    /// Read demonstrations from this trajectory file instead of collecting.
    pub demos: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_demos: 20,
            noise_std: 0.02,
            levels: 11,
            gap_levels: 1,
            demos: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    /// Trajectory file used to build the served oracle's progress table.
    pub trajectories: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:7878".into(),
            trajectories: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_trajectories: usize,
    /// Noise of the expert that generates evaluation trajectories.
    pub expert_noise: f64,
    pub interval: usize,
    pub modality: RewardModality,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_trajectories: 80,
            expert_noise: 0.02,
            interval: 10,
            modality: RewardModality::Progress,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Oracle,
    Head,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Trained head checkpoint, for `kind = "head"`.
    pub head: Option<PathBuf>,
    /// `host:port` of a reward server, for `kind = "remote"`.
    pub endpoint: String,
    pub timeout_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Oracle,
            head: None,
            endpoint: "127.0.0.1:7878".into(),
            timeout_ms: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; copied into every section before validation.
    pub seed: u64,
    /// Parent directory of timestamped run directories.
    pub out_dir: PathBuf,
    pub env: EnvConfig,
    pub dataset: DatasetConfig,
    pub bc: BcConfig,
    pub refine: RefineConfig,
    pub noise: OracleNoise,
    pub head: HeadConfig,
    pub serve: ServeConfig,
    pub eval: EvalConfig,
    pub backend: BackendConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs"),
            env: EnvConfig::default(),
            dataset: DatasetConfig::default(),
            bc: BcConfig::default(),
            refine: RefineConfig::default(),
            noise: OracleNoise::default(),
            head: HeadConfig::default(),
            serve: ServeConfig::default(),
            eval: EvalConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

impl RunConfig {
    /// Defaults, then the file, then each override in order; the master seed
    /// is propagated and every section validated.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> anyhow::Result<Self> {
        let mut tree = serde_json::to_value(RunConfig::default()).expect("default config serialises");
        if let Some(path) = path {
            let file = read_file(path)?;
            check_known(&file, &tree, "")?;
            merge(&mut tree, file);
        }
        for (key, value) in overrides {
            apply_override(&mut tree, key, value)?;
        }
        let mut cfg: RunConfig = serde_json::from_value(tree).map_err(|e| config_err(e.to_string()))?;
        cfg.propagate_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    fn propagate_seed(&mut self) {
        self.env.seed = self.seed;
        self.bc.seed = self.seed;
        self.refine.seed = self.seed;
        self.noise.seed = self.seed;
        self.head.seed = self.seed;
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let wrap = |r: rewardkit::error::Result<()>| r.map_err(|e| config_err(e.to_string()));
        wrap(self.env.validate())?;
        wrap(self.refine.validate())?;
        wrap(self.noise.validate())?;
        wrap(self.head.validate())?;
        if self.bc.epochs == 0 || self.bc.batch_size == 0 || !(self.bc.learning_rate > 0.0) {
            return Err(config_err("bc.epochs, bc.batch_size and bc.learning_rate must be positive"));
        }
        if self.dataset.n_demos == 0 {
            return Err(config_err("dataset.n_demos must be positive"));
        }
        if self.dataset.levels < 2 {
            return Err(config_err("dataset.levels must be at least 2"));
        }
        if !(self.dataset.noise_std >= 0.0 && self.dataset.noise_std.is_finite()) {
            return Err(config_err("dataset.noise_std must be finite and >= 0"));
        }
        if !(self.eval.expert_noise >= 0.0 && self.eval.expert_noise.is_finite()) {
            return Err(config_err("eval.expert_noise must be finite and >= 0"));
        }
        if self.eval.n_trajectories == 0 || self.eval.interval == 0 {
            return Err(config_err("eval.n_trajectories and eval.interval must be positive"));
        }
        if self.backend.timeout_ms == 0 {
            return Err(config_err("backend.timeout_ms must be positive"));
        }
        if self.backend.kind == BackendKind::Head && self.backend.head.is_none() {
            return Err(config_err("backend.kind = \"head\" needs backend.head"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

fn read_file(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let parsed = if is_toml {
        toml::from_str::<Value>(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str::<Value>(&text).map_err(|e| e.to_string())
    };
    let value = parsed.map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(config_err(format!("{}: top level must be a table", path.display())));
    }
    Ok(value)
}

fn check_known(file: &Value, defaults: &Value, prefix: &str) -> anyhow::Result<()> {
    let (Value::Object(f), Value::Object(d)) = (file, defaults) else {
        return Ok(());
    };
    for (k, v) in f {
        let name = format!("{prefix}{k}");
        let Some(dv) = d.get(k) else {
            return Err(config_err(format!("unknown key `{name}`")));
        };
        if dv.is_object() {
            check_known(v, dv, &format!("{name}."))?;
        }
    }
    Ok(())
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Every leaf path of the tree, dotted.
fn leaf_paths(tree: &Map<String, Value>, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in tree {
        let name = format!("{prefix}{k}");
        match v {
            Value::Object(m) => leaf_paths(m, &format!("{name}."), out),
            _ => out.push(name),
        }
    }
}

/// Resolves `key` to a dotted path: exact paths win, otherwise a bare name
/// must match exactly one leaf.
fn resolve(tree: &Value, key: &str) -> anyhow::Result<String> {
    let key = key.replace('-', "_");
    let mut leaves = Vec::new();
    leaf_paths(tree.as_object().expect("object"), "", &mut leaves);
    if leaves.contains(&key) {
        return Ok(key);
    }
    let matches: Vec<&String> = leaves
        .iter()
        .filter(|p| p.rsplit('.').next() == Some(key.as_str()) || p.ends_with(&format!(".{key}")))
        .collect();
    match matches.as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(config_err(format!("unknown key `{key}`"))),
        many => Err(config_err(format!(
            "ambiguous key `{key}`; use one of {}",
            many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn apply_override(tree: &mut Value, key: &str, raw: &str) -> anyhow::Result<()> {
    let path = resolve(tree, key)?;
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = &mut *tree;
    for part in path.split('.') {
        slot = slot.get_mut(part).expect("resolved path exists");
    }
    // Keep strings as strings even when they look like numbers.
    *slot = match (&*slot, value) {
        (Value::String(_), v) if !v.is_string() => Value::String(raw.to_string()),
        (_, v) => v,
    };
    Ok(())
}

/// Splits `--key=value` config overrides from the arguments clap should see.
/// An argument is an override when its name is not a flag of the command line.
pub fn split_overrides(args: Vec<String>, flags: &[String]) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    for arg in args {
        if let Some((name, value)) = arg.strip_prefix("--").and_then(|a| a.split_once('=')) {
            if !flags.iter().any(|f| f == name) {
                overrides.push((name.to_string(), value.to_string()));
                continue;
            }
        }
        rest.push(arg);
    }
    (rest, overrides)
}
