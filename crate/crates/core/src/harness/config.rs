use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::protocol::Mode;
use crate::topology::Topology;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value {value:?} for `{key}`: {msg}")]
    BadValue { key: String, value: String, msg: String },
    #[error("`{key}` out of range: {msg}")]
    OutOfRange { key: String, msg: String },
    #[error("`{key}`: file {path:?} does not exist")]
    MissingFile { key: String, path: PathBuf },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("flag `{0}` has no value")]
    MissingValue(String),
    #[error("cannot read config {path:?}: {msg}")]
    Read { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Sync,
    Async,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Sync => "sync",
            ProtocolKind::Async => "async",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// Gaussian blobs; train and test sets are drawn from separate streams.
    Synthetic {
        samples: usize,
        test_samples: usize,
        classes: usize,
        input_dim: usize,
        spread: f64,
        scale: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

/// Every knob of one experiment, with defaults from the reference setup
/// (30 agents, connection rate 0.2, ε = 1, δ = 1e-5, γ = 0.9, period 1000,
/// C = 4, λ0 = 0.05).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: Topology,
    pub n_agents: usize,
    pub protocol: ProtocolKind,
    pub mode: Mode,
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub iterations: u64,
    pub gamma: f64,
    pub period: u64,
    pub clip: f64,
    pub lambda0: f64,
    /// 0 means "fade over the whole run".
    pub lambda_fade: u64,
    pub batch_size: usize,
    pub dropout: f64,
    pub model: ModelKind,
    pub hidden: usize,
    pub dataset: DatasetSpec,
    /// 0 means once per epoch (shard size / batch size iterations).
    pub eval_every: u64,
    pub output: PathBuf,
    pub seed: u64,
    pub record_messages: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: Topology::Random { rate: 0.2 },
            n_agents: 30,
            protocol: ProtocolKind::Sync,
            mode: Mode::TopDp,
            alpha: 0.25,
            epsilon: 1.0,
            delta: 1e-5,
            iterations: 2000,
            gamma: 0.9,
            period: 1000,
            clip: 4.0,
            lambda0: 0.05,
            lambda_fade: 0,
            batch_size: 1,
            dropout: 0.1,
            model: ModelKind::Logistic,
            hidden: 100,
            dataset: DatasetSpec::Synthetic {
                samples: 2000,
                test_samples: 1000,
                classes: 2,
                input_dim: 2,
                spread: 1.0,
                scale: 1.0,
            },
            eval_every: 0,
            output: PathBuf::from("out"),
            seed: 0,
            record_messages: false,
        }
    }
}

/// Keys accepted in config files and as `--key value` flags.
pub const KEYS: &[&str] = &[
    "topology",
    "connection_rate",
    "hubs",
    "branching",
    "mesh_density",
    "n_agents",
    "protocol",
    "mode",
    "alpha",
    "epsilon",
    "delta",
    "iterations",
    "gamma",
    "period",
    "clip",
    "lambda0",
    "lambda_fade",
    "batch_size",
    "dropout",
    "model",
    "hidden",
    "dataset",
    "samples",
    "test_samples",
    "classes",
    "input_dim",
    "spread",
    "scale",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "eval_every",
    "output",
    "seed",
    "record_messages",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        msg: e.to_string(),
    })
}

fn bad(key: &str, value: &str, msg: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        msg: msg.into(),
    }
}

fn range(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.into(),
        msg: msg.into(),
    }
}

/// Raw key/value pairs before they are applied; the topology knobs are kept
/// separately because they combine into one [`Topology`].
#[derive(Debug, Default)]
struct TopologyKnobs {
    kind: Option<String>,
    rate: Option<f64>,
    hubs: Option<usize>,
    branching: Option<usize>,
    density: Option<f64>,
}

#[derive(Debug, Default)]
struct DatasetKnobs {
    kind: Option<String>,
    samples: Option<usize>,
    test_samples: Option<usize>,
    classes: Option<usize>,
    input_dim: Option<usize>,
    spread: Option<f64>,
    scale: Option<f64>,
    train_images: Option<PathBuf>,
    train_labels: Option<PathBuf>,
    test_images: Option<PathBuf>,
    test_labels: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Applies `key = value` pairs in order, then validates. Later pairs win.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, ConfigError> {
        Self::default().with_pairs(pairs)
    }

    /// Applies pairs on top of `self` and validates the result.
    pub fn with_pairs<'a>(&self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, ConfigError> {
        let mut cfg = self.clone();
        let mut topo = TopologyKnobs::default();
        let mut data = DatasetKnobs::default();
        for (key, value) in pairs {
            let (key, value) = (key.trim(), value.trim());
            match key {
                "topology" => topo.kind = Some(value.to_string()),
                "connection_rate" => topo.rate = Some(parse(key, value)?),
                "hubs" => topo.hubs = Some(parse(key, value)?),
                "branching" => topo.branching = Some(parse(key, value)?),
                "mesh_density" => topo.density = Some(parse(key, value)?),
                "n_agents" => cfg.n_agents = parse(key, value)?,
                "protocol" => {
                    cfg.protocol = match value {
                        "sync" => ProtocolKind::Sync,
                        "async" => ProtocolKind::Async,
                        _ => return Err(bad(key, value, "expected sync or async")),
                    }
                }
                "mode" => cfg.mode = value.parse().map_err(|m: String| bad(key, value, &m))?,
                "alpha" => cfg.alpha = parse(key, value)?,
                "epsilon" => cfg.epsilon = parse(key, value)?,
                "delta" => cfg.delta = parse(key, value)?,
                "iterations" => cfg.iterations = parse(key, value)?,
                "gamma" => cfg.gamma = parse(key, value)?,
                "period" => cfg.period = parse(key, value)?,
                "clip" => cfg.clip = parse(key, value)?,
                "lambda0" => cfg.lambda0 = parse(key, value)?,
                "lambda_fade" => cfg.lambda_fade = parse(key, value)?,
                "batch_size" => cfg.batch_size = parse(key, value)?,
                "dropout" => cfg.dropout = parse(key, value)?,
                "model" => {
                    cfg.model = match value {
                        "logistic" => ModelKind::Logistic,
                        "mlp" => ModelKind::Mlp,
                        _ => return Err(bad(key, value, "expected logistic or mlp")),
                    }
                }
                "hidden" => cfg.hidden = parse(key, value)?,
                "dataset" => data.kind = Some(value.to_string()),
                "samples" => data.samples = Some(parse(key, value)?),
                "test_samples" => data.test_samples = Some(parse(key, value)?),
                "classes" => data.classes = Some(parse(key, value)?),
                "input_dim" => data.input_dim = Some(parse(key, value)?),
                "spread" => data.spread = Some(parse(key, value)?),
                "scale" => data.scale = Some(parse(key, value)?),
                "train_images" => data.train_images = Some(value.into()),
                "train_labels" => data.train_labels = Some(value.into()),
                "test_images" => data.test_images = Some(value.into()),
                "test_labels" => data.test_labels = Some(value.into()),
                "eval_every" => cfg.eval_every = parse(key, value)?,
                "output" => cfg.output = value.into(),
                "seed" => cfg.seed = parse(key, value)?,
                "record_messages" => cfg.record_messages = parse(key, value)?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        cfg.topology = merge_topology(&cfg.topology, topo)?;
        cfg.dataset = merge_dataset(&cfg.dataset, data)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every numeric range and that dataset files exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_agents < 2 {
            return Err(range("n_agents", "need at least 2 agents"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(range("alpha", format!("must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(range("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(range("delta", format!("must be in (0, 1), got {}", self.delta)));
        }
        if self.iterations == 0 {
            return Err(range("iterations", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(range("gamma", format!("must be in (0, 1], got {}", self.gamma)));
        }
        if self.period == 0 {
            return Err(range("period", "must be at least 1"));
        }
        if !(self.clip > 0.0) {
            return Err(range("clip", format!("must be positive, got {}", self.clip)));
        }
        if !(self.lambda0 >= 0.0) {
            return Err(range("lambda0", format!("must be non-negative, got {}", self.lambda0)));
        }
        if self.batch_size == 0 {
            return Err(range("batch_size", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(range("dropout", format!("must be in [0, 1], got {}", self.dropout)));
        }
        if self.hidden == 0 {
            return Err(range("hidden", "must be at least 1"));
        }
        match &self.topology {
            Topology::Random { rate } if !(*rate > 0.0 && *rate <= 1.0) => {
                return Err(range("connection_rate", format!("must be in (0, 1], got {rate}")));
            }
            Topology::Star { hubs } if *hubs == 0 || *hubs > self.n_agents => {
                return Err(range("hubs", format!("must be in [1, n_agents], got {hubs}")));
            }
            Topology::Tree { branching: 0 } => return Err(range("branching", "must be at least 1")),
            Topology::Mesh { density } if !(0.0..=1.0).contains(density) => {
                return Err(range("mesh_density", format!("must be in [0, 1], got {density}")));
            }
            _ => {}
        }
        match &self.dataset {
            DatasetSpec::Synthetic {
                samples,
                test_samples,
                classes,
                input_dim,
                spread,
                scale,
            } => {
                if *classes == 0 {
                    return Err(range("classes", "must be at least 1"));
                }
                if *input_dim == 0 {
                    return Err(range("input_dim", "must be at least 1"));
                }
                if *samples < self.n_agents.max(*classes) {
                    return Err(range("samples", "need at least one sample per agent and per class"));
                }
                if *test_samples < *classes {
                    return Err(range("test_samples", "need at least one test sample per class"));
                }
                if !(*spread >= 0.0) {
                    return Err(range("spread", "must be non-negative"));
                }
                if !(*scale >= 0.0) {
                    return Err(range("scale", "must be non-negative"));
                }
            }
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                for (key, path) in [
                    ("train_images", train_images),
                    ("train_labels", train_labels),
                    ("test_images", test_images),
                    ("test_labels", test_labels),
                ] {
                    if !path.exists() {
                        return Err(ConfigError::MissingFile {
                            key: key.into(),
                            path: path.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Iterations per epoch for an agent holding `shard` samples.
    pub fn epoch_len(&self, shard: usize) -> u64 {
        (shard / self.batch_size).max(1) as u64
    }

    /// Every resolved value as `key = value` lines; parsing the result gives
    /// back the same config.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("topology", self.topology.name().into());
        match &self.topology {
            Topology::Random { rate } => kv("connection_rate", rate.to_string()),
            Topology::Star { hubs } => kv("hubs", hubs.to_string()),
            Topology::Tree { branching } => kv("branching", branching.to_string()),
            Topology::Mesh { density } => kv("mesh_density", density.to_string()),
            Topology::Ring | Topology::Complete => {}
        }
        kv("n_agents", self.n_agents.to_string());
        kv("protocol", self.protocol.name().into());
        kv("mode", self.mode.name().into());
        kv("alpha", self.alpha.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("delta", self.delta.to_string());
        kv("iterations", self.iterations.to_string());
        kv("gamma", self.gamma.to_string());
        kv("period", self.period.to_string());
        kv("clip", self.clip.to_string());
        kv("lambda0", self.lambda0.to_string());
        kv("lambda_fade", self.lambda_fade.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("dropout", self.dropout.to_string());
        kv(
            "model",
            match self.model {
                ModelKind::Logistic => "logistic".into(),
                ModelKind::Mlp => "mlp".into(),
            },
        );
        kv("hidden", self.hidden.to_string());
        match &self.dataset {
            DatasetSpec::Synthetic {
                samples,
                test_samples,
                classes,
                input_dim,
                spread,
                scale,
            } => {
                kv("dataset", "synthetic".into());
                kv("samples", samples.to_string());
                kv("test_samples", test_samples.to_string());
                kv("classes", classes.to_string());
                kv("input_dim", input_dim.to_string());
                kv("spread", spread.to_string());
                kv("scale", scale.to_string());
            }
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                kv("dataset", "idx".into());
                kv("train_images", train_images.display().to_string());
                kv("train_labels", train_labels.display().to_string());
                kv("test_images", test_images.display().to_string());
                kv("test_labels", test_labels.display().to_string());
            }
        }
        kv("eval_every", self.eval_every.to_string());
        kv("output", self.output.display().to_string());
        kv("seed", self.seed.to_string());
        kv("record_messages", self.record_messages.to_string());
        out
    }
}

fn merge_topology(current: &Topology, knobs: TopologyKnobs) -> Result<Topology, ConfigError> {
    let kind = knobs.kind.unwrap_or_else(|| current.name().to_string());
    let t = match kind.as_str() {
        "random" => Topology::Random {
            rate: knobs.rate.unwrap_or(match current {
                Topology::Random { rate } => *rate,
                _ => 0.2,
            }),
        },
        "ring" => Topology::Ring,
        "complete" => Topology::Complete,
        "star" => Topology::Star {
            hubs: knobs.hubs.unwrap_or(match current {
                Topology::Star { hubs } => *hubs,
                _ => 2,
            }),
        },
        "tree" => Topology::Tree {
            branching: knobs.branching.unwrap_or(match current {
                Topology::Tree { branching } => *branching,
                _ => 2,
            }),
        },
        "mesh" => Topology::Mesh {
            density: knobs.density.unwrap_or(match current {
                Topology::Mesh { density } => *density,
                _ => 0.1,
            }),
        },
        other => return Err(bad("topology", other, "expected random, ring, star, tree, mesh or complete")),
    };
    Ok(t)
}

fn merge_dataset(current: &DatasetSpec, k: DatasetKnobs) -> Result<DatasetSpec, ConfigError> {
    let current_kind = match current {
        DatasetSpec::Synthetic { .. } => "synthetic",
        DatasetSpec::Idx { .. } => "idx",
    };
    let kind = k.kind.as_deref().unwrap_or(current_kind);
    match kind {
        "synthetic" => {
            let base = match current {
                DatasetSpec::Synthetic { .. } => current.clone(),
                DatasetSpec::Idx { .. } => ExperimentConfig::default().dataset,
            };
            let DatasetSpec::Synthetic {
                samples,
                test_samples,
                classes,
                input_dim,
                spread,
                scale,
            } = base
            else {
                unreachable!()
            };
            Ok(DatasetSpec::Synthetic {
                samples: k.samples.unwrap_or(samples),
                test_samples: k.test_samples.unwrap_or(test_samples),
                classes: k.classes.unwrap_or(classes),
                input_dim: k.input_dim.unwrap_or(input_dim),
                spread: k.spread.unwrap_or(spread),
                scale: k.scale.unwrap_or(scale),
            })
        }
        "idx" => {
            let prev = |f: fn(&DatasetSpec) -> Option<PathBuf>| f(current);
            let pick = |key: &str, given: Option<PathBuf>, old: Option<PathBuf>| {
                given.or(old).ok_or_else(|| range(key, "required when dataset = idx"))
            };
            Ok(DatasetSpec::Idx {
                train_images: pick("train_images", k.train_images, prev(|d| idx_path(d, 0)))?,
                train_labels: pick("train_labels", k.train_labels, prev(|d| idx_path(d, 1)))?,
                test_images: pick("test_images", k.test_images, prev(|d| idx_path(d, 2)))?,
                test_labels: pick("test_labels", k.test_labels, prev(|d| idx_path(d, 3)))?,
            })
        }
        other => Err(bad("dataset", other, "expected synthetic or idx")),
    }
}

fn idx_path(d: &DatasetSpec, which: usize) -> Option<PathBuf> {
    match d {
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => Some([train_images, train_labels, test_images, test_labels][which].clone()),
        DatasetSpec::Synthetic { .. } => None,
    }
}

/// Splits config-file text into `(key, value)` pairs. Blank lines and `#`
/// comments are ignored.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: no + 1 })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Turns `--key value` / `--key=value` flags into pairs.
pub fn parse_flags(args: &[String]) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(ConfigError::UnknownKey(arg.clone()));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| ConfigError::MissingValue(flag.to_string()))?;
                (flag.to_string(), v.clone())
            }
        };
        out.push((key.replace('-', "_"), value));
    }
    Ok(out)
}

/// Loads a config file (if any) and applies flag overrides on top; flags
/// take precedence over file keys.
pub fn parse_config(path: Option<&Path>, flags: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut pairs = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                path: p.to_path_buf(),
                msg: e.to_string(),
            })?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    pairs.extend(parse_flags(flags)?);
    ExperimentConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_pairs(parse_pairs("").unwrap().iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.epsilon, 1.0);
        assert_eq!(cfg.delta, 1e-5);
        assert_eq!(cfg.gamma, 0.9);
        assert_eq!(cfg.period, 1000);
        assert_eq!(cfg.clip, 4.0);
        assert_eq!(cfg.lambda0, 0.05);
        assert_eq!(cfg.n_agents, 30);
        assert_eq!(cfg.topology, Topology::Random { rate: 0.2 });
    }

    #[test]
    fn alpha_out_of_range_names_key() {
        let err = ExperimentConfig::from_pairs([("alpha", "1.5")]).unwrap_err();
        assert!(matches!(&err, ConfigError::OutOfRange { key, .. } if key == "alpha"));
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        std::fs::write(&path, "# test\nalpha = 0.5\nn_agents = 10\n").unwrap();
        let cfg = parse_config(Some(&path), &["--alpha".into(), "0.25".into()]).unwrap();
        assert_eq!(cfg.alpha, 0.25);
        assert_eq!(cfg.n_agents, 10);
        let cfg = parse_config(Some(&path), &["--alpha=0.125".into()]).unwrap();
        assert_eq!(cfg.alpha, 0.125);
    }

    #[test]
    fn unknown_key_and_bad_values() {
        assert_eq!(
            ExperimentConfig::from_pairs([("colour", "red")]).unwrap_err(),
            ConfigError::UnknownKey("colour".into())
        );
        assert!(matches!(
            ExperimentConfig::from_pairs([("delta", "abc")]).unwrap_err(),
            ConfigError::BadValue { key, .. } if key == "delta"
        ));
        assert!(matches!(
            ExperimentConfig::from_pairs([("delta", "1.0")]).unwrap_err(),
            ConfigError::OutOfRange { key, .. } if key == "delta"
        ));
        assert!(matches!(
            ExperimentConfig::from_pairs([("mode", "magic")]).unwrap_err(),
            ConfigError::BadValue { key, .. } if key == "mode"
        ));
        assert!(matches!(parse_pairs("just words"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(parse_flags(&["--alpha".into()]), Err(ConfigError::MissingValue(_))));
    }

    #[test]
    fn missing_dataset_file_names_key() {
        let err = ExperimentConfig::from_pairs([
            ("dataset", "idx"),
            ("train_images", "/nope/a"),
            ("train_labels", "/nope/b"),
            ("test_images", "/nope/c"),
            ("test_labels", "/nope/d"),
        ])
        .unwrap_err();
        assert!(matches!(err, ConfigError::MissingFile { ref key, .. } if key == "train_images"));
        let err = ExperimentConfig::from_pairs([("dataset", "idx")]).unwrap_err();
        assert!(matches!(err, ConfigError::OutOfRange { ref key, .. } if key == "train_images"));
    }

    #[test]
    fn topology_knobs_combine() {
        let cfg = ExperimentConfig::from_pairs([("topology", "star"), ("hubs", "3")]).unwrap();
        assert_eq!(cfg.topology, Topology::Star { hubs: 3 });
        let cfg = ExperimentConfig::from_pairs([("connection_rate", "0.4")]).unwrap();
        assert_eq!(cfg.topology, Topology::Random { rate: 0.4 });
        let cfg = cfg.with_pairs([("topology", "tree")]).unwrap();
        assert_eq!(cfg.topology, Topology::Tree { branching: 2 });
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::from_pairs([
            ("topology", "mesh"),
            ("mesh_density", "0.3"),
            ("protocol", "async"),
            ("mode", "full_noise"),
            ("alpha", "0.125"),
            ("spread", "0.7"),
        ])
        .unwrap();
        let pairs = parse_pairs(&cfg.echo()).unwrap();
        let back = ExperimentConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(back, cfg);
        for (k, _) in &pairs {
            assert!(KEYS.contains(&k.as_str()), "{k}");
        }
    }
}
