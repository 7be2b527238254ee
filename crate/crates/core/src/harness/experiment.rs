use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::config::{DatasetSpec, ExperimentConfig, ModelKind, ProtocolKind};
use super::metrics::{summarize, write_summary, MetricsRecord};
use super::HarnessError;
use crate::learning::{load_idx, partition_iid, BlobSpec, Dataset, LearningConfig, Model};
use crate::privacy::{calibrate_sigma0, NoiseSchedule, PrivacyBudget};
use crate::protocol::{exchange_initial_sigmas, run_asynchronous, run_synchronous, AgentState, Environment, TrainingTrace};
use crate::seed::{child_seed, stream, Purpose};
use crate::topology::Graph;

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub graph: Graph,
    /// Calibrated initial noise multiplier per agent.
    pub sigma0: Vec<f64>,
    pub shard_sizes: Vec<usize>,
    pub trace: TrainingTrace,
    pub metrics: Vec<MetricsRecord>,
}

impl RunOutput {
    pub fn final_mean_accuracy(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.mean_accuracy)
    }

    /// One-line human summary.
    pub fn summary_line(&self) -> String {
        let last = self.metrics.last();
        format!(
            "mode={} protocol={} agents={} iterations={} final_mean_accuracy={:.4} final_std_accuracy={:.4} max_spent_epsilon={}",
            self.config.mode,
            self.config.protocol.name(),
            self.config.n_agents,
            self.config.iterations,
            last.map_or(0.0, |m| m.mean_accuracy),
            last.map_or(0.0, |m| m.std_accuracy),
            last.map_or(0.0, |m| m.max_spent_epsilon),
        )
    }
}

/// A run that stopped early, with whatever it recorded.
#[derive(Debug)]
pub struct Aborted {
    pub error: HarnessError,
    pub partial: Option<TrainingTrace>,
}

impl<E: Into<HarnessError>> From<E> for Aborted {
    fn from(e: E) -> Self {
        Aborted {
            error: e.into(),
            partial: None,
        }
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset), HarnessError> {
    match &cfg.dataset {
        DatasetSpec::Synthetic {
            samples,
            test_samples,
            classes,
            input_dim,
            spread,
            scale,
        } => {
            let blobs = |n: usize, purpose| BlobSpec {
                n_per_class: n / classes,
                classes: *classes,
                input_dim: *input_dim,
                spread: *spread,
                scale: *scale,
                seed: child_seed(cfg.seed, purpose, 0),
            };
            Ok((
                blobs(*samples, Purpose::TrainData).generate(),
                blobs(*test_samples, Purpose::TestData).generate(),
            ))
        }
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => Ok((load_idx(train_images, train_labels)?, load_idx(test_images, test_labels)?)),
    }
}

/// Runs one experiment in memory without touching the filesystem.
pub fn simulate(cfg: &ExperimentConfig) -> Result<RunOutput, Aborted> {
    cfg.validate()?;
    let graph = Graph::named(&cfg.topology, cfg.n_agents, child_seed(cfg.seed, Purpose::Graph, 0))?;
    let (train, test) = load_data(cfg)?;
    if train.len() < cfg.n_agents {
        return Err(HarnessError::TooFewSamples {
            samples: train.len(),
            agents: cfg.n_agents,
        }
        .into());
    }
    let classes = train.classes().max(test.classes());
    let model = match cfg.model {
        ModelKind::Logistic => Model::Logistic {
            input: train.dim(),
            classes,
        },
        ModelKind::Mlp => Model::Mlp {
            input: train.dim(),
            hidden: cfg.hidden,
            classes,
        },
    };
    let shards = partition_iid(&train, cfg.n_agents, child_seed(cfg.seed, Purpose::Partition, 0));
    let budget = PrivacyBudget::new(cfg.epsilon, cfg.delta)?;
    let x0 = model.init(&mut stream(cfg.seed, Purpose::Init, 0));

    let mut sigma0 = Vec::with_capacity(cfg.n_agents);
    let mut shard_sizes = Vec::with_capacity(cfg.n_agents);
    let mut agents = Vec::with_capacity(cfg.n_agents);
    for (id, shard) in shards.into_iter().enumerate() {
        let s0 = calibrate_sigma0(budget, cfg.iterations, shard.len());
        let schedule = NoiseSchedule::new(s0, cfg.gamma, cfg.period)?;
        sigma0.push(s0);
        shard_sizes.push(shard.len());
        agents.push(AgentState::new(id, x0.clone(), schedule, budget, shard, cfg.seed));
    }

    let learning = LearningConfig {
        alpha: cfg.alpha,
        lambda0: cfg.lambda0,
        fade_iters: if cfg.lambda_fade == 0 {
            cfg.iterations
        } else {
            cfg.lambda_fade
        },
        clip: cfg.clip,
        batch_size: cfg.batch_size,
    };
    learning.validate()?;
    let eval_every = if cfg.eval_every == 0 {
        cfg.epoch_len(*shard_sizes.iter().min().unwrap_or(&1))
    } else {
        cfg.eval_every
    };
    let env = Environment {
        graph: &graph,
        model,
        learning,
        mode: cfg.mode,
        testset: &test,
        eval_every,
        record_messages: cfg.record_messages,
        seed: child_seed(cfg.seed, Purpose::Scheduler, 0),
    };
    let sigmas = exchange_initial_sigmas(&graph, &agents);
    let result = match cfg.protocol {
        ProtocolKind::Sync => run_synchronous(&env, &mut agents, &sigmas, cfg.iterations),
        ProtocolKind::Async => run_asynchronous(&env, &mut agents, &sigmas, cfg.iterations, cfg.dropout),
    };
    let trace = result.map_err(|f| Aborted {
        error: f.error.into(),
        partial: Some(f.partial),
    })?;
    let epoch = cfg.epoch_len(*shard_sizes.iter().min().unwrap_or(&1));
    let metrics = summarize(&trace.records, epoch);
    Ok(RunOutput {
        config: cfg.clone(),
        graph,
        sigma0,
        shard_sizes,
        trace,
        metrics,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::io(path, e))
}

fn write_config_echo(dir: &Path, cfg: &ExperimentConfig, out: Option<&RunOutput>) -> Result<(), HarnessError> {
    let path = dir.join("config.txt");
    let mut f = create(&path)?;
    let mut body = cfg.echo();
    if let Some(out) = out {
        for (i, (s, n)) in out.sigma0.iter().zip(&out.shard_sizes).enumerate() {
            body.push_str(&format!("# agent {i}: shard_size = {n}, sigma0 = {s}\n"));
        }
        body.push_str(&format!("# edges = {}\n", out.graph.edge_count()));
    }
    f.write_all(body.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| HarnessError::io(&path, e))
}

/// Writes `trace.csv`, `summary.csv` and `config.txt` (plus `messages.csv`
/// when message recording is on) into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join("trace.csv");
    let mut f = create(&path)?;
    out.trace
        .write_csv(&mut f)
        .and_then(|_| f.flush())
        .map_err(|e| HarnessError::io(&path, e))?;

    let path = dir.join("summary.csv");
    let mut f = create(&path)?;
    write_summary(&mut f, &out.metrics)
        .and_then(|_| f.flush())
        .map_err(|e| HarnessError::io(&path, e))?;

    if out.config.record_messages {
        let path = dir.join("messages.csv");
        let mut f = create(&path)?;
        out.trace
            .write_message_log(&mut f)
            .and_then(|_| f.flush())
            .map_err(|e| HarnessError::io(&path, e))?;
    }
    write_config_echo(dir, &out.config, Some(out))
}

/// Runs one experiment and writes its outputs under `cfg.output`.
///
/// On failure the partial trace is still written, followed by a `#`-prefixed
/// marker row naming the error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let dir = cfg.output.as_path();
    match simulate(cfg) {
        Ok(out) => {
            write_outputs(dir, &out)?;
            Ok(out)
        }
        Err(Aborted { error, partial }) => {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            let path = dir.join("trace.csv");
            let mut f = create(&path)?;
            partial
                .unwrap_or_default()
                .write_csv(&mut f)
                .and_then(|_| writeln!(f, "# FAILED: {error}"))
                .and_then(|_| f.flush())
                .map_err(|e| HarnessError::io(&path, e))?;
            write_config_echo(dir, cfg, None)?;
            Err(error)
        }
    }
}
