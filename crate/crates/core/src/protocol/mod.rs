//! Agent state and round engines for the synchronous and asynchronous
//! protocols over a simulated network.
//!
//! The network is simulated in lock-step: in synchronous mode everything an
//! agent sends in round `t` lands in the recipient's inbox for round `t + 1`;
//! in asynchronous mode a central scheduler decides availability and forms
//! the pairing, and paired agents swap the estimates they held at the start
//! of the round. Each agent draws from its own noise, batch and protocol
//! streams, so runs are reproducible bit for bit.

mod asynchronous;
mod synchronous;
mod trace;

pub use asynchronous::{pair_round, run_asynchronous};
pub use synchronous::run_synchronous;
pub use trace::{Envelope, MessageKind, TraceRecord, TrainingTrace, TRACE_HEADER};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::learning::{clip_gradient, Dataset, LearningConfig, LearningError, Model, ModelParams};
use crate::privacy::{Accountant, NoiseDraw, NoiseSchedule, PrivacyBudget};
use crate::seed::{stream, Purpose, Stream};
use crate::topology::{AgentId, Graph};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("communication graph is not connected")]
    Disconnected,
    #[error("expected {expected} agents aligned with graph nodes, got {got}")]
    AgentMismatch { expected: usize, got: usize },
    #[error("agent {agent} has no initial sigma for neighbor {neighbor}")]
    SigmaExchangeIncomplete { agent: AgentId, neighbor: AgentId },
    #[error("agent {agent} produced a non-finite estimate at iteration {iteration}")]
    Diverged { agent: AgentId, iteration: u64 },
    #[error("dropout must be in [0, 1], got {0}")]
    BadDropout(f64),
    #[error(transparent)]
    Learning(#[from] LearningError),
}

/// A protocol run that stopped early, with whatever was recorded before the
/// failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: ProtocolError,
    pub partial: TrainingTrace,
}

impl From<ProtocolError> for RunFailure {
    fn from(error: ProtocolError) -> Self {
        RunFailure {
            error,
            partial: TrainingTrace::default(),
        }
    }
}

/// Which noise treatment the engines apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Topology-aware reduction plus step decay.
    TopDp,
    /// Topology-aware reduction, constant noise.
    TopDpNoDecay,
    /// Same dataflow as `TopDp`, but every draw is full-scale.
    FullNoise,
    NoNoise,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::TopDp, Mode::TopDpNoDecay, Mode::FullNoise, Mode::NoNoise];

    pub fn name(self) -> &'static str {
        match self {
            Mode::TopDp => "topdp",
            Mode::TopDpNoDecay => "topdp_no_decay",
            Mode::FullNoise => "full_noise",
            Mode::NoNoise => "no_noise",
        }
    }

    fn reduces(self) -> bool {
        matches!(self, Mode::TopDp | Mode::TopDpNoDecay)
    }

    fn decays(self) -> bool {
        matches!(self, Mode::TopDp | Mode::FullNoise)
    }

    pub fn is_private(self) -> bool {
        self != Mode::NoNoise
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

/// An estimate in flight. Receivers only ever read `payload`.
#[derive(Debug, Clone)]
pub struct Message {
    pub from: AgentId,
    pub to: AgentId,
    pub iteration: u64,
    pub payload: ModelParams,
    /// Diagnostic only.
    pub noise_sigma_used: f64,
}

/// One agent's private state.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: AgentId,
    /// The agent's current noisy estimate.
    pub estimate: ModelParams,
    pub schedule: NoiseSchedule,
    pub budget: PrivacyBudget,
    pub shard: Dataset,
    /// Partner in the most recent asynchronous iteration.
    pub last_pair: Option<AgentId>,
    pub spent_epsilon: f64,
    accountant: Accountant,
    noise_rng: Stream,
    batch_rng: Stream,
    protocol_rng: Stream,
    sigma_sum: f64,
    sigma_draws: u64,
    messages_sent: u64,
}

impl AgentState {
    /// Streams are derived from `master_seed` and the agent id.
    pub fn new(
        id: AgentId,
        estimate: ModelParams,
        schedule: NoiseSchedule,
        budget: PrivacyBudget,
        shard: Dataset,
        master_seed: u64,
    ) -> Self {
        let accountant = Accountant::new(schedule.sigma0(), budget.delta(), shard.len());
        let index = id as u64;
        AgentState {
            id,
            estimate,
            schedule,
            budget,
            shard,
            last_pair: None,
            spent_epsilon: 0.0,
            accountant,
            noise_rng: stream(master_seed, Purpose::Noise, index),
            batch_rng: stream(master_seed, Purpose::Batches, index),
            protocol_rng: stream(master_seed, Purpose::Protocol, index),
            sigma_sum: 0.0,
            sigma_draws: 0,
            messages_sent: 0,
        }
    }

    /// Full-scale noise multiplier at iteration `t` under `mode`.
    pub fn full_sigma(&self, mode: Mode, t: u64) -> f64 {
        match mode {
            Mode::NoNoise => 0.0,
            m if m.decays() => self.schedule.decayed(t),
            _ => self.schedule.sigma0(),
        }
    }

    fn sample_batch(&mut self, size: usize) -> Vec<usize> {
        let n = self.shard.len();
        (0..size).map(|_| self.batch_rng.random_range(0..n)).collect()
    }

    fn clipped_gradient(&mut self, model: &Model, cfg: &LearningConfig) -> Result<Vec<f64>, LearningError> {
        let batch = self.sample_batch(cfg.batch_size);
        let g = model.gradient(&self.estimate, &self.shard, &batch)?;
        Ok(clip_gradient(&g, cfg.clip))
    }

    fn draw_noise(&mut self, sigma: f64, clip: f64) -> Vec<f64> {
        self.sigma_sum += sigma;
        self.sigma_draws += 1;
        NoiseDraw::new(sigma, clip, self.estimate.len()).sample(&mut self.noise_rng)
    }

    fn charge(&mut self, mode: Mode) {
        if mode.is_private() {
            self.accountant.charge();
            self.spent_epsilon = self.accountant.spent();
        } else {
            self.spent_epsilon = f64::INFINITY;
        }
    }

    fn take_mean_sigma(&mut self) -> f64 {
        let mean = if self.sigma_draws == 0 {
            0.0
        } else {
            self.sigma_sum / self.sigma_draws as f64
        };
        self.sigma_sum = 0.0;
        self.sigma_draws = 0;
        mean
    }
}

/// Everything a round engine needs besides the agents themselves.
#[derive(Debug, Clone)]
pub struct Environment<'a> {
    pub graph: &'a Graph,
    pub model: Model,
    pub learning: LearningConfig,
    pub mode: Mode,
    pub testset: &'a Dataset,
    /// Record accuracy every this many iterations (and after the last one).
    pub eval_every: u64,
    /// Keep every message envelope in the trace.
    pub record_messages: bool,
    /// Seeds the asynchronous scheduler.
    pub seed: u64,
}

/// Initial noise multipliers each agent learns from its neighbors.
pub type SigmaTable = Vec<BTreeMap<AgentId, f64>>;

/// Every agent sends its `sigma0` to each neighbor.
pub fn exchange_initial_sigmas(graph: &Graph, agents: &[AgentState]) -> SigmaTable {
    (0..graph.n())
        .map(|i| {
            graph
                .neighbors(i)
                .iter()
                .map(|&j| (j, agents[j].schedule.sigma0()))
                .collect()
        })
        .collect()
}

/// Neighbor `k`'s full-scale multiplier at `t`, as agent `i` computes it
/// from the exchanged `sigma0` and the shared decay schedule.
fn neighbor_sigma(me: &AgentState, sigma0_k: f64, mode: Mode, t: u64) -> f64 {
    match mode {
        Mode::NoNoise => 0.0,
        m if m.decays() => {
            let steps = t / me.schedule.period();
            sigma0_k * me.schedule.gamma().powi(steps.min(i32::MAX as u64) as i32)
        }
        _ => sigma0_k,
    }
}

fn validate(env: &Environment<'_>, agents: &[AgentState], sigmas: &SigmaTable) -> Result<(), ProtocolError> {
    let g = env.graph;
    if !g.is_connected() {
        return Err(ProtocolError::Disconnected);
    }
    if agents.len() != g.n() || agents.iter().enumerate().any(|(i, a)| a.id != i) {
        return Err(ProtocolError::AgentMismatch {
            expected: g.n(),
            got: agents.len(),
        });
    }
    if sigmas.len() != g.n() {
        return Err(ProtocolError::SigmaExchangeIncomplete { agent: sigmas.len(), neighbor: 0 });
    }
    for i in 0..g.n() {
        for &j in g.neighbors(i) {
            if !sigmas[i].contains_key(&j) {
                return Err(ProtocolError::SigmaExchangeIncomplete { agent: i, neighbor: j });
            }
        }
    }
    let d = env.model.param_count();
    for a in agents {
        if a.estimate.len() != d {
            return Err(LearningError::DimensionMismatch { expected: d, got: a.estimate.len() }.into());
        }
    }
    env.learning.validate()?;
    Ok(())
}

fn record(
    env: &Environment<'_>,
    agents: &mut [AgentState],
    iteration: u64,
    trace: &mut TrainingTrace,
) -> Result<(), ProtocolError> {
    for a in agents.iter_mut() {
        let accuracy = crate::learning::evaluate_accuracy(&env.model, &a.estimate, env.testset)?;
        let mean_sigma = a.take_mean_sigma();
        trace.records.push(TraceRecord {
            iteration,
            agent: a.id,
            accuracy,
            spent_epsilon: a.spent_epsilon,
            mean_sigma,
            messages_sent: a.messages_sent,
        });
    }
    Ok(())
}

fn should_record(env: &Environment<'_>, done: u64, total: u64) -> bool {
    done == total || (env.eval_every > 0 && done % env.eval_every == 0)
}

fn check_finite(agent: &AgentState, iteration: u64) -> Result<(), ProtocolError> {
    if agent.estimate.is_finite() {
        Ok(())
    } else {
        Err(ProtocolError::Diverged { agent: agent.id, iteration })
    }
}

/// `x0 - lambda0 gbar(x0) + G(sigma0^2 C^2)`: the step every agent takes
/// before the first round.
fn initial_step(env: &Environment<'_>, agent: &mut AgentState) -> Result<f64, ProtocolError> {
    let gbar = agent.clipped_gradient(&env.model, &env.learning)?;
    let sigma = agent.full_sigma(env.mode, 0);
    let noise = agent.draw_noise(sigma, env.learning.clip);
    agent.estimate = crate::learning::local_update(&agent.estimate, env.learning.learning_rate(0), &gbar, &noise)?;
    check_finite(agent, 0)?;
    Ok(sigma)
}
