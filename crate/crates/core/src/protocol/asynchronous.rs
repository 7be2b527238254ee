use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::{
    check_finite, initial_step, neighbor_sigma, record, should_record, validate, AgentState, Environment,
    Envelope, MessageKind, ProtocolError, RunFailure, SigmaTable, TrainingTrace,
};
use crate::learning::{aggregate_update, local_update};
use crate::privacy::reduced_sigma;
use crate::seed::{stream, Purpose};
use crate::topology::{AgentId, Graph};

/// Random matching among `available` agents.
///
/// Agents are visited in random order; each still-unmatched agent proposes
/// to a uniformly chosen neighbor that is available, unmatched, and was not
/// its partner in the previous iteration. Agents with no eligible neighbor
/// stay unmatched. Pairs are returned as `(proposer, acceptor)`.
pub fn pair_round<R: Rng + ?Sized>(
    available: &BTreeSet<AgentId>,
    g: &Graph,
    last_pairs: &[Option<AgentId>],
    rng: &mut R,
) -> Vec<(AgentId, AgentId)> {
    let mut order: Vec<AgentId> = available.iter().copied().collect();
    order.shuffle(rng);
    let mut matched = vec![false; g.n()];
    let mut pairs = Vec::new();
    for &i in &order {
        if matched[i] {
            continue;
        }
        let eligible: Vec<AgentId> = g
            .neighbors(i)
            .iter()
            .copied()
            .filter(|&j| {
                available.contains(&j) && !matched[j] && last_pairs[i] != Some(j) && last_pairs[j] != Some(i)
            })
            .collect();
        if let Some(&j) = eligible.choose(rng) {
            matched[i] = true;
            matched[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Runs `iterations` asynchronous rounds.
///
/// Each round every agent is independently unavailable with probability
/// `dropout`. Paired agents swap their current estimates and both update
/// against the partner's with noise reduced by the partner's masked share;
/// available agents left unpaired take a local noisy step. Unavailable agents
/// do nothing and are not charged.
pub fn run_asynchronous(
    env: &Environment<'_>,
    agents: &mut [AgentState],
    sigmas: &SigmaTable,
    iterations: u64,
    dropout: f64,
) -> Result<TrainingTrace, RunFailure> {
    if !(0.0..=1.0).contains(&dropout) {
        return Err(ProtocolError::BadDropout(dropout).into());
    }
    validate(env, agents, sigmas)?;
    let mut trace = TrainingTrace::default();
    match rounds(env, agents, sigmas, iterations, dropout, &mut trace) {
        Ok(()) => Ok(trace),
        Err(error) => Err(RunFailure { error, partial: trace }),
    }
}

fn rounds(
    env: &Environment<'_>,
    agents: &mut [AgentState],
    sigmas: &SigmaTable,
    iterations: u64,
    dropout: f64,
    trace: &mut TrainingTrace,
) -> Result<(), ProtocolError> {
    let g = env.graph;
    let n = g.n();
    let cfg = &env.learning;
    let mode = env.mode;
    let mut scheduler = stream(env.seed, Purpose::Scheduler, 0);

    let mut last_sigma = vec![0.0; n];
    for (i, agent) in agents.iter_mut().enumerate() {
        last_sigma[i] = initial_step(env, agent)?;
    }

    for t in 0..iterations {
        let lambda = cfg.learning_rate(t);
        let available: BTreeSet<AgentId> = (0..n).filter(|_| scheduler.random::<f64>() >= dropout).collect();
        let last_pairs: Vec<Option<AgentId>> = agents.iter().map(|a| a.last_pair).collect();
        let pairs = pair_round(&available, g, &last_pairs, &mut scheduler);

        let mut partner = vec![None; n];
        for &(a, b) in &pairs {
            partner[a] = Some(b);
            partner[b] = Some(a);
        }
        // Swapped estimates are the ones held at the start of the round.
        let snapshot: Vec<Option<_>> = (0..n)
            .map(|i| partner[i].map(|_| agents[i].estimate.clone()))
            .collect();

        for i in 0..n {
            let agent = &mut agents[i];
            agent.last_pair = partner[i];
            if !available.contains(&i) {
                continue;
            }
            let sigma = agent.full_sigma(mode, t);
            match partner[i] {
                Some(j) => {
                    let used = if mode.reduces() {
                        let sigma_j = neighbor_sigma(agent, sigmas[i][&j], mode, t);
                        reduced_sigma(sigma, sigma_j, cfg.alpha).or_full(sigma)
                    } else {
                        sigma
                    };
                    let gbar = agent.clipped_gradient(&env.model, cfg)?;
                    let noise = agent.draw_noise(used, cfg.clip);
                    let theirs = snapshot[j].as_ref().expect("partner snapshot");
                    agent.estimate = aggregate_update(&agent.estimate, theirs, cfg.alpha, lambda, &gbar, &noise)?;
                    // The estimate i sent to j this round.
                    agent.messages_sent += 1;
                    if env.record_messages {
                        trace.messages.push(Envelope {
                            from: i,
                            to: j,
                            iteration: t,
                            kind: MessageKind::Exchange,
                            helper: None,
                            noise_sigma_used: last_sigma[i],
                            full_sigma: sigma,
                        });
                    }
                    last_sigma[i] = used;
                }
                None => {
                    let gbar = agent.clipped_gradient(&env.model, cfg)?;
                    let noise = agent.draw_noise(sigma, cfg.clip);
                    agent.estimate = local_update(&agent.estimate, lambda, &gbar, &noise)?;
                    last_sigma[i] = sigma;
                }
            }
            check_finite(agent, t + 1)?;
            agent.charge(mode);
        }
        trace.participation.push(available.len());
        trace.pairings.push(pairs);
        if should_record(env, t + 1, iterations) {
            record(env, agents, t + 1, trace)?;
        }
    }
    Ok(())
}
