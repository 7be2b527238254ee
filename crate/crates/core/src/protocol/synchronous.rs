use std::collections::BTreeMap;

use rand::seq::IteratorRandom;

use super::{
    check_finite, initial_step, neighbor_sigma, record, should_record, validate, AgentState, Environment,
    Envelope, Message, MessageKind, RunFailure, SigmaTable, TrainingTrace,
};
use crate::learning::aggregate_update;
use crate::privacy::reduced_sigma;
use crate::topology::AgentId;

/// `inbox[i][j]`: the latest estimate agent `j` generated for agent `i`.
type Inbox = Vec<BTreeMap<AgentId, Message>>;

/// Runs `iterations` lock-step rounds.
///
/// Per round each agent decays its noise, computes one clipped gradient,
/// covers its neighbors greedily and sends each covered neighbor an estimate
/// built on the helper's last estimate with reduced noise, then updates its
/// own estimate with full-scale noise against a random neighbor and forwards
/// it to the uncovered neighbors.
pub fn run_synchronous(
    env: &Environment<'_>,
    agents: &mut [AgentState],
    sigmas: &SigmaTable,
    iterations: u64,
) -> Result<TrainingTrace, RunFailure> {
    validate(env, agents, sigmas)?;
    let mut trace = TrainingTrace::default();
    match rounds(env, agents, sigmas, iterations, &mut trace) {
        Ok(()) => Ok(trace),
        Err(error) => Err(RunFailure { error, partial: trace }),
    }
}

fn send(inbox: &mut Inbox, trace: &mut TrainingTrace, env: &Environment<'_>, msg: Message, envelope: Envelope) {
    if env.record_messages {
        trace.messages.push(envelope);
    }
    inbox[msg.to].insert(msg.from, msg);
}

fn rounds(
    env: &Environment<'_>,
    agents: &mut [AgentState],
    sigmas: &SigmaTable,
    iterations: u64,
    trace: &mut TrainingTrace,
) -> Result<(), super::ProtocolError> {
    let g = env.graph;
    let n = g.n();
    let cfg = &env.learning;
    let mode = env.mode;

    let mut inbox: Inbox = vec![BTreeMap::new(); n];
    for i in 0..n {
        let sigma = initial_step(env, &mut agents[i])?;
        for &j in g.neighbors(i) {
            agents[i].messages_sent += 1;
            let msg = Message {
                from: i,
                to: j,
                iteration: 0,
                payload: agents[i].estimate.clone(),
                noise_sigma_used: sigma,
            };
            let env_ = Envelope {
                from: i,
                to: j,
                iteration: 0,
                kind: MessageKind::Initial,
                helper: None,
                noise_sigma_used: sigma,
                full_sigma: sigma,
            };
            send(&mut inbox, trace, env, msg, env_);
        }
    }

    for t in 0..iterations {
        let lambda = cfg.learning_rate(t);
        let mut next: Inbox = vec![BTreeMap::new(); n];
        for i in 0..n {
            let agent = &mut agents[i];
            let sigma = agent.full_sigma(mode, t);
            let gbar = agent.clipped_gradient(&env.model, cfg)?;
            let plan = g.cover_neighbors(i, &mut agent.protocol_rng);

            for a in &plan.assignments {
                let k = a.helper;
                let sent_sigma = if mode.reduces() {
                    let sigma_k = neighbor_sigma(agent, sigmas[i][&k], mode, t);
                    reduced_sigma(sigma, sigma_k, cfg.alpha).or_full(sigma)
                } else {
                    sigma
                };
                for &j in &a.targets {
                    let noise = agent.draw_noise(sent_sigma, cfg.clip);
                    let helper_estimate = &inbox[i][&k].payload;
                    let payload = aggregate_update(&agent.estimate, helper_estimate, cfg.alpha, lambda, &gbar, &noise)?;
                    agent.messages_sent += 1;
                    let msg = Message { from: i, to: j, iteration: t, payload, noise_sigma_used: sent_sigma };
                    let envelope = Envelope {
                        from: i,
                        to: j,
                        iteration: t,
                        kind: MessageKind::Covered,
                        helper: Some(k),
                        noise_sigma_used: sent_sigma,
                        full_sigma: sigma,
                    };
                    send(&mut next, trace, env, msg, envelope);
                }
            }

            let partner = *g
                .neighbors(i)
                .iter()
                .choose(&mut agent.protocol_rng)
                .expect("connected graph with n >= 2 has no isolated agents");
            let noise = agent.draw_noise(sigma, cfg.clip);
            agent.estimate = aggregate_update(&agent.estimate, &inbox[i][&partner].payload, cfg.alpha, lambda, &gbar, &noise)?;
            check_finite(agent, t + 1)?;

            for &j in &plan.uncovered {
                agent.messages_sent += 1;
                let msg = Message {
                    from: i,
                    to: j,
                    iteration: t,
                    payload: agent.estimate.clone(),
                    noise_sigma_used: sigma,
                };
                let envelope = Envelope {
                    from: i,
                    to: j,
                    iteration: t,
                    kind: MessageKind::Uncovered,
                    helper: None,
                    noise_sigma_used: sigma,
                    full_sigma: sigma,
                };
                send(&mut next, trace, env, msg, envelope);
            }
            agent.charge(mode);
        }
        inbox = next;
        trace.participation.push(n);
        if should_record(env, t + 1, iterations) {
            record(env, agents, t + 1, trace)?;
        }
    }
    Ok(())
}
