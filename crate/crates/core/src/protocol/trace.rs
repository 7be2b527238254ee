use std::fmt;
use std::io::{self, Write};

use crate::topology::AgentId;

/// Per-agent measurement at one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Completed iterations.
    pub iteration: u64,
    pub agent: AgentId,
    pub accuracy: f64,
    pub spent_epsilon: f64,
    /// Mean noise multiplier drawn since the previous record.
    pub mean_sigma: f64,
    /// Cumulative messages sent by the agent.
    pub messages_sent: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    /// Broadcast of the initial noisy estimate.
    Initial,
    /// Per-neighbor estimate built on a helper's estimate.
    Covered,
    /// The sender's local estimate, sent to a neighbor no helper covers.
    Uncovered,
    /// Asynchronous pairwise swap.
    Exchange,
}

impl MessageKind {
    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Initial => "initial",
            MessageKind::Covered => "covered",
            MessageKind::Uncovered => "uncovered",
            MessageKind::Exchange => "exchange",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Message metadata kept for auditing; never seen by agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub from: AgentId,
    pub to: AgentId,
    pub iteration: u64,
    pub kind: MessageKind,
    /// Helper whose estimate was mixed in, for `Covered` messages.
    pub helper: Option<AgentId>,
    pub noise_sigma_used: f64,
    /// Sender's full-scale multiplier at this iteration.
    pub full_sigma: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
    /// Envelopes, when message recording is on.
    pub messages: Vec<Envelope>,
    /// Agents taking part in each round.
    pub participation: Vec<usize>,
    /// Pairs formed in each asynchronous round.
    pub pairings: Vec<Vec<(AgentId, AgentId)>>,
}

pub const TRACE_HEADER: &str = "iteration,agent_id,accuracy,spent_epsilon,mean_sigma,messages_sent";

impl TrainingTrace {
    /// Records at the last evaluation point.
    pub fn final_records(&self) -> &[TraceRecord] {
        let Some(last) = self.records.last() else {
            return &[];
        };
        let start = self
            .records
            .iter()
            .rposition(|r| r.iteration != last.iteration)
            .map_or(0, |p| p + 1);
        &self.records[start..]
    }

    pub fn final_mean_accuracy(&self) -> f64 {
        let recs = self.final_records();
        recs.iter().map(|r| r.accuracy).sum::<f64>() / recs.len().max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration, r.agent, r.accuracy, r.spent_epsilon, r.mean_sigma, r.messages_sent
            )?;
        }
        Ok(())
    }

    pub fn write_message_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,from,to,kind,helper,noise_sigma_used,full_sigma")?;
        for m in &self.messages {
            let helper = m.helper.map(|h| h.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                m.iteration, m.from, m.to, m.kind, helper, m.noise_sigma_used, m.full_sigma
            )?;
        }
        Ok(())
    }

    /// Parses the body written by [`TrainingTrace::write_csv`].
    pub fn parse_csv(text: &str) -> Result<Vec<TraceRecord>, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == TRACE_HEADER => {}
            other => return Err(format!("unexpected header {other:?}")),
        }
        let mut out = Vec::new();
        for (no, line) in lines.enumerate() {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(format!("line {}: expected 6 fields", no + 2));
            }
            let bad = |what: &str| format!("line {}: bad {what}", no + 2);
            out.push(TraceRecord {
                iteration: f[0].parse().map_err(|_| bad("iteration"))?,
                agent: f[1].parse().map_err(|_| bad("agent_id"))?,
                accuracy: f[2].parse().map_err(|_| bad("accuracy"))?,
                spent_epsilon: f[3].parse().map_err(|_| bad("spent_epsilon"))?,
                mean_sigma: f[4].parse().map_err(|_| bad("mean_sigma"))?,
                messages_sent: f[5].parse().map_err(|_| bad("messages_sent"))?,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(iteration: u64, agent: AgentId, accuracy: f64) -> TraceRecord {
        TraceRecord {
            iteration,
            agent,
            accuracy,
            spent_epsilon: 0.25,
            mean_sigma: 1.0 / 3.0,
            messages_sent: 4,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let trace = TrainingTrace {
            records: vec![rec(10, 0, 0.1), rec(10, 1, 0.7), rec(20, 0, 0.9), rec(20, 1, 1.0)],
            ..Default::default()
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let parsed = TrainingTrace::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(parsed, trace.records);
        assert_eq!(trace.final_records().len(), 2);
        assert!((trace.final_mean_accuracy() - 0.95).abs() < 1e-15);
    }

    #[test]
    fn infinite_epsilon_survives_csv() {
        let mut r = rec(1, 0, 0.5);
        r.spent_epsilon = f64::INFINITY;
        let trace = TrainingTrace { records: vec![r.clone()], ..Default::default() };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let parsed = TrainingTrace::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(parsed[0], r);
    }
}
