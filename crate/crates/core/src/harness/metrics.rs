use std::io::{self, Write};

use crate::protocol::TraceRecord;

/// Aggregate over agents at one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub iteration: u64,
    pub epoch: f64,
    pub mean_accuracy: f64,
    /// Population standard deviation across agents.
    pub std_accuracy: f64,
    pub max_spent_epsilon: f64,
}

pub const SUMMARY_HEADER: &str = "iteration,epoch,mean_accuracy,std_accuracy,max_spent_epsilon";

/// Groups trace records by iteration (records must be ordered by iteration)
/// and aggregates each group.
pub fn summarize(records: &[TraceRecord], epoch_len: u64) -> Vec<MetricsRecord> {
    records
        .chunk_by(|a, b| a.iteration == b.iteration)
        .map(|group| {
            let n = group.len() as f64;
            let mean = group.iter().map(|r| r.accuracy).sum::<f64>() / n;
            let var = group.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / n;
            MetricsRecord {
                iteration: group[0].iteration,
                epoch: group[0].iteration as f64 / epoch_len.max(1) as f64,
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
                max_spent_epsilon: group.iter().map(|r| r.spent_epsilon).fold(0.0, f64::max),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(mut out: W, metrics: &[MetricsRecord]) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for m in metrics {
        writeln!(
            out,
            "{},{},{},{},{}",
            m.iteration, m.epoch, m.mean_accuracy, m.std_accuracy, m.max_spent_epsilon
        )?;
    }
    Ok(())
}

pub fn parse_summary(text: &str) -> Result<Vec<MetricsRecord>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err("unexpected summary header".into());
    }
    lines
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(no, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || format!("summary line {}: malformed", no + 2);
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(MetricsRecord {
                iteration: f[0].parse().map_err(|_| bad())?,
                epoch: f[1].parse().map_err(|_| bad())?,
                mean_accuracy: f[2].parse().map_err(|_| bad())?,
                std_accuracy: f[3].parse().map_err(|_| bad())?,
                max_spent_epsilon: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
