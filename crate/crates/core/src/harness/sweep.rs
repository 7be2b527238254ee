use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::str::FromStr;
use std::thread;

use super::config::{ConfigError, ExperimentConfig};
use super::experiment::{run_experiment, RunOutput};
use super::metrics::SUMMARY_HEADER;
use super::HarnessError;
use crate::protocol::TRACE_HEADER;

/// Config dimension a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    Epsilon,
    ConnectionRate,
    Topology,
    NAgents,
    Gamma,
    Period,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 7] = [
        SweepAxis::Alpha,
        SweepAxis::Epsilon,
        SweepAxis::ConnectionRate,
        SweepAxis::Topology,
        SweepAxis::NAgents,
        SweepAxis::Gamma,
        SweepAxis::Period,
    ];

    /// The config key the axis writes.
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::ConnectionRate => "connection_rate",
            SweepAxis::Topology => "topology",
            SweepAxis::NAgents => "n_agents",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Period => "period",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.key() == s)
            .ok_or_else(|| format!("unknown sweep axis `{s}`"))
    }
}

/// One run per value, all sharing the template's master seed so the data,
/// partition and (where the axis permits) the graph stay fixed. Runs go to
/// `<output>/<axis>=<value>/`; the combined long-format `sweep.csv` and
/// `sweep_summary.csv` land in `<output>`.
pub fn sweep(template: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<Vec<RunOutput>, HarnessError> {
    if values.is_empty() {
        return Err(ConfigError::OutOfRange {
            key: axis.key().into(),
            msg: "sweep needs at least one value".into(),
        }
        .into());
    }
    let root = template.output.clone();
    let configs = values
        .iter()
        .map(|v| {
            let dir = root.join(format!("{axis}={v}"));
            let dir = dir.to_string_lossy().into_owned();
            template.with_pairs([(axis.key(), v.as_str()), ("output", dir.as_str())])
        })
        .collect::<Result<Vec<_>, _>>()?;

    let results: Vec<Result<RunOutput, HarnessError>> = thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run_experiment(c))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    fs::create_dir_all(&root).map_err(|e| HarnessError::io(&root, e))?;
    let path = root.join("sweep.csv");
    write_combined(&path, |f| {
        writeln!(f, "axis,value,{TRACE_HEADER}")?;
        for (v, run) in values.iter().zip(&runs) {
            for r in &run.trace.records {
                writeln!(
                    f,
                    "{axis},{v},{},{},{},{},{},{}",
                    r.iteration, r.agent, r.accuracy, r.spent_epsilon, r.mean_sigma, r.messages_sent
                )?;
            }
        }
        Ok(())
    })?;
    let path = root.join("sweep_summary.csv");
    write_combined(&path, |f| {
        writeln!(f, "axis,value,{SUMMARY_HEADER}")?;
        for (v, run) in values.iter().zip(&runs) {
            for m in &run.metrics {
                writeln!(
                    f,
                    "{axis},{v},{},{},{},{},{}",
                    m.iteration, m.epoch, m.mean_accuracy, m.std_accuracy, m.max_spent_epsilon
                )?;
            }
        }
        Ok(())
    })?;
    Ok(runs)
}

fn write_combined(
    path: &std::path::Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), HarnessError> {
    let mut f = File::create(path).map(BufWriter::new).map_err(|e| HarnessError::io(path, e))?;
    body(&mut f).and_then(|_| f.flush()).map_err(|e| HarnessError::io(path, e))
}
