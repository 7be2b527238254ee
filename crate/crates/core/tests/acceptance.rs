//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topdp::harness::{simulate, ExperimentConfig, RunOutput};
use topdp::learning::{Dataset, Model, ModelParams};
use topdp::privacy::{
    accumulated_epsilon, calibrate_sigma0, decayed_sigma, reduced_sigma, NoiseSchedule, PrivacyBudget, ReducedSigma,
};
use topdp::protocol::MessageKind;
use topdp::Graph;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn cfg(pairs: &[(&str, &str)]) -> ExperimentConfig {
    ExperimentConfig::from_pairs(pairs.iter().copied()).expect("valid config")
}

fn run(c: &ExperimentConfig) -> RunOutput {
    simulate(c).unwrap_or_else(|a| panic!("run failed: {}", a.error))
}

fn noise_calculus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let alpha: f64 = rng.random_range(0.0..1.0);
        let sk: f64 = rng.random_range(0.01..100.0);
        let si = (1.0 - alpha) * sk * rng.random_range(1.001..10.0);
        let ReducedSigma::Reduced(r) = reduced_sigma(si, sk, alpha) else {
            return outcome(false, format!("unexpected fallback for ({si}, {sk}, {alpha})"));
        };
        let lhs = r * r + (1.0 - alpha).powi(2) * sk * sk;
        worst = worst.max((lhs - si * si).abs() / (si * si));
    }
    let mut factor_ok = true;
    for i in 1..=100 {
        let alpha = i as f64 / 100.0;
        let expected = (2.0 * alpha - alpha * alpha).sqrt();
        for e in -4..=4 {
            // Powers of two keep the scaling exact.
            let s = 2f64.powi(e);
            let got = reduced_sigma(s, s, alpha).or_full(f64::NAN) / s;
            if (got - expected).abs() > f64::EPSILON * expected {
                factor_ok = false;
            }
        }
    }
    let half = reduced_sigma(1.0, 1.0, 0.5).or_full(f64::NAN);
    factor_ok &= half == 0.75f64.sqrt();
    outcome(
        worst <= 1e-12 && factor_ok,
        format!("max relative residual {worst:.2e}, same-sigma factor matches sqrt(2a - a^2): {factor_ok}"),
    )
}

fn calibration_round_trip() -> Outcome {
    let delta = 1e-5;
    let mut worst = 0.0f64;
    for eps in [0.5, 1.0, 2.0] {
        for t in [100u64, 1000] {
            for d in [500usize, 2000] {
                let s0 = calibrate_sigma0(PrivacyBudget::new(eps, delta).unwrap(), t, d);
                worst = worst.max((accumulated_epsilon(s0, t, delta, d) - eps).abs());
            }
        }
    }
    // Per-iteration budget from advanced composition, then the Gaussian
    // mechanism for sensitivity 1/|D|.
    let (eps, t, d) = (1.0f64, 1000f64, 2000f64);
    let eps_iter = eps / (4.0 * (2.0 * t * (1.0 / delta).ln()).sqrt());
    let oracle = (2.0 * (1.25 / delta).ln()).sqrt() / (eps_iter * d);
    let worked = calibrate_sigma0(PrivacyBudget::new(1.0, delta).unwrap(), 1000, 2000);
    let worked_ok = (worked - oracle).abs() <= 1e-12 * oracle && (worked - 1.4703).abs() < 5e-5;
    outcome(
        worst <= 1e-9 && worked_ok,
        format!("max round-trip error {worst:.2e}, sigma0(1, 1e-5, 1000, 2000) = {worked:.10} (oracle {oracle:.10})"),
    )
}

struct Audit {
    messages: usize,
    covered: usize,
    uncovered: usize,
    problems: Vec<String>,
    complete_rounds: bool,
}

fn audit(topology: &[(&str, &str)]) -> Audit {
    let mut pairs = topology.to_vec();
    pairs.extend([
        ("iterations", "200"),
        ("period", "50"),
        ("record_messages", "true"),
        ("eval_every", "200"),
    ]);
    let c = cfg(&pairs);
    let out = run(&c);
    let g: &Graph = &out.graph;
    let decayed = |agent: usize, t: u64| out.sigma0[agent] * c.gamma.powi((t / c.period) as i32);
    let mut covered = 0usize;
    let mut uncovered = 0usize;
    let mut problems = Vec::new();
    let mut per_round = vec![BTreeSet::new(); c.iterations as usize];
    for m in &out.trace.messages {
        if !g.has_edge(m.from, m.to) {
            problems.push(format!("{} -> {} crosses a non-edge", m.from, m.to));
        }
        match m.kind {
            MessageKind::Covered => {
                covered += 1;
                let k = m.helper.expect("covered message names its helper");
                if k == m.to || !g.has_edge(m.from, k) || g.has_edge(k, m.to) {
                    problems.push(format!("helper {k} of {} -> {} is not a non-adjacent neighbor", m.from, m.to));
                }
                let full = decayed(m.from, m.iteration);
                let sk = decayed(k, m.iteration);
                let expected = (full * full - (1.0 - c.alpha).powi(2) * sk * sk).sqrt();
                if (m.noise_sigma_used - expected).abs() > 1e-12 * full {
                    problems.push(format!("covered sigma {} != {expected}", m.noise_sigma_used));
                }
            }
            MessageKind::Uncovered => {
                uncovered += 1;
                let full = decayed(m.from, m.iteration);
                if m.helper.is_some() || (m.noise_sigma_used - full).abs() > 1e-12 * full {
                    problems.push(format!("uncovered {} -> {} carries {}", m.from, m.to, m.noise_sigma_used));
                }
            }
            MessageKind::Initial => {}
            other => problems.push(format!("unexpected {other} message")),
        }
        if m.kind != MessageKind::Initial && !per_round[m.iteration as usize].insert((m.from, m.to)) {
            problems.push(format!("duplicate {} -> {} at {}", m.from, m.to, m.iteration));
        }
    }
    let directed = 2 * g.edge_count();
    Audit {
        messages: out.trace.messages.len(),
        covered,
        uncovered,
        problems,
        complete_rounds: per_round.iter().all(|r| r.len() == directed),
    }
}

fn soundness_audit() -> Outcome {
    // Random graphs this sparse cover every neighbor, so a star (whose
    // leaves have a single neighbor) is audited too for the full-noise path.
    let runs = [
        ("random(0.2)", audit(&[("n_agents", "30"), ("topology", "random"), ("connection_rate", "0.2")])),
        ("star(3 hubs)", audit(&[("n_agents", "30"), ("topology", "star"), ("hubs", "3")])),
    ];
    let ok = runs.iter().all(|(_, a)| a.problems.is_empty() && a.complete_rounds && a.covered > 0)
        && runs.iter().any(|(_, a)| a.uncovered > 0);
    let detail = runs
        .iter()
        .map(|(name, a)| {
            format!(
                "{name}: {} messages ({} reduced, {} full), {} violations, all neighbors reached: {}{}",
                a.messages,
                a.covered,
                a.uncovered,
                a.problems.len(),
                a.complete_rounds,
                a.problems.first().map(|p| format!(", first: {p}")).unwrap_or_default()
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(ok, detail)
}

fn async_constraint() -> Outcome {
    let c = cfg(&[
        ("n_agents", "10"),
        ("topology", "ring"),
        ("protocol", "async"),
        ("dropout", "0.1"),
        ("iterations", "500"),
        ("samples", "1000"),
    ]);
    let out = run(&c);
    let mut repeats = 0;
    let mut prev: BTreeSet<(usize, usize)> = BTreeSet::new();
    for round in &out.trace.pairings {
        let cur: BTreeSet<(usize, usize)> = round.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        repeats += cur.intersection(&prev).count();
        prev = cur;
    }
    let t = out.trace.participation.len() as f64;
    let mean = out.trace.participation.iter().sum::<usize>() as f64 / t;
    let (n, p) = (10.0, 0.9);
    let sd_of_mean = (n * p * (1.0 - p) / t).sqrt();
    let within = (mean - n * p).abs() <= 3.0 * sd_of_mean;
    outcome(
        repeats == 0 && within && t == 500.0,
        format!(
            "{repeats} consecutive repeats, mean participation {mean:.3} vs {:.1} (3 sd = {:.3})",
            n * p,
            3.0 * sd_of_mean
        ),
    )
}

/// Shared setup for the utility comparisons: 2-class blobs, 2000 samples,
/// logistic regression, 10 agents, alpha 0.25, epsilon 1, delta 1e-5, T 2000.
fn utility_config(mode: &str, seed: u64, topology: &str) -> ExperimentConfig {
    let seed = seed.to_string();
    cfg(&[
        ("dataset", "synthetic"),
        ("classes", "2"),
        ("samples", "2000"),
        ("model", "logistic"),
        ("n_agents", "10"),
        ("alpha", "0.25"),
        ("epsilon", "1"),
        ("delta", "1e-5"),
        ("iterations", "2000"),
        ("protocol", "sync"),
        ("topology", topology),
        ("input_dim", "1000"),
        ("scale", "12"),
        ("spread", "1"),
        ("clip", "1"),
        ("lambda0", "17"),
        ("mode", mode),
        ("seed", &seed),
    ])
}

fn mean_final_accuracy(mode: &str, topology: &str) -> f64 {
    let seeds = [1u64, 2, 3];
    seeds
        .iter()
        .map(|&s| run(&utility_config(mode, s, topology)).final_mean_accuracy())
        .sum::<f64>()
        / seeds.len() as f64
}

fn utility_ordering() -> Outcome {
    let nn = mean_final_accuracy("no_noise", "ring");
    let top = mean_final_accuracy("topdp", "ring");
    let full = mean_final_accuracy("full_noise", "ring");
    let gap = 100.0 * (top - full);
    let loss = 100.0 * (nn - top);
    outcome(
        nn >= top && top >= full && gap >= 2.0 && loss <= 10.0,
        format!(
            "no_noise {:.2}%, topdp {:.2}%, full_noise {:.2}%: topdp - full_noise = {gap:.2} pts, no_noise - topdp = {loss:.2} pts",
            100.0 * nn,
            100.0 * top,
            100.0 * full
        ),
    )
}

fn complete_graph_check() -> Outcome {
    let top = mean_final_accuracy("topdp", "complete");
    let full = mean_final_accuracy("full_noise", "complete");
    let diff = 100.0 * (top - full).abs();
    outcome(
        diff <= 1.0,
        format!("K10 topdp {:.2}%, full_noise {:.2}%, |diff| = {diff:.3} pts", 100.0 * top, 100.0 * full),
    )
}

fn finite_difference(model: &Model, params: &ModelParams, data: &Dataset, batch: &[usize]) -> Vec<f64> {
    let h = 1e-5;
    let mut values = params.as_slice().to_vec();
    (0..values.len())
        .map(|p| {
            let orig = values[p];
            values[p] = orig + h;
            let up = model.loss(&ModelParams::new(values.clone()), data, batch).unwrap();
            values[p] = orig - h;
            let down = model.loss(&ModelParams::new(values.clone()), data, batch).unwrap();
            values[p] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = [0.0f64; 2];
    for (slot, kind) in ["logistic", "mlp"].iter().enumerate() {
        for _ in 0..20 {
            let input = rng.random_range(2..6);
            let classes = rng.random_range(2..5);
            let model = if *kind == "logistic" {
                Model::Logistic { input, classes }
            } else {
                Model::Mlp {
                    input,
                    hidden: rng.random_range(3..8),
                    classes,
                }
            };
            let n = 8;
            let features: Vec<f64> = (0..n * input).map(|_| rng.random_range(-2.0..2.0)).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            let data = Dataset::new(features, input, labels, classes).unwrap();
            let params = ModelParams::new(
                (0..model.param_count())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            );
            let batch: Vec<usize> = (0..4).map(|_| rng.random_range(0..n)).collect();
            let analytic = model.gradient(&params, &data, &batch).unwrap();
            let numeric = finite_difference(&model, &params, &data, &batch);
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
            let rel = norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12);
            worst[slot] = worst[slot].max(rel);
        }
    }
    outcome(
        worst.iter().all(|&w| w < 1e-4),
        format!("max relative error logistic {:.2e}, mlp {:.2e}", worst[0], worst[1]),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    let output = dir.path().join("out");
    std::fs::write(
        &config,
        format!(
            "n_agents = 10\niterations = 2000\nseed = 42\nprotocol = async\noutput = {}\n",
            output.display()
        ),
    )
    .unwrap();
    let invoke = || {
        let status = Command::new(env!("CARGO_BIN_EXE_topdp"))
            .args(["run", "--config"])
            .arg(&config)
            .args(["--mode", "topdp"])
            .output()
            .expect("spawn topdp");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(output.join("trace.csv")).unwrap()
    };
    let first = invoke();
    let second = invoke();
    outcome(
        first == second && !first.is_empty(),
        format!("two runs, {} bytes each, identical: {}", first.len(), first == second),
    )
}

fn decay_schedule() -> Outcome {
    let mut worst = 0.0f64;
    for &(s0, gamma, period) in &[(1.0, 0.9, 1000u64), (2.5, 0.5, 7), (0.3, 0.99, 1), (4.0, 1.0, 10)] {
        let sched = NoiseSchedule::new(s0, gamma, period).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..=10 * period {
            let got = decayed_sigma(&sched, t);
            let expected = s0 * gamma.powi((t / period) as i32);
            worst = worst.max((got - expected).abs() / expected);
            if got > prev {
                return outcome(false, format!("increase at t = {t} for ({s0}, {gamma}, {period})"));
            }
            prev = got;
        }
    }
    let worked = decayed_sigma(&NoiseSchedule::new(1.0, 0.9, 1000).unwrap(), 2500);
    outcome(
        worst <= 1e-14 && (worked - 0.81).abs() < 1e-12,
        format!("max relative error {worst:.2e}, (1.0, 0.9, 1000, 2500) -> {worked}"),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let checks: [(u32, &str, Duration, Check); 9] = [
        (1, "noise-reduction calculus", Duration::from_secs(1), noise_calculus),
        (2, "calibration round-trip", Duration::from_secs(1), calibration_round_trip),
        (3, "protocol soundness audit", Duration::from_secs(30), soundness_audit),
        (4, "asynchronous pairing constraint", Duration::from_secs(30), async_constraint),
        (5, "utility ordering", Duration::from_secs(300), utility_ordering),
        (6, "complete-graph degeneracy", Duration::from_secs(180), complete_graph_check),
        (7, "gradient oracle", Duration::from_secs(10), gradient_oracle),
        (8, "determinism", Duration::from_secs(120), determinism),
        (9, "decay schedule", Duration::from_secs(1), decay_schedule),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in checks {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let ok = result.ok && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id} [{name}]: {} ({}; {:.2}s of {}s{})",
            if ok { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
