//! Experiment drivers behind the command line: training, evaluation, the
//! device-count sweep and the optimality-gap study. Every file written
//! starts with `# config_hash=<sha256>` so reruns with a different
//! configuration are detectable.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::agent::{
    run_distributed, run_training_episodes, train, write_metrics_csv, EpisodeMetrics, EvalMetrics, GreedyPolicy,
    RandomPolicy,
};
use crate::config::ExperimentConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::QNetwork;
use crate::oracle::{optimality_gap, write_gap_csv, GapRow};

/// Gap ceiling asserted by the gap study.
pub const GAP_TOLERANCE: f64 = 1.10;

/// One assertion evaluated inside a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Random,
    DdqnNoMask,
    DdqnWithMask,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [Self::Random, Self::DdqnNoMask, Self::DdqnWithMask];

    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::DdqnNoMask => "ddqn_no_mask",
            Self::DdqnWithMask => "ddqn_with_mask",
        }
    }
}

/// Rejects flag combinations that have no meaning.
pub fn check_modes(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.env.knapsack_gates_mask && !cfg.agent.masking {
        return Err(Error::InvalidModeCombination("knapsack_gates_mask requires masking".into()));
    }
    Ok(())
}

fn seed_dir(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.out_dir.join(format!("seed{seed}"))
}

fn checkpoint_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("uav{index}.ckpt"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn header(cfg: &ExperimentConfig, extra: &[(&'static str, String)]) -> Vec<(&'static str, String)> {
    let mut h = vec![("config_hash", cfg.hash())];
    h.extend(extra.iter().cloned());
    h
}

fn write_csv<T: Serialize>(path: &Path, comments: &[(&str, String)], rows: &[T]) -> Result<()> {
    let mut out = create(path)?;
    for (k, v) in comments {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn save_checkpoints(cfg: &ExperimentConfig, dir: &Path, networks: &[QNetwork]) -> Result<Vec<PathBuf>> {
    networks
        .iter()
        .enumerate()
        .map(|(i, net)| {
            let path = checkpoint_path(dir, i);
            let mut out = create(&path)?;
            writeln!(out, "# config_hash={}", cfg.hash())?;
            out.write_all(net.to_text().as_bytes())?;
            out.flush()?;
            Ok(path)
        })
        .collect()
}

/// Loads the checkpoints written by [`run_train`] for `seed`.
pub fn load_checkpoints(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<QNetwork>> {
    let dir = seed_dir(cfg, seed);
    let count = if cfg.agent.share_parameters { 1 } else { cfg.env.n_uavs };
    let expected = cfg.agent.layer_dims(cfg.env.n_task_types);
    (0..count)
        .map(|i| {
            let path = checkpoint_path(&dir, i);
            let text = fs::read_to_string(&path).map_err(|_| Error::MissingCheckpoint(path.display().to_string()))?;
            let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
            let net = QNetwork::from_text(&body)?;
            if net.dims() != expected.as_slice() {
                return Err(Error::DimensionMismatch { expected: expected.len(), got: net.dims().len() });
            }
            Ok(net)
        })
        .collect()
}

/// Writes `manifest.txt`: command, config hash, seeds, commit id, the
/// resolved configuration with the source of every value, the files
/// written and the outcome of every check.
pub fn write_manifest(cfg: &ExperimentConfig, command: &str, report: &RunReport) -> Result<PathBuf> {
    let path = cfg.out_dir.join("manifest.txt");
    let mut out = create(&path)?;
    writeln!(out, "# config_hash={}", cfg.hash())?;
    writeln!(out, "command = {command}")?;
    writeln!(out, "seeds = {:?}", cfg.seeds)?;
    writeln!(out, "commit = {}", commit_id())?;
    writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "\n[config]")?;
    for (key, value, source) in cfg.provenance() {
        writeln!(out, "{key} = {value}  # {source}")?;
    }
    writeln!(out, "\n[files]")?;
    for f in &report.files {
        writeln!(out, "{}", f.display())?;
    }
    writeln!(out, "\n[checks]")?;
    for c in &report.checks {
        writeln!(out, "{c}")?;
    }
    out.flush()?;
    Ok(path)
}

fn commit_id() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

/// Trains one agent per seed, writing `seed<s>/metrics.csv` and
/// `seed<s>/uav<i>.ckpt`.
pub fn run_train(cfg: &ExperimentConfig) -> Result<RunReport> {
    check_modes(cfg)?;
    let mut report = RunReport::default();
    for &seed in &cfg.seeds {
        let out = train(&cfg.env, &cfg.agent, seed)?;
        let dir = seed_dir(cfg, seed);
        let metrics = dir.join("metrics.csv");
        let comments = header(cfg, &[("seed", seed.to_string())]);
        write_metrics_csv(create(&metrics)?, &comments, &out.metrics)?;
        report.files.push(metrics);
        report.files.extend(save_checkpoints(cfg, &dir, &out.networks)?);
        if cfg.agent.masking {
            report.checks.push(Check::new(
                &format!("mask_safety seed {seed}"),
                out.masked_executions == 0,
                format!("{} masked actions executed", out.masked_executions),
            ));
        }
    }
    report.files.push(write_manifest(cfg, "train", &report)?);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub policy: String,
    pub seed: u64,
    pub episodes: usize,
    pub mean_reward: f64,
    pub mean_total_delay_s: f64,
    #[serde(rename = "mean_total_energy_J")]
    pub mean_total_energy_j: f64,
    pub mean_violations: f64,
    pub mask_overrides: u64,
}

impl EvalRow {
    fn new(seed: u64, m: &EvalMetrics) -> Self {
        Self {
            policy: m.policy.clone(),
            seed,
            episodes: m.episodes.len(),
            mean_reward: m.mean_reward,
            mean_total_delay_s: m.mean_total_delay,
            mean_total_energy_j: m.mean_total_energy,
            mean_violations: m.mean_violations,
            mask_overrides: m.mask_overrides,
        }
    }
}

/// Greedy execution of the checkpoints of every seed; writes `eval.csv`.
pub fn run_eval(cfg: &ExperimentConfig) -> Result<(RunReport, Vec<EvalRow>)> {
    check_modes(cfg)?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let nets = load_checkpoints(cfg, seed)?;
        let mut policy = GreedyPolicy::new(nets, cfg.agent.masking);
        let m = run_distributed(&mut policy, &cfg.env, seed, cfg.eval_episodes)?;
        rows.push(EvalRow::new(seed, &m));
    }
    let mut report = RunReport::default();
    if cfg.agent.masking {
        let overrides: u64 = rows.iter().map(|r| r.mask_overrides).sum();
        report.checks.push(Check::new("mask_safety", overrides == 0, format!("{overrides} overrides")));
    }
    let path = cfg.out_dir.join("eval.csv");
    write_csv(&path, &header(cfg, &[]), &rows)?;
    report.files.push(path);
    report.files.push(write_manifest(cfg, "eval", &report)?);
    Ok((report, rows))
}

/// Result of one (policy, seed) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub eval: EvalMetrics,
    /// Per-episode training metrics; for the random policy, the same
    /// episode sequence played without learning.
    pub training: Vec<EpisodeMetrics>,
    pub networks: Vec<QNetwork>,
    pub masked_executions: u64,
}

/// Trains (for the DDQN policies) and evaluates one cell.
pub fn run_cell(
    env: &EnvConfig,
    cfg: &ExperimentConfig,
    kind: PolicyKind,
    seed: u64,
    eval_episodes: usize,
) -> Result<CellResult> {
    match kind {
        PolicyKind::Random => {
            let training = run_training_episodes(&mut RandomPolicy::new(seed, cfg.random_all_actions), env, seed, cfg.agent.episodes)?;
            let eval = run_distributed(&mut RandomPolicy::new(seed, cfg.random_all_actions), env, seed, eval_episodes)?;
            Ok(CellResult { eval, training: training.episodes, networks: Vec::new(), masked_executions: 0 })
        }
        PolicyKind::DdqnNoMask | PolicyKind::DdqnWithMask => {
            let masking = kind == PolicyKind::DdqnWithMask;
            let agent = crate::agent::AgentConfig { masking, ..cfg.agent.clone() };
            let out = train(env, &agent, seed)?;
            let mut policy = GreedyPolicy::new(out.networks.clone(), masking);
            let eval = run_distributed(&mut policy, env, seed, eval_episodes)?;
            Ok(CellResult {
                eval,
                training: out.metrics,
                networks: out.networks,
                masked_executions: out.masked_executions,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_devices: usize,
    pub policy: String,
    pub seeds: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_total_delay_s: f64,
    #[serde(rename = "mean_total_energy_J")]
    pub mean_total_energy_j: f64,
    pub mean_violations: f64,
    pub mask_overrides: u64,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seed-averaged row of one (N, policy) cell.
pub fn sweep_row(n_devices: usize, kind: PolicyKind, evals: &[&EvalMetrics]) -> SweepRow {
    let col = |f: fn(&EvalMetrics) -> f64| evals.iter().map(|e| f(e)).collect::<Vec<_>>();
    let (mean_reward, std_reward) = mean_std(&col(|e| e.mean_reward));
    SweepRow {
        n_devices,
        policy: kind.name().into(),
        seeds: evals.len(),
        mean_reward,
        std_reward,
        mean_total_delay_s: mean_std(&col(|e| e.mean_total_delay)).0,
        mean_total_energy_j: mean_std(&col(|e| e.mean_total_energy)).0,
        mean_violations: mean_std(&col(|e| e.mean_violations)).0,
        mask_overrides: evals.iter().map(|e| e.mask_overrides).sum(),
    }
}

/// Load and ranking checks over sweep rows.
pub fn sweep_checks(rows: &[SweepRow]) -> Vec<Check> {
    let mut checks = Vec::new();
    for kind in PolicyKind::ALL {
        let series: Vec<&SweepRow> = rows.iter().filter(|r| r.policy == kind.name()).collect();
        let rising = |f: fn(&SweepRow) -> f64| series.windows(2).all(|w| f(w[1]) > f(w[0]));
        let fmt = |f: fn(&SweepRow) -> f64| series.iter().map(|r| format!("{:.4e}", f(r))).collect::<Vec<_>>().join(" < ");
        checks.push(Check::new(
            &format!("load_trend {}", kind.name()),
            rising(|r| r.mean_total_delay_s) && rising(|r| r.mean_total_energy_j),
            format!("delay {} ; energy {}", fmt(|r| r.mean_total_delay_s), fmt(|r| r.mean_total_energy_j)),
        ));
    }
    if let Some(n) = rows.iter().map(|r| r.n_devices).max() {
        let reward = |k: PolicyKind| rows.iter().find(|r| r.n_devices == n && r.policy == k.name()).map(|r| r.mean_reward);
        if let (Some(w), Some(nm), Some(r)) =
            (reward(PolicyKind::DdqnWithMask), reward(PolicyKind::DdqnNoMask), reward(PolicyKind::Random))
        {
            checks.push(Check::new(
                "ranking",
                w > nm && nm > r,
                format!("N={n}: with_mask {w:.2}, no_mask {nm:.2}, random {r:.2}"),
            ));
        }
    }
    checks
}

/// N × policy sweep; writes `sweep.csv` and the training metrics of every
/// cell under `sweep/`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(RunReport, Vec<SweepRow>)> {
    check_modes(cfg)?;
    let mut report = RunReport::default();
    let mut rows = Vec::new();
    for &n in &cfg.sweep_devices {
        let env = EnvConfig { n_devices: n, ..cfg.env.clone() };
        for kind in PolicyKind::ALL {
            let mut evals = Vec::new();
            for &seed in &cfg.seeds {
                let cell = run_cell(&env, cfg, kind, seed, cfg.eval_episodes)?;
                if kind == PolicyKind::DdqnWithMask && cell.masked_executions > 0 {
                    report.checks.push(Check::new(
                        &format!("mask_safety N={n} seed {seed}"),
                        false,
                        format!("{} masked actions executed", cell.masked_executions),
                    ));
                }
                let path = cfg.out_dir.join(format!("sweep/n{n}/{}/seed{seed}/metrics.csv", kind.name()));
                let comments = header(cfg, &[("seed", seed.to_string()), ("n_devices", n.to_string()), ("policy", kind.name().into())]);
                write_metrics_csv(create(&path)?, &comments, &cell.training)?;
                report.files.push(path);
                evals.push(cell.eval);
            }
            rows.push(sweep_row(n, kind, &evals.iter().collect::<Vec<_>>()));
        }
    }
    report.checks.extend(sweep_checks(&rows));
    let path = cfg.out_dir.join("sweep.csv");
    write_csv(&path, &header(cfg, &[]), &rows)?;
    report.files.push(path);
    report.files.push(write_manifest(cfg, "sweep", &report)?);
    Ok((report, rows))
}

#[derive(Debug, Clone)]
pub struct GapStudy {
    pub rows: Vec<GapRow>,
    pub mean_ratio: f64,
    /// Mean ratio of the random policy on the same slots.
    pub random_mean_ratio: f64,
}

/// Trains DDQN with masking on the small instance for every seed and
/// compares its greedy policy with the per-slot optimum; writes `gap.csv`.
pub fn run_oracle_gap(cfg: &ExperimentConfig) -> Result<(RunReport, GapStudy)> {
    check_modes(cfg)?;
    let env = cfg.gap.env(&cfg.env);
    let agent = crate::agent::AgentConfig { episodes: cfg.gap.episodes, masking: true, ..cfg.agent.clone() };
    let mut rows = Vec::new();
    let mut random_rows = Vec::new();
    for &seed in &cfg.seeds {
        let out = train(&env, &agent, seed)?;
        let mut policy = GreedyPolicy::new(out.networks, true);
        rows.extend(optimality_gap(&mut policy, &env, &[seed], cfg.gap.slots)?.rows);
        random_rows.extend(optimality_gap(&mut RandomPolicy::new(seed, cfg.random_all_actions), &env, &[seed], cfg.gap.slots)?.rows);
    }
    let mean = |r: &[GapRow]| r.iter().map(|x| x.ratio).sum::<f64>() / r.len().max(1) as f64;
    let study = GapStudy { mean_ratio: mean(&rows), random_mean_ratio: mean(&random_rows), rows };
    let mut report = RunReport::default();
    report.checks.push(Check::new(
        "optimality_gap",
        study.mean_ratio <= GAP_TOLERANCE,
        format!("mean ratio {:.4} (random {:.4}), tolerance {GAP_TOLERANCE}", study.mean_ratio, study.random_mean_ratio),
    ));
    let path = cfg.out_dir.join("gap.csv");
    write_gap_csv(create(&path)?, &header(cfg, &[]), &study.rows)?;
    report.files.push(path);
    report.files.push(write_manifest(cfg, "oracle-gap", &report)?);
    Ok((report, study))
}
