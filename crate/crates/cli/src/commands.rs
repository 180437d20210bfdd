//! Subcommand implementations.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context};
use log::info;
use rewardkit::eval::{collect_records, cumulative_accuracy_csv, MetricsReport};
use rewardkit::refine::{self, pretrain_policy, rollout_policy, IterationMetrics, Policy};
use rewardkit::reward::{OracleBackend, ProgressTable, RemoteBackend, RewardBackend, RewardModality, StubServer};
use rewardkit::sim::{collect_demonstrations, rollout_expert};
use rewardkit::training::{train_head, HeadBackend, HeadDataset, RewardHead};
use rewardkit::trajectory::{
    build_contrastive_pairs, dataset_samples, read_jsonl, read_records, write_jsonl, write_records, ContrastivePair,
    ProgressSample,
};
use rewardkit::{rng, Trajectory};
use serde::Serialize;

use crate::config::{BackendKind, ConfigError, RunConfig};
use crate::rundir;

/// Seed streams for trajectories generated by the CLI itself.
const EVAL_TRAJ_STREAM: u64 = 0xE0A1;
const ROLLOUT_STREAM: u64 = 0x0A11;

fn demonstrations(cfg: &RunConfig, path: Option<&Path>) -> anyhow::Result<Vec<Trajectory>> {
    match path.or(cfg.dataset.demos.as_deref()) {
        Some(path) => {
            let demos = read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
            if demos.is_empty() {
                bail!("{} contains no trajectories", path.display());
            }
            info!("read {} demonstrations from {}", demos.len(), path.display());
            Ok(demos)
        }
        None => {
            let demos = collect_demonstrations(&cfg.env, cfg.dataset.n_demos, cfg.dataset.noise_std)?;
            info!("collected {} demonstrations (noise_std={})", demos.len(), cfg.dataset.noise_std);
            Ok(demos)
        }
    }
}

/// Keyframe samples and temporal pairs; pairs never cross trajectories.
fn build_dataset(cfg: &RunConfig, demos: &[Trajectory]) -> anyhow::Result<(Vec<ProgressSample>, Vec<ContrastivePair>)> {
    let samples = dataset_samples(demos, cfg.dataset.levels)?;
    let pairs = samples
        .chunks(cfg.dataset.levels)
        .flat_map(|per_traj| build_contrastive_pairs(per_traj, cfg.dataset.gap_levels))
        .collect();
    Ok((samples, pairs))
}

fn backend(cfg: &RunConfig) -> anyhow::Result<Arc<dyn RewardBackend>> {
    Ok(match cfg.backend.kind {
        BackendKind::Oracle => Arc::new(OracleBackend::new(cfg.noise)),
        BackendKind::Head => {
            let path = cfg.backend.head.as_deref().expect("validated");
            let head = RewardHead::load(path).with_context(|| format!("loading head {}", path.display()))?;
            Arc::new(HeadBackend::new(head))
        }
        BackendKind::Remote => Arc::new(RemoteBackend::new(cfg.backend.endpoint.clone(), cfg.backend.timeout_ms)),
    })
}

fn require_support(backend: &dyn RewardBackend, modality: RewardModality) -> anyhow::Result<()> {
    if !backend.supports(modality) {
        bail!(ConfigError(format!("backend {} does not serve {modality} rewards", backend.name())));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn load_policy(path: &Path) -> anyhow::Result<Policy> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let policy: Policy = serde_json::from_str(&text).with_context(|| format!("parsing policy {}", path.display()))?;
    if !policy.is_finite() {
        bail!("policy {} has non-finite parameters", path.display());
    }
    Ok(policy)
}

pub fn dataset_build(cfg: &RunConfig, demos_path: Option<PathBuf>, out: Option<&Path>, force: bool) -> anyhow::Result<()> {
    let demos = demonstrations(cfg, demos_path.as_deref())?;
    let (samples, pairs) = build_dataset(cfg, &demos)?;
    let dir = rundir::create(out, &cfg.out_dir, "dataset", force)?;
    rundir::write(&dir, "config.json", cfg.to_json())?;
    write_jsonl(&demos, dir.join("demos.jsonl"))?;
    write_records(&samples, dir.join("samples.jsonl"))?;
    write_records(&pairs, dir.join("pairs.jsonl"))?;
    println!(
        "{} trajectories -> {} progress samples, {} contrastive pairs in {}",
        demos.len(),
        samples.len(),
        pairs.len(),
        dir.display()
    );
    Ok(())
}

pub fn reward_serve(cfg: &RunConfig, addr: Option<String>, trajectories: Option<PathBuf>) -> anyhow::Result<()> {
    let addr = addr.unwrap_or_else(|| cfg.serve.addr.clone());
    let backend: Arc<dyn RewardBackend> = match (cfg.backend.kind, trajectories.or(cfg.serve.trajectories.clone())) {
        (BackendKind::Oracle, Some(path)) => {
            let trajs = read_jsonl(&path).with_context(|| format!("reading {}", path.display()))?;
            let table = ProgressTable::from_trajectories(&trajs);
            info!("oracle progress table: {} observations from {}", table.len(), path.display());
            Arc::new(OracleBackend::new(cfg.noise).with_table(table))
        }
        (BackendKind::Oracle, None) => {
            log::warn!("serving the oracle without --trajectories: every query will be unresolved");
            backend(cfg)?
        }
        _ => backend(cfg)?,
    };
    let server = StubServer::bind(backend, &addr)?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&shutdown);
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)).context("installing signal handler")?;
    println!("listening on {}", server.local_addr()?);
    std::io::stdout().flush()?;
    server.run(shutdown)?;
    info!("reward server shut down");
    Ok(())
}

pub fn reward_train(
    cfg: &RunConfig,
    kind: RewardModality,
    data: Option<PathBuf>,
    out: Option<&Path>,
    force: bool,
) -> anyhow::Result<()> {
    let dataset = match (&data, kind) {
        (Some(path), RewardModality::Contrastive) => HeadDataset::Pairs(read_records(path)?),
        (Some(path), _) => HeadDataset::Samples(read_records(path)?),
        (None, _) => {
            let demos = demonstrations(cfg, None)?;
            let (samples, pairs) = build_dataset(cfg, &demos)?;
            match kind {
                RewardModality::Contrastive => HeadDataset::Pairs(pairs),
                _ => HeadDataset::Samples(samples),
            }
        }
    };
    if dataset.is_empty() {
        bail!("training data is empty");
    }
    let head = train_head(kind, &dataset, &cfg.head)?;
    let dir = rundir::create(out, &cfg.out_dir, &format!("head-{kind}"), force)?;
    rundir::write(&dir, "config.json", cfg.to_json())?;
    head.save(dir.join("head.json"))?;
    println!(
        "trained {kind} head on {} examples: loss {:.6}; checkpoint {}",
        dataset.len(),
        head.train_loss,
        dir.join("head.json").display()
    );
    Ok(())
}

pub fn reward_eval(
    cfg: &RunConfig,
    modality: Option<RewardModality>,
    trajectories: Option<PathBuf>,
    policy: Option<PathBuf>,
    out: Option<&Path>,
    force: bool,
) -> anyhow::Result<()> {
    let modality = modality.unwrap_or(cfg.eval.modality);
    let backend = backend(cfg)?;
    require_support(backend.as_ref(), modality)?;
    let n = cfg.eval.n_trajectories;
    let episode_seed = |i: usize| rng::derive(rng::derive(cfg.seed, EVAL_TRAJ_STREAM), i as u64);
    let trajs: Vec<Trajectory> = match (&trajectories, &policy) {
        (Some(path), _) => {
            let t = read_jsonl(path)?;
            if t.is_empty() {
                bail!("{} contains no trajectories", path.display());
            }
            t
        }
        (None, Some(path)) => {
            let policy = load_policy(path)?;
            (0..n)
                .map(|i| rollout_policy(&policy, &cfg.env, episode_seed(i), format!("eval-{i:03}")))
                .collect::<Result<_, _>>()?
        }
        (None, None) => (0..n)
            .map(|i| rollout_expert(&cfg.env, episode_seed(i), cfg.eval.expert_noise, format!("eval-{i:03}")))
            .collect::<Result<_, _>>()?,
    };
    let records = collect_records(backend.as_ref(), modality, &trajs, cfg.eval.interval)?;
    let report = MetricsReport::compute(modality, &records);

    let dir = rundir::create(out, &cfg.out_dir, &format!("eval-{modality}"), force)?;
    rundir::write(&dir, "config.json", cfg.to_json())?;
    if trajectories.is_none() {
        write_jsonl(&trajs, dir.join("trajectories.jsonl"))?;
    }
    write_records(&records, dir.join("records.jsonl"))?;
    report.write_json(dir.join("metrics.json"))?;
    if modality == RewardModality::Progress {
        rundir::write(&dir, "cumulative_accuracy.csv", cumulative_accuracy_csv(&records))?;
    }
    let table = report.to_table();
    rundir::write(&dir, "metrics.txt", &table)?;
    print!("{table}");
    println!("wrote {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct RefineReport<'a> {
    modality: &'a str,
    seed: u64,
    iterations: usize,
    baseline_success: f64,
    final_success: f64,
    improvement: f64,
    curve: Vec<f64>,
}

fn write_metrics_csv(path: &Path, rows: &[IterationMetrics]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn refine(cfg: &RunConfig, out: Option<&Path>, force: bool) -> anyhow::Result<()> {
    let modality = cfg.refine.modality;
    let backend = backend(cfg)?;
    if let Some(m) = modality.reward_modality() {
        require_support(backend.as_ref(), m)?;
    }
    let dir = rundir::create(out, &cfg.out_dir, &format!("refine-{modality}"), force)?;
    rundir::write(&dir, "config.json", cfg.to_json())?;

    let demos = demonstrations(cfg, None)?;
    let bc = pretrain_policy(&cfg.env, &demos, &cfg.bc, cfg.refine.init_log_std)?;
    rundir::write(&dir, "bc_policy.json", to_json(&bc))?;
    info!("behaviour cloning done; refining with {modality} for {} iterations", cfg.refine.iterations);

    let outcome = refine::refine(bc, &cfg.env, backend.as_ref(), &cfg.refine)?;
    rundir::write(&dir, "policy.json", to_json(&outcome.policy))?;
    rundir::write(&dir, "critic.json", to_json(&outcome.critic))?;
    write_metrics_csv(&dir.join("metrics.csv"), &outcome.metrics)?;
    if cfg.refine.log_rollouts {
        write_jsonl(&outcome.rollouts, dir.join("rollouts.jsonl"))?;
    }
    let curve = outcome.curve();
    let report = RefineReport {
        modality: modality.as_str(),
        seed: cfg.seed,
        iterations: cfg.refine.iterations,
        baseline_success: curve[0],
        final_success: outcome.final_success_rate(),
        improvement: outcome.final_success_rate() - curve[0],
        curve,
    };
    rundir::write(&dir, "report.json", to_json(&report))?;
    println!(
        "{modality}: success {:.3} -> {:.3} ({:+.1} points); run {}",
        report.baseline_success,
        report.final_success,
        100.0 * report.improvement,
        dir.display()
    );
    Ok(())
}

pub fn rollout(
    cfg: &RunConfig,
    policy: Option<PathBuf>,
    episodes: Option<usize>,
    out: Option<&Path>,
    force: bool,
) -> anyhow::Result<()> {
    let n = episodes.unwrap_or(cfg.eval.n_trajectories);
    if n == 0 {
        bail!(ConfigError("--episodes must be positive".into()));
    }
    let policy = policy.as_deref().map(load_policy).transpose()?;
    let seed = |i: usize| rng::derive(rng::derive(cfg.seed, ROLLOUT_STREAM), i as u64);
    let trajs: Vec<Trajectory> = (0..n)
        .map(|i| {
            let id = format!("rollout-{i:03}");
            match &policy {
                Some(p) => rollout_policy(p, &cfg.env, seed(i), id),
                None => rollout_expert(&cfg.env, seed(i), cfg.eval.expert_noise, id),
            }
        })
        .collect::<Result<_, _>>()?;
    let dir = rundir::create(out, &cfg.out_dir, "rollout", force)?;
    rundir::write(&dir, "config.json", cfg.to_json())?;
    write_jsonl(&trajs, dir.join("trajectories.jsonl"))?;
    let successes = trajs.iter().filter(|t| t.success).count();
    println!(
        "{n} episodes, success rate {:.3}; trajectories in {}",
        successes as f64 / n as f64,
        dir.display()
    );
    Ok(())
}
