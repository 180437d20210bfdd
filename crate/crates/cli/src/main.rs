//! `rewardkit`: datasets, reward serving and training, open-loop reward
//! evaluation, and online policy refinement from one binary.

mod commands;
mod config;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use rewardkit::refine::RefineModality;
use rewardkit::RewardModality;

use crate::config::{split_overrides, ConfigError, RunConfig};

/// Reward-model toolkit for robot-manipulation policy refinement.
///
/// Any configuration scalar can be overridden with `--key=value`, either by
/// its dotted path (`--refine.iterations=5`) or, when unambiguous, by its
/// bare name (`--progress_sigma=0.1`).
#[derive(Debug, Parser)]
#[command(name = "rewardkit", version)]
struct Cli {
    /// Configuration file (JSON, or TOML with a `.toml` extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; defaults to a timestamped directory under `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Allow writing into an existing non-empty output directory.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Demonstration datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Reward backends: serve, train, evaluate.
    #[command(subcommand)]
    Reward(RewardCmd),
    /// Behaviour-clone on demonstrations, then refine with PPO.
    Refine {
        /// Reward source: cont, prog, comp or env.
        #[arg(long)]
        modality: Option<RefineModality>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Record every training episode to `rollouts.jsonl`.
        #[arg(long)]
        log_rollouts: bool,
    },
    /// Roll out a policy checkpoint (or the scripted expert) and log trajectories.
    Rollout {
        /// Policy checkpoint (`policy.json` of a refine run).
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum DatasetCmd {
    /// Build progress samples and contrastive pairs from demonstrations.
    Build {
        /// Trajectory file to read instead of collecting fresh demonstrations.
        #[arg(long)]
        demos: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum RewardCmd {
    /// Serve the configured backend over the line-delimited JSON protocol.
    Serve {
        /// Bind address, e.g. 127.0.0.1:0.
        #[arg(long)]
        addr: Option<String>,
        /// Logged trajectories whose privileged progress the oracle uses to
        /// resolve observations (progress never travels over the wire).
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Train a reward head on a dataset produced by `dataset build`.
    Train {
        /// Head kind: prog, comp or cont.
        #[arg(long)]
        kind: RewardModality,
        /// `samples.jsonl` (prog, comp) or `pairs.jsonl` (cont); built
        /// from fresh demonstrations when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Query the backend along trajectories and report reward quality.
    Eval {
        #[arg(long)]
        modality: Option<RewardModality>,
        /// Logged trajectories with privileged progress; default: fresh expert rollouts.
        #[arg(long, conflicts_with = "policy")]
        trajectories: Option<PathBuf>,
        /// Roll out this policy checkpoint instead of the expert.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
}

/// Long flag names known to clap, so everything else of the form
/// `--key=value` can be treated as a configuration override.
fn clap_flags() -> Vec<String> {
    fn walk(cmd: &clap::Command, out: &mut Vec<String>) {
        out.extend(cmd.get_arguments().filter_map(|a| a.get_long()).map(str::to_string));
        for sub in cmd.get_subcommands() {
            walk(sub, out);
        }
    }
    let mut out = vec!["help".to_string(), "version".to_string()];
    walk(&Cli::command(), &mut out);
    out
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let is_config = err.chain().any(|e| {
        e.downcast_ref::<ConfigError>().is_some() || matches!(e.downcast_ref::<rewardkit::Error>(), Some(rewardkit::Error::Config(_)))
    });
    if is_config {
        2
    } else {
        3
    }
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> anyhow::Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Dataset(DatasetCmd::Build { demos }) => commands::dataset_build(&cfg, demos, out, cli.force),
        Command::Reward(RewardCmd::Serve { addr, trajectories }) => commands::reward_serve(&cfg, addr, trajectories),
        Command::Reward(RewardCmd::Train { kind, data }) => commands::reward_train(&cfg, kind, data, out, cli.force),
        Command::Reward(RewardCmd::Eval {
            modality,
            trajectories,
            policy,
        }) => commands::reward_eval(&cfg, modality, trajectories, policy, out, cli.force),
        Command::Refine {
            modality,
            iterations,
            log_rollouts,
        } => {
            let mut cfg = cfg;
            if let Some(m) = modality {
                cfg.refine.modality = m;
            }
            if let Some(n) = iterations {
                cfg.refine.iterations = n;
            }
            cfg.refine.log_rollouts |= log_rollouts;
            cfg.validate()?;
            commands::refine(&cfg, out, cli.force)
        }
        Command::Rollout { policy, episodes } => commands::rollout(&cfg, policy, episodes, out, cli.force),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (args, overrides) = split_overrides(std::env::args().collect(), &clap_flags());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_include_subcommand_options() {
        let flags = clap_flags();
        for f in ["config", "force", "modality", "log-rollouts", "addr", "kind"] {
            assert!(flags.iter().any(|x| x == f), "{f}");
        }
    }
}
