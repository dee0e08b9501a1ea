use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fairloop_cli::config::{self, Experiment, Params, RankConfig, RunOptions, Source};
use fairloop_cli::error::{CliError, CliResult};
use fairloop_cli::output::RunManifest;
use fairloop_cli::{defaults, list_experiments, replay, run_resolved};
use fairloop_core::optimizer::ConstraintKind;

#[derive(Parser)]
#[command(name = "fairloop", version, about = "Fair ranking and recommender feedback-loop experiments")]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config.
    Run {
        /// Config file (same as --config).
        config_file: Option<PathBuf>,
        #[arg(long = "config", conflicts_with = "config_file")]
        config: Option<PathBuf>,
        /// Run an experiment on its defaults without a config file.
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `key=value`, applied to params unless the key is seed, out_dir or experiment.
        #[arg(long = "override", value_name = "K=V")]
        overrides: Vec<String>,
    },
    /// Solve one fairness-constrained ranking problem.
    Rank {
        /// CSV with header `user,<items>`.
        #[arg(long)]
        relevance: PathBuf,
        /// CSV with header `item,group`.
        #[arg(long)]
        groups: PathBuf,
        #[arg(long, value_parser = parse_kind, default_value = "exposure_floor")]
        constraint: ConstraintKind,
        /// One value, or one per group separated by commas.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        epsilon: Vec<f64>,
        /// Per-user weights, comma separated.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Position weights, comma separated (default DCG).
        #[arg(long, value_delimiter = ',', conflicts_with = "top_k")]
        pi: Option<Vec<f64>>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List experiment names with one-line descriptions.
    ListExperiments,
    /// Re-run the config recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<ConstraintKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
        format!("unknown constraint `{s}` (exposure_floor, impact_floor, opportunity_floor, exposure_equal)")
    })
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os("FAIRLOOP_OUT").filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn report(manifest: &RunManifest, summary: &[String]) {
    let exp = manifest.config.get("experiment").and_then(|v| v.as_str()).unwrap_or("?");
    let out = manifest.config.get("out_dir").and_then(|v| v.as_str()).unwrap_or("?");
    println!("experiment={exp} out_dir={out} outputs={}", manifest.outputs.len());
    for line in summary {
        println!("{line}");
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Run { config_file, config, experiment, seed, out, overrides } => {
            let opts = RunOptions { seed, out, overrides, env_out: env_out() };
            let cfg = match (config_file.or(config), experiment) {
                (Some(path), None) => config::load(&path, &opts)?,
                (None, Some(name)) => {
                    let e = Experiment::from_name(&name)?;
                    config::resolve(serde_json::json!({ "experiment": e.name() }), &opts)?
                }
                (Some(_), Some(_)) => return Err(CliError::Config("give a config file or --experiment, not both".into())),
                (None, None) => return Err(CliError::Config("missing config file (or --experiment)".into())),
            };
            let (manifest, summary) = run_resolved(&cfg)?;
            report(&manifest, &summary);
        }
        Command::Rank { relevance, groups, constraint, epsilon, weights, pi, top_k, seed, out } => {
            let params = RankConfig {
                relevance: Source::Path(relevance),
                groups: Source::Path(groups),
                constraint,
                epsilon,
                weights,
                pi,
                top_k,
            };
            let cfg = config::ExperimentConfig {
                experiment: Experiment::Rank,
                seed: seed.unwrap_or(defaults::SEED),
                out_dir: out.or_else(env_out).unwrap_or_else(|| PathBuf::from("out/rank")),
                params: Params::Rank(params),
            };
            let (manifest, summary) = run_resolved(&cfg)?;
            report(&manifest, &summary);
        }
        Command::ListExperiments => print!("{}", list_experiments()),
        Command::Replay { manifest, out } => {
            let opts = RunOptions { out, ..RunOptions::default() };
            let (manifest, summary) = replay(&manifest, &opts)?;
            report(&manifest, &summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let reason = e.kind().to_string();
            let _ = e.print();
            eprintln!("{}", CliError::Config(reason).diagnostic());
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
