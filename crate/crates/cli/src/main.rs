//! `qpmhi` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input or configuration.
//! Log verbosity follows `RUST_LOG` (default `warn`).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qpmhi::acquisition::write_result_csv;
use qpmhi::bench::{run_bench, BenchSpec};
use qpmhi::campaign::{acquire, fit_model, Campaign, CampaignConfig, CampaignState};
use qpmhi::generation::load_pool;
use qpmhi::pareto::FrontDocument;
use qpmhi::{par, rng, Error};

/// Label for the `select` command's acquisition seed.
const SELECT_LABEL: u64 = 0x5E1E;

#[derive(Parser)]
#[command(name = "qpmhi", version, about = "Multi-objective batch Bayesian optimization over discrete pools")]
struct Cli {
    /// Run every parallel section on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign; writes metrics.csv, front.json and checkpoint.json.
    Run {
        config: PathBuf,
        /// Continue from <out>/checkpoint.json.
        #[arg(long)]
        resume: bool,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the exact hypervolume of a front file.
    Hv {
        front: PathBuf,
        /// Reference point, comma separated; defaults to the file's ref_point.
        #[arg(long = "ref", value_delimiter = ',', allow_hyphen_values = true)]
        ref_point: Option<Vec<f64>>,
    },
    /// Run an acquisition ablation over a labeled pool.
    Bench {
        spec: PathBuf,
        /// Worker threads for bench cells (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Score a pool against a checkpoint and print the chosen batch, without an oracle.
    Select {
        pool: PathBuf,
        checkpoint: PathBuf,
        #[arg(short = 'q', long)]
        q: usize,
        /// Per-candidate scores CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary JSON (improving fraction, L, seed).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::UnsupportedDimension { .. }
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::Csv(_) => Failure::Usage(msg),
            _ => Failure::Runtime(msg),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))
}

fn cmd_run(config: &Path, resume: bool, out: &Path) -> Result<(), Failure> {
    let cfg = CampaignConfig::load(config)?;
    fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("creating {}: {e}", out.display())))?;
    let checkpoint = out.join("checkpoint.json");
    let mut campaign = if resume {
        let c = Campaign::resume(&checkpoint)?;
        if c.state().config_hash != cfg.hash() {
            return Err(Failure::Usage(format!(
                "{} was written for a different configuration",
                checkpoint.display()
            )));
        }
        log::info!("resuming at iteration {}", c.state().iteration);
        c
    } else {
        Campaign::start(cfg)?.with_checkpoint(&checkpoint)
    };
    let outcome = campaign.run();
    // Metrics and front reflect whatever completed, even on failure.
    write(&out.join("metrics.csv"), &campaign.metrics_csv(false)?)?;
    let front = serde_json::to_string_pretty(&campaign.state().front.to_document())
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    write(&out.join("front.json"), &front)?;
    outcome.map_err(|e| Failure::Runtime(format!("{e} (checkpoint kept at {})", checkpoint.display())))
}

fn cmd_hv(front: &Path, ref_point: Option<&[f64]>) -> Result<f64, Failure> {
    let text = fs::read_to_string(front).map_err(|e| Failure::Usage(format!("{}: {e}", front.display())))?;
    let doc: FrontDocument =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", front.display())))?;
    Ok(doc.hypervolume(ref_point)?)
}

fn cmd_bench(spec: &Path, workers: usize) -> Result<(), Failure> {
    let spec = BenchSpec::load(spec)?;
    let report = run_bench(&spec, workers)?;
    for row in report.aggregate.iter().filter(|r| r.iteration == spec.iterations) {
        println!(
            "{:<10} hv {:.6} ± {:.6}  recovered {:.4} ± {:.4}",
            row.acquisition,
            row.hv_mean,
            row.hv_ci95,
            row.fraction_recovered_mean,
            row.fraction_recovered_ci95
        );
    }
    Ok(())
}

fn cmd_select(pool: &Path, checkpoint: &Path, q: usize, out: Option<&Path>, summary: Option<&Path>) -> Result<(), Failure> {
    if q == 0 {
        return Err(Failure::Usage("q must be at least 1".into()));
    }
    let mut state = CampaignState::load(checkpoint)?;
    let loaded = load_pool(pool, state.encoding())?;
    if loaded.candidates.is_empty() {
        return Err(Failure::Usage(format!("{} has no candidates", pool.display())));
    }
    state.config.batch_size = q;
    let model = fit_model(&state)?;
    let seed = rng::derive(state.rng.seed, SELECT_LABEL, state.iteration as u64);
    let result = acquire(&state, &loaded.candidates, Some(&model), seed)?;
    for &i in &result.selected {
        println!("{}", loaded.candidates[i].id);
    }
    if let Some(path) = out {
        let ids: Vec<String> = loaded.candidates.iter().map(|c| c.id.clone()).collect();
        let file = fs::File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        write_result_csv(file, &ids, &result)?;
    }
    if let Some(path) = summary {
        let text = serde_json::to_string(&result.summary()).map_err(|e| Failure::Runtime(e.to_string()))?;
        write(path, &text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    par::force_sequential(cli.sequential);
    let outcome = match &cli.command {
        Command::Run { config, resume, out } => cmd_run(config, *resume, out),
        Command::Hv { front, ref_point } => cmd_hv(front, ref_point.as_deref()).map(|hv| println!("{hv}")),
        Command::Bench { spec, workers } => cmd_bench(spec, *workers),
        Command::Select {
            pool,
            checkpoint,
            q,
            out,
            summary,
        } => cmd_select(pool, checkpoint, *q, out.as_deref(), summary.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
