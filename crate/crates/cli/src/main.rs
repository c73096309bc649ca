use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use ttkrylov::experiment::dense_budget_from_env;
use ttkrylov::{presets, run_experiment, ExperimentConfig, Format, RunManifest};

#[derive(Parser)]
#[command(name = "ttkrylov", version, about = "TT-GMRES experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more configs (file paths or preset names).
    Run {
        #[arg(required = true)]
        configs: Vec<String>,
        /// Override a config key, e.g. `--set delta=1e-8`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Directory the output prefix is resolved against.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Configs run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List built-in configs.
    Presets,
}

fn load(source: &str) -> Result<String, String> {
    let path = Path::new(source);
    if path.exists() {
        return std::fs::read_to_string(path).map_err(|e| format!("{source}: {e}"));
    }
    presets::get(source).map(str::to_string).ok_or_else(|| format!("{source}: no such file or preset (see `ttkrylov presets`)"))
}

enum JobResult {
    Done(RunManifest),
    Failed(String),
}

fn run_one(source: &str, overrides: &[String], output: Option<&Path>, format: Option<FormatArg>, budget: usize) -> JobResult {
    let text = match load(source) {
        Ok(t) => t,
        Err(e) => return JobResult::Failed(e),
    };
    let mut cfg = match ExperimentConfig::parse(&text, overrides) {
        Ok(c) => c,
        Err(e) => return JobResult::Failed(format!("{source}: {e}")),
    };
    if let Some(f) = format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    for w in cfg.warnings() {
        eprintln!("warning: {source}: {w}");
    }
    match run_experiment(&cfg, output, budget) {
        Ok(m) => JobResult::Done(m),
        Err(e) => JobResult::Failed(format!("{source}: {e}")),
    }
}

fn report(source: &str, res: &JobResult) -> u8 {
    match res {
        JobResult::Failed(e) => {
            eprintln!("error: {e}");
            2
        }
        JobResult::Done(m) => {
            for r in &m.runs {
                let eta = r.final_eta_ab.map_or("-".to_string(), |v| format!("{v:.3e}"));
                let state = if r.converged { "converged" } else { "not converged" };
                eprintln!("{source} [{}]: {state} after {} iterations, final criterion {eta}", r.label, r.iterations);
            }
            for f in &m.files {
                println!("{f}");
            }
            if m.success() {
                0
            } else {
                1
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for (name, text) in presets::PRESETS {
                println!("{name:<22} {}", presets::describe(text));
            }
            ExitCode::SUCCESS
        }
        Command::Run { configs, overrides, output, format, jobs } => {
            let budget = match dense_budget_from_env() {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let next = AtomicUsize::new(0);
            let results: Mutex<Vec<Option<JobResult>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
            std::thread::scope(|s| {
                for _ in 0..jobs.clamp(1, configs.len()) {
                    s.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(src) = configs.get(i) else { break };
                        let r = run_one(src, &overrides, output.as_deref(), format, budget);
                        results.lock().expect("no poisoned jobs")[i] = Some(r);
                    });
                }
            });
            let results = results.into_inner().expect("no poisoned jobs");
            let mut code = 0u8;
            for (src, r) in configs.iter().zip(&results) {
                let r = r.as_ref().expect("every job ran");
                code = code.max(report(src, r));
            }
            ExitCode::from(code)
        }
    }
}
