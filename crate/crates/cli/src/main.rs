use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use greenai_cli::{load_config, run, CliError, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "greenai", version, about = "Green-AI patent topic analysis pipeline")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ingest sources and keep the green-AI intersection.
    Build,
    /// Fit one topic model.
    Fit,
    /// Run the hyperparameter grid and select a model.
    Gridsearch,
    /// Emit tables and figures.
    Report,
    /// Per-topic citation and market-value impact.
    Impact,
    /// Print the default configuration.
    Defaults,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let cmd = match cli.command {
        Cmd::Defaults => {
            print!("{}", RunConfig::default().to_toml());
            return ExitCode::SUCCESS;
        }
        Cmd::Build => Command::Build,
        Cmd::Fit => Command::Fit,
        Cmd::Gridsearch => Command::Gridsearch,
        Cmd::Report => Command::Report,
        Cmd::Impact => Command::Impact,
    };
    let overrides = Overrides { seed: cli.seed, threads: cli.threads, out: cli.out };
    let outcome = std::panic::catch_unwind(|| {
        let cfg = load_config(cli.config.as_deref(), &overrides)?;
        if cfg.config.threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.config.threads)
                .build_global()
                .map_err(|e| CliError::Internal(e.to_string()))?;
        }
        run(cmd, &cfg)
    });
    match outcome {
        Ok(Ok(m)) => {
            eprintln!("{}: wrote {} outputs", m.command, m.outputs.len());
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
