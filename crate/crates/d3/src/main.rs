mod cli;
mod config;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, RunContext};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    let config = match cli::load_config(&cli) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let level = cli.log_level.clone().or_else(|| config.log_level.clone()).unwrap_or_else(|| "warn".into());
    env_logger::Builder::new().parse_filters(&level).target(env_logger::Target::Stderr).init();

    let workers = cli.workers.or(config.workers).unwrap_or_else(cli::default_workers).max(1);
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
        log::warn!("could not size the thread pool: {e}");
    }
    let runtime = match tokio::runtime::Builder::new_multi_thread()
        .worker_threads(workers)
        .max_blocking_threads(workers.max(2))
        .enable_all()
        .build()
    {
        Ok(rt) => rt,
        Err(e) => return fail(&e.into()),
    };
    let ctx = RunContext { config, seed, workers };
    match runtime.block_on(cli::dispatch(cli, ctx)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

/// One JSON line on stderr; exit 2 for invalid invocations, 1 otherwise.
fn fail(err: &anyhow::Error) -> ExitCode {
    if cli::is_usage(err) {
        eprintln!("error: {err}\n\nFor more information, try '--help'.");
        return ExitCode::from(2);
    }
    let message = format!("{err:#}");
    eprintln!("{}", serde_json::json!({"error": cli::error_kind(err), "message": message}));
    ExitCode::from(1)
}
