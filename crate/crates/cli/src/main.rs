//! `dualenc`: generate synthetic corpora, train, evaluate and analyze
//! multitask dual encoders from a flat configuration.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dualenc::config::RunConfig;
use dualenc::Error;

#[derive(Parser, Debug)]
#[command(name = "dualenc", version, about = "Multitask image-text / text-text dual encoder experiments")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic world's corpora, ratings and dictionaries.
    Gen,
    /// Train a model and write its checkpoint and training log.
    Train,
    /// Zero-shot retrieval (and correlation) metrics for a checkpoint.
    Eval,
    /// Retrieval after translating captions into the pivot language.
    TranslateTest,
    /// Pairwise SVCCA scores between language representations.
    Svcca,
    /// Laplacian-eigenmap layout and SVG plot of the SVCCA scores.
    Map,
    /// Train and evaluate one model per text-text loss weight.
    Sweep,
    /// Print the merged configuration.
    Config,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::InvalidInput(_) | Error::Checkpoint { .. } | Error::Io { .. } | Error::Parse { .. } => 2,
        Error::Numeric { .. } | Error::NonFiniteGradient { .. } | Error::Degenerate(_) | Error::UndefinedCorrelation(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .init();

    let result = RunConfig::load(cli.config.as_deref(), &cli.overrides).and_then(|cfg| match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::TranslateTest => commands::translate_test(&cfg),
        Command::Svcca => commands::svcca(&cfg),
        Command::Map => commands::map(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Config => {
            for (k, v) in cfg.to_map() {
                println!("{k} = {v}");
            }
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
