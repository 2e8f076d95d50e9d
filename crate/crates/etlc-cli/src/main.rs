//! Command-line scenario runner and property checker for the notification
//! simulator.
//!
//! Verbs: `run` executes one scenario deterministically and writes its
//! transcript; `sweep` produces the full strategy-product corpus; `check`
//! evaluates the protocol properties over transcripts and exits nonzero on
//! any failure; `explain` renders a session's stage-by-stage narrative.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use etlc::harness;
use etlc::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "etlc",
    version,
    about = "Deterministic trusted-data-notification simulator"
)]
struct Cli {
    /// Output directory for transcripts. Falls back to $ETLC_OUT_DIR, then ./out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its transcript.
    Run {
        /// Scenario JSON file; the built-in honest scenario when omitted.
        scenario: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Defer the ciphertext well-formedness check to the final stage.
        #[arg(long)]
        defer_proof_check: bool,
    },
    /// Evaluate every protocol property over transcripts (files or directories).
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Run the notifier-strategy x receiver-strategy product corpus.
    Sweep {
        /// Base seed for the corpus derivation.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print the stage-by-stage narrative of one session.
    Explain {
        transcript: PathBuf,
        #[arg(default_value_t = 0)]
        session: u64,
    },
}

fn out_dir(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| std::env::var_os("ETLC_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let out = out_dir(&cli.out);
    match cli.command {
        Command::Run {
            scenario,
            seed,
            defer_proof_check,
        } => {
            let mut scenario = match &scenario {
                Some(path) => Scenario::from_json(
                    &std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?,
                )?,
                None => Scenario::default_honest(),
            };
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            if defer_proof_check {
                scenario.defer_proof_check = true;
            }
            let transcript = etlc::actors::run_scenario(scenario)?;
            let path = harness::write_transcript(&transcript, &out)?;
            println!("scenario: {}", transcript.scenario.name);
            println!("transcript: {}", path.display());
            println!("content hash: {}", transcript.content_hash());
            println!("final height: {}", transcript.final_height);
            for session in &transcript.sessions {
                println!(
                    "session {}: {} (version {})",
                    session.id,
                    session.state,
                    session.version.map_or("unbound".into(), |v| v.to_string())
                );
            }
            for (account, after) in &transcript.final_balances {
                let delta = transcript.balance_delta(account);
                println!("balance {account}: {after} ({delta:+})");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { paths } => {
            let mut transcripts = Vec::new();
            for path in &paths {
                transcripts.extend(harness::load_transcripts(Path::new(path))?);
            }
            println!("checking {} transcript(s)", transcripts.len());
            let report = harness::check(&transcripts);
            print!("{}", report.render());
            if report.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Sweep { seed } => {
            let corpus = harness::sweep(seed);
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for transcript in &corpus {
                harness::write_transcript(transcript, &out)?;
            }
            println!("wrote {} transcripts to {}", corpus.len(), out.display());
            println!("corpus hash: {}", harness::corpus_hash(&corpus));
            Ok(ExitCode::SUCCESS)
        }
        Command::Explain {
            transcript,
            session,
        } => {
            let transcripts = harness::load_transcripts(&transcript)?;
            let Some(first) = transcripts.first() else {
                bail!("no transcript at {}", transcript.display());
            };
            print!("{}", harness::explain(first, session)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
