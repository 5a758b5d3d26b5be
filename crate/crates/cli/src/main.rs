use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use chrono::Utc;
use chrono_tz::Tz;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use qabot_cli::report::{self, ReportKind};
use qabot_cli::server;
use qabot_core::analytics::DEFAULT_GAP_MINUTES;
use qabot_core::config::Config;
use qabot_core::engine::EngineConfig;
use qabot_core::gateway::Outbox;
use qabot_core::sim::{run_script, TranscriptScript};
use qabot_core::store::to_jsonl;

#[derive(Parser)]
#[command(name = "qabot", version, about = "LLM question-answering chatbot for messaging platforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the webhook service, sandbox channel and daily scheduler.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Use the deterministic offline provider.
        #[arg(long)]
        mock: bool,
    },
    /// Replay a scripted conversation and write the outbound transcript.
    Simulate {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the script's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the resulting event log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Compute metrics from an event log.
    Report {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        #[arg(long, default_value_t = DEFAULT_GAP_MINUTES)]
        gap_minutes: i64,
        #[arg(long, default_value = "UTC")]
        timezone: Tz,
        /// Directory for `<kind>.txt` and `<kind>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Daily question controls.
    Topq {
        #[command(subcommand)]
        action: TopqCommand,
    },
}

#[derive(Subcommand)]
enum TopqCommand {
    /// Broadcast today's question immediately.
    SendNow {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mock: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve { config, mock } => {
            let cfg = Config::load(&config)?;
            let state = server::build_state(&cfg, mock)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(state, &cfg.gateway.listen))
        }
        Command::Simulate { script, out, seed, log } => {
            let src = std::fs::read_to_string(&script).with_context(|| format!("reading {}", script.display()))?;
            let parsed = TranscriptScript::parse(&src)?;
            let run = run_script(&parsed, EngineConfig::default(), seed)?;
            std::fs::write(&out, &run.transcript).with_context(|| format!("writing {}", out.display()))?;
            if let Some(log) = log {
                std::fs::write(&log, to_jsonl(run.engine.records()))?;
            }
            Ok(())
        }
        Command::Report {
            log,
            kind,
            gap_minutes,
            timezone,
            out,
        } => {
            let records = report::load(&log)?;
            let r = report::build(&records, kind, gap_minutes, timezone);
            print!("{}", r.text);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join(format!("{}.txt", kind.name())), &r.text)?;
                std::fs::write(
                    dir.join(format!("{}.json", kind.name())),
                    serde_json::to_string_pretty(&r.json)?,
                )?;
            }
            Ok(())
        }
        Command::Topq {
            action: TopqCommand::SendNow { config, mock },
        } => {
            let cfg = Config::load(&config)?;
            let state = server::build_state(&cfg, mock)?;
            let mut engine = state.engine.lock().expect("engine lock");
            let outbox: &dyn Outbox = state.outbox.as_ref();
            match engine.broadcast_topq(Utc::now(), Some(outbox))? {
                Some(b) => println!(
                    "sent entry {} to {} users ({} failed)",
                    b.entry_id,
                    b.recipients.len(),
                    b.failed.len()
                ),
                None => println!("nothing to feature today"),
            }
            engine.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
