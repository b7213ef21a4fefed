//! `penloop`: run the API, drive a session from the terminal, replay the
//! paired experiment, and audit or measure stored traces.

mod repl;

use std::collections::HashMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use penloop_core::config::{load_config, ConfigFlags, Settings};
use penloop_core::experiment::{load_agent, load_backend_script, load_corpus, render_table, run_paired, ExperimentError};
use penloop_core::ledger::{audit_report, import_jsonl, verify_jsonl, ChainStatus, LedgerError, Payload};
use penloop_core::metrics::compute_session_metrics;
use penloop_core::{canonical, TraceEvent};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "penloop", version, about = "Governed human-AI reasoning sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP API until interrupted.
    Serve(SettingsArgs),
    /// Drive one session interactively from the terminal.
    Repl {
        #[command(flatten)]
        settings: SettingsArgs,
        /// Directory for the session trace (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a trace's hash chain and check its gates.
    ///
    /// Exit codes: 0 pass, 1 unreadable or malformed, 2 chain break,
    /// 3 finalized with unmet gates.
    Audit { trace: PathBuf },
    /// Compute session metrics from a trace.
    Metrics {
        trace: PathBuf,
        /// Task accuracy in [0, 1]; enables the RQI.
        #[arg(long)]
        accuracy: Option<f64>,
    },
    /// Run the paired control/treatment experiment.
    Replay {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        agent: PathBuf,
        #[arg(long = "backend-script")]
        backend_script: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for report.json and report.txt (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SettingsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// creative, low, medium or high.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    /// Use a scripted backend reading replies from this file.
    #[arg(long = "backend-script")]
    backend_script: Option<String>,
}

impl SettingsArgs {
    fn load(&self) -> Result<Settings, String> {
        let env: HashMap<String, String> = std::env::vars().collect();
        let flags = ConfigFlags {
            mode: self.mode.clone(),
            theta: self.theta.clone(),
            backend_script: self.backend_script.clone(),
            ..ConfigFlags::default()
        };
        load_config(self.config.as_deref(), &env, &flags).map_err(|e| e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Serve(args) => cmd_serve(&args),
        Command::Repl { settings, out } => match settings.load() {
            Ok(s) => {
                let dir = out.unwrap_or_else(|| PathBuf::from("."));
                repl::run(&s, &dir, io::stdin().lock(), io::stdout().lock())
            }
            Err(e) => fail(&e),
        },
        Command::Audit { trace } => cmd_audit(&trace),
        Command::Metrics { trace, accuracy } => cmd_metrics(&trace, accuracy),
        Command::Replay {
            corpus,
            agent,
            backend_script,
            seed,
            out,
        } => cmd_replay(&corpus, &agent, &backend_script, seed, out.as_deref().unwrap_or(Path::new("."))),
    };
    ExitCode::from(code)
}

fn fail(message: &str) -> u8 {
    eprintln!("penloop: {message}");
    1
}

fn cmd_serve(args: &SettingsArgs) -> u8 {
    let settings = match args.load() {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => return fail(&format!("cannot start runtime: {e}")),
    };
    runtime.block_on(async {
        let server = match penloop_service::Server::bind(&settings).await {
            Ok(s) => s,
            Err(e) => return fail(&format!("{}: {e}", e.code())),
        };
        if let Ok(addr) = server.local_addr() {
            eprintln!("penloop: listening on {addr}");
        }
        let shutdown = async {
            tokio::signal::ctrl_c().await.ok();
        };
        match server.run(shutdown).await {
            Ok(()) => 0,
            Err(e) => fail(&e.to_string()),
        }
    })
}

fn print_line(text: &str) {
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn cmd_audit(path: &Path) -> u8 {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return fail(&format!("cannot read {}: {e}", path.display())),
    };
    let first_break = match verify_jsonl(&bytes) {
        Ok(ChainStatus::Intact) => None,
        Ok(ChainStatus::Broken { first_break }) => Some(first_break),
        Err(LedgerError::NonContiguousSeq { expected, .. }) => Some(expected),
        Err(e) => return fail(&format!("{}: {e}", e.code())),
    };
    let report = import_jsonl(&bytes).and_then(|events| audit_report(&events));
    match (first_break, report) {
        (Some(line), Ok(report)) => {
            print_line(&canonical::to_string(&report).expect("report has no floats"));
            eprintln!("penloop: chain broken at event {line}");
            2
        }
        (Some(line), Err(_)) => {
            print_line(&json!({ "chain_ok": false, "first_break": line }).to_string());
            eprintln!("penloop: chain broken at event {line}");
            2
        }
        (None, Err(e)) => fail(&format!("{}: {e}", e.code())),
        (None, Ok(report)) => {
            print_line(&canonical::to_string(&report).expect("report has no floats"));
            if report.mode.is_none() {
                fail("trace does not start with a session header")
            } else if !report.terminal_state_consistent() {
                eprintln!("penloop: finalized with unmet gates");
                3
            } else {
                0
            }
        }
    }
}

fn header_theta(events: &[TraceEvent]) -> Option<penloop_core::metrics::Theta> {
    match &events.first()?.payload {
        Payload::SessionHeader(h) => Some(h.theta),
        _ => None,
    }
}

fn cmd_metrics(path: &Path, accuracy: Option<f64>) -> u8 {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return fail(&format!("cannot read {}: {e}", path.display())),
    };
    let events = match verify_jsonl(&bytes).and_then(|status| match status {
        ChainStatus::Intact => import_jsonl(&bytes),
        ChainStatus::Broken { first_break } => Err(LedgerError::Malformed {
            line: first_break,
            reason: "hash chain broken".into(),
        }),
    }) {
        Ok(events) => events,
        Err(e) => return fail(&format!("{}: {e}", e.code())),
    };
    let Some(theta) = header_theta(&events) else {
        return fail("trace does not start with a session header");
    };
    match compute_session_metrics(&events, theta, accuracy, None) {
        Ok(m) => {
            print_line(&m.to_canonical_json());
            0
        }
        Err(e) => fail(&format!("{}: {e}", e.code())),
    }
}

fn cmd_replay(corpus: &Path, agent: &Path, script: &Path, seed: u64, out: &Path) -> u8 {
    let run = || -> Result<_, ExperimentError> {
        let corpus = load_corpus(corpus)?;
        let agent = load_agent(agent)?;
        let script = load_backend_script(script)?;
        run_paired(&corpus, &agent, &script, seed)
    };
    let run = match run() {
        Ok(r) => r,
        Err(e) => return fail(&format!("{}: {e}", e.code())),
    };
    let table = render_table(&run.report);
    let json = run.report.to_canonical_json();
    let written = std::fs::create_dir_all(out)
        .and_then(|()| std::fs::write(out.join("report.json"), format!("{json}\n")))
        .and_then(|()| std::fs::write(out.join("report.txt"), &table));
    if let Err(e) = written {
        return fail(&format!("cannot write reports to {}: {e}", out.display()));
    }
    print!("{table}");
    0
}
