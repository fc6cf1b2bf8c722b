//! The `uispec` command line.

use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;
use uispec::client::{MockClient, ModelClient};
use uispec::codegen::{generate_ui, CodegenConfig, CommandToolchain, StubToolchain, Toolchain};
use uispec::edit::{apply_with_repair, EditInstruction};
use uispec::metrics::{evaluate_fidelity, load_png, write_csv, ScoredPair};
use uispec::retrieval::{ExemplarStore, DEFAULT_K};
use uispec::spec::{parse_spec, serialize_spec, SpecDocument};
use uispec::validate::validate;

use crate::api::{serve, AppState, ServiceConfig};
use crate::http_client::{HttpModelClient, UnconfiguredClient};

type CliResult<T = ()> = Result<T, Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(
    name = "uispec",
    version,
    about = "Structured UI specifications: store, generate, score, serve"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Manage a SPEC-code exemplar store (JSONL).
    Store {
        #[command(subcommand)]
        action: StoreAction,
    },
    /// Generate code for a SPEC, grounded on a store, and run the debug loop.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Checker command; `{dir}` expands to the scratch directory.
        #[arg(long, env = "SPEC_TOOLCHAIN")]
        toolchain: Option<String>,
        #[arg(short, long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Fixture directory for the mock model client.
        #[arg(long)]
        mock: Option<PathBuf>,
    },
    /// Score a rendered page against its reference screenshot.
    Score {
        #[arg(long)]
        render: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Also write a CSV row to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the validation report of a SPEC file.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Apply a JSONL edit script with the repair loop.
    Edit {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Where to write the edited SPEC; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mock: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "SPEC_DATA_DIR", default_value = "data")]
        data: PathBuf,
        #[arg(long)]
        mock: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, env = "SPEC_TOOLCHAIN")]
        toolchain: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum StoreAction {
    /// Append one exemplar.
    Add {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        code: PathBuf,
    },
    /// Top-k exemplars for a SPEC.
    Query {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
    },
    Stats {
        #[arg(long)]
        store: PathBuf,
    },
}

fn read_spec(path: &Path) -> CliResult<SpecDocument> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(parse_spec(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

/// `--mock`, then `SPEC_MOCK_DIR`, then `SPEC_MODEL_ENDPOINT`.
pub fn model_client(mock: Option<&Path>) -> CliResult<Arc<dyn ModelClient>> {
    if let Some(dir) = mock {
        return Ok(Arc::new(MockClient::new(dir)?));
    }
    if let Some(client) = MockClient::from_env() {
        return Ok(Arc::new(client?));
    }
    if let Some(client) = HttpModelClient::from_env() {
        return Ok(Arc::new(client?));
    }
    Ok(Arc::new(UnconfiguredClient))
}

pub fn toolchain(command: Option<&str>) -> CliResult<Arc<dyn Toolchain>> {
    match command {
        Some(cmd) => Ok(Arc::new(
            CommandToolchain::parse(cmd).ok_or("empty toolchain command")?,
        )),
        None => Ok(Arc::new(StubToolchain::default())),
    }
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json values serialize")
    );
}

pub fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Store { action } => store(action).map(|()| ExitCode::SUCCESS),
        Command::Generate {
            spec,
            store,
            out,
            toolchain: tc,
            k,
            mock,
        } => {
            let doc = read_spec(&spec)?;
            let store = store.map(ExemplarStore::open).transpose()?;
            let client = model_client(mock.as_deref())?;
            let tc = toolchain(tc.as_deref())?;
            let outcome = generate_ui(
                &doc,
                store.as_ref(),
                k,
                client.as_ref(),
                tc.as_ref(),
                &CodegenConfig::default(),
            )?;
            for (path, text) in &outcome.artifact.files {
                let target = out.join(path);
                if let Some(parent) = target.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(target, text)?;
            }
            print_json(&json!({
                "out": out,
                "files": outcome.artifact.files.keys().collect::<Vec<_>>(),
                "hits": outcome.hits,
                "compile_ok": outcome.compile.ok,
                "diagnostics": outcome.compile.diagnostics,
                "revisions": outcome.revisions,
            }));
            Ok(if outcome.compile.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Score {
            render,
            reference,
            csv,
        } => {
            let record = evaluate_fidelity(&load_png(&render)?, &load_png(&reference)?, None)?;
            print_json(&serde_json::to_value(record)?);
            if let Some(path) = csv {
                let row = ScoredPair {
                    render,
                    reference,
                    record,
                };
                write_csv(fs::File::create(path)?, &[row])?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { spec } => {
            let report = validate(&read_spec(&spec)?);
            print_json(&serde_json::to_value(&report)?);
            Ok(if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Edit {
            spec,
            script,
            out,
            mock,
        } => {
            let doc = read_spec(&spec)?;
            let edits = EditInstruction::parse_jsonl(&fs::read_to_string(&script)?)?;
            let client = model_client(mock.as_deref())?;
            let outcome = apply_with_repair(&doc, &edits, client.as_ref())?;
            eprintln!(
                "{} after {} attempt(s), {} repair call(s)",
                if outcome.succeeded {
                    "applied"
                } else {
                    "unchanged"
                },
                outcome.attempts,
                outcome.repair_calls
            );
            let text = serialize_spec(&outcome.result);
            match out {
                Some(path) => fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
            Ok(if outcome.succeeded {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Serve {
            port,
            host,
            data,
            mock,
            store,
            toolchain: tc,
        } => {
            let mut config = ServiceConfig::new(
                &data,
                model_client(mock.as_deref())?,
                toolchain(tc.as_deref())?,
            );
            config.store = store.map(ExemplarStore::open).transpose()?.map(Arc::new);
            let state = AppState::open(config)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                println!("listening on http://{}/api/v1", listener.local_addr()?);
                serve(listener, state, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn store(action: StoreAction) -> CliResult {
    match action {
        StoreAction::Add { store, spec, code } => {
            let mut s = ExemplarStore::open(&store)?;
            let id = s.add(read_spec(&spec)?, fs::read_to_string(&code)?)?;
            print_json(&json!({"id": id, "records": s.len()}));
        }
        StoreAction::Query { store, spec, k } => {
            let s = ExemplarStore::open(&store)?;
            print_json(&serde_json::to_value(s.query(&read_spec(&spec)?, k)?)?);
        }
        StoreAction::Stats { store } => {
            print_json(&serde_json::to_value(ExemplarStore::open(&store)?.stats())?);
        }
    }
    Ok(())
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
