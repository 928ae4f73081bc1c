use std::io::{BufRead, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use vuishim::config::{BackendKind, ConfigError, ConfigLayer, Settings};
use vuishim::dataset::{self, DatasetError, DistributionSpec, SplitSizes};
use vuishim::eval::{self, ReplayError};
use vuishim::gateway::{self, GatewayState};
use vuishim::normalizer::{NormalizationResult, NormalizeRequest, SelectionContext};
use vuishim::segmenter::Millis;
use vuishim::session::{to_ndjson, Session};

const EXIT_CODES: &str = "\
Exit codes:
  0   success (normalize: command corrected or passed through)
  1   internal error
  2   normalize: the shim asked a clarification question
  3   normalize: no command; suggestions shown
  64  usage error: unknown flag, bad value, invalid configuration
  66  input missing, unreadable or malformed (data, corpus, lexicon, config file)
  69  service unavailable: the gateway could not bind its address
  73  output could not be written

Settings precedence: flags > environment > config file > defaults.";

#[derive(Debug, Parser)]
#[command(name = "vuishim", version, about, after_long_help = EXIT_CODES, after_help = EXIT_CODES)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML config file.
    #[arg(long, global = true, env = "VUISHIM_CONFIG")]
    config: Option<PathBuf>,
    /// Lexicon TOML replacing the built-in one.
    #[arg(long, global = true, env = "VUISHIM_LEXICON")]
    lexicon: Option<PathBuf>,
    /// Confidence threshold (0-100) below which corrections become suggestions.
    #[arg(long, global = true, env = "VUISHIM_THRESHOLD")]
    threshold: Option<u32>,
    /// Normalizer backend.
    #[arg(long, global = true, value_enum, env = "VUISHIM_BACKEND")]
    backend: Option<BackendKind>,
    /// Silence window of the legacy segmenter.
    #[arg(long, global = true, env = "VUISHIM_LEGACY_WINDOW_MS")]
    legacy_window_ms: Option<Millis>,
    /// Silence window of the shim segmenter.
    #[arg(long, global = true, env = "VUISHIM_SHIM_WINDOW_MS")]
    shim_window_ms: Option<Millis>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize one utterance and print the result as JSON.
    Normalize {
        #[arg(long)]
        utterance: String,
        /// Currently selected text.
        #[arg(long)]
        selection: Option<String>,
        /// Recent canonical commands, most recent first. Repeatable.
        #[arg(long)]
        history: Vec<String>,
    },
    /// Generate train/val/test JSONL files and a manifest.
    GenData {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, env = "VUISHIM_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        val: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
    },
    /// Score a backend on a JSONL split and print the report as JSON.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Print a table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Speak a corpus into the bare legacy interface and through the shim,
    /// with random pauses, and compare failures.
    Replay {
        /// JSONL of cases or dataset records; the built-in corpus if absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, env = "VUISHIM_SEED")]
        seed: Option<u64>,
        #[arg(long, env = "VUISHIM_JITTER_MIN_MS")]
        jitter_min_ms: Option<Millis>,
        #[arg(long, env = "VUISHIM_JITTER_MAX_MS")]
        jitter_max_ms: Option<Millis>,
        /// Print a table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Interactive session: one utterance per line, events as NDJSON.
    /// `:buffer` prints the buffer, `:quit` exits.
    Repl {
        /// Initial buffer text.
        #[arg(long, default_value = "")]
        text: String,
    },
    /// Run the WebSocket gateway.
    Serve {
        #[arg(long, env = "VUISHIM_PORT")]
        port: Option<u16>,
        #[arg(long, env = "VUISHIM_BIND")]
        bind: Option<String>,
    },
    /// Print the resolved settings as JSON.
    Config,
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Failure {
        Failure {
            code,
            error: error.into(),
        }
    }
}

const USAGE: u8 = 64;
const NO_INPUT: u8 = 66;
const UNAVAILABLE: u8 = 69;
const CANT_CREATE: u8 = 73;

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Failure {
        let code = match e {
            ConfigError::Invalid(_) => USAGE,
            _ => NO_INPUT,
        };
        Failure::new(code, e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn settings(global: &Global, extra: ConfigLayer) -> Result<Settings, Failure> {
    let flags = ConfigLayer {
        lexicon: global.lexicon.clone(),
        threshold: global.threshold,
        backend: global.backend,
        legacy_window_ms: global.legacy_window_ms,
        shim_window_ms: global.shim_window_ms,
        ..extra
    };
    let file = match &global.config {
        Some(path) => ConfigLayer::from_path(path)?,
        None => ConfigLayer::default(),
    };
    Ok(Settings::resolve(flags.over(file))?)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(1, e))?;
    text.push('\n');
    emit(&text)
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::new(1, e)),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let g = &cli.global;
    match cli.command {
        Command::Normalize {
            utterance,
            selection,
            history,
        } => {
            let s = settings(g, ConfigLayer::default())?;
            let backend = s.backend()?;
            let request = NormalizeRequest::new(utterance)
                .with_selection(SelectionContext::from_text(
                    selection.as_deref().unwrap_or(""),
                ))
                .with_history(history);
            let result = backend
                .normalize(&request)
                .map_err(|e| Failure::new(USAGE, e))?;
            print_json(&result)?;
            Ok(match result {
                NormalizationResult::Corrected { .. } | NormalizationResult::PassThrough { .. } => {
                    0
                }
                NormalizationResult::Clarify { .. } => 2,
                NormalizationResult::Suggest { .. } => 3,
            })
        }
        Command::GenData {
            out_dir,
            seed,
            train,
            val,
            test,
        } => {
            let s = settings(
                g,
                ConfigLayer {
                    seed,
                    ..ConfigLayer::default()
                },
            )?;
            let defaults = DistributionSpec::default();
            let spec = DistributionSpec {
                sizes: SplitSizes {
                    train: train.unwrap_or(defaults.sizes.train),
                    val: val.unwrap_or(defaults.sizes.val),
                    test: test.unwrap_or(defaults.sizes.test),
                },
                ..defaults
            }
            .with_seed(s.seed);
            let lexicon = s.load_lexicon()?;
            let manifest = dataset::write_dataset(&out_dir, &spec, &lexicon).map_err(|e| {
                let code = match e {
                    DatasetError::InfeasibleSpec(_) => USAGE,
                    _ => CANT_CREATE,
                };
                Failure::new(code, e)
            })?;
            log::info!("wrote dataset to {}", out_dir.display());
            print_json(&manifest)?;
            Ok(0)
        }
        Command::Eval {
            data,
            report,
            table,
        } => {
            let s = settings(g, ConfigLayer::default())?;
            let backend = s.backend()?;
            let samples = dataset::read_jsonl(&data).map_err(|e| Failure::new(NO_INPUT, e))?;
            let result = eval::evaluate(backend.as_ref(), &samples);
            if let Some(path) = report {
                write_json_file(&path, &result)?;
            }
            if table {
                emit(&result.to_table())?;
            } else {
                print_json(&result)?;
            }
            Ok(0)
        }
        Command::Replay {
            corpus,
            seed,
            jitter_min_ms,
            jitter_max_ms,
            table,
        } => {
            let s = settings(
                g,
                ConfigLayer {
                    seed,
                    jitter_min_ms,
                    jitter_max_ms,
                    ..ConfigLayer::default()
                },
            )?;
            let cases = match &corpus {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("cannot read {}", path.display()))
                        .map_err(|e| Failure::new(NO_INPUT, e))?;
                    eval::parse_corpus(&text).map_err(|e| Failure::new(NO_INPUT, e))?
                }
                None => eval::repair_corpus(),
            };
            let report = eval::replay_compare_with(&cases, &s.replay_config(), s.backend()?)
                .map_err(|e| {
                    let code = match e {
                        ReplayError::EmptyCorpus
                        | ReplayError::GapCount { .. }
                        | ReplayError::Malformed { .. } => NO_INPUT,
                        _ => USAGE,
                    };
                    Failure::new(code, e)
                })?;
            if table {
                emit(&report.to_table())?;
            } else {
                print_json(&report)?;
            }
            Ok(0)
        }
        Command::Repl { text } => {
            let s = settings(g, ConfigLayer::default())?;
            match repl(&s, &text) {
                Err(e)
                    if e.downcast_ref::<std::io::Error>()
                        .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => {}
                other => other.map_err(|e| Failure::new(1, e))?,
            }
            Ok(0)
        }
        Command::Serve { port, bind } => {
            let s = settings(
                g,
                ConfigLayer {
                    port,
                    bind,
                    ..ConfigLayer::default()
                },
            )?;
            serve(&s)
        }
        Command::Config => {
            let s = settings(g, ConfigLayer::default())?;
            s.load_lexicon()?;
            print_json(&s)?;
            Ok(0)
        }
    }
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut json = serde_json::to_string_pretty(value).map_err(|e| Failure::new(1, e))?;
    json.push('\n');
    dataset::write_atomic(path, json.as_bytes()).map_err(|e| Failure::new(CANT_CREATE, e))
}

fn repl(settings: &Settings, text: &str) -> anyhow::Result<()> {
    let mut session = Session::open_with(text, settings.session_config(), settings.backend()?)?;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        let line = line.trim();
        match line {
            "" => continue,
            ":quit" | ":q" => break,
            ":buffer" => {
                writeln!(
                    stdout,
                    "{}",
                    serde_json::json!({ "buffer": session.buffer_text() })
                )?;
            }
            utterance => {
                let events = session.utter(utterance)?;
                stdout.write_all(to_ndjson(&events).as_bytes())?;
            }
        }
        stdout.flush()?;
    }
    Ok(())
}

fn serve(settings: &Settings) -> Result<u8, Failure> {
    let ip: IpAddr = settings.bind.parse().map_err(|e| {
        Failure::new(
            USAGE,
            anyhow!("invalid bind address {:?}: {e}", settings.bind),
        )
    })?;
    let addr = SocketAddr::new(ip, settings.port);
    let state = GatewayState::new(settings.backend()?, settings.session_config());
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new(1, e))?;
    runtime.block_on(async move {
        let listener = gateway::bind(addr)
            .await
            .map_err(|e| Failure::new(UNAVAILABLE, anyhow!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| Failure::new(1, e))?;
        log::info!("gateway listening on {local}");
        emit(&format!(
            "{}\n",
            serde_json::json!({ "listening": local.to_string() })
        ))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        gateway::serve(listener, state, shutdown)
            .await
            .map_err(|e| Failure::new(1, e))?;
        Ok(0)
    })
}
