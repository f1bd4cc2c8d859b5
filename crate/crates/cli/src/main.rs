mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use issuetest::config::{BackendKind, RunConfig};
use issuetest::error::ConfigError;
use issuetest::llm::TranscriptMode;
use issuetest::pipeline::Mode;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "issuetest", version, about = "Generate fail-to-pass tests from issue descriptions and score them")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Cmd,
}

/// Overrides for keys of the JSON config file.
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Instance manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Restrict to these instance ids (repeatable).
    #[arg(long = "instance", global = true)]
    instances: Vec<String>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Transcript path; `{instance_id}` is substituted.
    #[arg(long, global = true)]
    transcript: Option<String>,
    #[arg(long, global = true, value_parser = parse_transcript_mode)]
    transcript_mode: Option<TranscriptMode>,
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    /// Response script for the scripted backend; `{instance_id}` is substituted.
    #[arg(long, global = true)]
    script: Option<String>,
    #[arg(long, global = true)]
    base_url: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Environment variable that holds the API key.
    #[arg(long, global = true)]
    api_key_env: Option<String>,
    /// Lint command; `{file}` is substituted.
    #[arg(long, global = true)]
    lint_command: Option<String>,
    /// Per-run test timeout in seconds.
    #[arg(long, global = true)]
    test_timeout: Option<u64>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full pipeline for each instance.
    Run {
        #[arg(long, default_value = "otter", value_parser = parse_mode)]
        mode: Mode,
    },
    /// Test and focal localization only.
    Localize,
    /// Localization and planning.
    Plan,
    /// Localization, planning, and single-test generation.
    Generate,
    /// Five-variant generation with selection.
    Ensemble,
    /// Score test patches against the golden code patch.
    Evaluate {
        /// Test patch for a single instance.
        #[arg(long, conflicts_with = "patches_dir")]
        patch: Option<PathBuf>,
        /// Directory with `<instance_id>.patch` files.
        #[arg(long)]
        patches_dir: Option<PathBuf>,
    },
    /// Check that each instance's golden tests go from failing to passing.
    GoldenCheck,
    /// Filter candidate code patches with generated tests.
    Filter {
        /// Directory with generated tests as `<instance_id>.patch`.
        #[arg(long)]
        tests_dir: PathBuf,
        /// Directory with `<system>/<instance_id>.patch` candidate code patches.
        #[arg(long)]
        patches_dir: PathBuf,
        /// JSON `{system: {instance_id: bool}}` marking correct patches.
        #[arg(long)]
        truth: PathBuf,
    },
    /// Similarity of a generated test to the repository's existing tests.
    Similarity {
        #[arg(long)]
        patch: PathBuf,
    },
    /// Aggregate model cost over runs in the output directory.
    CostReport {
        /// Samples to divide by; defaults to the number of runs found.
        #[arg(long)]
        samples: Option<u64>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_transcript_mode(s: &str) -> Result<TranscriptMode, String> {
    match s {
        "record" => Ok(TranscriptMode::Record),
        "replay" => Ok(TranscriptMode::Replay),
        _ => Err(format!("expected record or replay, got {s:?}")),
    }
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s {
        "http" => Ok(BackendKind::Http),
        "scripted" => Ok(BackendKind::Scripted),
        _ => Err(format!("expected http or scripted, got {s:?}")),
    }
}

fn build_config(c: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig { base_dir: std::env::current_dir().unwrap_or_default(), ..Default::default() },
    };
    let cwd = std::env::current_dir().unwrap_or_default();
    let abs = |p: &PathBuf| if p.is_absolute() { p.clone() } else { cwd.join(p) };
    if let Some(m) = &c.manifest {
        cfg.manifest = Some(abs(m));
    }
    if let Some(o) = &c.output_dir {
        cfg.output_dir = abs(o);
    }
    if let Some(t) = &c.transcript {
        cfg.transcript.path = abs(&PathBuf::from(t)).to_string_lossy().into_owned();
    }
    if let Some(m) = c.transcript_mode {
        cfg.transcript.mode = m;
    }
    if let Some(b) = c.backend {
        cfg.backend.kind = b;
    }
    if let Some(s) = &c.script {
        cfg.backend.script = Some(abs(&PathBuf::from(s)).to_string_lossy().into_owned());
    }
    if let Some(u) = &c.base_url {
        cfg.backend.base_url = u.clone();
    }
    if let Some(m) = &c.model {
        cfg.backend.model = m.clone();
    }
    if let Some(k) = &c.api_key_env {
        cfg.backend.api_key_env = k.clone();
    }
    if let Some(l) = &c.lint_command {
        cfg.lint.command = l.clone();
    }
    if let Some(t) = c.test_timeout {
        cfg.test_timeout_s = Some(t);
    }
    if let Some(p) = c.parallelism {
        cfg.parallelism = p.max(1);
    }
    cfg.output_dir = cfg.resolve(&cfg.output_dir);
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let cfg = match build_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match commands::dispatch(&cli.command, &cli.common.instances, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Stage(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
