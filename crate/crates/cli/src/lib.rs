//! `qekit` command-line front end.
//!
//! Every subcommand resolves a [`config::RunConfig`] (defaults < config file
//! < flags), runs, and writes a JSON report that embeds the resolved
//! configuration. Exit codes: 0 success, 1 fit non-convergence (the report is
//! still written, with `converged: false`), 2 usage, input or format errors.

pub mod args;
pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::args::Cli;
use crate::config::RunConfig;
use crate::svg::Plot;

/// Environment variable capping internal parallelism.
pub const THREADS_ENV: &str = "QEKIT_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Maps any library error to an input error.
pub(crate) fn input_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

/// What a subcommand produced, before it is written out.
pub struct Outcome {
    pub config: RunConfig,
    /// Subcommand-specific report fields.
    pub report: Map<String, Value>,
    pub converged: bool,
    pub plot: Option<Plot>,
    /// Line printed to stdout.
    pub summary: Option<String>,
    /// Report location when it differs from `--output` (data-producing commands).
    pub report_path: Option<PathBuf>,
}

impl Outcome {
    pub fn new(config: RunConfig, report: Value) -> Self {
        let report = match report {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        let converged = report.get("converged").and_then(Value::as_bool).unwrap_or(true);
        Self { config, report, converged, plot: None, summary: None, report_path: None }
    }

    pub fn with_plot(mut self, plot: Plot) -> Self {
        self.plot = Some(plot);
        self
    }
}

/// Report text: the subcommand fields plus `command`, `qekit_version` and
/// `resolved_config`, pretty-printed with sorted keys.
pub fn render_report(outcome: &Outcome) -> String {
    let mut m = outcome.report.clone();
    m.insert("command".into(), Value::from(outcome.config.command.clone()));
    m.insert("qekit_version".into(), Value::from(env!("CARGO_PKG_VERSION")));
    m.insert("resolved_config".into(), outcome.config.resolved_json());
    let mut text = serde_json::to_string_pretty(&Value::Object(m)).expect("report serializes");
    text.push('\n');
    text
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn finish(outcome: Outcome) -> Result<i32, CliError> {
    let report_path = outcome.report_path.clone().or_else(|| outcome.config.output.clone());
    if outcome.config.plot && outcome.plot.is_some() && report_path.is_none() {
        return Err(CliError::Usage("--plot needs --output".into()));
    }
    let text = render_report(&outcome);
    match &report_path {
        Some(p) => write_file(p, &text)?,
        None if outcome.summary.is_none() => print!("{text}"),
        None => {}
    }
    if let (true, Some(plot), Some(p)) = (outcome.config.plot, &outcome.plot, &report_path) {
        write_file(&p.with_extension("svg"), &plot.render())?;
    }
    if let Some(s) = &outcome.summary {
        println!("{s}");
    }
    if !outcome.converged {
        eprintln!("warning: fit did not converge; report written with converged=false");
        return Ok(1);
    }
    Ok(0)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|_| commands::execute(&cli.command)).and_then(finish);
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
