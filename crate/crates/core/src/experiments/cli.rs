//! `ncrlb` command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use super::config::{OutputFormat, ScenarioConfig};
use super::output::write_tables;
use super::studies::{provenance, run_all, run_study};
use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Thread-count override; 0 or unset means one worker per core.
pub const THREADS_ENV: &str = "NCRLB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ncrlb", version, about = "Network CRLB studies for THz inter-satellite ranging")]
struct Cli {
    /// Scenario config (JSON); the bundled default when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Monte Carlo seed override.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Output format override.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ranging RMSE vs SNR for the hardware profiles.
    Ceiling,
    /// Phase-noise floors with distortion disabled.
    Floor,
    /// GDOP/HDOP/VDOP vs formation size and shape.
    Geometry,
    /// Dominant-limitation map over SNR and Γ_eff.
    Regime,
    /// Clock-correlation penalty, degradation and information per DoF.
    Correlation,
    /// Opportunistic bistatic sensing gain vs processing gain.
    Ioo,
    /// Every study.
    All,
    /// Parse and validate the config, print its hash.
    ValidateConfig,
}

impl Command {
    fn study(&self) -> Option<&'static str> {
        match self {
            Command::Ceiling => Some("ceiling"),
            Command::Floor => Some("floor"),
            Command::Geometry => Some("geometry"),
            Command::Regime => Some("regime"),
            Command::Correlation => Some("correlation"),
            Command::Ioo => Some("ioo"),
            Command::All | Command::ValidateConfig => None,
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, Error> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::bundled_default()),
    }
}

fn thread_count() -> Result<usize, Error> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}='{v}' is not a non-negative integer"))),
        Err(_) => Ok(0),
    }
}

/// Run the CLI on `argv` (program name first) and return the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };

    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(s) = cli.seed {
        cfg.monte_carlo.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.outputs.format = match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    if let Some(o) = &cli.out {
        cfg.outputs.dir = o.display().to_string();
    }

    if let Command::ValidateConfig = cli.command {
        println!("config ok: schema_version={} sha256={}", cfg.schema_version, cfg.hash());
        return EXIT_OK;
    }

    let threads = match thread_count() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_RUNTIME;
        }
    };

    let tables = pool.install(|| match cli.command.study() {
        Some(id) => run_study(id, &cfg).map(|t| vec![t]),
        None => run_all(&cfg),
    });
    let tables = match tables {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let dir = PathBuf::from(&cfg.outputs.dir);
    let json = cfg.outputs.format == OutputFormat::Json;
    match write_tables(&dir, &tables, json, &provenance(&cfg)) {
        Ok(m) => {
            for o in &m.outputs {
                println!("{}: {} rows -> {}", o.study, o.rows, dir.join(&o.file).display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
