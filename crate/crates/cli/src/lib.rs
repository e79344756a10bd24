//! Command-line frontend: reads a JSON run config, runs one analysis, and
//! writes `report.json` plus CSV artifacts. Results are cached by config.

pub mod cache;
pub mod commands;
pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};

use cache::{Cache, Lookup, Outcome};
use config::{Command, KRange, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] conformal_core::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use conformal_core::Error as E;
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Core(E::Budget { .. } | E::NotFound(_) | E::Infeasible(_)) => EXIT_BUDGET,
            Self::Core(_) => EXIT_VALIDATION,
            Self::Io(_) => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        use conformal_core::Error as E;
        match self {
            Self::Validation(_) => "validation",
            Self::Core(E::Budget { .. }) => "budget",
            Self::Core(E::NotFound(_)) => "not_found",
            Self::Core(E::Infeasible(_)) => "infeasible",
            Self::Core(E::Domain(_)) => "domain",
            Self::Core(E::Precondition(_)) => "precondition",
            Self::Core(E::MethodMismatch { .. }) => "method_mismatch",
            Self::Core(_) => "invalid_system",
            Self::Io(_) => "io",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "conformal", version, about = "Birkhoff averages, admissible sizes and elasticity of conformal dynamics")]
pub struct Args {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// Output directory (default `conformal-out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Scan `a:b:step`, one independent run per k.
    #[arg(long, allow_hyphen_values = true)]
    pub k_range: Option<KRange>,
    /// Exit with 4 when a probe verdict is inconclusive.
    #[arg(long)]
    pub strict_verdict: bool,
}

impl Args {
    pub fn effective_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(c) = self.command {
            cfg.command = Some(c);
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.n_max = self.n_max.or(cfg.n_max);
        cfg.grid = self.grid.or(cfg.grid);
        cfg.k = self.k.or(cfg.k);
        cfg.k_range = self.k_range.or(cfg.k_range);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct Provenance {
    version: &'static str,
    timestamp: String,
    seed: u64,
    config_hash: String,
    cache: &'static str,
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a RunConfig,
    command: &'static str,
    payload: &'a Value,
    provenance: Provenance,
    warnings: &'a [String],
}

fn diagnostic(level: &str, kind: &str, message: &str, code: Option<i32>) {
    let mut v = json!({"level": level, "kind": kind, "message": message});
    if let Some(c) = code {
        v["exit_code"] = json!(c);
    }
    eprintln!("{v}");
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Run with parsed arguments; returns the process exit code. Errors and
/// warnings go to stderr as one JSON object per line.
pub fn run(args: &Args) -> i32 {
    match run_inner(args) {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            diagnostic("error", e.kind(), &e.to_string(), Some(code));
            code
        }
    }
}

fn run_inner(args: &Args) -> Result<i32, CliError> {
    let cfg = args.effective_config()?;
    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("conformal-out"));
    fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let cache = Cache::new(std::env::var_os("CACHE_DIR").map(PathBuf::from).unwrap_or_else(|| out_dir.join("cache")));
    let key = cache::config_key(&cfg);

    let mut extra_warnings = Vec::new();
    let (outcome, cache_state) = match cache.lookup(&key) {
        Lookup::Hit(o) => (o, "hit"),
        lookup => {
            if let Lookup::Corrupt(why) = lookup {
                diagnostic("warning", "cache", &why, None);
                extra_warnings.push(format!("{why}; recomputed"));
            }
            let o = commands::execute(&cfg)?;
            if let Err(e) = cache.store(&key, &o) {
                let why = format!("cannot store cache entry in {}: {e}", cache.dir().display());
                diagnostic("warning", "cache", &why, None);
                extra_warnings.push(why);
            }
            (o, "miss")
        }
    };
    let Outcome { payload, artifacts, mut warnings, inconclusive } = outcome;
    warnings.extend(extra_warnings);

    for (name, body) in &artifacts {
        write(&out_dir.join(name), body)?;
    }
    let report = RunReport {
        config: &cfg,
        command: cfg.command().name(),
        payload: &payload,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: cfg.seed,
            config_hash: key,
            cache: cache_state,
        },
        warnings: &warnings,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&out_dir.join("report.json"), text + "\n")?;

    let code = verdict_code(inconclusive, args.strict_verdict);
    if code != EXIT_OK {
        diagnostic("error", "inconclusive", "a probe verdict is inconclusive and --strict-verdict is set", Some(code));
    }
    Ok(code)
}

fn verdict_code(inconclusive: bool, strict_verdict: bool) -> i32 {
    if inconclusive && strict_verdict {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    }
}
