//! The `run` and `selftest` commands.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use phyanon::harness::run_sweep;
use phyanon::SweepResult;

use crate::config::{parse_config, ConfigError, OutputFormat, RunConfig};
use crate::output::{to_csv, to_json};
use crate::selftest::{format_table, run_all, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

pub fn load_config(path: &Path, overrides: &RunOverrides) -> Result<RunConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| match e {
        ConfigError::Syntax { line, message } => format!("{}:{line}: {message}", path.display()),
        ConfigError::Semantic(_) => format!("{}: {e}", path.display()),
    })?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &overrides.out {
        cfg.output_path = Some(out.clone());
    }
    if let Some(workers) = overrides.workers {
        cfg.workers = workers;
    }
    Ok(cfg)
}

pub fn render(result: &SweepResult, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => to_csv(result),
        OutputFormat::Json => to_json(result),
    }
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial result.
fn write_atomically(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = fs::write(&tmp, contents).and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn output_dir_exists(path: &Path) -> bool {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.is_dir(),
        _ => true,
    }
}

/// Runs a sweep and writes the result. Returns the process exit code.
pub fn cmd_run(config_path: &Path, overrides: &RunOverrides) -> i32 {
    let cfg = match load_config(config_path, overrides) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    if let Some(path) = &cfg.output_path {
        if !output_dir_exists(path) {
            eprintln!("error: output directory for {} does not exist", path.display());
            return EXIT_CONFIG;
        }
    }
    let scenario = match cfg.scenario() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = match run_sweep(&scenario, &cfg.precoders, &cfg.sweep_config()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    for cell in result.cells.iter().filter(|c| c.infeasible > 0) {
        eprintln!(
            "warning: {} at {} dB: {} of {} trials infeasible ({})",
            cell.precoder,
            cell.snr_db,
            cell.infeasible,
            cell.infeasible + cell.trials,
            cell.infeasible_reason.as_deref().unwrap_or("unknown reason"),
        );
    }

    let text = render(&result, cfg.output_format);
    match &cfg.output_path {
        Some(path) => {
            if let Err(e) = write_atomically(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        }
        None => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return EXIT_FAILURE;
            }
        }
    }

    let code = completion_code(&result);
    if code == EXIT_INFEASIBLE {
        eprintln!("error: every requested cell was infeasible");
    }
    code
}

/// `EXIT_INFEASIBLE` when no cell completed a single trial.
pub fn completion_code(result: &SweepResult) -> i32 {
    if result.cells.iter().all(|c| c.trials == 0) {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    }
}

/// Runs every property suite and prints the table. `fault` is a test hook
/// that corrupts one suite's inputs.
pub fn cmd_selftest(fault: Option<Suite>) -> i32 {
    let reports = run_all(fault);
    print!("{}", format_table(&reports));
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.suite.name())
        .collect();
    if failed.is_empty() {
        println!("all suites passed");
        EXIT_OK
    } else {
        eprintln!("selftest failed: {}", failed.join(", "));
        EXIT_FAILURE
    }
}
