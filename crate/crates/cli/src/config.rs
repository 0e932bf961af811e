//! Run configuration files.
//!
//! The format is line oriented: `key = value`, with `#` starting a comment
//! and blank lines ignored. Keys use dotted section prefixes:
//!
//! ```text
//! scenario.k = 5
//! scenario.nt = 10
//! scenario.nr = 11
//! scenario.streams = 4
//! scenario.constellation = qpsk        # bpsk | qpsk | 8psk
//! scenario.power_watts = 1
//! scenario.alias.policy = all          # all | random_one | fixed
//! scenario.alias.fixed = 1, 2          # only with policy = fixed
//! scenario.channel_mode = block        # block | fixed:<seed>
//! sweep.snr_db = 0, 5, 10, inf         # inf runs noiseless
//! sweep.trials = 10000
//! sweep.z = 1.96
//! sweep.workers = 0                    # 0 = all cores
//! precoders = svd, zf, im_anon, ci_anon
//! seed = 1
//! output.path = results.csv
//! output.format = csv                  # csv | json
//! ```
//!
//! Required keys: `scenario.k`, `scenario.nt`, `scenario.nr`,
//! `scenario.streams` and `sweep.snr_db`. Defaults: qpsk, 1 W, alias policy
//! `all`, block channels, 10000 trials, z = 1.96, every precoder, seed 0,
//! output to stdout as csv.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use phyanon::harness::{SweepConfig, DEFAULT_Z};
use phyanon::{psk_constellation, AliasPolicy, ChannelMode, PrecoderId, Scenario};
use thiserror::Error;

pub const DEFAULT_TRIALS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Semantic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub nt: usize,
    pub nr: usize,
    pub streams: usize,
    /// PSK order: 2, 4 or 8.
    pub constellation: usize,
    pub power_watts: f64,
    pub alias_policy: AliasPolicy,
    pub channel_mode: ChannelMode,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub z: f64,
    pub workers: usize,
    pub precoders: Vec<PrecoderId>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

impl RunConfig {
    /// Builds the validated scenario.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let constellation =
            psk_constellation(self.constellation).map_err(|e| ConfigError::Semantic(e.to_string()))?;
        Scenario::new(
            self.k,
            self.nt,
            self.nr,
            self.streams,
            constellation,
            self.power_watts,
            self.alias_policy.clone(),
            self.channel_mode,
        )
        .map_err(|e| ConfigError::Semantic(e.to_string()))
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            snr_grid_db: self.snr_db.clone(),
            trials: self.trials,
            master_seed: self.seed,
            z: self.z,
            workers: self.workers,
        }
    }

    /// Canonical text form; [`parse_config`] reads it back unchanged.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let list = |v: &[String]| v.join(", ");
        let _ = writeln!(out, "scenario.k = {}", self.k);
        let _ = writeln!(out, "scenario.nt = {}", self.nt);
        let _ = writeln!(out, "scenario.nr = {}", self.nr);
        let _ = writeln!(out, "scenario.streams = {}", self.streams);
        let _ = writeln!(out, "scenario.constellation = {}", constellation_name(self.constellation));
        let _ = writeln!(out, "scenario.power_watts = {:?}", self.power_watts);
        let _ = writeln!(out, "scenario.alias.policy = {}", self.alias_policy.name());
        if let AliasPolicy::Fixed(set) = &self.alias_policy {
            let items: Vec<String> = set.iter().map(|j| j.to_string()).collect();
            let _ = writeln!(out, "scenario.alias.fixed = {}", list(&items));
        }
        let mode = match self.channel_mode {
            ChannelMode::Block => "block".to_string(),
            ChannelMode::Fixed(seed) => format!("fixed:{seed}"),
        };
        let _ = writeln!(out, "scenario.channel_mode = {mode}");
        let snrs: Vec<String> = self.snr_db.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "sweep.snr_db = {}", list(&snrs));
        let _ = writeln!(out, "sweep.trials = {}", self.trials);
        let _ = writeln!(out, "sweep.z = {:?}", self.z);
        let _ = writeln!(out, "sweep.workers = {}", self.workers);
        let names: Vec<String> = self.precoders.iter().map(|p| p.name().to_string()).collect();
        let _ = writeln!(out, "precoders = {}", list(&names));
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(path) = &self.output_path {
            let _ = writeln!(out, "output.path = {}", path.display());
        }
        let _ = writeln!(out, "output.format = {}", self.output_format.name());
        out
    }
}

const KEYS: &[&str] = &[
    "scenario.k",
    "scenario.nt",
    "scenario.nr",
    "scenario.streams",
    "scenario.constellation",
    "scenario.power_watts",
    "scenario.alias.policy",
    "scenario.alias.fixed",
    "scenario.channel_mode",
    "sweep.snr_db",
    "sweep.trials",
    "sweep.z",
    "sweep.workers",
    "precoders",
    "seed",
    "output.path",
    "output.format",
];

fn constellation_name(order: usize) -> String {
    match order {
        2 => "bpsk".into(),
        4 => "qpsk".into(),
        8 => "8psk".into(),
        m => format!("{m}psk"),
    }
}

struct Entry {
    line: usize,
    value: String,
}

fn syntax(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Syntax {
        line,
        message: message.into(),
    }
}

fn split_list(e: &Entry) -> Result<Vec<&str>, ConfigError> {
    let items: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(syntax(e.line, "empty item in list"));
    }
    Ok(items)
}

fn parse_num<T: std::str::FromStr>(e: &Entry, text: &str, what: &str) -> Result<T, ConfigError> {
    text.parse()
        .map_err(|_| syntax(e.line, format!("expected {what}, found '{text}'")))
}

fn parse_f64(e: &Entry, text: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_num(e, text, "a number")?;
    if v.is_nan() {
        return Err(syntax(e.line, "NaN is not allowed"));
    }
    Ok(v)
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<&str, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| syntax(line, "expected 'key = value'"))?;
        let key = key.trim();
        let value = value.trim();
        let known = KEYS
            .iter()
            .find(|&&k| k == key)
            .ok_or_else(|| syntax(line, format!("unknown key '{key}'")))?;
        if value.is_empty() {
            return Err(syntax(line, format!("missing value for '{key}'")));
        }
        if let Some(prev) = entries.get(known) {
            return Err(syntax(
                line,
                format!("duplicate key '{key}' (first set on line {})", prev.line),
            ));
        }
        entries.insert(
            known,
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }

    let required = |key: &str| {
        entries
            .get(key)
            .ok_or_else(|| ConfigError::Semantic(format!("missing required key '{key}'")))
    };
    let usize_key = |key: &str| -> Result<usize, ConfigError> {
        let e = required(key)?;
        parse_num(e, &e.value, "a non-negative integer")
    };

    let k = usize_key("scenario.k")?;
    let nt = usize_key("scenario.nt")?;
    let nr = usize_key("scenario.nr")?;
    let streams = usize_key("scenario.streams")?;

    let constellation = match entries.get("scenario.constellation") {
        None => 4,
        Some(e) => match e.value.as_str() {
            "bpsk" => 2,
            "qpsk" => 4,
            "8psk" => 8,
            other => {
                return Err(syntax(
                    e.line,
                    format!("unknown constellation '{other}' (expected bpsk, qpsk or 8psk)"),
                ))
            }
        },
    };

    let power_watts = match entries.get("scenario.power_watts") {
        None => 1.0,
        Some(e) => parse_f64(e, &e.value)?,
    };

    let policy_name = entries
        .get("scenario.alias.policy")
        .map_or("all", |e| e.value.as_str());
    let fixed = entries.get("scenario.alias.fixed");
    let alias_policy = match policy_name {
        "all" | "random_one" => {
            if let Some(e) = fixed {
                return Err(syntax(
                    e.line,
                    "scenario.alias.fixed is only valid with scenario.alias.policy = fixed",
                ));
            }
            if policy_name == "all" {
                AliasPolicy::All
            } else {
                AliasPolicy::RandomOne
            }
        }
        "fixed" => {
            let e = fixed.ok_or_else(|| {
                ConfigError::Semantic("scenario.alias.policy = fixed needs scenario.alias.fixed".into())
            })?;
            let set = split_list(e)?
                .into_iter()
                .map(|s| parse_num(e, s, "a candidate index"))
                .collect::<Result<Vec<usize>, _>>()?;
            AliasPolicy::Fixed(set)
        }
        other => {
            let line = entries["scenario.alias.policy"].line;
            return Err(syntax(
                line,
                format!("unknown alias policy '{other}' (expected all, random_one or fixed)"),
            ));
        }
    };

    let channel_mode = match entries.get("scenario.channel_mode") {
        None => ChannelMode::Block,
        Some(e) if e.value == "block" => ChannelMode::Block,
        Some(e) => match e.value.strip_prefix("fixed:") {
            Some(seed) => ChannelMode::Fixed(parse_num(e, seed.trim(), "a channel seed")?),
            None => {
                return Err(syntax(
                    e.line,
                    format!("unknown channel mode '{}' (expected block or fixed:<seed>)", e.value),
                ))
            }
        },
    };

    let snr_entry = required("sweep.snr_db")?;
    let snr_db = split_list(snr_entry)?
        .into_iter()
        .map(|s| parse_f64(snr_entry, s))
        .collect::<Result<Vec<f64>, _>>()?;
    if snr_db.contains(&f64::NEG_INFINITY) {
        return Err(syntax(snr_entry.line, "SNR of -inf dB is not allowed"));
    }

    let trials = match entries.get("sweep.trials") {
        None => DEFAULT_TRIALS,
        Some(e) => parse_num(e, &e.value, "a trial count")?,
    };
    if trials == 0 {
        return Err(ConfigError::Semantic("sweep.trials must be at least 1".into()));
    }

    let z = match entries.get("sweep.z") {
        None => DEFAULT_Z,
        Some(e) => parse_f64(e, &e.value)?,
    };
    if !(z > 0.0 && z.is_finite()) {
        return Err(ConfigError::Semantic("sweep.z must be positive and finite".into()));
    }

    let workers = match entries.get("sweep.workers") {
        None => 0,
        Some(e) => parse_num(e, &e.value, "a worker count")?,
    };

    let precoders = match entries.get("precoders") {
        None => PrecoderId::ALL.to_vec(),
        Some(e) => {
            let mut out = Vec::new();
            for name in split_list(e)? {
                let p: PrecoderId = name.parse().map_err(|msg: String| syntax(e.line, msg))?;
                if out.contains(&p) {
                    return Err(syntax(e.line, format!("precoder '{name}' listed twice")));
                }
                out.push(p);
            }
            out
        }
    };

    let seed = match entries.get("seed") {
        None => 0,
        Some(e) => parse_num(e, &e.value, "an unsigned 64-bit seed")?,
    };

    let output_path = entries.get("output.path").map(|e| PathBuf::from(&e.value));
    let output_format = match entries.get("output.format") {
        None => OutputFormat::Csv,
        Some(e) => match e.value.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(syntax(
                    e.line,
                    format!("unknown output format '{other}' (expected csv or json)"),
                ))
            }
        },
    };

    let cfg = RunConfig {
        k,
        nt,
        nr,
        streams,
        constellation,
        power_watts,
        alias_policy,
        channel_mode,
        snr_db,
        trials,
        z,
        workers,
        precoders,
        seed,
        output_path,
        output_format,
    };
    cfg.scenario()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "scenario.k = 5\nscenario.nt = 10\nscenario.nr = 11\nscenario.streams = 4\nsweep.snr_db = 0, 10\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.trials, 10_000);
        assert_eq!(cfg.z, 1.96);
        assert_eq!(cfg.output_format, OutputFormat::Csv);
        assert_eq!(cfg.constellation, 4);
        assert_eq!(cfg.power_watts, 1.0);
        assert_eq!(cfg.alias_policy, AliasPolicy::All);
        assert_eq!(cfg.channel_mode, ChannelMode::Block);
        assert_eq!(cfg.precoders, PrecoderId::ALL.to_vec());
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.output_path, None);
    }

    #[test]
    fn tall_geometry_is_required() {
        let text = MINIMAL.replace("scenario.nr = 11", "scenario.nr = 10");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("N_t < N_r"), "{err}");
    }

    #[test]
    fn stream_count_checked_against_anonymity_dimension() {
        let text = MINIMAL.replace("scenario.streams = 4", "scenario.streams = 7");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("d ≤ N_t − |A|(N_r − N_t) violated"), "{err}");
        assert!(parse_config(&MINIMAL.replace("scenario.streams = 4", "scenario.streams = 6")).is_ok());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_config(&format!("{MINIMAL}\nscenario.colour = red\n")).unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                line: 7,
                message: "unknown key 'scenario.colour'".into()
            }
        );
        let err = parse_config("# header\nscenario.k 5\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }));
        let err = parse_config(&format!("{MINIMAL}scenario.k = 6\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 6, .. }));
        let err = parse_config(&MINIMAL.replace("0, 10", "0, ten")).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 5, .. }));
    }

    #[test]
    fn fixed_alias_set_and_channel_mode() {
        let text = format!(
            "{MINIMAL}scenario.alias.policy = fixed\nscenario.alias.fixed = 1, 3\nscenario.channel_mode = fixed:42\n"
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.alias_policy, AliasPolicy::Fixed(vec![1, 3]));
        assert_eq!(cfg.channel_mode, ChannelMode::Fixed(42));
        let stray = format!("{MINIMAL}scenario.alias.fixed = 1\n");
        assert!(parse_config(&stray).is_err());
    }

    #[test]
    fn infinite_snr_and_comments() {
        let text = MINIMAL.replace("0, 10", "0, inf  # noiseless") + "precoders = ci_anon, svd # two\n";
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.snr_db, vec![0.0, f64::INFINITY]);
        assert_eq!(cfg.precoders, vec![PrecoderId::CiAnon, PrecoderId::Svd]);
    }

    #[test]
    fn canonical_print_round_trips() {
        let text = format!(
            "{MINIMAL}scenario.power_watts = 0.1\nscenario.alias.policy = fixed\nscenario.alias.fixed = 2\noutput.path = out/r.json\noutput.format = json\nseed = 18446744073709551615\n"
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(parse_config(&cfg.to_canonical_string()).unwrap(), cfg);
    }
}
