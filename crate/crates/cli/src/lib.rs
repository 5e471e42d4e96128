//! Configuration, rendering and atomic output for the `tolrerm` binary.
//!
//! A run is one TOML file naming an experiment, a seed, an optional output
//! path and format, and a `[params]` table. Unknown keys are rejected at
//! every level. `--set key=value` overrides are applied to the parsed TOML
//! before validation, with dotted keys reaching into `params`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tolrerm_core::experiments::{run, Experiment, ExperimentOutput, Params, Table};

/// Schema tag written into every output file.
pub const SCHEMA: &str = "tolrerm.run.v1";
/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "TOLRERM_OUTPUT_DIR";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("experiment failed: {0}")]
    Run(#[from] tolrerm_core::Error),
}

impl CliError {
    /// 2 for usage errors and invalid configs, 3 for I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Run(
                tolrerm_core::Error::InvalidParameter { .. } | tolrerm_core::Error::DimensionMismatch { .. },
            ) => 2,
            CliError::Run(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// The file as written by the user.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    seed: u64,
    output_path: Option<PathBuf>,
    #[serde(default)]
    format: Format,
    #[serde(default)]
    params: toml::Table,
}

/// A validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_path: PathBuf,
    pub format: Format,
    pub params: Params,
}

/// Parses `key=value`; the value is read as a TOML literal, falling back to
/// a bare string.
fn parse_override(raw: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, value) =
        raw.split_once('=').ok_or_else(|| usage(format!("override `{raw}` is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(usage(format!("override key `{key}` is malformed")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((path, parsed))
}

fn apply_override(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for key in parents {
        let entry = cur.entry(key.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| usage(format!("override path crosses non-table key `{key}`")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Directory for relative or missing output paths.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// Parses TOML text, applies overrides, and validates strictly.
pub fn resolve_config(text: &str, overrides: &[String]) -> Result<ResolvedConfig, CliError> {
    let mut table: toml::Table = toml::from_str(text).map_err(usage)?;
    for raw in overrides {
        let (path, value) = parse_override(raw)?;
        apply_override(&mut table, &path, value)?;
    }
    let raw: RawConfig = toml::Value::Table(table).try_into().map_err(usage)?;
    let json = serde_json::to_value(&raw.params).map_err(usage)?;
    let params = Params::from_json(raw.experiment, json).map_err(|e| usage(format!("params: {e}")))?;
    params.validate().map_err(usage)?;
    let output_path = match raw.output_path {
        Some(p) if p.is_absolute() => p,
        Some(p) => default_output_dir().join(p),
        None => default_output_dir().join(format!("{}.{}", raw.experiment, raw.format.extension())),
    };
    Ok(ResolvedConfig { experiment: raw.experiment, seed: raw.seed, output_path, format: raw.format, params })
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ResolvedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    resolve_config(&text, overrides)
}

/// The configuration echo embedded in every output; the output path is left
/// out so that relocated re-runs stay byte-identical.
fn config_echo(cfg: &ResolvedConfig) -> serde_json::Value {
    serde_json::json!({
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "format": cfg.format,
        "params": cfg.params,
    })
}

/// CSV with a `#`-prefixed header documenting the run and every column.
pub fn render_csv(cfg: &ResolvedConfig, out: &ExperimentOutput, table: &Table) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut header = format!(
        "# schema: {SCHEMA}\n# experiment: {}\n# version: {VERSION}\n# seed: {}\n# config: {}\n# table: {}\n",
        cfg.experiment,
        cfg.seed,
        config_echo(cfg),
        table.name
    );
    for c in &table.columns {
        header.push_str(&format!("# column {}: {}\n", c.name, c.description));
    }
    for c in &out.checks {
        header.push_str(&format!("# check {}: {} ({})\n", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail));
    }
    buf.extend_from_slice(header.as_bytes());
    let mut w = csv::Writer::from_writer(&mut buf);
    let map_csv = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(table.columns.iter().map(|c| c.name.as_str())).map_err(map_csv)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.to_string())).map_err(map_csv)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    drop(w);
    Ok(buf)
}

/// A single JSON document holding the config echo, checks and all tables.
pub fn render_json(cfg: &ResolvedConfig, out: &ExperimentOutput) -> Result<Vec<u8>, CliError> {
    let doc = serde_json::json!({
        "schema": SCHEMA,
        "version": VERSION,
        "config": config_echo(cfg),
        "passed": out.passed(),
        "checks": out.checks,
        "tables": out.tables,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io(path, e))?;
    tmp.persist(path).map_err(|e| io(path, e.error))?;
    Ok(())
}

/// Path of a secondary table: `<stem>.<table>.csv` next to the main output.
pub fn sibling_path(main: &Path, table: &str) -> PathBuf {
    let stem = main.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    main.with_file_name(format!("{stem}.{table}.csv"))
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub output: ExperimentOutput,
    pub files: Vec<PathBuf>,
    pub elapsed: Duration,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.output.passed()
    }
}

/// Runs the experiment and writes its outputs. CSV runs write the first
/// table to the output path and every further table to a sibling file.
pub fn execute(cfg: &ResolvedConfig) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let output = run(&cfg.params, cfg.seed)?;
    let elapsed = start.elapsed();
    let mut files = Vec::new();
    match cfg.format {
        Format::Json => {
            write_atomic(&cfg.output_path, &render_json(cfg, &output)?)?;
            files.push(cfg.output_path.clone());
        }
        Format::Csv => {
            for (i, table) in output.tables.iter().enumerate() {
                let path = if i == 0 { cfg.output_path.clone() } else { sibling_path(&cfg.output_path, &table.name) };
                write_atomic(&path, &render_csv(cfg, &output, table)?)?;
                files.push(path);
            }
        }
    }
    Ok(RunOutcome { output, files, elapsed })
}
