//! Configuration parsing and result export behind the `afshape` binary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::af::{af_grid, CodeSequence, RegionSpec};
use crate::error::{Error, Result};
use crate::metrics::{compare, Comparison};
use crate::reformulation::ZetaPolicy;
use crate::solver::{run, GammaPolicy, SolverConfig, StopReason};

pub const SEED_ENV: &str = "AFSHAPE_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_config() {
        EXIT_CONFIG
    } else if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_IO
    }
}

/// Design a unimodular slow-time code whose ambiguity function is suppressed
/// over a delay/Doppler region.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "afshape", version)]
pub struct Args {
    /// Code length N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Delay lags, e.g. `5,6,7` or `5..7`.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<String>,
    /// Doppler bins, e.g. `-15..-13,11..14`.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<String>,
    /// Maximum number of outer iterations.
    #[arg(long)]
    pub gamma1: Option<usize>,
    /// Inner power-method-like iterations per outer iteration.
    #[arg(long)]
    pub gamma2: Option<usize>,
    /// Relative change of the region energy that stops the run.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// RNG seed for the random start (falls back to $AFSHAPE_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "exact|bound")]
    pub zeta_policy: Option<ZetaPolicy>,
    /// Diagonal loading margin.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_name = "frobenius|exact")]
    pub gamma_policy: Option<GammaPolicy>,
    /// Stop each inner loop early once the UQP objective settles to this relative change.
    #[arg(long)]
    pub inner_epsilon: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "afshape-out")]
    pub out: PathBuf,
    /// TOML or JSON config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Validate the configuration and exit without writing anything.
    #[arg(long)]
    pub dry_run: bool,
    /// Record the inner UQP objective and write the extra diagnostic files.
    #[arg(long)]
    pub verbose: bool,
    /// Fill the elapsed_ms column of trace.csv with wall-clock times.
    #[arg(long)]
    pub timings: bool,
}

/// Index set in a config file: a list of integers or the same text syntax as the flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexSet {
    List(Vec<i64>),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub k: Option<IndexSet>,
    pub p: Option<IndexSet>,
    pub gamma1: Option<usize>,
    pub gamma2: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub zeta_policy: Option<ZetaPolicy>,
    pub delta: Option<f64>,
    pub gamma_policy: Option<GammaPolicy>,
    pub inner_epsilon: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|reason| Error::InvalidConfig {
            field: "config",
            reason: format!("{}: {reason}", path.display()),
        })
    }
}

/// Parses `5,6,7`, `-15..-13,11..14` and mixtures; ranges are inclusive.
pub fn parse_index_set(field: &'static str, text: &str) -> Result<Vec<i64>> {
    let bad = |reason: String| Error::IndexParse { field, reason };
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(bad(format!("empty item in `{text}`")));
        }
        match item.split_once("..") {
            Some((lo, hi)) => {
                let lo: i64 = lo
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad range start in `{item}`")))?;
                let hi: i64 = hi
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad range end in `{item}`")))?;
                if lo > hi {
                    return Err(bad(format!("descending range `{item}`")));
                }
                out.extend(lo..=hi);
            }
            None => out.push(
                item.parse()
                    .map_err(|_| bad(format!("not an integer: `{item}`")))?,
            ),
        }
    }
    Ok(out)
}

fn resolve_set(
    field: &'static str,
    flag: Option<&str>,
    file: Option<&IndexSet>,
) -> Result<Vec<i64>> {
    match (flag, file) {
        (Some(text), _) => parse_index_set(field, text),
        (None, Some(IndexSet::Text(text))) => parse_index_set(field, text),
        (None, Some(IndexSet::List(v))) => Ok(v.clone()),
        (None, None) => Err(Error::InvalidConfig {
            field,
            reason: "missing (give a flag or a config file entry)".into(),
        }),
    }
}

/// Merges flags over the config file; the seed falls back to `env_seed`, then 0.
pub fn parse_config_with_env(args: &Args, env_seed: Option<&str>) -> Result<SolverConfig> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let n = args.n.or(file.n).ok_or(Error::InvalidConfig {
        field: "n",
        reason: "missing".into(),
    })?;
    if n < 2 {
        return Err(Error::InvalidConfig {
            field: "n",
            reason: format!("code length must be at least 2, got {n}"),
        });
    }
    let lags = resolve_set("k", args.k.as_deref(), file.k.as_ref())?;
    let bins = resolve_set("p", args.p.as_deref(), file.p.as_ref())?;
    let region = RegionSpec::new(n, lags, bins)?;

    let env_seed = match env_seed {
        Some(s) => Some(s.trim().parse::<u64>().map_err(|_| Error::InvalidConfig {
            field: "seed",
            reason: format!("{SEED_ENV}={s} is not an unsigned integer"),
        })?),
        None => None,
    };

    let mut cfg = SolverConfig::new(region);
    if let Some(v) = args.gamma1.or(file.gamma1) {
        cfg.gamma1 = v;
    }
    if let Some(v) = args.gamma2.or(file.gamma2) {
        cfg.gamma2 = v;
    }
    if let Some(v) = args.epsilon.or(file.epsilon) {
        cfg.epsilon = v;
    }
    cfg.seed = args.seed.or(file.seed).or(env_seed).unwrap_or(0);
    if let Some(v) = args.zeta_policy.or(file.zeta_policy) {
        cfg.zeta_policy = v;
    }
    if let Some(v) = args.delta.or(file.delta) {
        cfg.delta = v;
    }
    if let Some(v) = args.gamma_policy.or(file.gamma_policy) {
        cfg.gamma_policy = v;
    }
    cfg.inner_epsilon = args.inner_epsilon.or(file.inner_epsilon);
    cfg.record_inner = args.verbose;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(args: &Args) -> Result<SolverConfig> {
    let env = std::env::var(SEED_ENV).ok();
    parse_config_with_env(args, env.as_deref())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: SolverConfig,
    pub tool_version: String,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub outputs: Vec<PathBuf>,
    pub zeta: f64,
    pub outer_iterations: usize,
    pub stop: StopReason,
    pub initial_c: f64,
    pub final_c: f64,
    pub suppression_db: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExportOptions {
    pub verbose: bool,
    pub timings: bool,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    zeta: f64,
    stop: StopReason,
    outer_iterations: usize,
    #[serde(flatten)]
    comparison: &'a Comparison,
}

/// Columns `index,phase_rad,re,im`, 0-based index, 17 significant digits.
pub fn write_code_csv<W: Write>(code: &CodeSequence, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "phase_rad", "re", "im"])?;
    for (i, (phase, z)) in code.phases().iter().zip(code.entries()).enumerate() {
        w.write_record([
            i.to_string(),
            format!("{phase:.16e}"),
            format!("{:.16e}", z.re),
            format!("{:.16e}", z.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct CodeRow {
    pub index: usize,
    pub phase_rad: f64,
    pub re: f64,
    pub im: f64,
}

pub fn read_code_csv(path: &Path) -> Result<Vec<CodeRow>> {
    let format = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(format)?;
    r.deserialize()
        .collect::<std::result::Result<Vec<CodeRow>, _>>()
        .map_err(format)
}

/// Files written so far; removed again unless the export completes.
struct Staging {
    written: Vec<PathBuf>,
    done: bool,
}

impl Staging {
    fn write(
        &mut self,
        path: PathBuf,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.written.push(path.clone());
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            for path in &self.written {
                let _ = fs::remove_file(path);
            }
        }
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn json_err(path: &Path) -> impl Fn(serde_json::Error) -> Error + '_ {
    move |e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Solves and writes `code.csv`, `af_grid.csv`, `af_grid_db.csv`,
/// `trace.csv`, `report.json` and `manifest.json` into `outdir`.
///
/// Verbose runs also write `inner_trace.csv`, `region_levels.csv`,
/// `af_grid.json` and `trace.json`.
pub fn run_and_export(
    config: &SolverConfig,
    outdir: &Path,
    opts: ExportOptions,
) -> Result<RunManifest> {
    let started = Utc::now();
    let mut config = config.clone();
    config.record_inner |= opts.verbose;
    let outcome = run(&config)?;
    let comparison = compare(&outcome.initial, &outcome.code, &config.region)?;
    let grid = af_grid(&outcome.code);

    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut staging = Staging {
        written: Vec::new(),
        done: false,
    };

    let path = outdir.join("code.csv");
    staging.write(path.clone(), |w| {
        write_code_csv(&outcome.code, w).map_err(csv_err(&path))
    })?;
    let path = outdir.join("af_grid.csv");
    staging.write(path.clone(), |w| grid.write_csv(w).map_err(csv_err(&path)))?;
    let path = outdir.join("af_grid_db.csv");
    staging.write(path.clone(), |w| {
        grid.write_db_csv(w).map_err(csv_err(&path))
    })?;
    let path = outdir.join("trace.csv");
    staging.write(path.clone(), |w| {
        outcome
            .trace
            .write_csv(w, opts.timings)
            .map_err(csv_err(&path))
    })?;
    let path = outdir.join("report.json");
    let report = ReportFile {
        zeta: outcome.zeta,
        stop: outcome.trace.stop,
        outer_iterations: outcome.trace.outer_iterations(),
        comparison: &comparison,
    };
    staging.write(path.clone(), |w| {
        serde_json::to_writer_pretty(w, &report).map_err(json_err(&path))
    })?;

    if opts.verbose {
        let path = outdir.join("inner_trace.csv");
        staging.write(path.clone(), |w| {
            outcome.trace.write_inner_csv(w).map_err(csv_err(&path))
        })?;
        let path = outdir.join("region_levels.csv");
        staging.write(path.clone(), |w| {
            comparison.write_csv(w).map_err(csv_err(&path))
        })?;
        let path = outdir.join("af_grid.json");
        staging.write(path.clone(), |w| {
            serde_json::to_writer(w, &grid.to_json()).map_err(json_err(&path))
        })?;
        let path = outdir.join("trace.json");
        staging.write(path.clone(), |w| {
            serde_json::to_writer(w, &outcome.trace).map_err(json_err(&path))
        })?;
    }

    let manifest_path = outdir.join("manifest.json");
    let mut outputs = staging.written.clone();
    outputs.push(manifest_path.clone());
    let manifest = RunManifest {
        config,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: Utc::now(),
        outputs,
        zeta: outcome.zeta,
        outer_iterations: outcome.trace.outer_iterations(),
        stop: outcome.trace.stop,
        initial_c: outcome.trace.initial_c(),
        final_c: outcome.trace.final_c(),
        suppression_db: comparison.suppression_db,
    };
    staging.write(manifest_path.clone(), |w| {
        serde_json::to_writer_pretty(w, &manifest).map_err(json_err(&manifest_path))
    })?;
    staging.done = true;
    Ok(manifest)
}
