//! Commands behind the `qd` binary: single runs, parameter sweeps and
//! cross-run statistical comparison.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use qd_core::config::ExperimentConfig;
use qd_core::experiment::Experiment;
use qd_core::io::{format_metrics, format_population, parse_metrics};
use qd_core::metrics::MetricsRecord;
use qd_core::stats::{compare_groups, median, ComparisonResult};
use qd_core::QdError;

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const POPULATION_FILE: &str = "population.csv";
pub const FAILED_FILE: &str = "FAILED";

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration; exit code 2.
    Usage(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<QdError> for CliError {
    fn from(err: QdError) -> Self {
        match err {
            QdError::Config(_) | QdError::Parse { .. } | QdError::InvalidParameter(_) => CliError::Usage(err.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, err: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {err}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Seed-named run directory inside the configured output directory.
pub fn run_dir_name(config: &ExperimentConfig) -> String {
    format!("{}-{}-seed{}", config.task.name, config.algorithm.name(), config.seed)
}

/// Executes one experiment and writes the config snapshot, metrics table and
/// final population into `<output_dir>/<task>-<algo>-seed<seed>/`.
///
/// `source` is the original config text, copied verbatim ahead of the
/// resolved settings. If the run fails midway the metrics logged so far are
/// still written and a `FAILED` marker holds the error.
pub fn cmd_run(config: &ExperimentConfig, source: Option<&str>) -> Result<PathBuf, CliError> {
    config.validate()?;
    let dir = config.output_dir.join(run_dir_name(config));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let failed = dir.join(FAILED_FILE);
    if failed.exists() {
        fs::remove_file(&failed).map_err(|e| io_err(&failed, e))?;
    }

    let mut snapshot = String::new();
    if let Some(text) = source {
        snapshot.push_str("# original configuration\n");
        snapshot.push_str(text);
        if !text.ends_with('\n') {
            snapshot.push('\n');
        }
    }
    snapshot.push_str("# resolved configuration (overrides and defaults)\n");
    snapshot.push_str(&config.to_text());
    write(&dir.join(CONFIG_FILE), &snapshot)?;

    let mut experiment = Experiment::new(config.clone())?;
    let mut outcome = Ok(());
    while !experiment.is_finished() {
        if let Err(e) = experiment.step() {
            outcome = Err(e);
            break;
        }
    }
    write(&dir.join(METRICS_FILE), &format_metrics(experiment.records()))?;
    write(&dir.join(POPULATION_FILE), &format_population(experiment.population()))?;
    if let Err(e) = outcome {
        write(&failed, &format!("{e}\n"))?;
        return Err(CliError::Runtime(format!("run {} failed at generation {}: {e}", dir.display(), experiment.generation())));
    }
    log::info!("finished {} ({} evaluations)", dir.display(), experiment.evaluations());
    Ok(dir)
}

/// Maps a sweep parameter name to its config key.
pub fn sweep_key(param: &str) -> Result<&'static str, CliError> {
    match param {
        "k" => Ok("algo.k"),
        "l" => Ok("algo.l"),
        "knov" | "k_nov" => Ok("algo.k_nov"),
        "cells" => Ok("algo.cells"),
        other => Err(CliError::Usage(format!("cannot sweep '{other}' (valid: k, l, knov, cells)"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub runs: Vec<PathBuf>,
    pub median_qd_score: f64,
    pub median_coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub param: String,
    pub rows: Vec<SweepRow>,
    /// Row with the highest median QD score (first one on ties).
    pub best: usize,
    pub dir: PathBuf,
}

impl SweepSummary {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},runs,median_qd_score,median_coverage,best\n", self.param);
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.value,
                r.runs.len(),
                r.median_qd_score,
                r.median_coverage,
                i == self.best
            ));
        }
        out
    }
}

/// One run per (value, seed); runs execute concurrently on the rayon pool.
pub fn cmd_sweep(base: &ExperimentConfig, param: &str, values: &[String], seeds: &[u64]) -> Result<SweepSummary, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("sweep needs at least one seed".into()));
    }
    let key = sweep_key(param)?;
    let root = base.output_dir.join(format!("sweep-{param}"));
    let mut jobs = Vec::new();
    for value in values {
        for &seed in seeds {
            let mut config = base.clone();
            config.set(key, value)?;
            config.seed = seed;
            config.output_dir = root.join(format!("{param}={value}"));
            config.validate()?;
            jobs.push(config);
        }
    }
    let results: Vec<Result<(PathBuf, MetricsRecord), CliError>> = jobs
        .par_iter()
        .map(|config| {
            let dir = cmd_run(config, None)?;
            Ok((dir.clone(), final_record(&dir)?))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let rows: Vec<SweepRow> = values
        .iter()
        .zip(results.chunks(seeds.len()))
        .map(|(value, chunk)| {
            let qd: Vec<f64> = chunk.iter().map(|(_, r)| r.qd_score).collect();
            let cov: Vec<f64> = chunk.iter().map(|(_, r)| r.coverage).collect();
            SweepRow {
                value: value.clone(),
                runs: chunk.iter().map(|(d, _)| d.clone()).collect(),
                median_qd_score: median(&qd).expect("non-empty"),
                median_coverage: median(&cov).expect("non-empty"),
            }
        })
        .collect();
    let best = rows
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.median_qd_score > rows[best].median_qd_score { i } else { best });
    let summary = SweepSummary { param: param.to_string(), rows, best, dir: root.clone() };
    write(&root.join("summary.csv"), &summary.to_csv())?;
    Ok(summary)
}

pub fn final_record(run_dir: &Path) -> Result<MetricsRecord, CliError> {
    let path = run_dir.join(METRICS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let records = parse_metrics(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    records.last().copied().ok_or_else(|| CliError::Runtime(format!("{}: no records", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    QdScore,
    Coverage,
    MaxFitness,
}

impl Metric {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "qd_score" => Ok(Metric::QdScore),
            "coverage" => Ok(Metric::Coverage),
            "max_fitness" => Ok(Metric::MaxFitness),
            other => Err(CliError::Usage(format!("unknown metric '{other}' (valid: qd_score, coverage, max_fitness)"))),
        }
    }

    pub fn of(self, r: &MetricsRecord) -> f64 {
        match self {
            Metric::QdScore => r.qd_score,
            Metric::Coverage => r.coverage,
            Metric::MaxFitness => r.max_fitness,
        }
    }
}

/// Parses `label=dir1,dir2,...`.
pub fn parse_group(spec: &str) -> Result<(String, Vec<PathBuf>), CliError> {
    let (label, dirs) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("group '{spec}' is not of the form LABEL=DIR[,DIR...]")))?;
    let dirs: Vec<PathBuf> = dirs.split(',').filter(|d| !d.is_empty()).map(PathBuf::from).collect();
    if label.is_empty() || dirs.is_empty() {
        return Err(CliError::Usage(format!("group '{spec}' needs a label and at least one directory")));
    }
    Ok((label.to_string(), dirs))
}

/// Final-metric comparison of every pair of groups, Holm-corrected.
pub fn cmd_compare(groups: &[(String, Vec<PathBuf>)], metric: Metric, alpha: f64) -> Result<Vec<ComparisonResult>, CliError> {
    if groups.len() < 2 {
        return Err(CliError::Usage("compare needs at least two groups".into()));
    }
    let mut samples = Vec::new();
    let mut reference: Option<(usize, usize, PathBuf)> = None;
    for (label, dirs) in groups {
        if dirs.len() < 2 {
            return Err(CliError::Usage(format!("group '{label}' needs at least two runs")));
        }
        let mut values = Vec::new();
        for dir in dirs {
            let r = final_record(dir)?;
            match &reference {
                None => reference = Some((r.generation, r.evaluations, dir.clone())),
                Some((g, e, first)) if (*g, *e) != (r.generation, r.evaluations) => {
                    return Err(CliError::Runtime(format!(
                        "mismatched runs: {} ends at generation {g} / {e} evaluations, {} at {} / {}",
                        first.display(),
                        dir.display(),
                        r.generation,
                        r.evaluations
                    )));
                }
                Some(_) => {}
            }
            values.push(metric.of(&r));
        }
        samples.push((label.clone(), values));
    }
    Ok(compare_groups(&samples, alpha)?)
}

pub fn comparison_csv(results: &[ComparisonResult]) -> String {
    let mut out = String::from("first,second,u,p,alpha,reject\n");
    for r in results {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.first, r.second, r.u, r.p, r.alpha, r.reject));
    }
    out
}

pub fn comparison_table(results: &[ComparisonResult]) -> String {
    let mut out = format!("{:<24} {:<24} {:>10} {:>12}  decision\n", "first", "second", "U", "p");
    for r in results {
        out.push_str(&format!(
            "{:<24} {:<24} {:>10} {:>12.6}  {}\n",
            r.first,
            r.second,
            r.u,
            r.p,
            if r.reject { "significant" } else { "not significant" }
        ));
    }
    out
}
