use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qd_cli::{
    cmd_compare, cmd_run, cmd_sweep, comparison_csv, comparison_table, parse_group, CliError, Metric,
};
use qd_core::config::ExperimentConfig;
use qd_core::tasks::TASK_NAMES;

#[derive(Parser)]
#[command(name = "qd", version, about = "Quality-Diversity experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(RunArgs),
    /// Run one experiment per (value, seed) and summarise median final metrics.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Parameter to vary: k, l, knov or cells.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Comma-separated run seeds.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
    },
    /// Pairwise Mann-Whitney U tests on final metrics, Holm-Bonferroni corrected.
    Compare {
        /// Groups as LABEL=RUN_DIR[,RUN_DIR...].
        #[arg(required = true)]
        groups: Vec<String>,
        /// qd_score, coverage or max_fitness.
        #[arg(long, default_value = "qd_score")]
        metric: String,
        /// Family-wise significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Write the comparison table as CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List available tasks.
    ListTasks,
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task name (see `qd list-tasks`).
    #[arg(long)]
    task: Option<String>,
    /// dns, map_elites, threshold_elites, cluster_elites or plain_ga.
    #[arg(long)]
    algo: Option<String>,
    /// DNS neighbour count.
    #[arg(long)]
    k: Option<String>,
    /// Threshold-Elites distance threshold, or `auto`.
    #[arg(long)]
    l: Option<String>,
    /// Threshold-Elites novelty neighbour count.
    #[arg(long)]
    knov: Option<String>,
    /// Grid cells for MAP-Elites and Cluster-Elites, or `auto`.
    #[arg(long)]
    cells: Option<String>,
    /// Population size N.
    #[arg(long)]
    pop_size: Option<String>,
    /// Offspring per generation B.
    #[arg(long)]
    batch_size: Option<String>,
    /// Number of generations G.
    #[arg(long)]
    generations: Option<String>,
    /// Run seed.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Any other setting, as KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentConfig, Option<String>), CliError> {
        let source = match &self.config {
            Some(path) => Some(
                fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
            ),
            None => None,
        };
        let mut config = match &source {
            Some(text) => ExperimentConfig::from_text(text)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("task.name", &self.task),
            ("algo.name", &self.algo),
            ("algo.k", &self.k),
            ("algo.l", &self.l),
            ("algo.k_nov", &self.knov),
            ("algo.cells", &self.cells),
            ("run.pop_size", &self.pop_size),
            ("run.batch_size", &self.batch_size),
            ("run.generations", &self.generations),
            ("run.seed", &self.seed),
            ("output.dir", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            config.set(k.trim(), v.trim())?;
        }
        config.validate()?;
        Ok((config, source))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let (config, source) = args.load()?;
            let dir = cmd_run(&config, source.as_deref())?;
            println!("{}", dir.display());
        }
        Command::Sweep { run, param, values, seeds } => {
            let (config, _) = run.load()?;
            let summary = cmd_sweep(&config, &param, &values, &seeds)?;
            println!("{:<10} {:>5} {:>16} {:>16}", param, "runs", "median_qd_score", "median_coverage");
            for (i, row) in summary.rows.iter().enumerate() {
                let mark = if i == summary.best { "  <- best" } else { "" };
                println!(
                    "{:<10} {:>5} {:>16.4} {:>16.4}{mark}",
                    row.value,
                    row.runs.len(),
                    row.median_qd_score,
                    row.median_coverage
                );
            }
            println!("summary: {}", summary.dir.join("summary.csv").display());
        }
        Command::Compare { groups, metric, alpha, out } => {
            let metric = Metric::parse(&metric)?;
            let groups = groups.iter().map(|g| parse_group(g)).collect::<Result<Vec<_>, _>>()?;
            let results = cmd_compare(&groups, metric, alpha)?;
            print!("{}", comparison_table(&results));
            if let Some(path) = out {
                fs::write(&path, comparison_csv(&results))
                    .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            }
        }
        Command::ListTasks => {
            for (name, about) in TASK_NAMES {
                println!("{name:<10} {about}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
