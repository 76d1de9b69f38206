//! Command-line front end: `split`, `select`, `run`, `sweep` and `synthetic`.
//!
//! Every command reads a [`RunConfig`] and writes artifacts under `--out`
//! (default: the config's `output_dir`). Failures print a single JSON object
//! `{"error": kind, "message": ..}` to stderr and exit nonzero.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::harness::{
    generate_synthetic_world, load_inputs, run_experiment_on, select_references, split_plan, sweep_n_ref, write_report,
    RunConfig, SyntheticConfig, TOOL_VERSION,
};
use crate::ingest::{embeddings_jsonl_string, success_csv_string};
use crate::util::atomic_write;

#[derive(Parser, Debug)]
#[command(name = "refassess", version, about = "Reference-set generic assessors for new LLMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the train/validation/test partition.
    Split(Common),
    /// Write one reference set per configured selector.
    Select(Common),
    /// Train the grid, select on validation LLMs, report on test LLMs.
    Run(Common),
    /// Repeat `run` over several reference-set sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sizes; defaults to the config's `sweep_n_ref`.
        #[arg(long, value_delimiter = ',')]
        n_refs: Option<Vec<usize>>,
    },
    /// Write a synthetic world as a success CSV, embeddings JSONL and a ready-to-run config.
    Synthetic(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long = "n-ref")]
    n_ref: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            config.jobs = Some(jobs);
        }
        if let Some(n_ref) = self.n_ref {
            config.n_ref = n_ref;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    tool_version: &'static str,
    config_digest: String,
    #[serde(flatten)]
    body: &'a T,
}

fn write_json<T: Serialize>(path: &Path, config: &RunConfig, body: &T) -> Result<PathBuf> {
    let artifact = Artifact {
        tool_version: TOOL_VERSION,
        config_digest: config.digest(),
        body,
    };
    let mut text = serde_json::to_string_pretty(&artifact)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())?;
    Ok(path.to_path_buf())
}

pub fn cmd_split(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (matrix, store) = load_inputs(config)?;
    let plan = split_plan(&matrix, &store, config)?;
    Ok(vec![write_json(&config.output_dir.join("split.json"), config, &plan)?])
}

pub fn cmd_select(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (matrix, store) = load_inputs(config)?;
    let references = select_references(&matrix, &store, config)?;
    let dir = config.output_dir.join("references");
    references
        .iter()
        .map(|r| write_json(&dir.join(format!("{}.json", r.selector.replace('/', "__"))), config, r))
        .collect()
}

pub fn cmd_run(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (matrix, store) = load_inputs(config)?;
    let report = run_experiment_on(&matrix, &store, config)?;
    write_report(&report, &config.output_dir)
}

pub fn cmd_sweep(config: &RunConfig, n_refs: &[usize]) -> Result<Vec<PathBuf>> {
    let (matrix, store) = load_inputs(config)?;
    let table = sweep_n_ref(&matrix, &store, config, n_refs)?;
    let dir = &config.output_dir;
    let csv = dir.join("sweep.csv");
    let svg = dir.join("sweep.svg");
    let json = dir.join("sweep.json");
    atomic_write(&csv, table.to_csv()?.as_bytes())?;
    atomic_write(&svg, table.to_svg().as_bytes())?;
    atomic_write(&json, (serde_json::to_string_pretty(&table)? + "\n").as_bytes())?;
    Ok(vec![csv, svg, json])
}

/// Uses the config's `synthetic` section (defaults otherwise); `seed` overrides the world seed.
pub fn cmd_synthetic(config: &RunConfig, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let mut world_config = config.synthetic.clone().unwrap_or_default();
    if let Some(seed) = seed {
        world_config.seed = seed;
    }
    let SyntheticConfig {
        n_llms,
        n_instances,
        k,
        noise,
        seed,
    } = world_config.clone();
    let world = generate_synthetic_world(n_llms, n_instances, k, noise, seed)?;
    let dir = &config.output_dir;
    let csv = dir.join("success.csv");
    let jsonl = dir.join("embeddings.jsonl");
    atomic_write(&csv, success_csv_string(&world.matrix).as_bytes())?;
    atomic_write(&jsonl, embeddings_jsonl_string(&world.store)?.as_bytes())?;
    let run_config = RunConfig {
        success_csv: Some("success.csv".into()),
        embeddings_jsonl: Some("embeddings.jsonl".into()),
        synthetic: Some(world_config),
        output_dir: "out".into(),
        jobs: None,
        ..config.clone()
    };
    let config_path = dir.join("config.json");
    atomic_write(&config_path, (run_config.to_json_pretty() + "\n").as_bytes())?;
    let truth = write_json(&dir.join("ground_truth.json"), &run_config, &world.truth)?;
    Ok(vec![csv, jsonl, config_path, truth])
}

fn dispatch(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Split(c) => cmd_split(&c.config()?),
        Command::Select(c) => cmd_select(&c.config()?),
        Command::Run(c) => cmd_run(&c.config()?),
        Command::Sweep { common, n_refs } => {
            let config = common.config()?;
            let n_refs = n_refs.unwrap_or_else(|| config.sweep_n_ref.clone());
            if let Some(i) = n_refs.iter().position(|&n| n == 0) {
                return Err(Error::Config {
                    pointer: format!("/sweep_n_ref/{i}"),
                    msg: "must be at least 1".into(),
                });
            }
            cmd_sweep(&config, &n_refs)
        }
        Command::Synthetic(c) => cmd_synthetic(&c.config()?, c.seed),
    }
}

fn error_json(e: &Error) -> serde_json::Value {
    let mut v = json!({ "error": e.kind(), "message": e.to_string() });
    if let Error::Config { pointer, .. } = e {
        v["pointer"] = json!(pointer);
    }
    v
}

/// Parse `args` (program name first), execute, and return the exit code.
/// Written paths go to `stdout`, one per line; errors go to `stderr` as JSON.
pub fn main_with_args<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", json!({ "error": "usage", "message": e.to_string() }));
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(paths) => {
            for p in paths {
                let _ = writeln!(stdout, "{}", p.display());
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(&e));
            1
        }
    }
}
