//! Command line entry points: `solve`, `gen`, `score` and `oracle`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{load_task_dir, load_task_file, serialize_task, Grid, LoadError, Task};
use crate::program::{Program, MAX_STEPS};
use crate::proposals::{
    aggregate, expand_topk, oracle_proposals, parse_proposals_jsonl, random_proposals,
    score_predictions, Metrics, ProposalError, ProposalSet,
};
use crate::search::{solve, SearchConfig};
use crate::taskgen::{
    generate_dataset, read_jsonl, Dataset, GenConfig, GenError, TTA_DEFAULT_COUNT,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("{0}: {1}")]
    Json(PathBuf, serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "nsa", version, about = "Neuro-symbolic ARC solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search programs for every task of a directory.
    Solve(SolveArgs),
    /// Generate synthetic tasks from real task inputs.
    Gen(GenArgs),
    /// Compare proposals against dataset labels.
    Score(ScoreArgs),
    /// Write proposals for a dataset from its true programs, or random ones.
    Oracle(OracleArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SolveArgs {
    /// Directory of ARC task files.
    pub task_dir: PathBuf,
    #[arg(long, default_value_t = 1800.0)]
    pub budget_seconds: f64,
    /// JSON-lines proposals, one per task id.
    #[arg(long)]
    pub proposals: Option<PathBuf>,
    #[arg(long, default_value_t = MAX_STEPS)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Maximum expansions per task.
    #[arg(long)]
    pub node_budget: Option<usize>,
    /// Report zero wall times so that runs compare byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Skip transformations whose expansion never improved the score.
    #[arg(long)]
    pub taboo: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct GenArgs {
    /// Directory of ARC task files whose inputs are used.
    #[arg(long, required_unless_present = "tta_task")]
    pub sources: Option<PathBuf>,
    /// Generate only from this task's inputs.
    #[arg(long, conflicts_with = "sources")]
    pub tta_task: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weights of lengths 1, 2 and 3.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.4, 0.4, 0.2])]
    pub weights: Vec<f64>,
    #[arg(long)]
    pub no_balance: bool,
    /// Dataset file (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest file; defaults to the dataset path with `.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Also write every task as an ARC file into this directory.
    #[arg(long)]
    pub tasks_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ScoreArgs {
    #[arg(long)]
    pub proposals: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct OracleArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Emit uniformly random proposals from this seed instead.
    #[arg(long)]
    pub random_seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Outcome of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: String,
    pub solved: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub program: Option<Program>,
    pub expansions: usize,
    pub wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_outputs: Option<Vec<Grid>>,
    /// Present when the task file carries test outputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tasks: Vec<TaskReport>,
    pub solved: usize,
    pub total: usize,
    pub mean_expansions: f64,
    pub mean_wall_seconds: f64,
}

impl RunReport {
    pub fn from_tasks(tasks: Vec<TaskReport>) -> RunReport {
        let total = tasks.len();
        let denom = total.max(1) as f64;
        RunReport {
            solved: tasks.iter().filter(|t| t.solved).count(),
            total,
            mean_expansions: tasks.iter().map(|t| t.expansions as f64).sum::<f64>() / denom,
            mean_wall_seconds: tasks.iter().map(|t| t.wall_seconds).sum::<f64>() / denom,
            tasks,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serialization");
    bytes.push(b'\n');
    bytes
}

pub fn solve_task(task: &Task, config: SearchConfig, timing: bool) -> TaskReport {
    let result = solve(task, config);
    let (program, test_outputs) = match result.solution {
        Some(s) => (Some(s.program), s.test_outputs),
        None => (None, None),
    };
    let expected: Option<Vec<Grid>> = task.test.iter().map(|t| t.output.clone()).collect();
    let test_correct = expected.map(|e| test_outputs.as_ref() == Some(&e));
    TaskReport {
        task_id: task.task_id.clone(),
        solved: program.is_some(),
        program,
        expansions: result.stats.expansions,
        wall_seconds: if timing {
            result.stats.wall_seconds
        } else {
            0.0
        },
        test_outputs,
        test_correct,
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<RunReport, CliError> {
    if !(1..=MAX_STEPS).contains(&args.max_depth) {
        return Err(CliError::Usage(format!(
            "--max-depth must be in 1..={MAX_STEPS}"
        )));
    }
    if !(args.budget_seconds > 0.0) {
        return Err(CliError::Usage("--budget-seconds must be positive".into()));
    }
    let tasks = load_task_dir(&args.task_dir)?;
    let proposals: BTreeMap<String, ProposalSet> = match &args.proposals {
        Some(path) => parse_proposals_jsonl(&read(path)?)?
            .into_iter()
            .map(|p| (p.task_id.clone(), p))
            .collect(),
        None => BTreeMap::new(),
    };
    let base = SearchConfig {
        time_budget: Duration::from_secs_f64(args.budget_seconds),
        max_depth: args.max_depth,
        node_budget: args.node_budget.unwrap_or(usize::MAX),
        use_taboo: args.taboo,
        ..SearchConfig::default()
    };
    let mut configs = Vec::with_capacity(tasks.len());
    for task in &tasks {
        let config = match proposals.get(&task.task_id) {
            Some(p) => {
                let mut c = expand_topk(p)?.apply(base.clone());
                c.max_depth = c.max_depth.min(args.max_depth);
                c
            }
            None => {
                if args.proposals.is_some() {
                    eprintln!("no proposals for {}, searching unrestricted", task.task_id);
                }
                base.clone()
            }
        };
        configs.push(config);
    }
    let timing = !args.no_timing;
    let run = |pairs: Vec<(&Task, SearchConfig)>| -> Vec<TaskReport> {
        pairs
            .into_iter()
            .map(|(t, c)| solve_task(t, c, timing))
            .collect()
    };
    let pairs: Vec<(&Task, SearchConfig)> = tasks.iter().zip(configs).collect();
    let reports = if args.workers <= 1 {
        run(pairs)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        pool.install(|| {
            pairs
                .into_par_iter()
                .map(|(t, c)| solve_task(t, c, timing))
                .collect()
        })
    };
    let report = RunReport::from_tasks(reports);
    match &args.out {
        Some(path) => write(path, &to_json(&report))?,
        None => print!(
            "{}",
            String::from_utf8(to_json(&report)).expect("utf-8 json")
        ),
    }
    Ok(report)
}

pub fn cmd_gen(args: &GenArgs) -> Result<Dataset, CliError> {
    let weights: [f64; 3] = args
        .weights
        .clone()
        .try_into()
        .map_err(|_| CliError::Usage("--weights takes three values".into()))?;
    let (sources, default_count) = match (&args.sources, &args.tta_task) {
        (_, Some(file)) => (vec![load_task_file(file)?], TTA_DEFAULT_COUNT),
        (Some(dir), None) => (load_task_dir(dir)?, 1000),
        (None, None) => {
            return Err(CliError::Usage(
                "--sources or --tta-task is required".into(),
            ))
        }
    };
    let config = GenConfig {
        seed: args.seed,
        length_weights: weights,
        balance_single_primitives: !args.no_balance,
        sources,
        count: args.count.unwrap_or(default_count),
    };
    let dataset = generate_dataset(&config)?;
    write(&args.out, &dataset.to_jsonl())?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".manifest.json");
        PathBuf::from(p)
    });
    write(&manifest_path, &to_json(&dataset.manifest))?;
    if let Some(dir) = &args.tasks_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.clone(), e))?;
        for t in &dataset.tasks {
            write(
                &dir.join(format!("{}.json", t.task_id)),
                &serialize_task(&t.task),
            )?;
        }
    }
    let m = &dataset.manifest;
    println!(
        "wrote {} tasks to {} (lengths {:?}, {} attempts, {} discarded, {} duplicates)",
        dataset.tasks.len(),
        args.out.display(),
        m.counts_per_length,
        m.attempts,
        m.discarded,
        m.duplicates
    );
    Ok(dataset)
}

pub fn cmd_score(args: &ScoreArgs) -> Result<Metrics, CliError> {
    let proposals = parse_proposals_jsonl(&read(&args.proposals)?)?;
    let dataset =
        read_jsonl(&read(&args.dataset)?).map_err(|e| CliError::Json(args.dataset.clone(), e))?;
    let labels: BTreeMap<&str, _> = dataset
        .iter()
        .map(|t| (t.task_id.as_str(), t.label))
        .collect();
    let proposed: BTreeSet<&str> = proposals.iter().map(|p| p.task_id.as_str()).collect();
    if proposed.len() != proposals.len() {
        return Err(CliError::Usage("duplicate task ids among proposals".into()));
    }
    if proposed != labels.keys().copied().collect() {
        let missing: Vec<&&str> = labels
            .keys()
            .filter(|k| !proposed.contains(*k))
            .take(3)
            .collect();
        let extra: Vec<&&str> = proposed
            .iter()
            .filter(|k| !labels.contains_key(*k))
            .take(3)
            .collect();
        return Err(CliError::Usage(format!(
            "task ids differ between proposals and dataset (missing {missing:?}, unknown {extra:?})"
        )));
    }
    let predictions = proposals
        .iter()
        .map(|p| score_predictions(p, &labels[p.task_id.as_str()]))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics = aggregate(&predictions);
    print!(
        "{}",
        String::from_utf8(to_json(&metrics)).expect("utf-8 json")
    );
    Ok(metrics)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<Vec<ProposalSet>, CliError> {
    let dataset =
        read_jsonl(&read(&args.dataset)?).map_err(|e| CliError::Json(args.dataset.clone(), e))?;
    let mut rng = args.random_seed.map(ChaCha8Rng::seed_from_u64);
    let sets: Vec<ProposalSet> = dataset
        .iter()
        .map(|t| match rng.as_mut() {
            Some(r) => random_proposals(r, &t.task_id),
            None => oracle_proposals(&t.task_id, &t.program),
        })
        .collect();
    let mut out = Vec::new();
    for s in &sets {
        out.extend(serde_json::to_vec(s).expect("proposal serialization"));
        out.push(b'\n');
    }
    write(&args.out, &out)?;
    Ok(sets)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => cmd_solve(&a).map(drop),
        Command::Gen(a) => cmd_gen(&a).map(drop),
        Command::Score(a) => cmd_score(&a).map(drop),
        Command::Oracle(a) => cmd_oracle(&a).map(drop),
    }
}
