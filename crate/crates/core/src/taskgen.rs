//! Synthetic task generation by hindsight relabeling.
//!
//! A random program is sampled against the input grids of a real task and
//! applied to them. The resulting pairs form a new task labeled with the
//! kinds of the sampled program.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{build_abstraction, AbstractGraph, AbstractionKind};
use crate::filters::{enumerate_filters_with_selections, FilterExpr};
use crate::grid::{Grid, Pair, Task, TestPair, ARC_MAX_SIDE};
use crate::primitives::{apply_primitive, enumerate_primitive_params, Grounding, PrimitiveKind};
use crate::program::{apply_program, Program, Step, MAX_STEPS};

/// Attempts allowed for a single `sample_program` call.
pub const SAMPLE_ATTEMPTS: usize = 50;

/// Consecutive unproductive attempts after which a dataset is abandoned.
pub const STALL_LIMIT: usize = 5_000;

/// Consecutive failures after which a kind is no longer preferred for
/// single-primitive tasks.
const KIND_GIVE_UP: usize = 200;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("no valid program found after {0} attempts")]
    SamplingExhausted(usize),
    #[error("could not reach {wanted} unique tasks, stopped at {reached}")]
    SourceExhausted { wanted: usize, reached: usize },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    /// Weights of program lengths 1, 2 and 3.
    pub length_weights: [f64; 3],
    pub balance_single_primitives: bool,
    pub sources: Vec<Task>,
    pub count: usize,
}

impl GenConfig {
    pub fn new(seed: u64, sources: Vec<Task>, count: usize) -> GenConfig {
        GenConfig {
            seed,
            length_weights: [0.4, 0.4, 0.2],
            balance_single_primitives: true,
            sources,
            count,
        }
    }

    fn validate(&self) -> Result<(), GenError> {
        let sum: f64 = self.length_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.length_weights.iter().any(|w| *w < 0.0) {
            return Err(GenError::InvalidConfig(format!(
                "length weights sum to {sum}"
            )));
        }
        if self.count == 0 {
            return Err(GenError::InvalidConfig("count must be positive".into()));
        }
        if !self
            .sources
            .iter()
            .any(|t| t.train.len() + t.test.len() >= 2)
        {
            return Err(GenError::InvalidConfig(
                "no source task has two inputs".into(),
            ));
        }
        Ok(())
    }

    /// Exact number of tasks per length; rounding remainders go to the
    /// lengths with the largest fractional parts, ties to the shorter one.
    pub fn length_quotas(&self) -> [usize; 3] {
        let raw: Vec<f64> = self
            .length_weights
            .iter()
            .map(|w| w * self.count as f64)
            .collect();
        let mut q = [0usize; 3];
        for i in 0..3 {
            q[i] = raw[i].floor() as usize;
        }
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            (raw[b] - raw[b].floor())
                .total_cmp(&(raw[a] - raw[a].floor()))
                .then(a.cmp(&b))
        });
        let mut left = self.count - q.iter().sum::<usize>();
        for i in order.into_iter().cycle() {
            if left == 0 {
                break;
            }
            if self.length_weights[i] > 0.0 {
                q[i] += 1;
                left -= 1;
            }
        }
        q
    }
}

/// A generated task with its ground-truth program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub task_id: String,
    pub task: Task,
    pub label: [PrimitiveKind; 3],
    pub program: Program,
    /// Id of the task whose inputs were used.
    pub source: String,
}

/// Label of a program: its kinds padded with `no_trans`.
pub fn label_of(program: &Program) -> [PrimitiveKind; 3] {
    let mut label = [PrimitiveKind::NoTrans; 3];
    for (slot, kind) in label.iter_mut().zip(program.kinds()) {
        *slot = kind;
    }
    label
}

fn sampling_grounding() -> Grounding {
    Grounding {
        output_colors: None,
        size_ratio: None,
    }
}

/// Samples a program of exactly `length` steps grounded on `inputs`.
pub fn sample_program(
    rng: &mut ChaCha8Rng,
    inputs: &[Grid],
    length: usize,
) -> Result<Program, GenError> {
    sample_program_from(rng, inputs, length, None)
}

/// As [`sample_program`], with the first step's kind fixed when given.
fn sample_program_from(
    rng: &mut ChaCha8Rng,
    inputs: &[Grid],
    length: usize,
    first_kind: Option<PrimitiveKind>,
) -> Result<Program, GenError> {
    assert!((1..=MAX_STEPS).contains(&length));
    for _ in 0..SAMPLE_ATTEMPTS {
        let kind = *AbstractionKind::ALL.choose(rng).expect("non-empty");
        let graphs: Vec<AbstractGraph> =
            inputs.iter().map(|g| build_abstraction(g, kind)).collect();
        if let Some(steps) = sample_steps(rng, graphs, length, first_kind) {
            return Ok(Program {
                abstraction: kind,
                steps,
            });
        }
    }
    Err(GenError::SamplingExhausted(SAMPLE_ATTEMPTS))
}

/// One attempt. Every step must change the grids of the train inputs (all
/// but the last input, which becomes the test pair) and must not revisit an
/// earlier state, so no step is redundant on the pairs a solver sees.
fn sample_steps(
    rng: &mut ChaCha8Rng,
    mut graphs: Vec<AbstractGraph>,
    length: usize,
    first_kind: Option<PrimitiveKind>,
) -> Option<Vec<Step>> {
    let grounding = sampling_grounding();
    let train = graphs.len().saturating_sub(1).max(1);
    let mut visited: Vec<Vec<Grid>> = vec![graphs[..train].iter().map(|g| g.to_grid()).collect()];
    let mut steps = Vec::with_capacity(length);
    for depth in 0..length {
        let kind = match (depth, first_kind) {
            (0, Some(k)) => k,
            _ => *PrimitiveKind::EXECUTABLE.choose(rng).expect("non-empty"),
        };
        let (filter, selections) = if kind.is_grid_level() {
            (FilterExpr::All, vec![Vec::new(); graphs.len()])
        } else {
            let filters = enumerate_filters_with_selections(&graphs);
            filters.choose(rng)?.clone()
        };
        let params = enumerate_primitive_params(kind, &graphs, &grounding);
        let call = params.choose(rng)?.clone();
        let mut next = Vec::with_capacity(graphs.len());
        for (g, sel) in graphs.iter().zip(&selections) {
            next.push(apply_primitive(&call, g, sel).ok()?);
        }
        let grids: Vec<Grid> = next[..train].iter().map(|g| g.to_grid()).collect();
        if visited.contains(&grids) {
            return None;
        }
        visited.push(grids);
        graphs = next;
        steps.push(Step::new(filter, call));
    }
    Some(steps)
}

/// Applies `program` to every input. Returns `None` if any application
/// fails, leaves its input unchanged or exceeds the ARC size limit. The
/// last pair becomes the test pair.
pub fn generate_task(source_inputs: &[Grid], program: &Program) -> Option<SyntheticTask> {
    if source_inputs.len() < 2 {
        return None;
    }
    let mut pairs = Vec::with_capacity(source_inputs.len());
    for input in source_inputs {
        let output = apply_program(program, input).ok()?;
        if &output == input || output.height() > ARC_MAX_SIDE || output.width() > ARC_MAX_SIDE {
            return None;
        }
        pairs.push(Pair {
            input: input.clone(),
            output,
        });
    }
    let last = pairs.pop().expect("at least two pairs");
    let task = Task::new(
        "",
        pairs,
        vec![TestPair {
            input: last.input,
            output: Some(last.output),
        }],
    )
    .ok()?;
    Some(SyntheticTask {
        task_id: String::new(),
        task,
        label: label_of(program),
        program: program.clone(),
        source: String::new(),
    })
}

/// Dedup key: the serialized pairs, without id or label.
fn dedup_key(task: &Task) -> Vec<u8> {
    crate::grid::serialize_task(task)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub count: usize,
    pub length_weights: [f64; 3],
    pub balance_single_primitives: bool,
    pub sources: Vec<String>,
    pub counts_per_length: BTreeMap<usize, usize>,
    pub counts_per_first_kind: BTreeMap<PrimitiveKind, usize>,
    pub single_primitive_counts: BTreeMap<PrimitiveKind, usize>,
    pub attempts: usize,
    pub discarded: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub tasks: Vec<SyntheticTask>,
    pub manifest: Manifest,
}

impl Dataset {
    /// One JSON record per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for t in &self.tasks {
            serde_json::to_writer(&mut w, t)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        out
    }
}

pub fn read_jsonl(text: &str) -> Result<Vec<SyntheticTask>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut t: SyntheticTask = serde_json::from_str(l)?;
            t.task.task_id = t.task_id.clone();
            Ok(t)
        })
        .collect()
}

/// Generates `config.count` unique tasks with exact per-length quotas.
/// Length-1 tasks are spread evenly over kinds when balancing is on.
pub fn generate_dataset(config: &GenConfig) -> Result<Dataset, GenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sources: Vec<(&Task, Vec<Grid>)> = config
        .sources
        .iter()
        .map(|t| (t, t.inputs()))
        .filter(|(_, inputs)| inputs.len() >= 2)
        .collect();

    let quotas = config.length_quotas();
    let mut remaining = quotas;
    let mut kind_failures: BTreeMap<PrimitiveKind, usize> = BTreeMap::new();
    let mut single_counts: BTreeMap<PrimitiveKind, usize> = BTreeMap::new();

    let mut stalled = 0usize;
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut tasks = Vec::with_capacity(config.count);
    let mut manifest = Manifest {
        seed: config.seed,
        count: config.count,
        length_weights: config.length_weights,
        balance_single_primitives: config.balance_single_primitives,
        sources: config.sources.iter().map(|t| t.task_id.clone()).collect(),
        counts_per_length: BTreeMap::new(),
        counts_per_first_kind: BTreeMap::new(),
        single_primitive_counts: BTreeMap::new(),
        attempts: 0,
        discarded: 0,
        duplicates: 0,
    };

    while tasks.len() < config.count {
        if stalled >= STALL_LIMIT {
            return Err(GenError::SourceExhausted {
                wanted: config.count,
                reached: tasks.len(),
            });
        }
        manifest.attempts += 1;
        stalled += 1;
        let length = WeightedIndex::new(remaining)
            .expect("some quota left")
            .sample(&mut rng)
            + 1;
        let (source, inputs) = &sources[rng.gen_range(0..sources.len())];

        let balanced = length == 1 && config.balance_single_primitives;
        let first_kind = if balanced {
            least_used_kind(&mut rng, &single_counts, &kind_failures)
        } else {
            None
        };
        let outcome = sample_program_from(&mut rng, inputs, length, first_kind)
            .ok()
            .and_then(|p| generate_task(inputs, &p));
        let Some(mut synthetic) = outcome else {
            manifest.discarded += 1;
            if let Some(k) = first_kind {
                *kind_failures.entry(k).or_default() += 1;
            }
            continue;
        };
        if !seen.insert(dedup_key(&synthetic.task)) {
            manifest.duplicates += 1;
            if let Some(k) = first_kind {
                *kind_failures.entry(k).or_default() += 1;
            }
            continue;
        }
        if let Some(k) = first_kind {
            kind_failures.remove(&k);
        }
        let id = format!("syn-{:016x}-{:06}", config.seed, tasks.len());
        synthetic.task.task_id = id.clone();
        synthetic.task_id = id;
        synthetic.source = source.task_id.clone();

        stalled = 0;
        remaining[length - 1] -= 1;
        let first = synthetic.label[0];
        if length == 1 {
            *single_counts.entry(first).or_default() += 1;
        }
        *manifest.counts_per_length.entry(length).or_default() += 1;
        *manifest.counts_per_first_kind.entry(first).or_default() += 1;
        tasks.push(synthetic);
    }
    manifest.single_primitive_counts = single_counts;
    Ok(Dataset { tasks, manifest })
}

/// Uniform choice among the kinds with the fewest single-primitive tasks so
/// far, ignoring kinds that keep failing on these sources.
fn least_used_kind(
    rng: &mut ChaCha8Rng,
    counts: &BTreeMap<PrimitiveKind, usize>,
    failures: &BTreeMap<PrimitiveKind, usize>,
) -> Option<PrimitiveKind> {
    let live: Vec<PrimitiveKind> = PrimitiveKind::EXECUTABLE
        .into_iter()
        .filter(|k| failures.get(k).copied().unwrap_or(0) < KIND_GIVE_UP)
        .collect();
    if live.is_empty() {
        return None;
    }
    let count = |k: &PrimitiveKind| counts.get(k).copied().unwrap_or(0);
    let min = live.iter().map(count).min()?;
    let least: Vec<PrimitiveKind> = live.into_iter().filter(|k| count(k) == min).collect();
    least.choose(rng).copied()
}

/// Default size of a per-task adaptation set.
pub const TTA_DEFAULT_COUNT: usize = 2500;

/// Tasks generated from the inputs of one task only.
pub fn generate_tta_set(task: &Task, n: usize, seed: u64) -> Result<Dataset, GenError> {
    generate_dataset(&GenConfig::new(seed, vec![task.clone()], n))
}
