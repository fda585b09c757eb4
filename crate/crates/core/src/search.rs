//! Greedy best-first search over programs.
//!
//! Each search node holds the graphs obtained by applying a partial program
//! to every train input. Nodes are expanded in ascending order of
//! `(summed distance to the train outputs, depth, insertion index)`. Children
//! whose reconstructed grids equal an already seen state are merged, children
//! violating task constraints are pruned. Optionally, transformations whose
//! expansion never improved the score are put on a taboo list. Each
//! abstraction root keeps its own taboo entries.

use std::cmp::Reverse;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::abstraction::{build_abstraction, list_abstractions, AbstractGraph, AbstractionKind};
use crate::filters::{enumerate_filters_with_selections, FilterExpr};
use crate::grid::{grid_distance, Grid, Task};
use crate::primitives::{
    apply_primitive_grid, enumerate_primitive_params, Grounding, PrimitiveKind,
};
use crate::program::{apply_program, Program, Step, MAX_STEPS};

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub time_budget: Duration,
    /// 1..=3.
    pub max_depth: usize,
    /// Maximum number of node expansions.
    pub node_budget: usize,
    /// Per-depth allowed kinds; `None` allows every executable kind.
    pub allowed: Option<Vec<BTreeSet<PrimitiveKind>>>,
    /// Keep only the best `n` children of each expansion; 0 keeps all.
    pub beam_per_expansion: usize,
    /// Off by default: it can cut the true path of a multi-step program.
    pub use_taboo: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            time_budget: Duration::from_secs(1800),
            max_depth: MAX_STEPS,
            node_budget: usize::MAX,
            allowed: None,
            beam_per_expansion: 0,
            use_taboo: false,
        }
    }
}

impl SearchConfig {
    pub fn allowed_at(&self, depth: usize) -> Vec<PrimitiveKind> {
        match &self.allowed {
            None => PrimitiveKind::EXECUTABLE.to_vec(),
            Some(sets) => sets
                .get(depth)
                .map(|s| s.iter().copied().filter(|k| k.is_executable()).collect())
                .unwrap_or_default(),
        }
    }
}

/// A partial program together with the state it produces on the train inputs.
#[derive(Debug, Clone)]
pub struct SearchNode {
    pub abstraction: AbstractionKind,
    pub steps: Vec<Step>,
    /// One graph per train pair.
    pub graphs: Vec<AbstractGraph>,
    pub score: u64,
}

impl SearchNode {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn program(&self) -> Program {
        Program {
            abstraction: self.abstraction,
            steps: self.steps.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateDigest(pub u64);

fn hash_state(kind: Option<AbstractionKind>, state: &[u8]) -> StateDigest {
    let mut h = DefaultHasher::new();
    kind.hash(&mut h);
    h.write(state);
    StateDigest(h.finish())
}

fn hash_grids(kind: Option<AbstractionKind>, grids: &[Grid]) -> StateDigest {
    hash_state(kind, &encode_state(grids))
}

/// Order-sensitive digest of the reconstructed grids.
pub fn digest_state(graphs: &[AbstractGraph]) -> StateDigest {
    let grids: Vec<Grid> = graphs.iter().map(|g| g.to_grid()).collect();
    hash_grids(None, &grids)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchStats {
    pub expansions: usize,
    pub generated: usize,
    pub duplicates: usize,
    pub pruned: usize,
    pub taboo_skips: usize,
    pub timed_out: bool,
    pub wall_seconds: f64,
    /// `(score, depth)` of every expanded node, in expansion order.
    #[serde(skip)]
    pub expansion_keys: Vec<(u64, usize)>,
    /// For each expansion, the smallest key still queued after the pop;
    /// `None` for the initial root expansions.
    #[serde(skip)]
    pub queue_minima: Vec<Option<(u64, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub program: Program,
    /// `None` when the program fails on some test input.
    pub test_outputs: Option<Vec<Grid>>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: Option<Solution>,
    pub stats: SearchStats,
}

/// Arena entry. Graphs are not stored; they are replayed from the root on
/// demand, which keeps memory proportional to the number of nodes.
struct Entry {
    parent: Option<u32>,
    root: u8,
    depth: u8,
    step: Option<Step>,
    digest: StateDigest,
    /// Encoded grids, compared in full when digests collide.
    state: Box<[u8]>,
}

struct Child {
    step: Step,
    score: u64,
    digest: StateDigest,
    state: Box<[u8]>,
}

/// Dimensions and cells of every grid, one byte each.
fn encode_state(grids: &[Grid]) -> Box<[u8]> {
    let mut out = Vec::with_capacity(grids.iter().map(|g| 2 + g.cells().len()).sum());
    for g in grids {
        out.push(g.height() as u8);
        out.push(g.width() as u8);
        out.extend(g.cells().iter().map(|c| c.value()));
    }
    out.into_boxed_slice()
}

/// Task-level facts used to prune children.
struct Constraints {
    targets: Vec<(usize, usize)>,
    output_palette: u16,
    /// Indexed by depth, up to and including `max_depth`.
    reach: Vec<Reach>,
}

/// Size changes available to the kinds allowed from some depth on.
#[derive(Debug, Clone, Copy, Default)]
struct Reach {
    grow: bool,
    shrink: bool,
    rotate: bool,
}

/// Search state for one task.
pub struct Searcher<'a> {
    task: &'a Task,
    config: SearchConfig,
    grounding: Grounding,
    constraints: Constraints,
    roots: Vec<Vec<AbstractGraph>>,
    arena: Vec<Entry>,
    seen: HashMap<StateDigest, Vec<u32>>,
    /// (root abstraction, depth, step digest)
    taboo: HashSet<(usize, usize, u64)>,
    stats: SearchStats,
    started: Instant,
}

fn step_digest(step: &Step) -> u64 {
    let mut h = DefaultHasher::new();
    step.hash(&mut h);
    h.finish()
}

impl<'a> Searcher<'a> {
    pub fn new(task: &'a Task, config: SearchConfig) -> Searcher<'a> {
        let constraints = Constraints {
            targets: task.train.iter().map(|p| p.output.dims()).collect(),
            output_palette: task.train.iter().fold(0, |m, p| m | p.output.palette()),
            reach: (0..=config.max_depth)
                .map(|depth| {
                    let remaining: Vec<PrimitiveKind> = (depth..config.max_depth)
                        .flat_map(|d| config.allowed_at(d))
                        .collect();
                    Reach {
                        grow: remaining
                            .iter()
                            .any(|k| k.changes_size() && *k != PrimitiveKind::Extract),
                        shrink: remaining.iter().any(|k| k.can_shrink()),
                        rotate: remaining.contains(&PrimitiveKind::RotateGrid),
                    }
                })
                .collect(),
        };
        Searcher {
            task,
            grounding: Grounding::from_task(task),
            config,
            constraints,
            roots: Vec::new(),
            arena: Vec::new(),
            seen: HashMap::new(),
            taboo: HashSet::new(),
            stats: SearchStats::default(),
            started: Instant::now(),
        }
    }

    fn score(&self, grids: &[Grid]) -> u64 {
        grids
            .iter()
            .zip(&self.task.train)
            .map(|(g, p)| grid_distance(g, &p.output))
            .sum()
    }

    /// Root node (empty program) for one abstraction.
    pub fn root(&self, kind: AbstractionKind) -> SearchNode {
        let graphs: Vec<AbstractGraph> = self
            .task
            .train
            .iter()
            .map(|p| build_abstraction(&p.input, kind))
            .collect();
        let grids: Vec<Grid> = graphs.iter().map(|g| g.to_grid()).collect();
        SearchNode {
            abstraction: kind,
            steps: Vec::new(),
            score: self.score(&grids),
            graphs,
        }
    }

    /// `false` when the child violates a deduced task invariant:
    /// unreachable output dimensions, a color foreign to every train output
    /// introduced, or a worse score at the final depth.
    pub fn check_constraints(&self, child: &SearchNode, parent: &SearchNode) -> bool {
        let grids: Vec<Grid> = child.graphs.iter().map(|g| g.to_grid()).collect();
        let palettes: Vec<u16> = parent.graphs.iter().map(palette_of).collect();
        self.constraints_hold(&grids, child.score, child.depth(), parent.score, &palettes)
    }

    fn constraints_hold(
        &self,
        grids: &[Grid],
        score: u64,
        depth: usize,
        parent_score: u64,
        parent_palettes: &[u16],
    ) -> bool {
        if score == 0 {
            return true;
        }
        if depth >= self.config.max_depth && score > parent_score {
            return false;
        }
        if !self.dims_reachable(grids.iter().map(|g| g.dims()), depth) {
            return false;
        }
        grids
            .iter()
            .zip(parent_palettes)
            .all(|(c, &p)| grid_palette(c) & !p & !self.constraints.output_palette == 0)
    }

    /// Whether the kinds allowed from `depth` on can still turn every size
    /// into its train output size.
    fn dims_reachable(&self, dims: impl Iterator<Item = (usize, usize)>, depth: usize) -> bool {
        let reach = self.constraints.reach[depth.min(self.config.max_depth)];
        dims.zip(&self.constraints.targets)
            .all(|((h, w), &(th, tw))| {
                (h, w) == (th, tw)
                    || (reach.rotate && (w, h) == (th, tw))
                    || ((reach.grow || (th <= h && tw <= w))
                        && (reach.shrink || (th >= h && tw >= w)))
            })
    }

    /// All surviving children of `node`, in generation order. Children are
    /// deduplicated against every state this searcher has seen.
    pub fn expand(&mut self, node: &SearchNode) -> Vec<SearchNode> {
        let mut out = Vec::new();
        self.generate(node, &mut |child| {
            out.push(child);
            false
        });
        out.into_iter()
            .map(|c| SearchNode {
                abstraction: node.abstraction,
                graphs: node
                    .graphs
                    .iter()
                    .map(|g| {
                        crate::program::apply_step(&c.step, g).expect("replay of an accepted step")
                    })
                    .collect(),
                steps: node.steps.iter().cloned().chain([c.step]).collect(),
                score: c.score,
            })
            .collect()
    }

    /// A state is a duplicate if the same abstraction already reached it at
    /// the same or a smaller depth; a shallower copy has more steps left.
    fn is_duplicate(
        &self,
        kind: AbstractionKind,
        digest: StateDigest,
        state: &[u8],
        depth: usize,
    ) -> bool {
        let Some(candidates) = self.seen.get(&digest) else {
            return false;
        };
        candidates.iter().any(|&idx| {
            let entry = &self.arena[idx as usize];
            AbstractionKind::ALL[entry.root as usize] == kind
                && entry.depth as usize <= depth
                && *entry.state == *state
        })
    }

    fn register(&mut self, entry: Entry) -> u32 {
        let idx = self.arena.len() as u32;
        self.seen.entry(entry.digest).or_default().push(idx);
        self.arena.push(entry);
        idx
    }

    fn steps_of(&self, mut idx: u32) -> (usize, Vec<Step>) {
        let mut steps = Vec::new();
        loop {
            let e = &self.arena[idx as usize];
            match (e.parent, &e.step) {
                (Some(p), Some(s)) => {
                    steps.push(s.clone());
                    idx = p;
                }
                _ => break,
            }
        }
        steps.reverse();
        (self.arena[idx as usize].root as usize, steps)
    }

    fn materialize(&self, idx: u32) -> Vec<AbstractGraph> {
        let (root, steps) = self.steps_of(idx);
        let mut graphs = self.roots[root].clone();
        for step in &steps {
            graphs = graphs
                .iter()
                .map(|g| crate::program::apply_step(step, g).expect("replay of an accepted step"))
                .collect();
        }
        graphs
    }

    fn out_of_time(&self) -> bool {
        self.started.elapsed() >= self.config.time_budget
    }

    /// Feeds every surviving child to `sink`; stops early when `sink`
    /// returns `true` or the time budget runs out.
    fn generate(&mut self, node: &SearchNode, sink: &mut dyn FnMut(Child) -> bool) {
        let depth = node.depth();
        if depth >= self.config.max_depth {
            return;
        }
        let filters = enumerate_filters_with_selections(&node.graphs);
        let palettes: Vec<u16> = node.graphs.iter().map(palette_of).collect();
        let dims: Vec<(usize, usize)> = node.graphs.iter().map(|g| (g.height, g.width)).collect();
        let kinds = self.config.allowed_at(depth);
        let mut counter = 0usize;
        for kind in kinds {
            // children of size-preserving kinds keep these dimensions
            if !kind.changes_size() && !self.dims_reachable(dims.iter().copied(), depth + 1) {
                continue;
            }
            let params = enumerate_primitive_params(kind, &node.graphs, &self.grounding);
            let filter_slice: &[(FilterExpr, Vec<Vec<usize>>)] = if kind.is_grid_level() {
                &filters[..1]
            } else {
                &filters
            };
            for (filter, selections) in filter_slice {
                if !kind.is_grid_level() && selections.iter().all(|s| s.is_empty()) {
                    continue;
                }
                for call in &params {
                    counter += 1;
                    if counter % 64 == 0 && self.out_of_time() {
                        self.stats.timed_out = true;
                        return;
                    }
                    self.stats.generated += 1;
                    let grids: Result<Vec<Grid>, _> = node
                        .graphs
                        .iter()
                        .zip(selections)
                        .map(|(g, sel)| apply_primitive_grid(call, g, sel))
                        .collect();
                    let Ok(grids) = grids else {
                        self.stats.pruned += 1;
                        continue;
                    };
                    let state = encode_state(&grids);
                    let digest = hash_state(Some(node.abstraction), &state);
                    if self.is_duplicate(node.abstraction, digest, &state, depth + 1) {
                        self.stats.duplicates += 1;
                        continue;
                    }
                    let score = self.score(&grids);
                    let step = Step::new(filter.clone(), call.clone());
                    if !self.constraints_hold(&grids, score, depth + 1, node.score, &palettes) {
                        self.stats.pruned += 1;
                        continue;
                    }
                    let child = Child {
                        step,
                        score,
                        digest,
                        state,
                    };
                    if sink(child) {
                        return;
                    }
                }
            }
        }
    }

    /// Runs the search to completion, budget exhaustion or the first
    /// zero-score program.
    pub fn run(mut self) -> SolveResult {
        self.started = Instant::now();
        let mut heap: BinaryHeap<Reverse<(u64, usize, u32)>> = BinaryHeap::new();
        let mut pending_roots: VecDeque<(u64, usize, u32)> = VecDeque::new();

        for kind in list_abstractions() {
            let root = self.root(kind);
            let grids: Vec<Grid> = root.graphs.iter().map(|g| g.to_grid()).collect();
            let digest = hash_grids(Some(kind), &grids);
            self.roots.push(root.graphs);
            let idx = self.register(Entry {
                parent: None,
                root: (self.roots.len() - 1) as u8,
                depth: 0,
                step: None,
                digest,
                state: encode_state(&grids),
            });
            pending_roots.push_back((root.score, 0, idx));
        }

        // root and best-first pops alternate until every abstraction root
        // has been expanded; the roots score alike, so ordering alone would
        // let the first abstraction's subtree starve the others
        let mut found: Option<Program> = None;
        let mut root_turn = true;
        loop {
            let take_root = !pending_roots.is_empty() && (root_turn || heap.is_empty());
            root_turn = !root_turn;
            let (from_root, (score, depth, idx)) = if take_root {
                (true, pending_roots.pop_front().unwrap())
            } else {
                match heap.pop() {
                    Some(Reverse(key)) => (false, key),
                    None => break,
                }
            };
            if self.out_of_time() {
                self.stats.timed_out = true;
                break;
            }
            if self.stats.expansions >= self.config.node_budget {
                break;
            }
            if depth >= self.config.max_depth {
                continue;
            }
            let (root, steps) = self.steps_of(idx);
            if let Some(last) = steps.last() {
                if self.taboo.contains(&(root, depth, step_digest(last))) {
                    self.stats.taboo_skips += 1;
                    continue;
                }
            }
            self.stats.expansions += 1;
            self.stats.expansion_keys.push((score, depth));
            self.stats.queue_minima.push(
                heap.peek()
                    .filter(|_| !from_root)
                    .map(|Reverse((s, d, _))| (*s, *d)),
            );

            let node = SearchNode {
                abstraction: AbstractionKind::ALL[root],
                graphs: self.materialize(idx),
                steps,
                score,
            };
            let mut children: Vec<Child> = Vec::new();
            let mut best = u64::MAX;
            let mut solution: Option<Step> = None;
            let queue_children = depth + 1 < self.config.max_depth;
            self.generate(&node, &mut |child| {
                best = best.min(child.score);
                if child.score == 0 {
                    solution = Some(child.step.clone());
                    return true;
                }
                if queue_children {
                    children.push(child);
                }
                false
            });
            if let Some(step) = solution {
                let mut program = node.program();
                program.steps.push(step);
                found = Some(program);
                break;
            }
            if self.config.use_taboo && depth > 0 && best >= score {
                let last = node.steps.last().expect("non-root");
                self.taboo.insert((root, depth, step_digest(last)));
            }
            if self.config.beam_per_expansion > 0 {
                children.sort_by_key(|c| c.score);
                children.truncate(self.config.beam_per_expansion);
            }
            let child_depth = depth + 1;
            // leaves at max depth with a non-zero score can never be
            // solutions, so they are neither queued nor remembered
            if child_depth < self.config.max_depth {
                for child in children {
                    // siblings are not yet registered while they are generated
                    if self.is_duplicate(
                        AbstractionKind::ALL[root],
                        child.digest,
                        &child.state,
                        child_depth,
                    ) {
                        self.stats.duplicates += 1;
                        continue;
                    }
                    let cidx = self.register(Entry {
                        parent: Some(idx),
                        root: root as u8,
                        depth: child_depth as u8,
                        step: Some(child.step),
                        digest: child.digest,
                        state: child.state,
                    });
                    heap.push(Reverse((child.score, child_depth, cidx)));
                }
            }
            if self.stats.timed_out {
                break;
            }
        }

        self.stats.wall_seconds = self.started.elapsed().as_secs_f64();
        let solution = found.map(|program| {
            debug_assert!(self
                .task
                .train
                .iter()
                .all(|p| apply_program(&program, &p.input).as_ref() == Ok(&p.output)));
            let test_outputs = self
                .task
                .test
                .iter()
                .map(|t| apply_program(&program, &t.input).ok())
                .collect::<Option<Vec<Grid>>>();
            Solution {
                program,
                test_outputs,
            }
        });
        SolveResult {
            solution,
            stats: self.stats,
        }
    }
}

fn grid_palette(g: &Grid) -> u16 {
    g.cells().iter().fold(0, |m, c| m | 1 << c.value())
}

fn palette_of(g: &AbstractGraph) -> u16 {
    let mut m = 1u16 << g.background.value();
    for n in &g.nodes {
        for p in &n.pixels {
            if g.cell_index(p.row, p.col).is_some() {
                m |= 1 << p.color.value();
            }
        }
    }
    m
}

/// Searches for a program that maps every train input to its output.
pub fn solve(task: &Task, config: SearchConfig) -> SolveResult {
    Searcher::new(task, config).run()
}
