//! Neuro-symbolic ARC solving engine.
//!
//! A grid is abstracted into a graph of objects, filters pick objects and
//! transformation primitives rewrite them. Programs of up to three steps are
//! found by greedy best-first search, optionally restricted to the primitive
//! kinds a proposal model suggests. Synthetic training tasks are produced by
//! running random programs on real inputs.

pub mod abstraction;
pub mod cli;
pub mod filters;
pub mod grid;
pub mod primitives;
pub mod program;
pub mod proposals;
pub mod search;
pub mod taskgen;

pub use abstraction::{
    build_abstraction, list_abstractions, reconstruct_grid, AbstractGraph, AbstractionKind,
};
pub use filters::{apply_filter, enumerate_filters, FilterExpr};
pub use grid::{
    grid_distance, parse_task, serialize_task, Color, Grid, GridError, Pair, Task, TestPair,
};
pub use primitives::{
    apply_primitive, enumerate_primitive_params, PrimitiveCall, PrimitiveError, PrimitiveKind,
};
pub use program::{apply_program, Program, ProgramError, Step};
pub use search::{solve, SearchConfig, SearchStats, Solution, SolveResult};
