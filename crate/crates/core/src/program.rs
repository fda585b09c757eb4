//! Whole programs: one abstraction plus up to three (filter, primitive) steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{build_abstraction, AbstractGraph, AbstractionKind};
use crate::filters::{apply_filter, FilterExpr};
use crate::grid::Grid;
use crate::primitives::{apply_primitive, PrimitiveCall, PrimitiveError, PrimitiveKind};

pub const MAX_STEPS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProgramError {
    #[error("program must have 1..={MAX_STEPS} steps, has {0}")]
    BadLength(usize),
    #[error("grid-level primitive {0} must use the match-all filter")]
    GridLevelFilter(PrimitiveKind),
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub filter: FilterExpr,
    pub primitive: PrimitiveCall,
}

impl Step {
    pub fn new(filter: FilterExpr, primitive: PrimitiveCall) -> Step {
        Step { filter, primitive }
    }

    /// Grid-level primitive on the whole canvas.
    pub fn grid(primitive: PrimitiveCall) -> Step {
        Step {
            filter: FilterExpr::All,
            primitive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub abstraction: AbstractionKind,
    pub steps: Vec<Step>,
}

impl Program {
    pub fn validate(&self) -> Result<(), ProgramError> {
        if !(1..=MAX_STEPS).contains(&self.steps.len()) {
            return Err(ProgramError::BadLength(self.steps.len()));
        }
        for s in &self.steps {
            let kind = s.primitive.kind();
            if kind.is_grid_level() && s.filter != FilterExpr::All {
                return Err(ProgramError::GridLevelFilter(kind));
            }
            s.primitive.validate()?;
        }
        Ok(())
    }

    pub fn kinds(&self) -> Vec<PrimitiveKind> {
        self.steps.iter().map(|s| s.primitive.kind()).collect()
    }
}

/// Filter, then transform.
pub fn apply_step(step: &Step, graph: &AbstractGraph) -> Result<AbstractGraph, PrimitiveError> {
    if step.primitive.kind().is_grid_level() {
        apply_primitive(&step.primitive, graph, &[])
    } else {
        let selected = apply_filter(&step.filter, graph);
        apply_primitive(&step.primitive, graph, &selected)
    }
}

/// Abstracts the input once, folds the steps over the evolving graph and
/// reconstructs at the final canvas size.
pub fn apply_program(program: &Program, input: &Grid) -> Result<Grid, ProgramError> {
    program.validate()?;
    let mut graph = build_abstraction(input, program.abstraction);
    for step in &program.steps {
        graph = apply_step(step, &graph)?;
    }
    Ok(graph.to_grid())
}
