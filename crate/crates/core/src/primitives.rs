//! Transformation primitives: the base node-level set plus the extended
//! grid-level set, their parameter vocabularies and application semantics.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{bbox_of, build_with_background, AbstractGraph, ObjectNode, Pixel};
use crate::grid::{Color, Grid, Task, ENGINE_MAX_SIDE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrimitiveError {
    #[error("result {height}x{width} exceeds the engine size cap")]
    SizeCapExceeded { height: usize, width: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no_trans is not executable")]
    NotExecutable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    UpdateColor,
    MoveNode,
    MoveNodeMax,
    ExtendNode,
    RotateNode,
    AddBorder,
    FillRectangle,
    HollowRectangle,
    MirrorNode,
    FlipNode,
    InsertNode,
    RemoveNode,
    Extract,
    Duplicate,
    UpscaleGrid,
    Fill,
    Magnet,
    Beam,
    Shift,
    MirrorDuplicate,
    RotateDuplicate,
    MirrorGrid,
    RotateGrid,
    Connect,
    Recolor,
    Truncate,
    /// Label-only sentinel meaning "no further step".
    NoTrans,
}

impl PrimitiveKind {
    pub const EXECUTABLE: [PrimitiveKind; 26] = [
        PrimitiveKind::UpdateColor,
        PrimitiveKind::MoveNode,
        PrimitiveKind::MoveNodeMax,
        PrimitiveKind::ExtendNode,
        PrimitiveKind::RotateNode,
        PrimitiveKind::AddBorder,
        PrimitiveKind::FillRectangle,
        PrimitiveKind::HollowRectangle,
        PrimitiveKind::MirrorNode,
        PrimitiveKind::FlipNode,
        PrimitiveKind::InsertNode,
        PrimitiveKind::RemoveNode,
        PrimitiveKind::Extract,
        PrimitiveKind::Duplicate,
        PrimitiveKind::UpscaleGrid,
        PrimitiveKind::Fill,
        PrimitiveKind::Magnet,
        PrimitiveKind::Beam,
        PrimitiveKind::Shift,
        PrimitiveKind::MirrorDuplicate,
        PrimitiveKind::RotateDuplicate,
        PrimitiveKind::MirrorGrid,
        PrimitiveKind::RotateGrid,
        PrimitiveKind::Connect,
        PrimitiveKind::Recolor,
        PrimitiveKind::Truncate,
    ];

    /// Label vocabulary: the executable kinds followed by `no_trans`.
    pub fn vocabulary() -> impl Iterator<Item = PrimitiveKind> {
        Self::EXECUTABLE.into_iter().chain([PrimitiveKind::NoTrans])
    }

    pub fn name(self) -> &'static str {
        use PrimitiveKind::*;
        match self {
            UpdateColor => "update_color",
            MoveNode => "move_node",
            MoveNodeMax => "move_node_max",
            ExtendNode => "extend_node",
            RotateNode => "rotate_node",
            AddBorder => "add_border",
            FillRectangle => "fill_rectangle",
            HollowRectangle => "hollow_rectangle",
            MirrorNode => "mirror_node",
            FlipNode => "flip_node",
            InsertNode => "insert_node",
            RemoveNode => "remove_node",
            Extract => "extract",
            Duplicate => "duplicate",
            UpscaleGrid => "upscale_grid",
            Fill => "fill",
            Magnet => "magnet",
            Beam => "beam",
            Shift => "shift",
            MirrorDuplicate => "mirror_duplicate",
            RotateDuplicate => "rotate_duplicate",
            MirrorGrid => "mirror_grid",
            RotateGrid => "rotate_grid",
            Connect => "connect",
            Recolor => "recolor",
            Truncate => "truncate",
            NoTrans => "no_trans",
        }
    }

    pub fn is_executable(self) -> bool {
        self != PrimitiveKind::NoTrans
    }

    /// Grid-level kinds act on the whole canvas and ignore node selection.
    pub fn is_grid_level(self) -> bool {
        use PrimitiveKind::*;
        matches!(
            self,
            Duplicate
                | UpscaleGrid
                | Shift
                | MirrorDuplicate
                | RotateDuplicate
                | MirrorGrid
                | RotateGrid
                | Recolor
        )
    }

    /// Kinds whose result canvas may differ in size from their input.
    pub fn changes_size(self) -> bool {
        use PrimitiveKind::*;
        matches!(
            self,
            Extract | Duplicate | UpscaleGrid | MirrorDuplicate | RotateDuplicate | RotateGrid
        )
    }

    /// Kinds that can shrink the canvas.
    pub fn can_shrink(self) -> bool {
        matches!(self, PrimitiveKind::Extract | PrimitiveKind::RotateGrid)
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrimitiveKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PrimitiveKind::vocabulary()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown primitive {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
    UpLeft,
    UpRight,
    DownLeft,
    DownRight,
}

impl Direction {
    pub const CARDINAL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];
    pub const ALL: [Direction; 8] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
        Direction::UpLeft,
        Direction::UpRight,
        Direction::DownLeft,
        Direction::DownRight,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
            Direction::UpLeft => (-1, -1),
            Direction::UpRight => (-1, 1),
            Direction::DownLeft => (1, -1),
            Direction::DownRight => (1, 1),
        }
    }

    pub fn is_cardinal(self) -> bool {
        let (dr, dc) = self.delta();
        dr == 0 || dc == 0
    }
}

/// `Horizontal` reverses rows (reflection across a horizontal line),
/// `Vertical` reverses columns. For duplication kinds the axis names the
/// direction of growth: `Horizontal` grows the width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Horizontal,
    Vertical,
    Both,
}

/// Clockwise rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Angle {
    Deg90,
    Deg180,
    Deg270,
}

impl Angle {
    pub const ALL: [Angle; 3] = [Angle::Deg90, Angle::Deg180, Angle::Deg270];
}

impl TryFrom<u16> for Angle {
    type Error = String;

    fn try_from(v: u16) -> Result<Self, Self::Error> {
        match v {
            90 => Ok(Angle::Deg90),
            180 => Ok(Angle::Deg180),
            270 => Ok(Angle::Deg270),
            _ => Err(format!("angle must be 90, 180 or 270, got {v}")),
        }
    }
}

impl From<Angle> for u16 {
    fn from(a: Angle) -> u16 {
        match a {
            Angle::Deg90 => 90,
            Angle::Deg180 => 180,
            Angle::Deg270 => 270,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Anchor {
    pub const ALL: [Anchor; 4] = [
        Anchor::TopLeft,
        Anchor::TopRight,
        Anchor::BottomLeft,
        Anchor::BottomRight,
    ];
}

pub const MAX_FACTOR: usize = 6;

/// A primitive with its parameters. Serializes as
/// `{"kind": "...", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PrimitiveCall {
    UpdateColor { color: Color },
    MoveNode { direction: Direction },
    MoveNodeMax { direction: Direction },
    ExtendNode { direction: Direction },
    RotateNode { angle: Angle },
    AddBorder { color: Color },
    FillRectangle { color: Color },
    HollowRectangle { color: Color },
    MirrorNode { direction: Direction },
    FlipNode { axis: Axis },
    InsertNode { anchor: Anchor },
    RemoveNode {},
    Extract {},
    Duplicate { axis: Axis, count: usize },
    UpscaleGrid { factor: usize },
    Fill { color: Color },
    Magnet { direction: Direction },
    Beam { direction: Direction, color: Color },
    Shift { direction: Direction },
    MirrorDuplicate { axis: Axis },
    RotateDuplicate { angles: Vec<Angle> },
    MirrorGrid { axis: Axis },
    RotateGrid { angle: Angle },
    Connect { color: Color },
    Recolor { from: Color, to: Color },
    Truncate {},
}

impl PrimitiveCall {
    pub fn kind(&self) -> PrimitiveKind {
        use PrimitiveCall as C;
        use PrimitiveKind as K;
        match self {
            C::UpdateColor { .. } => K::UpdateColor,
            C::MoveNode { .. } => K::MoveNode,
            C::MoveNodeMax { .. } => K::MoveNodeMax,
            C::ExtendNode { .. } => K::ExtendNode,
            C::RotateNode { .. } => K::RotateNode,
            C::AddBorder { .. } => K::AddBorder,
            C::FillRectangle { .. } => K::FillRectangle,
            C::HollowRectangle { .. } => K::HollowRectangle,
            C::MirrorNode { .. } => K::MirrorNode,
            C::FlipNode { .. } => K::FlipNode,
            C::InsertNode { .. } => K::InsertNode,
            C::RemoveNode {} => K::RemoveNode,
            C::Extract {} => K::Extract,
            C::Duplicate { .. } => K::Duplicate,
            C::UpscaleGrid { .. } => K::UpscaleGrid,
            C::Fill { .. } => K::Fill,
            C::Magnet { .. } => K::Magnet,
            C::Beam { .. } => K::Beam,
            C::Shift { .. } => K::Shift,
            C::MirrorDuplicate { .. } => K::MirrorDuplicate,
            C::RotateDuplicate { .. } => K::RotateDuplicate,
            C::MirrorGrid { .. } => K::MirrorGrid,
            C::RotateGrid { .. } => K::RotateGrid,
            C::Connect { .. } => K::Connect,
            C::Recolor { .. } => K::Recolor,
            C::Truncate {} => K::Truncate,
        }
    }

    pub fn validate(&self) -> Result<(), PrimitiveError> {
        let bad = |m: &str| {
            Err(PrimitiveError::InvalidParams(format!(
                "{}: {m}",
                self.kind()
            )))
        };
        match self {
            PrimitiveCall::MoveNodeMax { direction }
            | PrimitiveCall::MirrorNode { direction }
            | PrimitiveCall::Magnet { direction }
            | PrimitiveCall::Shift { direction }
                if !direction.is_cardinal() =>
            {
                bad("direction must be cardinal")
            }
            PrimitiveCall::Duplicate { axis, count } => {
                if *axis == Axis::Both {
                    bad("axis must be horizontal or vertical")
                } else if !(2..=MAX_FACTOR).contains(count) {
                    bad("count out of range")
                } else {
                    Ok(())
                }
            }
            PrimitiveCall::MirrorDuplicate { axis: Axis::Both } => {
                bad("axis must be horizontal or vertical")
            }
            PrimitiveCall::UpscaleGrid { factor } if !(2..=MAX_FACTOR).contains(factor) => {
                bad("factor out of range")
            }
            PrimitiveCall::RotateDuplicate { angles } => {
                let distinct: BTreeSet<_> = angles.iter().collect();
                if !(angles.len() == 1 || angles.len() == 3) || distinct.len() != angles.len() {
                    bad("angles must list 1 or 3 distinct angles")
                } else {
                    Ok(())
                }
            }
            PrimitiveCall::Recolor { from, to } if from == to => bad("from equals to"),
            _ => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// canvas helpers

fn check_cap(h: usize, w: usize) -> Result<(), PrimitiveError> {
    if h > ENGINE_MAX_SIDE || w > ENGINE_MAX_SIDE {
        Err(PrimitiveError::SizeCapExceeded {
            height: h,
            width: w,
        })
    } else {
        Ok(())
    }
}

fn build_grid(
    h: usize,
    w: usize,
    f: impl Fn(usize, usize) -> Color,
) -> Result<Grid, PrimitiveError> {
    check_cap(h, w)?;
    let mut cells = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            cells.push(f(r, c));
        }
    }
    Grid::from_cells(h, w, cells).map_err(|e| PrimitiveError::InvalidParams(e.to_string()))
}

pub(crate) fn rotate_grid(g: &Grid, angle: Angle) -> Grid {
    let (h, w) = g.dims();
    let out = match angle {
        Angle::Deg90 => build_grid(w, h, |r, c| g.get(h - 1 - c, r)),
        Angle::Deg180 => build_grid(h, w, |r, c| g.get(h - 1 - r, w - 1 - c)),
        Angle::Deg270 => build_grid(w, h, |r, c| g.get(c, w - 1 - r)),
    };
    out.expect("rotation preserves size bounds")
}

pub(crate) fn mirror_grid(g: &Grid, axis: Axis) -> Grid {
    let (h, w) = g.dims();
    build_grid(h, w, |r, c| match axis {
        Axis::Horizontal => g.get(h - 1 - r, c),
        Axis::Vertical => g.get(r, w - 1 - c),
        Axis::Both => g.get(h - 1 - r, w - 1 - c),
    })
    .expect("mirroring preserves size")
}

/// Places grids of equal block height side by side (rows of blocks).
fn concat_blocks(blocks: &[Vec<&Grid>]) -> Result<Grid, PrimitiveError> {
    let heights: Vec<usize> = blocks.iter().map(|row| row[0].height()).collect();
    let width: usize = blocks[0].iter().map(|g| g.width()).sum();
    for row in blocks {
        if row.iter().any(|g| g.height() != row[0].height())
            || row.iter().map(|g| g.width()).sum::<usize>() != width
        {
            return Err(PrimitiveError::InvalidParams("blocks do not tile".into()));
        }
    }
    let height: usize = heights.iter().sum();
    check_cap(height, width)?;
    let mut cells = Vec::with_capacity(height * width);
    for row in blocks {
        for r in 0..row[0].height() {
            for g in row {
                cells.extend_from_slice(&g.cells()[r * g.width()..(r + 1) * g.width()]);
            }
        }
    }
    Grid::from_cells(height, width, cells).map_err(|e| PrimitiveError::InvalidParams(e.to_string()))
}

// ---------------------------------------------------------------------------
// application

/// Applies one primitive to a graph.
///
/// Node-level kinds rewrite only the selected nodes (an empty selection leaves
/// the graph unchanged). Grid-level kinds ignore the selection, transform the
/// reconstructed canvas and re-abstract it under the same kind and background.
pub fn apply_primitive(
    call: &PrimitiveCall,
    graph: &AbstractGraph,
    selected: &[usize],
) -> Result<AbstractGraph, PrimitiveError> {
    call.validate()?;
    let kind = call.kind();
    if kind.is_grid_level() {
        let canvas = graph.to_grid();
        let out = transform_canvas(call, &canvas, graph.background)?;
        return Ok(build_with_background(&out, graph.kind, graph.background));
    }
    if selected.is_empty() {
        return Ok(graph.clone());
    }
    let mut out = match call {
        PrimitiveCall::Extract {} => {
            return Ok(match extract_canvas(graph, selected)? {
                Some(g) => build_with_background(&g, graph.kind, graph.background),
                None => graph.clone(),
            })
        }
        PrimitiveCall::Truncate {} => {
            return Ok(build_with_background(
                &truncate_canvas(graph, selected),
                graph.kind,
                graph.background,
            ))
        }
        _ => graph.clone(),
    };
    apply_node_level(call, graph, &mut out, selected);
    out.refresh_edges();
    Ok(out)
}

/// The reconstructed grid of `apply_primitive`, without building the
/// resulting graph.
pub fn apply_primitive_grid(
    call: &PrimitiveCall,
    graph: &AbstractGraph,
    selected: &[usize],
) -> Result<Grid, PrimitiveError> {
    call.validate()?;
    if call.kind().is_grid_level() {
        return transform_canvas(call, &graph.to_grid(), graph.background);
    }
    if selected.is_empty() {
        return Ok(graph.to_grid());
    }
    match call {
        PrimitiveCall::Extract {} => {
            Ok(extract_canvas(graph, selected)?.unwrap_or_else(|| graph.to_grid()))
        }
        PrimitiveCall::Truncate {} => Ok(truncate_canvas(graph, selected)),
        _ => {
            let mut out = graph.clone();
            apply_node_level(call, graph, &mut out, selected);
            Ok(out.to_grid())
        }
    }
}

fn selected_nodes<'a>(
    graph: &'a AbstractGraph,
    selected: &'a [usize],
) -> impl Iterator<Item = &'a ObjectNode> {
    selected.iter().filter_map(|&id| graph.node(id))
}

fn truncate_canvas(graph: &AbstractGraph, selected: &[usize]) -> Grid {
    let mut canvas = graph.to_grid();
    for node in selected_nodes(graph, selected) {
        for p in &node.pixels {
            if let Some(i) = graph.cell_index(p.row, p.col) {
                canvas.set(i / graph.width, i % graph.width, graph.background);
            }
        }
    }
    canvas
}

/// Crop to the selection's bounding box; `None` when nothing selected is on
/// the canvas.
fn extract_canvas(
    graph: &AbstractGraph,
    selected: &[usize],
) -> Result<Option<Grid>, PrimitiveError> {
    let inside: Vec<&Pixel> = selected_nodes(graph, selected)
        .flat_map(|n| n.pixels.iter())
        .filter(|p| graph.cell_index(p.row, p.col).is_some())
        .collect();
    if inside.is_empty() {
        return Ok(None);
    }
    let (r0, c0, r1, c1) = bbox_of(inside.into_iter());
    let canvas = graph.to_grid();
    let (h, w) = ((r1 - r0 + 1) as usize, (c1 - c0 + 1) as usize);
    build_grid(h, w, |r, c| canvas.get(r + r0 as usize, c + c0 as usize)).map(Some)
}

fn transform_canvas(call: &PrimitiveCall, g: &Grid, bg: Color) -> Result<Grid, PrimitiveError> {
    let (h, w) = g.dims();
    match call {
        PrimitiveCall::Duplicate { axis, count } => {
            let (nh, nw) = match axis {
                Axis::Horizontal => (h, w * count),
                _ => (h * count, w),
            };
            build_grid(nh, nw, |r, c| g.get(r % h, c % w))
        }
        PrimitiveCall::UpscaleGrid { factor } => {
            build_grid(h * factor, w * factor, |r, c| g.get(r / factor, c / factor))
        }
        PrimitiveCall::Shift { direction } => {
            let (dr, dc) = direction.delta();
            build_grid(h, w, |r, c| {
                g.at(r as i32 - dr, c as i32 - dc).unwrap_or(bg)
            })
        }
        PrimitiveCall::MirrorDuplicate { axis } => {
            let m = mirror_grid(
                g,
                if *axis == Axis::Horizontal {
                    Axis::Vertical
                } else {
                    Axis::Horizontal
                },
            );
            if *axis == Axis::Horizontal {
                concat_blocks(&[vec![g, &m]])
            } else {
                concat_blocks(&[vec![g], vec![&m]])
            }
        }
        PrimitiveCall::RotateDuplicate { angles } => {
            let rots: Vec<Grid> = angles.iter().map(|&a| rotate_grid(g, a)).collect();
            match rots.as_slice() {
                [a] => concat_blocks(&[vec![g, a]]),
                [a, b, c] => concat_blocks(&[vec![g, a], vec![c, b]]),
                _ => Err(PrimitiveError::InvalidParams(
                    "rotate_duplicate angles".into(),
                )),
            }
        }
        PrimitiveCall::MirrorGrid { axis } => Ok(mirror_grid(g, *axis)),
        PrimitiveCall::RotateGrid { angle } => Ok(rotate_grid(g, *angle)),
        PrimitiveCall::Recolor { from, to } => build_grid(h, w, |r, c| {
            if g.get(r, c) == *from {
                *to
            } else {
                g.get(r, c)
            }
        }),
        _ => unreachable!("not a grid-level primitive"),
    }
}

fn in_canvas(graph: &AbstractGraph, r: i32, c: i32) -> bool {
    graph.cell_index(r, c).is_some()
}

fn apply_node_level(
    call: &PrimitiveCall,
    src: &AbstractGraph,
    out: &mut AbstractGraph,
    selected: &[usize],
) {
    let index_of = |id: usize| out.nodes.binary_search_by_key(&id, |n| n.id).ok();
    let sel_idx: Vec<usize> = selected.iter().filter_map(|&id| index_of(id)).collect();
    let bg = src.background;
    let mut occ = src.occupancy();

    match *call {
        PrimitiveCall::UpdateColor { color } => {
            for &i in &sel_idx {
                let node = &mut out.nodes[i];
                node.pixels.iter_mut().for_each(|p| p.color = color);
                node.color = color;
            }
        }
        PrimitiveCall::MoveNode { direction } => {
            let (dr, dc) = direction.delta();
            for &i in &sel_idx {
                for p in &mut out.nodes[i].pixels {
                    p.row += dr;
                    p.col += dc;
                }
            }
        }
        PrimitiveCall::MoveNodeMax { direction } => {
            let (dr, dc) = direction.delta();
            for &i in &sel_idx {
                if out.nodes[i].pixels.is_empty() {
                    continue;
                }
                let k = {
                    let occ = out.occupancy();
                    let blocked = |r: i32, c: i32| match out.cell_index(r, c) {
                        None => true,
                        Some(j) => occ[j].is_some_and(|o| o as usize != i),
                    };
                    let mut k = 0;
                    while out.nodes[i]
                        .pixels
                        .iter()
                        .all(|p| !blocked(p.row + dr * (k + 1), p.col + dc * (k + 1)))
                    {
                        k += 1;
                    }
                    k
                };
                for p in &mut out.nodes[i].pixels {
                    p.row += dr * k;
                    p.col += dc * k;
                }
            }
        }
        PrimitiveCall::ExtendNode { direction } => {
            let (dr, dc) = direction.delta();
            for &i in &sel_idx {
                let mut added = Vec::new();
                for p in &out.nodes[i].pixels {
                    let (mut r, mut c) = (p.row + dr, p.col + dc);
                    while let Some(j) = out.cell_index(r, c) {
                        if occ[j].is_some() {
                            break;
                        }
                        added.push(Pixel {
                            row: r,
                            col: c,
                            color: p.color,
                        });
                        r += dr;
                        c += dc;
                    }
                }
                for p in &added {
                    occ[out.cell_index(p.row, p.col).unwrap()] = Some(i as u32);
                }
                extend_pixels(&mut out.nodes[i], added);
            }
        }
        PrimitiveCall::RotateNode { angle } => {
            for &i in &sel_idx {
                let node = &mut out.nodes[i];
                let (r0, c0, r1, c1) = node.bbox();
                let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
                for p in &mut node.pixels {
                    let (lr, lc) = (p.row - r0, p.col - c0);
                    let (nr, nc) = match angle {
                        Angle::Deg90 => (lc, h - 1 - lr),
                        Angle::Deg180 => (h - 1 - lr, w - 1 - lc),
                        Angle::Deg270 => (w - 1 - lc, lr),
                    };
                    p.row = r0 + nr;
                    p.col = c0 + nc;
                }
                node.pixels.sort_unstable();
            }
        }
        PrimitiveCall::AddBorder { color } => {
            for &i in &sel_idx {
                let (r0, c0, r1, c1) = out.nodes[i].bbox();
                let mut added = Vec::new();
                for r in r0 - 1..=r1 + 1 {
                    for c in c0 - 1..=c1 + 1 {
                        let ring = r == r0 - 1 || r == r1 + 1 || c == c0 - 1 || c == c1 + 1;
                        if ring && in_canvas(out, r, c) {
                            added.push(Pixel {
                                row: r,
                                col: c,
                                color,
                            });
                        }
                    }
                }
                extend_pixels(&mut out.nodes[i], added);
            }
        }
        PrimitiveCall::FillRectangle { color } => {
            for &i in &sel_idx {
                let (r0, c0, r1, c1) = out.nodes[i].bbox();
                let mut added = Vec::new();
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        if let Some(j) = out.cell_index(r, c) {
                            if occ[j].is_none() {
                                added.push(Pixel {
                                    row: r,
                                    col: c,
                                    color,
                                });
                            }
                        }
                    }
                }
                extend_pixels(&mut out.nodes[i], added);
            }
        }
        PrimitiveCall::HollowRectangle { color } => {
            for &i in &sel_idx {
                let node = &mut out.nodes[i];
                let (r0, c0, r1, c1) = node.bbox();
                let interior = |p: &Pixel| p.row > r0 && p.row < r1 && p.col > c0 && p.col < c1;
                if color == bg {
                    node.pixels.retain(|p| !interior(p));
                } else {
                    node.pixels
                        .iter_mut()
                        .filter(|p| interior(p))
                        .for_each(|p| p.color = color);
                }
                node.recompute_color();
            }
        }
        PrimitiveCall::MirrorNode { direction } => {
            for &i in &sel_idx {
                let (r0, c0, r1, c1) = out.nodes[i].bbox();
                let added: Vec<Pixel> = out.nodes[i]
                    .pixels
                    .iter()
                    .map(|p| {
                        let (row, col) = match direction {
                            Direction::Right => (p.row, 2 * c1 + 1 - p.col),
                            Direction::Left => (p.row, 2 * c0 - 1 - p.col),
                            Direction::Down => (2 * r1 + 1 - p.row, p.col),
                            _ => (2 * r0 - 1 - p.row, p.col),
                        };
                        Pixel {
                            row,
                            col,
                            color: p.color,
                        }
                    })
                    .collect();
                extend_pixels(&mut out.nodes[i], added);
            }
        }
        PrimitiveCall::FlipNode { axis } => {
            for &i in &sel_idx {
                let node = &mut out.nodes[i];
                let (r0, c0, r1, c1) = node.bbox();
                for p in &mut node.pixels {
                    if axis != Axis::Vertical {
                        p.row = r0 + r1 - p.row;
                    }
                    if axis != Axis::Horizontal {
                        p.col = c0 + c1 - p.col;
                    }
                }
                node.pixels.sort_unstable();
            }
        }
        PrimitiveCall::InsertNode { anchor } => {
            let (h, w) = (out.height as i32, out.width as i32);
            for &i in &sel_idx {
                let node = out.nodes[i].clone();
                let (r0, c0, r1, c1) = node.bbox();
                let (dr, dc) = match anchor {
                    Anchor::TopLeft => (-r0, -c0),
                    Anchor::TopRight => (-r0, w - 1 - c1),
                    Anchor::BottomLeft => (h - 1 - r1, -c0),
                    Anchor::BottomRight => (h - 1 - r1, w - 1 - c1),
                };
                let id = out.next_id();
                out.nodes.push(ObjectNode {
                    id,
                    pixels: node
                        .pixels
                        .iter()
                        .map(|p| Pixel {
                            row: p.row + dr,
                            col: p.col + dc,
                            color: p.color,
                        })
                        .collect(),
                    color: node.color,
                });
            }
        }
        PrimitiveCall::RemoveNode {} => {
            let drop: BTreeSet<usize> = selected.iter().copied().collect();
            out.nodes.retain(|n| !drop.contains(&n.id));
        }
        PrimitiveCall::Fill { color } => {
            for &i in &sel_idx {
                let node = &mut out.nodes[i];
                let (r0, c0, r1, c1) = node.bbox();
                node.pixels = (r0..=r1)
                    .flat_map(|r| {
                        (c0..=c1).map(move |c| Pixel {
                            row: r,
                            col: c,
                            color,
                        })
                    })
                    .filter(|p| in_canvas(src, p.row, p.col))
                    .collect();
                if node.pixels.is_empty() {
                    node.pixels.push(Pixel {
                        row: r0,
                        col: c0,
                        color,
                    });
                }
                node.color = color;
            }
        }
        PrimitiveCall::Magnet { direction } => {
            let (dr, dc) = direction.delta();
            let moving: BTreeSet<usize> = sel_idx.iter().copied().collect();
            // static cells: everything not owned by a moving node
            let mut blocked: Vec<bool> = occ
                .iter()
                .map(|o| o.is_some_and(|i| !moving.contains(&(i as usize))))
                .collect();
            let mut order: Vec<(usize, usize)> = Vec::new();
            for &i in &sel_idx {
                for (k, p) in out.nodes[i].pixels.iter().enumerate() {
                    if in_canvas(out, p.row, p.col) {
                        order.push((i, k));
                    }
                }
            }
            // pixels closest to the target border settle first
            order.sort_by_key(|&(i, k)| {
                let p = out.nodes[i].pixels[k];
                -(p.row * dr + p.col * dc)
            });
            for (i, k) in order {
                let p = out.nodes[i].pixels[k];
                let (mut r, mut c) = (p.row, p.col);
                while let Some(j) = out.cell_index(r + dr, c + dc) {
                    if blocked[j] {
                        break;
                    }
                    r += dr;
                    c += dc;
                }
                let j = out.cell_index(r, c).unwrap();
                blocked[j] = true;
                let px = &mut out.nodes[i].pixels[k];
                px.row = r;
                px.col = c;
            }
            for &i in &sel_idx {
                out.nodes[i].pixels.sort_unstable();
                out.nodes[i].pixels.dedup_by_key(|p| (p.row, p.col));
            }
        }
        PrimitiveCall::Beam { direction, color } => {
            let (dr, dc) = direction.delta();
            let mut new_nodes = Vec::new();
            for &i in &sel_idx {
                let (r0, c0, r1, c1) = out.nodes[i].bbox();
                let starts: Vec<(i32, i32)> = match direction {
                    Direction::Up => (c0..=c1).map(|c| (r0 - 1, c)).collect(),
                    Direction::Down => (c0..=c1).map(|c| (r1 + 1, c)).collect(),
                    Direction::Left => (r0..=r1).map(|r| (r, c0 - 1)).collect(),
                    Direction::Right => (r0..=r1).map(|r| (r, c1 + 1)).collect(),
                    Direction::UpLeft => vec![(r0 - 1, c0 - 1)],
                    Direction::UpRight => vec![(r0 - 1, c1 + 1)],
                    Direction::DownLeft => vec![(r1 + 1, c0 - 1)],
                    Direction::DownRight => vec![(r1 + 1, c1 + 1)],
                };
                let mut pixels = Vec::new();
                for (mut r, mut c) in starts {
                    while let Some(j) = out.cell_index(r, c) {
                        if occ[j].is_some() {
                            break;
                        }
                        occ[j] = Some(u32::MAX);
                        pixels.push(Pixel {
                            row: r,
                            col: c,
                            color,
                        });
                        r += dr;
                        c += dc;
                    }
                }
                if !pixels.is_empty() {
                    pixels.sort_unstable();
                    new_nodes.push(pixels);
                }
            }
            push_new_nodes(out, new_nodes, color);
        }
        PrimitiveCall::Connect { color } => {
            let chosen: BTreeSet<u32> = sel_idx.iter().map(|&i| i as u32).collect();
            let (h, w) = (src.height, src.width);
            let mut line = BTreeSet::new();
            let mut scan = |cells: &mut dyn Iterator<Item = (usize, usize)>| {
                let mut last: Option<(u32, usize, usize)> = None;
                for (r, c) in cells {
                    if let Some(o) = occ[r * w + c] {
                        if let Some((m, lr, lc)) = last {
                            if m != o && chosen.contains(&m) && chosen.contains(&o) {
                                let steps = (r - lr).max(c - lc);
                                for s in 1..steps {
                                    let rr = lr + (r - lr) * s / steps;
                                    let cc = lc + (c - lc) * s / steps;
                                    line.insert((rr as i32, cc as i32));
                                }
                            }
                        }
                        last = Some((o, r, c));
                    }
                }
            };
            for r in 0..h {
                scan(&mut (0..w).map(|c| (r, c)));
            }
            for c in 0..w {
                scan(&mut (0..h).map(|r| (r, c)));
            }
            if !line.is_empty() {
                let pixels = line
                    .into_iter()
                    .map(|(row, col)| Pixel { row, col, color })
                    .collect();
                push_new_nodes(out, vec![pixels], color);
            }
        }
        _ => unreachable!("handled elsewhere"),
    }
}

fn extend_pixels(node: &mut ObjectNode, added: Vec<Pixel>) {
    if added.is_empty() {
        return;
    }
    let existing: BTreeSet<(i32, i32)> = node.pixels.iter().map(|p| (p.row, p.col)).collect();
    let mut fresh: BTreeSet<(i32, i32)> = BTreeSet::new();
    for p in added {
        if !existing.contains(&(p.row, p.col)) && fresh.insert((p.row, p.col)) {
            node.pixels.push(p);
        }
    }
    node.pixels.sort_unstable();
    node.recompute_color();
}

fn push_new_nodes(graph: &mut AbstractGraph, nodes: Vec<Vec<Pixel>>, color: Color) {
    for pixels in nodes {
        let id = graph.next_id();
        graph.nodes.push(ObjectNode { id, pixels, color });
    }
}

// ---------------------------------------------------------------------------
// enumeration

/// Task-derived evidence used to ground primitive parameters.
#[derive(Debug, Clone, Default)]
pub struct Grounding {
    /// Colors of the train outputs; `None` when outputs are unknown, in
    /// which case every color is a candidate.
    pub output_colors: Option<Vec<Color>>,
    /// `(height_ratio, width_ratio)` when every train output is an exact
    /// integer multiple of its input.
    pub size_ratio: Option<(usize, usize)>,
}

impl Grounding {
    pub fn from_task(task: &Task) -> Grounding {
        let palette = task.train.iter().fold(0u16, |m, p| m | p.output.palette());
        let output_colors = Color::all()
            .filter(|c| palette & (1 << c.value()) != 0)
            .collect();
        let ratio = |i: usize, o: usize| (o % i == 0).then_some(o / i);
        let ratios: Vec<Option<(usize, usize)>> = task
            .train
            .iter()
            .map(|p| {
                Some((
                    ratio(p.input.height(), p.output.height())?,
                    ratio(p.input.width(), p.output.width())?,
                ))
            })
            .collect();
        let size_ratio = match ratios.first() {
            Some(Some(first)) if ratios.iter().all(|r| *r == Some(*first)) => Some(*first),
            _ => None,
        };
        Grounding {
            output_colors: Some(output_colors),
            size_ratio,
        }
    }

    fn paint_colors(&self) -> Vec<Color> {
        match &self.output_colors {
            Some(c) => c.clone(),
            None => Color::all().collect(),
        }
    }
}

/// Parameter records for `kind`, grounded in the graphs' colors and the
/// task evidence. Factors matching the observed output/input size ratio come
/// first; factors that would break the size cap on any graph are omitted.
pub fn enumerate_primitive_params(
    kind: PrimitiveKind,
    graphs: &[AbstractGraph],
    grounding: &Grounding,
) -> Vec<PrimitiveCall> {
    use PrimitiveCall as C;
    let colors = grounding.paint_colors();
    let max_h = graphs.iter().map(|g| g.height).max().unwrap_or(1);
    let max_w = graphs.iter().map(|g| g.width).max().unwrap_or(1);
    let fits = |h: usize, w: usize| h <= ENGINE_MAX_SIDE && w <= ENGINE_MAX_SIDE;
    let ratio_first = |mut v: Vec<C>, preferred: Option<C>| {
        if let Some(p) = preferred {
            if let Some(pos) = v.iter().position(|c| *c == p) {
                let item = v.remove(pos);
                v.insert(0, item);
            }
        }
        v
    };

    match kind {
        PrimitiveKind::NoTrans => vec![],
        PrimitiveKind::UpdateColor => colors
            .iter()
            .map(|&color| C::UpdateColor { color })
            .collect(),
        PrimitiveKind::MoveNode => Direction::ALL
            .map(|direction| C::MoveNode { direction })
            .into(),
        PrimitiveKind::MoveNodeMax => Direction::CARDINAL
            .map(|direction| C::MoveNodeMax { direction })
            .into(),
        PrimitiveKind::ExtendNode => Direction::ALL
            .map(|direction| C::ExtendNode { direction })
            .into(),
        PrimitiveKind::RotateNode => Angle::ALL.map(|angle| C::RotateNode { angle }).into(),
        PrimitiveKind::AddBorder => colors.iter().map(|&color| C::AddBorder { color }).collect(),
        PrimitiveKind::FillRectangle => colors
            .iter()
            .map(|&color| C::FillRectangle { color })
            .collect(),
        PrimitiveKind::HollowRectangle => colors
            .iter()
            .map(|&color| C::HollowRectangle { color })
            .collect(),
        PrimitiveKind::MirrorNode => Direction::CARDINAL
            .map(|direction| C::MirrorNode { direction })
            .into(),
        PrimitiveKind::FlipNode => [Axis::Horizontal, Axis::Vertical, Axis::Both]
            .map(|axis| C::FlipNode { axis })
            .into(),
        PrimitiveKind::InsertNode => Anchor::ALL.map(|anchor| C::InsertNode { anchor }).into(),
        PrimitiveKind::RemoveNode => vec![C::RemoveNode {}],
        PrimitiveKind::Extract => vec![C::Extract {}],
        PrimitiveKind::Duplicate => {
            let mut v = Vec::new();
            for axis in [Axis::Horizontal, Axis::Vertical] {
                for count in 2..=MAX_FACTOR {
                    let ok = match axis {
                        Axis::Horizontal => fits(max_h, max_w * count),
                        _ => fits(max_h * count, max_w),
                    };
                    if ok {
                        v.push(C::Duplicate { axis, count });
                    }
                }
            }
            let preferred = match grounding.size_ratio {
                Some((1, k)) if k > 1 => Some(C::Duplicate {
                    axis: Axis::Horizontal,
                    count: k,
                }),
                Some((k, 1)) if k > 1 => Some(C::Duplicate {
                    axis: Axis::Vertical,
                    count: k,
                }),
                _ => None,
            };
            ratio_first(v, preferred)
        }
        PrimitiveKind::UpscaleGrid => {
            let v = (2..=MAX_FACTOR)
                .filter(|&f| fits(max_h * f, max_w * f))
                .map(|factor| C::UpscaleGrid { factor })
                .collect();
            let preferred = match grounding.size_ratio {
                Some((a, b)) if a == b && a > 1 => Some(C::UpscaleGrid { factor: a }),
                _ => None,
            };
            ratio_first(v, preferred)
        }
        PrimitiveKind::Fill => colors.iter().map(|&color| C::Fill { color }).collect(),
        PrimitiveKind::Magnet => Direction::CARDINAL
            .map(|direction| C::Magnet { direction })
            .into(),
        PrimitiveKind::Beam => Direction::ALL
            .iter()
            .flat_map(|&direction| {
                colors
                    .iter()
                    .map(move |&color| C::Beam { direction, color })
            })
            .collect(),
        PrimitiveKind::Shift => Direction::CARDINAL
            .map(|direction| C::Shift { direction })
            .into(),
        PrimitiveKind::MirrorDuplicate => {
            let mut v = Vec::new();
            if fits(max_h, max_w * 2) {
                v.push(C::MirrorDuplicate {
                    axis: Axis::Horizontal,
                });
            }
            if fits(max_h * 2, max_w) {
                v.push(C::MirrorDuplicate {
                    axis: Axis::Vertical,
                });
            }
            v
        }
        PrimitiveKind::RotateDuplicate => {
            let mut v = Vec::new();
            if fits(max_h.max(max_w), max_w * 2) {
                v.extend(Angle::ALL.map(|a| C::RotateDuplicate { angles: vec![a] }));
            }
            if fits(max_h * 2, max_w * 2) {
                v.push(C::RotateDuplicate {
                    angles: Angle::ALL.to_vec(),
                });
            }
            v
        }
        PrimitiveKind::MirrorGrid => [Axis::Horizontal, Axis::Vertical, Axis::Both]
            .map(|axis| C::MirrorGrid { axis })
            .into(),
        PrimitiveKind::RotateGrid => Angle::ALL.map(|angle| C::RotateGrid { angle }).into(),
        PrimitiveKind::Connect => colors.iter().map(|&color| C::Connect { color }).collect(),
        PrimitiveKind::Recolor => {
            let present: BTreeSet<Color> = graphs
                .iter()
                .flat_map(|g| {
                    g.nodes
                        .iter()
                        .flat_map(|n| n.pixels.iter().map(|p| p.color))
                })
                .collect();
            present
                .iter()
                .flat_map(|&from| {
                    colors
                        .iter()
                        .filter(move |&&to| to != from)
                        .map(move |&to| C::Recolor { from, to })
                })
                .collect()
        }
        PrimitiveKind::Truncate => vec![C::Truncate {}],
    }
}

/// Convenience wrapper grounding on a task's train outputs.
pub fn enumerate_for_task(
    kind: PrimitiveKind,
    graphs: &[AbstractGraph],
    task: &Task,
) -> Vec<PrimitiveCall> {
    enumerate_primitive_params(kind, graphs, &Grounding::from_task(task))
}

#[cfg(test)]
mod tests;
