//! Graph abstractions of pixel grids.
//!
//! Every abstraction groups non-background pixels into object nodes and links
//! nodes by proximity. Reconstruction paints nodes back onto a canvas filled
//! with the graph's background color.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::{Color, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstractionKind {
    /// Same-color 4-connected components.
    SameColor4,
    /// Same-color 8-connected components.
    SameColor8,
    /// 4-connected components of any non-background colors.
    MultiColor4,
    /// Maximal vertical runs of one color.
    VerticalRuns,
    /// Maximal horizontal runs of one color.
    HorizontalRuns,
    /// One node per non-background pixel.
    SinglePixel,
    /// One multi-color node holding every non-background pixel.
    WholeImage,
}

impl AbstractionKind {
    pub const ALL: [AbstractionKind; 7] = [
        AbstractionKind::SameColor4,
        AbstractionKind::SameColor8,
        AbstractionKind::MultiColor4,
        AbstractionKind::VerticalRuns,
        AbstractionKind::HorizontalRuns,
        AbstractionKind::SinglePixel,
        AbstractionKind::WholeImage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AbstractionKind::SameColor4 => "same_color_4",
            AbstractionKind::SameColor8 => "same_color_8",
            AbstractionKind::MultiColor4 => "multi_color_4",
            AbstractionKind::VerticalRuns => "vertical_runs",
            AbstractionKind::HorizontalRuns => "horizontal_runs",
            AbstractionKind::SinglePixel => "single_pixel",
            AbstractionKind::WholeImage => "whole_image",
        }
    }

    /// Every kind in the catalog reconstructs its source grid exactly.
    pub fn is_lossless(self) -> bool {
        true
    }

    fn is_multicolor(self) -> bool {
        matches!(
            self,
            AbstractionKind::MultiColor4 | AbstractionKind::WholeImage
        )
    }
}

impl fmt::Display for AbstractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AbstractionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AbstractionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown abstraction {s:?}"))
    }
}

/// The search iterates abstractions in this order.
pub fn list_abstractions() -> Vec<AbstractionKind> {
    AbstractionKind::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub row: i32,
    pub col: i32,
    pub color: Color,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectNode {
    pub id: usize,
    pub pixels: Vec<Pixel>,
    /// Dominant color (the only color for same-color schemes).
    pub color: Color,
}

impl ObjectNode {
    pub fn size(&self) -> usize {
        self.pixels.len()
    }

    /// `(min_row, min_col, max_row, max_col)`, inclusive.
    pub fn bbox(&self) -> (i32, i32, i32, i32) {
        bbox_of(self.pixels.iter())
    }

    pub(crate) fn recompute_color(&mut self) {
        self.color = dominant_color(self.pixels.iter().map(|p| p.color));
    }
}

pub(crate) fn bbox_of<'a>(pixels: impl Iterator<Item = &'a Pixel>) -> (i32, i32, i32, i32) {
    pixels.fold(
        (i32::MAX, i32::MAX, i32::MIN, i32::MIN),
        |(r0, c0, r1, c1), p| (r0.min(p.row), c0.min(p.col), r1.max(p.row), c1.max(p.col)),
    )
}

/// Most frequent color, ties to the smallest code.
pub(crate) fn dominant_color(colors: impl Iterator<Item = Color>) -> Color {
    let mut hist = [0usize; 10];
    for c in colors {
        hist[c.value() as usize] += 1;
    }
    let mut best = 0;
    for (i, &n) in hist.iter().enumerate() {
        if n > hist[best] {
            best = i;
        }
    }
    Color::new(best as u8).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRelation {
    /// Pixels touch along a row or column.
    Adjacent,
    /// Same row or column with only background in between.
    Aligned,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AbstractGraph {
    pub kind: AbstractionKind,
    /// Current canvas height; changes under size-changing primitives.
    pub height: usize,
    pub width: usize,
    /// Sorted by ascending id.
    pub nodes: Vec<ObjectNode>,
    /// Keys are `(lo_id, hi_id)`.
    pub edges: BTreeMap<(usize, usize), EdgeRelation>,
    pub background: Color,
}

impl AbstractGraph {
    pub fn node(&self, id: usize) -> Option<&ObjectNode> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn node_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn next_id(&self) -> usize {
        self.nodes.last().map_or(0, |n| n.id + 1)
    }

    pub fn degree(&self, id: usize) -> usize {
        self.edges
            .keys()
            .filter(|&&(a, b)| a == id || b == id)
            .count()
    }

    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.keys().filter_map(move |&(a, b)| {
            if a == id {
                Some(b)
            } else if b == id {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn to_grid(&self) -> Grid {
        reconstruct_grid(self, self.height, self.width)
    }

    /// Cell → index into `nodes` of the topmost node covering it.
    pub(crate) fn occupancy(&self) -> Vec<Option<u32>> {
        let mut occ = vec![None; self.height * self.width];
        for (idx, node) in self.nodes.iter().enumerate() {
            for p in &node.pixels {
                if let Some(i) = self.cell_index(p.row, p.col) {
                    occ[i] = Some(idx as u32);
                }
            }
        }
        occ
    }

    pub(crate) fn cell_index(&self, row: i32, col: i32) -> Option<usize> {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            None
        } else {
            Some(row as usize * self.width + col as usize)
        }
    }

    /// Recomputes proximity edges from current node positions.
    pub fn refresh_edges(&mut self) {
        self.edges = compute_edges(self);
    }
}

/// 0 when present in the grid, otherwise the most frequent color.
pub fn detect_background(grid: &Grid) -> Color {
    let hist = grid.histogram();
    if hist[0] > 0 {
        return Color::BLACK;
    }
    dominant_color(grid.cells().iter().copied())
}

const N4: [(i32, i32); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const N8: [(i32, i32); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

pub fn build_abstraction(grid: &Grid, kind: AbstractionKind) -> AbstractGraph {
    let background = detect_background(grid);
    build_with_background(grid, kind, background)
}

pub(crate) fn build_with_background(
    grid: &Grid,
    kind: AbstractionKind,
    background: Color,
) -> AbstractGraph {
    let (h, w) = grid.dims();
    let mut seen = vec![false; h * w];
    let mut nodes = Vec::new();
    let pixel = |r: usize, c: usize| Pixel {
        row: r as i32,
        col: c as i32,
        color: grid.get(r, c),
    };

    for r in 0..h {
        for c in 0..w {
            let color = grid.get(r, c);
            if seen[r * w + c] || color == background {
                continue;
            }
            let mut pixels = Vec::new();
            match kind {
                AbstractionKind::SameColor4
                | AbstractionKind::SameColor8
                | AbstractionKind::MultiColor4 => {
                    let offsets: &[(i32, i32)] = if kind == AbstractionKind::SameColor8 {
                        &N8
                    } else {
                        &N4
                    };
                    let same = |other: Color| {
                        if kind == AbstractionKind::MultiColor4 {
                            other != background
                        } else {
                            other == color
                        }
                    };
                    let mut stack = vec![(r, c)];
                    seen[r * w + c] = true;
                    while let Some((pr, pc)) = stack.pop() {
                        pixels.push(pixel(pr, pc));
                        for &(dr, dc) in offsets {
                            let (nr, nc) = (pr as i32 + dr, pc as i32 + dc);
                            if nr < 0 || nc < 0 || nr as usize >= h || nc as usize >= w {
                                continue;
                            }
                            let (nr, nc) = (nr as usize, nc as usize);
                            if !seen[nr * w + nc] && same(grid.get(nr, nc)) {
                                seen[nr * w + nc] = true;
                                stack.push((nr, nc));
                            }
                        }
                    }
                }
                AbstractionKind::VerticalRuns => {
                    let mut rr = r;
                    while rr < h && grid.get(rr, c) == color {
                        seen[rr * w + c] = true;
                        pixels.push(pixel(rr, c));
                        rr += 1;
                    }
                }
                AbstractionKind::HorizontalRuns => {
                    let mut cc = c;
                    while cc < w && grid.get(r, cc) == color {
                        seen[r * w + cc] = true;
                        pixels.push(pixel(r, cc));
                        cc += 1;
                    }
                }
                AbstractionKind::SinglePixel => {
                    seen[r * w + c] = true;
                    pixels.push(pixel(r, c));
                }
                AbstractionKind::WholeImage => {
                    for rr in 0..h {
                        for cc in 0..w {
                            if grid.get(rr, cc) != background {
                                seen[rr * w + cc] = true;
                                pixels.push(pixel(rr, cc));
                            }
                        }
                    }
                }
            }
            pixels.sort_unstable();
            let node_color = if kind.is_multicolor() {
                dominant_color(pixels.iter().map(|p| p.color))
            } else {
                color
            };
            nodes.push(ObjectNode {
                id: nodes.len(),
                pixels,
                color: node_color,
            });
        }
    }

    let mut graph = AbstractGraph {
        kind,
        height: h,
        width: w,
        nodes,
        edges: BTreeMap::new(),
        background,
    };
    graph.refresh_edges();
    graph
}

fn compute_edges(graph: &AbstractGraph) -> BTreeMap<(usize, usize), EdgeRelation> {
    let mut edges = BTreeMap::new();
    if graph.kind == AbstractionKind::WholeImage || graph.nodes.len() < 2 {
        return edges;
    }
    let aligned_allowed = graph.kind != AbstractionKind::SinglePixel;
    let occ = graph.occupancy();
    let (h, w) = (graph.height, graph.width);
    let mut link = |a: u32, b: u32, gap: usize| {
        if a == b {
            return;
        }
        let rel = if gap == 0 {
            EdgeRelation::Adjacent
        } else if aligned_allowed {
            EdgeRelation::Aligned
        } else {
            return;
        };
        let (ia, ib) = (graph.nodes[a as usize].id, graph.nodes[b as usize].id);
        let key = (ia.min(ib), ia.max(ib));
        edges
            .entry(key)
            .and_modify(|r: &mut EdgeRelation| *r = (*r).min(rel))
            .or_insert(rel);
    };
    for r in 0..h {
        let mut last: Option<(u32, usize)> = None;
        for c in 0..w {
            if let Some(n) = occ[r * w + c] {
                if let Some((m, lc)) = last {
                    link(m, n, c - lc - 1);
                }
                last = Some((n, c));
            }
        }
    }
    for c in 0..w {
        let mut last: Option<(u32, usize)> = None;
        for r in 0..h {
            if let Some(n) = occ[r * w + c] {
                if let Some((m, lr)) = last {
                    link(m, n, r - lr - 1);
                }
                last = Some((n, r));
            }
        }
    }
    edges
}

/// Paints nodes in ascending id order onto a background canvas; pixels
/// outside the target extent are dropped.
pub fn reconstruct_grid(graph: &AbstractGraph, target_height: usize, target_width: usize) -> Grid {
    let mut grid = Grid::filled(target_height, target_width, graph.background);
    for node in &graph.nodes {
        for p in &node.pixels {
            if p.row >= 0
                && p.col >= 0
                && (p.row as usize) < target_height
                && (p.col as usize) < target_width
            {
                grid.set(p.row as usize, p.col as usize, p.color);
            }
        }
    }
    grid
}
