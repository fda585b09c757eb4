//! Node filters: predicates selecting the nodes a transformation step acts on.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::AbstractGraph;
use crate::grid::Color;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("filter nesting too deep")]
    TooDeep,
    #[error("malformed filter: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    ByColor,
    BySize,
    ByDegree,
    ByNeighborColor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColorSel {
    Exact(Color),
    Special(ColorSpecial),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorSpecial {
    MostCommon,
    LeastCommon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeSel {
    Exact(usize),
    Special(SizeSpecial),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeSpecial {
    Max,
    Min,
    Odd,
}

/// A base filter with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum FilterLeaf {
    ByColor { color: ColorSel },
    BySize { size: SizeSel },
    ByDegree { degree: usize },
    ByNeighborColor { color: Color },
}

impl FilterLeaf {
    pub fn kind(&self) -> FilterKind {
        match self {
            FilterLeaf::ByColor { .. } => FilterKind::ByColor,
            FilterLeaf::BySize { .. } => FilterKind::BySize,
            FilterLeaf::ByDegree { .. } => FilterKind::ByDegree,
            FilterLeaf::ByNeighborColor { .. } => FilterKind::ByNeighborColor,
        }
    }
}

/// Composites hold leaves only, so nesting depth never exceeds 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FilterExpr {
    /// Selects every node.
    All,
    Leaf(FilterLeaf),
    Not(FilterLeaf),
    And(FilterLeaf, FilterLeaf),
    Or(FilterLeaf, FilterLeaf),
}

/// Sorted ids of the selected nodes.
pub type Selection = Vec<usize>;

struct Resolved {
    most_common: Option<Color>,
    least_common: Option<Color>,
    max_size: usize,
    min_size: usize,
}

fn resolve(graph: &AbstractGraph) -> Resolved {
    let mut hist = [0usize; 10];
    for n in &graph.nodes {
        hist[n.color.value() as usize] += 1;
    }
    let present = || (0..10).filter(|&c| hist[c] > 0);
    // ties resolve to the smallest color code
    let most_common = present()
        .fold(None, |best: Option<usize>, c| match best {
            Some(b) if hist[b] >= hist[c] => Some(b),
            _ => Some(c),
        })
        .map(|c| Color::new(c as u8).unwrap());
    let least_common = present()
        .fold(None, |best: Option<usize>, c| match best {
            Some(b) if hist[b] <= hist[c] => Some(b),
            _ => Some(c),
        })
        .map(|c| Color::new(c as u8).unwrap());
    Resolved {
        most_common,
        least_common,
        max_size: graph.nodes.iter().map(|n| n.size()).max().unwrap_or(0),
        min_size: graph.nodes.iter().map(|n| n.size()).min().unwrap_or(0),
    }
}

fn leaf_selects(leaf: &FilterLeaf, graph: &AbstractGraph, res: &Resolved, idx: usize) -> bool {
    let node = &graph.nodes[idx];
    match *leaf {
        FilterLeaf::ByColor { color } => match color {
            ColorSel::Exact(c) => node.color == c,
            ColorSel::Special(ColorSpecial::MostCommon) => Some(node.color) == res.most_common,
            ColorSel::Special(ColorSpecial::LeastCommon) => Some(node.color) == res.least_common,
        },
        FilterLeaf::BySize { size } => match size {
            SizeSel::Exact(s) => node.size() == s,
            SizeSel::Special(SizeSpecial::Max) => node.size() == res.max_size,
            SizeSel::Special(SizeSpecial::Min) => node.size() == res.min_size,
            SizeSel::Special(SizeSpecial::Odd) => node.size() % 2 == 1,
        },
        FilterLeaf::ByDegree { degree } => graph.degree(node.id) == degree,
        FilterLeaf::ByNeighborColor { color } => graph
            .neighbors(node.id)
            .any(|m| graph.node(m).is_some_and(|n| n.color == color)),
    }
}

/// Ids of the nodes selected by `expr`. Composites follow set semantics and
/// NOT complements within the graph's node set.
pub fn apply_filter(expr: &FilterExpr, graph: &AbstractGraph) -> Selection {
    let res = resolve(graph);
    (0..graph.nodes.len())
        .filter(|&i| match expr {
            FilterExpr::All => true,
            FilterExpr::Leaf(a) => leaf_selects(a, graph, &res, i),
            FilterExpr::Not(a) => !leaf_selects(a, graph, &res, i),
            FilterExpr::And(a, b) => {
                leaf_selects(a, graph, &res, i) && leaf_selects(b, graph, &res, i)
            }
            FilterExpr::Or(a, b) => {
                leaf_selects(a, graph, &res, i) || leaf_selects(b, graph, &res, i)
            }
        })
        .map(|i| graph.nodes[i].id)
        .collect()
}

fn grounded_leaves(graphs: &[AbstractGraph]) -> Vec<FilterLeaf> {
    let mut colors = BTreeSet::new();
    let mut sizes = BTreeSet::new();
    let mut degrees = BTreeSet::new();
    let mut neighbor_colors = BTreeSet::new();
    for g in graphs {
        for n in &g.nodes {
            colors.insert(n.color);
            sizes.insert(n.size());
            degrees.insert(g.degree(n.id));
        }
        for &(a, b) in g.edges.keys() {
            for id in [a, b] {
                if let Some(n) = g.node(id) {
                    neighbor_colors.insert(n.color);
                }
            }
        }
    }
    let mut leaves = Vec::new();
    leaves.extend(colors.iter().map(|&c| FilterLeaf::ByColor {
        color: ColorSel::Exact(c),
    }));
    leaves.extend(
        [ColorSpecial::MostCommon, ColorSpecial::LeastCommon].map(|s| FilterLeaf::ByColor {
            color: ColorSel::Special(s),
        }),
    );
    leaves.extend(sizes.iter().map(|&s| FilterLeaf::BySize {
        size: SizeSel::Exact(s),
    }));
    leaves.extend(
        [SizeSpecial::Max, SizeSpecial::Min, SizeSpecial::Odd].map(|s| FilterLeaf::BySize {
            size: SizeSel::Special(s),
        }),
    );
    leaves.extend(degrees.iter().map(|&d| FilterLeaf::ByDegree { degree: d }));
    leaves.extend(
        neighbor_colors
            .iter()
            .map(|&c| FilterLeaf::ByNeighborColor { color: c }),
    );
    leaves
}

/// Candidate filters for a set of graphs built under one abstraction.
///
/// Leaves are grounded in the colors, sizes and degrees observed across the
/// graphs. Composites are NOT of a leaf, AND of leaves from different
/// families and OR of two color leaves. Any filter selecting the same node
/// sets as an earlier one (on every graph) is dropped, as is any filter that
/// selects nothing anywhere. The match-all filter always comes first.
pub fn enumerate_filters(graphs: &[AbstractGraph]) -> Vec<FilterExpr> {
    enumerate_filters_with_selections(graphs)
        .into_iter()
        .map(|(f, _)| f)
        .collect()
}

/// Per-node degree and neighbor colors, gathered in one pass over the edges.
struct NodeFacts {
    degree: Vec<usize>,
    neighbor_colors: Vec<u16>,
}

fn node_facts(graph: &AbstractGraph) -> NodeFacts {
    let n = graph.nodes.len();
    let mut facts = NodeFacts {
        degree: vec![0; n],
        neighbor_colors: vec![0; n],
    };
    let index = |id: usize| graph.nodes.binary_search_by_key(&id, |n| n.id).ok();
    for &(a, b) in graph.edges.keys() {
        if let (Some(i), Some(j)) = (index(a), index(b)) {
            facts.degree[i] += 1;
            facts.degree[j] += 1;
            facts.neighbor_colors[i] |= 1 << graph.nodes[j].color.value();
            facts.neighbor_colors[j] |= 1 << graph.nodes[i].color.value();
        }
    }
    facts
}

/// `masks[leaf][node]` for one graph; agrees with `leaf_selects`.
fn leaf_masks(graph: &AbstractGraph, leaves: &[FilterLeaf]) -> Vec<Vec<bool>> {
    let res = resolve(graph);
    let facts = node_facts(graph);
    leaves
        .iter()
        .map(|leaf| {
            (0..graph.nodes.len())
                .map(|i| match *leaf {
                    FilterLeaf::ByDegree { degree } => facts.degree[i] == degree,
                    FilterLeaf::ByNeighborColor { color } => {
                        facts.neighbor_colors[i] & 1 << color.value() != 0
                    }
                    _ => leaf_selects(leaf, graph, &res, i),
                })
                .collect()
        })
        .collect()
}

/// Like [`enumerate_filters`], also returning each filter's selection on
/// every graph.
pub fn enumerate_filters_with_selections(
    graphs: &[AbstractGraph],
) -> Vec<(FilterExpr, Vec<Selection>)> {
    let leaves = grounded_leaves(graphs);
    let masks: Vec<Vec<Vec<bool>>> = graphs.iter().map(|g| leaf_masks(g, &leaves)).collect();
    let mut out: Vec<(FilterExpr, Vec<Selection>)> = Vec::new();
    let mut seen: HashSet<Vec<Selection>> = HashSet::new();

    let all: Vec<Selection> = graphs
        .iter()
        .map(|g| apply_filter(&FilterExpr::All, g))
        .collect();
    seen.insert(all.clone());
    out.push((FilterExpr::All, all));

    let mut push = |expr: FilterExpr, test: &dyn Fn(&[Vec<bool>], usize) -> bool| {
        let sels: Vec<Selection> = graphs
            .iter()
            .zip(&masks)
            .map(|(g, m)| {
                (0..g.nodes.len())
                    .filter(|&i| test(m, i))
                    .map(|i| g.nodes[i].id)
                    .collect()
            })
            .collect();
        if sels.iter().all(|s| s.is_empty()) {
            return;
        }
        if seen.insert(sels.clone()) {
            out.push((expr, sels));
        }
    };

    for (a, &l) in leaves.iter().enumerate() {
        push(FilterExpr::Leaf(l), &|m, i| m[a][i]);
    }
    for (a, &l) in leaves.iter().enumerate() {
        push(FilterExpr::Not(l), &|m, i| !m[a][i]);
    }
    for (a, &la) in leaves.iter().enumerate() {
        for (b, &lb) in leaves.iter().enumerate().skip(a + 1) {
            if la.kind() != lb.kind() {
                push(FilterExpr::And(la, lb), &|m, i| m[a][i] && m[b][i]);
            }
        }
    }
    for (a, &la) in leaves.iter().enumerate() {
        for (b, &lb) in leaves.iter().enumerate().skip(a + 1) {
            if la.kind() == FilterKind::ByColor && lb.kind() == FilterKind::ByColor {
                push(FilterExpr::Or(la, lb), &|m, i| m[a][i] || m[b][i]);
            }
        }
    }
    out
}

// Wire format: {"kind": "all"} | {"kind": .., "params": ..} |
// {"op": "not"|"and"|"or", "children": [..]}
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FilterRepr {
    Composite {
        op: CompositeOp,
        children: Vec<FilterRepr>,
    },
    Leaf(FilterLeaf),
    All {
        kind: AllTag,
    },
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum CompositeOp {
    Not,
    And,
    Or,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AllTag {
    All,
}

impl From<&FilterExpr> for FilterRepr {
    fn from(e: &FilterExpr) -> Self {
        let comp = |op, children: Vec<FilterLeaf>| FilterRepr::Composite {
            op,
            children: children.into_iter().map(FilterRepr::Leaf).collect(),
        };
        match *e {
            FilterExpr::All => FilterRepr::All { kind: AllTag::All },
            FilterExpr::Leaf(l) => FilterRepr::Leaf(l),
            FilterExpr::Not(a) => comp(CompositeOp::Not, vec![a]),
            FilterExpr::And(a, b) => comp(CompositeOp::And, vec![a, b]),
            FilterExpr::Or(a, b) => comp(CompositeOp::Or, vec![a, b]),
        }
    }
}

impl TryFrom<FilterRepr> for FilterExpr {
    type Error = FilterError;

    fn try_from(r: FilterRepr) -> Result<Self, Self::Error> {
        match r {
            FilterRepr::All { .. } => Ok(FilterExpr::All),
            FilterRepr::Leaf(l) => Ok(FilterExpr::Leaf(l)),
            FilterRepr::Composite { op, children } => {
                let leaves = children
                    .into_iter()
                    .map(|c| match c {
                        FilterRepr::Leaf(l) => Ok(l),
                        _ => Err(FilterError::TooDeep),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                match (op, leaves.as_slice()) {
                    (CompositeOp::Not, [a]) => Ok(FilterExpr::Not(*a)),
                    (CompositeOp::And, [a, b]) => Ok(FilterExpr::And(*a, *b)),
                    (CompositeOp::Or, [a, b]) => Ok(FilterExpr::Or(*a, *b)),
                    _ => Err(FilterError::Malformed("wrong child count".into())),
                }
            }
        }
    }
}

impl Serialize for FilterExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FilterRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FilterExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        FilterRepr::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}
