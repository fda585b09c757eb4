//! Grids, tasks, the ARC JSON task format and the grid distance.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Largest side length accepted when parsing ARC files.
pub const ARC_MAX_SIDE: usize = 30;
/// Largest side length any grid may reach inside the engine.
pub const ENGINE_MAX_SIDE: usize = 120;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Parse(PathBuf, GridError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("malformed task json: {0}")]
    MalformedJson(String),
    #[error("ragged grid: row {row} has {found} cells, expected {expected}")]
    RaggedGrid {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("color {0} out of range 0..=9")]
    ColorOutOfRange(i64),
    #[error("task has no train pairs")]
    EmptyTrainSet,
    #[error("task has no test pairs")]
    EmptyTestSet,
    #[error("grid dimensions {height}x{width} outside 1..={max}")]
    BadDimensions {
        height: usize,
        width: usize,
        max: usize,
    },
}

/// A color code in `0..=9`. Color 0 is the default background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Color(u8);

impl Color {
    pub const BLACK: Color = Color(0);

    pub fn new(value: u8) -> Option<Color> {
        (value <= 9).then_some(Color(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Color> {
        (0..=9).map(Color)
    }
}

impl TryFrom<i64> for Color {
    type Error = GridError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        if (0..=9).contains(&v) {
            Ok(Color(v as u8))
        } else {
            Err(GridError::ColorOutOfRange(v))
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Color {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Color::try_from(v).map_err(serde::de::Error::custom)
    }
}

/// Rectangular, row-major matrix of colors.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    height: usize,
    width: usize,
    cells: Vec<Color>,
}

impl Grid {
    /// A grid filled with one color. Panics on zero or over-cap dimensions.
    pub fn filled(height: usize, width: usize, color: Color) -> Grid {
        assert!(
            (1..=ENGINE_MAX_SIDE).contains(&height) && (1..=ENGINE_MAX_SIDE).contains(&width),
            "grid dimensions {height}x{width} outside engine cap"
        );
        Grid {
            height,
            width,
            cells: vec![color; height * width],
        }
    }

    pub fn from_cells(height: usize, width: usize, cells: Vec<Color>) -> Result<Grid, GridError> {
        if !(1..=ENGINE_MAX_SIDE).contains(&height) || !(1..=ENGINE_MAX_SIDE).contains(&width) {
            return Err(GridError::BadDimensions {
                height,
                width,
                max: ENGINE_MAX_SIDE,
            });
        }
        assert_eq!(cells.len(), height * width, "cell count mismatch");
        Ok(Grid {
            height,
            width,
            cells,
        })
    }

    /// Builds a grid from nested rows. Used heavily by tests.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Grid, GridError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut cells = Vec::with_capacity(height * width);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != width {
                return Err(GridError::RaggedGrid {
                    row: i,
                    expected: width,
                    found: row.len(),
                });
            }
            for &v in row {
                cells.push(Color::try_from(v as i64)?);
            }
        }
        Grid::from_cells(height, width, cells)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> Color {
        self.cells[row * self.width + col]
    }

    /// Signed lookup; `None` outside the grid.
    pub fn at(&self, row: i32, col: i32) -> Option<Color> {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            None
        } else {
            Some(self.get(row as usize, col as usize))
        }
    }

    pub fn set(&mut self, row: usize, col: usize, color: Color) {
        self.cells[row * self.width + col] = color;
    }

    pub fn cells(&self) -> &[Color] {
        &self.cells
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Color]> {
        self.cells.chunks(self.width)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.rows()
            .map(|r| r.iter().map(|c| c.value()).collect())
            .collect()
    }

    /// Per-color cell counts indexed by color value.
    pub fn histogram(&self) -> [usize; 10] {
        let mut h = [0; 10];
        for c in &self.cells {
            h[c.value() as usize] += 1;
        }
        h
    }

    pub fn palette(&self) -> u16 {
        self.cells.iter().fold(0u16, |m, c| m | (1 << c.value()))
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid{}x{}[", self.height, self.width)?;
        for (i, row) in self.rows().enumerate() {
            if i > 0 {
                write!(f, "|")?;
            }
            for c in row {
                write!(f, "{c}")?;
            }
        }
        write!(f, "]")
    }
}

impl Serialize for Grid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        grid_from_value(&v, ENGINE_MAX_SIDE).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub input: Grid,
    pub output: Grid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestPair {
    pub input: Grid,
    /// Only used for scoring, never for search.
    pub output: Option<Grid>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub task_id: String,
    pub train: Vec<Pair>,
    pub test: Vec<TestPair>,
}

impl Task {
    pub fn new(
        task_id: impl Into<String>,
        train: Vec<Pair>,
        test: Vec<TestPair>,
    ) -> Result<Task, GridError> {
        if train.is_empty() {
            return Err(GridError::EmptyTrainSet);
        }
        if test.is_empty() {
            return Err(GridError::EmptyTestSet);
        }
        Ok(Task {
            task_id: task_id.into(),
            train,
            test,
        })
    }

    /// All input grids, train first then test.
    pub fn inputs(&self) -> Vec<Grid> {
        self.train
            .iter()
            .map(|p| p.input.clone())
            .chain(self.test.iter().map(|p| p.input.clone()))
            .collect()
    }
}

fn grid_from_value(v: &Value, max_side: usize) -> Result<Grid, GridError> {
    let rows = v
        .as_array()
        .ok_or_else(|| GridError::MalformedJson("grid is not an array".into()))?;
    let height = rows.len();
    let mut width = 0;
    let mut cells = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| GridError::MalformedJson("grid row is not an array".into()))?;
        if i == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(GridError::RaggedGrid {
                row: i,
                expected: width,
                found: row.len(),
            });
        }
        for cell in row {
            let n = cell
                .as_i64()
                .ok_or_else(|| GridError::MalformedJson("grid cell is not an integer".into()))?;
            cells.push(Color::try_from(n)?);
        }
    }
    if !(1..=max_side).contains(&height) || !(1..=max_side).contains(&width) {
        return Err(GridError::BadDimensions {
            height,
            width,
            max: max_side,
        });
    }
    Ok(Grid {
        height,
        width,
        cells,
    })
}

fn pair_list<'a>(obj: &'a Value, key: &str) -> Result<&'a Vec<Value>, GridError> {
    obj.get(key)
        .ok_or_else(|| GridError::MalformedJson(format!("missing key {key:?}")))?
        .as_array()
        .ok_or_else(|| GridError::MalformedJson(format!("{key:?} is not an array")))
}

fn grid_field(pair: &Value, key: &str) -> Result<Option<Grid>, GridError> {
    match pair.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => grid_from_value(v, ARC_MAX_SIDE).map(Some),
    }
}

/// Parses an ARC task file. The task id is left empty; callers usually set it
/// from the file stem.
pub fn parse_task(text: &[u8]) -> Result<Task, GridError> {
    let root: Value =
        serde_json::from_slice(text).map_err(|e| GridError::MalformedJson(e.to_string()))?;
    parse_task_value(&root)
}

pub(crate) fn parse_task_value(root: &Value) -> Result<Task, GridError> {
    let mut train = Vec::new();
    for p in pair_list(root, "train")? {
        let input = grid_field(p, "input")?
            .ok_or_else(|| GridError::MalformedJson("train pair without input".into()))?;
        let output = grid_field(p, "output")?
            .ok_or_else(|| GridError::MalformedJson("train pair without output".into()))?;
        train.push(Pair { input, output });
    }
    let mut test = Vec::new();
    for p in pair_list(root, "test")? {
        let input = grid_field(p, "input")?
            .ok_or_else(|| GridError::MalformedJson("test pair without input".into()))?;
        let output = grid_field(p, "output")?;
        test.push(TestPair { input, output });
    }
    Task::new("", train, test)
}

#[derive(Serialize)]
struct PairRef<'a> {
    input: &'a Grid,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<&'a Grid>,
}

#[derive(Serialize)]
struct TaskRef<'a> {
    train: Vec<PairRef<'a>>,
    test: Vec<PairRef<'a>>,
}

/// ARC layout; the task id is not part of the format.
impl Serialize for Task {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TaskRef {
            train: self
                .train
                .iter()
                .map(|p| PairRef {
                    input: &p.input,
                    output: Some(&p.output),
                })
                .collect(),
            test: self
                .test
                .iter()
                .map(|p| PairRef {
                    input: &p.input,
                    output: p.output.as_ref(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Task {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        parse_task_value(&v).map_err(serde::de::Error::custom)
    }
}

/// Reads one ARC task file; the id is the file stem.
pub fn load_task_file(path: &Path) -> Result<Task, LoadError> {
    let bytes = fs::read(path).map_err(|e| LoadError::Io(path.to_path_buf(), e))?;
    let mut task = parse_task(&bytes).map_err(|e| LoadError::Parse(path.to_path_buf(), e))?;
    task.task_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(task)
}

/// Reads every `*.json` file of a directory, sorted by file name.
pub fn load_task_dir(dir: &Path) -> Result<Vec<Task>, LoadError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| LoadError::Io(dir.to_path_buf(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_task_file(p)).collect()
}

/// Serializes a task in ARC layout with `"train"` before `"test"`.
pub fn serialize_task(task: &Task) -> Vec<u8> {
    serde_json::to_vec(task).expect("task serialization is infallible")
}

/// Top-left aligned Hamming distance plus the number of cells of either grid
/// lying outside the overlap.
pub fn grid_distance(a: &Grid, b: &Grid) -> u64 {
    let oh = a.height.min(b.height);
    let ow = a.width.min(b.width);
    let mut d = 0u64;
    for r in 0..oh {
        let ra = &a.cells[r * a.width..r * a.width + ow];
        let rb = &b.cells[r * b.width..r * b.width + ow];
        d += ra.iter().zip(rb).filter(|(x, y)| x != y).count() as u64;
    }
    let overlap = (oh * ow) as u64;
    d + (a.cells.len() as u64 - overlap) + (b.cells.len() as u64 - overlap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(rows: &[&[u8]]) -> Grid {
        Grid::from_rows(rows).unwrap()
    }

    #[test]
    fn minimal_task_parses() {
        let t =
            parse_task(br#"{"train":[{"input":[[1]],"output":[[2]]}],"test":[{"input":[[1]]}]}"#)
                .unwrap();
        assert_eq!(t.train.len(), 1);
        assert_eq!(t.test.len(), 1);
        assert!(t.test[0].output.is_none());
        assert_eq!(t.train[0].output, g(&[&[2]]));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_task(br#"{"train":[],"test":[{"input":[[1]]}]}"#),
            Err(GridError::EmptyTrainSet)
        );
        assert!(matches!(
            parse_task(
                br#"{"train":[{"input":[[1],[1,2]],"output":[[2]]}],"test":[{"input":[[1]]}]}"#
            ),
            Err(GridError::RaggedGrid { row: 1, .. })
        ));
        assert_eq!(
            parse_task(br#"{"train":[{"input":[[10]],"output":[[2]]}],"test":[{"input":[[1]]}]}"#),
            Err(GridError::ColorOutOfRange(10))
        );
        assert!(matches!(
            parse_task(b"{not json"),
            Err(GridError::MalformedJson(_))
        ));
        assert!(matches!(
            parse_task(br#"{"train":[{"input":[],"output":[[2]]}],"test":[{"input":[[1]]}]}"#),
            Err(GridError::BadDimensions { .. })
        ));
    }

    #[test]
    fn serialize_minimal_is_byte_stable() {
        let text = br#"{"train":[{"input":[[1]],"output":[[2]]}],"test":[{"input":[[1]]}]}"#;
        let t = parse_task(text).unwrap();
        let once = serialize_task(&t);
        assert_eq!(once, text.to_vec());
        assert_eq!(serialize_task(&parse_task(&once).unwrap()), once);
    }

    #[test]
    fn serialize_keeps_train_count() {
        let p = Pair {
            input: g(&[&[1]]),
            output: g(&[&[2]]),
        };
        let t = Task::new(
            "x",
            vec![p.clone(), p.clone(), p],
            vec![TestPair {
                input: g(&[&[1]]),
                output: None,
            }],
        )
        .unwrap();
        let v: Value = serde_json::from_slice(&serialize_task(&t)).unwrap();
        assert_eq!(v["train"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn distance_examples() {
        let a = g(&[&[1, 2], &[3, 4]]);
        assert_eq!(grid_distance(&a, &a), 0);
        assert_eq!(grid_distance(&g(&[&[1]]), &g(&[&[2]])), 1);
        assert_eq!(grid_distance(&a, &g(&[&[1, 2]])), 2);
        assert_eq!(grid_distance(&g(&[&[1, 2]]), &a), 2);
        // overlap is the single top-left cell; 2 + 1 cells lie outside it
        assert_eq!(grid_distance(&g(&[&[1, 2, 3]]), &g(&[&[1], &[2]])), 3);
    }

    #[test]
    fn distance_is_metric_on_three_cell_grids() {
        let all: Vec<Grid> = (0..8u8)
            .map(|bits| g(&[&[bits & 1, (bits >> 1) & 1, (bits >> 2) & 1]]))
            .collect();
        for a in &all {
            for b in &all {
                let dab = grid_distance(a, b);
                assert_eq!(dab, grid_distance(b, a));
                assert_eq!(dab == 0, a == b);
                for c in &all {
                    assert!(grid_distance(a, c) <= dab + grid_distance(b, c));
                }
            }
        }
    }
}
