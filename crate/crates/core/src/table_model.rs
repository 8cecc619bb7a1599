//! Geometric and logical table types, aligned-box derivation, grid relations
//! and grid validity checking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::scalar::Real;

pub type CellId = u64;

/// Inclusive grid index range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 2]", into = "[u32; 2]")]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: u32, end: u32) -> Result<Self, ModelError> {
        if start > end {
            return Err(ModelError::BadSpan { start, end });
        }
        Ok(Span { start, end })
    }

    pub fn single(i: u32) -> Self {
        Span { start: i, end: i }
    }

    pub fn len(&self) -> u32 {
        self.end - self.start + 1
    }

    pub fn is_single(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, i: u32) -> bool {
        self.start <= i && i <= self.end
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> {
        self.start..=self.end
    }
}

impl TryFrom<[u32; 2]> for Span {
    type Error = ModelError;

    fn try_from(v: [u32; 2]) -> Result<Self, Self::Error> {
        Span::new(v[0], v[1])
    }
}

impl From<Span> for [u32; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Row,
    Col,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Row => f.write_str("row"),
            Axis::Col => f.write_str("column"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("span start {start} exceeds end {end}")]
    BadSpan { start: u32, end: u32 },
    #[error("underdetermined-extent: {axis} {index} has no single-span non-empty cell")]
    UnderdeterminedExtent { axis: Axis, index: u32 },
    #[error("invalid table: {0}")]
    Invalid(String),
}

/// One annotated cell. `text_rect` is absent exactly for empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct CellAnnotation<T> {
    pub id: CellId,
    pub text_rect: Option<Rect<T>>,
    pub row: Span,
    pub col: Span,
}

impl<T: Real> CellAnnotation<T> {
    pub fn is_empty(&self) -> bool {
        self.text_rect.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct TableAnnotation<T> {
    pub image_width: u32,
    pub image_height: u32,
    pub cells: Vec<CellAnnotation<T>>,
}

impl<T: Real> TableAnnotation<T> {
    pub fn n_rows(&self) -> u32 {
        self.cells.iter().map(|c| c.row.end + 1).max().unwrap_or(0)
    }

    pub fn n_cols(&self) -> u32 {
        self.cells.iter().map(|c| c.col.end + 1).max().unwrap_or(0)
    }

    /// Checks id uniqueness and the tiling invariant.
    pub fn validate(&self) -> Result<(), ModelError> {
        let violations = check_tiling(self.cells.iter().map(|c| (c.id, c.row, c.col)));
        match violations.first() {
            None => Ok(()),
            Some(v) => Err(ModelError::Invalid(v.to_string())),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes")
    }
}

pub type Edge = (CellId, CellId);

fn edge(a: CellId, b: CellId) -> Edge {
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct GridCell<T> {
    pub id: CellId,
    pub text_rect: Option<Rect<T>>,
    pub row: Span,
    pub col: Span,
    pub aligned_rect: Rect<T>,
    pub is_empty: bool,
}

/// Recovered logical structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct TableGrid<T> {
    pub image_width: u32,
    pub image_height: u32,
    pub cells: Vec<GridCell<T>>,
    pub h_edges: BTreeSet<Edge>,
    pub v_edges: BTreeSet<Edge>,
}

impl<T: Real> TableGrid<T> {
    /// Builds a grid whose edges follow direct grid adjacency of the cells.
    pub fn from_cells(image_width: u32, image_height: u32, mut cells: Vec<GridCell<T>>) -> Self {
        cells.sort_by_key(|c| (c.row.start, c.col.start, c.id));
        let (h_edges, v_edges) = grid_relations(cells.iter().map(|c| (c.id, c.row, c.col)));
        TableGrid {
            image_width,
            image_height,
            cells,
            h_edges,
            v_edges,
        }
    }

    pub fn n_rows(&self) -> u32 {
        self.cells.iter().map(|c| c.row.end + 1).max().unwrap_or(0)
    }

    pub fn n_cols(&self) -> u32 {
        self.cells.iter().map(|c| c.col.end + 1).max().unwrap_or(0)
    }

    /// Structural equality with an annotation: same multiset of
    /// `(row span, col span, is_empty)` footprints.
    pub fn same_structure(&self, ann: &TableAnnotation<T>) -> bool {
        let mine: Vec<_> = sorted(self.cells.iter().map(|c| (c.row, c.col, c.is_empty)));
        let theirs: Vec<_> = sorted(ann.cells.iter().map(|c| (c.row, c.col, c.is_empty())));
        mine == theirs
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid serializes")
    }

    /// Structure-only HTML rendering; every `<td>` is empty.
    pub fn to_html(&self) -> String {
        let mut out = String::from("<table>\n");
        for r in 0..self.n_rows() {
            out.push_str("  <tr>");
            let mut row: Vec<&GridCell<T>> = self.cells.iter().filter(|c| c.row.start == r).collect();
            row.sort_by_key(|c| c.col.start);
            for c in row {
                out.push_str("<td");
                if c.row.len() > 1 {
                    out.push_str(&format!(" rowspan=\"{}\"", c.row.len()));
                }
                if c.col.len() > 1 {
                    out.push_str(&format!(" colspan=\"{}\"", c.col.len()));
                }
                if c.is_empty {
                    out.push_str(" class=\"empty\"");
                }
                out.push_str("></td>");
            }
            out.push_str("</tr>\n");
        }
        out.push_str("</table>\n");
        out
    }
}

fn sorted<I: Iterator<Item = X>, X: Ord>(it: I) -> Vec<X> {
    let mut v: Vec<X> = it.collect();
    v.sort();
    v
}

/// Aligned boxes: text boxes expanded to the full extents of the rows and
/// columns they occupy.
///
/// Row and column extents come only from non-empty cells that span exactly
/// one row (column); cells spanning several take the union of those extents.
pub fn derive_aligned_boxes<T: Real>(
    ann: &TableAnnotation<T>,
) -> Result<BTreeMap<CellId, Rect<T>>, ModelError> {
    let rows = axis_extents(ann, Axis::Row);
    let cols = axis_extents(ann, Axis::Col);
    let extent = |ext: &BTreeMap<u32, (T, T)>, axis: Axis, i: u32| {
        ext.get(&i)
            .copied()
            .ok_or(ModelError::UnderdeterminedExtent { axis, index: i })
    };
    // report the first underdetermined row/column in index order
    for r in 0..ann.n_rows() {
        extent(&rows, Axis::Row, r)?;
    }
    for c in 0..ann.n_cols() {
        extent(&cols, Axis::Col, c)?;
    }
    let mut out = BTreeMap::new();
    for cell in &ann.cells {
        let (y1, _) = extent(&rows, Axis::Row, cell.row.start)?;
        let (_, y2) = extent(&rows, Axis::Row, cell.row.end)?;
        let (x1, _) = extent(&cols, Axis::Col, cell.col.start)?;
        let (_, x2) = extent(&cols, Axis::Col, cell.col.end)?;
        let rect = Rect::new(x1, y1, x2, y2).map_err(|e| {
            ModelError::Invalid(format!("cell {} has no valid aligned box: {e}", cell.id))
        })?;
        out.insert(cell.id, rect);
    }
    Ok(out)
}

fn axis_extents<T: Real>(ann: &TableAnnotation<T>, axis: Axis) -> BTreeMap<u32, (T, T)> {
    let mut ext: BTreeMap<u32, (T, T)> = BTreeMap::new();
    for cell in &ann.cells {
        let Some(text) = cell.text_rect else { continue };
        let (span, lo, hi) = match axis {
            Axis::Row => (cell.row, text.y1, text.y2),
            Axis::Col => (cell.col, text.x1, text.x2),
        };
        if !span.is_single() {
            continue;
        }
        ext.entry(span.start)
            .and_modify(|e| *e = (e.0.min(lo), e.1.max(hi)))
            .or_insert((lo, hi));
    }
    ext
}

/// Horizontal and vertical adjacency implied by grid spans: two cells are
/// horizontal neighbours iff their row ranges intersect and their column
/// ranges are consecutive (vertical analogous).
pub fn grid_relations(
    cells: impl Iterator<Item = (CellId, Span, Span)>,
) -> (BTreeSet<Edge>, BTreeSet<Edge>) {
    let cells: Vec<_> = cells.collect();
    let mut h = BTreeSet::new();
    let mut v = BTreeSet::new();
    for (i, a) in cells.iter().enumerate() {
        for b in &cells[i + 1..] {
            let consecutive = |p: Span, q: Span| p.end + 1 == q.start || q.end + 1 == p.start;
            if a.1.intersects(&b.1) && consecutive(a.2, b.2) {
                h.insert(edge(a.0, b.0));
            }
            if a.2.intersects(&b.2) && consecutive(a.1, b.1) {
                v.insert(edge(a.0, b.0));
            }
        }
    }
    (h, v)
}

pub fn relations_from_annotation<T: Real>(
    ann: &TableAnnotation<T>,
) -> (BTreeSet<Edge>, BTreeSet<Edge>) {
    grid_relations(ann.cells.iter().map(|c| (c.id, c.row, c.col)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Violation {
    DuplicateId { id: CellId },
    Overlap { row: u32, col: u32, ids: Vec<CellId> },
    Hole { row: u32, col: u32 },
    SelfEdge { id: CellId },
    DanglingEdge { a: CellId, b: CellId },
    FlagMismatch { id: CellId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { id } => write!(f, "duplicate-id: cell {id}"),
            Violation::Overlap { row, col, ids } => {
                write!(f, "overlap: ({row}, {col}) claimed by cells {ids:?}")
            }
            Violation::Hole { row, col } => write!(f, "hole: ({row}, {col}) is not covered"),
            Violation::SelfEdge { id } => write!(f, "self-edge: cell {id}"),
            Violation::DanglingEdge { a, b } => {
                write!(f, "dangling-edge: ({a}, {b}) references an unknown cell")
            }
            Violation::FlagMismatch { id } => {
                write!(f, "flag-mismatch: cell {id} empty flag disagrees with its text box")
            }
        }
    }
}

fn check_tiling(cells: impl Iterator<Item = (CellId, Span, Span)>) -> Vec<Violation> {
    let cells: Vec<_> = cells.collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (id, _, _) in &cells {
        if !seen.insert(*id) {
            out.push(Violation::DuplicateId { id: *id });
        }
    }
    let rows = cells.iter().map(|c| c.1.end + 1).max().unwrap_or(0);
    let cols = cells.iter().map(|c| c.2.end + 1).max().unwrap_or(0);
    let mut occupancy: BTreeMap<(u32, u32), Vec<CellId>> = BTreeMap::new();
    for (id, row, col) in &cells {
        for r in row.iter() {
            for c in col.iter() {
                occupancy.entry((r, c)).or_default().push(*id);
            }
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            match occupancy.get(&(r, c)) {
                None => out.push(Violation::Hole { row: r, col: c }),
                Some(ids) if ids.len() > 1 => out.push(Violation::Overlap {
                    row: r,
                    col: c,
                    ids: ids.clone(),
                }),
                Some(_) => {}
            }
        }
    }
    out
}

/// Lists every broken tiling or edge invariant; empty iff the grid is valid.
pub fn validate_grid<T: Real>(grid: &TableGrid<T>) -> Vec<Violation> {
    let mut out = check_tiling(grid.cells.iter().map(|c| (c.id, c.row, c.col)));
    // non-empty cells may lack a text box (plain box-list input); empty cells never carry one
    for c in &grid.cells {
        if c.is_empty && c.text_rect.is_some() {
            out.push(Violation::FlagMismatch { id: c.id });
        }
    }
    let ids: BTreeSet<CellId> = grid.cells.iter().map(|c| c.id).collect();
    for &(a, b) in grid.h_edges.iter().chain(grid.v_edges.iter()) {
        if a == b {
            out.push(Violation::SelfEdge { id: a });
        } else if !ids.contains(&a) || !ids.contains(&b) {
            out.push(Violation::DanglingEdge { a, b });
        }
    }
    out
}
