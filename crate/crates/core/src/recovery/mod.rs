//! Table structure recovery from aligned boxes of non-empty cells: cell
//! matching, empty-cell searching through maximal cliques, and empty-cell
//! merging by segmentation voting.

pub mod cliques;
pub mod merge;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::Rect;
use crate::scalar::Real;
use crate::scalar_map::ScalarMap;
use crate::table_model::{validate_grid, Axis, CellId, Edge, GridCell, Span, TableGrid, Violation};

pub use merge::{merge_empty_cells, MergeStats, MergedEmptyCell};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("no boxes to recover a table from")]
    NoBoxes,
    #[error("duplicate box id {0}")]
    DuplicateId(CellId),
    #[error("non-contiguous-span: cell {id} lands in non-adjacent {axis}s {indices:?}")]
    NonContiguousSpan {
        id: CellId,
        axis: Axis,
        indices: Vec<u32>,
    },
    #[error("overlap: cells {ids:?} both claim ({row}, {col})")]
    Overlap { row: u32, col: u32, ids: Vec<CellId> },
    #[error("underdetermined-extent: {axis} {index} has no single-span cell to size an empty cell")]
    UnderdeterminedExtent { axis: Axis, index: u32 },
    #[error("recovered grid is inconsistent: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidGrid(Vec<Violation>),
}

/// A refined aligned box of a non-empty cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxInput<T> {
    pub id: CellId,
    pub rect: Rect<T>,
    pub text_rect: Option<Rect<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationGraph<T> {
    pub nodes: Vec<(CellId, Rect<T>)>,
    pub h_edges: BTreeSet<Edge>,
    pub v_edges: BTreeSet<Edge>,
}

impl<T: Real> RelationGraph<T> {
    fn adjacency(&self, edges: &BTreeSet<Edge>) -> Vec<BTreeSet<usize>> {
        let index: BTreeMap<CellId, usize> = self.nodes.iter().enumerate().map(|(i, n)| (n.0, i)).collect();
        let mut adj = vec![BTreeSet::new(); self.nodes.len()];
        for (a, b) in edges {
            let (i, j) = (index[a], index[b]);
            adj[i].insert(j);
            adj[j].insert(i);
        }
        adj
    }
}

/// `mid` of one interval lies inside the other, in either direction.
fn midpoint_overlap<T: Real>(a1: T, a2: T, b1: T, b2: T) -> bool {
    let (am, bm) = ((a1 + a2) / T::two(), (b1 + b2) / T::two());
    (b1 <= am && am <= b2) || (a1 <= bm && bm <= a2)
}

/// Two boxes are horizontally connected when the vertical midpoint of either
/// falls within the vertical range of the other; vertical connection is the
/// x analogue. A pair may be connected both ways.
pub fn match_cells<T: Real>(boxes: &[(CellId, Rect<T>)]) -> RelationGraph<T> {
    let mut h_edges = BTreeSet::new();
    let mut v_edges = BTreeSet::new();
    for (i, (ia, a)) in boxes.iter().enumerate() {
        for (ib, b) in &boxes[i + 1..] {
            let e = ((*ia).min(*ib), (*ia).max(*ib));
            if midpoint_overlap(a.y1, a.y2, b.y1, b.y2) {
                h_edges.insert(e);
            }
            if midpoint_overlap(a.x1, a.x2, b.x1, b.x2) {
                v_edges.insert(e);
            }
        }
    }
    RelationGraph {
        nodes: boxes.to_vec(),
        h_edges,
        v_edges,
    }
}

/// Row and column spans per node, parallel to `RelationGraph::nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexAssignment {
    pub rows: Vec<Span>,
    pub cols: Vec<Span>,
    pub n_rows: u32,
    pub n_cols: u32,
}

/// Ranks the maximal cliques of one relation graph along an axis.
fn axis_indices<T: Real>(
    graph: &RelationGraph<T>,
    axis: Axis,
) -> Result<(Vec<Span>, u32), RecoveryError> {
    let edges = match axis {
        Axis::Row => &graph.h_edges,
        Axis::Col => &graph.v_edges,
    };
    let cliques = cliques::maximal_cliques(&graph.adjacency(edges));
    let n = |c: &[usize]| T::from_usize(c.len()).unwrap();
    let mean = |c: &[usize], f: &dyn Fn(&Rect<T>) -> T| c.iter().map(|&i| f(&graph.nodes[i].1)).sum::<T>() / n(c);
    let (primary, secondary): (&dyn Fn(&Rect<T>) -> T, &dyn Fn(&Rect<T>) -> T) = match axis {
        Axis::Row => (&|r: &Rect<T>| r.y_mid(), &|r: &Rect<T>| r.x_mid()),
        Axis::Col => (&|r: &Rect<T>| r.x_mid(), &|r: &Rect<T>| r.y_mid()),
    };
    let mut keyed: Vec<(T, T, CellId, &Vec<usize>)> = cliques
        .iter()
        .map(|c| {
            let min_id = c.iter().map(|&i| graph.nodes[i].0).min().unwrap();
            (mean(c, primary), mean(c, secondary), min_id, c)
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
            .then(a.2.cmp(&b.2))
    });
    let mut indices: Vec<Vec<u32>> = vec![Vec::new(); graph.nodes.len()];
    for (rank, (_, _, _, clique)) in keyed.iter().enumerate() {
        for &i in clique.iter() {
            indices[i].push(rank as u32);
        }
    }
    let spans = indices
        .into_iter()
        .enumerate()
        .map(|(i, idx)| {
            let (lo, hi) = (idx[0], *idx.last().unwrap());
            if (hi - lo + 1) as usize != idx.len() {
                return Err(RecoveryError::NonContiguousSpan {
                    id: graph.nodes[i].0,
                    axis,
                    indices: idx,
                });
            }
            Ok(Span { start: lo, end: hi })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((spans, keyed.len() as u32))
}

/// Row index = rank of each maximal clique of the horizontal graph sorted by
/// mean y-centre (ties: mean x-centre, then smallest member id); columns
/// likewise on the vertical graph sorted by mean x-centre.
pub fn assign_indices<T: Real>(graph: &RelationGraph<T>) -> Result<IndexAssignment, RecoveryError> {
    let (rows, n_rows) = axis_indices(graph, Axis::Row)?;
    let (cols, n_cols) = axis_indices(graph, Axis::Col)?;
    Ok(IndexAssignment {
        rows,
        cols,
        n_rows,
        n_cols,
    })
}

/// A 1x1 vacancy with its box sized to the row and column extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmptyCell<T> {
    pub row: u32,
    pub col: u32,
    pub rect: Rect<T>,
}

/// Grid positions covered by no node, each boxed by the extents of the
/// single-span nodes in its row and column.
pub fn find_empty_cells<T: Real>(
    graph: &RelationGraph<T>,
    assign: &IndexAssignment,
) -> Result<Vec<EmptyCell<T>>, RecoveryError> {
    let mut owner: BTreeMap<(u32, u32), Vec<CellId>> = BTreeMap::new();
    for (i, (id, _)) in graph.nodes.iter().enumerate() {
        for r in assign.rows[i].iter() {
            for c in assign.cols[i].iter() {
                owner.entry((r, c)).or_default().push(*id);
            }
        }
    }
    if let Some((&(row, col), ids)) = owner.iter().find(|(_, ids)| ids.len() > 1) {
        return Err(RecoveryError::Overlap {
            row,
            col,
            ids: ids.clone(),
        });
    }
    let mut row_ext: BTreeMap<u32, (T, T)> = BTreeMap::new();
    let mut col_ext: BTreeMap<u32, (T, T)> = BTreeMap::new();
    for (i, (_, rect)) in graph.nodes.iter().enumerate() {
        let widen = |e: &mut (T, T), lo: T, hi: T| *e = (e.0.min(lo), e.1.max(hi));
        if assign.rows[i].is_single() {
            row_ext
                .entry(assign.rows[i].start)
                .and_modify(|e| widen(e, rect.y1, rect.y2))
                .or_insert((rect.y1, rect.y2));
        }
        if assign.cols[i].is_single() {
            col_ext
                .entry(assign.cols[i].start)
                .and_modify(|e| widen(e, rect.x1, rect.x2))
                .or_insert((rect.x1, rect.x2));
        }
    }
    let mut out = Vec::new();
    for r in 0..assign.n_rows {
        for c in 0..assign.n_cols {
            if owner.contains_key(&(r, c)) {
                continue;
            }
            let (y1, y2) = *row_ext
                .get(&r)
                .ok_or(RecoveryError::UnderdeterminedExtent { axis: Axis::Row, index: r })?;
            let (x1, x2) = *col_ext
                .get(&c)
                .ok_or(RecoveryError::UnderdeterminedExtent { axis: Axis::Col, index: c })?;
            out.push(EmptyCell {
                row: r,
                col: c,
                rect: Rect { x1, y1, x2, y2 },
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryConfig<T> {
    pub merge_ratio: T,
}

impl<T: Real> Default for RecoveryConfig<T> {
    fn default() -> Self {
        RecoveryConfig { merge_ratio: T::half() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery<T> {
    pub grid: TableGrid<T>,
    pub merge: MergeStats,
}

/// Full recovery pipeline. Empty cells receive ids after the largest box id,
/// in row-major order.
pub fn recover<T: Real>(
    boxes: &[BoxInput<T>],
    seg: Option<&ScalarMap<T>>,
    image_width: u32,
    image_height: u32,
    config: &RecoveryConfig<T>,
) -> Result<Recovery<T>, RecoveryError> {
    if boxes.is_empty() {
        return Err(RecoveryError::NoBoxes);
    }
    let mut seen = BTreeSet::new();
    for b in boxes {
        if !seen.insert(b.id) {
            return Err(RecoveryError::DuplicateId(b.id));
        }
    }
    let graph = match_cells(&boxes.iter().map(|b| (b.id, b.rect)).collect::<Vec<_>>());
    let assign = assign_indices(&graph)?;
    let vacancies = find_empty_cells(&graph, &assign)?;
    let (merged, stats) = merge_empty_cells(&vacancies, seg, config.merge_ratio);

    let mut cells: Vec<GridCell<T>> = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| GridCell {
            id: b.id,
            text_rect: b.text_rect,
            row: assign.rows[i],
            col: assign.cols[i],
            aligned_rect: b.rect,
            is_empty: false,
        })
        .collect();
    let mut next_id = boxes.iter().map(|b| b.id).max().unwrap() + 1;
    for m in merged {
        cells.push(GridCell {
            id: next_id,
            text_rect: None,
            row: m.row,
            col: m.col,
            aligned_rect: m.rect,
            is_empty: true,
        });
        next_id += 1;
    }
    let grid = TableGrid::from_cells(image_width, image_height, cells);
    let violations = validate_grid(&grid);
    if !violations.is_empty() {
        return Err(RecoveryError::InvalidGrid(violations));
    }
    Ok(Recovery { grid, merge: stats })
}
