//! Structure-only tree-edit-distance similarity.

use super::tree_edit::{tree_edit_distance, Tree};
use super::MetricError;
use crate::scalar::Real;
use crate::table_model::{validate_grid, Span, TableAnnotation, TableGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructLabel {
    Table,
    Row,
    Cell { rowspan: u32, colspan: u32 },
}

pub type StructTree = Tree<StructLabel>;

/// HTML-style tree: one row node per grid row, each cell attached to the row
/// it starts in, ordered by starting column.
pub fn struct_tree(cells: impl Iterator<Item = (Span, Span)>) -> StructTree {
    let mut cells: Vec<(Span, Span)> = cells.collect();
    cells.sort_by_key(|(r, c)| (r.start, c.start));
    let n_rows = cells.iter().map(|(r, _)| r.end + 1).max().unwrap_or(0);
    let rows = (0..n_rows)
        .map(|i| {
            let kids = cells
                .iter()
                .filter(|(r, _)| r.start == i)
                .map(|(r, c)| Tree::leaf(StructLabel::Cell { rowspan: r.len(), colspan: c.len() }))
                .collect();
            Tree::node(StructLabel::Row, kids)
        })
        .collect();
    Tree::node(StructLabel::Table, rows)
}

/// `1 - TED / max(|a|, |b|)`.
pub fn teds_trees<L: PartialEq>(a: &Tree<L>, b: &Tree<L>) -> f64 {
    let d = tree_edit_distance(a, b) as f64;
    1.0 - d / a.size().max(b.size()) as f64
}

pub fn teds_struct<T: Real>(pred: &TableGrid<T>, gt: &TableAnnotation<T>) -> Result<f64, MetricError> {
    let violations = validate_grid(pred);
    if let Some(v) = violations.first() {
        return Err(MetricError::InvalidPrediction(v.to_string()));
    }
    gt.validate().map_err(|e| MetricError::InvalidGroundTruth(e.to_string()))?;
    let a = struct_tree(pred.cells.iter().map(|c| (c.row, c.col)));
    let b = struct_tree(gt.cells.iter().map(|c| (c.row, c.col)));
    Ok(teds_trees(&a, &b))
}
