//! Adjacency-relation precision and recall between non-empty cells.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;
use crate::scalar::Real;
use crate::table_model::{grid_relations, CellId, Edge, TableAnnotation, TableGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Horizontal,
    Vertical,
}

/// Canonical `(a, b, direction)` with `a < b`.
pub type RelationRecord = (CellId, CellId, Direction);

/// Boxes of the non-empty cells of one table and their direct grid
/// neighbour relations.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationSet<T> {
    pub boxes: BTreeMap<CellId, Rect<T>>,
    pub relations: BTreeSet<RelationRecord>,
}

fn records(h: BTreeSet<Edge>, v: BTreeSet<Edge>) -> BTreeSet<RelationRecord> {
    h.into_iter()
        .map(|(a, b)| (a, b, Direction::Horizontal))
        .chain(v.into_iter().map(|(a, b)| (a, b, Direction::Vertical)))
        .collect()
}

impl<T: Real> RelationSet<T> {
    /// Predicted cells match by text box when known, else by aligned box.
    pub fn from_grid(grid: &TableGrid<T>) -> Self {
        let full: Vec<_> = grid.cells.iter().filter(|c| !c.is_empty).collect();
        let (h, v) = grid_relations(full.iter().map(|c| (c.id, c.row, c.col)));
        RelationSet {
            boxes: full.iter().map(|c| (c.id, c.text_rect.unwrap_or(c.aligned_rect))).collect(),
            relations: records(h, v),
        }
    }

    pub fn from_annotation(ann: &TableAnnotation<T>) -> Self {
        let full: Vec<_> = ann.cells.iter().filter(|c| !c.is_empty()).collect();
        let (h, v) = grid_relations(full.iter().map(|c| (c.id, c.row, c.col)));
        RelationSet {
            boxes: full.iter().filter_map(|c| c.text_rect.map(|r| (c.id, r))).collect(),
            relations: records(h, v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RelationCounts {
    pub correct: usize,
    pub predicted: usize,
    pub ground_truth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RelationCounts {
    pub fn add(self, other: RelationCounts) -> RelationCounts {
        RelationCounts {
            correct: self.correct + other.correct,
            predicted: self.predicted + other.predicted,
            ground_truth: self.ground_truth + other.ground_truth,
        }
    }

    /// Both relation sets empty scores 1; otherwise an empty side scores 0.
    pub fn score(&self) -> RelationScore {
        if self.predicted == 0 && self.ground_truth == 0 {
            return RelationScore { precision: 1.0, recall: 1.0, f1: 1.0 };
        }
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(self.correct, self.predicted);
        let recall = ratio(self.correct, self.ground_truth);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RelationScore { precision, recall, f1 }
    }
}

/// Greedy one-to-one matching by descending IoU, keeping pairs at or above
/// the threshold. Returns predicted id -> ground-truth id.
pub fn match_boxes<T: Real>(
    pred: &BTreeMap<CellId, Rect<T>>,
    gt: &BTreeMap<CellId, Rect<T>>,
    iou_threshold: T,
) -> BTreeMap<CellId, CellId> {
    let mut pairs = Vec::new();
    for (&p, pr) in pred {
        for (&g, gr) in gt {
            let iou = pr.iou(gr);
            if iou >= iou_threshold {
                pairs.push((iou, p, g));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut used = BTreeSet::new();
    let mut out = BTreeMap::new();
    for (_, p, g) in pairs {
        if !out.contains_key(&p) && !used.contains(&g) {
            used.insert(g);
            out.insert(p, g);
        }
    }
    out
}

pub fn relation_counts_sets<T: Real>(pred: &RelationSet<T>, gt: &RelationSet<T>, iou_threshold: T) -> RelationCounts {
    let m = match_boxes(&pred.boxes, &gt.boxes, iou_threshold);
    let correct = pred
        .relations
        .iter()
        .filter(|(a, b, dir)| match (m.get(a), m.get(b)) {
            (Some(&x), Some(&y)) => gt.relations.contains(&(x.min(y), x.max(y), *dir)),
            _ => false,
        })
        .count();
    RelationCounts {
        correct,
        predicted: pred.relations.len(),
        ground_truth: gt.relations.len(),
    }
}

pub fn relation_counts<T: Real>(pred: &TableGrid<T>, gt: &TableAnnotation<T>, iou_threshold: T) -> RelationCounts {
    relation_counts_sets(&RelationSet::from_grid(pred), &RelationSet::from_annotation(gt), iou_threshold)
}

pub fn relation_score<T: Real>(pred: &TableGrid<T>, gt: &TableAnnotation<T>, iou_threshold: T) -> RelationScore {
    relation_counts(pred, gt, iou_threshold).score()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64, y: f64) -> Rect<f64> {
        Rect::new(x, y, x + 10.0, y + 10.0).unwrap()
    }

    /// 2x2 table: four relations.
    fn square() -> RelationSet<f64> {
        RelationSet {
            boxes: BTreeMap::from([(0, r(0.0, 0.0)), (1, r(20.0, 0.0)), (2, r(0.0, 20.0)), (3, r(20.0, 20.0))]),
            relations: BTreeSet::from([
                (0, 1, Direction::Horizontal),
                (2, 3, Direction::Horizontal),
                (0, 2, Direction::Vertical),
                (1, 3, Direction::Vertical),
            ]),
        }
    }

    #[test]
    fn identical_sets() {
        let s = relation_counts_sets(&square(), &square(), 0.5).score();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn one_relation_missing() {
        let mut pred = square();
        pred.relations.remove(&(1, 3, Direction::Vertical));
        let s = relation_counts_sets(&pred, &square(), 0.5).score();
        assert_eq!((s.precision, s.recall), (1.0, 0.75));
    }

    #[test]
    fn unmatched_box_loses_its_relations() {
        let mut pred = square();
        pred.boxes.insert(3, r(26.0, 26.0)); // IoU 16/184
        let c = relation_counts_sets(&pred, &square(), 0.5);
        assert_eq!((c.correct, c.predicted), (2, 4));
    }

    #[test]
    fn ids_need_not_agree() {
        let mut pred = square();
        pred.boxes = pred.boxes.into_iter().map(|(k, v)| (k + 10, v)).collect();
        pred.relations = pred.relations.into_iter().map(|(a, b, d)| (a + 10, b + 10, d)).collect();
        assert_eq!(relation_counts_sets(&pred, &square(), 0.5).correct, 4);
    }

    #[test]
    fn empty_conventions() {
        let none = RelationCounts::default().score();
        assert_eq!(none.f1, 1.0);
        let miss = RelationCounts { correct: 0, predicted: 0, ground_truth: 3 }.score();
        assert_eq!((miss.precision, miss.recall, miss.f1), (0.0, 0.0, 0.0));
    }
}
