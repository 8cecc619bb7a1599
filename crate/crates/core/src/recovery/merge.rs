//! Empty-cell merging by segmentation pixel voting.
//!
//! Grid-adjacent vacancies are linked when the foreground ratio of the strip
//! between their boxes exceeds the threshold. Linked vacancies form connected
//! groups, and each group is cut into the fewest axis-aligned grid rectangles.
//! Raising the threshold only removes links, groups only split, and a minimum
//! rectangle partition never needs more pieces for a union than for its
//! parts, so the merge count is monotone in the threshold.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::geometry::Rect;
use crate::scalar::Real;
use crate::scalar_map::ScalarMap;
use crate::table_model::Span;

use super::EmptyCell;

/// Groups larger than this are partitioned greedily instead of exactly.
const EXACT_PARTITION_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct MergedEmptyCell<T> {
    pub row: Span,
    pub col: Span,
    pub rect: Rect<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MergeStats {
    pub vacancies: usize,
    pub links: usize,
    pub merges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairVote<T> {
    pub a: (u32, u32),
    pub b: (u32, u32),
    pub ratio: T,
}

/// Foreground ratio (`seg >= 0.5`) of the gap between two neighbouring boxes.
/// Touching boxes, or a gap covering no pixel centre, vote 1.
pub fn strip_ratio<T: Real>(a: &Rect<T>, b: &Rect<T>, horizontal: bool, seg: Option<&ScalarMap<T>>) -> T {
    let (lo, hi, s1, s2) = if horizontal {
        (a.x2.min(b.x2), a.x1.max(b.x1), a.y1.max(b.y1), a.y2.min(b.y2))
    } else {
        (a.y2.min(b.y2), a.y1.max(b.y1), a.x1.max(b.x1), a.x2.min(b.x2))
    };
    if hi <= lo || s2 <= s1 {
        return T::one();
    }
    let strip = if horizontal {
        Rect { x1: lo, y1: s1, x2: hi, y2: s2 }
    } else {
        Rect { x1: s1, y1: lo, x2: s2, y2: hi }
    };
    let Some(seg) = seg else {
        return if strip.pixel_window().is_empty() { T::one() } else { T::zero() };
    };
    let window = strip.pixel_window().clip(seg.width(), seg.height());
    if window.is_empty() {
        return T::one();
    }
    let fg = window
        .pixels()
        .filter(|&(x, y)| seg.get(x as usize, y as usize) >= T::half())
        .count();
    T::from_usize(fg).unwrap() / T::from_usize(window.area()).unwrap()
}

/// Strip votes for every grid-adjacent vacancy pair, row-major, horizontal
/// pair before vertical pair for each cell.
pub fn pair_votes<T: Real>(vacancies: &[EmptyCell<T>], seg: Option<&ScalarMap<T>>) -> Vec<PairVote<T>> {
    let at: BTreeMap<(u32, u32), &EmptyCell<T>> = vacancies.iter().map(|v| ((v.row, v.col), v)).collect();
    let mut out = Vec::new();
    for (&(r, c), cell) in &at {
        if let Some(right) = at.get(&(r, c + 1)) {
            out.push(PairVote {
                a: (r, c),
                b: (r, c + 1),
                ratio: strip_ratio(&cell.rect, &right.rect, true, seg),
            });
        }
        if let Some(below) = at.get(&(r + 1, c)) {
            out.push(PairVote {
                a: (r, c),
                b: (r + 1, c),
                ratio: strip_ratio(&cell.rect, &below.rect, false, seg),
            });
        }
    }
    out
}

pub fn merge_empty_cells<T: Real>(
    vacancies: &[EmptyCell<T>],
    seg: Option<&ScalarMap<T>>,
    ratio_threshold: T,
) -> (Vec<MergedEmptyCell<T>>, MergeStats) {
    let votes = pair_votes(vacancies, seg);
    merge_with_votes(vacancies, &votes, ratio_threshold)
}

/// Merging from precomputed votes; lets callers sweep thresholds cheaply.
pub fn merge_with_votes<T: Real>(
    vacancies: &[EmptyCell<T>],
    votes: &[PairVote<T>],
    ratio_threshold: T,
) -> (Vec<MergedEmptyCell<T>>, MergeStats) {
    let index: BTreeMap<(u32, u32), usize> =
        vacancies.iter().enumerate().map(|(i, v)| ((v.row, v.col), i)).collect();
    let mut parent: Vec<usize> = (0..vacancies.len()).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut j = i;
        while parent[j] != root {
            let next = parent[j];
            parent[j] = root;
            j = next;
        }
        root
    }
    let mut links = 0;
    for vote in votes.iter().filter(|v| v.ratio > ratio_threshold) {
        links += 1;
        let (a, b) = (find(&mut parent, index[&vote.a]), find(&mut parent, index[&vote.b]));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<(u32, u32)>> = BTreeMap::new();
    for (i, v) in vacancies.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert((v.row, v.col));
    }
    let mut merged = Vec::new();
    for cells in groups.values() {
        for (row, col) in min_rect_partition(cells) {
            let rect = row
                .iter()
                .flat_map(|r| col.iter().map(move |c| (r, c)))
                .map(|key| vacancies[index[&key]].rect)
                .reduce(|acc, r| acc.union(&r))
                .expect("rectangle has at least one cell");
            merged.push(MergedEmptyCell { row, col, rect });
        }
    }
    merged.sort_by_key(|m| (m.row.start, m.col.start));
    let stats = MergeStats {
        vacancies: vacancies.len(),
        links,
        merges: vacancies.len() - merged.len(),
    };
    (merged, stats)
}

/// Fewest axis-aligned rectangles exactly covering `cells`.
pub fn min_rect_partition(cells: &BTreeSet<(u32, u32)>) -> Vec<(Span, Span)> {
    let list: Vec<(u32, u32)> = cells.iter().copied().collect();
    if list.len() > EXACT_PARTITION_LIMIT {
        return greedy_partition(cells);
    }
    let pos: HashMap<(u32, u32), usize> = list.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let full: u128 = if list.len() == 128 { u128::MAX } else { (1u128 << list.len()) - 1 };
    let mut memo = HashMap::new();
    solve(full, &list, &pos, &mut memo)
}

/// Rectangles with top-left corner `(r, c)` whose cells all satisfy
/// `inside`, largest area first, wider first on ties.
fn anchored_rects(r: u32, c: u32, inside: impl Fn(u32, u32) -> bool) -> Vec<(Span, Span)> {
    let mut out = Vec::new();
    let mut max_w = u32::MAX;
    let mut h = 0;
    while inside(r + h, c) {
        let mut w = 0;
        while w < max_w && inside(r + h, c + w) {
            w += 1;
        }
        max_w = w;
        for ww in 1..=w {
            out.push((Span { start: r, end: r + h }, Span { start: c, end: c + ww - 1 }));
        }
        h += 1;
    }
    out.sort_by_key(|(rs, cs)| (std::cmp::Reverse(rs.len() * cs.len()), std::cmp::Reverse(cs.len())));
    out
}

/// The first remaining cell in row-major order must be the top-left corner of
/// some rectangle of any partition, so branching on it is exhaustive.
fn solve(
    remaining: u128,
    list: &[(u32, u32)],
    pos: &HashMap<(u32, u32), usize>,
    memo: &mut HashMap<u128, Vec<(Span, Span)>>,
) -> Vec<(Span, Span)> {
    if remaining == 0 {
        return Vec::new();
    }
    if let Some(hit) = memo.get(&remaining) {
        return hit.clone();
    }
    let (r, c) = list[remaining.trailing_zeros() as usize];
    let inside = |rr: u32, cc: u32| pos.get(&(rr, cc)).is_some_and(|&i| remaining & (1u128 << i) != 0);
    let mut best: Option<Vec<(Span, Span)>> = None;
    for (rs, cs) in anchored_rects(r, c, inside) {
        let mut mask = 0u128;
        for rr in rs.iter() {
            for cc in cs.iter() {
                mask |= 1u128 << pos[&(rr, cc)];
            }
        }
        let rest = solve(remaining & !mask, list, pos, memo);
        if best.as_ref().map_or(true, |b| rest.len() + 1 < b.len()) {
            let mut cand = Vec::with_capacity(rest.len() + 1);
            cand.push((rs, cs));
            cand.extend(rest);
            let done = cand.len() == 1;
            best = Some(cand);
            if done {
                break;
            }
        }
    }
    let best = best.expect("the anchor cell alone is always a candidate");
    memo.insert(remaining, best.clone());
    best
}

fn greedy_partition(cells: &BTreeSet<(u32, u32)>) -> Vec<(Span, Span)> {
    let mut remaining = cells.clone();
    let mut out = Vec::new();
    while let Some(&(r, c)) = remaining.iter().next() {
        let (rs, cs) = anchored_rects(r, c, |rr, cc| remaining.contains(&(rr, cc)))[0];
        for rr in rs.iter() {
            for cc in cs.iter() {
                remaining.remove(&(rr, cc));
            }
        }
        out.push((rs, cs));
    }
    out
}
