//! Synthetic tables and simulated detector output.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`, so tables and
//! predictions are pure functions of `(config, seed)`.
//!
//! Generated tables are recoverable from their non-empty aligned boxes:
//! every row and column holds a non-empty cell spanning only that row
//! (column); the midpoint rule connects two cells exactly when their spans
//! share a row (column), with at least one pixel to spare; and the cells
//! covering consecutive rows have strictly increasing mean centres. Layouts
//! breaking any of these are resampled.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::mask_targets::{gpma_targets, pyramid_value, TargetError};
use crate::refine::{GlobalPrediction, ProposalPrediction, RefineError};
use crate::scalar::Real;
use crate::scalar_map::ScalarMap;
use crate::table_model::{derive_aligned_boxes, Axis, CellAnnotation, CellId, Span, TableAnnotation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("no recoverable table found in {0} attempts")]
    Exhausted(u32),
    #[error("cell {0} has no aligned box")]
    MissingAlignedBox(CellId),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Prediction(#[from] RefineError),
}

/// Why a layout was turned down.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Unrecoverable {
    #[error("{0} {1} has no non-empty single-span cell")]
    MissingAnchor(Axis, u32),
    #[error("cells {0} and {1} are ambiguous under the midpoint rule along {2}s")]
    MidpointRule(CellId, CellId, Axis),
    #[error("{0}s {1} and {2} are out of order by mean centre")]
    Order(Axis, u32, u32),
}

/// Detector noise applied by [`corrupt_predictions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Each box side moves by up to this fraction of the cell extent.
    pub jitter: f64,
    /// Uniform noise amplitude on pyramid maps.
    pub pyr_noise: f64,
    /// Probability of flipping each segmentation pixel.
    pub flip_rate: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            jitter: 0.0,
            pyr_noise: 0.0,
            flip_rate: 0.0,
        }
    }
}

/// Inclusive ranges throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub rows: (u32, u32),
    pub cols: (u32, u32),
    pub span_prob: f64,
    pub max_span: u32,
    pub empty_prob: f64,
    pub col_width: (u32, u32),
    pub row_height: (u32, u32),
    pub margin: u32,
    /// Minimum gap between a text box and its cell's grid lines.
    pub text_inset: u32,
    /// Fraction of the available width (height) covered by text.
    pub text_fill_w: (f64, f64),
    pub text_fill_h: (f64, f64),
    pub max_attempts: u32,
    pub noise: NoiseConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: (2, 6),
            cols: (2, 5),
            span_prob: 0.15,
            max_span: 3,
            empty_prob: 0.15,
            col_width: (30, 80),
            row_height: (16, 30),
            margin: 8,
            text_inset: 3,
            text_fill_w: (0.3, 0.95),
            text_fill_h: (0.5, 0.95),
            max_attempts: 200,
            noise: NoiseConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let range = |r: (u32, u32)| r.0 <= r.1;
        let fill = |r: (f64, f64)| r.0 > 0.0 && r.0 <= r.1 && r.1 <= 1.0;
        if !range(self.rows) || !range(self.cols) || self.rows.0 == 0 || self.cols.0 == 0 {
            return bad("rows and cols must be non-empty ranges starting at 1 or more");
        }
        if !range(self.col_width) || !range(self.row_height) {
            return bad("cell size ranges must satisfy lo <= hi");
        }
        if self.col_width.0.min(self.row_height.0) < 2 * self.text_inset + 4 {
            return bad("cells must leave at least 4 px for text inside the inset");
        }
        if !prob(self.span_prob) || !prob(self.empty_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.max_span == 0 || self.max_attempts == 0 {
            return bad("max_span and max_attempts must be positive");
        }
        if !fill(self.text_fill_w) || !fill(self.text_fill_h) {
            return bad("text fill ranges must lie in (0, 1] with lo <= hi");
        }
        let n = &self.noise;
        if !(n.jitter >= 0.0 && n.jitter < 0.5) || !(n.pyr_noise >= 0.0) || !prob(n.flip_rate) {
            return bad("noise needs 0 <= jitter < 0.5, pyr_noise >= 0 and flip_rate in [0, 1]");
        }
        Ok(())
    }
}

/// Grid rectangles covering a table exactly once, listed by top-left corner
/// in row-major order.
pub type Tiling = Vec<(Span, Span)>;

fn first_free(owned: &[bool], cols: u32) -> Option<(u32, u32)> {
    owned.iter().position(|o| !o).map(|i| (i as u32 / cols, i as u32 % cols))
}

fn rect_free(owned: &[bool], cols: u32, r: u32, c: u32, h: u32, w: u32) -> bool {
    (r..r + h).all(|y| (c..c + w).all(|x| !owned[(y * cols + x) as usize]))
}

fn mark(owned: &mut [bool], cols: u32, r: u32, c: u32, h: u32, w: u32, v: bool) {
    for y in r..r + h {
        for x in c..c + w {
            owned[(y * cols + x) as usize] = v;
        }
    }
}

/// Every tiling of a `rows x cols` grid by rectangles.
pub fn enumerate_tilings(rows: u32, cols: u32) -> Vec<Tiling> {
    fn go(owned: &mut Vec<bool>, rows: u32, cols: u32, acc: &mut Tiling, out: &mut Vec<Tiling>) {
        let Some((r, c)) = first_free(owned, cols) else {
            out.push(acc.clone());
            return;
        };
        for h in 1..=rows - r {
            for w in 1..=cols - c {
                if !rect_free(owned, cols, r, c, h, w) {
                    break;
                }
                mark(owned, cols, r, c, h, w, true);
                acc.push((Span { start: r, end: r + h - 1 }, Span { start: c, end: c + w - 1 }));
                go(owned, rows, cols, acc, out);
                acc.pop();
                mark(owned, cols, r, c, h, w, false);
            }
        }
    }
    let mut out = Vec::new();
    if rows > 0 && cols > 0 {
        go(&mut vec![false; (rows * cols) as usize], rows, cols, &mut Vec::new(), &mut out);
    }
    out
}

/// Row-major random tiling; each free position starts a spanning cell with
/// probability `span_prob`, shrunk until it fits.
pub fn random_tiling(rows: u32, cols: u32, span_prob: f64, max_span: u32, rng: &mut impl Rng) -> Tiling {
    let mut owned = vec![false; (rows * cols) as usize];
    let mut out = Vec::new();
    while let Some((r, c)) = first_free(&owned, cols) {
        let (mut h, mut w) = (1, 1);
        if rng.gen_bool(span_prob) {
            h = rng.gen_range(1..=max_span).min(rows - r);
            w = rng.gen_range(1..=max_span).min(cols - c);
        }
        while !rect_free(&owned, cols, r, c, h, w) {
            if w > 1 {
                w -= 1;
            } else {
                h -= 1;
            }
        }
        mark(&mut owned, cols, r, c, h, w, true);
        out.push((Span { start: r, end: r + h - 1 }, Span { start: c, end: c + w - 1 }));
    }
    out
}

/// Places text boxes for a tiling. `empty[i]` marks cell `i` as empty; cell
/// ids are tiling indices.
pub fn layout_tiling<T: Real>(
    tiling: &[(Span, Span)],
    empty: &[bool],
    config: &SynthConfig,
    rng: &mut impl Rng,
) -> Result<TableAnnotation<T>, Unrecoverable> {
    let rows = tiling.iter().map(|t| t.0.end + 1).max().unwrap_or(0);
    let cols = tiling.iter().map(|t| t.1.end + 1).max().unwrap_or(0);
    check_anchors(tiling, empty, rows, cols)?;

    let widths: Vec<i64> = (0..cols).map(|_| rng.gen_range(config.col_width.0..=config.col_width.1) as i64).collect();
    let heights: Vec<i64> = (0..rows).map(|_| rng.gen_range(config.row_height.0..=config.row_height.1) as i64).collect();
    let grid_lines = |sizes: &[i64]| {
        let mut at = vec![config.margin as i64];
        for s in sizes {
            at.push(at.last().unwrap() + s);
        }
        at
    };
    let (xs, ys) = (grid_lines(&widths), grid_lines(&heights));
    let inset = config.text_inset as i64;

    // single-span text first: it fixes the row and column extents
    let mut text: Vec<Option<[i64; 4]>> = vec![None; tiling.len()];
    for (i, (r, c)) in tiling.iter().enumerate() {
        if empty[i] {
            continue;
        }
        let (x1, x2) = if c.is_single() {
            place(xs[c.start as usize] + inset, xs[c.end as usize + 1] - inset, config.text_fill_w, rng)
        } else {
            (0, 0)
        };
        let (y1, y2) = if r.is_single() {
            place(ys[r.start as usize] + inset, ys[r.end as usize + 1] - inset, config.text_fill_h, rng)
        } else {
            (0, 0)
        };
        text[i] = Some([x1, y1, x2, y2]);
    }
    let extent = |axis: Axis, index: u32, text: &[Option<[i64; 4]>]| {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for (i, (r, c)) in tiling.iter().enumerate() {
            let Some(t) = text[i] else { continue };
            let (span, a, b) = match axis {
                Axis::Row => (r, t[1], t[3]),
                Axis::Col => (c, t[0], t[2]),
            };
            if span.is_single() && span.start == index {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        (lo, hi)
    };
    let snapshot = text.clone();
    for (i, (r, c)) in tiling.iter().enumerate() {
        let Some(t) = text[i].as_mut() else { continue };
        // multi-span text sits inside the aligned box spanned by the extents
        if !c.is_single() {
            let (lo, _) = extent(Axis::Col, c.start, &snapshot);
            let (_, hi) = extent(Axis::Col, c.end, &snapshot);
            (t[0], t[2]) = place(lo, hi, config.text_fill_w, rng);
        }
        if !r.is_single() {
            let (lo, _) = extent(Axis::Row, r.start, &snapshot);
            let (_, hi) = extent(Axis::Row, r.end, &snapshot);
            (t[1], t[3]) = place(lo, hi, config.text_fill_h, rng);
        }
    }
    let cells = tiling
        .iter()
        .enumerate()
        .map(|(i, (r, c))| CellAnnotation {
            id: i as CellId,
            text_rect: text[i].map(|t| Rect {
                x1: T::from_index(t[0]),
                y1: T::from_index(t[1]),
                x2: T::from_index(t[2]),
                y2: T::from_index(t[3]),
            }),
            row: *r,
            col: *c,
        })
        .collect();
    let ann = TableAnnotation {
        image_width: (xs[cols as usize] + config.margin as i64) as u32,
        image_height: (ys[rows as usize] + config.margin as i64) as u32,
        cells,
    };
    check_recoverable(&ann)?;
    Ok(ann)
}

/// A random sub-interval of `[lo, hi]` covering a `fill` fraction of it.
fn place(lo: i64, hi: i64, fill: (f64, f64), rng: &mut impl Rng) -> (i64, i64) {
    let avail = hi - lo;
    let len = ((avail as f64 * rng.gen_range(fill.0..=fill.1)).round() as i64).clamp(2.min(avail), avail);
    let start = lo + rng.gen_range(0..=avail - len);
    (start, start + len)
}

fn check_anchors(tiling: &[(Span, Span)], empty: &[bool], rows: u32, cols: u32) -> Result<(), Unrecoverable> {
    for (axis, n) in [(Axis::Row, rows), (Axis::Col, cols)] {
        for i in 0..n {
            let anchored = tiling.iter().zip(empty).any(|((r, c), &e)| {
                let s = if axis == Axis::Row { r } else { c };
                !e && s.is_single() && s.start == i
            });
            if !anchored {
                return Err(Unrecoverable::MissingAnchor(axis, i));
            }
        }
    }
    Ok(())
}

/// Checks the recoverability conditions listed in the module docs on the
/// aligned boxes of the non-empty cells.
pub fn check_recoverable<T: Real>(ann: &TableAnnotation<T>) -> Result<(), Unrecoverable> {
    let tiling: Vec<(Span, Span)> = ann.cells.iter().map(|c| (c.row, c.col)).collect();
    let empty: Vec<bool> = ann.cells.iter().map(|c| c.is_empty()).collect();
    check_anchors(&tiling, &empty, ann.n_rows(), ann.n_cols())?;
    let aligned = derive_aligned_boxes(ann).map_err(|_| Unrecoverable::MissingAnchor(Axis::Row, 0))?;
    let full: Vec<(CellId, Span, Span, [f64; 4])> = ann
        .cells
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| {
            let r = aligned[&c.id].cast::<f64>();
            (c.id, c.row, c.col, [r.x1, r.y1, r.x2, r.y2])
        })
        .collect();
    const MARGIN: f64 = 1.0;
    // Some(true) clearly connected, Some(false) clearly not, None ambiguous
    let clear = |a1: f64, a2: f64, b1: f64, b2: f64| {
        let inside = |m: f64, lo: f64, hi: f64| {
            if m >= lo + MARGIN && m <= hi - MARGIN {
                Some(true)
            } else if m < lo - MARGIN || m > hi + MARGIN {
                Some(false)
            } else {
                None
            }
        };
        match (inside((a1 + a2) / 2.0, b1, b2), inside((b1 + b2) / 2.0, a1, a2)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        }
    };
    for (i, a) in full.iter().enumerate() {
        for b in &full[i + 1..] {
            if clear(a.3[1], a.3[3], b.3[1], b.3[3]) != Some(a.1.intersects(&b.1)) {
                return Err(Unrecoverable::MidpointRule(a.0, b.0, Axis::Row));
            }
            if clear(a.3[0], a.3[2], b.3[0], b.3[2]) != Some(a.2.intersects(&b.2)) {
                return Err(Unrecoverable::MidpointRule(a.0, b.0, Axis::Col));
            }
        }
    }
    for (axis, n) in [(Axis::Row, ann.n_rows()), (Axis::Col, ann.n_cols())] {
        let mean = |i: u32| {
            let centres: Vec<f64> = full
                .iter()
                .filter(|c| if axis == Axis::Row { c.1.contains(i) } else { c.2.contains(i) })
                .map(|c| if axis == Axis::Row { (c.3[1] + c.3[3]) / 2.0 } else { (c.3[0] + c.3[2]) / 2.0 })
                .collect();
            centres.iter().sum::<f64>() / centres.len() as f64
        };
        for i in 1..n {
            if mean(i) < mean(i - 1) + MARGIN {
                return Err(Unrecoverable::Order(axis, i - 1, i));
            }
        }
    }
    Ok(())
}

/// A random recoverable table.
pub fn generate_table<T: Real>(config: &SynthConfig, seed: u64) -> Result<TableAnnotation<T>, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..config.max_attempts {
        let rows = rng.gen_range(config.rows.0..=config.rows.1);
        let cols = rng.gen_range(config.cols.0..=config.cols.1);
        let tiling = random_tiling(rows, cols, config.span_prob, config.max_span, &mut rng);
        let empty: Vec<bool> = tiling.iter().map(|_| rng.gen_bool(config.empty_prob)).collect();
        if let Ok(ann) = layout_tiling(&tiling, &empty, config, &mut rng) {
            return Ok(ann);
        }
    }
    Err(SynthError::Exhausted(config.max_attempts))
}

/// Uniform draw in `[-amp, amp)`.
fn symmetric(rng: &mut impl Rng, amp: f64) -> f64 {
    amp * (2.0 * rng.gen::<f64>() - 1.0)
}

fn noisy<T: Real>(v: T, amp: f64, rng: &mut impl Rng) -> T {
    if amp == 0.0 {
        v
    } else {
        (v + T::lit(symmetric(rng, amp))).clamp01()
    }
}

/// Simulated detector output: one proposal per non-empty cell with a
/// jittered box (grown to contain the text box, clipped to the image) and
/// the ideal local pyramid of the true aligned box; ideal global maps; all
/// maps with bounded noise and segmentation pixel flips.
pub fn corrupt_predictions<T: Real>(
    ann: &TableAnnotation<T>,
    aligned: &BTreeMap<CellId, Rect<T>>,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<(Vec<ProposalPrediction<T>>, GlobalPrediction<T>), SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (T::from_u32(ann.image_width).unwrap(), T::from_u32(ann.image_height).unwrap());
    let mut proposals = Vec::new();
    for cell in &ann.cells {
        let Some(text) = cell.text_rect else { continue };
        let truth = *aligned.get(&cell.id).ok_or(SynthError::MissingAlignedBox(cell.id))?;
        let mut side = |v: T, extent: T| {
            if noise.jitter == 0.0 {
                v
            } else {
                v + T::lit(symmetric(&mut rng, noise.jitter)) * extent
            }
        };
        let (tw, th) = (truth.width(), truth.height());
        let bbox = Rect {
            x1: side(truth.x1, tw).min(text.x1).max(T::zero()),
            y1: side(truth.y1, th).min(text.y1).max(T::zero()),
            x2: side(truth.x2, tw).max(text.x2).min(w),
            y2: side(truth.y2, th).max(text.y2).min(h),
        };
        let window = bbox.pixel_window();
        let (x_mid, y_mid) = (text.x_mid(), text.y_mid());
        let mut pyr_h = ScalarMap::zeros(window.width(), window.height());
        let mut pyr_v = ScalarMap::zeros(window.width(), window.height());
        for (px, py) in window.pixels() {
            let (x, y) = ((px - window.x0) as usize, (py - window.y0) as usize);
            let hv = pyramid_value(T::from_index(px), truth.x1, x_mid, truth.x2);
            let vv = pyramid_value(T::from_index(py), truth.y1, y_mid, truth.y2);
            pyr_h.set(x, y, noisy(hv, noise.pyr_noise, &mut rng));
            pyr_v.set(x, y, noisy(vv, noise.pyr_noise, &mut rng));
        }
        proposals.push(ProposalPrediction::new(cell.id, bbox, text, pyr_h, pyr_v)?);
    }
    let ideal = gpma_targets(ann, aligned)?;
    let (iw, ih) = (ideal.seg.width(), ideal.seg.height());
    let pyr_h = ScalarMap::from_fn(iw, ih, |x, y| noisy(ideal.pyr_h.get(x, y), noise.pyr_noise, &mut rng));
    let pyr_v = ScalarMap::from_fn(iw, ih, |x, y| noisy(ideal.pyr_v.get(x, y), noise.pyr_noise, &mut rng));
    let seg = ScalarMap::from_fn(iw, ih, |x, y| {
        let v = ideal.seg.get(x, y);
        if noise.flip_rate > 0.0 && rng.gen::<f64>() < noise.flip_rate {
            T::one() - v
        } else {
            v
        }
    });
    Ok((proposals, GlobalPrediction::new(seg, pyr_h, pyr_v)?))
}
