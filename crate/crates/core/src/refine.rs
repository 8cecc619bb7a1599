//! Aligned-box refinement: local/global pyramid re-scoring followed by
//! per-side plane fitting.
//!
//! Pixel coordinates entering the blend weights and the plane fits are the
//! integer pixel indices, matching how the pyramid targets are sampled.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::ComponentLabels;
use crate::geometry::{PixelWindow, Rect};
use crate::plane::fit_plane;
use crate::scalar::Real;
use crate::scalar_map::ScalarMap;
use crate::table_model::{Axis, CellId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("no-global-match: no foreground component intersects the box")]
    NoGlobalMatch,
    #[error("degenerate-midpoint: text midline lies on the box {0} boundary")]
    DegenerateMidpoint(Axis),
    #[error("local map is {got:?} but the box covers {expected:?} pixels")]
    LocalMapShape {
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("global maps disagree in size")]
    GlobalMapShape,
    #[error("overlap region is empty")]
    EmptyOverlap,
    #[error("iterations must be at least 1")]
    ZeroIterations,
}

/// One detected aligned box with its local pyramid maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalPrediction<T> {
    pub id: CellId,
    pub bbox: Rect<T>,
    /// Bounding box of the predicted text mask.
    pub text_rect: Rect<T>,
    /// Maps over `bbox.pixel_window()`.
    pub pyr_h_local: ScalarMap<T>,
    pub pyr_v_local: ScalarMap<T>,
}

impl<T: Real> ProposalPrediction<T> {
    pub fn new(
        id: CellId,
        bbox: Rect<T>,
        text_rect: Rect<T>,
        pyr_h_local: ScalarMap<T>,
        pyr_v_local: ScalarMap<T>,
    ) -> Result<Self, RefineError> {
        let w = bbox.pixel_window();
        let expected = (w.width(), w.height());
        for m in [&pyr_h_local, &pyr_v_local] {
            if (m.width(), m.height()) != expected {
                return Err(RefineError::LocalMapShape {
                    got: (m.width(), m.height()),
                    expected,
                });
            }
        }
        Ok(ProposalPrediction {
            id,
            bbox,
            text_rect,
            pyr_h_local,
            pyr_v_local,
        })
    }

    /// True when the text box sticks out of the predicted box; the midline is
    /// then clamped into the box.
    pub fn text_clamped(&self) -> bool {
        !self.bbox.contains_rect(&self.text_rect)
    }

    /// Text midline clamped into the box.
    pub fn midline(&self) -> (T, T) {
        let b = &self.bbox;
        (
            self.text_rect.x_mid().max(b.x1).min(b.x2),
            self.text_rect.y_mid().max(b.y1).min(b.y2),
        )
    }

    fn local_at(&self, px: i64, py: i64) -> Option<(T, T)> {
        let w = self.bbox.pixel_window();
        let (x, y) = (px - w.x0, py - w.y0);
        Some((self.pyr_h_local.at(x, y)?, self.pyr_v_local.at(x, y)?))
    }
}

/// Whole-image predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPrediction<T> {
    pub seg: ScalarMap<T>,
    pub pyr_h_global: ScalarMap<T>,
    pub pyr_v_global: ScalarMap<T>,
}

impl<T: Real> GlobalPrediction<T> {
    pub fn new(seg: ScalarMap<T>, pyr_h_global: ScalarMap<T>, pyr_v_global: ScalarMap<T>) -> Result<Self, RefineError> {
        let dims = |m: &ScalarMap<T>| (m.width(), m.height());
        if dims(&seg) != dims(&pyr_h_global) || dims(&seg) != dims(&pyr_v_global) {
            return Err(RefineError::GlobalMapShape);
        }
        Ok(GlobalPrediction {
            seg,
            pyr_h_global,
            pyr_v_global,
        })
    }

    pub fn width(&self) -> usize {
        self.seg.width()
    }

    pub fn height(&self) -> usize {
        self.seg.height()
    }
}

/// Global predictions with their segmentation components labelled once per image.
#[derive(Debug, Clone)]
pub struct GlobalContext<'a, T> {
    pub prediction: &'a GlobalPrediction<T>,
    pub labels: ComponentLabels,
}

impl<'a, T: Real> GlobalContext<'a, T> {
    pub fn new(prediction: &'a GlobalPrediction<T>, seg_threshold: T) -> Self {
        GlobalContext {
            prediction,
            labels: ComponentLabels::from_map(&prediction.seg, seg_threshold),
        }
    }
}

/// Matched segmentation component `P` and its overlap `P_o` with the box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalRegion {
    pub label: u32,
    /// Component pixels inside the box, row-major.
    pub overlap: Vec<(i64, i64)>,
}

/// Binarizes `seg` at `threshold` and returns the component with the largest
/// intersection with `bbox`.
pub fn match_global_region<T: Real>(
    bbox: &Rect<T>,
    seg: &ScalarMap<T>,
    threshold: T,
) -> Result<GlobalRegion, RefineError> {
    match_labeled_region(bbox, &ComponentLabels::from_map(seg, threshold))
}

/// Ties on intersection area go to the lowest label.
pub fn match_labeled_region<T: Real>(
    bbox: &Rect<T>,
    labels: &ComponentLabels,
) -> Result<GlobalRegion, RefineError> {
    let window = bbox.pixel_window().clip(labels.width(), labels.height());
    let mut counts: std::collections::BTreeMap<u32, usize> = Default::default();
    for (px, py) in window.pixels() {
        let l = labels.label(px, py);
        if l != 0 {
            *counts.entry(l).or_default() += 1;
        }
    }
    let (&label, _) = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .ok_or(RefineError::NoGlobalMatch)?;
    let overlap = window
        .pixels()
        .filter(|&(px, py)| labels.label(px, py) == label)
        .collect();
    Ok(GlobalRegion { label, overlap })
}

/// Blended pyramid values over the bounding window of the overlap region.
#[derive(Debug, Clone, PartialEq)]
pub struct RescoredMask<T> {
    pub window: PixelWindow,
    pub pyr_h: ScalarMap<T>,
    pub pyr_v: ScalarMap<T>,
    /// Row-major membership of each window pixel in the overlap region.
    pub support: Vec<bool>,
}

impl<T: Real> RescoredMask<T> {
    /// `(px, py, horizontal, vertical)` for every overlap pixel, row-major.
    pub fn points(&self) -> impl Iterator<Item = (i64, i64, T, T)> + '_ {
        let w = self.window.width();
        self.window.pixels().enumerate().filter_map(move |(i, (px, py))| {
            self.support[i].then(|| {
                let (x, y) = (i % w, i / w);
                (px, py, self.pyr_h.get(x, y), self.pyr_v.get(x, y))
            })
        })
    }
}

/// Weight of the local prediction at `pos`: 0 on the box edges, 1 on the midline.
fn local_weight<T: Real>(pos: T, lo: T, mid: T, hi: T) -> T {
    let w = if pos <= mid {
        (pos - lo) / (mid - lo)
    } else {
        (hi - pos) / (hi - mid)
    };
    w.clamp01()
}

fn check_midline<T: Real>(bbox: &Rect<T>, x_mid: T, y_mid: T) -> Result<(), RefineError> {
    if !(bbox.x1 < x_mid && x_mid < bbox.x2) {
        return Err(RefineError::DegenerateMidpoint(Axis::Col));
    }
    if !(bbox.y1 < y_mid && y_mid < bbox.y2) {
        return Err(RefineError::DegenerateMidpoint(Axis::Row));
    }
    Ok(())
}

/// Re-scores the local pyramid maps of `pred` against the global maps on the
/// overlap region: `F = G + w (L - G)` with the local weight `w` ramping from
/// 0 at the box edge to 1 at the text midline. Results are clamped to `[0, 1]`.
pub fn rescore<T: Real>(
    pred: &ProposalPrediction<T>,
    global: &GlobalPrediction<T>,
    overlap: &[(i64, i64)],
) -> Result<RescoredMask<T>, RefineError> {
    let (x_mid, y_mid) = pred.midline();
    rescore_in(pred, &pred.bbox, x_mid, y_mid, Some(global), overlap)
}

fn rescore_in<T: Real>(
    pred: &ProposalPrediction<T>,
    bbox: &Rect<T>,
    x_mid: T,
    y_mid: T,
    global: Option<&GlobalPrediction<T>>,
    overlap: &[(i64, i64)],
) -> Result<RescoredMask<T>, RefineError> {
    check_midline(bbox, x_mid, y_mid)?;
    let (first, rest) = overlap.split_first().ok_or(RefineError::EmptyOverlap)?;
    let mut window = PixelWindow {
        x0: first.0,
        y0: first.1,
        x1: first.0 + 1,
        y1: first.1 + 1,
    };
    for &(px, py) in rest {
        window.x0 = window.x0.min(px);
        window.y0 = window.y0.min(py);
        window.x1 = window.x1.max(px + 1);
        window.y1 = window.y1.max(py + 1);
    }
    let (w, h) = (window.width(), window.height());
    let mut pyr_h = ScalarMap::zeros(w, h);
    let mut pyr_v = ScalarMap::zeros(w, h);
    let mut support = vec![false; w * h];
    for &(px, py) in overlap {
        let local = pred.local_at(px, py);
        let global_vals = global.and_then(|g| {
            Some((g.pyr_h_global.at(px, py)?, g.pyr_v_global.at(px, py)?))
        });
        let (fh, fv) = match (local, global_vals) {
            (Some((lh, lv)), Some((gh, gv))) => {
                let wx = local_weight(T::from_index(px), bbox.x1, x_mid, bbox.x2);
                let wy = local_weight(T::from_index(py), bbox.y1, y_mid, bbox.y2);
                (gh + wx * (lh - gh), gv + wy * (lv - gv))
            }
            (Some(l), None) => l,
            (None, Some(g)) => g,
            (None, None) => continue,
        };
        let (x, y) = ((px - window.x0) as usize, (py - window.y0) as usize);
        pyr_h.set(x, y, fh.clamp01());
        pyr_v.set(x, y, fv.clamp01());
        support[y * w + x] = true;
    }
    Ok(RescoredMask {
        window,
        pyr_h,
        pyr_v,
        support,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Top,
    Right,
    Bottom,
}

pub const SIDES: [Side; 4] = [Side::Left, Side::Top, Side::Right, Side::Bottom];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideStatus {
    Refined,
    /// Too few or collinear points, or a flat plane; the input coordinate is kept.
    DegenerateFit,
    /// The plane slopes away from the midline; the input coordinate is kept.
    WrongSlope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxRefinement<T> {
    pub rect: Rect<T>,
    /// Indexed like [`SIDES`].
    pub sides: [SideStatus; 4],
    /// Refined sides were out of order; `rect` is the input box.
    pub fell_back: bool,
}

fn side_coordinate<T: Real>(side: Side, points: &[(T, T, T)]) -> Result<T, SideStatus> {
    let plane = fit_plane(points).map_err(|_| SideStatus::DegenerateFit)?;
    let tol = T::epsilon().sqrt();
    // slope across the boundary and the coordinate running along it
    let (slope, other, along): (T, T, Vec<T>) = match side {
        Side::Left | Side::Right => (plane.a, plane.b, points.iter().map(|p| p.1).collect()),
        Side::Top | Side::Bottom => (plane.b, plane.a, points.iter().map(|p| p.0).collect()),
    };
    if slope.abs() <= tol {
        return Err(SideStatus::DegenerateFit);
    }
    let rising = matches!(side, Side::Left | Side::Top);
    if (slope > T::zero()) != rising {
        return Err(SideStatus::WrongSlope);
    }
    let mut along = along;
    along.sort_by(|a, b| a.partial_cmp(b).expect("finite pixel coordinates"));
    along.dedup();
    let n = T::from_usize(along.len()).expect("count representable");
    let sum: T = along.iter().map(|&u| (other * u + plane.c) / slope).sum();
    Ok(-sum / n)
}

/// Fits one plane per side on the half of the overlap region between that
/// side and the midline and moves the side to the mean zero crossing over the
/// occupied rows (columns). Sides whose fit fails keep their input coordinate.
pub fn refine_box<T: Real>(
    bbox: &Rect<T>,
    x_mid: T,
    y_mid: T,
    rescored: &RescoredMask<T>,
    image_width: usize,
    image_height: usize,
) -> BoxRefinement<T> {
    let pts: Vec<(T, T, T, T)> = rescored
        .points()
        .map(|(px, py, h, v)| (T::from_index(px), T::from_index(py), h, v))
        .collect();
    let half = |side: Side| -> Vec<(T, T, T)> {
        pts.iter()
            .filter(|p| match side {
                Side::Left => p.0 <= x_mid,
                Side::Right => p.0 >= x_mid,
                Side::Top => p.1 <= y_mid,
                Side::Bottom => p.1 >= y_mid,
            })
            .map(|p| match side {
                Side::Left | Side::Right => (p.0, p.1, p.2),
                Side::Top | Side::Bottom => (p.0, p.1, p.3),
            })
            .collect()
    };
    let mut coords = bbox.to_array();
    let mut sides = [SideStatus::Refined; 4];
    let (wmax, hmax) = (T::from_usize(image_width).unwrap(), T::from_usize(image_height).unwrap());
    for (k, side) in SIDES.into_iter().enumerate() {
        match side_coordinate(side, &half(side)) {
            Ok(v) => {
                let limit = if matches!(side, Side::Left | Side::Right) { wmax } else { hmax };
                coords[k] = v.max(T::zero()).min(limit);
            }
            Err(status) => sides[k] = status,
        }
    }
    match Rect::new(coords[0], coords[1], coords[2], coords[3]) {
        Ok(rect) => BoxRefinement {
            rect,
            sides,
            fell_back: false,
        },
        Err(_) => BoxRefinement {
            rect: *bbox,
            sides,
            fell_back: true,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineConfig<T> {
    pub seg_threshold: T,
    pub iterations: usize,
}

impl<T: Real> Default for RefineConfig<T> {
    fn default() -> Self {
        RefineConfig {
            seg_threshold: T::half(),
            iterations: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedBox<T> {
    pub id: CellId,
    pub rect: Rect<T>,
    pub text_rect: Rect<T>,
    pub sides: [SideStatus; 4],
    /// False when no segmentation component matched and only the local maps were used.
    pub global_match: bool,
    pub text_clamped: bool,
    pub fell_back: bool,
    pub iterations_run: usize,
}

/// Full refinement of one proposal. Without a matching global component (or
/// without global maps at all) the local maps alone are fitted over the box.
///
/// Further iterations reuse the text midline and repeat matching, re-scoring
/// and fitting with the refined box; they stop early once the midline no
/// longer lies strictly inside the box.
pub fn refine_proposal<T: Real>(
    pred: &ProposalPrediction<T>,
    global: Option<&GlobalContext<'_, T>>,
    image_width: usize,
    image_height: usize,
    config: &RefineConfig<T>,
) -> Result<RefinedBox<T>, RefineError> {
    if config.iterations == 0 {
        return Err(RefineError::ZeroIterations);
    }
    let (x_mid, y_mid) = pred.midline();
    check_midline(&pred.bbox, x_mid, y_mid)?;
    let mut out = RefinedBox {
        id: pred.id,
        rect: pred.bbox,
        text_rect: pred.text_rect,
        sides: [SideStatus::DegenerateFit; 4],
        global_match: false,
        text_clamped: pred.text_clamped(),
        fell_back: false,
        iterations_run: 0,
    };
    for iteration in 0..config.iterations {
        let current = out.rect;
        if iteration > 0 && check_midline(&current, x_mid, y_mid).is_err() {
            break;
        }
        let matched = global.and_then(|g| match_labeled_region(&current, &g.labels).ok());
        let (overlap, global_maps) = match (&matched, global) {
            (Some(region), Some(g)) => (region.overlap.clone(), Some(g.prediction)),
            _ => {
                let window = current.pixel_window().clip(image_width, image_height);
                (window.pixels().collect::<Vec<_>>(), None)
            }
        };
        let rescored = match rescore_in(pred, &current, x_mid, y_mid, global_maps, &overlap) {
            Ok(r) => r,
            Err(RefineError::EmptyOverlap) if iteration > 0 => break,
            Err(e) => return Err(e),
        };
        let step = refine_box(&current, x_mid, y_mid, &rescored, image_width, image_height);
        out.rect = step.rect;
        out.sides = step.sides;
        out.fell_back = step.fell_back;
        out.global_match = matched.is_some();
        out.iterations_run = iteration + 1;
    }
    Ok(out)
}
