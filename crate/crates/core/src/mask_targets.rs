//! Pyramid mask targets: local per-proposal maps and the whole-image
//! segmentation plus pyramid maps.
//!
//! Pyramid values are sampled at integer pixel coordinates. A ramp rises
//! linearly from 0 at the low edge to 1 at the text midline and falls back to
//! 0 at the high edge, so a plane fitted to either flank crosses zero exactly
//! on the box boundary.

use thiserror::Error;

use crate::geometry::{PixelWindow, Rect};
use crate::scalar::Real;
use crate::scalar_map::ScalarMap;
use crate::table_model::{Axis, CellId, TableAnnotation};

/// Per-axis scale applied to every aligned box before it is painted into the
/// global maps.
pub const GLOBAL_SHRINK: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("proposal rasterizes to zero pixels")]
    EmptyProposal,
    #[error("degenerate-pyramid: text midline on the proposal {0} boundary")]
    DegeneratePyramid(Axis),
    #[error("text rectangle is not contained in the proposal")]
    TextOutsideProposal,
    #[error("cell {0} has no aligned box")]
    MissingAlignedBox(CellId),
    #[error("vanished-cell: shrunk box of cell {0} covers no pixel")]
    VanishedCell(CellId),
    #[error("cells {0} and {1} overlap after shrinking")]
    OverlappingCells(CellId, CellId),
}

/// Piecewise-linear pyramid profile on `[lo, hi]` peaking at `mid`, clamped to `[0, 1]`.
pub fn pyramid_value<T: Real>(pos: T, lo: T, mid: T, hi: T) -> T {
    let v = if pos <= mid {
        (pos - lo) / (mid - lo)
    } else {
        (hi - pos) / (hi - mid)
    };
    v.clamp01()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTarget<T> {
    pub proposal: Rect<T>,
    pub text_rect: Rect<T>,
    /// Pixel window of the proposal; map index `(0, 0)` is pixel `(window.x0, window.y0)`.
    pub window: PixelWindow,
    pub mask: ScalarMap<T>,
    pub pyr_h: ScalarMap<T>,
    pub pyr_v: ScalarMap<T>,
}

pub fn lpma_targets<T: Real>(proposal: Rect<T>, text_rect: Rect<T>) -> Result<LocalTarget<T>, TargetError> {
    let window = proposal.pixel_window();
    if window.is_empty() {
        return Err(TargetError::EmptyProposal);
    }
    let (x_mid, y_mid) = (text_rect.x_mid(), text_rect.y_mid());
    if x_mid <= proposal.x1 || x_mid >= proposal.x2 {
        return Err(TargetError::DegeneratePyramid(Axis::Col));
    }
    if y_mid <= proposal.y1 || y_mid >= proposal.y2 {
        return Err(TargetError::DegeneratePyramid(Axis::Row));
    }
    if !proposal.contains_rect(&text_rect) {
        return Err(TargetError::TextOutsideProposal);
    }
    let (w, h) = (window.width(), window.height());
    let px = |x: usize| window.x0 + x as i64;
    let py = |y: usize| window.y0 + y as i64;
    let pyr_h = ScalarMap::from_fn(w, h, |x, _| {
        pyramid_value(T::from_index(px(x)), proposal.x1, x_mid, proposal.x2)
    });
    let pyr_v = ScalarMap::from_fn(w, h, |_, y| {
        pyramid_value(T::from_index(py(y)), proposal.y1, y_mid, proposal.y2)
    });
    let mask = ScalarMap::from_fn(w, h, |x, y| {
        if text_rect.contains_pixel(px(x), py(y)) {
            T::one()
        } else {
            T::zero()
        }
    });
    Ok(LocalTarget {
        proposal,
        text_rect,
        window,
        mask,
        pyr_h,
        pyr_v,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTarget<T> {
    pub seg: ScalarMap<T>,
    pub pyr_h: ScalarMap<T>,
    pub pyr_v: ScalarMap<T>,
}

/// Global targets for a whole table.
///
/// Every aligned box (empty cells included) is shrunk by [`GLOBAL_SHRINK`]
/// about its centre and painted into `seg`. Non-empty cells also paint their
/// pyramid over the shrunk support; the ramp itself still reaches zero on the
/// unshrunk aligned boundary.
pub fn gpma_targets<T: Real>(
    ann: &TableAnnotation<T>,
    aligned: &std::collections::BTreeMap<CellId, Rect<T>>,
) -> Result<GlobalTarget<T>, TargetError> {
    let (w, h) = (ann.image_width as usize, ann.image_height as usize);
    let mut seg = ScalarMap::zeros(w, h);
    let mut pyr_h = ScalarMap::zeros(w, h);
    let mut pyr_v = ScalarMap::zeros(w, h);
    let mut owner: Vec<Option<CellId>> = vec![None; w * h];
    for cell in &ann.cells {
        let rect = *aligned
            .get(&cell.id)
            .ok_or(TargetError::MissingAlignedBox(cell.id))?;
        let shrunk = rect.scaled_about_center(T::lit(GLOBAL_SHRINK));
        let window = shrunk.pixel_window().clip(w, h);
        if window.is_empty() {
            return Err(TargetError::VanishedCell(cell.id));
        }
        for (px, py) in window.pixels() {
            let (x, y) = (px as usize, py as usize);
            if let Some(other) = owner[y * w + x] {
                return Err(TargetError::OverlappingCells(other, cell.id));
            }
            owner[y * w + x] = Some(cell.id);
            seg.set(x, y, T::one());
            if let Some(text) = cell.text_rect {
                pyr_h.set(x, y, pyramid_value(T::from_index(px), rect.x1, text.x_mid(), rect.x2));
                pyr_v.set(x, y, pyramid_value(T::from_index(py), rect.y1, text.y_mid(), rect.y2));
            }
        }
    }
    Ok(GlobalTarget { seg, pyr_h, pyr_v })
}
