//! Axis-aligned rectangles and their rasterization onto the pixel grid.
//!
//! Pixel `(px, py)` lies inside a rectangle iff `x1 <= px + 0.5 < x2` and
//! `y1 <= py + 0.5 < y2` (half-open, pixel-centre containment).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RectError {
    #[error("rectangle coordinates must be finite and non-negative, got {0:?}")]
    NotFiniteOrNegative([f64; 4]),
    #[error("rectangle must have positive extent, got {0:?}")]
    Empty([f64; 4]),
}

/// Axis-aligned rectangle `[x1, x2) x [y1, y2)` in image pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[T; 4]", into = "[T; 4]", bound = "T: Real")]
pub struct Rect<T> {
    pub x1: T,
    pub y1: T,
    pub x2: T,
    pub y2: T,
}

/// Half-open integer pixel ranges covered by a rasterized rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelWindow {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl PixelWindow {
    pub fn width(&self) -> usize {
        (self.x1 - self.x0).max(0) as usize
    }

    pub fn height(&self) -> usize {
        (self.y1 - self.y0).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, px: i64, py: i64) -> bool {
        px >= self.x0 && px < self.x1 && py >= self.y0 && py < self.y1
    }

    /// Restricts the window to `[0, width) x [0, height)`.
    pub fn clip(&self, width: usize, height: usize) -> PixelWindow {
        PixelWindow {
            x0: self.x0.clamp(0, width as i64),
            y0: self.y0.clamp(0, height as i64),
            x1: self.x1.clamp(0, width as i64),
            y1: self.y1.clamp(0, height as i64),
        }
        .normalized()
    }

    fn normalized(self) -> PixelWindow {
        PixelWindow {
            x1: self.x1.max(self.x0),
            y1: self.y1.max(self.y0),
            ..self
        }
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.y0..self.y1).flat_map(move |py| (self.x0..self.x1).map(move |px| (px, py)))
    }
}

impl<T: Real> Rect<T> {
    /// Validating constructor.
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Result<Self, RectError> {
        let raw = || {
            [x1, y1, x2, y2].map(|v| v.to_f64().unwrap_or(f64::NAN))
        };
        if [x1, y1, x2, y2]
            .iter()
            .any(|v| !v.is_finite() || *v < T::zero())
        {
            return Err(RectError::NotFiniteOrNegative(raw()));
        }
        if !(x1 < x2 && y1 < y2) {
            return Err(RectError::Empty(raw()));
        }
        Ok(Rect { x1, y1, x2, y2 })
    }

    pub fn from_f64(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, RectError> {
        Self::new(T::lit(x1), T::lit(y1), T::lit(x2), T::lit(y2))
    }

    pub fn width(&self) -> T {
        self.x2 - self.x1
    }

    pub fn height(&self) -> T {
        self.y2 - self.y1
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn x_mid(&self) -> T {
        (self.x1 + self.x2) / T::two()
    }

    pub fn y_mid(&self) -> T {
        (self.y1 + self.y2) / T::two()
    }

    /// True when `other` lies entirely inside `self` (boundaries may touch).
    pub fn contains_rect(&self, other: &Rect<T>) -> bool {
        other.x1 >= self.x1 && other.x2 <= self.x2 && other.y1 >= self.y1 && other.y2 <= self.y2
    }

    pub fn intersection(&self, other: &Rect<T>) -> Option<Rect<T>> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        (x1 < x2 && y1 < y2).then_some(Rect { x1, y1, x2, y2 })
    }

    pub fn union(&self, other: &Rect<T>) -> Rect<T> {
        Rect {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    pub fn iou(&self, other: &Rect<T>) -> T {
        match self.intersection(other) {
            None => T::zero(),
            Some(inter) => {
                let i = inter.area();
                i / (self.area() + other.area() - i)
            }
        }
    }

    /// Scales width and height by `factor` about the centre.
    pub fn scaled_about_center(&self, factor: T) -> Rect<T> {
        let hw = self.width() * factor / T::two();
        let hh = self.height() * factor / T::two();
        let (cx, cy) = (self.x_mid(), self.y_mid());
        Rect {
            x1: cx - hw,
            y1: cy - hh,
            x2: cx + hw,
            y2: cy + hh,
        }
    }

    pub fn translated(&self, dx: T, dy: T) -> Rect<T> {
        Rect {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    /// Pixels whose centres fall inside the rectangle.
    pub fn pixel_window(&self) -> PixelWindow {
        let lo = |v: T| (v - T::half()).ceil().to_i64().unwrap_or(i64::MAX);
        PixelWindow {
            x0: lo(self.x1),
            y0: lo(self.y1),
            x1: lo(self.x2),
            y1: lo(self.y2),
        }
        .normalized()
    }

    pub fn contains_pixel(&self, px: i64, py: i64) -> bool {
        let cx = T::from_index(px) + T::half();
        let cy = T::from_index(py) + T::half();
        self.x1 <= cx && cx < self.x2 && self.y1 <= cy && cy < self.y2
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn cast<U: Real>(&self) -> Rect<U> {
        let c = |v: T| U::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan());
        Rect {
            x1: c(self.x1),
            y1: c(self.y1),
            x2: c(self.x2),
            y2: c(self.y2),
        }
    }
}

impl<T: Real> TryFrom<[T; 4]> for Rect<T> {
    type Error = RectError;

    fn try_from(v: [T; 4]) -> Result<Self, Self::Error> {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl<T: Real> From<Rect<T>> for [T; 4] {
    fn from(r: Rect<T>) -> Self {
        r.to_array()
    }
}
