//! Table structure recognition from cell boxes: mask targets for box
//! proposals, boundary refinement from predicted pyramid maps, structure
//! recovery from refined boxes, evaluation metrics and a synthetic table
//! generator.
//!
//! Everything numeric is generic over [`Real`]; the aliases below fix the
//! scalar type for the common cases.

pub mod components;
pub mod formats;
pub mod geometry;
pub mod mask_targets;
pub mod metrics;
pub mod plane;
pub mod recovery;
pub mod refine;
pub mod scalar;
pub mod scalar_map;
pub mod synth;
pub mod table_model;

pub use geometry::{PixelWindow, Rect, RectError};
pub use scalar::Real;
pub use scalar_map::{MapError, ScalarMap};
pub use table_model::{Axis, CellId, Span, TableAnnotation, TableGrid};

pub type RectF32 = Rect<f32>;
pub type RectF64 = Rect<f64>;
pub type ScalarMapF32 = ScalarMap<f32>;
pub type ScalarMapF64 = ScalarMap<f64>;
pub type TableAnnotationF64 = TableAnnotation<f64>;
pub type TableGridF64 = TableGrid<f64>;
