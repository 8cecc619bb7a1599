//! Single-channel real-valued maps over an integer pixel grid.
//!
//! Binary layout: magic `TGMAP\0`, width and height as little-endian `u32`,
//! then `width * height` little-endian IEEE-754 `f32` values in row-major order.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::scalar::Real;

pub const MAGIC: &[u8; 6] = b"TGMAP\0";

#[derive(Debug, Error)]
pub enum MapError {
    #[error("bad magic, not a scalar map file")]
    BadMagic,
    #[error("map size {width}x{height} does not match {len} values")]
    SizeMismatch { width: usize, height: usize, len: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Real> ScalarMap<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        ScalarMap {
            width,
            height,
            values: vec![T::zero(); width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, values: Vec<T>) -> Result<Self, MapError> {
        if values.len() != width * height {
            return Err(MapError::SizeMismatch {
                width,
                height,
                len: values.len(),
            });
        }
        Ok(ScalarMap {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        ScalarMap {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    /// Signed lookup; `None` outside the map.
    pub fn at(&self, x: i64, y: i64) -> Option<T> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return None;
        }
        Some(self.values[y as usize * self.width + x as usize])
    }

    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.values[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ScalarMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn count_where(&self, f: impl Fn(T) -> bool) -> usize {
        self.values.iter().filter(|&&v| f(v)).count()
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == T::zero() || v == T::one())
    }

    pub fn in_unit_range(&self) -> bool {
        self.values.iter().all(|&v| v >= T::zero() && v <= T::one())
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        let mut buf = Vec::with_capacity(14 + 4 * self.values.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        buf.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in &self.values {
            let f = v.to_f32().unwrap_or(f32::NAN);
            buf.extend_from_slice(&f.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, MapError> {
        let mut header = [0u8; 14];
        r.read_exact(&mut header)?;
        if &header[..6] != MAGIC {
            return Err(MapError::BadMagic);
        }
        let width = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(header[10..14].try_into().unwrap()) as usize;
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() != 4 * width * height {
            return Err(MapError::SizeMismatch {
                width,
                height,
                len: raw.len() / 4,
            });
        }
        let values = raw
            .chunks_exact(4)
            .map(|c| T::from_f32(f32::from_le_bytes(c.try_into().unwrap())).unwrap_or(T::nan()))
            .collect();
        Ok(ScalarMap {
            width,
            height,
            values,
        })
    }

    /// Binary (P5) PGM with values clamped to `[0, 1]` and scaled to 0..=255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.values.iter().map(|&v| {
            let s = v.clamp01().to_f64().unwrap_or(0.0) * 255.0;
            s.round() as u8
        }));
        out
    }
}
