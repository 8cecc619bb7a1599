//! 4-connected component labeling of a thresholded map.

use crate::scalar::Real;
use crate::scalar_map::ScalarMap;

/// Component labels in row-major scan order of each component's first pixel.
/// Label 0 is background; components are numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabels {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    areas: Vec<usize>,
}

impl ComponentLabels {
    /// Foreground is every pixel with value `>= threshold`.
    pub fn from_map<T: Real>(map: &ScalarMap<T>, threshold: T) -> Self {
        let (width, height) = (map.width(), map.height());
        let fg: Vec<bool> = map.values().iter().map(|&v| v >= threshold).collect();
        let mut labels = vec![0u32; width * height];
        let mut areas = vec![0usize];
        let mut stack = Vec::new();
        for start in 0..width * height {
            if !fg[start] || labels[start] != 0 {
                continue;
            }
            let label = areas.len() as u32;
            let mut area = 0;
            labels[start] = label;
            stack.push(start);
            while let Some(i) = stack.pop() {
                area += 1;
                let (x, y) = (i % width, i / width);
                let mut visit = |j: usize| {
                    if fg[j] && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < width {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - width);
                }
                if y + 1 < height {
                    visit(i + width);
                }
            }
            areas.push(area);
        }
        ComponentLabels {
            width,
            height,
            labels,
            areas,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn count(&self) -> usize {
        self.areas.len() - 1
    }

    pub fn area(&self, label: u32) -> usize {
        self.areas[label as usize]
    }

    /// Label at a pixel; 0 for background or out-of-bounds.
    pub fn label(&self, x: i64, y: i64) -> u32 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return 0;
        }
        self.labels[y as usize * self.width + x as usize]
    }
}
