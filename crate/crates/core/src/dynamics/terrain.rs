//! Flat and heightfield ground surfaces.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// Regular grid of heights. `heights[row][col]` sits at
/// `(origin.x + col·spacing, origin.y + row·spacing)`. Queries outside the grid
/// clamp to the border.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightfield {
    origin: Vector2<f64>,
    spacing_m: f64,
    heights: Vec<Vec<f64>>,
}

impl Heightfield {
    pub fn new(origin: Vector2<f64>, spacing_m: f64, heights: Vec<Vec<f64>>) -> Result<Self> {
        if !(spacing_m > 0.0 && spacing_m.is_finite()) {
            return Err(Error::Configuration(format!("heightfield spacing must be positive, got {spacing_m}")));
        }
        let cols = heights.first().map_or(0, Vec::len);
        if heights.len() < 2 || cols < 2 {
            return Err(Error::Configuration("heightfield needs at least 2×2 samples".into()));
        }
        for (r, row) in heights.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Configuration(format!(
                    "heightfield row {r} has {} samples, expected {cols}",
                    row.len()
                )));
            }
            if let Some(c) = row.iter().position(|h| !h.is_finite()) {
                return Err(Error::Configuration(format!("heightfield sample [{r}][{c}] is not finite")));
            }
        }
        Ok(Self { origin, spacing_m, heights })
    }

    /// A grid whose height at each sample is `f(x, y)`.
    pub fn from_fn(
        origin: Vector2<f64>,
        spacing_m: f64,
        rows: usize,
        cols: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let heights = (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| f(origin.x + c as f64 * spacing_m, origin.y + r as f64 * spacing_m))
                    .collect()
            })
            .collect();
        Self::new(origin, spacing_m, heights)
    }

    pub fn origin(&self) -> Vector2<f64> {
        self.origin
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    pub fn heights(&self) -> &[Vec<f64>] {
        &self.heights
    }

    fn rows(&self) -> usize {
        self.heights.len()
    }

    fn cols(&self) -> usize {
        self.heights[0].len()
    }

    /// Cell index and fractional offset along one axis.
    fn locate(&self, coord: f64, origin: f64, n: usize) -> (usize, f64) {
        let u = ((coord - origin) / self.spacing_m).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        (i, u - i as f64)
    }

    /// Bilinear height.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let (c, fx) = self.locate(x, self.origin.x, self.cols());
        let (r, fy) = self.locate(y, self.origin.y, self.rows());
        let h = &self.heights;
        let h00 = h[r][c];
        let h10 = h[r][c + 1];
        let h01 = h[r + 1][c];
        let h11 = h[r + 1][c + 1];
        let bottom = h00 + (h10 - h00) * fx;
        let top = h01 + (h11 - h01) * fx;
        bottom + (top - bottom) * fy
    }

    /// Unit normal from central differences of the bilinear surface.
    pub fn normal(&self, x: f64, y: f64) -> Vector3<f64> {
        let e = 0.5 * self.spacing_m;
        let dhdx = (self.height(x + e, y) - self.height(x - e, y)) / (2.0 * e);
        let dhdy = (self.height(x, y + e) - self.height(x, y - e)) / (2.0 * e);
        Vector3::new(-dhdx, -dhdy, 1.0).normalize()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Terrain {
    Flat { height: f64 },
    Heightfield(Heightfield),
}

impl Terrain {
    pub fn height(&self, x: f64, y: f64) -> f64 {
        match self {
            Terrain::Flat { height } => *height,
            Terrain::Heightfield(hf) => hf.height(x, y),
        }
    }

    pub fn normal(&self, x: f64, y: f64) -> Vector3<f64> {
        match self {
            Terrain::Flat { .. } => Vector3::z(),
            Terrain::Heightfield(hf) => hf.normal(x, y),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Terrain::Flat { height } if !height.is_finite() => {
                Err(Error::Configuration("flat terrain height is not finite".into()))
            }
            Terrain::Heightfield(hf) => {
                if hf.heights.iter().flatten().any(|h| !h.is_finite()) {
                    return Err(Error::Configuration("heightfield contains non-finite heights".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl Default for Terrain {
    fn default() -> Self {
        Terrain::Flat { height: 0.0 }
    }
}
