//! Uniform grids and sampled functions.

use crate::error::{Error, Result};

/// Uniform 1-D grid `x_j = x_min + j*h`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1 {
    x_min: f64,
    h: f64,
    n: usize,
}

impl Grid1 {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Range {
                name: "n",
                value: n as f64,
                reason: "a grid needs at least two points",
            });
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Range {
                name: "x_max",
                value: x_max,
                reason: "must be finite and exceed x_min",
            });
        }
        Ok(Self {
            x_min,
            h: (x_max - x_min) / (n - 1) as f64,
            n,
        })
    }

    /// Grid on `[x_min, x_max]` with spacing `h`; the interval length must be
    /// a whole multiple of `h` (to 1e-9 relative).
    pub fn with_spacing(x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Range {
                name: "h",
                value: h,
                reason: "must be positive",
            });
        }
        let cells = (x_max - x_min) / h;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::Range {
                name: "h",
                value: h,
                reason: "interval length is not a multiple of h",
            });
        }
        if rounded < 1.0 {
            return Err(Error::Range {
                name: "h",
                value: h,
                reason: "must be smaller than the interval",
            });
        }
        Ok(Self {
            x_min,
            h,
            n: rounded as usize + 1,
        })
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.h
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn same_as(&self, other: &Grid1) -> bool {
        self.n == other.n
            && (self.x_min - other.x_min).abs() <= 1e-12 * (1.0 + self.x_min.abs())
            && (self.h - other.h).abs() <= 1e-14 * self.h
    }

    /// Index of the cell containing `x` and the fractional offset inside it,
    /// or `None` when `x` is outside the grid.
    #[inline]
    pub(crate) fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let s = (x - self.x_min) / self.h;
        if !(s >= 0.0) || s > (self.n - 1) as f64 {
            return None;
        }
        let i = (s.floor() as usize).min(self.n - 2);
        Some((i, s - i as f64))
    }
}

/// Samples of a function on a [`Grid1`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid1,
    values: Vec<f64>,
    tag: String,
}

impl GridFunction {
    pub fn new(grid: Grid1, values: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                point: vec![grid.x(j)],
            });
        }
        Ok(Self {
            grid,
            values,
            tag: tag.into(),
        })
    }

    pub fn from_fn(grid: Grid1, tag: impl Into<String>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Self::new(grid, values, tag)
    }

    pub fn zeros(grid: Grid1, tag: impl Into<String>) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            tag: tag.into(),
        }
    }

    pub(crate) fn from_parts(grid: Grid1, values: Vec<f64>, tag: impl Into<String>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self {
            grid,
            values,
            tag: tag.into(),
        }
    }

    pub fn grid(&self) -> &Grid1 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    /// Value at a grid index with constant continuation past either end.
    #[inline]
    pub fn at(&self, j: isize) -> f64 {
        let last = self.values.len() as isize - 1;
        self.values[j.clamp(0, last) as usize]
    }

    /// Linear interpolation; outside the grid the edge value is used and the
    /// second component is `true`.
    #[inline]
    pub fn interpolate(&self, x: f64) -> (f64, bool) {
        match self.grid.locate(x) {
            Some((i, s)) => (self.values[i] * (1.0 - s) + self.values[i + 1] * s, false),
            None => {
                if x < self.grid.x_min {
                    (self.values[0], true)
                } else {
                    (self.values[self.values.len() - 1], true)
                }
            }
        }
    }

    /// Composite trapezoid rule over the whole grid.
    pub fn integrate(&self) -> f64 {
        trapezoid(&self.values, self.grid.h)
    }

    /// Central difference, one-sided half step at the ends (consistent with
    /// constant continuation).
    pub fn derivative(&self) -> GridFunction {
        let h2 = 2.0 * self.grid.h;
        let n = self.values.len() as isize;
        let values = (0..n)
            .map(|j| (self.at(j + 1) - self.at(j - 1)) / h2)
            .collect();
        Self::from_parts(self.grid, values, format!("d{}", self.tag))
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| f(self.grid.x(j), v))
            .collect();
        Self::from_parts(self.grid, values, self.tag.clone())
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_parts(self.grid, values, self.tag.clone()))
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        self.map(|_, v| a * v)
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute difference to another function on the same grid.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Writes `x,value` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (j, v) in self.values.iter().enumerate() {
            out.push_str(&format!(
                "{},{}\n",
                crate::report::fmt_num(self.grid.x(j)),
                crate::report::fmt_num(*v)
            ));
        }
        out
    }
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Tensor-product grid; values are stored row-major with `y` as the outer index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub x: Grid1,
    pub y: Grid1,
}

impl Grid2 {
    pub fn square(lo: f64, hi: f64, h: f64) -> Result<Self> {
        let g = Grid1::with_spacing(lo, hi, h)?;
        Ok(Self { x: g, y: g })
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let nx = self.x.len();
        [self.x.x(idx % nx), self.y.x(idx / nx)]
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction2 {
    grid: Grid2,
    values: Vec<f64>,
    tag: String,
}

impl GridFunction2 {
    pub fn new(grid: Grid2, values: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a 2-D grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                point: grid.point(i).to_vec(),
            });
        }
        Ok(Self {
            grid,
            values,
            tag: tag.into(),
        })
    }

    pub fn from_fn(grid: Grid2, tag: impl Into<String>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::new(grid, values, tag)
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    #[inline]
    pub fn at(&self, ix: isize, iy: isize) -> f64 {
        let nx = self.grid.x.len() as isize;
        let ny = self.grid.y.len() as isize;
        let ix = ix.clamp(0, nx - 1) as usize;
        let iy = iy.clamp(0, ny - 1) as usize;
        self.values[iy * nx as usize + ix]
    }

    /// Bilinear interpolation with edge clamping; the flag reports clamping.
    pub fn interpolate(&self, p: [f64; 2]) -> (f64, bool) {
        let gx = &self.grid.x;
        let gy = &self.grid.y;
        let cx = p[0].clamp(gx.x_min(), gx.x_max());
        let cy = p[1].clamp(gy.x_min(), gy.x_max());
        let clamped = cx != p[0] || cy != p[1];
        let (i, s) = gx.locate(cx).unwrap_or((gx.len() - 2, 1.0));
        let (k, r) = gy.locate(cy).unwrap_or((gy.len() - 2, 1.0));
        let (i, k) = (i as isize, k as isize);
        let v = (1.0 - r) * ((1.0 - s) * self.at(i, k) + s * self.at(i + 1, k))
            + r * ((1.0 - s) * self.at(i, k + 1) + s * self.at(i + 1, k + 1));
        (v, clamped)
    }

    pub fn integrate(&self) -> f64 {
        let nx = self.grid.x.len();
        let rows: Vec<f64> = self
            .values
            .chunks(nx)
            .map(|row| trapezoid(row, self.grid.x.h()))
            .collect();
        trapezoid(&rows, self.grid.y.h())
    }

    /// Central-difference gradient `(d/dx, d/dy)`.
    pub fn gradient(&self) -> (GridFunction2, GridFunction2) {
        let nx = self.grid.x.len();
        let (hx2, hy2) = (2.0 * self.grid.x.h(), 2.0 * self.grid.y.h());
        let mut dx = vec![0.0; self.values.len()];
        let mut dy = vec![0.0; self.values.len()];
        for idx in 0..self.values.len() {
            let (ix, iy) = ((idx % nx) as isize, (idx / nx) as isize);
            dx[idx] = (self.at(ix + 1, iy) - self.at(ix - 1, iy)) / hx2;
            dy[idx] = (self.at(ix, iy + 1) - self.at(ix, iy - 1)) / hy2;
        }
        (
            Self {
                grid: self.grid,
                values: dx,
                tag: format!("dx{}", self.tag),
            },
            Self {
                grid: self.grid,
                values: dy,
                tag: format!("dy{}", self.tag),
            },
        )
    }

    pub fn map(&self, f: impl Fn([f64; 2], f64) -> f64) -> GridFunction2 {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.grid.point(i), v))
            .collect();
        Self {
            grid: self.grid,
            values,
            tag: self.tag.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_exact_for_affine() {
        let g = Grid1::new(-1.0, 2.0, 31).unwrap();
        let f = GridFunction::from_fn(g, "f", |x| 3.0 * x - 1.0).unwrap();
        // integral of 3x - 1 over [-1, 2] = 1.5*(4-1) - 3 = 1.5
        assert!((f.integrate() - 1.5).abs() < 1e-13);
    }

    #[test]
    fn interpolation_is_exact_at_knots_and_clamps() {
        let g = Grid1::with_spacing(0.0, 1.0, 0.25).unwrap();
        let f = GridFunction::from_fn(g, "f", |x| x * x).unwrap();
        assert_eq!(f.interpolate(0.5), (0.25, false));
        assert_eq!(f.interpolate(0.375), (0.5 * (0.0625 + 0.25), false));
        assert_eq!(f.interpolate(-3.0), (0.0, true));
        assert_eq!(f.interpolate(7.0), (1.0, true));
    }

    #[test]
    fn spacing_must_divide_interval() {
        assert!(Grid1::with_spacing(0.0, 1.0, 0.3).is_err());
        let g = Grid1::with_spacing(-6.0, 6.0, 1.0 / 256.0).unwrap();
        assert_eq!(g.len(), 3073);
        assert_eq!(g.x_max(), 6.0);
    }

    #[test]
    fn central_derivative_exact_for_quadratics_inside() {
        let g = Grid1::with_spacing(-1.0, 1.0, 0.1).unwrap();
        let f = GridFunction::from_fn(g, "f", |x| x * x).unwrap();
        let d = f.derivative();
        for j in 1..g.len() - 1 {
            assert!((d.values()[j] - 2.0 * g.x(j)).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_integral_of_affine_2d() {
        let g = Grid2::square(0.0, 1.0, 0.125).unwrap();
        let f = GridFunction2::from_fn(g, "f", |p| 1.0 + p[0] + 2.0 * p[1]).unwrap();
        assert!((f.integrate() - 2.5).abs() < 1e-13);
        let (v, clamped) = f.interpolate([0.3, 0.7]);
        assert!(!clamped);
        assert!((v - (1.0 + 0.3 + 1.4)).abs() < 1e-13);
    }
}
