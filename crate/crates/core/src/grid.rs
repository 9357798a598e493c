//! Periodic, uniform, cell-centered grids and the grid functions living on them.
//!
//! A grid of `m` points per axis on `[0, L]^dim` has spacing `h = L / m` and
//! cell centers `x_i = (i - 1/2) h` for `i = 1..=m`. Storage is zero-based, so
//! `values[0]` sits at `x = h / 2`. Two-dimensional fields are stored row-major
//! over `(i, j)`: the x index `i` is the slow index, `y` is contiguous.
//!
//! Every reduction goes through [`pairwise_sum`] so results do not depend on
//! thread count or call site.

use crate::error::{Error, Result};

/// Spatial dimension of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn count(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

/// Coordinate axis. `X` is the slow (row) index, `Y` the contiguous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Periodic uniform grid on the square (or segment) `[0, L]^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    length: f64,
    points: usize,
    spacing: f64,
    dim: Dim,
}

impl GridSpec {
    pub fn new(length: f64, points: usize, dim: Dim) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "domain length must be positive and finite, got {length}"
            )));
        }
        if points == 0 {
            return Err(Error::InvalidGrid("grid needs at least one point".into()));
        }
        Ok(Self {
            length,
            points,
            spacing: length / points as f64,
            dim,
        })
    }

    /// Square two-dimensional grid.
    pub fn square(length: f64, points: usize) -> Result<Self> {
        Self::new(length, points, Dim::Two)
    }

    pub fn line(length: f64, points: usize) -> Result<Self> {
        Self::new(length, points, Dim::One)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Total number of grid values, `m^dim`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim.count() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Measure of the domain, `L^dim`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim.count() as i32)
    }

    /// Quadrature weight of one cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim.count() as i32)
    }

    /// Cell-center coordinate for zero-based index `i`.
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing
    }

    pub fn axes(&self) -> &'static [Axis] {
        match self.dim {
            Dim::One => &[Axis::X],
            Dim::Two => &[Axis::X, Axis::Y],
        }
    }

    pub(crate) fn check_axis(&self, axis: Axis) -> Result<()> {
        if axis.index() < self.dim.count() {
            Ok(())
        } else {
            Err(Error::InvalidAxis {
                axis: axis.index(),
                dim: self.dim.count(),
            })
        }
    }

    pub(crate) fn require_points(&self, required: usize) -> Result<()> {
        if self.points < required {
            Err(Error::TooFewPoints {
                required,
                got: self.points,
            })
        } else {
            Ok(())
        }
    }
}

/// Sum of `term(0) + ... + term(n - 1)` by fixed-order pairwise reduction.
pub fn pairwise_sum<F: Fn(usize) -> f64>(n: usize, term: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
        if hi - lo <= 64 {
            let mut s = 0.0;
            for i in lo..hi {
                s += term(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    rec(0, n, &term)
}

/// A real-valued periodic grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at cell centers. On a 1-D grid `y` is always 0.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: GridSpec, f: F) -> Self {
        Self::from_fn_shifted(grid, [0.0, 0.0], f)
    }

    /// Samples `f` at cell centers displaced by `shift` (per axis, length units).
    pub fn from_fn_shifted<F: Fn(f64, f64) -> f64>(grid: GridSpec, shift: [f64; 2], f: F) -> Self {
        let m = grid.points();
        let values = match grid.dim() {
            Dim::One => (0..m).map(|i| f(grid.center(i) + shift[0], 0.0)).collect(),
            Dim::Two => {
                let mut v = Vec::with_capacity(m * m);
                for i in 0..m {
                    let x = grid.center(i) + shift[0];
                    for j in 0..m {
                        v.push(f(x, grid.center(j) + shift[1]));
                    }
                }
                v
            }
        };
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at `(i, j)` with periodic wrap on both indices. `j` is ignored in 1-D.
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let m = self.grid.points() as isize;
        let i = i.rem_euclid(m) as usize;
        match self.grid.dim() {
            Dim::One => self.values[i],
            Dim::Two => self.values[i * m as usize + j.rem_euclid(m) as usize],
        }
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Field, f: F) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Field) -> Result<()> {
        self.same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn add_constant(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    pub fn sum(&self) -> f64 {
        pairwise_sum(self.values.len(), |k| self.values[k])
    }

    /// Domain average, `h^dim / |Omega| * sum(values)`.
    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Copy with the mean removed.
    pub fn mean_free(&self) -> Field {
        let mean = self.mean();
        self.map(|v| v - mean)
    }

    /// Discrete L2 inner product `h^dim * sum(f * g)`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        let (a, b) = (&self.values, &other.values);
        Ok(self.grid.cell_volume() * pairwise_sum(a.len(), |k| a[k] * b[k]))
    }

    pub fn norm_l2(&self) -> f64 {
        let v = &self.values;
        (self.grid.cell_volume() * pairwise_sum(v.len(), |k| v[k] * v[k])).sqrt()
    }

    /// `(h^dim * sum |f|^p)^(1/p)` for finite `p >= 1`.
    pub fn norm_lp(&self, p: f64) -> f64 {
        let v = &self.values;
        let s = self.grid.cell_volume() * pairwise_sum(v.len(), |k| v[k].abs().powf(p));
        s.powf(1.0 / p)
    }

    /// `||f||_4^4`, without the root.
    pub fn norm4_pow4(&self) -> f64 {
        let v = &self.values;
        self.grid.cell_volume()
            * pairwise_sum(v.len(), |k| {
                let s = v[k] * v[k];
                s * s
            })
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// Cyclic shift: `out(i + a, j + b) = self(i, j)`.
    pub fn shifted(&self, a: isize, b: isize) -> Field {
        let m = self.grid.points();
        let mut out = vec![0.0; self.values.len()];
        match self.grid.dim() {
            Dim::One => {
                for (i, &v) in self.values.iter().enumerate() {
                    out[(i as isize + a).rem_euclid(m as isize) as usize] = v;
                }
            }
            Dim::Two => {
                for i in 0..m {
                    let ti = (i as isize + a).rem_euclid(m as isize) as usize;
                    for j in 0..m {
                        let tj = (j as isize + b).rem_euclid(m as isize) as usize;
                        out[ti * m + tj] = self.values[i * m + j];
                    }
                }
            }
        }
        Field {
            grid: self.grid,
            values: out,
        }
    }
}

/// `inner_l2(f, g)`.
pub fn inner_l2(f: &Field, g: &Field) -> Result<f64> {
    f.inner(g)
}
