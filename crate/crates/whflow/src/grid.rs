//! Periodic uniform grid on the unit torus [0,1)^d, d in {1,2}, with the
//! staggered (marker-and-cell) calculus used everywhere else in the crate.
//!
//! Scalar fields live on cells at coordinates `i*h`; vector fields are
//! staggered, component `a` living on the face between a cell and its
//! neighbour in axis `a`. The forward-difference `gradient` and
//! backward-difference `divergence` are exact negative adjoints of each
//! other under the cell/face quadratures, so every operator built on top of
//! them (notably the weighted Laplacian) is symmetric by construction and
//! the discrete divergence theorem holds to rounding.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Uniform periodic grid on [0,1)^d with the same resolution on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub const MIN_CELLS_PER_AXIS: usize = 4;

    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) || n < Self::MIN_CELLS_PER_AXIS {
            return Err(Error::InvalidGrid { dim, n });
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of cells, `n^dim`.
    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Mesh spacing `h = 1/n` (same on every axis).
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Cell volume `h^dim`; the total measure of the torus is exactly 1.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinates of the center of the flat-indexed cell (second entry 0 in 1D).
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            1 => [idx as f64 * h, 0.0],
            _ => [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h],
        }
    }

    /// Flat index of the neighbour one cell ahead along `axis`, with wrap.
    #[inline]
    pub fn fwd(&self, idx: usize, axis: usize) -> usize {
        match (self.dim, axis) {
            (1, _) => {
                if idx + 1 == self.n {
                    0
                } else {
                    idx + 1
                }
            }
            (_, 0) => {
                if idx + self.n >= self.cells() {
                    idx + self.n - self.cells()
                } else {
                    idx + self.n
                }
            }
            _ => {
                let j = idx % self.n;
                if j + 1 == self.n {
                    idx + 1 - self.n
                } else {
                    idx + 1
                }
            }
        }
    }

    /// Flat index of the neighbour one cell behind along `axis`, with wrap.
    #[inline]
    pub fn bwd(&self, idx: usize, axis: usize) -> usize {
        match (self.dim, axis) {
            (1, _) => {
                if idx == 0 {
                    self.n - 1
                } else {
                    idx - 1
                }
            }
            (_, 0) => {
                if idx < self.n {
                    idx + self.cells() - self.n
                } else {
                    idx - self.n
                }
            }
            _ => {
                let j = idx % self.n;
                if j == 0 {
                    idx + self.n - 1
                } else {
                    idx - 1
                }
            }
        }
    }

    /// Shortest signed displacement from `a` to `b` on the torus, per axis.
    pub fn min_image(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut d = [0.0; 2];
        for axis in 0..self.dim {
            let mut delta = b[axis] - a[axis];
            if delta > 0.5 {
                delta -= 1.0;
            } else if delta < -0.5 {
                delta += 1.0;
            }
            d[axis] = delta;
        }
        d
    }

    /// Periodic Euclidean distance between two points.
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d = self.min_image(a, b);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }
}

/// Real values on the cells of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        assert!(value.is_finite(), "field values must be finite");
        Self {
            grid,
            values: vec![value; grid.cells()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.cells(), "value count must match grid");
        assert!(
            values.iter().all(|v| v.is_finite()),
            "field values must be finite"
        );
        Self { grid, values }
    }

    /// Sample `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.cells()).map(|i| f(grid.coords(i))).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "fields must share a grid");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(self.grid, values)
    }

    /// `self + c * other`, elementwise.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Integral over the torus: cell sum times cell volume.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// L2 pairing `integral of self * other`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "fields must share a grid");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Copy with the spatial mean removed (the constant gauge used for
    /// potentials and first variations).
    pub fn zero_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// L1 distance `integral of |self − other|`.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "fields must share a grid");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// Forward-difference staggered gradient: component `a` on the face
    /// between a cell and its forward neighbour along axis `a`.
    pub fn gradient(&self) -> VectorField {
        let g = self.grid;
        let inv_h = 1.0 / g.spacing();
        let comps = (0..g.dim())
            .map(|axis| {
                (0..g.cells())
                    .map(|i| (self.values[g.fwd(i, axis)] - self.values[i]) * inv_h)
                    .collect()
            })
            .collect();
        VectorField { grid: g, comps }
    }

    /// Face weights by arithmetic average of the two adjacent cells.
    pub fn face_average(&self) -> VectorField {
        let g = self.grid;
        let comps = (0..g.dim())
            .map(|axis| {
                (0..g.cells())
                    .map(|i| 0.5 * (self.values[i] + self.values[g.fwd(i, axis)]))
                    .collect()
            })
            .collect();
        VectorField { grid: g, comps }
    }

    /// Cyclic shift by one cell along `axis` (used by translation tests).
    pub fn shift(&self, axis: usize) -> Self {
        let g = self.grid;
        let values = (0..g.cells()).map(|i| self.values[g.fwd(i, axis)]).collect();
        Self::from_values(g, values)
    }

    /// Write as CSV: header `# grid d=<d> n=<n>`, one value per line,
    /// row-major in 2D.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# grid d={} n={}", self.grid.dim(), self.grid.n());
        for v in &self.values {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let parse_err = || Error::Format {
            what: "scalar field CSV header",
            detail: header.to_string(),
        };
        let rest = header.strip_prefix("# grid d=").ok_or_else(parse_err)?;
        let (d, n) = rest.split_once(" n=").ok_or_else(parse_err)?;
        let dim: usize = d.trim().parse().map_err(|_| parse_err())?;
        let n: usize = n.trim().parse().map_err(|_| parse_err())?;
        let grid = Grid::new(dim, n)?;
        let mut values = Vec::with_capacity(grid.cells());
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(line.parse().map_err(|_| Error::Format {
                what: "scalar field CSV value",
                detail: line.to_string(),
            })?);
        }
        if values.len() != grid.cells() {
            return Err(Error::Format {
                what: "scalar field CSV length",
                detail: format!("expected {} values, got {}", grid.cells(), values.len()),
            });
        }
        Ok(Self::from_values(grid, values))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Staggered vector field: component `a` lives on faces normal to axis `a`,
/// one face per cell (the face ahead of the cell along that axis).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            comps: vec![vec![0.0; grid.cells()]; grid.dim()],
        }
    }

    pub fn from_components(grid: Grid, comps: Vec<Vec<f64>>) -> Self {
        assert_eq!(comps.len(), grid.dim(), "one component per axis");
        for c in &comps {
            assert_eq!(c.len(), grid.cells(), "component length must match grid");
            assert!(c.iter().all(|v| v.is_finite()), "face values must be finite");
        }
        Self { grid, comps }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.comps[axis]
    }

    /// Backward-difference divergence, the exact negative adjoint of
    /// [`ScalarField::gradient`]: for all f, v
    /// `inner(f, div v) = −sum_faces(grad f · v) · cell_volume`.
    pub fn divergence(&self) -> ScalarField {
        let g = self.grid;
        let inv_h = 1.0 / g.spacing();
        let mut values = vec![0.0; g.cells()];
        for (axis, comp) in self.comps.iter().enumerate() {
            for (i, value) in values.iter_mut().enumerate() {
                *value += (comp[i] - comp[g.bwd(i, axis)]) * inv_h;
            }
        }
        ScalarField::from_values(g, values)
    }

    /// Face-by-face product, e.g. density weights times a gradient.
    pub fn face_multiply(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "fields must share a grid");
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x * y).collect())
            .collect();
        Self {
            grid: self.grid,
            comps,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let comps = self
            .comps
            .iter()
            .map(|comp| comp.iter().map(|&v| c * v).collect())
            .collect();
        Self {
            grid: self.grid,
            comps,
        }
    }

    /// Sum over all faces of the componentwise product, times cell volume.
    /// This is the face-quadrature dual of [`ScalarField::inner`].
    pub fn face_inner(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "fields must share a grid");
        let mut acc = 0.0;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            acc += a.iter().zip(b).map(|(&x, &y)| x * y).sum::<f64>();
        }
        acc * self.grid.cell_volume()
    }

    /// Squared magnitude averaged back to cells: per axis the mean of the
    /// squared values on the two faces adjacent to the cell. This is the
    /// cell-centered `|v|^2` used by the kinetic term and the Fisher
    /// variation, chosen so both share one averaging convention.
    pub fn magnitude_squared_cells(&self) -> ScalarField {
        let g = self.grid;
        let mut values = vec![0.0; g.cells()];
        for (axis, comp) in self.comps.iter().enumerate() {
            for (i, value) in values.iter_mut().enumerate() {
                let fwd = comp[i];
                let bwd = comp[g.bwd(i, axis)];
                *value += 0.5 * (fwd * fwd + bwd * bwd);
            }
        }
        ScalarField::from_values(g, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = std::f64::consts::TAU;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 8).is_err());
        assert!(Grid::new(3, 8).is_err());
        assert!(Grid::new(1, 3).is_err());
        assert!(Grid::new(2, 4).is_ok());
    }

    #[test]
    fn unit_torus_measure() {
        for (d, n) in [(1, 7), (1, 64), (2, 5), (2, 16)] {
            let g = Grid::new(d, n).unwrap();
            let one = ScalarField::constant(g, 1.0);
            assert!((one.integrate() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = Grid::new(2, 8).unwrap();
        let f = ScalarField::constant(g, 3.25);
        assert_eq!(f.gradient().max_abs(), 0.0);
    }

    #[test]
    fn gradient_matches_difference_quotient_of_sine() {
        // Closed-form oracle: the forward difference of sin(2*pi*x) at x
        // is (sin(2*pi*(x+h)) - sin(2*pi*x))/h; at x = 0 this is sin(2*pi*h)/h.
        let n = 64;
        let g = grid1(n);
        let h = g.spacing();
        let f = ScalarField::from_fn(g, |x| (TAU * x[0]).sin());
        let grad = f.gradient();
        for i in 0..n {
            let x = i as f64 * h;
            let expected = ((TAU * (x + h)).sin() - (TAU * x).sin()) / h;
            assert!((grad.component(0)[i] - expected).abs() < 1e-12);
        }
        assert!((grad.component(0)[0] - (TAU * h).sin() / h).abs() < 1e-12);
    }

    #[test]
    fn spike_gradient_hits_adjacent_faces_only() {
        // Direct stencil evaluation: a unit spike at cell 0 yields +-1/h on
        // the two faces touching that cell.
        let n = 8;
        let g = grid1(n);
        let mut values = vec![0.0; n];
        values[0] = 1.0;
        let grad = ScalarField::from_values(g, values).gradient();
        let c = grad.component(0);
        assert_eq!(c[0], -8.0);
        assert_eq!(c[n - 1], 8.0);
        assert!(c[1..n - 1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spike_divergence_two_cells() {
        let n = 8;
        let g = grid1(n);
        let mut v = VectorField::zeros(g);
        v.component_mut(0)[0] = 1.0;
        let div = v.divergence();
        assert_eq!(div.values()[0], 8.0);
        assert_eq!(div.values()[1], -8.0);
        assert!((div.integrate()).abs() < 1e-14);
    }

    #[test]
    fn integrate_kills_fourier_modes() {
        // Trapezoid quadrature on a periodic grid is exact for integer modes.
        for n in [8, 31, 64] {
            let g = grid1(n);
            let f = ScalarField::from_fn(g, |x| (TAU * x[0]).sin());
            assert!(f.integrate().abs() < 1e-13);
        }
    }

    #[test]
    fn inner_product_basics() {
        let g = grid1(64);
        let s = ScalarField::from_fn(g, |x| (TAU * x[0]).sin());
        let zero = ScalarField::zeros(g);
        let one = ScalarField::constant(g, 1.0);
        assert_eq!(s.inner(&zero), 0.0);
        assert!((one.inner(&one) - 1.0).abs() < 1e-14);
        // Exact quadrature of sin^2 on the periodic grid.
        assert!((s.inner(&s) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn adjointness_of_gradient_and_divergence() {
        // sum f * div(v) * vol == -sum grad(f) . v * vol, exactly to rounding.
        for (d, n) in [(1, 16), (2, 8)] {
            let g = Grid::new(d, n).unwrap();
            let f = ScalarField::from_fn(g, |x| {
                (TAU * x[0]).sin() + 0.3 * (2.0 * TAU * (x[0] + x[1])).cos()
            });
            let mut v = VectorField::zeros(g);
            for axis in 0..d {
                for (i, val) in v.component_mut(axis).iter_mut().enumerate() {
                    *val = ((i * (axis + 2)) as f64 * 0.7).sin();
                }
            }
            let lhs = f.inner(&v.divergence());
            let rhs = -f.gradient().face_inner(&v);
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn divergence_theorem_on_torus() {
        let g = Grid::new(2, 12).unwrap();
        let mut v = VectorField::zeros(g);
        for axis in 0..2 {
            for (i, val) in v.component_mut(axis).iter_mut().enumerate() {
                *val = ((i as f64) * 1.3 + axis as f64).cos();
            }
        }
        assert!(v.divergence().integrate().abs() < 1e-12);
    }

    #[test]
    fn shift_commutes_with_gradient() {
        let g = grid1(32);
        let f = ScalarField::from_fn(g, |x| (TAU * x[0]).sin() + (2.0 * TAU * x[0]).cos());
        let a = f.shift(0).gradient();
        let b = f.gradient();
        for i in 0..32 {
            let shifted = b.component(0)[g.fwd(i, 0)];
            assert!((a.component(0)[i] - shifted).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(2, 5).unwrap();
        let f = ScalarField::from_fn(g, |x| 1.0 + 0.25 * (TAU * x[0]).cos() * (TAU * x[1]).sin());
        let back = ScalarField::from_csv(&f.to_csv()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn csv_rejects_malformed_header() {
        assert!(ScalarField::from_csv("nonsense\n1\n2\n").is_err());
    }

    #[test]
    fn min_image_wraps() {
        let g = grid1(8);
        let d = g.min_image([0.9, 0.0], [0.1, 0.0]);
        assert!((d[0] - 0.2).abs() < 1e-15);
    }
}
