//! Uniform cell-centered grids on an interval or a rectangle, cell-average
//! fields, and the discrete calculus every other module is built on.
//!
//! The Neumann Laplacian is assembled in flux form: each interior face
//! carries `(f[right] - f[left]) / h`, boundary faces carry nothing. The
//! face-gradient energy [`grad_sq_norm`] is its exact summation-by-parts
//! partner, so `grad_sq_norm(f) == -integrate(f * laplacian_neumann(f))`
//! up to round-off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell-centered lattice. Cells are stored with the x index fastest.
///
/// For `dim == 1` the second axis is a single dummy cell of unit size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    extent: [f64; 2],
    cells: [usize; 2],
    spacing: [f64; 2],
}

impl Grid {
    pub fn new(dim: usize, extent: &[f64], cells: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if extent.len() != dim || cells.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} extent and cell entries, got {} and {}",
                extent.len(),
                cells.len()
            )));
        }
        let mut e = [1.0; 2];
        let mut n = [1usize; 2];
        let mut h = [1.0; 2];
        for k in 0..dim {
            if !(extent[k].is_finite() && extent[k] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "extent along axis {k} must be positive and finite, got {}",
                    extent[k]
                )));
            }
            if cells[k] == 0 {
                return Err(Error::InvalidGrid(format!("axis {k} has zero cells")));
            }
            e[k] = extent[k];
            n[k] = cells[k];
            h[k] = extent[k] / cells[k] as f64;
        }
        Ok(Grid {
            dim,
            extent: e,
            cells: n,
            spacing: h,
        })
    }

    pub fn interval(length: f64, cells: usize) -> Result<Self> {
        Self::new(1, &[length], &[cells])
    }

    pub fn rectangle(extent: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        Self::new(2, &extent, &cells)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dim]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn domain_volume(&self) -> f64 {
        self.extent().iter().product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cell center coordinates; the second entry is 0 in 1D.
    pub fn center(&self, index: usize) -> [f64; 2] {
        let i = index % self.cells[0];
        let j = index / self.cells[0];
        let x = (i as f64 + 0.5) * self.spacing[0];
        let y = if self.dim == 2 {
            (j as f64 + 0.5) * self.spacing[1]
        } else {
            0.0
        };
        [x, y]
    }

    /// Applies the Neumann Laplacian to raw cell values.
    pub(crate) fn apply_laplacian(&self, f: &[f64], out: &mut [f64]) {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(out.len(), self.len());
        out.iter_mut().for_each(|o| *o = 0.0);
        let [nx, ny] = self.cells;
        let hx = self.spacing[0];
        let inv_hx2 = 1.0 / (hx * hx);
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx - 1 {
                let q = (f[row + i + 1] - f[row + i]) * inv_hx2;
                out[row + i] += q;
                out[row + i + 1] -= q;
            }
        }
        if self.dim == 2 {
            let hy = self.spacing[1];
            let inv_hy2 = 1.0 / (hy * hy);
            for j in 0..ny - 1 {
                for i in 0..nx {
                    let a = j * nx + i;
                    let b = a + nx;
                    let q = (f[b] - f[a]) * inv_hy2;
                    out[a] += q;
                    out[b] -= q;
                }
            }
        }
    }

    pub(crate) fn face_gradient_energy(&self, f: &[f64]) -> f64 {
        let [nx, ny] = self.cells;
        let vol = self.cell_volume();
        let hx = self.spacing[0];
        let mut acc = 0.0;
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx - 1 {
                let g = (f[row + i + 1] - f[row + i]) / hx;
                acc += g * g;
            }
        }
        if self.dim == 2 {
            let hy = self.spacing[1];
            for j in 0..ny - 1 {
                for i in 0..nx {
                    let a = j * nx + i;
                    let g = (f[a + nx] - f[a]) / hy;
                    acc += g * g;
                }
            }
        }
        acc * vol
    }

    /// Volume-weighted inner product of raw cell arrays.
    pub(crate) fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.cell_volume()
    }
}

/// Cell averages of a scalar quantity over a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every cell is at least `-1e-14`.
    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&x| x >= -1e-14)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Cellwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
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

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|x| c * x)
    }

    pub fn shift(&self, c: f64) -> Field {
        self.map(|x| x + c)
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Neumann Laplacian with reflected ghost cells, computed as divided
/// differences of face fluxes.
pub fn laplacian_neumann(f: &Field) -> Field {
    let mut out = vec![0.0; f.len()];
    f.grid.apply_laplacian(&f.values, &mut out);
    Field {
        grid: f.grid,
        values: out,
    }
}

/// Midpoint-rule integral over the domain.
pub fn integrate(f: &Field) -> f64 {
    f.values.iter().sum::<f64>() * f.grid.cell_volume()
}

pub fn mean(f: &Field) -> f64 {
    integrate(f) / f.grid.domain_volume()
}

/// Discrete `L^p` norm for `p >= 1`; pass `f64::INFINITY` for the max norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("L^p norm needs p >= 1, got {p}")));
    }
    let vol = f.grid.cell_volume();
    let norm = if p.is_infinite() {
        f.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    } else if p == 1.0 {
        f.values.iter().map(|x| x.abs()).sum::<f64>() * vol
    } else if p == 2.0 {
        (f.values.iter().map(|x| x * x).sum::<f64>() * vol).sqrt()
    } else {
        (f.values.iter().map(|x| x.abs().powf(p)).sum::<f64>() * vol).powf(1.0 / p)
    };
    Ok(norm)
}

/// `L^1` norm, infallible shorthand.
pub fn l1_norm(f: &Field) -> f64 {
    f.values.iter().map(|x| x.abs()).sum::<f64>() * f.grid.cell_volume()
}

/// `L^2` norm, infallible shorthand.
pub fn l2_norm(f: &Field) -> f64 {
    (f.values.iter().map(|x| x * x).sum::<f64>() * f.grid.cell_volume()).sqrt()
}

pub fn linf_norm(f: &Field) -> f64 {
    f.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Squared discrete gradient norm over interior faces.
pub fn grad_sq_norm(f: &Field) -> f64 {
    f.grid.face_gradient_energy(&f.values)
}

/// Volume-weighted inner product of two fields on the same grid.
pub fn inner(a: &Field, b: &Field) -> Result<f64> {
    a.check_same_grid(b)?;
    Ok(a.grid.inner(&a.values, &b.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cos_mode(cells: usize) -> Field {
        let g = Grid::interval(1.0, cells).unwrap();
        Field::from_fn(g, |x| (PI * x[0]).cos())
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(3, &[1.0, 1.0, 1.0], &[2, 2, 2]).is_err());
        assert!(Grid::interval(0.0, 4).is_err());
        assert!(Grid::interval(1.0, 0).is_err());
        assert!(Grid::new(2, &[1.0], &[4]).is_err());
    }

    #[test]
    fn spacing_times_cells_is_extent() {
        let g = Grid::rectangle([2.0, 3.0], [7, 11]).unwrap();
        for k in 0..2 {
            let back = g.spacing()[k] * g.cells()[k] as f64;
            assert!((back - g.extent()[k]).abs() <= 4.0 * f64::EPSILON * g.extent()[k]);
        }
    }

    #[test]
    fn constant_has_zero_laplacian() {
        for g in [
            Grid::interval(1.0, 9).unwrap(),
            Grid::rectangle([2.0, 0.5], [6, 5]).unwrap(),
        ] {
            let lap = laplacian_neumann(&Field::constant(g, 7.0));
            assert!(lap.values().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn cosine_is_a_discrete_eigenvector() {
        let f = cos_mode(64);
        let h = 1.0 / 64.0;
        let lambda = -(4.0 / (h * h)) * (PI * h / 2.0).sin().powi(2);
        let lap = laplacian_neumann(&f);
        for (l, v) in lap.values().iter().zip(f.values()) {
            assert!((l - lambda * v).abs() < 1e-9, "{l} vs {}", lambda * v);
        }
    }

    #[test]
    fn integrals_of_simple_fields() {
        let g = Grid::interval(1.0, 10).unwrap();
        assert!((integrate(&Field::constant(g, 1.0)) - 1.0).abs() < 1e-15);
        let g2 = Grid::rectangle([2.0, 3.0], [4, 5]).unwrap();
        assert!((integrate(&Field::constant(g2, 1.0)) - 6.0).abs() < 1e-14);
        assert!(integrate(&cos_mode(64)).abs() < 1e-14);
    }

    #[test]
    fn mean_of_perturbed_constant() {
        let g = Grid::interval(1.0, 64).unwrap();
        let f = Field::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
        assert!((mean(&f) - 1.0).abs() < 1e-14);
        assert_eq!(mean(&Field::zeros(g)), 0.0);
        assert!((mean(&Field::constant(g, -2.5)) + 2.5).abs() < 1e-15);
    }

    #[test]
    fn norms() {
        let g = Grid::interval(1.0, 4).unwrap();
        let two = Field::constant(g, 2.0);
        assert!((lp_norm(&two, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(lp_norm(&two, f64::INFINITY).unwrap(), 2.0);
        assert!((lp_norm(&two, 3.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(lp_norm(&two, 0.5).is_err());

        // direct summation oracle for sum h cos^2 = 1/2
        let f = cos_mode(64);
        let h = 1.0 / 64.0;
        let direct: f64 = (0..64)
            .map(|j| h * (PI * (j as f64 + 0.5) * h).cos().powi(2))
            .sum();
        assert!((direct - 0.5).abs() < 1e-14);
        assert!((lp_norm(&f, 2.0).unwrap() - 0.5_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gradient_energy_of_cosine() {
        let f = cos_mode(64);
        let h = 1.0 / 64.0;
        let lambda = (4.0 / (h * h)) * (PI * h / 2.0).sin().powi(2);
        assert!((grad_sq_norm(&f) - 0.5 * lambda).abs() < 1e-12 * lambda);
        assert_eq!(grad_sq_norm(&Field::constant(*f.grid(), 3.0)), 0.0);
    }

    #[test]
    fn center_ordering_is_x_fastest() {
        let g = Grid::rectangle([1.0, 2.0], [4, 2]).unwrap();
        assert_eq!(g.center(1), [0.375, 0.5]);
        assert_eq!(g.center(5), [0.375, 1.5]);
    }
}
