//! Zero-mean Neumann Poisson solves and the dual norm built on them.
//!
//! `solve_k(z)` returns the mean-zero `w` with `-Δ_h w = z - <z>`. The dual
//! norm is `sqrt(grad_sq_norm(w)) + |<z>|`: a sum of the two parts, not the
//! root of their squares.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{grad_sq_norm, mean, Field, Grid};
use crate::linalg::CgProblem;

pub const DEFAULT_POISSON_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub potential: Field,
    /// `||Δ_h w + (z - <z>)||_2` at exit.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Default iteration cap: ten sweeps per cell.
pub fn default_max_iterations(grid: &Grid) -> usize {
    10 * grid.len()
}

pub fn solve_k(z: &Field, tol: f64) -> Result<PoissonSolution> {
    solve_k_with_limit(z, tol, default_max_iterations(z.grid()))
}

pub fn solve_k_with_limit(z: &Field, tol: f64, max_iter: usize) -> Result<PoissonSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("Poisson tolerance must be positive, got {tol}")));
    }
    let grid = *z.grid();
    let zbar = mean(z);
    let rhs: Vec<f64> = z.values().iter().map(|x| x - zbar).collect();
    let mut w = vec![0.0; grid.len()];
    let problem = CgProblem {
        grid: &grid,
        apply: |x: &[f64], out: &mut [f64]| {
            grid.apply_laplacian(x, out);
            out.iter_mut().for_each(|o| *o = -*o);
        },
        project_mean: true,
        max_iter,
        what: "Neumann Poisson solve",
    };
    let outcome = problem.solve(&rhs, &mut w, tol)?;
    Ok(PoissonSolution {
        potential: Field::from_values(grid, w)?,
        residual_norm: outcome.residual,
        iterations: outcome.iterations,
    })
}

/// Direct solve by cosine-transform diagonalization of the Neumann
/// Laplacian. Exact up to round-off on uniform grids.
pub fn solve_k_spectral(z: &Field) -> Field {
    let grid = *z.grid();
    let zbar = mean(z);
    let mut data: Vec<f64> = z.values().iter().map(|x| x - zbar).collect();
    let nx = grid.cells()[0];
    let ny = if grid.dim() == 2 { grid.cells()[1] } else { 1 };
    let bx = CosineBasis::new(nx, grid.spacing()[0]);
    let by = (grid.dim() == 2).then(|| CosineBasis::new(ny, grid.spacing()[1]));

    // forward transform along x (rows), then y (columns)
    for j in 0..ny {
        bx.forward(&mut data[j * nx..(j + 1) * nx]);
    }
    let mut col = vec![0.0; ny];
    if let Some(by) = &by {
        for i in 0..nx {
            for j in 0..ny {
                col[j] = data[j * nx + i];
            }
            by.forward(&mut col);
            for j in 0..ny {
                data[j * nx + i] = col[j];
            }
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let mu = bx.eigen[i] + by.as_ref().map_or(0.0, |b| b.eigen[j]);
            let c = &mut data[j * nx + i];
            *c = if i == 0 && j == 0 { 0.0 } else { *c / mu };
        }
    }
    if let Some(by) = &by {
        for i in 0..nx {
            for j in 0..ny {
                col[j] = data[j * nx + i];
            }
            by.inverse(&mut col);
            for j in 0..ny {
                data[j * nx + i] = col[j];
            }
        }
    }
    for j in 0..ny {
        bx.inverse(&mut data[j * nx..(j + 1) * nx]);
    }
    Field::from_values(grid, data).expect("same grid")
}

/// Dense cosine basis `cos(pi k (j + 1/2) / n)` with the eigenvalues of
/// `-Δ_h` along one axis.
struct CosineBasis {
    n: usize,
    table: Vec<f64>,
    eigen: Vec<f64>,
}

impl CosineBasis {
    fn new(n: usize, h: f64) -> Self {
        let mut table = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                table[k * n + j] = (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
            }
        }
        let eigen = (0..n)
            .map(|k| 4.0 / (h * h) * (PI * k as f64 / (2.0 * n as f64)).sin().powi(2))
            .collect();
        CosineBasis { n, table, eigen }
    }

    fn forward(&self, v: &mut [f64]) {
        let n = self.n;
        let out: Vec<f64> = (0..n)
            .map(|k| {
                let norm = if k == 0 { n as f64 } else { n as f64 / 2.0 };
                self.table[k * n..(k + 1) * n]
                    .iter()
                    .zip(v.iter())
                    .map(|(c, x)| c * x)
                    .sum::<f64>()
                    / norm
            })
            .collect();
        v.copy_from_slice(&out);
    }

    fn inverse(&self, v: &mut [f64]) {
        let n = self.n;
        let out: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|k| self.table[k * n + j] * v[k]).sum())
            .collect();
        v.copy_from_slice(&out);
    }
}

/// `||z||_(H^1)' = ||grad K[z - <z>]||_2 + |<z>|`.
pub fn h1_dual_norm(z: &Field, tol: f64) -> Result<f64> {
    let sol = solve_k(z, tol)?;
    Ok(grad_sq_norm(&sol.potential).sqrt() + mean(z).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner, integrate, laplacian_neumann, l2_norm};
    use proptest::prelude::*;

    fn eigenvalue(h: f64) -> f64 {
        (4.0 / (h * h)) * (PI * h / 2.0).sin().powi(2)
    }

    #[test]
    fn zero_rhs_gives_zero_potential() {
        let g = Grid::interval(1.0, 16).unwrap();
        let sol = solve_k(&Field::zeros(g), 1e-10).unwrap();
        assert!(sol.potential.values().iter().all(|&x| x == 0.0));
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let g = Grid::interval(1.0, 4).unwrap();
        assert!(solve_k(&Field::zeros(g), 0.0).is_err());
    }

    #[test]
    fn cosine_mode_is_inverted_exactly() {
        let g = Grid::interval(1.0, 64).unwrap();
        let z = Field::from_fn(g, |x| (PI * x[0]).cos());
        let lam = eigenvalue(1.0 / 64.0);
        let sol = solve_k(&z, 1e-10).unwrap();
        assert!(sol.residual_norm <= 1e-10);
        for (w, zj) in sol.potential.values().iter().zip(z.values()) {
            assert!((w - zj / lam).abs() < 1e-9);
        }
        assert!(mean(&sol.potential).abs() < 1e-12);
    }

    #[test]
    fn dual_norm_of_cosine_mode() {
        let g = Grid::interval(1.0, 64).unwrap();
        let z = Field::from_fn(g, |x| (PI * x[0]).cos());
        let expected = (1.0 / (2.0 * eigenvalue(1.0 / 64.0))).sqrt();
        assert!((h1_dual_norm(&z, 1e-12).unwrap() - expected).abs() < 1e-10);
        let shifted = Field::from_fn(g, |x| 1.0 + 0.5 * (PI * x[0]).cos());
        let got = h1_dual_norm(&shifted, 1e-12).unwrap();
        assert!((got - (1.0 + 0.5 * expected)).abs() < 1e-10);
        // continuum values
        assert!((expected - 1.0 / (PI * 2f64.sqrt())).abs() < 1e-4);
        assert!((got - 1.11254).abs() < 1e-4);
    }

    #[test]
    fn constant_dual_norm_is_abs_value() {
        let g = Grid::rectangle([1.0, 2.0], [6, 5]).unwrap();
        let n = h1_dual_norm(&Field::constant(g, -3.5), 1e-10).unwrap();
        assert!((n - 3.5).abs() < 1e-14);
    }

    #[test]
    fn spectral_and_iterative_paths_agree() {
        for g in [
            Grid::interval(2.0, 37).unwrap(),
            Grid::rectangle([1.0, 1.5], [12, 9]).unwrap(),
        ] {
            let z = Field::from_fn(g, |x| (3.0 * x[0]).sin() + x[1] * x[1] - 0.3 * x[0]);
            let a = solve_k(&z, 1e-12).unwrap().potential;
            let b = solve_k_spectral(&z);
            let diff = a.sub(&b).unwrap();
            assert!(l2_norm(&diff) < 1e-10, "{}", l2_norm(&diff));
            // defining equation
            let res = laplacian_neumann(&b).add(&z.shift(-mean(&z))).unwrap();
            assert!(l2_norm(&res) < 1e-9);
        }
    }

    fn random_field(g: Grid, vals: &[f64]) -> Field {
        Field::from_values(g, vals[..g.len()].to_vec()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn residual_meets_tolerance(vals in proptest::collection::vec(-5.0f64..5.0, 30)) {
            let g = Grid::rectangle([1.0, 1.0], [6, 5]).unwrap();
            let z = random_field(g, &vals);
            let sol = solve_k(&z, 1e-10).unwrap();
            let res = laplacian_neumann(&sol.potential).add(&z.shift(-mean(&z))).unwrap();
            prop_assert!(l2_norm(&res) <= 1e-10);
            prop_assert!(mean(&sol.potential).abs() <= 1e-12);
        }

        #[test]
        fn dual_norm_is_a_norm(
            a in proptest::collection::vec(-5.0f64..5.0, 24),
            b in proptest::collection::vec(-5.0f64..5.0, 24),
            c in -3.0f64..3.0,
        ) {
            let g = Grid::interval(1.0, 24).unwrap();
            let (za, zb) = (random_field(g, &a), random_field(g, &b));
            let na = h1_dual_norm(&za, 1e-12).unwrap();
            let nb = h1_dual_norm(&zb, 1e-12).unwrap();
            let nab = h1_dual_norm(&za.add(&zb).unwrap(), 1e-12).unwrap();
            prop_assert!(nab <= na + nb + 1e-9);
            let nc = h1_dual_norm(&za.scale(c), 1e-12).unwrap();
            prop_assert!((nc - c.abs() * na).abs() <= 1e-9 * (1.0 + na));
        }

        #[test]
        fn duality_and_linearity(
            a in proptest::collection::vec(-5.0f64..5.0, 20),
            b in proptest::collection::vec(-5.0f64..5.0, 20),
        ) {
            let g = Grid::rectangle([1.0, 2.0], [5, 4]).unwrap();
            let (za, zb) = (random_field(g, &a), random_field(g, &b));
            let ka = solve_k(&za, 1e-12).unwrap().potential;
            let kb = solve_k(&zb, 1e-12).unwrap().potential;
            let zc = za.shift(-mean(&za));
            let lhs = grad_sq_norm(&ka);
            let rhs = inner(&zc, &ka).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs));
            let kab = solve_k(&za.add(&zb).unwrap(), 1e-12).unwrap().potential;
            let diff = kab.sub(&ka.add(&kb).unwrap()).unwrap();
            prop_assert!(l2_norm(&diff) <= 1e-9);
            prop_assert!(integrate(&kab).abs() <= 1e-11);
        }
    }
}
