//! Conjugate-gradient iteration for the symmetric operators of the scheme.

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug)]
pub(crate) struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
}

pub(crate) struct CgProblem<'a, F> {
    pub grid: &'a Grid,
    pub apply: F,
    /// Keep every iterate in the mean-zero subspace.
    pub project_mean: bool,
    pub max_iter: usize,
    pub what: &'static str,
}

fn project(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<F: Fn(&[f64], &mut [f64])> CgProblem<'_, F> {
    fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64], scratch: &mut [f64]) -> f64 {
        (self.apply)(x, scratch);
        for ((ri, bi), ai) in r.iter_mut().zip(b).zip(scratch.iter()) {
            *ri = bi - ai;
        }
        if self.project_mean {
            project(r);
        }
        self.grid.inner(r, r).sqrt()
    }

    /// Solves `A x = b` in place until the volume-weighted L2 residual is at
    /// most `target`. The convergence test always uses a freshly computed
    /// residual, never the recursively updated one.
    pub fn solve(&self, b: &[f64], x: &mut [f64], target: f64) -> Result<CgOutcome> {
        let n = b.len();
        let vol = self.grid.cell_volume();
        let mut r = vec![0.0; n];
        let mut ap = vec![0.0; n];
        if self.project_mean {
            project(x);
        }
        let mut res = self.residual(b, x, &mut r, &mut ap);
        if res <= target {
            return Ok(CgOutcome { iterations: 0, residual: res });
        }
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let mut it = 0;
        while it < self.max_iter {
            it += 1;
            (self.apply)(&p, &mut ap);
            if self.project_mean {
                project(&mut ap);
            }
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rr / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if self.project_mean {
                project(x);
                project(&mut r);
            }
            let rr_new = dot(&r, &r);
            if (rr_new * vol).sqrt() <= target {
                res = self.residual(b, x, &mut r, &mut ap);
                if res <= target {
                    return Ok(CgOutcome { iterations: it, residual: res });
                }
                // recursive residual drifted; restart from the true one
                p.copy_from_slice(&r);
                rr = dot(&r, &r);
                continue;
            }
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            if self.project_mean {
                project(&mut p);
            }
            rr = rr_new;
        }
        res = self.residual(b, x, &mut r, &mut ap);
        if res <= target {
            return Ok(CgOutcome { iterations: it, residual: res });
        }
        Err(Error::NotConverged {
            what: self.what,
            iterations: it,
            residual: res,
            target,
        })
    }
}
