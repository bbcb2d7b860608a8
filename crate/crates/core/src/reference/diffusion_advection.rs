//! Steady diffusion–advection reference on the unit square.
//!
//! Exponentially fitted five-point scheme: central advection with the
//! diffusion coefficient raised to `μ·Pe·coth(Pe)`, `Pe = b h / 2μ`, which
//! keeps the matrix monotone and resolves exponential layers. The linear
//! system is solved by BiCGSTAB with an ILU(0) preconditioner.

use crate::error::{Error, Result};

use super::grid::Grid2;

pub const MU: f64 = 1e-2;
pub const VELOCITY: [f64; 2] = [1.0, 1.0];
pub const SOURCE: f64 = 1.0;

const TOL: f64 = 1e-12;
const MAX_ITERS: usize = 20_000;

/// Constant five-point stencil on an `m × m` interior grid.
struct Stencil {
    m: usize,
    center: f64,
    west: f64,
    east: f64,
    south: f64,
    north: f64,
}

impl Stencil {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                let mut acc = self.center * x[k];
                if i > 0 {
                    acc += self.west * x[k - m];
                }
                if i + 1 < m {
                    acc += self.east * x[k + m];
                }
                if j > 0 {
                    acc += self.south * x[k - 1];
                }
                if j + 1 < m {
                    acc += self.north * x[k + 1];
                }
                y[k] = acc;
            }
        }
    }

    /// Pivots of the ILU(0) factorization.
    fn ilu_pivots(&self) -> Vec<f64> {
        let m = self.m;
        let mut d = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                let mut v = self.center;
                if i > 0 {
                    v -= self.west * self.east / d[k - m];
                }
                if j > 0 {
                    v -= self.south * self.north / d[k - 1];
                }
                d[k] = v;
            }
        }
        d
    }

    fn precondition(&self, d: &[f64], r: &[f64], z: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                let mut v = r[k];
                if i > 0 {
                    v -= self.west * z[k - m];
                }
                if j > 0 {
                    v -= self.south * z[k - 1];
                }
                z[k] = v / d[k];
            }
        }
        for i in (0..m).rev() {
            for j in (0..m).rev() {
                let k = i * m + j;
                let mut v = 0.0;
                if i + 1 < m {
                    v += self.east * z[k + m];
                }
                if j + 1 < m {
                    v += self.north * z[k + 1];
                }
                z[k] -= v / d[k];
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bicgstab(a: &Stencil, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    let piv = a.ilu_pivots();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let r_hat = r.clone();
    let bnorm = dot(rhs, rhs).sqrt();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..MAX_ITERS {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(Error::LinearSolver("BiCGSTAB breakdown (rho = 0)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        a.precondition(&piv, &p, &mut ph);
        a.apply(&ph, &mut v);
        alpha = rho_new / dot(&r_hat, &v);
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if dot(&s, &s).sqrt() <= TOL * bnorm {
            for k in 0..n {
                x[k] += alpha * ph[k];
            }
            return Ok(x);
        }
        a.precondition(&piv, &s, &mut sh);
        a.apply(&sh, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for k in 0..n {
            x[k] += alpha * ph[k] + omega * sh[k];
            r[k] = s[k] - omega * t[k];
        }
        rho = rho_new;
        if dot(&r, &r).sqrt() <= TOL * bnorm {
            return Ok(x);
        }
        if !omega.is_finite() || omega == 0.0 {
            return Err(Error::LinearSolver("BiCGSTAB breakdown (omega)".into()));
        }
    }
    Err(Error::LinearSolver(format!(
        "BiCGSTAB did not converge in {MAX_ITERS} iterations"
    )))
}

/// `μ·Pe·coth(Pe)` for `Pe = |b| h / 2μ`.
fn fitted_diffusion(mu: f64, b: f64, h: f64) -> f64 {
    let pe = b.abs() * h / (2.0 * mu);
    if pe < 1e-8 {
        mu
    } else {
        mu * pe / pe.tanh()
    }
}

/// Solution on `[0, 1]²` with `intervals` intervals per axis; grid axes are
/// `(x1, x2)` and include the boundary.
pub fn diffusion_advection_fd(intervals: usize) -> Result<Grid2> {
    if intervals < 4 {
        return Err(Error::InvalidConfig("diffusion-advection grid too coarse".into()));
    }
    let h = 1.0 / intervals as f64;
    let m = intervals - 1;
    let [b1, b2] = VELOCITY;
    let e1 = fitted_diffusion(MU, b1, h) / (h * h);
    let e2 = fitted_diffusion(MU, b2, h) / (h * h);
    let stencil = Stencil {
        m,
        center: 2.0 * e1 + 2.0 * e2,
        west: -e1 - b1 / (2.0 * h),
        east: -e1 + b1 / (2.0 * h),
        south: -e2 - b2 / (2.0 * h),
        north: -e2 + b2 / (2.0 * h),
    };
    let u = bicgstab(&stencil, &vec![SOURCE; m * m])?;
    let nx = intervals + 1;
    let mut values = vec![0.0; nx * nx];
    for i in 0..m {
        for j in 0..m {
            values[(i + 1) * nx + j + 1] = u[i * m + j];
        }
    }
    Grid2::new((0.0, 1.0), (0.0, 1.0), nx, nx, values)
}
