//! Allen–Cahn reference: Crank–Nicolson in time, second-order differences in
//! space, Newton's method with a tridiagonal solve at every step.

use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::grid::Grid2;

pub const DIFFUSION: f64 = 1e-3;
pub const BOUNDARY: f64 = -1.0;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX: usize = 30;

fn reaction(u: f64) -> f64 {
    5.0 * (u - u * u * u)
}

fn reaction_du(u: f64) -> f64 {
    5.0 * (1.0 - 3.0 * u * u)
}

/// Solve `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` in place of `d`.
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) -> Result<()> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut beta = b[0];
    if beta == 0.0 {
        return Err(Error::LinearSolver("zero pivot in tridiagonal solve".into()));
    }
    d[0] /= beta;
    for i in 1..n {
        cp[i - 1] = c[i - 1] / beta;
        beta = b[i] - a[i] * cp[i - 1];
        if beta == 0.0 {
            return Err(Error::LinearSolver("zero pivot in tridiagonal solve".into()));
        }
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
    Ok(())
}

/// Solution on `[0, 1] × [−1, 1]` with `intervals` spatial intervals and
/// `steps` time steps; grid axes are `(t, x)`.
pub fn allen_cahn_fd(intervals: usize, steps: usize) -> Result<Grid2> {
    if intervals < 4 || steps < 1 {
        return Err(Error::InvalidConfig("Allen-Cahn grid too coarse".into()));
    }
    let nx = intervals + 1;
    let h = 2.0 / intervals as f64;
    let dt = 1.0 / steps as f64;
    let k = DIFFUSION / (h * h);
    let x = |i: usize| -1.0 + h * i as f64;

    let mut u: Vec<f64> = (0..nx).map(|i| x(i) * x(i) * (PI * x(i)).cos()).collect();
    u[0] = BOUNDARY;
    u[nx - 1] = BOUNDARY;
    let mut values = Vec::with_capacity((steps + 1) * nx);
    values.extend_from_slice(&u);

    let m = nx - 2;
    let mut explicit = vec![0.0; m];
    let mut v = u.clone();
    let (mut a, mut b, mut c, mut r) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for step in 0..steps {
        for i in 1..nx - 1 {
            explicit[i - 1] = u[i] + 0.5 * dt * (k * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + reaction(u[i]));
        }
        let mut converged = false;
        for _ in 0..NEWTON_MAX {
            let mut worst: f64 = 0.0;
            for i in 1..nx - 1 {
                let lap = k * (v[i - 1] - 2.0 * v[i] + v[i + 1]);
                let f = v[i] - 0.5 * dt * (lap + reaction(v[i])) - explicit[i - 1];
                worst = worst.max(f.abs());
                r[i - 1] = -f;
                a[i - 1] = -0.5 * dt * k;
                c[i - 1] = -0.5 * dt * k;
                b[i - 1] = 1.0 - 0.5 * dt * (-2.0 * k + reaction_du(v[i]));
            }
            if worst <= NEWTON_TOL {
                converged = true;
                break;
            }
            thomas(&a, &b, &c, &mut r)?;
            for i in 1..nx - 1 {
                v[i] += r[i - 1];
            }
            if v.iter().any(|z| !z.is_finite()) {
                break;
            }
        }
        if !converged {
            return Err(Error::Newton(format!(
                "Allen-Cahn step {} of {steps} (h = {h}, dt = {dt})",
                step + 1
            )));
        }
        u.copy_from_slice(&v);
        values.extend_from_slice(&u);
    }
    Grid2::new((0.0, 1.0), (-1.0, 1.0), steps + 1, nx, values)
}
