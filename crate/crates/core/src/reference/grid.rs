use crate::error::{Error, Result};

/// Values on a uniform tensor grid, `values[i * ny + j]` at
/// `(x0 + i·hx, y0 + j·hy)`, with Catmull–Rom bicubic interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    let a = -0.5 * p[0] + 1.5 * p[1] - 1.5 * p[2] + 0.5 * p[3];
    let b = p[0] - 2.5 * p[1] + 2.0 * p[2] - 0.5 * p[3];
    let c = -0.5 * p[0] + 0.5 * p[2];
    ((a * t + b) * t + c) * t + p[1]
}

impl Grid2 {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidConfig("grid needs at least 2 points per axis".into()));
        }
        if values.len() != nx * ny {
            return Err(Error::mismatch("grid values", nx * ny, values.len()));
        }
        Ok(Self {
            x_range,
            y_range,
            nx,
            ny,
            values,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_range.0 + (self.y_range.1 - self.y_range.0) * j as f64 / (self.ny - 1) as f64
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ny + j]
    }

    fn locate(v: f64, range: (f64, f64), n: usize) -> (usize, f64) {
        let s = ((v - range.0) / (range.1 - range.0) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        (i, s - i as f64)
    }

    /// Bicubic interpolant; points outside the grid are clamped to it.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (i, tx) = Self::locate(x, self.x_range, self.nx);
        let (j, ty) = Self::locate(y, self.y_range, self.ny);
        let clamp = |k: isize, n: usize| k.clamp(0, n as isize - 1) as usize;
        let mut rows = [0.0; 4];
        for (a, row) in rows.iter_mut().enumerate() {
            let ii = clamp(i as isize + a as isize - 1, self.nx);
            let p = [-1isize, 0, 1, 2].map(|b| self.at(ii, clamp(j as isize + b, self.ny)));
            *row = catmull_rom(p, ty);
        }
        catmull_rom(rows, tx)
    }

    /// Largest difference at the nodes of `self` against another grid's
    /// interpolant, skipping the outermost `margin` nodes.
    pub fn max_difference(&self, other: &Grid2, margin: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in margin..self.nx - margin {
            for j in margin..self.ny - margin {
                worst = worst.max((self.at(i, j) - other.eval(self.x(i), self.y(j))).abs());
            }
        }
        worst
    }
}
