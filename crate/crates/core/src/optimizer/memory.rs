//! Secant pairs and the limited-memory inverse Hessian.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimum cosine between `s` and `y` for a pair to be stored.
pub const CURVATURE_EPS: f64 = 1e-10;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecantMemory {
    capacity: usize,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    gamma: f64,
}

impl SecantMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            s: VecDeque::with_capacity(capacity),
            y: VecDeque::with_capacity(capacity),
            gamma: 1.0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Scaling of the initial matrix `B⁰ = γI`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Stored pairs, oldest first.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.s.iter().zip(&self.y).map(|(s, y)| (s.as_slice(), y.as_slice()))
    }

    pub fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.gamma = 1.0;
    }

    /// Store `(s, y)` if it passes the curvature test. Returns whether the
    /// pair was accepted.
    pub fn update(&mut self, s: &[f64], y: &[f64]) -> bool {
        let sy = dot(s, y);
        let ok = sy.is_finite() && sy > CURVATURE_EPS * norm(s) * norm(y);
        if !ok || self.capacity == 0 {
            return false;
        }
        if self.s.len() == self.capacity {
            self.s.pop_front();
            self.y.pop_front();
        }
        self.s.push_back(s.to_vec());
        self.y.push_back(y.to_vec());
        self.gamma = dot(y, y) / sy;
        true
    }

    /// `p = −H g` by the two-loop recursion with `H⁰ = I/γ`.
    pub fn direction(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss);
        }
        let k = self.len();
        let mut q = g.to_vec();
        let mut alpha = vec![0.0; k];
        let rho: Vec<f64> = self.pairs().map(|(s, y)| 1.0 / dot(s, y)).collect();
        for i in (0..k).rev() {
            alpha[i] = rho[i] * dot(&self.s[i], &q);
            for (qj, yj) in q.iter_mut().zip(&self.y[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        for qj in &mut q {
            *qj /= self.gamma;
        }
        for i in 0..k {
            let beta = rho[i] * dot(&self.y[i], &q);
            for (qj, sj) in q.iter_mut().zip(&self.s[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        for qj in &mut q {
            *qj = -*qj;
        }
        Ok(q)
    }

    /// `p = −B⁻¹ g` from the compact representation
    /// `B = γI − W M⁻¹ Wᵀ`, `W = [γS, Y]`, `M = [[γSᵀS, L], [Lᵀ, −D]]`,
    /// inverted with Sherman–Morrison–Woodbury.
    pub fn compact_direction(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss);
        }
        let k = self.len();
        let n = g.len();
        let gamma = self.gamma;
        if k == 0 {
            return Ok(g.iter().map(|v| -v / gamma).collect());
        }
        let s = DMatrix::from_fn(n, k, |i, j| self.s[j][i]);
        let y = DMatrix::from_fn(n, k, |i, j| self.y[j][i]);
        let sts = s.transpose() * &s;
        let sty = s.transpose() * &y;
        let mut m = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = gamma * sts[(i, j)];
                if i > j {
                    m[(i, k + j)] = sty[(i, j)];
                    m[(k + j, i)] = sty[(i, j)];
                }
            }
            m[(k + i, k + i)] = -sty[(i, i)];
        }
        let mut w = DMatrix::zeros(n, 2 * k);
        w.columns_mut(0, k).copy_from(&(&s * gamma));
        w.columns_mut(k, k).copy_from(&y);
        let gv = DVector::from_column_slice(g);
        let inner = m - (w.transpose() * &w) / gamma;
        let rhs = w.transpose() * &gv;
        let z = inner
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolver("singular compact L-BFGS middle matrix".into()))?;
        let hg = gv / gamma + (&w * z) / (gamma * gamma);
        Ok(hg.iter().map(|v| -v).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_memory_gives_steepest_descent() {
        let m = SecantMemory::new(3);
        assert_eq!(m.direction(&[3.0, -4.0]).unwrap(), vec![-3.0, 4.0]);
        assert_eq!(m.compact_direction(&[3.0, -4.0]).unwrap(), vec![-3.0, 4.0]);
    }

    #[test]
    fn single_pair_by_hand() {
        let mut m = SecantMemory::new(3);
        assert!(m.update(&[1.0, 0.0], &[2.0, 0.0]));
        assert_eq!(m.gamma(), 2.0);
        let p = m.direction(&[1.0, 1.0]).unwrap();
        assert!((p[0] + 0.5).abs() < 1e-15 && (p[1] + 0.5).abs() < 1e-15);
        let pc = m.compact_direction(&[1.0, 1.0]).unwrap();
        assert!((pc[0] + 0.5).abs() < 1e-14 && (pc[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn negative_curvature_is_rejected() {
        let mut m = SecantMemory::new(3);
        assert!(!m.update(&[1.0, 0.0], &[-1.0, 0.0]));
        assert!(!m.update(&[1.0, 0.0], &[0.0, 1.0]));
        assert!(m.is_empty());
        assert_eq!(m.gamma(), 1.0);
    }

    #[test]
    fn oldest_pair_is_evicted() {
        let mut m = SecantMemory::new(3);
        for k in 1..=4 {
            let v = k as f64;
            assert!(m.update(&[v, 0.0], &[v, 1.0]));
        }
        assert_eq!(m.len(), 3);
        let firsts: Vec<f64> = m.pairs().map(|(s, _)| s[0]).collect();
        assert_eq!(firsts, vec![2.0, 3.0, 4.0]);
        // γ from the newest pair: ⟨y,y⟩/⟨y,s⟩ = 17/16
        assert_eq!(m.gamma(), 17.0 / 16.0);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let m = SecantMemory::new(3);
        assert!(m.direction(&[f64::NAN, 0.0]).is_err());
    }
}
