//! Differentiable objectives as seen by the optimizers.

use std::cell::RefCell;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::partition::Partition;

pub trait Objective {
    fn dim(&self) -> usize;

    /// Loss at `x`; the gradient is written into `grad`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// An objective over one parameter group with every other group frozen.
pub trait LocalObjective: Objective {
    /// Loss and full-length gradient from an earlier evaluation at exactly
    /// `x`, if still remembered. Gradient entries belonging to groups before
    /// this one are not guaranteed to be populated.
    fn recall_full(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

/// Objectives that can be minimized one parameter group at a time.
pub trait Decomposable: Objective + Sync {
    fn local<'a>(
        &'a self,
        partition: &'a Partition,
        group: usize,
        base: &[f64],
    ) -> Result<Box<dyn LocalObjective + 'a>>;
}

/// Objective from a closure; handy for tests and analytic functions.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dims(self.dim, x, grad)?;
        let f = (self.f)(x, grad);
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::NonFiniteLoss)
        }
    }
}

impl<F> Decomposable for FnObjective<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn local<'a>(
        &'a self,
        partition: &'a Partition,
        group: usize,
        base: &[f64],
    ) -> Result<Box<dyn LocalObjective + 'a>> {
        Ok(Box::new(Restricted::new(self, partition, group, base)?))
    }
}

pub(crate) fn check_dims(dim: usize, x: &[f64], grad: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::mismatch("objective input", dim, x.len()));
    }
    if grad.len() != dim {
        return Err(Error::mismatch("objective gradient", dim, grad.len()));
    }
    Ok(())
}

const RECALL_DEPTH: usize = 64;

/// Point, value and gradient.
type Evaluation = (Vec<f64>, f64, Vec<f64>);

/// Remembers the most recent evaluations of a local objective.
#[derive(Default)]
pub(crate) struct Recall {
    entries: RefCell<VecDeque<Evaluation>>,
}

impl Recall {
    pub fn push(&self, x: &[f64], loss: f64, full_grad: &[f64]) {
        let mut e = self.entries.borrow_mut();
        if e.len() == RECALL_DEPTH {
            e.pop_front();
        }
        e.push_back((x.to_vec(), loss, full_grad.to_vec()));
    }

    pub fn find(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.entries
            .borrow()
            .iter()
            .rev()
            .find(|(xe, _, _)| xe.iter().zip(x).all(|(a, b)| a.to_bits() == b.to_bits()))
            .map(|(_, f, g)| (*f, g.clone()))
    }
}

/// Generic restriction: evaluate the full objective, keep the group's slice
/// of the gradient.
pub struct Restricted<'a, O: ?Sized> {
    inner: &'a O,
    partition: &'a Partition,
    group: usize,
    full: RefCell<Vec<f64>>,
    grad: RefCell<Vec<f64>>,
    recall: Recall,
}

impl<'a, O: Objective + ?Sized> Restricted<'a, O> {
    pub fn new(inner: &'a O, partition: &'a Partition, group: usize, base: &[f64]) -> Result<Self> {
        if base.len() != inner.dim() {
            return Err(Error::mismatch("restriction base", inner.dim(), base.len()));
        }
        if partition.len() != inner.dim() {
            return Err(Error::mismatch("partition", inner.dim(), partition.len()));
        }
        if group >= partition.num_groups() {
            return Err(Error::InvalidConfig(format!("group {group} out of range")));
        }
        Ok(Self {
            inner,
            partition,
            group,
            full: RefCell::new(base.to_vec()),
            grad: RefCell::new(vec![0.0; base.len()]),
            recall: Recall::default(),
        })
    }
}

impl<O: Objective + ?Sized> Objective for Restricted<'_, O> {
    fn dim(&self) -> usize {
        self.partition.group_len(self.group)
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dims(self.dim(), x, grad)?;
        let mut full = self.full.borrow_mut();
        let mut g = self.grad.borrow_mut();
        self.partition.extend_into(x, self.group, &mut full)?;
        let f = self.inner.eval(&full, &mut g)?;
        grad.copy_from_slice(&g[self.partition.range(self.group)]);
        self.recall.push(x, f, &g);
        Ok(f)
    }
}

impl<O: Objective + ?Sized> LocalObjective for Restricted<'_, O> {
    fn recall_full(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.recall.find(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restricted_gradient_is_slice_of_full_gradient() {
        let obj = FnObjective::new(4, |x: &[f64], g: &mut [f64]| {
            let mut f = 0.0;
            for i in 0..4 {
                let w = (i + 1) as f64;
                f += w * x[i] * x[i] + x[i] * x[(i + 1) % 4];
            }
            for i in 0..4 {
                let w = (i + 1) as f64;
                g[i] = 2.0 * w * x[i] + x[(i + 1) % 4] + x[(i + 3) % 4];
            }
            f
        });
        let p = Partition::from_ranges(4, vec![0..1, 1..3, 3..4]).unwrap();
        let base = [0.5, -1.0, 2.0, 0.25];
        let local = obj.local(&p, 1, &base).unwrap();
        let mut gl = [0.0; 2];
        let fl = local.eval(&[3.0, 4.0], &mut gl).unwrap();
        let full_x = [0.5, 3.0, 4.0, 0.25];
        let mut gf = [0.0; 4];
        let ff = obj.eval(&full_x, &mut gf).unwrap();
        assert_eq!(fl, ff);
        assert_eq!(gl, [gf[1], gf[2]]);
        let (fr, gr) = local.recall_full(&[3.0, 4.0]).unwrap();
        assert_eq!(fr, ff);
        assert_eq!(gr, gf.to_vec());
        assert!(local.recall_full(&[3.0, 4.5]).is_none());
    }

    #[test]
    fn non_finite_closure_values_are_errors() {
        let obj = FnObjective::new(1, |_x: &[f64], _g: &mut [f64]| f64::NAN);
        assert!(obj.eval(&[0.0], &mut [0.0]).unwrap_err().is_numerical());
    }
}
