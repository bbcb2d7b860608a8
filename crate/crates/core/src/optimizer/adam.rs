use crate::error::{Error, Result};
use crate::objective::Decomposable;

use super::{Iterate, Optimizer, StepCost, StepReport};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `theta` in place.
pub fn adam_update(state: &mut AdamState, theta: &mut [f64], g: &[f64]) -> Result<()> {
    if theta.len() != state.m.len() || g.len() != state.m.len() {
        return Err(Error::mismatch("Adam state", state.m.len(), g.len()));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..theta.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        theta[i] -= state.lr * mhat / (vhat.sqrt() + state.eps);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub state: AdamState,
}

impl Adam {
    pub fn new(dim: usize, lr: f64) -> Self {
        Self {
            state: AdamState::new(dim, lr),
        }
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn uc_per_iteration(&self) -> f64 {
        crate::metrics::uc_adam(self.state.m.len())
    }

    fn step(&mut self, obj: &dyn Decomposable, it: &mut Iterate) -> Result<StepReport> {
        let mut theta = it.theta.clone();
        adam_update(&mut self.state, &mut theta, &it.grad)?;
        *it = Iterate::evaluate(obj, theta)?;
        Ok(StepReport {
            cost: StepCost {
                loss_evals: 1,
                grad_evals: 1,
                ls_its: 0,
                uc: self.uc_per_iteration(),
                raw_evals: 1,
                local_iters: Vec::new(),
                local_trials: Vec::new(),
            },
            stalled: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = AdamState::new(3, 1e-3);
        let mut th = vec![1.0, -2.0, 3.0];
        adam_update(&mut s, &mut th, &[0.0; 3]).unwrap();
        assert_eq!(th, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::new(2, 1e-3);
        let mut th = vec![0.0, 0.0];
        adam_update(&mut s, &mut th, &[4.0, -0.5]).unwrap();
        assert!((th[0] + 1e-3).abs() < 1e-9);
        assert!((th[1] - 1e-3).abs() < 1e-9);
    }
}
