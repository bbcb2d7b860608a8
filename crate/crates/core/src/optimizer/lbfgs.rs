use crate::error::{Error, Result};
use crate::objective::{Decomposable, Objective};

use super::{dot, search_ray, Iterate, Optimizer, QnSettings, SearchKind, SecantMemory, StepCost, StepReport};

/// `v ← (1 − μ) v + μ p`
pub fn momentum_update(v: &mut [f64], p: &[f64], mu: f64) {
    for (vi, pi) in v.iter_mut().zip(p) {
        *vi = (1.0 - mu) * *vi + mu * pi;
    }
}

/// What one quasi-Newton iteration did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnStep {
    pub alpha: f64,
    pub trials: usize,
    pub stalled: bool,
}

/// L-BFGS with optional momentum on the search direction.
#[derive(Debug, Clone)]
pub struct Lbfgs {
    memory: SecantMemory,
    momentum: Vec<f64>,
    settings: QnSettings,
}

impl Lbfgs {
    pub fn new(dim: usize, settings: QnSettings) -> Self {
        Self {
            memory: SecantMemory::new(settings.memory),
            momentum: vec![0.0; dim],
            settings,
        }
    }

    pub fn memory(&self) -> &SecantMemory {
        &self.memory
    }

    pub fn momentum(&self) -> &[f64] {
        &self.momentum
    }

    pub fn settings(&self) -> &QnSettings {
        &self.settings
    }

    /// Direction, momentum, line search and secant update.
    pub fn iterate(&mut self, obj: &(impl Objective + ?Sized), it: &mut Iterate) -> Result<QnStep> {
        if it.grad.len() != self.momentum.len() {
            return Err(Error::mismatch("L-BFGS gradient", self.momentum.len(), it.grad.len()));
        }
        let stalled = QnStep {
            alpha: 0.0,
            trials: 0,
            stalled: true,
        };
        if it.grad.iter().all(|g| *g == 0.0) {
            return Ok(stalled);
        }
        let p = self.memory.direction(&it.grad)?;
        momentum_update(&mut self.momentum, &p, self.settings.mu);
        if !(dot(&self.momentum, &it.grad) < 0.0) {
            self.momentum.copy_from_slice(&p);
        }
        if !(dot(&self.momentum, &it.grad) < 0.0) {
            self.memory.clear();
            for (v, g) in self.momentum.iter_mut().zip(&it.grad) {
                *v = -g;
            }
        }
        let search = match search_ray(obj, it, &self.momentum, &self.settings.search, SearchKind::Wolfe) {
            Ok(s) => s,
            Err(Error::NonDescent(_)) => return Ok(stalled),
            Err(e) => return Err(e),
        };
        match search.point {
            Some(next) => {
                let s: Vec<f64> = next.theta.iter().zip(&it.theta).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = next.grad.iter().zip(&it.grad).map(|(a, b)| a - b).collect();
                self.memory.update(&s, &y);
                *it = next;
                Ok(QnStep {
                    alpha: search.alpha,
                    trials: search.trials,
                    stalled: false,
                })
            }
            None => {
                let was_empty = self.memory.is_empty();
                self.memory.clear();
                self.momentum.fill(0.0);
                Ok(QnStep {
                    alpha: 0.0,
                    trials: search.trials,
                    stalled: was_empty,
                })
            }
        }
    }
}

impl Optimizer for Lbfgs {
    fn name(&self) -> &'static str {
        "lbfgs"
    }

    fn uc_per_iteration(&self) -> f64 {
        crate::metrics::uc_lbfgs(self.momentum.len(), self.settings.memory)
    }

    fn step(&mut self, obj: &dyn Decomposable, it: &mut Iterate) -> Result<StepReport> {
        let r = self.iterate(obj, it)?;
        let trials = r.trials as u64;
        let ls_its = trials.saturating_sub(1);
        Ok(StepReport {
            cost: StepCost {
                loss_evals: if trials == 0 { 0 } else { 1 + ls_its },
                grad_evals: u64::from(trials > 0),
                ls_its,
                uc: self.uc_per_iteration(),
                raw_evals: trials,
                local_iters: Vec::new(),
                local_trials: Vec::new(),
            },
            stalled: r.stalled,
        })
    }
}

/// Up to `iters` L-BFGS iterations from `theta0`. Returns the final iterate
/// and the loss after each iteration.
pub fn lbfgs_solve(
    obj: &(impl Objective + ?Sized),
    theta0: Vec<f64>,
    iters: usize,
    settings: QnSettings,
) -> Result<(Iterate, Vec<f64>)> {
    if iters == 0 {
        return Err(Error::InvalidConfig("iters must be at least 1".into()));
    }
    settings.validate()?;
    let mut it = Iterate::evaluate(obj, theta0)?;
    let mut solver = Lbfgs::new(it.theta.len(), settings);
    let mut history = Vec::with_capacity(iters);
    for _ in 0..iters {
        let r = solver.iterate(obj, &mut it)?;
        history.push(it.loss);
        if r.stalled {
            break;
        }
    }
    Ok((it, history))
}
