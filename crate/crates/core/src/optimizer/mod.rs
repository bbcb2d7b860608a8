//! Quasi-Newton and first-order optimizers.

mod adam;
mod lbfgs;
mod line_search;
mod memory;

pub use adam::{adam_update, Adam, AdamState};
pub use lbfgs::{lbfgs_solve, momentum_update, Lbfgs, QnStep};
pub use line_search::{backtracking, strong_wolfe, LineSearchParams, LineSearchResult};
pub use memory::{SecantMemory, CURVATURE_EPS};

pub(crate) use memory::dot;

use crate::error::{Error, Result};
use crate::objective::{Decomposable, Objective};

/// A point with its loss and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl Iterate {
    pub fn evaluate(obj: &(impl Objective + ?Sized), theta: Vec<f64>) -> Result<Self> {
        let mut grad = vec![0.0; theta.len()];
        let loss = obj.eval(&theta, &mut grad)?;
        Ok(Self { theta, loss, grad })
    }
}

/// Settings shared by every quasi-Newton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnSettings {
    pub memory: usize,
    pub mu: f64,
    pub search: LineSearchParams,
}

impl Default for QnSettings {
    fn default() -> Self {
        Self {
            memory: 3,
            mu: 1.0,
            search: LineSearchParams::default(),
        }
    }
}

impl QnSettings {
    pub fn validate(&self) -> Result<()> {
        let s = &self.search;
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidConfig(format!("mu must lie in [0, 1] (got {})", self.mu)));
        }
        if !(0.0 < s.c1 && s.c1 < s.c2 && s.c2 < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "line search needs 0 < c1 < c2 < 1 (got c1 = {}, c2 = {})",
                s.c1, s.c2
            )));
        }
        if s.max_trials == 0 || !(s.alpha0 > 0.0) {
            return Err(Error::InvalidConfig(
                "line search needs max_ls ≥ 1 and alpha0 > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Work done by one optimizer iteration, in the units of the cost table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepCost {
    /// `#L_e`
    pub loss_evals: u64,
    /// `#g_e`
    pub grad_evals: u64,
    /// Line-search trials beyond the first at the global level.
    pub ls_its: u64,
    /// Update-cost estimate.
    pub uc: f64,
    /// Objective calls actually made, counting full and local ones alike.
    pub raw_evals: u64,
    /// Per group: local iterations and local objective calls. For the
    /// additive variant these are the per-device counts.
    pub local_iters: Vec<u64>,
    pub local_trials: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub cost: StepCost,
    /// No progress was possible; further iterations would repeat this one.
    pub stalled: bool,
}

pub trait Optimizer {
    fn name(&self) -> &'static str;

    /// Update-cost estimate of one iteration, known before running it.
    fn uc_per_iteration(&self) -> f64;

    /// Advance `it` by one iteration.
    fn step(&mut self, obj: &dyn Decomposable, it: &mut Iterate) -> Result<StepReport>;
}

/// Outcome of a search along `theta + α dir`.
pub(crate) struct RaySearch {
    pub alpha: f64,
    pub trials: usize,
    /// New point; `None` when `alpha == 0`.
    pub point: Option<Iterate>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum SearchKind {
    Wolfe,
    Backtracking,
}

pub(crate) fn search_ray(
    obj: &(impl Objective + ?Sized),
    it: &Iterate,
    dir: &[f64],
    params: &LineSearchParams,
    kind: SearchKind,
) -> Result<RaySearch> {
    let mut memo: Vec<(f64, Vec<f64>, f64, Vec<f64>)> = Vec::new();
    let mut hard: Option<Error> = None;
    let mut eval = |alpha: f64| -> (f64, f64) {
        if hard.is_some() {
            return (f64::NAN, f64::NAN);
        }
        let x: Vec<f64> = it.theta.iter().zip(dir).map(|(t, d)| t + alpha * d).collect();
        let mut g = vec![0.0; x.len()];
        match obj.eval(&x, &mut g) {
            Ok(f) => {
                let d = dot(&g, dir);
                memo.push((alpha, x, f, g));
                (f, d)
            }
            Err(e) if e.is_numerical() => (f64::INFINITY, f64::NAN),
            Err(e) => {
                hard = Some(e);
                (f64::NAN, f64::NAN)
            }
        }
    };
    let result = match kind {
        SearchKind::Wolfe => strong_wolfe(&mut eval, it.loss, dot(&it.grad, dir), params)?,
        SearchKind::Backtracking => backtracking(|a| eval(a).0, it.loss, params.max_trials),
    };
    if let Some(e) = hard {
        return Err(e);
    }
    let point = if result.alpha > 0.0 {
        let (_, theta, loss, grad) = memo
            .into_iter()
            .rev()
            .find(|m| m.0.to_bits() == result.alpha.to_bits())
            .expect("accepted step was evaluated");
        Some(Iterate { theta, loss, grad })
    } else {
        None
    };
    Ok(RaySearch {
        alpha: result.alpha,
        trials: result.trials,
        point,
    })
}
