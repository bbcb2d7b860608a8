//! Schwarz-preconditioned quasi-Newton iterations.
//!
//! Each global iteration runs `k_s` L-BFGS steps on every parameter group
//! with the rest of the network frozen, combines the local corrections into
//! one search direction, line-searches along it, and finishes with an
//! L-BFGS step on the full parameter vector.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{CostModel, OptimizerKind};
use crate::objective::Decomposable;
use crate::optimizer::{dot, search_ray, Iterate, Lbfgs, Optimizer, QnSettings, SearchKind, StepCost, StepReport};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Local solves all start from the current iterate; run in parallel.
    Additive,
    /// Local solves run in order, each starting from the previous result.
    Multiplicative,
}

impl Variant {
    pub fn kind(self) -> OptimizerKind {
        match self {
            Variant::Additive => OptimizerKind::Aspqn,
            Variant::Multiplicative => OptimizerKind::Mspqn,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind().name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aspqn" | "additive" => Ok(Variant::Additive),
            "mspqn" | "multiplicative" => Ok(Variant::Multiplicative),
            _ => Err(Error::InvalidConfig(format!("unknown SPQN variant '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpqnConfig {
    pub variant: Variant,
    pub local_iters: usize,
    pub qn: QnSettings,
    /// Threads for the additive local solves; group `s` runs on worker
    /// `s % workers`.
    pub workers: usize,
}

impl SpqnConfig {
    pub fn new(variant: Variant, local_iters: usize) -> Self {
        Self {
            variant,
            local_iters,
            qn: QnSettings::default(),
            workers: 1,
        }
    }
}

/// Result of minimizing over one group.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolve {
    pub theta_s: Vec<f64>,
    /// Iterations that evaluated the objective.
    pub iters: u64,
    /// Local objective evaluations.
    pub trials: u64,
    /// A numerical failure cut the solve short; `theta_s` is the last
    /// accepted iterate.
    pub failed: bool,
    /// Loss and full gradient at the final composite point, when known.
    /// Entries of groups before `s` may be stale.
    pub end: Option<(f64, Vec<f64>)>,
}

/// `k_s` L-BFGS iterations over group `s` of `base`, all other groups
/// frozen, starting from a fresh secant memory. `start_loss` and
/// `start_grad` are the loss and the group-`s` gradient at `base`.
#[allow(clippy::too_many_arguments)]
pub fn local_solve(
    obj: &dyn Decomposable,
    partition: &Partition,
    s: usize,
    base: &[f64],
    start_loss: f64,
    start_grad: &[f64],
    k_s: usize,
    settings: QnSettings,
) -> Result<LocalSolve> {
    let local = obj.local(partition, s, base)?;
    let theta = partition.restrict(base, s)?;
    if start_grad.len() != theta.len() {
        return Err(Error::mismatch("local start gradient", theta.len(), start_grad.len()));
    }
    let mut it = Iterate {
        theta,
        loss: start_loss,
        grad: start_grad.to_vec(),
    };
    let mut solver = Lbfgs::new(it.theta.len(), settings);
    let mut iters = 0;
    let mut trials = 0;
    let mut failed = false;
    for _ in 0..k_s {
        match solver.iterate(&*local, &mut it) {
            Ok(r) => {
                iters += u64::from(r.trials > 0);
                trials += r.trials as u64;
                if r.stalled {
                    break;
                }
            }
            Err(e) if e.is_numerical() => {
                failed = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let end = local.recall_full(&it.theta);
    Ok(LocalSolve {
        theta_s: it.theta,
        iters,
        trials,
        failed,
        end,
    })
}

/// Additive or multiplicative SPQN.
#[derive(Debug, Clone)]
pub struct Spqn {
    config: SpqnConfig,
    partition: Partition,
    global: Lbfgs,
    cost: CostModel,
}

impl Spqn {
    pub fn new(config: SpqnConfig, partition: Partition) -> Result<Self> {
        config.qn.validate()?;
        if config.local_iters == 0 {
            return Err(Error::InvalidConfig("local iterations k_s must be at least 1".into()));
        }
        if config.workers == 0 {
            return Err(Error::InvalidConfig("need at least one worker".into()));
        }
        let n = partition.len();
        let cost = CostModel {
            kind: config.variant.kind(),
            n,
            m: config.qn.memory,
            local_iters: config.local_iters,
            subdomains: partition.num_groups(),
            max_group_len: partition.max_group_len(),
        };
        Ok(Self {
            global: Lbfgs::new(n, config.qn),
            config,
            partition,
            cost,
        })
    }

    pub fn config(&self) -> &SpqnConfig {
        &self.config
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    pub fn global(&self) -> &Lbfgs {
        &self.global
    }

    fn solve_additive(&self, obj: &dyn Decomposable, it: &Iterate) -> Result<Vec<LocalSolve>> {
        let ns = self.partition.num_groups();
        let workers = self.config.workers.clamp(1, ns);
        let run = |s: usize| {
            local_solve(
                obj,
                &self.partition,
                s,
                &it.theta,
                it.loss,
                &it.grad[self.partition.range(s)],
                self.config.local_iters,
                self.config.qn,
            )
        };
        let mut slots: Vec<Option<Result<LocalSolve>>> = (0..ns).map(|_| None).collect();
        if workers == 1 {
            for (s, slot) in slots.iter_mut().enumerate() {
                *slot = Some(run(s));
            }
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let run = &run;
                        scope.spawn(move || (w..ns).step_by(workers).map(|s| (s, run(s))).collect::<Vec<_>>())
                    })
                    .collect();
                for h in handles {
                    for (s, r) in h.join().expect("local solve worker panicked") {
                        slots[s] = Some(r);
                    }
                }
            });
        }
        slots.into_iter().map(|r| r.expect("every group solved")).collect()
    }

    fn solve_multiplicative(&self, obj: &dyn Decomposable, it: &Iterate) -> Result<Vec<LocalSolve>> {
        let ns = self.partition.num_groups();
        let mut composite = it.theta.clone();
        let mut loss = it.loss;
        let mut grad = it.grad.clone();
        let mut out = Vec::with_capacity(ns);
        for s in 0..ns {
            let mut r = local_solve(
                obj,
                &self.partition,
                s,
                &composite,
                loss,
                &grad[self.partition.range(s)],
                self.config.local_iters,
                self.config.qn,
            )?;
            self.partition.extend_into(&r.theta_s, s, &mut composite)?;
            if s + 1 < ns {
                match r.end.take() {
                    Some((f, g)) => {
                        loss = f;
                        grad = g;
                    }
                    None => {
                        let fresh = Iterate::evaluate(obj, composite.clone())?;
                        r.trials += 1;
                        loss = fresh.loss;
                        grad = fresh.grad;
                    }
                }
            }
            out.push(r);
        }
        Ok(out)
    }

    /// Combined local correction `Σ_s E_s(θ_s* − R_s θ)`.
    pub fn correction(&self, theta: &[f64], locals: &[LocalSolve]) -> Vec<f64> {
        let mut d = vec![0.0; theta.len()];
        for (s, l) in locals.iter().enumerate() {
            let r = self.partition.range(s);
            for ((di, ti), li) in d[r.clone()].iter_mut().zip(&theta[r]).zip(&l.theta_s) {
                *di = li - ti;
            }
        }
        d
    }
}

/// `θ + α d` with `α` from a line search along the local correction `d`.
/// Returns the new point (or `it` unchanged) and the number of trials.
pub fn synchronize(obj: &dyn Decomposable, it: &Iterate, d: &[f64], settings: &QnSettings) -> Result<(Iterate, usize)> {
    if d.iter().all(|v| *v == 0.0) {
        return Ok((it.clone(), 0));
    }
    let kind = if dot(&it.grad, d) < 0.0 {
        SearchKind::Wolfe
    } else {
        SearchKind::Backtracking
    };
    let r = search_ray(obj, it, d, &settings.search, kind)?;
    Ok((r.point.unwrap_or_else(|| it.clone()), r.trials))
}

impl Optimizer for Spqn {
    fn name(&self) -> &'static str {
        self.config.variant.kind().name()
    }

    fn uc_per_iteration(&self) -> f64 {
        self.cost.uc()
    }

    fn step(&mut self, obj: &dyn Decomposable, it: &mut Iterate) -> Result<StepReport> {
        if it.theta.len() != self.partition.len() {
            return Err(Error::mismatch("SPQN parameters", self.partition.len(), it.theta.len()));
        }
        let locals = match self.config.variant {
            Variant::Additive => self.solve_additive(obj, it)?,
            Variant::Multiplicative => self.solve_multiplicative(obj, it)?,
        };
        let d = self.correction(&it.theta, &locals);
        let (mut half, sync_trials) = synchronize(obj, it, &d, &self.config.qn)?;
        let moved = half.theta != it.theta;
        let g = self.global.iterate(obj, &mut half)?;
        *it = half;

        let local_iters: Vec<u64> = locals.iter().map(|l| l.iters).collect();
        let local_trials: Vec<u64> = locals.iter().map(|l| l.trials).collect();
        let trials = (sync_trials + g.trials) as u64;
        let ls_its = trials.saturating_sub(1);
        let cost = StepCost {
            loss_evals: self.cost.loss_evals(ls_its, &local_trials),
            grad_evals: self.cost.grad_evals(&local_iters),
            ls_its,
            uc: self.cost.uc(),
            raw_evals: trials + local_trials.iter().sum::<u64>(),
            local_iters,
            local_trials,
        };
        Ok(StepReport {
            cost,
            stalled: g.stalled && !moved,
        })
    }
}
