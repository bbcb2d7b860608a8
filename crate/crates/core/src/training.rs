//! Global training loop shared by every optimizer.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::metrics::{RunRecord, RunRow};
use crate::objective::Decomposable;
use crate::optimizer::{Iterate, Optimizer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub max_iters: usize,
    /// Stop once an evaluated error reaches this value.
    pub target_e_rel: Option<f64>,
    /// No iteration starts if it would take the cumulative UC above this.
    pub uc_budget: Option<f64>,
    /// Evaluate the error every this many iterations (and always at the
    /// first and last rows). Zero disables evaluation.
    pub eval_every: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            target_e_rel: None,
            uc_budget: None,
            eval_every: 10,
        }
    }
}

pub struct TrainOutcome {
    pub iterate: Iterate,
    pub record: RunRecord,
    /// Set when training aborted; `record` holds the rows up to that point.
    pub error: Option<Error>,
}

impl TrainOutcome {
    pub fn into_result(self) -> Result<(Iterate, RunRecord)> {
        match self.error {
            Some(e) => Err(e),
            None => Ok((self.iterate, self.record)),
        }
    }
}

pub type ErrorFn<'a> = dyn Fn(&[f64]) -> Result<f64> + 'a;

pub fn train(
    optimizer: &mut dyn Optimizer,
    obj: &dyn Decomposable,
    theta0: Vec<f64>,
    e_rel: Option<&ErrorFn<'_>>,
    opts: &TrainOptions,
    header: Vec<(String, String)>,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut record = RunRecord {
        header,
        ..RunRecord::default()
    };
    let mut it = Iterate::evaluate(obj, theta0)?;
    record.raw_evals = 1;
    let evaluate = |theta: &[f64]| e_rel.filter(|_| opts.eval_every > 0).map(|f| f(theta)).transpose();

    let mut elapsed = 0.0;
    let mut row = RunRow {
        iter: 0,
        loss: it.loss,
        e_rel: evaluate(&it.theta)?,
        loss_evals: 0,
        grad_evals: 0,
        uc: 0.0,
        wall_s: 0.0,
    };
    let mut clock = Instant::now();
    record.rows.push(row.clone());
    if hit_target(row.e_rel, opts) {
        record.stop = Some("target".into());
        return Ok(TrainOutcome {
            iterate: it,
            record,
            error: None,
        });
    }

    let uc_step = optimizer.uc_per_iteration();
    let mut error = None;
    let mut stop = "max_iters".to_string();
    for k in 1..=opts.max_iters {
        if let Some(b) = opts.uc_budget {
            if row.uc + uc_step > b {
                stop = "budget".into();
                break;
            }
        }
        let report = match optimizer.step(obj, &mut it) {
            Ok(r) => r,
            Err(e) => {
                stop = format!("error: {e}");
                error = Some(e);
                break;
            }
        };
        elapsed += clock.elapsed().as_secs_f64();
        record.raw_evals += report.cost.raw_evals;
        let last = k == opts.max_iters || report.stalled;
        let due = opts.eval_every > 0 && (k % opts.eval_every == 0 || last);
        row = RunRow {
            iter: k,
            loss: it.loss,
            e_rel: if due { evaluate(&it.theta)? } else { None },
            loss_evals: row.loss_evals + report.cost.loss_evals,
            grad_evals: row.grad_evals + report.cost.grad_evals,
            uc: row.uc + report.cost.uc,
            wall_s: elapsed,
        };
        clock = Instant::now();
        record.rows.push(row.clone());
        if hit_target(row.e_rel, opts) {
            stop = "target".into();
            break;
        }
        if report.stalled {
            stop = "stalled".into();
            break;
        }
    }
    // make sure the final row carries an error value
    if let Some(last) = record.rows.last_mut() {
        if last.e_rel.is_none() && opts.eval_every > 0 {
            last.e_rel = evaluate(&it.theta)?;
        }
    }
    record.stop = Some(stop);
    record
        .header
        .push(("train_s".into(), format!("{:.3}", start.elapsed().as_secs_f64())));
    Ok(TrainOutcome {
        iterate: it,
        record,
        error,
    })
}

fn hit_target(e: Option<f64>, opts: &TrainOptions) -> bool {
    matches!((e, opts.target_e_rel), (Some(e), Some(t)) if e <= t)
}
