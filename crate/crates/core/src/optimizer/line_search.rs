//! Strong-Wolfe line search with cubic interpolation (bracketing followed
//! by zoom), plus a plain backtracking fallback.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_trials: usize,
    pub alpha0: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_trials: 25,
            alpha0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub value: f64,
    /// Number of evaluations of `φ`.
    pub trials: usize,
    /// Both strong Wolfe conditions hold at `alpha`. When false, `alpha` is
    /// the best sufficient-decrease point seen, or 0 if there was none.
    pub wolfe: bool,
}

/// Minimizer of the cubic matching `(a, fa, da)` and `(b, fb, db)`.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let x = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    x.is_finite().then_some(x)
}

/// Minimizer of the quadratic matching `(a, fa, da)` and `(b, fb)`.
fn quadratic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64) -> Option<f64> {
    let h = b - a;
    let curv = fb - fa - da * h;
    if !(curv > 0.0) {
        return None;
    }
    let x = a - da * h * h / (2.0 * curv);
    x.is_finite().then_some(x)
}

struct Sample {
    alpha: f64,
    f: f64,
    d: f64,
}

/// Search along a ray. `phi(α)` returns `(φ(α), φ'(α))`; a non-finite value
/// marks a failed trial, which is treated as too long a step.
pub fn strong_wolfe<F>(mut phi: F, f0: f64, dphi0: f64, params: &LineSearchParams) -> Result<LineSearchResult>
where
    F: FnMut(f64) -> (f64, f64),
{
    if !(dphi0 < 0.0) || !f0.is_finite() {
        return Err(Error::NonDescent(dphi0));
    }
    let LineSearchParams {
        c1,
        c2,
        max_trials,
        alpha0,
    } = *params;
    let armijo = |a: f64, f: f64| f <= f0 + c1 * a * dphi0;
    let curvature = |d: f64| d.abs() <= -c2 * dphi0;

    let mut trials = 0;
    let mut best = (0.0, f0);
    let note = |a: f64, f: f64, best: &mut (f64, f64)| {
        if f.is_finite() && armijo(a, f) && f < best.1 {
            *best = (a, f);
        }
    };
    let done = |alpha: f64, value: f64, trials: usize| LineSearchResult {
        alpha,
        value,
        trials,
        wolfe: true,
    };

    let mut prev = Sample {
        alpha: 0.0,
        f: f0,
        d: dphi0,
    };
    let mut alpha = alpha0;
    // Bracketing phase: ends with (lo, hi) bracketing a Wolfe point.
    let (mut lo, mut hi) = loop {
        if trials == max_trials {
            return Ok(give_up(best, trials));
        }
        let (f, d) = phi(alpha);
        trials += 1;
        let cur = Sample { alpha, f, d };
        if !f.is_finite() || !d.is_finite() || !armijo(alpha, f) || (trials > 1 && f >= prev.f) {
            break (prev, cur);
        }
        note(alpha, f, &mut best);
        if curvature(d) {
            return Ok(done(alpha, f, trials));
        }
        if d >= 0.0 {
            break (cur, prev);
        }
        let lo_ext = alpha * 1.1;
        let hi_ext = alpha * 4.0;
        let next = cubic_min(prev.alpha, prev.f, prev.d, alpha, f, d)
            .filter(|x| *x > alpha)
            .map_or(2.0 * alpha, |x| x.clamp(lo_ext, hi_ext));
        prev = cur;
        alpha = next;
    };

    // Zoom phase: `lo` satisfies sufficient decrease and has the lowest value.
    loop {
        if trials == max_trials {
            return Ok(give_up(best, trials));
        }
        let (a, b) = if lo.alpha < hi.alpha {
            (lo.alpha, hi.alpha)
        } else {
            (hi.alpha, lo.alpha)
        };
        let width = b - a;
        if width <= f64::EPSILON * b.max(1.0) {
            return Ok(give_up(best, trials));
        }
        let guard = 0.1 * width;
        let cubic = if hi.f.is_finite() && hi.d.is_finite() {
            cubic_min(lo.alpha, lo.f, lo.d, hi.alpha, hi.f, hi.d)
        } else {
            None
        };
        // a steep rise at `hi` misleads the cubic; prefer whichever model
        // puts the minimizer closer to `lo`
        let quadratic = if hi.f.is_finite() && hi.f > lo.f {
            quadratic_min(lo.alpha, lo.f, lo.d, hi.alpha, hi.f)
        } else {
            None
        };
        let trial = match (cubic, quadratic) {
            (Some(c), Some(q)) => Some(if (c - lo.alpha).abs() <= (q - lo.alpha).abs() {
                c
            } else {
                q
            }),
            (c, q) => c.or(q),
        };
        let alpha = trial.map_or(0.5 * (a + b), |x| x.clamp(a + guard, b - guard));
        let (f, d) = phi(alpha);
        trials += 1;
        let cur = Sample { alpha, f, d };
        if !f.is_finite() || !d.is_finite() || !armijo(alpha, f) || f >= lo.f {
            hi = cur;
            continue;
        }
        note(alpha, f, &mut best);
        if curvature(d) {
            return Ok(done(alpha, f, trials));
        }
        if d * (hi.alpha - lo.alpha) >= 0.0 {
            hi = lo;
        }
        lo = cur;
    }
}

fn give_up(best: (f64, f64), trials: usize) -> LineSearchResult {
    LineSearchResult {
        alpha: best.0,
        value: best.1,
        trials,
        wolfe: false,
    }
}

/// Halve `α` from 1 until `φ(α) < φ(0)`; 0 if no trial decreases.
pub fn backtracking<F>(mut phi: F, f0: f64, max_trials: usize) -> LineSearchResult
where
    F: FnMut(f64) -> f64,
{
    let mut alpha = 1.0;
    for trial in 1..=max_trials {
        let f = phi(alpha);
        if f.is_finite() && f < f0 {
            return LineSearchResult {
                alpha,
                value: f,
                trials: trial,
                wolfe: false,
            };
        }
        alpha *= 0.5;
    }
    give_up((0.0, f0), max_trials)
}
