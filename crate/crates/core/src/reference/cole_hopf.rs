//! Viscous Burgers solution with `u(0, x) = −sin(πx)` through the Cole–Hopf
//! transform, integrated by Gauss–Hermite quadrature.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights for `∫ f(z) e^{−z²} dz`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on normalized Hermite polynomials.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("need at least one quadrature node".into()));
        }
        const PIM4: f64 = 0.751_125_544_464_942_5;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Newton(format!("Gauss-Hermite node {i} of {n}")));
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let mass: f64 = w.iter().sum();
        if (mass - PI.sqrt()).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "{n}-node Gauss-Hermite rule is inaccurate"
            )));
        }
        Ok(Self { nodes: x, weights: w })
    }
}

/// Cole–Hopf quotient evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct ColeHopf {
    pub nu: f64,
    rule: GaussHermite,
    log_w: Vec<f64>,
}

impl ColeHopf {
    pub fn new(nu: f64, nodes: usize) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidConfig(format!("viscosity must be positive (got {nu})")));
        }
        let rule = GaussHermite::new(nodes)?;
        let log_w = rule.weights.iter().map(|w| w.ln()).collect();
        Ok(Self { nu, rule, log_w })
    }

    pub fn nodes(&self) -> usize {
        self.rule.nodes.len()
    }

    /// `u(t, x)`; sums are taken in log-sum-exp form.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        if t <= 0.0 {
            return -(PI * x).sin();
        }
        let c = (4.0 * self.nu * t).sqrt();
        let k = 1.0 / (2.0 * PI * self.nu);
        let mut lf = Vec::with_capacity(self.rule.nodes.len());
        let mut top = f64::NEG_INFINITY;
        for (z, lw) in self.rule.nodes.iter().zip(&self.log_w) {
            let y = PI * (x - c * z);
            let v = lw - k * y.cos();
            top = top.max(v);
            lf.push((v, y.sin()));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (v, s) in lf {
            let e = (v - top).exp();
            num += s * e;
            den += e;
        }
        -num / den
    }
}

/// `u(t, x)` for viscosity `nu` with a 100-node rule.
pub fn burgers_cole_hopf(t: f64, x: f64, nu: f64) -> Result<f64> {
    Ok(ColeHopf::new(nu, 100)?.eval(t, x))
}
