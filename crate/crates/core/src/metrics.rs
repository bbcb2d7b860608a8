//! Error metric, cost model and run records.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// `‖u − u*‖ / ‖u‖` over matching samples.
pub fn relative_l2(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::mismatch("relative L2 samples", pred.len(), reference.len()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (u, r) in pred.iter().zip(reference) {
        num += (u - r) * (u - r);
        den += u * u;
    }
    if den == 0.0 {
        return Err(Error::InvalidConfig("relative L2 error of a zero prediction".into()));
    }
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Adam,
    Lbfgs,
    Aspqn,
    Mspqn,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::Adam,
        OptimizerKind::Lbfgs,
        OptimizerKind::Aspqn,
        OptimizerKind::Mspqn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Lbfgs => "lbfgs",
            OptimizerKind::Aspqn => "aspqn",
            OptimizerKind::Mspqn => "mspqn",
        }
    }

    pub fn is_spqn(self) -> bool {
        matches!(self, OptimizerKind::Aspqn | OptimizerKind::Mspqn)
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown optimizer '{s}' (expected adam | lbfgs | aspqn | mspqn)"
            ))
        })
    }
}

pub fn uc_adam(n: usize) -> f64 {
    5.0 * n as f64
}

pub fn uc_lbfgs(n: usize, m: usize) -> f64 {
    let n = n as f64;
    n + 4.0 * m as f64 * n
}

/// Sizes that the per-iteration cost estimates depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub kind: OptimizerKind,
    pub n: usize,
    pub m: usize,
    pub local_iters: usize,
    pub subdomains: usize,
    /// Largest group size `n_s`.
    pub max_group_len: usize,
}

impl CostModel {
    /// Update cost of one iteration.
    pub fn uc(&self) -> f64 {
        let n = self.n as f64;
        let m = self.m as f64;
        let ks = self.local_iters as f64;
        let uc_s = n + 4.0 * m * n;
        match self.kind {
            OptimizerKind::Adam => uc_adam(self.n),
            OptimizerKind::Lbfgs => uc_lbfgs(self.n, self.m),
            OptimizerKind::Aspqn => 2.0 * n + 4.0 * m * n + self.max_group_len as f64 / n * ks * uc_s,
            OptimizerKind::Mspqn => 2.0 * n + 4.0 * m * n + ks * uc_s,
        }
    }

    /// Memory cost per device.
    pub fn mc(&self) -> f64 {
        let n = self.n as f64;
        let m = self.m as f64;
        let mc_s = n + 2.0 * m * n;
        match self.kind {
            OptimizerKind::Adam => 4.0 * n,
            OptimizerKind::Lbfgs => n + 2.0 * m * n,
            OptimizerKind::Aspqn | OptimizerKind::Mspqn => 2.0 * n + 2.0 * m * n + self.max_group_len as f64 / n * mc_s,
        }
    }

    /// `#L_e` of one iteration given the observed global line-search
    /// iterations and, per group, the local loss evaluations.
    pub fn loss_evals(&self, ls_its: u64, local_loss: &[u64]) -> u64 {
        match self.kind {
            OptimizerKind::Adam => 1,
            OptimizerKind::Lbfgs => 1 + ls_its,
            OptimizerKind::Aspqn => 1 + ls_its + local_loss.iter().copied().max().unwrap_or(0),
            OptimizerKind::Mspqn => 1 + ls_its + local_loss.iter().sum::<u64>(),
        }
    }

    /// `#g_e` of one iteration given the local iterations per group.
    pub fn grad_evals(&self, local_iters: &[u64]) -> u64 {
        match self.kind {
            OptimizerKind::Adam | OptimizerKind::Lbfgs => 1,
            OptimizerKind::Aspqn => 2 + local_iters.iter().copied().max().unwrap_or(0),
            OptimizerKind::Mspqn => 2 + local_iters.iter().sum::<u64>(),
        }
    }
}

/// One row per global iteration; row 0 is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub iter: usize,
    pub loss: f64,
    /// `None` when the error was not evaluated at this iteration.
    pub e_rel: Option<f64>,
    pub loss_evals: u64,
    pub grad_evals: u64,
    pub uc: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunRecord {
    /// Configuration echo, written as `# key=value` lines.
    pub header: Vec<(String, String)>,
    pub rows: Vec<RunRow>,
    /// Total objective calls, full and local.
    pub raw_evals: u64,
    /// Why training ended early, if it did.
    pub stop: Option<String>,
}

pub const CSV_COLUMNS: &str = "iter,loss,e_rel,loss_evals,grad_evals,uc,wall_s";

impl RunRecord {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn last(&self) -> Option<&RunRow> {
        self.rows.last()
    }

    /// Last evaluated error.
    pub fn final_e_rel(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.e_rel)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        for (k, v) in &self.header {
            writeln!(w, "# {k}={v}")?;
        }
        if let Some(s) = &self.stop {
            writeln!(w, "# stop={s}")?;
        }
        writeln!(w, "{CSV_COLUMNS}")?;
        for r in &self.rows {
            let e = r.e_rel.map_or_else(|| "nan".to_string(), |e| format!("{e:e}"));
            writeln!(
                w,
                "{},{:e},{},{},{},{:e},{:.6}",
                r.iter, r.loss, e, r.loss_evals, r.grad_evals, r.uc, r.wall_s
            )?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut rec = RunRecord::default();
        let mut seen_columns = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                if let Some((k, v)) = h.trim().split_once('=') {
                    if k == "stop" {
                        rec.stop = Some(v.to_string());
                    } else {
                        rec.header.push((k.to_string(), v.to_string()));
                    }
                }
                continue;
            }
            if !seen_columns {
                if line != CSV_COLUMNS {
                    return Err(Error::Format(format!(
                        "expected CSV columns '{CSV_COLUMNS}', found '{line}'"
                    )));
                }
                seen_columns = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::Format(format!("line {}: expected 7 fields", lineno + 1)));
            }
            let bad = |what: &str| Error::Format(format!("line {}: bad {what}", lineno + 1));
            let e_rel: f64 = f[2].parse().map_err(|_| bad("e_rel"))?;
            rec.rows.push(RunRow {
                iter: f[0].parse().map_err(|_| bad("iter"))?,
                loss: f[1].parse().map_err(|_| bad("loss"))?,
                e_rel: (!e_rel.is_nan()).then_some(e_rel),
                loss_evals: f[3].parse().map_err(|_| bad("loss_evals"))?,
                grad_evals: f[4].parse().map_err(|_| bad("grad_evals"))?,
                uc: f[5].parse().map_err(|_| bad("uc"))?,
                wall_s: f[6].parse().map_err(|_| bad("wall_s"))?,
            });
        }
        if !seen_columns {
            return Err(Error::Format("no CSV column line".into()));
        }
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_cases() {
        let u = [1.0, -2.0, 3.0];
        assert_eq!(relative_l2(&u, &u).unwrap(), 0.0);
        let pred = [2.0; 5];
        let reference = [1.0; 5];
        assert!((relative_l2(&pred, &reference).unwrap() - 0.5).abs() < 1e-15);
        let a: Vec<f64> = u.iter().map(|v| v * -3.5).collect();
        let b: Vec<f64> = [1.1, -2.0, 2.5].iter().map(|v| v * -3.5).collect();
        let e1 = relative_l2(&u, &[1.1, -2.0, 2.5]).unwrap();
        assert!((relative_l2(&a, &b).unwrap() - e1).abs() < 1e-15);
        assert!(relative_l2(&[0.0; 2], &[1.0; 2]).is_err());
        assert!(relative_l2(&[1.0; 2], &[1.0; 3]).is_err());
    }

    fn model(kind: OptimizerKind) -> CostModel {
        CostModel {
            kind,
            n: 100,
            m: 3,
            local_iters: 5,
            subdomains: 1,
            max_group_len: 100,
        }
    }

    #[test]
    fn cost_table_values() {
        assert_eq!(model(OptimizerKind::Adam).uc(), 500.0);
        assert_eq!(model(OptimizerKind::Lbfgs).uc(), 1300.0);
        assert_eq!(model(OptimizerKind::Aspqn).uc(), model(OptimizerKind::Mspqn).uc());
        assert_eq!(model(OptimizerKind::Adam).mc(), 400.0);
        assert_eq!(model(OptimizerKind::Lbfgs).mc(), 700.0);
    }

    #[test]
    fn counter_closed_forms() {
        let a = model(OptimizerKind::Aspqn);
        let m = model(OptimizerKind::Mspqn);
        assert_eq!(a.loss_evals(2, &[7, 9, 6]), 12);
        assert_eq!(m.loss_evals(2, &[7, 9, 6]), 25);
        assert_eq!(a.grad_evals(&[5, 5, 4]), 7);
        assert_eq!(m.grad_evals(&[5, 5, 4]), 16);
        assert_eq!(model(OptimizerKind::Lbfgs).loss_evals(3, &[]), 4);
    }

    #[test]
    fn names_parse() {
        for k in OptimizerKind::ALL {
            assert_eq!(k.name().parse::<OptimizerKind>().unwrap(), k);
        }
        assert!("sgd".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rec = RunRecord {
            header: vec![("problem".into(), "burgers".into())],
            rows: vec![
                RunRow {
                    iter: 0,
                    loss: 0.125,
                    e_rel: Some(0.5),
                    loss_evals: 0,
                    grad_evals: 0,
                    uc: 0.0,
                    wall_s: 0.0,
                },
                RunRow {
                    iter: 1,
                    loss: 1.0 / 3.0,
                    e_rel: None,
                    loss_evals: 3,
                    grad_evals: 1,
                    uc: 1300.0,
                    wall_s: 0.25,
                },
            ],
            raw_evals: 0,
            stop: Some("target".into()),
        };
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let back = RunRecord::read_csv(&buf[..]).unwrap();
        assert_eq!(back.rows, rec.rows);
        assert_eq!(back.header, rec.header);
        assert_eq!(back.stop, rec.stop);
    }
}
