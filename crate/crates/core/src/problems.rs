//! Benchmark PDEs with hard-enforced boundary and initial conditions.
//!
//! Each problem transforms the raw network output `ũ` into
//! `u = offset(x) + factor(x) · ũ`, where `offset` satisfies every boundary
//! and initial condition and `factor` vanishes wherever a condition is
//! imposed. Points are `[t, x]` for time-dependent problems and `[x1, x2]`
//! for the steady one.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::Jet2;

pub const DIM: usize = 2;
pub type Point = [f64; DIM];
pub type Jet = Jet2<DIM>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Burgers,
    DiffusionAdvection,
    KleinGordon,
    AllenCahn,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::Burgers,
        ProblemKind::DiffusionAdvection,
        ProblemKind::KleinGordon,
        ProblemKind::AllenCahn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Burgers => "burgers",
            ProblemKind::DiffusionAdvection => "diffusion_advection",
            ProblemKind::KleinGordon => "klein_gordon",
            ProblemKind::AllenCahn => "allen_cahn",
        }
    }

    pub fn problem(self) -> PdeProblem {
        match self {
            ProblemKind::Burgers => burgers(),
            ProblemKind::DiffusionAdvection => diffusion_advection(),
            ProblemKind::KleinGordon => klein_gordon(),
            ProblemKind::AllenCahn => allen_cahn(),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown problem '{s}' (expected burgers | diffusion_advection | klein_gordon | allen_cahn)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pde {
    /// `u_t + u u_x − ν u_xx = 0`
    Burgers { nu: f64 },
    /// `−μ Δu + b·∇u = f`
    DiffusionAdvection { mu: f64, b: [f64; 2], f: f64 },
    /// `u_tt + α u_xx + β u + γ u² = −x cos t + x² cos² t`
    KleinGordon { alpha: f64, beta: f64, gamma: f64 },
    /// `u_t − D u_xx − 5 (u − u³) = 0`
    AllenCahn { diffusion: f64 },
}

/// Residual value and its partials with respect to the components of the
/// solution jet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPartials {
    pub r: f64,
    pub du: f64,
    pub dfirst: [f64; DIM],
    pub dsecond: [f64; DIM],
}

/// A condition imposed at a boundary or initial point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    Value(f64),
    /// `∂u/∂x_axis = value`
    Derivative {
        axis: usize,
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub x: Point,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeProblem {
    pub kind: ProblemKind,
    pub pde: Pde,
    pub bounds: [(f64, f64); DIM],
}

pub fn burgers() -> PdeProblem {
    PdeProblem {
        kind: ProblemKind::Burgers,
        pde: Pde::Burgers { nu: 0.01 / PI },
        bounds: [(0.0, 1.0), (-1.0, 1.0)],
    }
}

pub fn diffusion_advection() -> PdeProblem {
    PdeProblem {
        kind: ProblemKind::DiffusionAdvection,
        pde: Pde::DiffusionAdvection {
            mu: 1e-2,
            b: [1.0, 1.0],
            f: 1.0,
        },
        bounds: [(0.0, 1.0), (0.0, 1.0)],
    }
}

pub fn klein_gordon() -> PdeProblem {
    PdeProblem {
        kind: ProblemKind::KleinGordon,
        pde: Pde::KleinGordon {
            alpha: -1.0,
            beta: 0.0,
            gamma: 1.0,
        },
        bounds: [(0.0, 12.0), (-1.0, 1.0)],
    }
}

pub fn allen_cahn() -> PdeProblem {
    PdeProblem {
        kind: ProblemKind::AllenCahn,
        pde: Pde::AllenCahn { diffusion: 1e-3 },
        bounds: [(0.0, 1.0), (-1.0, 1.0)],
    }
}

impl PdeProblem {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        DIM
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    /// Right-hand side `f(x)`.
    pub fn source(&self, x: &Point) -> f64 {
        match self.pde {
            Pde::Burgers { .. } | Pde::AllenCahn { .. } => 0.0,
            Pde::DiffusionAdvection { f, .. } => f,
            Pde::KleinGordon { .. } => {
                let (t, x) = (x[0], x[1]);
                let c = t.cos();
                -x * c + x * x * c * c
            }
        }
    }

    /// `P(u)(x) − f(x)` for a solution jet at `x`.
    pub fn residual(&self, u: &Jet, x: &Point) -> f64 {
        self.residual_partials(u, x).r
    }

    pub fn residual_partials(&self, u: &Jet, x: &Point) -> ResidualPartials {
        let f = self.source(x);
        match self.pde {
            Pde::Burgers { nu } => ResidualPartials {
                r: u.first[0] + u.value * u.first[1] - nu * u.second[1] - f,
                du: u.first[1],
                dfirst: [1.0, u.value],
                dsecond: [0.0, -nu],
            },
            Pde::DiffusionAdvection { mu, b, .. } => ResidualPartials {
                r: -mu * (u.second[0] + u.second[1]) + b[0] * u.first[0] + b[1] * u.first[1] - f,
                du: 0.0,
                dfirst: b,
                dsecond: [-mu, -mu],
            },
            Pde::KleinGordon { alpha, beta, gamma } => ResidualPartials {
                r: u.second[0] + alpha * u.second[1] + beta * u.value + gamma * u.value * u.value - f,
                du: beta + 2.0 * gamma * u.value,
                dfirst: [0.0, 0.0],
                dsecond: [1.0, alpha],
            },
            Pde::AllenCahn { diffusion } => {
                let v = u.value;
                ResidualPartials {
                    r: u.first[0] - diffusion * u.second[1] - 5.0 * (v - v * v * v) - f,
                    du: -5.0 * (1.0 - 3.0 * v * v),
                    dfirst: [1.0, 0.0],
                    dsecond: [0.0, -diffusion],
                }
            }
        }
    }

    /// `(offset, factor)` jets of the hard-constraint transform at `x`. Each
    /// factor is scaled to a maximum of 1 over the domain.
    pub fn ansatz(&self, x: &Point) -> (Jet, Jet) {
        let a = Jet::variable(x[0], 0);
        let b = Jet::variable(x[1], 1);
        match self.kind {
            ProblemKind::Burgers => {
                let (t, x) = (a, b);
                (-(x * PI).sin(), t * (1.0 - x.square()))
            }
            ProblemKind::DiffusionAdvection => {
                let (x1, x2) = (a, b);
                let bubble = x1 * (1.0 - x1) * x2 * (1.0 - x2);
                (Jet::constant(0.0), bubble * 16.0)
            }
            ProblemKind::KleinGordon => {
                let (t, x) = (a, b);
                let offset = x - x * x.square() * (1.0 - t.cos());
                let t_end = self.bounds[0].1;
                (offset, (t * (1.0 / t_end)).square() * (1.0 - x.square()))
            }
            ProblemKind::AllenCahn => {
                let (t, x) = (a, b);
                (x.square() * (x * PI).cos(), t * (1.0 - x.square()))
            }
        }
    }

    /// Apply the hard-constraint transform to a raw network output jet.
    pub fn transform(&self, x: &Point, raw: &Jet) -> Jet {
        let (offset, factor) = self.ansatz(x);
        offset + factor * *raw
    }

    pub fn exact(&self, x: &Point) -> Option<f64> {
        match self.kind {
            ProblemKind::KleinGordon => Some(x[1] * x[0].cos()),
            _ => None,
        }
    }

    /// Jet of the exact solution, where one is known in closed form.
    pub fn exact_jet(&self, x: &Point) -> Option<Jet> {
        match self.kind {
            ProblemKind::KleinGordon => {
                let t = Jet::variable(x[0], 0);
                let xx = Jet::variable(x[1], 1);
                Some(xx * t.cos())
            }
            _ => None,
        }
    }

    /// Random points on every constrained boundary piece with the value the
    /// solution must take there.
    pub fn boundary_points(&self, n: usize, seed: u64) -> Vec<BoundaryPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [(t0, t1), (x0, x1)] = self.bounds;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let u: f64 = rng.random();
            let bp = match self.kind {
                ProblemKind::Burgers => match i % 3 {
                    0 => {
                        let x = x0 + (x1 - x0) * u;
                        BoundaryPoint {
                            x: [t0, x],
                            condition: Condition::Value(-(PI * x).sin()),
                        }
                    }
                    k => BoundaryPoint {
                        x: [t0 + (t1 - t0) * u, if k == 1 { x0 } else { x1 }],
                        condition: Condition::Value(0.0),
                    },
                },
                ProblemKind::DiffusionAdvection => {
                    let s = t0 + (t1 - t0) * u;
                    let x = match i % 4 {
                        0 => [t0, s],
                        1 => [t1, s],
                        2 => [s, x0],
                        _ => [s, x1],
                    };
                    BoundaryPoint {
                        x,
                        condition: Condition::Value(0.0),
                    }
                }
                ProblemKind::KleinGordon => match i % 4 {
                    0 => {
                        let x = x0 + (x1 - x0) * u;
                        BoundaryPoint {
                            x: [t0, x],
                            condition: Condition::Value(x),
                        }
                    }
                    1 => BoundaryPoint {
                        x: [t0, x0 + (x1 - x0) * u],
                        condition: Condition::Derivative { axis: 0, value: 0.0 },
                    },
                    k => {
                        let t = t0 + (t1 - t0) * u;
                        let (x, sign) = if k == 2 { (x0, -1.0) } else { (x1, 1.0) };
                        BoundaryPoint {
                            x: [t, x],
                            condition: Condition::Value(sign * t.cos()),
                        }
                    }
                },
                ProblemKind::AllenCahn => match i % 3 {
                    0 => {
                        let x = x0 + (x1 - x0) * u;
                        BoundaryPoint {
                            x: [t0, x],
                            condition: Condition::Value(x * x * (PI * x).cos()),
                        }
                    }
                    k => BoundaryPoint {
                        x: [t0 + (t1 - t0) * u, if k == 1 { x0 } else { x1 }],
                        condition: Condition::Value(-1.0),
                    },
                },
            };
            out.push(bp);
        }
        out
    }
}

impl Condition {
    /// Violation of the condition by a solution jet.
    pub fn violation(&self, u: &Jet) -> f64 {
        match *self {
            Condition::Value(v) => (u.value - v).abs(),
            Condition::Derivative { axis, value } => (u.first[axis] - value).abs(),
        }
    }
}
