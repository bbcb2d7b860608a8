//! Exact input derivatives and parameter gradients of the PINN loss.
//!
//! Points are processed in chunks. Inside a chunk every point contributes
//! `K = 1 + 2d` activation rows (value, first partials, diagonal second
//! partials), so each hidden layer is one matrix product over all rows. The
//! reverse pass walks the same layers backwards, reusing the stored
//! pre-activations.

use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::network::{forward, Layout, MlpConfig, TanhCoeffs};
use crate::objective::{check_dims, Decomposable, LocalObjective, Objective, Recall};
use crate::partition::Partition;
use crate::problems::{Jet, PdeProblem, Point, DIM};
use crate::sampling::CollocationSet;

const COMPS: usize = 1 + 2 * DIM;
const CHUNK: usize = 64;

/// Hard-constrained solution `u`, its gradient and the diagonal of its
/// Hessian with respect to the input point.
pub fn eval_with_input_derivs(
    config: &MlpConfig,
    theta: &[f64],
    problem: &PdeProblem,
    x: &[f64],
) -> Result<(f64, [f64; DIM], [f64; DIM])> {
    if x.len() != DIM || config.input_dim != DIM {
        return Err(Error::mismatch("input point", DIM, x.len()));
    }
    let p: Point = [x[0], x[1]];
    if !problem.contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "point {x:?} lies outside the {} domain",
            problem.name()
        )));
    }
    let vars = [Jet2::variable(p[0], 0), Jet2::variable(p[1], 1)];
    let raw = forward(config, theta, &vars)?;
    let u = problem.transform(&p, &raw);
    let finite = u.value.is_finite() && u.first.iter().chain(&u.second).all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite { point: x.to_vec() });
    }
    Ok((u.value, u.first, u.second))
}

/// Mean squared residual over `points` and its gradient in `theta`.
pub fn loss_and_grad(
    config: &MlpConfig,
    theta: &[f64],
    problem: &PdeProblem,
    points: &CollocationSet,
) -> Result<(f64, Vec<f64>)> {
    let obj = PinnObjective::new(*config, problem.clone(), points)?;
    let mut g = vec![0.0; obj.dim()];
    let loss = obj.eval(theta, &mut g)?;
    Ok((loss, g))
}

/// The interior residual loss of one benchmark on a fixed point set.
#[derive(Debug, Clone)]
pub struct PinnObjective {
    config: MlpConfig,
    problem: PdeProblem,
    layout: Layout,
    points: Vec<Point>,
    /// `(offset, factor)` of the hard-constraint transform at each point.
    ansatz: Vec<(Jet, Jet)>,
}

/// Per-evaluation buffers, one slot per layer.
struct Scratch {
    /// `ys[l]` holds `Y_l` for `l = 0..=depth`.
    ys: Vec<Vec<f64>>,
    /// `zs[l - 1]` holds the pre-activation of hidden layer `l`.
    zs: Vec<Vec<f64>>,
    ybar: Vec<f64>,
    zbar: Vec<f64>,
    ubar: Vec<f64>,
}

impl Scratch {
    fn new(depth: usize, width: usize, comps: usize) -> Self {
        let rows = CHUNK * comps * width;
        Self {
            ys: vec![vec![0.0; rows]; depth + 1],
            zs: vec![vec![0.0; rows]; depth],
            ybar: vec![0.0; rows],
            zbar: vec![0.0; rows],
            ubar: vec![0.0; CHUNK * comps],
        }
    }
}

impl PinnObjective {
    pub fn new(config: MlpConfig, problem: PdeProblem, points: &CollocationSet) -> Result<Self> {
        config.validate()?;
        if config.input_dim != DIM {
            return Err(Error::mismatch("network input", DIM, config.input_dim));
        }
        if points.dim() != DIM {
            return Err(Error::mismatch("collocation dimension", DIM, points.dim()));
        }
        if points.is_empty() {
            return Err(Error::InvalidConfig("empty collocation set".into()));
        }
        let points: Vec<Point> = points.iter().map(|p| [p[0], p[1]]).collect();
        let ansatz = points.iter().map(|p| problem.ansatz(p)).collect();
        Ok(Self {
            layout: config.layout(),
            config,
            problem,
            points,
            ansatz,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn problem(&self) -> &PdeProblem {
        &self.problem
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        let n = self.config.param_count();
        if theta.len() != n {
            return Err(Error::mismatch("parameter vector", n, theta.len()));
        }
        Ok(())
    }

    /// Hard-constrained predictions `u(θ, x)` at arbitrary points.
    pub fn predict(&self, theta: &[f64], points: &[Point]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let depth = self.config.depth;
        let mut scratch = Scratch::new(depth, self.config.width, 1);
        let mut raw = vec![0.0; CHUNK];
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(CHUNK) {
            self.forward_chunk(theta, chunk, 0, depth, 1, &mut scratch);
            self.output_rows(theta, chunk.len(), 1, &scratch.ys[depth], &mut raw);
            for (p, &r) in chunk.iter().zip(&raw) {
                let (offset, factor) = self.problem.ansatz(p);
                let u = offset.value + factor.value * r;
                if !u.is_finite() {
                    return Err(Error::NonFinite { point: p.to_vec() });
                }
                out.push(u);
            }
        }
        Ok(out)
    }

    /// Activations `Y_{layer-1}` of every collocation point, laid out in
    /// chunk order, for restarting the forward pass at `layer`.
    pub(crate) fn prefix(&self, theta: &[f64], layer: usize) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let nh = self.config.width;
        if layer == 0 {
            return Ok(Vec::new());
        }
        let last = (layer - 1).min(self.config.depth);
        let mut scratch = Scratch::new(self.config.depth, nh, COMPS);
        let mut out = Vec::with_capacity(self.points.len() * COMPS * nh);
        for chunk in self.points.chunks(CHUNK) {
            self.forward_chunk(theta, chunk, 0, last, COMPS, &mut scratch);
            out.extend_from_slice(&scratch.ys[last][..chunk.len() * COMPS * nh]);
        }
        Ok(out)
    }

    /// Loss at `theta` and, optionally, its gradient for every layer at or
    /// after `start`. With `start > 0`, `prefix` must hold
    /// `self.prefix(theta, start)`. Gradient entries of earlier layers are
    /// set to zero.
    pub(crate) fn evaluate(
        &self,
        theta: &[f64],
        start: usize,
        prefix: Option<&[f64]>,
        mut grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        self.check_theta(theta)?;
        let depth = self.config.depth;
        let nh = self.config.width;
        let start = start.min(self.config.output_layer());
        let prefix = match (start, prefix) {
            (0, _) => None,
            (_, Some(p)) if p.len() == self.points.len() * COMPS * nh => Some(p),
            (_, p) => {
                return Err(Error::mismatch(
                    "activation prefix",
                    self.points.len() * COMPS * nh,
                    p.map_or(0, <[f64]>::len),
                ))
            }
        };
        if let Some(g) = grad.as_deref_mut() {
            if g.len() != theta.len() {
                return Err(Error::mismatch("gradient", theta.len(), g.len()));
            }
            g.fill(0.0);
        }

        let n_pts = self.points.len() as f64;
        let mut scratch = Scratch::new(depth, nh, COMPS);
        let mut raw = vec![0.0; CHUNK * COMPS];
        let mut loss = 0.0;
        for (c, chunk) in self.points.chunks(CHUNK).enumerate() {
            let p0 = c * CHUNK;
            let len = chunk.len() * COMPS * nh;
            let first = if start == 0 {
                0
            } else {
                let src = &prefix.expect("checked above")[p0 * COMPS * nh..][..len];
                scratch.ys[start - 1][..len].copy_from_slice(src);
                start
            };
            self.forward_chunk(theta, chunk, first, depth, COMPS, &mut scratch);
            self.output_rows(theta, chunk.len(), COMPS, &scratch.ys[depth], &mut raw);

            for (q, p) in chunk.iter().enumerate() {
                let r = &raw[q * COMPS..(q + 1) * COMPS];
                let raw_jet = Jet {
                    value: r[0],
                    first: [r[1], r[2]],
                    second: [r[3], r[4]],
                };
                let (offset, factor) = &self.ansatz[p0 + q];
                let u = *offset + *factor * raw_jet;
                let rp = self.problem.residual_partials(&u, p);
                if !rp.r.is_finite() {
                    return Err(Error::NonFinite { point: p.to_vec() });
                }
                loss += rp.r * rp.r;
                if grad.is_some() {
                    let s = 2.0 * rp.r / n_pts;
                    let (uv, ug, uh) = (s * rp.du, rp.dfirst.map(|v| s * v), rp.dsecond.map(|v| s * v));
                    let b = factor;
                    let out = &mut scratch.ubar[q * COMPS..(q + 1) * COMPS];
                    out[0] = b.value * uv;
                    for i in 0..DIM {
                        out[0] += b.first[i] * ug[i] + b.second[i] * uh[i];
                        out[1 + i] = b.value * ug[i] + 2.0 * b.first[i] * uh[i];
                        out[1 + DIM + i] = b.value * uh[i];
                    }
                }
            }

            if let Some(g) = grad.as_deref_mut() {
                self.backward_chunk(theta, chunk, start, &mut scratch, g);
            }
        }
        let loss = loss / n_pts;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        Ok(loss)
    }

    /// Fill `ys[first..=last]` (and the matching `zs`) for one chunk. When
    /// `first > 0`, `ys[first - 1]` must already hold the incoming rows.
    fn forward_chunk(&self, theta: &[f64], pts: &[Point], first: usize, last: usize, comps: usize, s: &mut Scratch) {
        let nh = self.config.width;
        let rows = pts.len() * comps;
        if first == 0 {
            let w0 = &theta[self.layout.segments[0].weights.clone()];
            let y0 = &mut s.ys[0];
            for (p, x) in pts.iter().enumerate() {
                let base = p * comps * nh;
                for j in 0..nh {
                    let w = &w0[j * DIM..(j + 1) * DIM];
                    y0[base + j] = w[0] * x[0] + w[1] * x[1];
                    if comps > 1 {
                        for i in 0..DIM {
                            y0[base + (1 + i) * nh + j] = w[i];
                            y0[base + (1 + DIM + i) * nh + j] = 0.0;
                        }
                    }
                }
            }
        }
        for l in first.max(1)..=last {
            let seg = &self.layout.segments[l];
            let w = &theta[seg.weights.clone()];
            let b = &theta[seg.bias.clone().expect("hidden layer has a bias")];
            let a = theta[seg.slope.expect("hidden layer has a slope")];
            let (before, after) = s.ys.split_at_mut(l);
            let yprev = &before[l - 1][..rows * nh];
            let y = &mut after[0][..rows * nh];
            let z = &mut s.zs[l - 1][..rows * nh];
            // Z = Y_{l-1} Wᵀ
            gemm(rows, nh, nh, yprev, (nh, 1), w, (1, nh), 0.0, z, (nh, 1));
            for p in 0..pts.len() {
                let base = p * comps * nh;
                for j in 0..nh {
                    z[base + j] += b[j];
                }
                if comps == 1 {
                    for j in 0..nh {
                        y[base + j] = yprev[base + j] + (a * z[base + j]).tanh();
                    }
                    continue;
                }
                for j in 0..nh {
                    let c = TanhCoeffs::new(a, z[base + j]);
                    y[base + j] = yprev[base + j] + c.value;
                    for i in 0..DIM {
                        let gi = base + (1 + i) * nh + j;
                        let hi = base + (1 + DIM + i) * nh + j;
                        let zg = z[gi];
                        y[gi] = yprev[gi] + c.d1 * zg;
                        y[hi] = yprev[hi] + c.d2 * zg * zg + c.d1 * z[hi];
                    }
                }
            }
        }
    }

    /// Raw network output rows `ũ = W_out Y + b_out` (bias on value rows only).
    fn output_rows(&self, theta: &[f64], n: usize, comps: usize, y: &[f64], out: &mut [f64]) {
        let nh = self.config.width;
        let seg = &self.layout.segments[self.config.output_layer()];
        let w = &theta[seg.weights.clone()];
        let b = theta[seg.bias.clone().expect("output layer has a bias").start];
        for r in 0..n * comps {
            let row = &y[r * nh..(r + 1) * nh];
            let mut acc = if r % comps == 0 { b } else { 0.0 };
            for (yj, wj) in row.iter().zip(w) {
                acc += yj * wj;
            }
            out[r] = acc;
        }
    }

    fn backward_chunk(&self, theta: &[f64], pts: &[Point], start: usize, s: &mut Scratch, grad: &mut [f64]) {
        let nh = self.config.width;
        let depth = self.config.depth;
        let rows = pts.len() * COMPS;
        let out_seg = &self.layout.segments[self.config.output_layer()];
        let w_out = &theta[out_seg.weights.clone()];
        let y_top = &s.ys[depth][..rows * nh];
        let ubar = &s.ubar[..rows];
        let ybar = &mut s.ybar[..rows * nh];

        {
            let gw = &mut grad[out_seg.weights.clone()];
            for r in 0..rows {
                let u = ubar[r];
                let row = &y_top[r * nh..(r + 1) * nh];
                for j in 0..nh {
                    gw[j] += u * row[j];
                    ybar[r * nh + j] = u * w_out[j];
                }
            }
            let gb = out_seg.bias.clone().expect("output layer has a bias").start;
            grad[gb] += (0..pts.len()).map(|p| ubar[p * COMPS]).sum::<f64>();
        }
        if start > depth {
            return;
        }

        for l in (start.max(1)..=depth).rev() {
            let seg = &self.layout.segments[l];
            let w = &theta[seg.weights.clone()];
            let a_idx = seg.slope.expect("hidden layer has a slope");
            let a = theta[a_idx];
            let z = &s.zs[l - 1][..rows * nh];
            let zbar = &mut s.zbar[..rows * nh];
            let mut abar = 0.0;
            for p in 0..pts.len() {
                let base = p * COMPS * nh;
                for j in 0..nh {
                    let c = TanhCoeffs::new(a, z[base + j]);
                    let yv = ybar[base + j];
                    let mut zv = c.d1 * yv;
                    abar += yv * c.value_da;
                    for i in 0..DIM {
                        let gi = base + (1 + i) * nh + j;
                        let hi = base + (1 + DIM + i) * nh + j;
                        let (zg, zh) = (z[gi], z[hi]);
                        let (yg, yh) = (ybar[gi], ybar[hi]);
                        zv += c.d2 * zg * yg + (c.d3 * zg * zg + c.d2 * zh) * yh;
                        zbar[gi] = c.d1 * yg + 2.0 * c.d2 * zg * yh;
                        zbar[hi] = c.d1 * yh;
                        abar += yg * zg * c.d1_da + yh * (zg * zg * c.d2_da + zh * c.d1_da);
                    }
                    zbar[base + j] = zv;
                }
            }
            grad[a_idx] += abar;
            let yprev = &s.ys[l - 1][..rows * nh];
            // W̄ += Z̄ᵀ Y_{l-1}
            gemm(
                nh,
                rows,
                nh,
                zbar,
                (1, nh),
                yprev,
                (nh, 1),
                1.0,
                &mut grad[seg.weights.clone()],
                (nh, 1),
            );
            let gb = &mut grad[seg.bias.clone().expect("hidden layer has a bias")];
            for p in 0..pts.len() {
                let base = p * COMPS * nh;
                for j in 0..nh {
                    gb[j] += zbar[base + j];
                }
            }
            if l > start || start == 0 {
                // Ȳ_{l-1} = Ȳ_l + Z̄ W
                gemm(rows, nh, nh, zbar, (nh, 1), w, (nh, 1), 1.0, ybar, (nh, 1));
            }
        }

        if start == 0 {
            let gw0 = &mut grad[self.layout.segments[0].weights.clone()];
            for (p, x) in pts.iter().enumerate() {
                let base = p * COMPS * nh;
                for j in 0..nh {
                    let yv = ybar[base + j];
                    for i in 0..DIM {
                        gw0[j * DIM + i] += yv * x[i] + ybar[base + (1 + i) * nh + j];
                    }
                }
            }
        }
    }
}

/// `C = A·B + beta·C` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!((m - 1) * rsa + (k - 1) * csa < a.len(), "gemm: A out of bounds");
        assert!((k - 1) * rsb + (n - 1) * csb < b.len(), "gemm: B out of bounds");
    }
    assert!((m - 1) * rsc + (n - 1) * csc < c.len(), "gemm: C out of bounds");
    // SAFETY: the asserts above bound every index matrixmultiply touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

impl Objective for PinnObjective {
    fn dim(&self) -> usize {
        self.config.param_count()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dims(self.dim(), x, grad)?;
        self.evaluate(x, 0, None, Some(grad))
    }
}

impl Decomposable for PinnObjective {
    fn local<'a>(
        &'a self,
        partition: &'a Partition,
        group: usize,
        base: &[f64],
    ) -> Result<Box<dyn LocalObjective + 'a>> {
        Ok(Box::new(PinnLocal::new(self, partition, group, base)?))
    }
}

/// A group of consecutive layers of a [`PinnObjective`] with all other
/// layers frozen. Activations below the group are computed once.
pub struct PinnLocal<'a> {
    inner: &'a PinnObjective,
    partition: &'a Partition,
    group: usize,
    start: usize,
    prefix: Vec<f64>,
    full: std::cell::RefCell<Vec<f64>>,
    grad: std::cell::RefCell<Vec<f64>>,
    recall: Recall,
}

impl<'a> PinnLocal<'a> {
    pub fn new(inner: &'a PinnObjective, partition: &'a Partition, group: usize, base: &[f64]) -> Result<Self> {
        inner.check_theta(base)?;
        if partition.len() != base.len() {
            return Err(Error::mismatch("partition", base.len(), partition.len()));
        }
        if group >= partition.num_groups() {
            return Err(Error::InvalidConfig(format!("group {group} out of range")));
        }
        let start = match partition.layer_span(group) {
            Some((lo, _)) => lo,
            None => {
                // Not a layer-wise partition: find the first layer touched.
                let r = partition.range(group);
                (0..inner.config.num_layers())
                    .find(|&l| inner.layout.layer_range(l).end > r.start)
                    .unwrap_or(0)
            }
        };
        let prefix = inner.prefix(base, start)?;
        Ok(Self {
            inner,
            partition,
            group,
            start,
            prefix,
            full: std::cell::RefCell::new(base.to_vec()),
            grad: std::cell::RefCell::new(vec![0.0; base.len()]),
            recall: Recall::default(),
        })
    }
}

impl Objective for PinnLocal<'_> {
    fn dim(&self) -> usize {
        self.partition.group_len(self.group)
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_dims(self.dim(), x, grad)?;
        let mut full = self.full.borrow_mut();
        let mut g = self.grad.borrow_mut();
        self.partition.extend_into(x, self.group, &mut full)?;
        let prefix = (self.start > 0).then_some(self.prefix.as_slice());
        let f = self.inner.evaluate(&full, self.start, prefix, Some(&mut g))?;
        grad.copy_from_slice(&g[self.partition.range(self.group)]);
        self.recall.push(x, f, &g);
        Ok(f)
    }
}

impl LocalObjective for PinnLocal<'_> {
    fn recall_full(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.recall.find(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_xavier;
    use crate::partition::make_partition;
    use crate::problems::ProblemKind;
    use crate::sampling::hammersley;

    fn setup(kind: ProblemKind, width: usize, depth: usize, n: usize) -> (PinnObjective, Vec<f64>) {
        let problem = kind.problem();
        let pts = hammersley(n, &problem.bounds).unwrap();
        let cfg = MlpConfig::new(2, width, depth);
        let mut theta = init_xavier(&cfg, 7).unwrap().data;
        // move slopes and biases away from their trivial initial values
        for (i, v) in theta.iter_mut().enumerate() {
            *v += 0.05 * ((i as f64) * 0.37).sin();
        }
        (PinnObjective::new(cfg, problem, &pts).unwrap(), theta)
    }

    /// Loss by scalar jets, one point at a time.
    fn naive_loss(obj: &PinnObjective, theta: &[f64]) -> f64 {
        let mut acc = 0.0;
        for p in &obj.points {
            let vars = [Jet::variable(p[0], 0), Jet::variable(p[1], 1)];
            let raw = forward(&obj.config, theta, &vars).unwrap();
            let u = obj.problem.transform(p, &raw);
            let r = obj.problem.residual(&u, p);
            acc += r * r;
        }
        acc / obj.points.len() as f64
    }

    #[test]
    fn batched_loss_matches_pointwise_jets() {
        for kind in ProblemKind::ALL {
            let (obj, theta) = setup(kind, 6, 3, 150);
            let batched = obj.evaluate(&theta, 0, None, None).unwrap();
            let naive = naive_loss(&obj, &theta);
            assert!(
                (batched - naive).abs() <= 1e-12 * naive.max(1.0),
                "{kind}: {batched} vs {naive}"
            );
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        for kind in ProblemKind::ALL {
            let (obj, theta) = setup(kind, 5, 2, 90);
            let mut g = vec![0.0; obj.dim()];
            obj.eval(&theta, &mut g).unwrap();
            let h = 1e-5;
            let mut worst: f64 = 0.0;
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..theta.len() {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let fd =
                    (obj.evaluate(&tp, 0, None, None).unwrap() - obj.evaluate(&tm, 0, None, None).unwrap()) / (2.0 * h);
                worst = worst.max((fd - g[i]).abs() / scale);
            }
            assert!(worst < 1e-6, "{kind}: worst relative deviation {worst:e}");
        }
    }

    #[test]
    fn predict_matches_value_slot() {
        let (obj, theta) = setup(ProblemKind::Burgers, 7, 2, 10);
        let pts: Vec<Point> = (0..130).map(|i| [i as f64 / 130.0, (i as f64 * 0.7).sin()]).collect();
        let u = obj.predict(&theta, &pts).unwrap();
        for (p, ui) in pts.iter().zip(u) {
            let (v, _, _) = eval_with_input_derivs(&obj.config, &theta, &obj.problem, p).unwrap();
            assert!((v - ui).abs() < 1e-13);
        }
    }

    #[test]
    fn local_objective_restarts_from_cached_prefix() {
        let (obj, theta) = setup(ProblemKind::AllenCahn, 6, 4, 100);
        let part = make_partition(&obj.config, 3).unwrap();
        let mut full_g = vec![0.0; obj.dim()];
        let f_full = obj.eval(&theta, &mut full_g).unwrap();
        for s in 0..3 {
            let local = obj.local(&part, s, &theta).unwrap();
            let xs = part.restrict(&theta, s).unwrap();
            let mut gl = vec![0.0; xs.len()];
            let fl = local.eval(&xs, &mut gl).unwrap();
            assert!((fl - f_full).abs() <= 1e-13 * f_full);
            for (a, b) in gl.iter().zip(&full_g[part.range(s)]) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            // gradient of later groups comes along for free
            let (_, tail) = local.recall_full(&xs).unwrap();
            let r = part.range(s).start..obj.dim();
            for (a, b) in tail[r.clone()].iter().zip(&full_g[r]) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn local_objective_moves_only_its_group() {
        let (obj, theta) = setup(ProblemKind::KleinGordon, 5, 3, 60);
        let part = make_partition(&obj.config, 3).unwrap();
        let local = obj.local(&part, 1, &theta).unwrap();
        let mut xs = part.restrict(&theta, 1).unwrap();
        for v in &mut xs {
            *v *= 1.1;
        }
        let mut gl = vec![0.0; xs.len()];
        let fl = local.eval(&xs, &mut gl).unwrap();
        let moved = part.extend(&xs, 1, &theta).unwrap();
        let mut g = vec![0.0; obj.dim()];
        let f = obj.eval(&moved, &mut g).unwrap();
        assert!((fl - f).abs() <= 1e-13 * f);
        for (a, b) in gl.iter().zip(&g[part.range(1)]) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn evaluation_is_bitwise_reproducible() {
        let (obj, theta) = setup(ProblemKind::DiffusionAdvection, 8, 2, 200);
        let mut g1 = vec![0.0; obj.dim()];
        let mut g2 = vec![0.0; obj.dim()];
        let f1 = obj.eval(&theta, &mut g1).unwrap();
        let f2 = obj.eval(&theta, &mut g2).unwrap();
        assert_eq!(f1.to_bits(), f2.to_bits());
        assert_eq!(g1, g2);
    }

    #[test]
    fn zero_network_gives_ansatz_offset() {
        let cfg = MlpConfig::new(2, 4, 2);
        let theta = vec![0.0; cfg.param_count()];
        let (u, _, _) = eval_with_input_derivs(&cfg, &theta, &ProblemKind::Burgers.problem(), &[0.0, 0.5]).unwrap();
        assert!((u + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = MlpConfig::new(2, 4, 2);
        let theta = vec![0.0; cfg.param_count()];
        let p = ProblemKind::Burgers.problem();
        assert!(eval_with_input_derivs(&cfg, &theta, &p, &[0.5]).is_err());
        assert!(eval_with_input_derivs(&cfg, &theta, &p, &[0.5, 3.0]).is_err());
        assert!(eval_with_input_derivs(&cfg, &theta[1..], &p, &[0.5, 0.0]).is_err());
        let empty = CollocationSet::from_points(2, vec![]).unwrap();
        assert!(PinnObjective::new(cfg, p, &empty).is_err());
    }
}
