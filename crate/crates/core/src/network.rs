//! Residual MLP with adaptive tanh activations.
//!
//! Layer indices run from `0` (input map, `y_0 = W_0 x`, no bias) through
//! `1..=depth` (hidden blocks `y_l = y_{l-1} + tanh(a_l (W_l y_{l-1} + b_l))`)
//! to `depth + 1` (affine output `W_out y + b_out`). Parameters are stored in
//! one flat vector in that layer order; within a hidden block the order is
//! `W_l` (row-major), `b_l`, `a_l`.

use std::ops::Range;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub width: usize,
    /// Number of hidden blocks.
    pub depth: usize,
    pub output_dim: usize,
}

impl MlpConfig {
    pub fn new(input_dim: usize, width: usize, depth: usize) -> Self {
        Self {
            input_dim,
            width,
            depth,
            output_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.width == 0 || self.depth == 0 {
            return Err(Error::InvalidConfig(format!(
                "input_dim, width and depth must be positive (got {}, {}, {})",
                self.input_dim, self.width, self.depth
            )));
        }
        if self.output_dim != 1 {
            return Err(Error::InvalidConfig(format!(
                "only scalar outputs are supported (output_dim = {})",
                self.output_dim
            )));
        }
        Ok(())
    }

    /// Input map, hidden blocks and output map.
    pub fn num_layers(&self) -> usize {
        self.depth + 2
    }

    pub fn output_layer(&self) -> usize {
        self.depth + 1
    }

    fn hidden_block_len(&self) -> usize {
        self.width * self.width + self.width + 1
    }

    pub fn param_count(&self) -> usize {
        self.input_dim * self.width + self.depth * self.hidden_block_len() + self.width + 1
    }

    pub fn layout(&self) -> Layout {
        let nh = self.width;
        let mut segments = Vec::with_capacity(self.num_layers());
        let input_len = self.input_dim * nh;
        segments.push(LayerSegment {
            kind: LayerKind::Input,
            weights: 0..input_len,
            bias: None,
            slope: None,
        });
        let mut offset = input_len;
        for l in 1..=self.depth {
            let w = offset..offset + nh * nh;
            let b = w.end..w.end + nh;
            let a = b.end;
            segments.push(LayerSegment {
                kind: LayerKind::Hidden(l),
                weights: w,
                bias: Some(b),
                slope: Some(a),
            });
            offset = a + 1;
        }
        let w = offset..offset + nh;
        segments.push(LayerSegment {
            kind: LayerKind::Output,
            bias: Some(w.end..w.end + 1),
            weights: w,
            slope: None,
        });
        Layout { segments }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Input,
    Hidden(usize),
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSegment {
    pub kind: LayerKind,
    pub weights: Range<usize>,
    pub bias: Option<Range<usize>>,
    pub slope: Option<usize>,
}

impl LayerSegment {
    /// Contiguous index range covered by this layer.
    pub fn range(&self) -> Range<usize> {
        let end = match (&self.bias, self.slope) {
            (_, Some(a)) => a + 1,
            (Some(b), None) => b.end,
            (None, None) => self.weights.end,
        };
        self.weights.start..end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub segments: Vec<LayerSegment>,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.range().end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn layer_range(&self, layer: usize) -> Range<usize> {
        self.segments[layer].range()
    }
}

/// Flat trainable-parameter vector tied to the architecture that lays it out.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub config: MlpConfig,
    pub data: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(config: MlpConfig) -> Self {
        Self {
            data: vec![0.0; config.param_count()],
            config,
        }
    }

    pub fn from_vec(config: MlpConfig, data: Vec<f64>) -> Result<Self> {
        if data.len() != config.param_count() {
            return Err(Error::mismatch("parameter vector", config.param_count(), data.len()));
        }
        Ok(Self { config, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn layout(&self) -> Layout {
        self.config.layout()
    }
}

/// Elementwise `tanh(a z)`.
pub fn adaptive_tanh(a: f64, z: &[f64]) -> Vec<f64> {
    z.iter().map(|&zi| (a * zi).tanh()).collect()
}

/// Derivatives of `σ(z) = tanh(a z)` needed to push second-order jets through
/// the activation and to back-propagate through that push.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TanhCoeffs {
    pub value: f64,
    /// dσ/dz, d²σ/dz², d³σ/dz³
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// ∂σ/∂a, ∂(dσ/dz)/∂a, ∂(d²σ/dz²)/∂a
    pub value_da: f64,
    pub d1_da: f64,
    pub d2_da: f64,
}

impl TanhCoeffs {
    #[inline]
    pub fn new(a: f64, z: f64) -> Self {
        let t = (a * z).tanh();
        let t1 = 1.0 - t * t;
        let t2 = -2.0 * t * t1;
        let t3 = -2.0 * t1 * t1 + 4.0 * t * t * t1;
        Self {
            value: t,
            d1: a * t1,
            d2: a * a * t2,
            d3: a * a * a * t3,
            value_da: z * t1,
            d1_da: t1 + a * z * t2,
            d2_da: 2.0 * a * t2 + a * a * z * t3,
        }
    }
}

/// Raw network output `ũ(θ, x)` evaluated on any [`Scalar`] (plain or jet inputs).
pub fn forward<T: Scalar>(config: &MlpConfig, theta: &[f64], x: &[T]) -> Result<T> {
    config.validate()?;
    if theta.len() != config.param_count() {
        return Err(Error::mismatch("parameter vector", config.param_count(), theta.len()));
    }
    if x.len() != config.input_dim {
        return Err(Error::mismatch("input point", config.input_dim, x.len()));
    }
    let nh = config.width;
    let d = config.input_dim;
    let layout = config.layout();

    let w0 = &theta[layout.segments[0].weights.clone()];
    let mut y: Vec<T> = (0..nh)
        .map(|j| (0..d).fold(T::from_f64(0.0), |acc, i| acc + x[i] * w0[j * d + i]))
        .collect();

    for seg in &layout.segments[1..=config.depth] {
        let w = &theta[seg.weights.clone()];
        let b = &theta[seg.bias.clone().expect("hidden layer has a bias")];
        let a = theta[seg.slope.expect("hidden layer has a slope")];
        let next: Vec<T> = (0..nh)
            .map(|j| {
                let z = (0..nh).fold(T::from_f64(b[j]), |acc, k| acc + y[k] * w[j * nh + k]);
                y[j] + z.tanh_scaled(a)
            })
            .collect();
        y = next;
    }

    let out = &layout.segments[config.output_layer()];
    let w = &theta[out.weights.clone()];
    let b = theta[out.bias.clone().expect("output layer has a bias").start];
    Ok((0..nh).fold(T::from_f64(b), |acc, j| acc + y[j] * w[j]))
}

/// Xavier-uniform weights, zero biases, unit activation slopes.
pub fn init_xavier(config: &MlpConfig, seed: u64) -> Result<ParamVector> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamVector::zeros(*config);
    let layout = config.layout();
    let nh = config.width;
    for seg in &layout.segments {
        let (fan_in, fan_out) = match seg.kind {
            LayerKind::Input => (config.input_dim, nh),
            LayerKind::Hidden(_) => (nh, nh),
            LayerKind::Output => (nh, 1),
        };
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        for v in &mut params.data[seg.weights.clone()] {
            *v = dist.sample(&mut rng);
        }
        if let Some(a) = seg.slope {
            params.data[a] = 1.0;
        }
    }
    Ok(params)
}
