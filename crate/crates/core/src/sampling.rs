//! Hammersley collocation points.

use crate::error::{Error, Result};

const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Interior collocation points stored as a flat row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    dim: usize,
    coords: Vec<f64>,
}

impl CollocationSet {
    pub fn from_points(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::mismatch("collocation coordinates", dim, coords.len()));
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Concatenate two sets of the same dimension.
    pub fn concat(&self, other: &CollocationSet) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::mismatch("collocation dimension", self.dim, other.dim));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(Self { dim: self.dim, coords })
    }
}

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

/// `n` Hammersley points in the box `bounds`: first coordinate `(i + 1/2)/n`,
/// remaining coordinates radical inverses in bases 2, 3, 5, ...
pub fn hammersley(n: usize, bounds: &[(f64, f64)]) -> Result<CollocationSet> {
    let d = bounds.len();
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one collocation point".into()));
    }
    if d == 0 || d - 1 > PRIMES.len() {
        return Err(Error::InvalidConfig(format!(
            "Hammersley points supported for 1..={} dimensions (got {d})",
            PRIMES.len() + 1
        )));
    }
    let mut coords = Vec::with_capacity(n * d);
    for i in 0..n {
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            let unit = if k == 0 {
                (i as f64 + 0.5) / n as f64
            } else {
                radical_inverse(i as u64, PRIMES[k - 1])
            };
            coords.push(lo + (hi - lo) * unit);
        }
    }
    Ok(CollocationSet { dim: d, coords })
}
