//! Layer-wise decomposition of the parameter vector into disjoint groups.
//!
//! Restriction copies a group's entries out of the full vector; extension
//! writes them back. Every group is a single contiguous index range because
//! groups consist of consecutive layers and layers are stored in order.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::network::{MlpConfig, ParamVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    len: usize,
    groups: Vec<Range<usize>>,
    /// `layers[s]` is the inclusive layer span of group `s`; empty for
    /// partitions not built from a network.
    layers: Vec<(usize, usize)>,
}

impl Partition {
    /// Build from explicit index ranges. They must be ascending, disjoint and
    /// cover `0..len`.
    pub fn from_ranges(len: usize, groups: Vec<Range<usize>>) -> Result<Self> {
        let mut next = 0;
        for g in &groups {
            if g.start != next || g.end <= g.start {
                return Err(Error::InvalidConfig(format!(
                    "partition groups must tile 0..{len} with nonempty ranges (got {groups:?})"
                )));
            }
            next = g.end;
        }
        if next != len {
            return Err(Error::InvalidConfig(format!(
                "partition groups cover 0..{next}, expected 0..{len}"
            )));
        }
        Ok(Self {
            len,
            groups,
            layers: Vec::new(),
        })
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn range(&self, s: usize) -> Range<usize> {
        self.groups[s].clone()
    }

    pub fn group_len(&self, s: usize) -> usize {
        self.groups[s].len()
    }

    pub fn max_group_len(&self) -> usize {
        self.groups.iter().map(|g| g.len()).max().unwrap_or(0)
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    /// Inclusive `(first, last)` layer indices of group `s`, when the
    /// partition was made from a network.
    pub fn layer_span(&self, s: usize) -> Option<(usize, usize)> {
        self.layers.get(s).copied()
    }

    /// Group owning a given layer.
    pub fn group_of_layer(&self, layer: usize) -> Option<usize> {
        self.layers.iter().position(|&(lo, hi)| (lo..=hi).contains(&layer))
    }

    fn check_group(&self, s: usize) -> Result<()> {
        if s >= self.groups.len() {
            return Err(Error::InvalidConfig(format!(
                "group {s} out of range for {} groups",
                self.groups.len()
            )));
        }
        Ok(())
    }

    /// `R_s θ`
    pub fn restrict(&self, theta: &[f64], s: usize) -> Result<Vec<f64>> {
        self.check_group(s)?;
        if theta.len() != self.len {
            return Err(Error::mismatch("restrict", self.len, theta.len()));
        }
        Ok(theta[self.groups[s].clone()].to_vec())
    }

    /// `base` with group `s` replaced by `local`.
    pub fn extend(&self, local: &[f64], s: usize, base: &[f64]) -> Result<Vec<f64>> {
        let mut out = base.to_vec();
        self.extend_into(local, s, &mut out)?;
        Ok(out)
    }

    pub fn extend_into(&self, local: &[f64], s: usize, target: &mut [f64]) -> Result<()> {
        self.check_group(s)?;
        if target.len() != self.len {
            return Err(Error::mismatch("extend base", self.len, target.len()));
        }
        let r = self.groups[s].clone();
        if local.len() != r.len() {
            return Err(Error::mismatch("extend local", r.len(), local.len()));
        }
        target[r].copy_from_slice(local);
        Ok(())
    }

    /// `E_s θ_s` as a full-length vector (zero outside the group).
    pub fn embed(&self, local: &[f64], s: usize) -> Result<Vec<f64>> {
        self.extend(local, s, &vec![0.0; self.len])
    }
}

/// Group `depth` hidden blocks into `n_groups` contiguous runs, as evenly as
/// possible with earlier groups taking the remainder. The input map joins the
/// first group and the output map the last, so `n_groups == depth` gives one
/// hidden block per group.
pub fn make_partition(config: &MlpConfig, n_groups: usize) -> Result<Partition> {
    config.validate()?;
    if n_groups == 0 || n_groups > config.depth {
        return Err(Error::InvalidConfig(format!(
            "number of subnetworks must lie in 1..={} (got {n_groups})",
            config.depth
        )));
    }
    let layout = config.layout();
    let base = config.depth / n_groups;
    let extra = config.depth % n_groups;
    let mut layers = Vec::with_capacity(n_groups);
    let mut next_hidden = 1;
    for s in 0..n_groups {
        let count = base + usize::from(s < extra);
        let first = if s == 0 { 0 } else { next_hidden };
        let mut last = next_hidden + count - 1;
        if s + 1 == n_groups {
            last = config.output_layer();
        }
        layers.push((first, last));
        next_hidden += count;
    }
    let groups = layers
        .iter()
        .map(|&(lo, hi)| layout.layer_range(lo).start..layout.layer_range(hi).end)
        .collect();
    let mut p = Partition::from_ranges(config.param_count(), groups)?;
    p.layers = layers;
    Ok(p)
}

/// Partition over a parameter vector's own architecture.
pub fn partition_params(theta: &ParamVector, n_groups: usize) -> Result<Partition> {
    make_partition(&theta.config, n_groups)
}
