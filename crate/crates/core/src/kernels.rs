//! Pure double-precision reference kernels for the projection and
//! aggregation math, for verifying any faster reimplementation.
//!
//! Nothing here trains or holds state: weights come from the caller and
//! every output is a deterministic function of its inputs.

use crate::error::{Error, Result};
use crate::grid::{Axis, GridDims, OffsetField};

/// Dense feature volume, channel-contiguous per voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVolume {
    dims: GridDims,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureVolume {
    pub fn new(dims: GridDims, channels: usize, values: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if channels == 0 {
            return Err(Error::Invalid(
                "feature volume needs at least 1 channel".into(),
            ));
        }
        if values.len() != dims.total() * channels {
            return Err(Error::Invalid(format!(
                "feature buffer holds {} values, {dims} x {channels} channels needs {}",
                values.len(),
                dims.total() * channels
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid(
                "feature volume contains non-finite values".into(),
            ));
        }
        Ok(FeatureVolume {
            dims,
            channels,
            values,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Feature vector of one voxel by flat index.
    pub fn feature(&self, voxel: usize) -> &[f64] {
        &self.values[voxel * self.channels..(voxel + 1) * self.channels]
    }
}

/// Per-voxel projection logits, one per target plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionWeights {
    dims: GridDims,
    values: Vec<f64>,
}

impl ProjectionWeights {
    pub fn new(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if values.len() != dims.total() * 3 {
            return Err(Error::Invalid(format!(
                "projection weights hold {} values, {dims} needs {}",
                values.len(),
                dims.total() * 3
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid(
                "projection weights contain non-finite values".into(),
            ));
        }
        Ok(ProjectionWeights { dims, values })
    }

    /// Uniform logits: projection degenerates to mean pooling.
    pub fn uniform(dims: GridDims) -> Self {
        ProjectionWeights {
            dims,
            values: vec![0.0; dims.total() * 3],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// Raw logits, three per voxel in plane order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn logit(&self, voxel: usize, plane: Plane) -> f64 {
        self.values[voxel * 3 + plane.index()]
    }
}

/// Target plane of a dense projection; each plane collapses one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Plane {
    XY,
    XZ,
    YZ,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::XY, Plane::XZ, Plane::YZ];

    pub fn index(self) -> usize {
        match self {
            Plane::XY => 0,
            Plane::XZ => 1,
            Plane::YZ => 2,
        }
    }

    /// The axis summed away by this plane's projection.
    pub fn collapsed_axis(self) -> Axis {
        match self {
            Plane::XY => Axis::Z,
            Plane::XZ => Axis::Y,
            Plane::YZ => Axis::X,
        }
    }

    pub fn shape(self, dims: GridDims) -> (usize, usize) {
        match self {
            Plane::XY => (dims.x, dims.y),
            Plane::XZ => (dims.x, dims.z),
            Plane::YZ => (dims.y, dims.z),
        }
    }
}

/// 2-D feature map produced by a dense projection.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneMap {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    /// `values[(r*cols + c)*channels + ch]`
    pub values: Vec<f64>,
}

impl PlaneMap {
    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        let base = (row * self.cols + col) * self.channels;
        &self.values[base..base + self.channels]
    }
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

/// Collapse one axis of a feature volume onto a plane with per-voxel
/// softmax weights along the collapsed axis.
pub fn dense_project(
    vol: &FeatureVolume,
    weights: &ProjectionWeights,
    plane: Plane,
) -> Result<PlaneMap> {
    if vol.dims() != weights.dims() {
        return Err(Error::DimsMismatch {
            expected: vol.dims().as_array(),
            actual: weights.dims().as_array(),
        });
    }
    let dims = vol.dims();
    let ch = vol.channels();
    let (rows, cols) = plane.shape(dims);
    let depth = dims.axis_len(plane.collapsed_axis());
    let mut values = vec![0.0; rows * cols * ch];
    let mut logits = vec![0.0; depth];
    for r in 0..rows {
        for c in 0..cols {
            for (a, logit) in logits.iter_mut().enumerate() {
                *logit = weights.logit(voxel_on(plane, dims, r, c, a), plane);
            }
            softmax_in_place(&mut logits);
            let out = &mut values[(r * cols + c) * ch..(r * cols + c + 1) * ch];
            for (a, w) in logits.iter().enumerate() {
                let feat = vol.feature(voxel_on(plane, dims, r, c, a));
                for (o, f) in out.iter_mut().zip(feat) {
                    *o += w * f;
                }
            }
        }
    }
    Ok(PlaneMap {
        rows,
        cols,
        channels: ch,
        values,
    })
}

/// Flat voxel index of plane cell (r, c) at depth a along the collapsed axis.
fn voxel_on(plane: Plane, dims: GridDims, r: usize, c: usize, a: usize) -> usize {
    match plane {
        Plane::XY => dims.index_of(r, c, a),
        Plane::XZ => dims.index_of(r, a, c),
        Plane::YZ => dims.index_of(a, r, c),
    }
}

/// Query/key/value projection matrices for the boundary aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    channels: usize,
    /// Row-major C x C matrices.
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    /// Score scale; defaults to the channel count.
    pub d_k: f64,
}

impl AttentionWeights {
    pub fn new(channels: usize, wq: Vec<f64>, wk: Vec<f64>, wv: Vec<f64>) -> Result<Self> {
        let n = channels * channels;
        for (name, m) in [("wq", &wq), ("wk", &wk), ("wv", &wv)] {
            if m.len() != n {
                return Err(Error::Invalid(format!(
                    "{name} holds {} values, {channels}x{channels} needs {n}",
                    m.len()
                )));
            }
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::Invalid(format!("{name} contains non-finite values")));
            }
        }
        Ok(AttentionWeights {
            channels,
            wq,
            wk,
            wv,
            d_k: channels as f64,
        })
    }

    pub fn with_d_k(mut self, d_k: f64) -> Result<Self> {
        if !(d_k.is_finite() && d_k > 0.0) {
            return Err(Error::Invalid(format!("d_k must be positive, got {d_k}")));
        }
        self.d_k = d_k;
        Ok(self)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }
}

/// Per-voxel group normalization over channel groups.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupNorm {
    pub groups: usize,
    pub eps: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl GroupNorm {
    pub const DEFAULT_GROUPS: usize = 8;
    pub const DEFAULT_EPS: f64 = 1e-5;

    /// Unit gain, zero shift.
    pub fn identity(channels: usize, groups: usize) -> Self {
        GroupNorm {
            groups,
            eps: Self::DEFAULT_EPS,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.groups == 0 || !channels.is_multiple_of(self.groups) {
            return Err(Error::Config(format!(
                "channel count {channels} is not divisible by {} groups",
                self.groups
            )));
        }
        if self.gamma.len() != channels || self.beta.len() != channels {
            return Err(Error::Config(format!(
                "gamma/beta hold {}/{} values, need {channels}",
                self.gamma.len(),
                self.beta.len()
            )));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }

    /// Normalize one voxel's channel vector in place.
    pub fn apply(&self, feat: &mut [f64]) {
        let per_group = feat.len() / self.groups;
        for g in 0..self.groups {
            let span = g * per_group..(g + 1) * per_group;
            let mean = feat[span.clone()].iter().sum::<f64>() / per_group as f64;
            let var = feat[span.clone()]
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / per_group as f64;
            let inv = 1.0 / (var + self.eps).sqrt();
            for c in span {
                feat[c] = self.gamma[c] * (feat[c] - mean) * inv + self.beta[c];
            }
        }
    }
}

/// How a distance maps onto a candidate coordinate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CandidateIndexing {
    /// Distances count the voxel itself, so a distance of 1 selects the
    /// origin and a full run's distance selects its last same-class voxel.
    #[default]
    Inclusive,
    /// Off-by-zero alternative for sensitivity checks: a distance of 1
    /// selects the neighbor just past the run.
    Exclusive,
}

/// Round half away from zero, floor the modulated distance at 1, and clamp
/// the resulting coordinate into the volume.
fn candidate_coord(
    origin: usize,
    distance: u32,
    alpha: f64,
    len: usize,
    negative: bool,
    indexing: CandidateIndexing,
) -> usize {
    let modulated = (alpha * distance as f64).round().max(1.0);
    let step = match indexing {
        CandidateIndexing::Inclusive => modulated - 1.0,
        CandidateIndexing::Exclusive => modulated,
    };
    let step = step.min(len as f64) as i64;
    let target = if negative {
        origin as i64 - step
    } else {
        origin as i64 + step
    };
    target.clamp(0, len as i64 - 1) as usize
}

/// The six voxels designated by one voxel's offsets, modulated by `alpha`.
/// At `alpha = 0` every candidate is the origin; at `alpha = 1` each
/// candidate is the last same-class voxel of the corresponding run.
pub fn gather_boundary_candidates(
    origin: [usize; 3],
    offsets: &[u32],
    alpha: f64,
    dims: GridDims,
) -> [[usize; 3]; 6] {
    gather_boundary_candidates_with(origin, offsets, alpha, dims, CandidateIndexing::Inclusive)
}

pub fn gather_boundary_candidates_with(
    origin: [usize; 3],
    offsets: &[u32],
    alpha: f64,
    dims: GridDims,
    indexing: CandidateIndexing,
) -> [[usize; 3]; 6] {
    assert_eq!(offsets.len(), 6);
    debug_assert!(alpha >= 0.0);
    let lens = [dims.x, dims.y, dims.z];
    let mut out = [origin; 6];
    for ch in 0..6 {
        let axis = ch / 2;
        let negative = ch % 2 == 1;
        out[ch][axis] = candidate_coord(
            origin[axis],
            offsets[ch],
            alpha,
            lens[axis],
            negative,
            indexing,
        );
    }
    out
}

fn matvec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &m[r * n..(r + 1) * n];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Attention of one voxel over its six boundary candidates.
pub fn attention_at(
    vol: &FeatureVolume,
    offsets: &OffsetField,
    weights: &AttentionWeights,
    alpha: f64,
    coord: [usize; 3],
) -> Result<[f64; 6]> {
    let dims = vol.dims();
    let voxel = dims.linear_index(coord[0], coord[1], coord[2])?;
    let ch = vol.channels();
    let mut q = vec![0.0; ch];
    matvec(&weights.wq, vol.feature(voxel), &mut q);
    let candidates = gather_boundary_candidates(coord, offsets.at(voxel), alpha, dims);
    let mut scores = [0.0f64; 6];
    let mut key = vec![0.0; ch];
    let scale = 1.0 / weights.d_k.sqrt();
    for (s, cand) in scores.iter_mut().zip(&candidates) {
        let cv = dims.index_of(cand[0], cand[1], cand[2]);
        matvec(&weights.wk, vol.feature(cv), &mut key);
        *s = dot(&q, &key) * scale;
    }
    softmax_in_place(&mut scores);
    Ok(scores)
}

/// One boundary-guided aggregation layer: per voxel, attend over the six
/// candidate voxels, add the residual, and group-normalize.
pub fn instance_aggregate(
    vol: &FeatureVolume,
    offsets: &OffsetField,
    weights: &AttentionWeights,
    alpha: f64,
    norm: &GroupNorm,
) -> Result<FeatureVolume> {
    let dims = vol.dims();
    if dims != offsets.dims() {
        return Err(Error::DimsMismatch {
            expected: dims.as_array(),
            actual: offsets.dims().as_array(),
        });
    }
    let ch = vol.channels();
    if weights.channels() != ch {
        return Err(Error::Invalid(format!(
            "attention weights are {}-channel, volume is {ch}-channel",
            weights.channels()
        )));
    }
    norm.validate(ch)?;
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::Invalid(format!(
            "alpha must be finite and nonnegative, got {alpha}"
        )));
    }
    let scale = 1.0 / weights.d_k.sqrt();
    let mut out = vec![0.0; vol.values().len()];
    let mut q = vec![0.0; ch];
    let mut key = vec![0.0; ch];
    let mut val = vec![0.0; ch];
    let mut agg = vec![0.0; ch];
    for i in 0..dims.x {
        for j in 0..dims.y {
            for k in 0..dims.z {
                let v = dims.index_of(i, j, k);
                let feat = vol.feature(v);
                let candidates = gather_boundary_candidates([i, j, k], offsets.at(v), alpha, dims);
                matvec(&weights.wq, feat, &mut q);
                let mut scores = [0.0f64; 6];
                for (s, cand) in scores.iter_mut().zip(&candidates) {
                    let cv = dims.index_of(cand[0], cand[1], cand[2]);
                    matvec(&weights.wk, vol.feature(cv), &mut key);
                    *s = dot(&q, &key) * scale;
                }
                softmax_in_place(&mut scores);
                agg.copy_from_slice(feat);
                for (w, cand) in scores.iter().zip(&candidates) {
                    let cv = dims.index_of(cand[0], cand[1], cand[2]);
                    matvec(&weights.wv, vol.feature(cv), &mut val);
                    for (a, x) in agg.iter_mut().zip(&val) {
                        *a += w * x;
                    }
                }
                norm.apply(&mut agg);
                out[v * ch..(v + 1) * ch].copy_from_slice(&agg);
            }
        }
    }
    FeatureVolume::new(dims, ch, out)
}

/// Compose several aggregation layers; each entry is applied in order.
pub fn aggregate_stack(
    vol: &FeatureVolume,
    offsets: &OffsetField,
    layers: &[(AttentionWeights, GroupNorm)],
    alpha: f64,
) -> Result<FeatureVolume> {
    let mut current = vol.clone();
    for (weights, norm) in layers {
        current = instance_aggregate(&current, offsets, weights, alpha, norm)?;
    }
    Ok(current)
}
