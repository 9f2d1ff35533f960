//! Dense voxel grid and offset field containers.
//!
//! Storage is a single flat buffer in z-fastest row-major order: the flat
//! index of voxel (i, j, k) is `(i*y + j)*z + k`. The vertical axis is the
//! smallest on typical outdoor grids (256x256x32), so vertical scans stay
//! cache-local.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class id excluded from statistics, training and evaluation.
pub const IGNORE_LABEL: u16 = 255;

/// Class id of the empty / free-space class.
pub const EMPTY_CLASS: u16 = 0;

/// Default voxel edge length in meters.
pub const DEFAULT_VOXEL_SIZE_M: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::Config(format!("unknown axis {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
}

/// Channel layout of an offset field: (x+, x-, y+, y-, z+, z-).
pub const CHANNELS: [(Axis, Direction); 6] = [
    (Axis::X, Direction::Positive),
    (Axis::X, Direction::Negative),
    (Axis::Y, Direction::Positive),
    (Axis::Y, Direction::Negative),
    (Axis::Z, Direction::Positive),
    (Axis::Z, Direction::Negative),
];

/// Flat channel index of a (axis, direction) pair.
pub fn channel_index(axis: Axis, direction: Direction) -> usize {
    axis.index() * 2
        + match direction {
            Direction::Positive => 0,
            Direction::Negative => 1,
        }
}

pub fn channel_name(channel: usize) -> &'static str {
    ["x+", "x-", "y+", "y-", "z+", "z-"][channel]
}

/// Grid extent in voxels along each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl GridDims {
    pub fn new(x: usize, y: usize, z: usize) -> Result<Self> {
        let dims = GridDims { x, y, z };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x == 0 || self.y == 0 || self.z == 0 {
            return Err(Error::Invalid(format!(
                "grid dims must be at least 1 voxel per axis, got {}x{}x{}",
                self.x, self.y, self.z
            )));
        }
        (self.x as u64)
            .checked_mul(self.y as u64)
            .and_then(|t| t.checked_mul(self.z as u64))
            .ok_or_else(|| Error::Invalid("grid voxel count overflows u64".into()))?;
        Ok(())
    }

    /// Number of voxels in the grid.
    pub fn total(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn axis_len(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }

    /// Flat index of (i, j, k) with bounds checking; z varies fastest.
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> Result<usize> {
        if i >= self.x || j >= self.y || k >= self.z {
            return Err(Error::OutOfBounds {
                coord: [i, j, k],
                dims: self.as_array(),
            });
        }
        Ok(self.index_of(i, j, k))
    }

    /// Flat index without bounds checking beyond debug assertions.
    #[inline]
    pub fn index_of(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.x && j < self.y && k < self.z);
        (i * self.y + j) * self.z + k
    }

    /// Inverse of `index_of`.
    pub fn coords_of(&self, index: usize) -> [usize; 3] {
        debug_assert!(index < self.total());
        let k = index % self.z;
        let rest = index / self.z;
        [rest / self.y, rest % self.y, k]
    }
}

impl std::fmt::Display for GridDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

/// Dense per-voxel class labels.
///
/// Immutable after construction; share freely across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    dims: GridDims,
    labels: Vec<u16>,
    num_classes: u16,
    ignore_label: u16,
    voxel_size_m: f64,
}

impl VoxelGrid {
    pub fn new(dims: GridDims, labels: Vec<u16>, num_classes: u16) -> Result<Self> {
        dims.validate()?;
        if num_classes == 0 {
            return Err(Error::Invalid("num_classes must be at least 1".into()));
        }
        if num_classes > IGNORE_LABEL {
            return Err(Error::Invalid(format!(
                "num_classes {num_classes} collides with ignore label {IGNORE_LABEL}"
            )));
        }
        if labels.len() != dims.total() {
            return Err(Error::Invalid(format!(
                "label buffer holds {} values, grid {dims} needs {}",
                labels.len(),
                dims.total()
            )));
        }
        if let Some(bad) = labels
            .iter()
            .find(|&&l| l >= num_classes && l != IGNORE_LABEL)
        {
            return Err(Error::Invalid(format!(
                "label {bad} is outside 0..{num_classes} and is not the ignore label"
            )));
        }
        Ok(VoxelGrid {
            dims,
            labels,
            num_classes,
            ignore_label: IGNORE_LABEL,
            voxel_size_m: DEFAULT_VOXEL_SIZE_M,
        })
    }

    /// Uniform grid of a single class.
    pub fn filled(dims: GridDims, label: u16, num_classes: u16) -> Result<Self> {
        dims.validate()?;
        VoxelGrid::new(dims, vec![label; dims.total()], num_classes)
    }

    pub fn with_voxel_size(mut self, meters: f64) -> Self {
        self.voxel_size_m = meters;
        self
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn ignore_label(&self) -> u16 {
        self.ignore_label
    }

    pub fn voxel_size_m(&self) -> f64 {
        self.voxel_size_m
    }

    pub fn label_at(&self, i: usize, j: usize, k: usize) -> Result<u16> {
        Ok(self.labels[self.dims.linear_index(i, j, k)?])
    }

    /// Copy with the labels mirrored along one axis.
    pub fn flipped(&self, axis: Axis) -> VoxelGrid {
        let d = self.dims;
        let mut out = vec![0u16; self.labels.len()];
        for i in 0..d.x {
            for j in 0..d.y {
                for k in 0..d.z {
                    let [fi, fj, fk] = match axis {
                        Axis::X => [d.x - 1 - i, j, k],
                        Axis::Y => [i, d.y - 1 - j, k],
                        Axis::Z => [i, j, d.z - 1 - k],
                    };
                    out[d.index_of(fi, fj, fk)] = self.labels[d.index_of(i, j, k)];
                }
            }
        }
        VoxelGrid {
            dims: d,
            labels: out,
            num_classes: self.num_classes,
            ignore_label: self.ignore_label,
            voxel_size_m: self.voxel_size_m,
        }
    }
}

/// Per-voxel boundary distances in six axis directions.
///
/// Values are strictly positive voxel counts, stored interleaved: the six
/// channels of voxel `v` live at `values[v*6 .. v*6+6]` in `CHANNELS` order.
#[derive(Clone, Debug, PartialEq)]
pub struct OffsetField {
    dims: GridDims,
    values: Vec<u32>,
}

impl OffsetField {
    pub fn new(dims: GridDims, values: Vec<u32>) -> Result<Self> {
        dims.validate()?;
        if values.len() != dims.total() * 6 {
            return Err(Error::Invalid(format!(
                "offset buffer holds {} values, grid {dims} needs {}",
                values.len(),
                dims.total() * 6
            )));
        }
        for (c, (axis, _)) in CHANNELS.iter().enumerate() {
            let max = dims.axis_len(*axis) as u32;
            if let Some(bad) = values[c..].iter().step_by(6).find(|&&d| d < 1 || d > max) {
                return Err(Error::Invalid(format!(
                    "offset {bad} on channel {} outside 1..={max}",
                    channel_name(c)
                )));
            }
        }
        Ok(OffsetField { dims, values })
    }

    /// Construct from a buffer the caller guarantees to be in range.
    pub(crate) fn from_raw(dims: GridDims, values: Vec<u32>) -> Self {
        debug_assert_eq!(values.len(), dims.total() * 6);
        OffsetField { dims, values }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Six distances of one voxel by flat voxel index.
    pub fn at(&self, voxel: usize) -> &[u32] {
        &self.values[voxel * 6..voxel * 6 + 6]
    }

    pub fn at_coords(&self, i: usize, j: usize, k: usize) -> Result<&[u32]> {
        Ok(self.at(self.dims.linear_index(i, j, k)?))
    }

    /// One direction channel as a contiguous per-voxel vector.
    pub fn channel(&self, channel: usize) -> Vec<u32> {
        assert!(channel < 6);
        self.values[channel..].iter().step_by(6).copied().collect()
    }
}

/// Offset field scaled into (0, 1] by the axis extents.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedOffsetField {
    dims: GridDims,
    values: Vec<f64>,
}

impl NormalizedOffsetField {
    pub fn new(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if values.len() != dims.total() * 6 {
            return Err(Error::Invalid(format!(
                "normalized offset buffer holds {} values, grid {dims} needs {}",
                values.len(),
                dims.total() * 6
            )));
        }
        if let Some(bad) = values
            .iter()
            .find(|v| !(v.is_finite() && **v > 0.0 && **v <= 1.0))
        {
            return Err(Error::Invalid(format!(
                "normalized offset {bad} outside (0, 1]"
            )));
        }
        Ok(NormalizedOffsetField { dims, values })
    }

    pub(crate) fn from_raw(dims: GridDims, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), dims.total() * 6);
        NormalizedOffsetField { dims, values }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, voxel: usize) -> &[f64] {
        &self.values[voxel * 6..voxel * 6 + 6]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_index_origin_and_last() {
        let d = GridDims::new(2, 2, 2).unwrap();
        assert_eq!(d.linear_index(0, 0, 0).unwrap(), 0);
        assert_eq!(d.linear_index(1, 1, 1).unwrap(), 7);
    }

    #[test]
    fn linear_index_hand_evaluated() {
        // (1*3 + 2)*2 + 1 = 11
        let d = GridDims::new(4, 3, 2).unwrap();
        assert_eq!(d.linear_index(1, 2, 1).unwrap(), 11);
    }

    #[test]
    fn linear_index_rejects_out_of_range() {
        let d = GridDims::new(2, 2, 2).unwrap();
        assert!(matches!(
            d.linear_index(2, 0, 0),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn linear_index_is_a_bijection() {
        let d = GridDims::new(3, 4, 5).unwrap();
        let mut seen = vec![false; d.total()];
        for i in 0..d.x {
            for j in 0..d.y {
                for k in 0..d.z {
                    let idx = d.linear_index(i, j, k).unwrap();
                    assert!(!seen[idx]);
                    seen[idx] = true;
                    assert_eq!(d.coords_of(idx), [i, j, k]);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn grid_rejects_bad_labels() {
        let d = GridDims::new(1, 1, 2).unwrap();
        assert!(VoxelGrid::new(d, vec![0, 21], 20).is_err());
        // ignore label is always admissible
        assert!(VoxelGrid::new(d, vec![0, IGNORE_LABEL], 20).is_ok());
    }

    #[test]
    fn grid_rejects_wrong_length() {
        let d = GridDims::new(2, 2, 2).unwrap();
        assert!(VoxelGrid::new(d, vec![0; 7], 2).is_err());
    }

    #[test]
    fn flip_is_involutive() {
        let d = GridDims::new(3, 2, 4).unwrap();
        let labels: Vec<u16> = (0..d.total() as u16).map(|v| v % 5).collect();
        let g = VoxelGrid::new(d, labels, 5).unwrap();
        for axis in Axis::ALL {
            assert_eq!(g.flipped(axis).flipped(axis), g);
        }
    }

    #[test]
    fn offset_field_validates_range() {
        let d = GridDims::new(2, 1, 1).unwrap();
        // x channels may reach 2, y and z are capped at 1
        let ok = vec![2, 1, 1, 1, 1, 1, 1, 2, 1, 1, 1, 1];
        assert!(OffsetField::new(d, ok).is_ok());
        let zero = vec![0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        assert!(OffsetField::new(d, zero).is_err());
        let too_big = vec![1, 1, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        assert!(OffsetField::new(d, too_big).is_err());
    }
}
