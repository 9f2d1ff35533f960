//! Detection and repair of corrupted ground-truth labels.
//!
//! Isolated specks show up as abnormally small scales on all three axes;
//! motion smears of dynamic objects show up as an abnormally large scale on
//! at least one axis. Flagged voxels of the target class are rewritten to
//! the ignore label so they drop out of training and evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridDims, VoxelGrid, IGNORE_LABEL};
use crate::scale::ScaleField;

/// Scale thresholds for the two anomaly tests.
///
/// A voxel is min-flagged when its scale is below `k_min` on every axis,
/// and max-flagged when its scale reaches `k_max` on any enabled axis.
/// `None` disables the max test for that axis; the default disables z,
/// where full-height structures legitimately span the short vertical
/// extent, while smears run horizontally.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyThresholds {
    pub k_min: [u32; 3],
    pub k_max: [Option<u32>; 3],
    /// Classes the refinement rewrites; other classes keep their flags
    /// visible in reports but are never modified.
    pub target_classes: Vec<u16>,
}

impl Default for AnomalyThresholds {
    fn default() -> Self {
        AnomalyThresholds {
            k_min: [3, 3, 3],
            k_max: [Some(30), Some(30), None],
            target_classes: vec![1],
        }
    }
}

impl AnomalyThresholds {
    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if self.k_min[a] < 2 {
                return Err(Error::Config(format!(
                    "k_min[{a}] = {} but the smallest possible scale is 2",
                    self.k_min[a]
                )));
            }
            if let Some(max) = self.k_max[a] {
                if self.k_min[a] > max {
                    return Err(Error::Config(format!(
                        "k_min[{a}] = {} exceeds k_max[{a}] = {max}",
                        self.k_min[a]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-voxel anomaly flags from the min and max scale tests.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyMask {
    dims: GridDims,
    min_flags: Vec<bool>,
    max_flags: Vec<bool>,
}

impl AnomalyMask {
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn min_flags(&self) -> &[bool] {
        &self.min_flags
    }

    pub fn max_flags(&self) -> &[bool] {
        &self.max_flags
    }

    pub fn flagged(&self, voxel: usize) -> bool {
        self.min_flags[voxel] || self.max_flags[voxel]
    }

    pub fn flagged_count(&self) -> usize {
        self.min_flags
            .iter()
            .zip(&self.max_flags)
            .filter(|(&a, &b)| a || b)
            .count()
    }
}

/// Flag anomalous voxels over the whole volume regardless of class;
/// class gating happens at refinement.
pub fn detect_anomalies(
    scales: &ScaleField,
    thresholds: &AnomalyThresholds,
) -> Result<AnomalyMask> {
    thresholds.validate()?;
    let dims = scales.dims();
    let total = dims.total();
    let mut min_flags = vec![false; total];
    let mut max_flags = vec![false; total];
    for v in 0..total {
        let s = scales.at(v);
        min_flags[v] = (0..3).all(|a| s[a] < thresholds.k_min[a]);
        max_flags[v] = (0..3).any(|a| thresholds.k_max[a].is_some_and(|m| s[a] >= m));
    }
    Ok(AnomalyMask {
        dims,
        min_flags,
        max_flags,
    })
}

/// Rewrite flagged voxels of the target classes to the ignore label.
/// Everything else is copied unchanged.
pub fn refine_labels(
    grid: &VoxelGrid,
    mask: &AnomalyMask,
    thresholds: &AnomalyThresholds,
) -> Result<VoxelGrid> {
    if grid.dims() != mask.dims() {
        return Err(Error::DimsMismatch {
            expected: grid.dims().as_array(),
            actual: mask.dims().as_array(),
        });
    }
    for &c in &thresholds.target_classes {
        if c >= grid.num_classes() {
            return Err(Error::Config(format!(
                "target class {c} outside 0..{}",
                grid.num_classes()
            )));
        }
    }
    let mut labels = grid.labels().to_vec();
    for (v, label) in labels.iter_mut().enumerate() {
        if mask.flagged(v) && thresholds.target_classes.contains(label) {
            *label = IGNORE_LABEL;
        }
    }
    Ok(VoxelGrid::new(grid.dims(), labels, grid.num_classes())?
        .with_voxel_size(grid.voxel_size_m()))
}

/// Flag counts for one class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassQuality {
    pub total: u64,
    pub min_flagged: u64,
    pub max_flagged: u64,
    /// Voxels carrying either flag.
    pub flagged: u64,
}

/// Per-class summary of anomaly flags over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub dims: [usize; 3],
    pub total_voxels: u64,
    pub flagged_voxels: u64,
    pub flagged_fraction: f64,
    /// Keyed by class id; includes the ignore label if present.
    pub per_class: BTreeMap<u16, ClassQuality>,
}

pub fn quality_report(grid: &VoxelGrid, mask: &AnomalyMask) -> Result<QualityReport> {
    if grid.dims() != mask.dims() {
        return Err(Error::DimsMismatch {
            expected: grid.dims().as_array(),
            actual: mask.dims().as_array(),
        });
    }
    let mut per_class: BTreeMap<u16, ClassQuality> = BTreeMap::new();
    let mut flagged_voxels = 0u64;
    for (v, &label) in grid.labels().iter().enumerate() {
        let entry = per_class.entry(label).or_default();
        entry.total += 1;
        if mask.min_flags()[v] {
            entry.min_flagged += 1;
        }
        if mask.max_flags()[v] {
            entry.max_flagged += 1;
        }
        if mask.flagged(v) {
            entry.flagged += 1;
            flagged_voxels += 1;
        }
    }
    let total_voxels = grid.dims().total() as u64;
    Ok(QualityReport {
        dims: grid.dims().as_array(),
        total_voxels,
        flagged_voxels,
        flagged_fraction: flagged_voxels as f64 / total_voxels as f64,
        per_class,
    })
}
