//! Occupancy evaluation: confusion matrix accumulation, geometric IoU,
//! per-class IoU and mIoU, plus the L1 offset regression loss.
//!
//! Counts stay in exact integer arithmetic until the final divisions.
//! Matrices are additive, so scenes can be evaluated in shards and merged.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{NormalizedOffsetField, VoxelGrid, EMPTY_CLASS};

/// K x K tally of (truth, predicted) label pairs, ignore-labelled truth
/// voxels excluded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    /// Row-major: `cells[truth * K + pred]`.
    cells: Vec<u64>,
    ignored: u64,
}

impl ConfusionMatrix {
    pub fn new(num_classes: u16) -> Self {
        let k = num_classes as usize;
        ConfusionMatrix {
            num_classes: k,
            cells: vec![0; k * k],
            ignored: 0,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn cell(&self, truth: u16, pred: u16) -> u64 {
        self.cells[truth as usize * self.num_classes + pred as usize]
    }

    pub fn evaluated_voxels(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn ignored_voxels(&self) -> u64 {
        self.ignored
    }

    /// Tally one (truth, prediction) grid pair into the matrix.
    pub fn accumulate(&mut self, truth: &VoxelGrid, pred: &VoxelGrid) -> Result<()> {
        if truth.dims() != pred.dims() {
            return Err(Error::DimsMismatch {
                expected: truth.dims().as_array(),
                actual: pred.dims().as_array(),
            });
        }
        if truth.num_classes() as usize != self.num_classes
            || pred.num_classes() as usize != self.num_classes
        {
            return Err(Error::Invalid(format!(
                "grid class counts {} / {} do not match matrix K = {}",
                truth.num_classes(),
                pred.num_classes(),
                self.num_classes
            )));
        }
        let k = self.num_classes;
        for (&t, &p) in truth.labels().iter().zip(pred.labels()) {
            if t == truth.ignore_label() {
                self.ignored += 1;
                continue;
            }
            if p == pred.ignore_label() {
                return Err(Error::Invalid(
                    "prediction contains the ignore label".into(),
                ));
            }
            self.cells[t as usize * k + p as usize] += 1;
        }
        Ok(())
    }

    /// Add another matrix over the same class count.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.num_classes != other.num_classes {
            return Err(Error::Invalid(format!(
                "cannot merge confusion matrices with K = {} and K = {}",
                self.num_classes, other.num_classes
            )));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        self.ignored += other.ignored;
        Ok(())
    }

    fn row_sum(&self, c: usize) -> u64 {
        self.cells[c * self.num_classes..(c + 1) * self.num_classes]
            .iter()
            .sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        self.cells[c..].iter().step_by(self.num_classes).sum()
    }
}

/// Final evaluation numbers. Undefined entries (no voxels of a class in
/// either grid, or an empty evaluation) are NaN and serialize as null.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    /// IoU of the binary occupied set (any class except empty).
    pub occupancy_iou: f64,
    /// IoU per semantic class 1..K, in class order; NaN where the class is
    /// absent from both truth and prediction.
    pub per_class_iou: Vec<f64>,
    /// Mean of the defined per-class IoUs.
    pub miou: f64,
    pub ignored_voxels: u64,
    pub evaluated_voxels: u64,
    /// True when no voxels were evaluated and every metric is NaN.
    pub undefined: bool,
}

/// Reduce an accumulated matrix to the final report.
pub fn finalize(cm: &ConfusionMatrix) -> MetricsReport {
    let k = cm.num_classes();
    let evaluated = cm.evaluated_voxels();
    if evaluated == 0 {
        return MetricsReport {
            occupancy_iou: f64::NAN,
            per_class_iou: vec![f64::NAN; k.saturating_sub(1)],
            miou: f64::NAN,
            ignored_voxels: cm.ignored_voxels(),
            evaluated_voxels: 0,
            undefined: true,
        };
    }
    let empty = EMPTY_CLASS as usize;
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fneg = 0u64;
    for t in 0..k {
        for p in 0..k {
            let n = cm.cells[t * k + p];
            match (t == empty, p == empty) {
                (false, false) => tp += n,
                (true, false) => fp += n,
                (false, true) => fneg += n,
                (true, true) => {}
            }
        }
    }
    let occ_denom = tp + fp + fneg;
    let occupancy_iou = if occ_denom > 0 {
        tp as f64 / occ_denom as f64
    } else {
        f64::NAN
    };

    let mut per_class_iou = Vec::with_capacity(k - 1);
    let mut sum = 0.0;
    let mut present = 0usize;
    for c in 1..k {
        let row = cm.row_sum(c);
        let col = cm.col_sum(c);
        if row + col == 0 {
            per_class_iou.push(f64::NAN);
            continue;
        }
        let diag = cm.cells[c * k + c];
        let iou = diag as f64 / (row + col - diag) as f64;
        per_class_iou.push(iou);
        sum += iou;
        present += 1;
    }
    let miou = if present > 0 {
        sum / present as f64
    } else {
        f64::NAN
    };
    MetricsReport {
        occupancy_iou,
        per_class_iou,
        miou,
        ignored_voxels: cm.ignored_voxels(),
        evaluated_voxels: evaluated,
        undefined: false,
    }
}

/// L1 regression loss between two normalized offset fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L1Loss {
    pub sum: f64,
    pub mean_per_element: f64,
    pub elements: u64,
}

pub fn regression_l1(
    pred: &NormalizedOffsetField,
    truth: &NormalizedOffsetField,
) -> Result<L1Loss> {
    if pred.dims() != truth.dims() {
        return Err(Error::DimsMismatch {
            expected: truth.dims().as_array(),
            actual: pred.dims().as_array(),
        });
    }
    let mut sum = 0.0;
    for (a, b) in pred.values().iter().zip(truth.values()) {
        sum += (a - b).abs();
    }
    let elements = pred.values().len() as u64;
    Ok(L1Loss {
        sum,
        mean_per_element: sum / elements as f64,
        elements,
    })
}
