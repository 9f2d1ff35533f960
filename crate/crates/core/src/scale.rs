//! Instance scale statistics derived from offset fields.
//!
//! The scale of a voxel along an axis is the sum of its paired offsets,
//! l = d+ + d-, which equals the length of the voxel's maximal same-class
//! run plus one. Scales are tallied into per-class, per-axis histograms
//! with log-spaced bins and peak normalization.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridDims, OffsetField, VoxelGrid};

/// Per-voxel (l^x, l^y, l^z) triples, stored interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleField {
    dims: GridDims,
    values: Vec<u32>,
}

impl ScaleField {
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// The three axis scales of one voxel by flat index.
    pub fn at(&self, voxel: usize) -> &[u32] {
        &self.values[voxel * 3..voxel * 3 + 3]
    }

    pub fn scale(&self, voxel: usize, axis: Axis) -> u32 {
        self.values[voxel * 3 + axis.index()]
    }
}

/// Sum paired direction channels into per-axis scales.
pub fn scales_from_offsets(field: &OffsetField) -> ScaleField {
    let dims = field.dims();
    let mut values = Vec::with_capacity(dims.total() * 3);
    for v in 0..dims.total() {
        let six = field.at(v);
        values.push(six[0] + six[1]);
        values.push(six[2] + six[3]);
        values.push(six[4] + six[5]);
    }
    ScaleField { dims, values }
}

/// How samples are drawn for a histogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStat {
    /// Every voxel of the class contributes one sample (the default).
    PerVoxel,
    /// Every maximal same-class run along the axis contributes one sample.
    PerRun,
}

/// Scale distribution of one class along one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleHistogram {
    pub class_id: u16,
    pub axis: Axis,
    /// `bins + 1` monotone edges, log2-spaced over [2, axis_len + 1].
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Counts divided by the peak count; all zeros for an empty class.
    pub normalized: Vec<f64>,
}

fn log_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let hi = if hi > lo { hi } else { lo * 2.0 };
    let (llo, lhi) = (lo.log2(), hi.log2());
    (0..=bins)
        .map(|b| {
            // pin the endpoints so the edges cover [lo, hi] exactly
            if b == 0 {
                lo
            } else if b == bins {
                hi
            } else {
                (llo + (lhi - llo) * b as f64 / bins as f64).exp2()
            }
        })
        .collect()
}

fn bin_of(scale: u32, lo: f64, hi: f64, bins: usize) -> usize {
    let hi = if hi > lo { hi } else { lo * 2.0 };
    let t = ((scale as f64).log2() - lo.log2()) / (hi.log2() - lo.log2());
    ((t * bins as f64) as usize).min(bins - 1)
}

impl ScaleHistogram {
    fn empty(class_id: u16, axis: Axis, axis_len: usize, bins: usize) -> Self {
        ScaleHistogram {
            class_id,
            axis,
            bin_edges: log_edges(2.0, (axis_len + 1) as f64, bins),
            counts: vec![0; bins],
            normalized: vec![0.0; bins],
        }
    }

    fn finish(&mut self) {
        let peak = self.counts.iter().copied().max().unwrap_or(0);
        if peak > 0 {
            for (n, &c) in self.normalized.iter_mut().zip(&self.counts) {
                *n = c as f64 / peak as f64;
            }
        }
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Add another histogram over the same class, axis and binning.
    pub fn merge(&mut self, other: &ScaleHistogram) -> Result<()> {
        if self.class_id != other.class_id
            || self.axis != other.axis
            || self.bin_edges != other.bin_edges
        {
            return Err(Error::Config(
                "cannot merge histograms with different class, axis or bin edges".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.finish();
        Ok(())
    }
}

/// Tally the scales of one class along one axis, one sample per voxel.
/// Ignore-labelled voxels never contribute.
pub fn class_scale_histogram(
    grid: &VoxelGrid,
    scales: &ScaleField,
    class_id: u16,
    axis: Axis,
    bins: usize,
) -> Result<ScaleHistogram> {
    class_scale_histogram_with(grid, scales, class_id, axis, bins, SampleStat::PerVoxel)
}

pub fn class_scale_histogram_with(
    grid: &VoxelGrid,
    scales: &ScaleField,
    class_id: u16,
    axis: Axis,
    bins: usize,
    stat: SampleStat,
) -> Result<ScaleHistogram> {
    if grid.dims() != scales.dims() {
        return Err(Error::DimsMismatch {
            expected: grid.dims().as_array(),
            actual: scales.dims().as_array(),
        });
    }
    if class_id >= grid.num_classes() {
        return Err(Error::Config(format!(
            "class id {class_id} outside 0..{}",
            grid.num_classes()
        )));
    }
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let dims = grid.dims();
    let axis_len = dims.axis_len(axis);
    let mut hist = ScaleHistogram::empty(class_id, axis, axis_len, bins);
    let (lo, hi) = (2.0, (axis_len + 1) as f64);
    match stat {
        SampleStat::PerVoxel => {
            for (v, &label) in grid.labels().iter().enumerate() {
                if label == class_id && label != grid.ignore_label() {
                    hist.counts[bin_of(scales.scale(v, axis), lo, hi, bins)] += 1;
                }
            }
        }
        SampleStat::PerRun => {
            // one sample per maximal run: count run starts
            for (v, &label) in grid.labels().iter().enumerate() {
                if label != class_id || label == grid.ignore_label() {
                    continue;
                }
                let [i, j, k] = dims.coords_of(v);
                let pos = [i, j, k][axis.index()];
                let prev = if pos == 0 {
                    None
                } else {
                    let mut c = [i, j, k];
                    c[axis.index()] -= 1;
                    Some(grid.labels()[dims.index_of(c[0], c[1], c[2])])
                };
                if prev != Some(label) {
                    hist.counts[bin_of(scales.scale(v, axis), lo, hi, bins)] += 1;
                }
            }
        }
    }
    hist.finish();
    Ok(hist)
}

/// One exported histogram bin; the flat row format shared by CSV and JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub class_id: u16,
    pub axis: Axis,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
    pub normalized: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
    /// One JSON object per line.
    JsonLines,
}

pub fn histogram_rows(histograms: &[ScaleHistogram]) -> Vec<HistogramRow> {
    let mut rows = Vec::new();
    for h in histograms {
        for b in 0..h.counts.len() {
            rows.push(HistogramRow {
                class_id: h.class_id,
                axis: h.axis,
                bin_lo: h.bin_edges[b],
                bin_hi: h.bin_edges[b + 1],
                count: h.counts[b],
                normalized: h.normalized[b],
            });
        }
    }
    rows
}

/// Write histograms as one row per (class, axis, bin), in input order.
pub fn export_histograms(
    histograms: &[ScaleHistogram],
    path: &Path,
    format: ExportFormat,
) -> Result<()> {
    let rows = histogram_rows(histograms);
    let body = match format {
        ExportFormat::Csv => {
            let mut out = String::from("class_id,axis,bin_lo,bin_hi,count,normalized\n");
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.class_id,
                    r.axis.name(),
                    r.bin_lo,
                    r.bin_hi,
                    r.count,
                    r.normalized
                ));
            }
            out
        }
        ExportFormat::Json => {
            serde_json::to_string_pretty(&rows).map_err(|e| Error::Format(e.to_string()))?
        }
        ExportFormat::JsonLines => {
            let mut out = String::new();
            for r in &rows {
                out.push_str(&serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?);
                out.push('\n');
            }
            out
        }
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}
