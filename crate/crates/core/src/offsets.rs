//! Boundary offset fields derived from voxel class labels.
//!
//! For every voxel the field stores, per axis direction, the run-length
//! distance to the nearest class change: the count of voxels from the voxel
//! itself up to and including the last voxel of its run. A boundary voxel
//! therefore has distance 1, and the volume border terminates runs like a
//! class change would.
//!
//! Each direction is a single backward (or forward) recurrence over
//! independent 1-D lines: the last voxel of a line gets 1, and scanning
//! toward the line start, a voxel gets its neighbor's value plus one while
//! the labels match, resetting to 1 at a change.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{
    Axis, Direction, GridDims, NormalizedOffsetField, OffsetField, VoxelGrid, CHANNELS, EMPTY_CLASS,
};

/// Controls which labels participate in scanning and downstream sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanPolicy {
    /// Whether the empty class (0) counts as a regressible class. Offsets
    /// at empty voxels are computed either way; this flag lets consumers
    /// exclude them from statistics and losses.
    pub include_empty: bool,
    /// Whether the ignore label terminates a run. When false, ignore voxels
    /// match any neighbor, so a run continues across ignored gaps (and may
    /// bridge two different classes).
    pub ignore_breaks_runs: bool,
}

impl Default for ScanPolicy {
    fn default() -> Self {
        ScanPolicy {
            include_empty: true,
            ignore_breaks_runs: true,
        }
    }
}

impl ScanPolicy {
    /// Whether a voxel of this label should feed statistics and losses.
    pub fn regressible(&self, label: u16, ignore_label: u16) -> bool {
        label != ignore_label && (self.include_empty || label != EMPTY_CLASS)
    }
}

#[inline]
fn same_fn(policy: &ScanPolicy, ignore: u16) -> impl Fn(u16, u16) -> bool + Sync {
    let transparent_ignore = !policy.ignore_breaks_runs;
    move |a: u16, b: u16| a == b || (transparent_ignore && (a == ignore || b == ignore))
}

/// Scan one direction of one axis into a per-voxel channel buffer
/// (flat index order). `out` must hold `dims.total()` values.
fn scan_channel<F: Fn(u16, u16) -> bool>(
    labels: &[u16],
    dims: GridDims,
    axis: Axis,
    direction: Direction,
    same: &F,
    out: &mut [u32],
) {
    debug_assert_eq!(labels.len(), dims.total());
    debug_assert_eq!(out.len(), dims.total());
    let (x, y, z) = (dims.x, dims.y, dims.z);
    let yz = y * z;
    match (axis, direction) {
        (Axis::Z, Direction::Positive) => {
            for (line, lab) in out.chunks_exact_mut(z).zip(labels.chunks_exact(z)) {
                line[z - 1] = 1;
                for k in (0..z - 1).rev() {
                    line[k] = if same(lab[k], lab[k + 1]) {
                        line[k + 1] + 1
                    } else {
                        1
                    };
                }
            }
        }
        (Axis::Z, Direction::Negative) => {
            for (line, lab) in out.chunks_exact_mut(z).zip(labels.chunks_exact(z)) {
                line[0] = 1;
                for k in 1..z {
                    line[k] = if same(lab[k], lab[k - 1]) {
                        line[k - 1] + 1
                    } else {
                        1
                    };
                }
            }
        }
        (Axis::Y, Direction::Positive) => {
            for (slab, lab) in out.chunks_exact_mut(yz).zip(labels.chunks_exact(yz)) {
                slab[(y - 1) * z..].fill(1);
                for j in (0..y - 1).rev() {
                    for k in 0..z {
                        let v = j * z + k;
                        let w = v + z;
                        slab[v] = if same(lab[v], lab[w]) { slab[w] + 1 } else { 1 };
                    }
                }
            }
        }
        (Axis::Y, Direction::Negative) => {
            for (slab, lab) in out.chunks_exact_mut(yz).zip(labels.chunks_exact(yz)) {
                slab[..z].fill(1);
                for j in 1..y {
                    for k in 0..z {
                        let v = j * z + k;
                        let w = v - z;
                        slab[v] = if same(lab[v], lab[w]) { slab[w] + 1 } else { 1 };
                    }
                }
            }
        }
        (Axis::X, Direction::Positive) => {
            out[(x - 1) * yz..].fill(1);
            for i in (0..x - 1).rev() {
                let base = i * yz;
                for v in 0..yz {
                    let cur = base + v;
                    let nxt = cur + yz;
                    out[cur] = if same(labels[cur], labels[nxt]) {
                        out[nxt] + 1
                    } else {
                        1
                    };
                }
            }
        }
        (Axis::X, Direction::Negative) => {
            out[..yz].fill(1);
            for i in 1..x {
                let base = i * yz;
                for v in 0..yz {
                    let cur = base + v;
                    let prv = cur - yz;
                    out[cur] = if same(labels[cur], labels[prv]) {
                        out[prv] + 1
                    } else {
                        1
                    };
                }
            }
        }
    }
}

/// Positive-direction run lengths for one axis under the default policy.
pub fn run_length_positive(grid: &VoxelGrid, axis: Axis) -> Vec<u32> {
    run_length_along(grid, axis, Direction::Positive)
}

/// Run lengths for one axis and direction under the default policy.
pub fn run_length_along(grid: &VoxelGrid, axis: Axis, direction: Direction) -> Vec<u32> {
    let mut out = vec![0u32; grid.dims().total()];
    let same = same_fn(&ScanPolicy::default(), grid.ignore_label());
    scan_channel(grid.labels(), grid.dims(), axis, direction, &same, &mut out);
    out
}

/// Compute all six direction channels with single-pass line scans.
pub fn compute_offsets(grid: &VoxelGrid, policy: &ScanPolicy) -> OffsetField {
    let dims = grid.dims();
    let total = dims.total();
    let same = same_fn(policy, grid.ignore_label());
    let mut values = vec![0u32; total * 6];
    let mut chan = vec![0u32; total];
    for (c, (axis, direction)) in CHANNELS.iter().enumerate() {
        scan_channel(grid.labels(), dims, *axis, *direction, &same, &mut chan);
        for (v, &d) in chan.iter().enumerate() {
            values[v * 6 + c] = d;
        }
    }
    OffsetField::from_raw(dims, values)
}

/// Same result as `compute_offsets`, parallelized over independent lines.
/// Output is bit-identical regardless of thread count.
pub fn compute_offsets_parallel(grid: &VoxelGrid, policy: &ScanPolicy) -> OffsetField {
    let dims = grid.dims();
    let total = dims.total();
    let (x, y, z) = (dims.x, dims.y, dims.z);
    let yz = y * z;
    let labels = grid.labels();
    let same = same_fn(policy, grid.ignore_label());
    let mut values = vec![0u32; total * 6];
    let mut chan = vec![0u32; total];
    for (c, (axis, direction)) in CHANNELS.iter().enumerate() {
        match axis {
            // z-lines and y-slabs are disjoint chunks of the channel buffer
            Axis::Z | Axis::Y => {
                let chunk = if *axis == Axis::Z { z } else { yz };
                chan.par_chunks_exact_mut(chunk)
                    .zip(labels.par_chunks_exact(chunk))
                    .for_each(|(out, lab)| {
                        let d = GridDims {
                            x: 1,
                            y: if *axis == Axis::Z { 1 } else { y },
                            z,
                        };
                        scan_channel(lab, d, *axis, *direction, &same, out);
                    });
            }
            // x-slabs depend on each other; parallelize within each slab pair
            Axis::X => {
                let slabs: Vec<usize> = match direction {
                    Direction::Positive => (0..x - 1).rev().collect(),
                    Direction::Negative => (1..x).collect(),
                };
                let edge = match direction {
                    Direction::Positive => (x - 1) * yz..x * yz,
                    Direction::Negative => 0..yz,
                };
                chan[edge].fill(1);
                for i in slabs {
                    let neighbor = match direction {
                        Direction::Positive => i + 1,
                        Direction::Negative => i - 1,
                    };
                    let lo = i.min(neighbor) * yz;
                    let hi = i.max(neighbor) * yz;
                    let (left, right) = chan.split_at_mut(hi);
                    let (write, read) = if i < neighbor {
                        (&mut left[lo..lo + yz], &right[..yz])
                    } else {
                        let len = left.len();
                        (&mut right[..yz], &left[len - yz..])
                    };
                    let lab_cur = &labels[i * yz..(i + 1) * yz];
                    let lab_nbr = &labels[neighbor * yz..(neighbor + 1) * yz];
                    write
                        .par_iter_mut()
                        .zip(read.par_iter())
                        .zip(lab_cur.par_iter().zip(lab_nbr.par_iter()))
                        .for_each(|((w, &r), (&lc, &ln))| {
                            *w = if same(lc, ln) { r + 1 } else { 1 };
                        });
                }
            }
        }
        values
            .par_chunks_mut(6)
            .zip(chan.par_iter())
            .for_each(|(six, &d)| six[c] = d);
    }
    OffsetField::from_raw(dims, values)
}

/// Verification oracle: walk outward from every voxel until the label
/// changes or the border is hit, counting steps inclusive of self.
/// O(voxels x run length); use on small grids.
pub fn compute_offsets_naive(grid: &VoxelGrid) -> OffsetField {
    let dims = grid.dims();
    let labels = grid.labels();
    let mut values = vec![0u32; dims.total() * 6];
    for i in 0..dims.x {
        for j in 0..dims.y {
            for k in 0..dims.z {
                let v = dims.index_of(i, j, k);
                let label = labels[v];
                for (c, (axis, direction)) in CHANNELS.iter().enumerate() {
                    let (len, pos) = match axis {
                        Axis::X => (dims.x, i),
                        Axis::Y => (dims.y, j),
                        Axis::Z => (dims.z, k),
                    };
                    let mut dist = 1u32;
                    let mut p = pos;
                    loop {
                        let next = match direction {
                            Direction::Positive if p + 1 < len => p + 1,
                            Direction::Negative if p > 0 => p - 1,
                            _ => break,
                        };
                        let w = match axis {
                            Axis::X => dims.index_of(next, j, k),
                            Axis::Y => dims.index_of(i, next, k),
                            Axis::Z => dims.index_of(i, j, next),
                        };
                        if labels[w] != label {
                            break;
                        }
                        dist += 1;
                        p = next;
                    }
                    values[v * 6 + c] = dist;
                }
            }
        }
    }
    OffsetField::from_raw(dims, values)
}

/// Scale integer distances into (0, 1] by the extent of their axis.
pub fn normalize_offsets(field: &OffsetField) -> NormalizedOffsetField {
    let dims = field.dims();
    let inv = [
        1.0 / dims.x as f64,
        1.0 / dims.x as f64,
        1.0 / dims.y as f64,
        1.0 / dims.y as f64,
        1.0 / dims.z as f64,
        1.0 / dims.z as f64,
    ];
    let values = field
        .values()
        .iter()
        .enumerate()
        .map(|(n, &d)| d as f64 * inv[n % 6])
        .collect();
    NormalizedOffsetField::from_raw(dims, values)
}
