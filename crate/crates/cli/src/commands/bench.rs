//! `voxnt bench`: time the single-pass scans against the naive walking
//! oracle on a seeded synthetic scene and report voxel throughput.
//!
//! Timings naturally vary between runs; everything else in the output
//! (grid, directions, agreement) is deterministic.

use std::time::Instant;

use serde::Serialize;
use voxnt::grid::{channel_name, GridDims};
use voxnt::offsets::{compute_offsets, compute_offsets_naive, run_length_along, ScanPolicy};
use voxnt::synth::{synthesize, BoxShape, SceneSpec, SplitMix64};
use voxnt::VoxelGrid;
use voxnt::CHANNELS;

use super::Context;
use crate::{BenchArgs, Failure};

#[derive(Serialize)]
struct BenchRow {
    grid: String,
    direction: String,
    algorithm: String,
    ns_per_voxel: f64,
}

#[derive(Serialize)]
struct BenchSummary {
    grid: String,
    total_voxels: usize,
    fast_ns_per_voxel: f64,
    naive_ns_per_voxel: f64,
    speedup: f64,
    agrees: bool,
}

#[derive(Serialize)]
struct BenchReport {
    rows: Vec<BenchRow>,
    summary: BenchSummary,
}

/// A mostly-empty scene with a few boxes, the realistic workload shape for
/// outdoor occupancy grids.
fn fixture(dims: GridDims, seed: u64) -> VoxelGrid {
    let mut rng = SplitMix64::new(seed);
    let mut spec = SceneSpec::empty(dims);
    spec.seed = seed;
    let lens = dims.as_array();
    for n in 0..6 {
        let mut min = [0usize; 3];
        let mut max = [0usize; 3];
        for a in 0..3 {
            min[a] = rng.below(lens[a]);
            let room = lens[a] - min[a];
            max[a] = min[a] + rng.below(room.min(lens[a] / 3 + 1).max(1));
        }
        spec.shapes.push(BoxShape {
            min,
            max,
            class_id: 1 + (n % 4) as u16,
        });
    }
    synthesize(&spec).expect("fixture spec is in bounds").grid
}

fn best_of<R>(iters: usize, mut f: impl FnMut() -> R) -> (f64, R) {
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..iters.max(1) {
        let t = Instant::now();
        let r = f();
        best = best.min(t.elapsed().as_nanos() as f64);
        out = Some(r);
    }
    (best, out.unwrap())
}

pub fn run(args: &BenchArgs) -> Result<(), Failure> {
    let ctx = Context::resolve(&args.common)?;
    let dims = ctx.dims.unwrap_or(GridDims {
        x: 64,
        y: 64,
        z: 16,
    });
    let seed = args.seed.or(ctx.config.seed).unwrap_or(0);
    let iters = args.iters.or(ctx.config.iters).unwrap_or(3);

    let grid = fixture(dims, seed);
    let total = dims.total();
    let name = dims.to_string();
    let policy = ScanPolicy::default();

    let mut rows = Vec::new();
    for (c, (axis, direction)) in CHANNELS.iter().enumerate() {
        let (ns, _) = best_of(iters, || run_length_along(&grid, *axis, *direction));
        rows.push(BenchRow {
            grid: name.clone(),
            direction: channel_name(c).to_string(),
            algorithm: "fast".into(),
            ns_per_voxel: ns / total as f64,
        });
    }
    let (fast_ns, fast_field) = best_of(iters, || compute_offsets(&grid, &policy));
    rows.push(BenchRow {
        grid: name.clone(),
        direction: "all".into(),
        algorithm: "fast".into(),
        ns_per_voxel: fast_ns / total as f64,
    });
    let (naive_ns, naive_field) = best_of(iters, || compute_offsets_naive(&grid));
    rows.push(BenchRow {
        grid: name.clone(),
        direction: "all".into(),
        algorithm: "naive".into(),
        ns_per_voxel: naive_ns / total as f64,
    });

    let report = BenchReport {
        summary: BenchSummary {
            grid: name,
            total_voxels: total,
            fast_ns_per_voxel: fast_ns / total as f64,
            naive_ns_per_voxel: naive_ns / total as f64,
            speedup: naive_ns / fast_ns,
            agrees: fast_field == naive_field,
        },
        rows,
    };
    if !report.summary.agrees {
        return Err(Failure::partial("fast and naive offset fields disagree"));
    }
    let body = if ctx.jsonl {
        let mut lines = String::new();
        for row in &report.rows {
            lines.push_str(&serde_json::to_string(row).unwrap());
            lines.push('\n');
        }
        lines.push_str(&serde_json::to_string(&report.summary).unwrap());
        lines
    } else {
        serde_json::to_string_pretty(&report).unwrap()
    };
    println!("{body}");
    Ok(())
}
