//! `voxnt stats`: merged per-class instance scale histograms.

use rayon::prelude::*;
use voxnt::grid::{Axis, EMPTY_CLASS};
use voxnt::offsets::{compute_offsets, ScanPolicy};
use voxnt::scale::{
    class_scale_histogram_with, export_histograms, scales_from_offsets, ExportFormat, SampleStat,
    ScaleHistogram,
};

use super::Context;
use crate::inputs::{ensure_out_dir, finish, load_grid, FileOutcome};
use crate::{Failure, StatsArgs};

pub fn run(args: &StatsArgs) -> Result<(), Failure> {
    let ctx = Context::resolve(&args.common)?;
    let files = ctx.resolve_inputs(&args.inputs)?;
    ensure_out_dir(&ctx.out).map_err(Failure::from)?;

    let bins = args.bins.or(ctx.config.bins).unwrap_or(32);
    let include_empty = args
        .include_empty
        .or(ctx.config.include_empty)
        .unwrap_or(true);
    let per_run = args.per_run || ctx.config.per_run.unwrap_or(false);
    let stat = if per_run {
        SampleStat::PerRun
    } else {
        SampleStat::PerVoxel
    };
    let policy = ScanPolicy {
        include_empty,
        ..Default::default()
    };
    let classes: Vec<u16> = (0..ctx.num_classes)
        .filter(|&c| include_empty || c != EMPTY_CLASS)
        .collect();

    let opts = ctx.format_options();
    let pool = ctx.thread_pool()?;
    let per_file: Vec<(FileOutcome, Vec<ScaleHistogram>)> = pool.install(|| {
        files
            .par_iter()
            .map(|input| {
                let mut hists = Vec::new();
                let result = load_grid(input, ctx.dims, &opts).and_then(|grid| {
                    let scales = scales_from_offsets(&compute_offsets(&grid, &policy));
                    for &class in &classes {
                        for axis in Axis::ALL {
                            hists.push(class_scale_histogram_with(
                                &grid, &scales, class, axis, bins, stat,
                            )?);
                        }
                    }
                    Ok(format!("{} voxels tallied", grid.dims().total()))
                });
                (
                    FileOutcome {
                        input: input.clone(),
                        result,
                    },
                    hists,
                )
            })
            .collect()
    });

    // merge across files in input order; a file whose bin edges disagree
    // (different grid extents) is recorded as failed, never half-merged
    let mut merged: Vec<ScaleHistogram> = Vec::new();
    let mut outcomes = Vec::new();
    for (mut outcome, hists) in per_file {
        if outcome.result.is_ok() {
            if merged.is_empty() {
                merged = hists;
            } else {
                let compatible = merged.len() == hists.len()
                    && merged.iter().zip(&hists).all(|(m, h)| {
                        m.class_id == h.class_id && m.axis == h.axis && m.bin_edges == h.bin_edges
                    });
                if compatible {
                    for (m, h) in merged.iter_mut().zip(&hists) {
                        m.merge(h).expect("checked compatible");
                    }
                } else {
                    outcome.result = Err(anyhow::anyhow!(
                        "grid extents differ from the first input; histograms not merged"
                    ));
                }
            }
        }
        outcomes.push(outcome);
    }

    if merged.is_empty() {
        finish(outcomes)?;
        return Err(Failure::partial("no grids could be tallied"));
    }
    let (name, format) = if ctx.jsonl {
        ("histograms.jsonl", ExportFormat::JsonLines)
    } else {
        ("histograms.csv", ExportFormat::Csv)
    };
    let target = ctx.out.join(name);
    export_histograms(&merged, &target, format).map_err(|e| Failure::partial(e.to_string()))?;
    eprintln!("wrote {}", target.display());
    finish(outcomes)
}
