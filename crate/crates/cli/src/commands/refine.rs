//! `voxnt refine`: rewrite anomalous target-class voxels to the ignore
//! label and emit a per-file quality report.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;
use voxnt::io::write_grid;
use voxnt::offsets::{compute_offsets, ScanPolicy};
use voxnt::quality::{detect_anomalies, quality_report, refine_labels, AnomalyThresholds};
use voxnt::scale::scales_from_offsets;

use super::Context;
use crate::config::resolve_thresholds;
use crate::inputs::{ensure_out_dir, finish, grid_extension, load_grid, output_name, FileOutcome};
use crate::{Failure, RefineArgs};

/// Report header echoes the thresholds that produced the flags.
#[derive(Serialize)]
struct RefineReport<'a> {
    thresholds: &'a AnomalyThresholds,
    rewritten_voxels: u64,
    #[serde(flatten)]
    quality: voxnt::quality::QualityReport,
}

pub fn run(args: &RefineArgs) -> Result<(), Failure> {
    let ctx = Context::resolve(&args.common)?;
    let files = ctx.resolve_inputs(&args.inputs)?;
    ensure_out_dir(&ctx.out).map_err(Failure::from)?;
    let thresholds = resolve_thresholds(
        args.kmin.clone(),
        args.kmax.clone(),
        args.target_class.clone(),
        &ctx.config,
    )?;
    thresholds
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;

    let ext = grid_extension(ctx.format);
    let mut used = HashSet::new();
    let targets: Vec<_> = files
        .iter()
        .map(|f| {
            let grid_name = output_name(&mut used, f, ext);
            let report_name = format!(
                "{}.quality.json",
                grid_name.trim_end_matches(&format!(".{ext}"))
            );
            (ctx.out.join(grid_name), ctx.out.join(report_name))
        })
        .collect();

    let opts = ctx.format_options();
    let policy = ScanPolicy::default();
    let pool = ctx.thread_pool()?;
    let outcomes: Vec<FileOutcome> = pool.install(|| {
        files
            .par_iter()
            .zip(&targets)
            .map(|(input, (grid_out, report_out))| {
                let result = load_grid(input, ctx.dims, &opts).and_then(|grid| {
                    let scales = scales_from_offsets(&compute_offsets(&grid, &policy));
                    let mask = detect_anomalies(&scales, &thresholds)?;
                    let refined = refine_labels(&grid, &mask, &thresholds)?;
                    let rewritten = grid
                        .labels()
                        .iter()
                        .zip(refined.labels())
                        .filter(|(a, b)| a != b)
                        .count() as u64;
                    write_grid(&refined, grid_out, &opts)?;
                    let report = RefineReport {
                        thresholds: &thresholds,
                        rewritten_voxels: rewritten,
                        quality: quality_report(&grid, &mask)?,
                    };
                    let body = if ctx.jsonl {
                        serde_json::to_string(&report)?
                    } else {
                        serde_json::to_string_pretty(&report)?
                    };
                    std::fs::write(report_out, body)?;
                    Ok(format!(
                        "{rewritten} voxels rewritten -> {}",
                        grid_out.display()
                    ))
                });
                FileOutcome {
                    input: input.clone(),
                    result,
                }
            })
            .collect()
    });
    finish(outcomes)
}
