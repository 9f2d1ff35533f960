//! `voxnt offsets`: one "VXO1" offset field per input grid.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use voxnt::io::write_offsets;
use voxnt::offsets::{compute_offsets, compute_offsets_parallel, ScanPolicy};

use super::Context;
use crate::inputs::{ensure_out_dir, finish, load_grid, output_name, FileOutcome};
use crate::{Failure, OffsetsArgs};

#[derive(Serialize)]
struct OffsetsRecord {
    input: String,
    output: String,
    voxels: usize,
}

pub fn run(args: &OffsetsArgs) -> Result<(), Failure> {
    let ctx = Context::resolve(&args.common)?;
    let files = ctx.resolve_inputs(&args.inputs)?;
    ensure_out_dir(&ctx.out).map_err(Failure::from)?;

    let mut used = HashSet::new();
    let targets: Vec<_> = files
        .iter()
        .map(|f| ctx.out.join(output_name(&mut used, f, "vxo")))
        .collect();

    let opts = ctx.format_options();
    let policy = ScanPolicy::default();
    // one big input parallelizes inside the scan, many files across files
    let within_file = files.len() == 1 && ctx.workers > 1;
    let pool = ctx.thread_pool()?;
    let results: Vec<(FileOutcome, usize)> = pool.install(|| {
        files
            .par_iter()
            .zip(&targets)
            .map(|(input, target)| {
                let started = Instant::now();
                let mut voxels = 0;
                let result = load_grid(input, ctx.dims, &opts).and_then(|grid| {
                    voxels = grid.dims().total();
                    let field = if within_file {
                        compute_offsets_parallel(&grid, &policy)
                    } else {
                        compute_offsets(&grid, &policy)
                    };
                    write_offsets(&field, target)?;
                    Ok(format!(
                        "{voxels} voxels in {:.1} ms -> {}",
                        started.elapsed().as_secs_f64() * 1e3,
                        target.display()
                    ))
                });
                (
                    FileOutcome {
                        input: input.clone(),
                        result,
                    },
                    voxels,
                )
            })
            .collect()
    });

    let (outcomes, voxel_counts): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    if ctx.jsonl {
        for ((outcome, target), voxels) in outcomes.iter().zip(&targets).zip(voxel_counts) {
            if outcome.result.is_ok() {
                let record = OffsetsRecord {
                    input: outcome.input.display().to_string(),
                    output: target.display().to_string(),
                    voxels,
                };
                println!("{}", serde_json::to_string(&record).unwrap());
            }
        }
    }
    finish(outcomes)
}
