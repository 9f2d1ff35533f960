//! `voxnt eval`: accumulate a confusion matrix over (truth, prediction)
//! pairs and print the metrics report as JSON on stdout.

use voxnt::metrics::{finalize, ConfusionMatrix};

use super::Context;
use crate::inputs::{expand_inputs, load_grid};
use crate::{EvalArgs, Failure};

pub fn run(args: &EvalArgs) -> Result<(), Failure> {
    let ctx = Context::resolve(&args.common)?;
    let truth_pattern = args
        .truth
        .clone()
        .or_else(|| ctx.config.truth.clone())
        .ok_or_else(|| Failure::usage("missing --truth"))?;
    let pred_pattern = args
        .pred
        .clone()
        .or_else(|| ctx.config.pred.clone())
        .ok_or_else(|| Failure::usage("missing --pred"))?;

    let truths = expand_inputs(&[truth_pattern]).map_err(Failure::from)?;
    let preds = expand_inputs(&[pred_pattern]).map_err(Failure::from)?;
    if truths.is_empty() || preds.is_empty() {
        return Err(Failure::usage("no inputs matched"));
    }
    if truths.len() != preds.len() {
        return Err(Failure::usage(format!(
            "{} truth grids but {} predictions; pairs are matched in sorted order",
            truths.len(),
            preds.len()
        )));
    }

    let opts = ctx.format_options();
    let mut cm = ConfusionMatrix::new(ctx.num_classes);
    for (t_path, p_path) in truths.iter().zip(&preds) {
        let truth = load_grid(t_path, ctx.dims, &opts)
            .map_err(|e| Failure::usage(format!("{}: {e:#}", t_path.display())))?;
        let pred = load_grid(p_path, ctx.dims, &opts)
            .map_err(|e| Failure::usage(format!("{}: {e:#}", p_path.display())))?;
        cm.accumulate(&truth, &pred).map_err(|e| {
            Failure::usage(format!("{} vs {}: {e}", t_path.display(), p_path.display()))
        })?;
        eprintln!(
            "evaluated {} against {}",
            p_path.display(),
            t_path.display()
        );
    }

    let report = finalize(&cm);
    let body = if ctx.jsonl {
        serde_json::to_string(&report)
    } else {
        serde_json::to_string_pretty(&report)
    }
    .map_err(|e| Failure::usage(e.to_string()))?;
    println!("{body}");
    if args.common.out.is_some() || ctx.config.out.is_some() {
        // --out for eval names a file, not a directory
        std::fs::write(&ctx.out, format!("{body}\n"))
            .map_err(|e| Failure::partial(format!("{}: {e}", ctx.out.display())))?;
    }
    Ok(())
}
