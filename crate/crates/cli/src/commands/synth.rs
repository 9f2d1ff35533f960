//! `voxnt synth`: rasterize a scene spec into a grid plus a manifest of
//! everything that was placed.

use anyhow::Context as _;
use voxnt::io::write_grid;
use voxnt::synth::{synthesize, SceneSpec};

use super::Context;
use crate::inputs::{ensure_out_dir, grid_extension};
use crate::{Failure, SynthArgs};

pub fn run(args: &SynthArgs) -> Result<(), Failure> {
    let ctx = Context::resolve(&args.common)?;
    let spec_path = args
        .spec
        .clone()
        .or_else(|| ctx.config.spec.clone())
        .ok_or_else(|| Failure::usage("missing --spec"))?;
    let text = std::fs::read_to_string(&spec_path)
        .with_context(|| format!("cannot read spec {}", spec_path.display()))
        .map_err(Failure::from)?;
    let spec: SceneSpec = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse spec {}", spec_path.display()))
        .map_err(Failure::from)?;

    ensure_out_dir(&ctx.out).map_err(Failure::from)?;
    let scene = synthesize(&spec).map_err(|e| Failure::usage(e.to_string()))?;

    let stem = spec_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into());
    let grid_path = ctx
        .out
        .join(format!("{stem}.{}", grid_extension(ctx.format)));
    let manifest_path = ctx.out.join(format!("{stem}.manifest.json"));

    write_grid(&scene.grid, &grid_path, &ctx.format_options())
        .map_err(|e| Failure::partial(e.to_string()))?;
    let manifest = serde_json::to_string_pretty(&scene.manifest)
        .map_err(|e| Failure::partial(e.to_string()))?;
    std::fs::write(&manifest_path, manifest)
        .map_err(|e| Failure::partial(format!("{}: {e}", manifest_path.display())))?;

    eprintln!(
        "wrote {} and {}",
        grid_path.display(),
        manifest_path.display()
    );
    Ok(())
}
