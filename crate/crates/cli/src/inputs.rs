//! Input resolution and shared per-file processing helpers.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use voxnt::io::{read_grid, sniff_format, FormatOptions, GridFormat};
use voxnt::{GridDims, VoxelGrid};

/// Expand path-or-glob patterns into a sorted, deduplicated file list.
pub fn expand_inputs(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for pattern in patterns {
        let path = Path::new(pattern);
        if path.is_dir() {
            for entry in std::fs::read_dir(path)? {
                let p = entry?.path();
                if p.is_file() {
                    files.push(p);
                }
            }
        } else if pattern.contains(['*', '?', '[']) {
            for hit in glob::glob(pattern)? {
                files.push(hit?);
            }
        } else {
            files.push(path.to_path_buf());
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

/// Load one grid, sniffing container vs raw; raw files need `dims`.
pub fn load_grid(path: &Path, dims: Option<GridDims>, opts: &FormatOptions) -> Result<VoxelGrid> {
    let format = sniff_format(path)?;
    let mut opts = opts.clone();
    opts.format = format;
    match format {
        GridFormat::Container => Ok(read_grid(path, GridDims::new(1, 1, 1)?, &opts)?),
        GridFormat::Raw => {
            let dims = dims.ok_or_else(|| {
                anyhow!(
                    "{}: raw input needs grid extents; pass --dims X,Y,Z",
                    path.display()
                )
            })?;
            Ok(read_grid(path, dims, &opts)?)
        }
    }
}

/// Output file name for an input, with deterministic de-collision.
pub fn output_name(
    used: &mut std::collections::HashSet<String>,
    input: &Path,
    ext: &str,
) -> String {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "grid".into());
    let mut name = format!("{stem}.{ext}");
    let mut n = 2;
    while !used.insert(name.clone()) {
        name = format!("{stem}-{n}.{ext}");
        n += 1;
    }
    name
}

pub fn grid_extension(format: GridFormat) -> &'static str {
    match format {
        GridFormat::Raw => "raw",
        GridFormat::Container => "vxg",
    }
}

/// Outcome of processing one input file.
pub struct FileOutcome {
    pub input: PathBuf,
    pub result: Result<String>,
}

/// Summarize outcomes: per-file diagnostics to stderr, then the exit code
/// (0 all good, 2 if anything failed).
pub fn finish(outcomes: Vec<FileOutcome>) -> Result<(), crate::Failure> {
    let mut failed = 0usize;
    for o in &outcomes {
        match &o.result {
            Ok(note) => eprintln!("{}: {note}", o.input.display()),
            Err(e) => {
                failed += 1;
                eprintln!("{}: error: {e:#}", o.input.display());
            }
        }
    }
    if failed > 0 {
        Err(crate::Failure::partial(format!(
            "{failed} of {} inputs failed",
            outcomes.len()
        )))
    } else {
        Ok(())
    }
}

pub fn ensure_out_dir(out: &Path) -> Result<()> {
    if !out.exists() {
        std::fs::create_dir_all(out)?;
    }
    if !out.is_dir() {
        bail!("output path {} is not a directory", out.display());
    }
    Ok(())
}
