//! Subcommand implementations.

use std::path::PathBuf;

use anyhow::Result;
use voxnt::io::{AxisOrder, FormatOptions, GridFormat};
use voxnt::GridDims;

use crate::config::{self, JobConfig};
use crate::{CommonArgs, Failure};

pub mod bench;
pub mod eval;
pub mod offsets;
pub mod refine;
pub mod stats;
pub mod synth;

/// Flag-over-config resolution of the shared options.
pub struct Context {
    pub config: JobConfig,
    pub dims: Option<GridDims>,
    pub format: GridFormat,
    pub axis_order: AxisOrder,
    pub num_classes: u16,
    pub workers: usize,
    pub out: PathBuf,
    pub jsonl: bool,
}

impl Context {
    pub fn resolve(common: &CommonArgs) -> Result<Context> {
        let config = JobConfig::load(common.config.as_ref())?;
        let dims = config::resolve_dims(common.dims.clone(), config.dims)?;
        let format = config::resolve_format(common.format.clone(), config.format.clone())?;
        let axis_order =
            config::resolve_axis_order(common.axis_order.clone(), config.axis_order.clone())?;
        let num_classes = common.num_classes.or(config.num_classes).unwrap_or(20);
        let workers = config::resolve_workers(common.workers, config.workers)?;
        let out = common
            .out
            .clone()
            .or_else(|| config.out.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        let jsonl = common.jsonl || config.jsonl.unwrap_or(false);
        Ok(Context {
            config,
            dims,
            format,
            axis_order,
            num_classes,
            workers,
            out,
            jsonl,
        })
    }

    pub fn format_options(&self) -> FormatOptions {
        FormatOptions {
            format: self.format,
            axis_order: self.axis_order,
            num_classes: self.num_classes,
            ..Default::default()
        }
    }

    /// Inputs from the command line, else from the config file.
    pub fn resolve_inputs(&self, cli_inputs: &[String]) -> Result<Vec<PathBuf>, Failure> {
        let patterns: Vec<String> = if cli_inputs.is_empty() {
            self.config.inputs.clone().unwrap_or_default()
        } else {
            cli_inputs.to_vec()
        };
        if patterns.is_empty() {
            return Err(Failure::usage("no inputs given"));
        }
        let files = crate::inputs::expand_inputs(&patterns).map_err(Failure::from)?;
        if files.is_empty() {
            return Err(Failure::usage("no inputs matched"));
        }
        Ok(files)
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool, Failure> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Failure::usage(e.to_string()))
    }
}
