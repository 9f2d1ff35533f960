//! Job configuration: JSON config file merged under command-line flags.
//! Flags always win; the config fills in whatever the flags left unset.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use voxnt::io::{AxisOrder, GridFormat};
use voxnt::quality::AnomalyThresholds;
use voxnt::GridDims;

/// Optional settings loadable from a JSON file via `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub inputs: Option<Vec<String>>,
    pub dims: Option<[usize; 3]>,
    pub axis_order: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub num_classes: Option<u16>,
    pub workers: Option<usize>,
    pub bins: Option<usize>,
    pub include_empty: Option<bool>,
    pub per_run: Option<bool>,
    pub kmin: Option<[u32; 3]>,
    pub kmax: Option<[Option<u32>; 3]>,
    pub target_classes: Option<Vec<u16>>,
    pub jsonl: Option<bool>,
    pub truth: Option<String>,
    pub pred: Option<String>,
    pub spec: Option<PathBuf>,
    pub seed: Option<u64>,
    pub iters: Option<usize>,
}

impl JobConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<JobConfig> {
        match path {
            None => Ok(JobConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("cannot parse config {}", p.display()))
            }
        }
    }
}

pub fn parse_dims(s: &str) -> Result<GridDims> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("dims must be three comma-separated counts, got {s:?}");
    }
    let n: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse().with_context(|| format!("bad dim {p:?}")))
        .collect::<Result<_>>()?;
    Ok(GridDims::new(n[0], n[1], n[2])?)
}

pub fn parse_triple(s: &str) -> Result<[u32; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("expected three comma-separated values, got {s:?}");
    }
    let mut out = [0u32; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .trim()
            .parse()
            .with_context(|| format!("bad value {p:?}"))?;
    }
    Ok(out)
}

/// Per-axis maxima; `off`, `none` or `-` disables an axis.
pub fn parse_kmax(s: &str) -> Result<[Option<u32>; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("expected three comma-separated values, got {s:?}");
    }
    let mut out = [None; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        let p = p.trim();
        *o = match p {
            "off" | "none" | "-" => None,
            _ => Some(p.parse().with_context(|| format!("bad value {p:?}"))?),
        };
    }
    Ok(out)
}

pub fn parse_classes(s: &str) -> Result<Vec<u16>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .with_context(|| format!("bad class id {p:?}"))
        })
        .collect()
}

/// Worker count: flag, then config, then VOXNT_WORKERS, then the machine.
pub fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> Result<usize> {
    let n = match flag.or(config) {
        Some(n) => n,
        None => match std::env::var("VOXNT_WORKERS") {
            Ok(v) => v
                .parse()
                .with_context(|| format!("VOXNT_WORKERS={v:?} is not a count"))?,
            Err(_) => std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        },
    };
    if n == 0 {
        bail!("worker count must be at least 1");
    }
    Ok(n)
}

pub fn resolve_format(flag: Option<String>, config: Option<String>) -> Result<GridFormat> {
    let name = flag.or(config).unwrap_or_else(|| "container".into());
    Ok(name.parse::<GridFormat>()?)
}

pub fn resolve_axis_order(flag: Option<String>, config: Option<String>) -> Result<AxisOrder> {
    match flag.or(config) {
        None => Ok(AxisOrder::canonical()),
        Some(s) => Ok(s.parse::<AxisOrder>()?),
    }
}

pub fn resolve_dims(flag: Option<String>, config: Option<[usize; 3]>) -> Result<Option<GridDims>> {
    match flag {
        Some(s) => Ok(Some(parse_dims(&s)?)),
        None => match config {
            Some([x, y, z]) => Ok(Some(GridDims::new(x, y, z)?)),
            None => Ok(None),
        },
    }
}

pub fn resolve_thresholds(
    kmin: Option<String>,
    kmax: Option<String>,
    target: Option<String>,
    config: &JobConfig,
) -> Result<AnomalyThresholds> {
    let defaults = AnomalyThresholds::default();
    Ok(AnomalyThresholds {
        k_min: match kmin {
            Some(s) => parse_triple(&s)?,
            None => config.kmin.unwrap_or(defaults.k_min),
        },
        k_max: match kmax {
            Some(s) => parse_kmax(&s)?,
            None => config.kmax.unwrap_or(defaults.k_max),
        },
        target_classes: match target {
            Some(s) => parse_classes(&s)?,
            None => config
                .target_classes
                .clone()
                .unwrap_or(defaults.target_classes),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parse() {
        let d = parse_dims("256,256,32").unwrap();
        assert_eq!((d.x, d.y, d.z), (256, 256, 32));
        assert!(parse_dims("4,4").is_err());
        assert!(parse_dims("a,b,c").is_err());
    }

    #[test]
    fn kmax_accepts_off() {
        assert_eq!(parse_kmax("30,30,off").unwrap(), [Some(30), Some(30), None]);
        assert_eq!(parse_kmax("5,6,7").unwrap(), [Some(5), Some(6), Some(7)]);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<JobConfig>(r#"{"dimz": [1,2,3]}"#);
        assert!(err.is_err());
    }
}
