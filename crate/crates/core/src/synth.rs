//! Synthetic scenes with analytically known structure: axis-aligned boxes
//! on a uniform background, plus seeded speck and streak injection for
//! label-quality fixtures. Generation is bit-reproducible from the seed on
//! every platform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridDims, OffsetField, VoxelGrid};

/// SplitMix64; tiny, seedable and stable across platforms.
#[derive(Clone, Debug)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }
}

/// Axis-aligned box with inclusive corners.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxShape {
    pub min: [usize; 3],
    pub max: [usize; 3],
    pub class_id: u16,
}

impl BoxShape {
    fn contains_axis(&self, axis: usize, v: usize) -> bool {
        self.min[axis] <= v && v <= self.max[axis]
    }

    fn overlaps_padded(&self, other: &BoxShape) -> bool {
        (0..3).all(|a| {
            let lo = other.min[a].saturating_sub(1);
            let hi = other.max[a] + 1;
            self.min[a] <= hi && lo <= self.max[a]
        })
    }
}

/// Speck injection: isolated single voxels of one class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeckSpec {
    pub count: usize,
    pub class_id: u16,
}

/// Streak injection: 1x1 cross-section segments of a given length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreakSpec {
    pub count: usize,
    pub axis: Axis,
    pub length: usize,
    pub class_id: u16,
}

/// Declarative scene description. Shapes paint in order (later wins);
/// specks and streaks are placed by seeded rejection sampling after the
/// boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub dims: GridDims,
    #[serde(default)]
    pub background_class: u16,
    #[serde(default)]
    pub shapes: Vec<BoxShape>,
    #[serde(default)]
    pub specks: Option<SpeckSpec>,
    #[serde(default)]
    pub streaks: Option<StreakSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Class count of the produced grid; defaults to max used class + 1.
    #[serde(default)]
    pub num_classes: Option<u16>,
}

impl SceneSpec {
    pub fn empty(dims: GridDims) -> Self {
        SceneSpec {
            dims,
            background_class: 0,
            shapes: Vec::new(),
            specks: None,
            streaks: None,
            seed: 0,
            num_classes: None,
        }
    }

    fn derived_num_classes(&self) -> u16 {
        let mut max = self.background_class;
        for b in &self.shapes {
            max = max.max(b.class_id);
        }
        if let Some(s) = self.specks {
            max = max.max(s.class_id);
        }
        if let Some(s) = self.streaks {
            max = max.max(s.class_id);
        }
        // saturate so an out-of-range class id fails grid validation
        // instead of overflowing
        let needed = max.saturating_add(1);
        self.num_classes.unwrap_or(needed).max(needed)
    }

    fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        for (n, b) in self.shapes.iter().enumerate() {
            for a in 0..3 {
                if b.min[a] > b.max[a] || b.max[a] >= self.dims.as_array()[a] {
                    return Err(Error::Invalid(format!(
                        "shape {n}: corners {:?}..{:?} out of bounds for {}",
                        b.min, b.max, self.dims
                    )));
                }
            }
        }
        if let Some(s) = self.streaks {
            if s.length == 0 || s.length > self.dims.axis_len(s.axis) {
                return Err(Error::Invalid(format!(
                    "streak length {} does not fit axis {} of {}",
                    s.length,
                    s.axis.name(),
                    self.dims
                )));
            }
        }
        Ok(())
    }
}

/// Where the injected anomalies ended up.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub boxes: Vec<BoxShape>,
    pub specks: Vec<[usize; 3]>,
    pub streaks: Vec<BoxShape>,
}

/// A generated grid plus the manifest of what was placed.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthScene {
    pub grid: VoxelGrid,
    pub manifest: SceneManifest,
}

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Rasterize a scene spec. Deterministic for a given seed.
pub fn synthesize(spec: &SceneSpec) -> Result<SynthScene> {
    spec.validate()?;
    let dims = spec.dims;
    let num_classes = spec.derived_num_classes();
    let mut labels = vec![spec.background_class; dims.total()];
    for b in &spec.shapes {
        for i in b.min[0]..=b.max[0] {
            for j in b.min[1]..=b.max[1] {
                labels[dims.index_of(i, j, b.min[2])..=dims.index_of(i, j, b.max[2])]
                    .fill(b.class_id);
            }
        }
    }
    let mut manifest = SceneManifest {
        boxes: spec.shapes.clone(),
        ..Default::default()
    };
    let mut rng = SplitMix64::new(spec.seed);

    if let Some(streaks) = spec.streaks {
        for _ in 0..streaks.count {
            let placed = place_streak(&mut rng, &mut labels, dims, streaks)?;
            manifest.streaks.push(placed);
        }
    }
    if let Some(specks) = spec.specks {
        for _ in 0..specks.count {
            let at = place_speck(&mut rng, &mut labels, dims, spec.background_class, specks)?;
            manifest.specks.push(at);
        }
    }

    let grid = VoxelGrid::new(dims, labels, num_classes)?;
    Ok(SynthScene { grid, manifest })
}

fn place_streak(
    rng: &mut SplitMix64,
    labels: &mut [u16],
    dims: GridDims,
    spec: StreakSpec,
) -> Result<BoxShape> {
    let axis = spec.axis.index();
    let lens = dims.as_array();
    'attempt: for _ in 0..PLACEMENT_ATTEMPTS {
        let mut start = [rng.below(lens[0]), rng.below(lens[1]), rng.below(lens[2])];
        start[axis] = rng.below(lens[axis] - spec.length + 1);
        // segment cells must differ from the streak class, and so must the
        // two end caps, so the injected run has exactly the asked length
        for step in 0..spec.length {
            let mut c = start;
            c[axis] += step;
            if labels[dims.index_of(c[0], c[1], c[2])] == spec.class_id {
                continue 'attempt;
            }
        }
        for p in [start[axis].checked_sub(1), Some(start[axis] + spec.length)]
            .into_iter()
            .flatten()
            .filter(|&p| p < lens[axis])
        {
            let mut c = start;
            c[axis] = p;
            if labels[dims.index_of(c[0], c[1], c[2])] == spec.class_id {
                continue 'attempt;
            }
        }
        let mut max = start;
        max[axis] += spec.length - 1;
        for step in 0..spec.length {
            let mut c = start;
            c[axis] += step;
            labels[dims.index_of(c[0], c[1], c[2])] = spec.class_id;
        }
        return Ok(BoxShape {
            min: start,
            max,
            class_id: spec.class_id,
        });
    }
    Err(Error::UnsupportedScene(format!(
        "could not place a {}-voxel streak after {PLACEMENT_ATTEMPTS} attempts",
        spec.length
    )))
}

fn place_speck(
    rng: &mut SplitMix64,
    labels: &mut [u16],
    dims: GridDims,
    background: u16,
    spec: SpeckSpec,
) -> Result<[usize; 3]> {
    let lens = dims.as_array();
    'attempt: for _ in 0..PLACEMENT_ATTEMPTS {
        let c = [rng.below(lens[0]), rng.below(lens[1]), rng.below(lens[2])];
        if labels[dims.index_of(c[0], c[1], c[2])] != background || background == spec.class_id {
            continue;
        }
        // all six axis neighbors must differ from the speck class so every
        // run through the speck has length 1
        for axis in 0..3 {
            for delta in [-1isize, 1] {
                let p = c[axis] as isize + delta;
                if p < 0 || p as usize >= lens[axis] {
                    continue;
                }
                let mut n = c;
                n[axis] = p as usize;
                if labels[dims.index_of(n[0], n[1], n[2])] == spec.class_id {
                    continue 'attempt;
                }
            }
        }
        labels[dims.index_of(c[0], c[1], c[2])] = spec.class_id;
        return Ok(c);
    }
    Err(Error::UnsupportedScene(format!(
        "could not place an isolated speck after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

/// Closed-form offsets for scenes whose shapes (boxes, placed specks and
/// streaks) are pairwise non-adjacent with at least one voxel of gap and
/// never share the background class. Falls out of the interval structure
/// of each scan line: every shape cross-section and every background gap
/// is one maximal run.
pub fn expected_offsets(spec: &SceneSpec) -> Result<OffsetField> {
    let scene = synthesize(spec)?;
    let mut shapes = scene.manifest.boxes.clone();
    for &at in &scene.manifest.specks {
        shapes.push(BoxShape {
            min: at,
            max: at,
            class_id: spec.specks.unwrap().class_id,
        });
    }
    shapes.extend(scene.manifest.streaks.iter().copied());

    for (n, s) in shapes.iter().enumerate() {
        if s.class_id == spec.background_class {
            return Err(Error::UnsupportedScene(format!(
                "shape {n} shares the background class {}",
                spec.background_class
            )));
        }
        for other in &shapes[n + 1..] {
            if s.overlaps_padded(other) {
                return Err(Error::UnsupportedScene(
                    "shapes overlap or touch; runs are not analytically separable".into(),
                ));
            }
        }
    }

    let dims = spec.dims;
    let mut values = vec![0u32; dims.total() * 6];
    let lens = dims.as_array();
    for axis in 0..3 {
        let (u_axis, v_axis) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for u in 0..lens[u_axis] {
            for v in 0..lens[v_axis] {
                // intervals of shapes crossing this line, sorted by start
                let mut cuts: Vec<(usize, usize)> = shapes
                    .iter()
                    .filter(|s| s.contains_axis(u_axis, u) && s.contains_axis(v_axis, v))
                    .map(|s| (s.min[axis], s.max[axis]))
                    .collect();
                cuts.sort_unstable();
                // walk segments: background gaps and shape intervals alternate
                let mut segments: Vec<(usize, usize)> = Vec::with_capacity(cuts.len() * 2 + 1);
                let mut cursor = 0usize;
                for &(lo, hi) in &cuts {
                    if lo > cursor {
                        segments.push((cursor, lo - 1));
                    }
                    segments.push((lo, hi));
                    cursor = hi + 1;
                }
                if cursor < lens[axis] {
                    segments.push((cursor, lens[axis] - 1));
                }
                for (s, e) in segments {
                    for p in s..=e {
                        let mut c = [0usize; 3];
                        c[axis] = p;
                        c[u_axis] = u;
                        c[v_axis] = v;
                        let voxel = dims.index_of(c[0], c[1], c[2]);
                        values[voxel * 6 + axis * 2] = (e - p + 1) as u32;
                        values[voxel * 6 + axis * 2 + 1] = (p - s + 1) as u32;
                    }
                }
            }
        }
    }
    OffsetField::new(dims, values)
}
