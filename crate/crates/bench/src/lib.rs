//! Shared fixtures for the criterion benchmarks.

use voxnt::synth::{synthesize, BoxShape, SceneSpec, SplitMix64};
use voxnt::{GridDims, VoxelGrid};

/// Mostly-empty scene with a few boxes, the realistic occupancy workload.
pub fn box_scene(x: usize, y: usize, z: usize, seed: u64) -> VoxelGrid {
    let dims = GridDims::new(x, y, z).unwrap();
    let mut rng = SplitMix64::new(seed);
    let mut spec = SceneSpec::empty(dims);
    let lens = dims.as_array();
    for n in 0..6 {
        let mut min = [0usize; 3];
        let mut max = [0usize; 3];
        for a in 0..3 {
            min[a] = rng.below(lens[a]);
            max[a] = (min[a] + 1 + rng.below((lens[a] / 5).max(1))).min(lens[a] - 1);
        }
        spec.shapes.push(BoxShape {
            min,
            max,
            class_id: 1 + (n % 4) as u16,
        });
    }
    synthesize(&spec).unwrap().grid
}

/// Dense random labels, the worst case for run lengths.
pub fn noise_scene(x: usize, y: usize, z: usize, classes: u16, seed: u64) -> VoxelGrid {
    let dims = GridDims::new(x, y, z).unwrap();
    let mut rng = SplitMix64::new(seed);
    let labels: Vec<u16> = (0..dims.total())
        .map(|_| rng.below(classes as usize) as u16)
        .collect();
    VoxelGrid::new(dims, labels, 20).unwrap()
}
