//! Randomized invariant checks over the offset, scale, quality and metric
//! machinery.

use proptest::prelude::*;

use voxnt::grid::{channel_index, Axis, Direction, GridDims, VoxelGrid, IGNORE_LABEL};
use voxnt::kernels::{attention_at, gather_boundary_candidates, AttentionWeights, FeatureVolume};
use voxnt::metrics::{finalize, regression_l1, ConfusionMatrix};
use voxnt::offsets::{
    compute_offsets, compute_offsets_naive, compute_offsets_parallel, normalize_offsets, ScanPolicy,
};
use voxnt::quality::{detect_anomalies, refine_labels, AnomalyThresholds};
use voxnt::scale::{class_scale_histogram, scales_from_offsets};
use voxnt::synth::SplitMix64;
use voxnt::NormalizedOffsetField;

const K: u16 = 20;

fn arb_dims(max: usize) -> impl Strategy<Value = GridDims> {
    (1..=max, 1..=max, 1..=max).prop_map(|(x, y, z)| GridDims::new(x, y, z).unwrap())
}

fn arb_grid(max: usize, classes: u16, ignore_weight: f64) -> impl Strategy<Value = VoxelGrid> {
    arb_dims(max).prop_flat_map(move |dims| {
        let total = dims.total();
        (
            Just(dims),
            proptest::collection::vec(0..classes, total),
            proptest::collection::vec(proptest::bool::weighted(ignore_weight), total),
        )
            .prop_map(move |(dims, mut labels, ignores)| {
                for (l, ig) in labels.iter_mut().zip(ignores) {
                    if ig {
                        *l = IGNORE_LABEL;
                    }
                }
                VoxelGrid::new(dims, labels, K).unwrap()
            })
    })
}

/// Independent per-line run measurement used as the oracle for the
/// run-sum law.
fn run_length_at(grid: &VoxelGrid, coord: [usize; 3], axis: Axis) -> usize {
    let dims = grid.dims();
    let len = dims.axis_len(axis);
    let label = grid.labels()[dims.index_of(coord[0], coord[1], coord[2])];
    let at = |p: usize| {
        let mut c = coord;
        c[axis.index()] = p;
        grid.labels()[dims.index_of(c[0], c[1], c[2])]
    };
    let mut start = coord[axis.index()];
    while start > 0 && at(start - 1) == label {
        start -= 1;
    }
    let mut end = coord[axis.index()];
    while end + 1 < len && at(end + 1) == label {
        end += 1;
    }
    end - start + 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_scan_equals_naive_walk(grid in arb_grid(10, 6, 0.05)) {
        let fast = compute_offsets(&grid, &ScanPolicy::default());
        prop_assert_eq!(fast, compute_offsets_naive(&grid));
    }

    #[test]
    fn parallel_scan_is_bit_identical(grid in arb_grid(10, 4, 0.05)) {
        let policy = ScanPolicy::default();
        prop_assert_eq!(
            compute_offsets(&grid, &policy),
            compute_offsets_parallel(&grid, &policy)
        );
    }

    #[test]
    fn run_sum_law_holds_everywhere(grid in arb_grid(8, 5, 0.05)) {
        let field = compute_offsets(&grid, &ScanPolicy::default());
        let dims = grid.dims();
        for v in 0..dims.total() {
            let coord = dims.coords_of(v);
            let six = field.at(v);
            for axis in Axis::ALL {
                let run = run_length_at(&grid, coord, axis);
                let sum = six[channel_index(axis, Direction::Positive)]
                    + six[channel_index(axis, Direction::Negative)];
                prop_assert_eq!(sum as usize, run + 1);
            }
        }
    }

    #[test]
    fn flip_symmetry(grid in arb_grid(7, 4, 0.0)) {
        let field = compute_offsets(&grid, &ScanPolicy::default());
        let dims = grid.dims();
        for axis in Axis::ALL {
            let flipped = compute_offsets(&grid.flipped(axis), &ScanPolicy::default());
            let pos = channel_index(axis, Direction::Positive);
            let neg = channel_index(axis, Direction::Negative);
            for i in 0..dims.x {
                for j in 0..dims.y {
                    for k in 0..dims.z {
                        let mirrored = match axis {
                            Axis::X => [dims.x - 1 - i, j, k],
                            Axis::Y => [i, dims.y - 1 - j, k],
                            Axis::Z => [i, j, dims.z - 1 - k],
                        };
                        let a = flipped.at(dims.index_of(i, j, k))[pos];
                        let b = field.at(dims.index_of(mirrored[0], mirrored[1], mirrored[2]))[neg];
                        prop_assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn offsets_see_only_label_equality(grid in arb_grid(7, 6, 0.0), seed in any::<u64>()) {
        // relabel classes by a random bijection; the field must not move
        let mut perm: Vec<u16> = (0..K).collect();
        let mut rng = SplitMix64::new(seed);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.below(i + 1));
        }
        let relabeled: Vec<u16> = grid
            .labels()
            .iter()
            .map(|&l| if l == IGNORE_LABEL { l } else { perm[l as usize] })
            .collect();
        let other = VoxelGrid::new(grid.dims(), relabeled, K).unwrap();
        prop_assert_eq!(
            compute_offsets(&grid, &ScanPolicy::default()),
            compute_offsets(&other, &ScanPolicy::default())
        );
    }

    #[test]
    fn single_voxel_edit_touches_only_its_lines(
        grid in arb_grid(7, 4, 0.0),
        pick in any::<u64>(),
    ) {
        let dims = grid.dims();
        let mut rng = SplitMix64::new(pick);
        let v = rng.below(dims.total());
        let [i, j, k] = dims.coords_of(v);
        let mut labels = grid.labels().to_vec();
        labels[v] = (labels[v] + 1 + rng.below(3) as u16) % 4;
        let edited = VoxelGrid::new(dims, labels, K).unwrap();

        let before = compute_offsets(&grid, &ScanPolicy::default());
        let after = compute_offsets(&edited, &ScanPolicy::default());
        for w in 0..dims.total() {
            if before.at(w) != after.at(w) {
                let [a, b, c] = dims.coords_of(w);
                let on_line = (b == j && c == k) || (a == i && c == k) || (a == i && b == j);
                prop_assert!(on_line, "voxel off the three axis lines changed");
            }
        }
    }

    #[test]
    fn normalized_offsets_recover_integers(grid in arb_grid(8, 5, 0.05)) {
        let field = compute_offsets(&grid, &ScanPolicy::default());
        let n = normalize_offsets(&field);
        let d = grid.dims();
        let lens = [d.x, d.x, d.y, d.y, d.z, d.z];
        for (idx, (&i, &v)) in field.values().iter().zip(n.values()).enumerate() {
            prop_assert!(v > 0.0 && v <= 1.0);
            prop_assert_eq!((v * lens[idx % 6] as f64).round() as u32, i);
        }
    }

    #[test]
    fn scale_tallies_conserve_voxels(grid in arb_grid(8, 5, 0.1)) {
        let scales = scales_from_offsets(&compute_offsets(&grid, &ScanPolicy::default()));
        let non_ignored = grid
            .labels()
            .iter()
            .filter(|&&l| l != IGNORE_LABEL)
            .count() as u64;
        for axis in Axis::ALL {
            let mut sum = 0;
            for class in 0..K {
                sum += class_scale_histogram(&grid, &scales, class, axis, 16)
                    .unwrap()
                    .total_count();
            }
            prop_assert_eq!(sum, non_ignored);
        }
    }

    #[test]
    fn histogram_merge_matches_voxel_partition(grid in arb_grid(8, 4, 0.0), seed in any::<u64>()) {
        // split the voxel set in two by masking the complement to ignore;
        // tallies against the shared scale field must add back up
        let dims = grid.dims();
        let scales = scales_from_offsets(&compute_offsets(&grid, &ScanPolicy::default()));
        let mut rng = SplitMix64::new(seed);
        let side: Vec<bool> = (0..dims.total()).map(|_| rng.below(2) == 0).collect();
        let mask = |keep: bool| {
            let labels: Vec<u16> = grid
                .labels()
                .iter()
                .zip(&side)
                .map(|(&l, &s)| if s == keep { l } else { IGNORE_LABEL })
                .collect();
            VoxelGrid::new(dims, labels, K).unwrap()
        };
        let (a, b) = (mask(true), mask(false));
        for class in 0..4u16 {
            let whole = class_scale_histogram(&grid, &scales, class, Axis::X, 12).unwrap();
            let mut merged = class_scale_histogram(&a, &scales, class, Axis::X, 12).unwrap();
            merged
                .merge(&class_scale_histogram(&b, &scales, class, Axis::X, 12).unwrap())
                .unwrap();
            prop_assert_eq!(whole, merged);
        }
    }

    #[test]
    fn refinement_touches_only_target_classes(grid in arb_grid(8, 5, 0.05)) {
        let thresholds = AnomalyThresholds {
            k_min: [3, 3, 3],
            k_max: [Some(5), Some(5), Some(5)],
            target_classes: vec![1, 2],
        };
        let scales = scales_from_offsets(&compute_offsets(&grid, &ScanPolicy::default()));
        let mask = detect_anomalies(&scales, &thresholds).unwrap();
        let refined = refine_labels(&grid, &mask, &thresholds).unwrap();
        for (&before, &after) in grid.labels().iter().zip(refined.labels()) {
            if before == after {
                continue;
            }
            prop_assert_eq!(after, IGNORE_LABEL);
            prop_assert!(thresholds.target_classes.contains(&before));
        }
    }

    #[test]
    fn refinement_never_resurrects_ignores(grid in arb_grid(8, 4, 0.05)) {
        let thresholds = AnomalyThresholds {
            k_min: [3, 3, 3],
            k_max: [Some(6), Some(6), Some(6)],
            target_classes: vec![1],
        };
        let once = {
            let scales = scales_from_offsets(&compute_offsets(&grid, &ScanPolicy::default()));
            refine_labels(&grid, &detect_anomalies(&scales, &thresholds).unwrap(), &thresholds)
                .unwrap()
        };
        let twice = {
            let scales = scales_from_offsets(&compute_offsets(&once, &ScanPolicy::default()));
            refine_labels(&once, &detect_anomalies(&scales, &thresholds).unwrap(), &thresholds)
                .unwrap()
        };
        for (&a, &b) in once.labels().iter().zip(twice.labels()) {
            if a == IGNORE_LABEL {
                prop_assert_eq!(b, IGNORE_LABEL);
            }
        }
    }

    #[test]
    fn wider_thresholds_flag_fewer_voxels(grid in arb_grid(8, 4, 0.0)) {
        let scales = scales_from_offsets(&compute_offsets(&grid, &ScanPolicy::default()));
        let narrow = AnomalyThresholds {
            k_min: [4, 4, 4],
            k_max: [Some(5), Some(5), Some(5)],
            target_classes: vec![1],
        };
        let wide = AnomalyThresholds {
            k_min: [3, 3, 3],
            k_max: [Some(7), Some(7), Some(7)],
            target_classes: vec![1],
        };
        let m_narrow = detect_anomalies(&scales, &narrow).unwrap();
        let m_wide = detect_anomalies(&scales, &wide).unwrap();
        for v in 0..grid.dims().total() {
            if m_wide.min_flags()[v] {
                prop_assert!(m_narrow.min_flags()[v]);
            }
            if m_wide.max_flags()[v] {
                prop_assert!(m_narrow.max_flags()[v]);
            }
        }
    }

    #[test]
    fn min_and_max_flags_are_disjoint(grid in arb_grid(8, 4, 0.0)) {
        let scales = scales_from_offsets(&compute_offsets(&grid, &ScanPolicy::default()));
        let thresholds = AnomalyThresholds {
            k_min: [3, 3, 3],
            k_max: [Some(3), Some(3), Some(3)],
            target_classes: vec![1],
        };
        let mask = detect_anomalies(&scales, &thresholds).unwrap();
        for v in 0..grid.dims().total() {
            prop_assert!(!(mask.min_flags()[v] && mask.max_flags()[v]));
        }
    }

    #[test]
    fn confusion_matrices_add_across_shards(
        truth in arb_grid(6, 4, 0.1),
        seed in any::<u64>(),
    ) {
        let dims = truth.dims();
        let mut rng = SplitMix64::new(seed);
        let pred_labels: Vec<u16> = (0..dims.total()).map(|_| rng.below(K as usize) as u16).collect();
        let pred = VoxelGrid::new(dims, pred_labels, K).unwrap();

        let mut single = ConfusionMatrix::new(K);
        single.accumulate(&truth, &pred).unwrap();
        single.accumulate(&truth, &pred).unwrap();

        let mut a = ConfusionMatrix::new(K);
        a.accumulate(&truth, &pred).unwrap();
        let mut b = ConfusionMatrix::new(K);
        b.accumulate(&truth, &pred).unwrap();
        a.merge(&b).unwrap();

        prop_assert_eq!(&a, &single);
        let (ra, rb) = (finalize(&a), finalize(&single));
        prop_assert_eq!(ra.occupancy_iou.to_bits(), rb.occupancy_iou.to_bits());
        prop_assert_eq!(ra.miou.to_bits(), rb.miou.to_bits());
    }

    #[test]
    fn occupancy_iou_ignores_class_identities(
        truth in arb_grid(6, 5, 0.1),
        seed in any::<u64>(),
    ) {
        let dims = truth.dims();
        let mut rng = SplitMix64::new(seed);
        let pred_labels: Vec<u16> = (0..dims.total()).map(|_| rng.below(K as usize) as u16).collect();
        let pred = VoxelGrid::new(dims, pred_labels.clone(), K).unwrap();

        // bijection over non-empty classes, empty stays put
        let mut perm: Vec<u16> = (0..K).collect();
        for i in (2..perm.len()).rev() {
            perm.swap(i, 1 + rng.below(i));
        }
        let relabel = |labels: &[u16]| -> Vec<u16> {
            labels
                .iter()
                .map(|&l| if l == IGNORE_LABEL { l } else { perm[l as usize] })
                .collect()
        };
        let truth_p = VoxelGrid::new(dims, relabel(truth.labels()), K).unwrap();
        let pred_p = VoxelGrid::new(dims, relabel(&pred_labels), K).unwrap();

        let mut cm = ConfusionMatrix::new(K);
        cm.accumulate(&truth, &pred).unwrap();
        let mut cm_p = ConfusionMatrix::new(K);
        cm_p.accumulate(&truth_p, &pred_p).unwrap();
        prop_assert_eq!(
            finalize(&cm).occupancy_iou.to_bits(),
            finalize(&cm_p).occupancy_iou.to_bits()
        );
    }

    #[test]
    fn miou_stays_within_per_class_extremes(
        truth in arb_grid(6, 5, 0.1),
        seed in any::<u64>(),
    ) {
        let dims = truth.dims();
        let mut rng = SplitMix64::new(seed);
        let pred_labels: Vec<u16> = (0..dims.total()).map(|_| rng.below(5)as u16).collect();
        let pred = VoxelGrid::new(dims, pred_labels, K).unwrap();
        let mut cm = ConfusionMatrix::new(K);
        cm.accumulate(&truth, &pred).unwrap();
        let report = finalize(&cm);
        if report.undefined {
            return Ok(());
        }
        let defined: Vec<f64> = report
            .per_class_iou
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .collect();
        if defined.is_empty() {
            prop_assert!(report.miou.is_nan());
        } else {
            let lo = defined.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = defined.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(report.miou >= lo - 1e-12 && report.miou <= hi + 1e-12);
        }
    }

    #[test]
    fn l1_is_symmetric_and_triangular(
        dims in arb_dims(4),
        seed in any::<u64>(),
    ) {
        let mut rng = SplitMix64::new(seed);
        let field = |rng: &mut SplitMix64| {
            let values: Vec<f64> = (0..dims.total() * 6)
                .map(|_| (rng.below(1000) + 1) as f64 / 1000.0)
                .collect();
            NormalizedOffsetField::new(dims, values).unwrap()
        };
        let (a, b, c) = (field(&mut rng), field(&mut rng), field(&mut rng));
        let ab = regression_l1(&a, &b).unwrap().sum;
        let ba = regression_l1(&b, &a).unwrap().sum;
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        let ac = regression_l1(&a, &c).unwrap().sum;
        let bc = regression_l1(&b, &c).unwrap().sum;
        prop_assert!(ac <= ab + bc + 1e-9 * (1.0 + ab + bc));
    }

    #[test]
    fn attention_rows_are_a_probability_simplex(
        grid in arb_grid(4, 3, 0.0),
        seed in any::<u64>(),
    ) {
        let dims = grid.dims();
        let channels = 4;
        let mut rng = SplitMix64::new(seed);
        let mut randv = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.below(2000) as f64 / 500.0 - 2.0).collect()
        };
        let vol = FeatureVolume::new(dims, channels, randv(dims.total() * channels)).unwrap();
        let weights = AttentionWeights::new(
            channels,
            randv(channels * channels),
            randv(channels * channels),
            randv(channels * channels),
        )
        .unwrap();
        let offsets = compute_offsets(&grid, &ScanPolicy::default());
        for i in 0..dims.x {
            for j in 0..dims.y {
                for k in 0..dims.z {
                    let att = attention_at(&vol, &offsets, &weights, 1.0, [i, j, k]).unwrap();
                    prop_assert!(att.iter().all(|&a| a >= 0.0));
                    let sum: f64 = att.iter().sum();
                    prop_assert!((sum - 1.0).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn unit_alpha_candidates_share_the_origin_label(grid in arb_grid(7, 4, 0.0)) {
        let dims = grid.dims();
        let field = compute_offsets_naive(&grid);
        for v in 0..dims.total() {
            let coord = dims.coords_of(v);
            for cand in gather_boundary_candidates(coord, field.at(v), 1.0, dims) {
                let cl = grid.labels()[dims.index_of(cand[0], cand[1], cand[2])];
                prop_assert_eq!(cl, grid.labels()[v]);
            }
        }
    }
}
