//! Voxel label toolkit for dense 3D semantic occupancy grids.
//!
//! The core operation converts per-voxel class labels into a six-direction
//! boundary offset field by run-length scanning, entirely without instance
//! annotations. On top of that sit instance scale statistics, detection and
//! repair of corrupted labels (isolated specks, motion smears), standard
//! occupancy evaluation (geometric IoU, per-class IoU, mIoU), and verified
//! numeric reference kernels for offset-guided feature aggregation and
//! dense plane projection.

pub mod error;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod offsets;
pub mod quality;
pub mod scale;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{
    channel_index, channel_name, Axis, Direction, GridDims, NormalizedOffsetField, OffsetField,
    VoxelGrid, CHANNELS, DEFAULT_VOXEL_SIZE_M, EMPTY_CLASS, IGNORE_LABEL,
};
pub use io::{AxisOrder, FormatOptions, GridFormat};
pub use kernels::{
    AttentionWeights, CandidateIndexing, FeatureVolume, GroupNorm, Plane, PlaneMap,
    ProjectionWeights,
};
pub use metrics::{ConfusionMatrix, L1Loss, MetricsReport};
pub use offsets::ScanPolicy;
pub use quality::{AnomalyMask, AnomalyThresholds, ClassQuality, QualityReport};
pub use scale::{ExportFormat, HistogramRow, SampleStat, ScaleField, ScaleHistogram};
pub use synth::{BoxShape, SceneManifest, SceneSpec, SpeckSpec, StreakSpec, SynthScene};
