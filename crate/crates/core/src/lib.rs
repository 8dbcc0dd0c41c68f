//! Evaluation engine for affordance segmentation benchmarks.
//!
//! * [`maskio`]: label masks, images, taxonomies and manifests on disk.
//! * [`confusion`]: dataset-level TP/FP/FN counts; precision, recall, Jaccard.
//! * [`wfb`]: the weighted F-beta measure and its brute-force oracle.
//! * [`scale`]: zoom-in/zoom-out perturbations and occupancy statistics.
//! * [`augment`]: the seeded training-time augmentation recipe.
//! * [`runner`]: manifest evaluation, scale sweeps, reports and comparisons.
//! * [`pair`]: whole-pair entry points over raw buffers.

pub mod augment;
pub mod confusion;
pub mod error;
pub mod maskio;
pub mod pair;
pub mod runner;
pub mod scale;
pub mod wfb;

pub use augment::{augment_dataset, augment_sample, color_jitter, AugmentConfig, Interval};
pub use confusion::{jaccard, macro_average, merge_tallies, precision, recall, tally_pair, ConfusionTally, Ratio};
pub use error::{Error, Result};
pub use maskio::{
    load_image, load_label_mask, remap_classes, save_image, save_label_mask, ClassEntry, ClassTaxonomy, LabelMask,
    Manifest, RgbImage, SampleRecord,
};
pub use pair::{evaluate_pair, perturb_mask, wfb_pair};
pub use runner::{
    compare_reports, run_evaluation, run_scale_sweep, ComparisonTable, EvalOptions, EvalReport, MetricSet,
    ReferenceValues, ScaleSweep, SweepSource,
};
pub use scale::{
    dataset_occupancy, occupancy, occupancy_stats, scale_image, scale_mask, ScaleMode, ScaleSpec, WhiskerStats,
};
pub use wfb::{
    brute_force_distance_transform, dense_oracle_weighted_error, distance_transform, weighted_error, wfb_score,
    wfb_tally_pair, BinaryMask, DistanceField, WfbClassTally, WfbFields, WfbParams, WfbScore, WfbTally,
};
