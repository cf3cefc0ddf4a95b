//! Attribution-heatmap analysis for visual pronoun disambiguation.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the whole
//! numeric path from raw cross-attention scores to reported metrics:
//!
//! - [`grid`]: heatmaps, binary masks, quantiles, bicubic resampling, IoU.
//! - [`attribution`]: summing upscaled cross-attention slices into per-token heatmaps.
//! - [`disambiguation`]: caption filter, percentile masks, overlap filter, decision boundary.
//! - [`metrics`]: verdict counts, binary and multi-class metrics, two-proportion Z-tests.
//! - [`calibration`]: agreement curves between IoU thresholds and human labels.
//! - [`corpus`]: instance schema, structural validation, redundancy scan, prompt assembly.
//! - [`fixtures`]: deterministic synthetic scenarios with analytically known verdicts.
//!
//! File formats, the LLM generation loop and the command-line tool live in the
//! `winovis` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod attribution;
pub mod calibration;
pub mod corpus;
pub mod disambiguation;
mod error;
pub mod fixtures;
pub mod grid;
pub mod metrics;

pub use error::{Error, Result};

pub use attribution::{
    aggregate_all, aggregate_token_heatmap, normalize_for_display, AttentionSlice, AttentionStack,
    Pathway, SliceKey, TokenHeatmapSet,
};
pub use calibration::{agreement_curve, select_threshold, AgreementPoint, LabeledPair};
pub use disambiguation::{
    evaluate_batch, evaluate_instance, BatchItem, Entity, InstanceVerdict, PipelineConfig,
    RoleHeatmaps, Status, TokenRole,
};
pub use grid::{bicubic_upscale, iou, quantile, threshold_mask, BinaryMask, Heatmap2D};
pub use metrics::{
    binary_metrics, build_report, multiclass_metrics, ztest_two_proportions, ConfusionMatrix2,
    MetricsReport, VerdictCounts,
};
