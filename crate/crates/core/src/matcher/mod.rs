//! Putative matching, affine consensus, main directions and the end-to-end
//! registration pipeline.

mod affine;
mod consensus;
mod nn;
mod orientation;
mod pipeline;

pub use affine::{AffineTransform, Point2};
pub use consensus::{fsc_filter, ConsensusParams};
pub use nn::{match_nn, Match, MatchSet};
pub use orientation::{gradient_maps, gradient_polar, main_direction};
pub use pipeline::{
    analyze_field, coarse_rotation, estimate_global_rotation, match_analyzed, match_fields, match_images,
    steered_index_map, Compensation, Diagnostics, ImageAnalysis, MatchOutcome, PipelineConfig, Timings,
};
