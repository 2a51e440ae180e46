//! Rectangle algebra with constructive preimages, and the grid oracle for
//! decision-region connectivity.

pub mod export;
pub mod grid;
pub mod rect;
pub mod union_find;

use thiserror::Error;

pub use export::{summary_json, summary_text, write_pgm, write_svg};
pub use grid::{
    connected_components, find_path, grid_scan, output_space_scan, ClassSummary, Component, GridSpec,
    OutputScan, PathOutcome, PathResult, RegionMap, Slice, BOUNDARY,
};
pub use rect::{
    relu_preimage, relu_segment_identity, relu_segment_point, rect_image_bounded, rect_image_halfopen,
    Affine, BoundedImage, HalfOpenImage, Rect,
};
pub use union_find::UnionFind;

#[derive(Debug, Error)]
pub enum GeometryError {
    /// A hypothesis of a constructive result does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
