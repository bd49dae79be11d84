//! VoxRep toolkit: synthetic colored voxel scenes, a lossless tiled 2D image
//! codec for voxel grids, prediction collection from chat-completions vision
//! endpoints, a classical baseline extractor, and matching-based evaluation
//! metrics.
//!
//! The pipeline, end to end:
//!
//! 1. [`mesh`] parses OFF triangle meshes and normalizes them.
//! 2. [`voxelize`] turns placed meshes into solid voxel sets.
//! 3. [`synth`] composes labeled scenes on a 100x100x16 grid and emits a
//!    JSON-lines dataset manifest.
//! 4. [`codec`] encodes each grid as a 896x896 tiled RGB image (and decodes
//!    it back, bit-exact in replication mode).
//! 5. [`client`] sends images to a vision-language endpoint and parses the
//!    structured per-object output; [`baseline`] produces the same output
//!    classically from the grid itself.
//! 6. [`eval`] matches predicted objects to ground truth and reports the
//!    five aggregate metrics as CSV tables and SVG charts.

pub mod annotation;
pub mod baseline;
pub mod client;
pub mod codec;
pub mod eval;
pub mod grid;
pub mod mesh;
pub mod palette;
pub mod synth;
pub mod voxelize;

pub use annotation::{GridCoord, ObjectRecord, SceneAnnotation};
pub use grid::{coords_center, GridDims, GridError, Rgb, VoxelGrid};
pub use palette::{default_palette, Palette, PaletteColor};
