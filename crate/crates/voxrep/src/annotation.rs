//! Per-object semantic records and whole-scene annotations.
//!
//! `ObjectRecord` serializes with exactly the five wire field names
//! (`id`, `color`, `description`, `number_of_occupied_voxel`,
//! `voxel_coords_center`) used by both ground-truth manifests and model
//! predictions.

use serde::{Deserialize, Serialize};

use crate::grid::GridDims;

/// An integer voxel coordinate, serialized as `{"x":..,"y":..,"z":..}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCoord {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl GridCoord {
    pub fn new(x: u32, y: u32, z: u32) -> Self {
        GridCoord { x, y, z }
    }

    pub fn euclidean_distance(self, other: GridCoord) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        let dz = self.z as f64 - other.z as f64;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

impl From<(usize, usize, usize)> for GridCoord {
    fn from((x, y, z): (usize, usize, usize)) -> Self {
        GridCoord { x: x as u32, y: y as u32, z: z as u32 }
    }
}

/// One detected (or ground-truth) object instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub color: String,
    pub description: String,
    pub number_of_occupied_voxel: u64,
    pub voxel_coords_center: GridCoord,
}

/// All object records for one scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub scene_id: String,
    pub dims: GridDims,
    pub objects: Vec<ObjectRecord>,
}

impl SceneAnnotation {
    pub fn new(scene_id: impl Into<String>, dims: GridDims) -> Self {
        SceneAnnotation { scene_id: scene_id.into(), dims, objects: Vec::new() }
    }

    /// Ids must be unique within one annotation.
    pub fn ids_unique(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.objects.iter().all(|o| seen.insert(o.id.as_str()))
    }
}
