//! Classical voxel-semantics extraction: connected-component analysis plus
//! a nearest-centroid shape classifier. Produces the same per-object records
//! as a model endpoint, which makes it both a non-learned baseline and an
//! end-to-end oracle for the evaluation pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{ObjectRecord, SceneAnnotation};
use crate::grid::{coords_center, GridError, Rgb, VoxelGrid};
use crate::palette::Palette;
use crate::synth::DatasetManifest;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Voxel adjacency for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// Face neighbors only.
    Six,
    /// Face, edge and corner neighbors.
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<(i64, i64, i64)> {
        match self {
            Connectivity::Six => vec![
                (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
            ],
            Connectivity::TwentySix => {
                let mut out = Vec::with_capacity(26);
                for dz in -1..=1 {
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            if (dx, dy, dz) != (0, 0, 0) {
                                out.push((dx, dy, dz));
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// A maximal connected set of occupied voxels with their colors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub voxels: Vec<(usize, usize, usize)>,
    pub colors: Vec<Rgb>,
}

impl Component {
    /// Inclusive bounding box (min, max).
    pub fn bounding_box(&self) -> ((usize, usize, usize), (usize, usize, usize)) {
        let mut min = (usize::MAX, usize::MAX, usize::MAX);
        let mut max = (0, 0, 0);
        for &(x, y, z) in &self.voxels {
            min = (min.0.min(x), min.1.min(y), min.2.min(z));
            max = (max.0.max(x), max.1.max(y), max.2.max(z));
        }
        (min, max)
    }
}

/// Partition the occupied cells into maximal connected components. The
/// result is ordered by each component's minimum (z,y,x) cell, which is the
/// order a (z,y,x) raster scan first encounters them.
pub fn connected_components(grid: &VoxelGrid, connectivity: Connectivity) -> Vec<Component> {
    let dims = grid.dims();
    let offsets = connectivity.offsets();
    let mut visited = vec![false; dims.total()];
    let idx = |x: usize, y: usize, z: usize| (z * dims.h + y) * dims.w + x;
    let mut components = Vec::new();

    for z in 0..dims.d {
        for y in 0..dims.h {
            for x in 0..dims.w {
                if visited[idx(x, y, z)] {
                    continue;
                }
                let Some(rgb) = grid.get(x, y, z).expect("in-bounds scan") else {
                    continue;
                };
                visited[idx(x, y, z)] = true;
                let mut voxels = vec![(x, y, z)];
                let mut colors = vec![rgb];
                let mut queue = std::collections::VecDeque::from([(x, y, z)]);
                while let Some((cx, cy, cz)) = queue.pop_front() {
                    for &(dx, dy, dz) in &offsets {
                        let (nx, ny, nz) = (cx as i64 + dx, cy as i64 + dy, cz as i64 + dz);
                        if !dims.contains_signed(nx, ny, nz) {
                            continue;
                        }
                        let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
                        if visited[idx(nx, ny, nz)] {
                            continue;
                        }
                        if let Some(nrgb) = grid.get(nx, ny, nz).expect("in-bounds neighbor") {
                            visited[idx(nx, ny, nz)] = true;
                            voxels.push((nx, ny, nz));
                            colors.push(nrgb);
                            queue.push_back((nx, ny, nz));
                        }
                    }
                }
                components.push(Component { voxels, colors });
            }
        }
    }
    components
}

/// Shape features: mid/min bounding-box extent ratios (relative to the
/// largest extent), fill ratio within the bounding box, and log voxel count.
pub const FEATURE_DIM: usize = 4;

fn shape_features(component: &Component) -> [f64; FEATURE_DIM] {
    let (min, max) = component.bounding_box();
    let mut extents = [
        (max.0 - min.0 + 1) as f64,
        (max.1 - min.1 + 1) as f64,
        (max.2 - min.2 + 1) as f64,
    ];
    extents.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let volume = extents[0] * extents[1] * extents[2];
    let count = component.voxels.len() as f64;
    [
        extents[1] / extents[0],
        extents[2] / extents[0],
        count / volume,
        count.ln(),
    ]
}

/// Per-category mean feature vectors, fitted from ground-truth scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeStatsModel {
    pub categories: BTreeMap<String, Vec<f64>>,
}

impl ShapeStatsModel {
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), BaselineError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| BaselineError::Model(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, BaselineError> {
        let text = std::fs::read_to_string(path)?;
        let model: ShapeStatsModel =
            serde_json::from_str(&text).map_err(|e| BaselineError::Model(e.to_string()))?;
        for (cat, features) in &model.categories {
            if features.len() != FEATURE_DIM {
                return Err(BaselineError::Model(format!(
                    "category {cat:?} has {} features, expected {FEATURE_DIM}",
                    features.len()
                )));
            }
        }
        Ok(model)
    }

    /// Nearest centroid by Euclidean feature distance; ties break to the
    /// lexicographically first category (BTreeMap iteration order).
    pub fn classify(&self, features: &[f64; FEATURE_DIM]) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (category, centroid) in &self.categories {
            let d: f64 = centroid
                .iter()
                .zip(features)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((category, d));
            }
        }
        best.map(|(c, _)| c)
    }
}

/// Fit per-category feature centroids from a dataset's ground truth.
/// Components are attributed to ground-truth records by nearest center.
pub fn fit_shape_stats(manifest: &DatasetManifest) -> Result<ShapeStatsModel, BaselineError> {
    if manifest.entries.is_empty() {
        return Err(BaselineError::Config("manifest has no scenes".into()));
    }
    let mut sums: BTreeMap<String, ([f64; FEATURE_DIM], usize)> = BTreeMap::new();
    for entry in &manifest.entries {
        let grid = VoxelGrid::load_voxg(manifest.grid_path(entry))?;
        let components = connected_components(&grid, Connectivity::TwentySix);
        for component in &components {
            let center = coords_center(&component.voxels)?;
            let center: crate::annotation::GridCoord = center.into();
            let Some(record) = entry
                .annotation
                .objects
                .iter()
                .min_by(|a, b| {
                    let da = a.voxel_coords_center.euclidean_distance(center);
                    let db = b.voxel_coords_center.euclidean_distance(center);
                    da.partial_cmp(&db).unwrap()
                })
            else {
                continue;
            };
            let features = shape_features(component);
            let slot = sums
                .entry(record.description.clone())
                .or_insert(([0.0; FEATURE_DIM], 0));
            for (acc, f) in slot.0.iter_mut().zip(features) {
                *acc += f;
            }
            slot.1 += 1;
        }
    }
    if sums.is_empty() {
        return Err(BaselineError::Config("no objects found in any scene".into()));
    }
    let categories = sums
        .into_iter()
        .map(|(cat, (sum, n))| {
            (cat, sum.iter().map(|s| s / n as f64).collect::<Vec<f64>>())
        })
        .collect();
    Ok(ShapeStatsModel { categories })
}

/// Extract the full per-object annotation from a grid: one record per
/// connected component, with modal palette color, exact count, rounded
/// center, and a shape-classified description ("unknown" without a model).
pub fn extract_semantics(
    grid: &VoxelGrid,
    palette: &Palette,
    model: Option<&ShapeStatsModel>,
) -> Result<SceneAnnotation, BaselineError> {
    let mut annotation = SceneAnnotation::new("", grid.dims());
    let components = connected_components(grid, Connectivity::TwentySix);
    for (ordinal, component) in components.iter().enumerate() {
        // modal nearest-palette color; ties resolve to the earlier index
        let mut votes = vec![0usize; palette.len()];
        for &rgb in &component.colors {
            votes[palette.nearest_index(rgb)] += 1;
        }
        let color_index = votes
            .iter()
            .enumerate()
            .max_by_key(|&(i, &v)| (v, std::cmp::Reverse(i)))
            .map(|(i, _)| i)
            .expect("palette non-empty");

        let description = match model {
            Some(m) => m
                .classify(&shape_features(component))
                .unwrap_or("unknown")
                .to_string(),
            None => "unknown".to_string(),
        };
        let center = coords_center(&component.voxels)?;
        annotation.objects.push(ObjectRecord {
            id: ordinal.to_string(),
            color: palette.get(color_index).name.clone(),
            description,
            number_of_occupied_voxel: component.voxels.len() as u64,
            voxel_coords_center: center.into(),
        });
    }
    Ok(annotation)
}
