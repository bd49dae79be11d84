//! Deterministic synthetic scene and dataset generation.
//!
//! Every scene is a pure function of (spec, scene index, mesh library): the
//! scene RNG is derived from the master seed and the scene index, so scenes
//! can be generated in any order or in parallel and still reproduce
//! bit-identically. Objects are yawed, scaled, grounded on z=0, colored
//! without replacement from the palette, and kept a Chebyshev `clearance`
//! apart so ground truth is unambiguous.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{ObjectRecord, SceneAnnotation};
use crate::codec::{self, EncodeOptions};
use crate::grid::{coords_center, GridDims, GridError, VoxelGrid};
use crate::mesh::TriangleMesh;
use crate::palette::Palette;
use crate::voxelize::{placed_bounding_box, voxelize_object, Placement, VoxelizeError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config error: {0}")]
    Config(String),
    #[error("scene {scene}: {source}")]
    SceneIo { scene: usize, source: std::io::Error },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Voxelize(#[from] VoxelizeError),
    #[error(transparent)]
    Codec(#[from] crate::codec::CodecError),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The object categories scenes draw from by default.
pub fn default_categories() -> Vec<&'static str> {
    vec![
        "toilet", "airplane", "bathtub", "bottle", "bowl", "cone", "cup", "desk",
        "guitar", "laptop", "plant", "sofa", "stool", "tent",
    ]
}

/// Generator parameterization.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub dims: GridDims,
    pub categories: Vec<String>,
    pub objects_min: usize,
    pub objects_max: usize,
    pub palette: Palette,
    pub scale_min: f64,
    pub scale_max: f64,
    pub min_voxels: usize,
    pub clearance: usize,
    pub max_attempts: usize,
    pub master_seed: u64,
}

impl SceneSpec {
    pub fn with_defaults(master_seed: u64) -> Self {
        SceneSpec {
            dims: GridDims::default_scene(),
            categories: default_categories().iter().map(|s| s.to_string()).collect(),
            objects_min: 1,
            objects_max: 5,
            palette: crate::palette::default_palette(),
            scale_min: 10.0,
            scale_max: 35.0,
            min_voxels: 20,
            clearance: 2,
            max_attempts: 50,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.objects_min < 1 || self.objects_min > self.objects_max {
            return Err(SynthError::Config(format!(
                "object count range [{}, {}] invalid",
                self.objects_min, self.objects_max
            )));
        }
        if self.categories.is_empty() {
            return Err(SynthError::Config("no categories listed".into()));
        }
        if self.scale_min <= 0.0 || self.scale_min > self.scale_max {
            return Err(SynthError::Config(format!(
                "scale range [{}, {}] invalid",
                self.scale_min, self.scale_max
            )));
        }
        if self.scale_max > self.dims.w.min(self.dims.h) as f64 {
            return Err(SynthError::Config(format!(
                "scale_max {} exceeds min(w,h) = {}",
                self.scale_max,
                self.dims.w.min(self.dims.h)
            )));
        }
        if self.clearance < 1 {
            return Err(SynthError::Config("clearance must be >= 1".into()));
        }
        if self.palette.len() < self.objects_max {
            return Err(SynthError::Config(format!(
                "palette of {} colors cannot color up to {} objects without replacement",
                self.palette.len(),
                self.objects_max
            )));
        }
        Ok(())
    }
}

/// Per-category mesh pools, keyed by category name.
pub type MeshLibrary = BTreeMap<String, Vec<TriangleMesh>>;

fn scene_rng(master_seed: u64, scene_index: usize) -> ChaCha12Rng {
    // splitmix64 expansion of (master_seed, scene_index) into a 32-byte key
    let mut state = master_seed ^ (scene_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&next().to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Generate one scene: grid plus ground-truth annotation.
pub fn synth_scene(
    spec: &SceneSpec,
    scene_index: usize,
    library: &MeshLibrary,
) -> Result<(VoxelGrid, SceneAnnotation), SynthError> {
    spec.validate()?;
    for category in &spec.categories {
        if library.get(category).is_none_or(|m| m.is_empty()) {
            return Err(SynthError::Config(format!("no meshes for category {category:?}")));
        }
    }

    let dims = spec.dims;
    let mut rng = scene_rng(spec.master_seed, scene_index);
    let n_objects = rng.random_range(spec.objects_min..=spec.objects_max);

    let mut grid = VoxelGrid::new(dims);
    let scene_id = format!("scene_{scene_index:06}");
    let mut annotation = SceneAnnotation::new(scene_id, dims);

    // cells too close (Chebyshev < clearance) to an already-placed object
    let mut blocked = vec![false; dims.total()];
    let block_idx = |x: usize, y: usize, z: usize| (z * dims.h + y) * dims.w + x;
    let mut available_colors: Vec<usize> = (0..spec.palette.len()).collect();

    for _ in 0..n_objects {
        let category = spec.categories.choose(&mut rng).expect("categories non-empty");
        let meshes = &library[category];
        let mesh = meshes.choose(&mut rng).expect("mesh pool non-empty");
        let color_slot = rng.random_range(0..available_colors.len());
        let palette_index = available_colors[color_slot];
        let rgb = spec.palette.get(palette_index).rgb;

        let mut placed = None;
        for _ in 0..spec.max_attempts {
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            let scale = rng.random_range(spec.scale_min..=spec.scale_max);
            let tx = rng.random_range(0.0..dims.w as f64);
            let ty = rng.random_range(0.0..dims.h as f64);

            // ground the object: translate so the rotated+scaled mesh's
            // minimum z maps exactly to 0
            let probe = Placement::new(yaw, scale, [0.0, 0.0, 0.0])?;
            let min_z = mesh
                .vertices
                .iter()
                .map(|&v| probe.rotate_scale(v)[2])
                .fold(f64::INFINITY, f64::min);
            let placement = Placement::new(yaw, scale, [tx, ty, -min_z])?;

            let Some((lo, hi)) = placed_bounding_box(mesh, &placement) else {
                continue;
            };
            let in_bounds = lo[0] >= 0.0
                && lo[1] >= 0.0
                && lo[2] >= 0.0
                && hi[0] < dims.w as f64
                && hi[1] < dims.h as f64
                && hi[2] < dims.d as f64;
            if !in_bounds {
                continue;
            }

            let voxels = voxelize_object(mesh, &placement, dims, rgb)?;
            if voxels.len() < spec.min_voxels {
                continue;
            }
            if voxels.iter().any(|&((x, y, z), _)| blocked[block_idx(x, y, z)]) {
                continue;
            }
            placed = Some(voxels);
            break;
        }

        let Some(voxels) = placed else {
            log::warn!(
                "scene {}: skipped a {category} after {} attempts",
                annotation.scene_id,
                spec.max_attempts
            );
            continue;
        };

        available_colors.remove(color_slot);
        let radius = spec.clearance as i64 - 1;
        let mut coords = Vec::with_capacity(voxels.len());
        for &((x, y, z), rgb) in &voxels {
            grid.set(x, y, z, rgb)?;
            coords.push((x, y, z));
            for dz in -radius..=radius {
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if dims.contains_signed(nx, ny, nz) {
                            blocked[block_idx(nx as usize, ny as usize, nz as usize)] = true;
                        }
                    }
                }
            }
        }

        let center = coords_center(&coords)?;
        annotation.objects.push(ObjectRecord {
            id: annotation.objects.len().to_string(),
            color: spec.palette.get(palette_index).name.clone(),
            description: category.clone(),
            number_of_occupied_voxel: coords.len() as u64,
            voxel_coords_center: center.into(),
        });
    }

    Ok((grid, annotation))
}

/// One manifest line: where the scene's files live plus its ground truth.
/// Paths are relative to the manifest's own directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene_id: String,
    pub grid_path: String,
    pub image_path: String,
    pub annotation: AnnotationPayload,
}

/// Annotation body embedded in manifest and prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationPayload {
    pub dims: GridDims,
    pub objects: Vec<ObjectRecord>,
}

impl ManifestEntry {
    pub fn annotation_for_scene(&self) -> SceneAnnotation {
        SceneAnnotation {
            scene_id: self.scene_id.clone(),
            dims: self.annotation.dims,
            objects: self.annotation.objects.clone(),
        }
    }
}

/// A loaded dataset manifest plus the directory paths resolve against.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let file = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line)
                .map_err(|e| SynthError::Manifest { line: i + 1, message: e.to_string() })?;
            entries.push(entry);
        }
        Ok(DatasetManifest { root, entries })
    }

    pub fn grid_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.grid_path)
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.image_path)
    }
}

/// Generate `n_scenes` scenes into `output_dir`: per scene a `.voxg` grid,
/// an encoded `.png`, and one manifest line. Scenes are generated in
/// parallel; the manifest is written in scene-index order regardless.
pub fn synth_dataset(
    spec: &SceneSpec,
    n_scenes: usize,
    library: &MeshLibrary,
    options: &EncodeOptions,
    output_dir: &Path,
) -> Result<DatasetManifest, SynthError> {
    spec.validate()?;
    options.validate(spec.dims)?;
    std::fs::create_dir_all(output_dir)?;

    let entries: Vec<ManifestEntry> = (0..n_scenes)
        .into_par_iter()
        .map(|i| -> Result<ManifestEntry, SynthError> {
            let (grid, annotation) = synth_scene(spec, i, library)?;
            let stem = format!("scene_{i:06}");
            let grid_name = format!("{stem}.voxg");
            let image_name = format!("{stem}.png");
            grid.save_voxg(output_dir.join(&grid_name))
                .map_err(|e| io_for_scene(i, e))?;
            let image = codec::encode(&grid, options)?;
            codec::save_png(&image, output_dir.join(&image_name))
                .map_err(|e| io_for_scene(i, e))?;
            Ok(ManifestEntry {
                scene_id: annotation.scene_id.clone(),
                grid_path: grid_name,
                image_path: image_name,
                annotation: AnnotationPayload {
                    dims: annotation.dims,
                    objects: annotation.objects,
                },
            })
        })
        .collect::<Result<_, _>>()?;

    let manifest_path = output_dir.join("manifest.jsonl");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&manifest_path)?);
    for entry in &entries {
        serde_json::to_writer(&mut out, entry)
            .map_err(|e| SynthError::Config(format!("manifest serialization: {e}")))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(DatasetManifest { root: output_dir.to_path_buf(), entries })
}

fn io_for_scene(scene: usize, err: impl std::error::Error) -> SynthError {
    SynthError::SceneIo { scene, source: std::io::Error::other(err.to_string()) }
}
