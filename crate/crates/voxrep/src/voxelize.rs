//! Mesh-to-voxel conversion: conservative surface voxelization by
//! triangle/box separating-axis tests, plus interior solidification by
//! exterior flood-fill complement.
//!
//! Cell semantics are half-open: voxel (x,y,z) owns [x,x+1) on each axis, so
//! geometry lying exactly on an integer plane lands in the cell above it and
//! never in both neighbors.

use std::collections::HashSet;

use thiserror::Error;

use crate::grid::{GridDims, Rgb};
use crate::mesh::TriangleMesh;

#[derive(Debug, Error)]
pub enum VoxelizeError {
    #[error("placement scale must be positive, got {0}")]
    InvalidScale(f64),
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("rgb (0,0,0) is reserved for empty cells")]
    ReservedColor,
}

/// Rigid placement of a normalized mesh into voxel space: yaw about Z, then
/// uniform scale (voxels per unit), then translation in voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    rotation_z: f64,
    scale: f64,
    translation: [f64; 3],
}

impl Placement {
    /// Rotation is normalized into [0, 2pi), so a yaw of exactly 2pi takes
    /// the same evaluation path as 0.
    pub fn new(rotation_z: f64, scale: f64, translation: [f64; 3]) -> Result<Self, VoxelizeError> {
        if !(scale > 0.0) {
            return Err(VoxelizeError::InvalidScale(scale));
        }
        let rotation_z = rotation_z.rem_euclid(std::f64::consts::TAU);
        Ok(Placement { rotation_z, scale, translation })
    }

    pub fn rotation_z(&self) -> f64 {
        self.rotation_z
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }

    /// Apply rotation and scale only (no translation).
    pub fn rotate_scale(&self, v: [f64; 3]) -> [f64; 3] {
        let (sin, cos) = self.rotation_z.sin_cos();
        [
            (cos * v[0] - sin * v[1]) * self.scale,
            (sin * v[0] + cos * v[1]) * self.scale,
            v[2] * self.scale,
        ]
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let r = self.rotate_scale(v);
        [
            r[0] + self.translation[0],
            r[1] + self.translation[1],
            r[2] + self.translation[2],
        ]
    }
}

/// Transformed-mesh bounding box in voxel coordinates.
pub fn placed_bounding_box(
    mesh: &TriangleMesh,
    placement: &Placement,
) -> Option<([f64; 3], [f64; 3])> {
    let mut verts = mesh.vertices.iter().map(|&v| placement.apply(v));
    let first = verts.next()?;
    let mut min = first;
    let mut max = first;
    for v in verts {
        for a in 0..3 {
            min[a] = min[a].min(v[a]);
            max[a] = max[a].max(v[a]);
        }
    }
    Some((min, max))
}

/// Voxels whose half-open unit cell overlaps at least one transformed
/// triangle. Voxels falling outside `dims` are silently discarded.
pub fn voxelize_surface(
    mesh: &TriangleMesh,
    placement: &Placement,
    dims: GridDims,
) -> Result<HashSet<(usize, usize, usize)>, VoxelizeError> {
    if mesh.triangles.is_empty() {
        return Err(VoxelizeError::DegenerateMesh("no triangles".into()));
    }
    let mut cells = HashSet::new();
    for tri in &mesh.triangles {
        let verts = [
            placement.apply(mesh.vertices[tri[0]]),
            placement.apply(mesh.vertices[tri[1]]),
            placement.apply(mesh.vertices[tri[2]]),
        ];
        let mut lo = verts[0];
        let mut hi = verts[0];
        for v in &verts[1..] {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        let c0 = [lo[0].floor() as i64, lo[1].floor() as i64, lo[2].floor() as i64];
        let c1 = [hi[0].floor() as i64, hi[1].floor() as i64, hi[2].floor() as i64];
        for cz in c0[2]..=c1[2] {
            for cy in c0[1]..=c1[1] {
                for cx in c0[0]..=c1[0] {
                    if !dims.contains_signed(cx, cy, cz) {
                        continue;
                    }
                    let cell = (cx as usize, cy as usize, cz as usize);
                    if cells.contains(&cell) {
                        continue;
                    }
                    if tri_cell_overlap(&verts, [cx as f64, cy as f64, cz as f64]) {
                        cells.insert(cell);
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// Separating-axis triangle/cell overlap with half-open cell bounds.
///
/// The three box axes use the half-open rule (touching the lower face
/// overlaps, touching only the upper face does not); the triangle normal
/// and the nine edge-cross axes use the standard inclusive test.
fn tri_cell_overlap(verts: &[[f64; 3]; 3], cell_min: [f64; 3]) -> bool {
    const H: f64 = 0.5;
    let center = [cell_min[0] + H, cell_min[1] + H, cell_min[2] + H];
    let v: Vec<[f64; 3]> = verts
        .iter()
        .map(|p| [p[0] - center[0], p[1] - center[1], p[2] - center[2]])
        .collect();

    // box axes, half-open
    for a in 0..3 {
        let (mut lo, mut hi) = (v[0][a], v[0][a]);
        for p in &v[1..] {
            lo = lo.min(p[a]);
            hi = hi.max(p[a]);
        }
        if hi < -H || lo >= H {
            return false;
        }
    }

    let e = [sub(v[1], v[0]), sub(v[2], v[1]), sub(v[0], v[2])];

    // triangle normal axis
    let n = cross(e[0], e[1]);
    let r = H * (n[0].abs() + n[1].abs() + n[2].abs());
    let s = dot(n, v[0]);
    if s > r || s < -r {
        return false;
    }

    // nine edge-cross axes
    const UNIT: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for edge in &e {
        for unit in &UNIT {
            let axis = cross(*unit, *edge);
            let r = H * (axis[0].abs() + axis[1].abs() + axis[2].abs());
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in &v {
                let proj = dot(axis, *p);
                lo = lo.min(proj);
                hi = hi.max(proj);
            }
            if lo > r || hi < -r {
                return false;
            }
        }
    }
    true
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Close the interior of a voxelized shell: flood-fill 6-connectedly from
/// the boundary of the surface's padded bounding box, then keep every
/// bounding-box cell the flood could not reach. Robust to meshes that are
/// not watertight in the continuous sense as long as the voxel shell seals.
pub fn solid_fill(
    surface: &HashSet<(usize, usize, usize)>,
    dims: GridDims,
) -> HashSet<(usize, usize, usize)> {
    let _ = dims;
    if surface.is_empty() {
        return HashSet::new();
    }
    let mut min = [i64::MAX; 3];
    let mut max = [i64::MIN; 3];
    for &(x, y, z) in surface {
        let c = [x as i64, y as i64, z as i64];
        for a in 0..3 {
            min[a] = min[a].min(c[a]);
            max[a] = max[a].max(c[a]);
        }
    }
    // flood domain: bounding box padded by one cell on every side
    let lo = [min[0] - 1, min[1] - 1, min[2] - 1];
    let ext = [
        (max[0] - min[0] + 3) as usize,
        (max[1] - min[1] + 3) as usize,
        (max[2] - min[2] + 3) as usize,
    ];
    let idx = |x: i64, y: i64, z: i64| -> usize {
        let (dx, dy, dz) =
            ((x - lo[0]) as usize, (y - lo[1]) as usize, (z - lo[2]) as usize);
        (dz * ext[1] + dy) * ext[0] + dx
    };
    let in_domain = |x: i64, y: i64, z: i64| -> bool {
        x >= lo[0]
            && y >= lo[1]
            && z >= lo[2]
            && x < lo[0] + ext[0] as i64
            && y < lo[1] + ext[1] as i64
            && z < lo[2] + ext[2] as i64
    };

    let mut blocked = vec![false; ext[0] * ext[1] * ext[2]];
    for &(x, y, z) in surface {
        blocked[idx(x as i64, y as i64, z as i64)] = true;
    }

    let mut reached = vec![false; blocked.len()];
    let mut queue = std::collections::VecDeque::new();
    let corner = (lo[0], lo[1], lo[2]);
    reached[idx(corner.0, corner.1, corner.2)] = true;
    queue.push_back(corner);
    // every padded-boundary cell is outside the surface bbox, so seeding one
    // corner reaches the whole outer hull
    while let Some((x, y, z)) = queue.pop_front() {
        for (dx, dy, dz) in
            [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
        {
            let (nx, ny, nz) = (x + dx, y + dy, z + dz);
            if !in_domain(nx, ny, nz) {
                continue;
            }
            let i = idx(nx, ny, nz);
            if reached[i] || blocked[i] {
                continue;
            }
            reached[i] = true;
            queue.push_back((nx, ny, nz));
        }
    }

    let mut filled = HashSet::with_capacity(surface.len() * 2);
    for z in min[2]..=max[2] {
        for y in min[1]..=max[1] {
            for x in min[0]..=max[0] {
                if !reached[idx(x, y, z)] {
                    filled.insert((x as usize, y as usize, z as usize));
                }
            }
        }
    }
    filled
}

/// Voxelize a placed mesh as a solid, painting every voxel with `rgb`.
/// Returned voxels are sorted by (z,y,x) so output is fully deterministic.
pub fn voxelize_object(
    mesh: &TriangleMesh,
    placement: &Placement,
    dims: GridDims,
    rgb: Rgb,
) -> Result<Vec<((usize, usize, usize), Rgb)>, VoxelizeError> {
    if rgb.is_black() {
        return Err(VoxelizeError::ReservedColor);
    }
    let surface = voxelize_surface(mesh, placement, dims)?;
    let filled = solid_fill(&surface, dims);
    let mut cells: Vec<_> = filled.into_iter().collect();
    cells.sort_unstable_by_key(|&(x, y, z)| (z, y, x));
    Ok(cells.into_iter().map(|c| (c, rgb)).collect())
}
