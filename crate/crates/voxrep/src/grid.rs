//! Dense colored voxel grids and the `VOXG1` binary file format.
//!
//! Cells are stored row-major with z outermost, then y, then x, which is
//! also the order slices are extracted in and the order cells appear in a
//! `VOXG1` file.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

/// An RGB color with 8-bit channels. `(0,0,0)` is reserved as the empty-cell
/// sentinel in image encodings and may never be assigned to an occupied voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb { r, g, b }
    }

    pub fn is_black(self) -> bool {
        self == Rgb::BLACK
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid dimensions {w}x{h}x{d}: every axis must be >= 1")]
    InvalidDims { w: usize, h: usize, d: usize },
    #[error("voxel ({x},{y},{z}) out of bounds for {dims}")]
    OutOfBounds { x: usize, y: usize, z: usize, dims: GridDims },
    #[error("rgb (0,0,0) is reserved for empty cells")]
    ReservedColor,
    #[error("cannot compute the center of an empty coordinate list")]
    EmptyComponent,
    #[error("bad grid file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Grid extents in voxels along x (w), y (h) and z (d).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct GridDims {
    pub w: usize,
    pub h: usize,
    pub d: usize,
}

impl GridDims {
    pub fn new(w: usize, h: usize, d: usize) -> Result<Self, GridError> {
        if w == 0 || h == 0 || d == 0 {
            return Err(GridError::InvalidDims { w, h, d });
        }
        Ok(GridDims { w, h, d })
    }

    /// The default working resolution: 100x100x16, 160,000 voxels.
    pub fn default_scene() -> Self {
        GridDims { w: 100, h: 100, d: 16 }
    }

    pub fn total(&self) -> usize {
        self.w * self.h * self.d
    }

    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        x < self.w && y < self.h && z < self.d
    }

    pub fn contains_signed(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.w
            && (y as usize) < self.h
            && (z as usize) < self.d
    }
}

impl std::fmt::Display for GridDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.w, self.h, self.d)
    }
}

/// A dense voxel grid: every cell is either empty or occupied with a color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelGrid {
    dims: GridDims,
    cells: Vec<Option<Rgb>>,
}

impl VoxelGrid {
    /// Create a grid with every cell empty.
    pub fn new(dims: GridDims) -> Self {
        VoxelGrid { dims, cells: vec![None; dims.total()] }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims.h + y) * self.dims.w + x
    }

    /// Read the cell at (x,y,z). Out-of-range coordinates are an error,
    /// never a wraparound.
    pub fn get(&self, x: usize, y: usize, z: usize) -> Result<Option<Rgb>, GridError> {
        if !self.dims.contains(x, y, z) {
            return Err(GridError::OutOfBounds { x, y, z, dims: self.dims });
        }
        Ok(self.cells[self.index(x, y, z)])
    }

    /// Mark (x,y,z) occupied with `rgb`. Pure black is rejected: it is the
    /// empty-cell sentinel in the image encoding.
    pub fn set(&mut self, x: usize, y: usize, z: usize, rgb: Rgb) -> Result<(), GridError> {
        if !self.dims.contains(x, y, z) {
            return Err(GridError::OutOfBounds { x, y, z, dims: self.dims });
        }
        if rgb.is_black() {
            return Err(GridError::ReservedColor);
        }
        let idx = self.index(x, y, z);
        self.cells[idx] = Some(rgb);
        Ok(())
    }

    /// Clear the cell at (x,y,z).
    pub fn clear(&mut self, x: usize, y: usize, z: usize) -> Result<(), GridError> {
        if !self.dims.contains(x, y, z) {
            return Err(GridError::OutOfBounds { x, y, z, dims: self.dims });
        }
        let idx = self.index(x, y, z);
        self.cells[idx] = None;
        Ok(())
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Iterate occupied cells as ((x,y,z), rgb) in (z,y,x) row-major order.
    pub fn occupied(&self) -> impl Iterator<Item = ((usize, usize, usize), Rgb)> + '_ {
        let (w, h) = (self.dims.w, self.dims.h);
        self.cells.iter().enumerate().filter_map(move |(i, c)| {
            c.map(|rgb| {
                let x = i % w;
                let y = (i / w) % h;
                let z = i / (w * h);
                ((x, y, z), rgb)
            })
        })
    }

    /// Serialize as VOXG1: magic `VOXG`, version byte 1, three little-endian
    /// u16 dims, then 4 bytes per cell (occupancy, r, g, b) in (z,y,x)
    /// row-major order. Empty cells carry r=g=b=0.
    pub fn write_voxg<W: Write>(&self, mut out: W) -> Result<(), GridError> {
        let GridDims { w, h, d } = self.dims;
        if w > u16::MAX as usize || h > u16::MAX as usize || d > u16::MAX as usize {
            return Err(GridError::Format(format!("dims {} exceed u16 range", self.dims)));
        }
        let mut buf = Vec::with_capacity(11 + self.cells.len() * 4);
        buf.extend_from_slice(b"VOXG");
        buf.push(1);
        for v in [w as u16, h as u16, d as u16] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for cell in &self.cells {
            match cell {
                Some(rgb) => buf.extend_from_slice(&[1, rgb.r, rgb.g, rgb.b]),
                None => buf.extend_from_slice(&[0, 0, 0, 0]),
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_voxg<R: Read>(mut input: R) -> Result<Self, GridError> {
        let mut header = [0u8; 11];
        input.read_exact(&mut header).map_err(|_| {
            GridError::Format("file shorter than the 11-byte VOXG1 header".into())
        })?;
        if &header[0..4] != b"VOXG" {
            return Err(GridError::Format("missing VOXG magic".into()));
        }
        if header[4] != 1 {
            return Err(GridError::Format(format!("unsupported version {}", header[4])));
        }
        let w = u16::from_le_bytes([header[5], header[6]]) as usize;
        let h = u16::from_le_bytes([header[7], header[8]]) as usize;
        let d = u16::from_le_bytes([header[9], header[10]]) as usize;
        let dims = GridDims::new(w, h, d)?;
        let mut cells = Vec::with_capacity(dims.total());
        let mut raw = vec![0u8; dims.total() * 4];
        input.read_exact(&mut raw).map_err(|_| {
            GridError::Format(format!("truncated cell payload, expected {} cells", dims.total()))
        })?;
        for (i, quad) in raw.chunks_exact(4).enumerate() {
            match quad[0] {
                0 => {
                    if quad[1] != 0 || quad[2] != 0 || quad[3] != 0 {
                        return Err(GridError::Format(format!(
                            "empty cell {i} carries nonzero rgb"
                        )));
                    }
                    cells.push(None);
                }
                1 => {
                    let rgb = Rgb::new(quad[1], quad[2], quad[3]);
                    if rgb.is_black() {
                        return Err(GridError::Format(format!(
                            "occupied cell {i} uses the reserved color (0,0,0)"
                        )));
                    }
                    cells.push(Some(rgb));
                }
                other => {
                    return Err(GridError::Format(format!(
                        "cell {i} has occupancy byte {other}, expected 0 or 1"
                    )));
                }
            }
        }
        Ok(VoxelGrid { dims, cells })
    }

    pub fn save_voxg<P: AsRef<Path>>(&self, path: P) -> Result<(), GridError> {
        let file = std::fs::File::create(path)?;
        self.write_voxg(std::io::BufWriter::new(file))
    }

    pub fn load_voxg<P: AsRef<Path>>(path: P) -> Result<Self, GridError> {
        let file = std::fs::File::open(path)?;
        Self::read_voxg(std::io::BufReader::new(file))
    }
}

/// Per-axis arithmetic mean of a coordinate list, rounded half-up.
///
/// Exact integer arithmetic: round_half_up(s/n) == (2s + n) / (2n).
pub fn coords_center(coords: &[(usize, usize, usize)]) -> Result<(usize, usize, usize), GridError> {
    if coords.is_empty() {
        return Err(GridError::EmptyComponent);
    }
    let n = coords.len() as u64;
    let mut sums = [0u64; 3];
    for &(x, y, z) in coords {
        sums[0] += x as u64;
        sums[1] += y as u64;
        sums[2] += z as u64;
    }
    let round = |s: u64| ((2 * s + n) / (2 * n)) as usize;
    Ok((round(sums[0]), round(sums[1]), round(sums[2])))
}
