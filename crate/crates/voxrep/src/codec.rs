//! Bidirectional voxel-grid <-> tiled-image codec.
//!
//! A grid is sliced along Z, each w x h slice is centered into a padded
//! square, upscaled x2 (pixel replication by default, so one voxel is
//! exactly a 2x2 pixel block), and the slices are tiled row-major by depth
//! into one composite image. Defaults: 100 -> 112 -> 224, tiled 4x4, giving
//! a 896 x 896 image whose pixel count (802,816) comfortably exceeds four
//! pixels per voxel (640,000). Replication mode round-trips bit-exactly;
//! bilinear mode exists for comparison and is not decodable.

use std::path::Path;

use thiserror::Error;

use crate::grid::{GridDims, GridError, Rgb, VoxelGrid};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("raster size mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    Size { expected_w: usize, expected_h: usize, got_w: usize, got_h: usize },
    #[error("bilinear-encoded images are lossy and cannot be decoded")]
    LossyMode,
    #[error("pixel block at ({x},{y}) is not a uniform 2x2 replication block")]
    NotReplicated { x: usize, y: usize },
    #[error("image error: {0}")]
    Image(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Upscaling strategy for the x2 resize step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpscaleMode {
    /// Each source pixel becomes an identical 2x2 block. Lossless.
    Replication,
    /// Half-pixel-center bilinear sampling at scale 2. Not decodable.
    Bilinear,
}

impl std::str::FromStr for UpscaleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replication" => Ok(UpscaleMode::Replication),
            "bilinear" => Ok(UpscaleMode::Bilinear),
            other => Err(format!("unknown upscale mode {other:?}")),
        }
    }
}

/// Codec parameters. The upscale factor is fixed at 2.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncodeOptions {
    pub slice_size: usize,
    pub padded_size: usize,
    pub upscale_mode: UpscaleMode,
    pub tile_cols: usize,
    pub tile_rows: usize,
    pub background_rgb: Rgb,
}

pub const UPSCALE_FACTOR: usize = 2;

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            slice_size: 100,
            padded_size: 112,
            upscale_mode: UpscaleMode::Replication,
            tile_cols: 4,
            tile_rows: 4,
            background_rgb: Rgb::BLACK,
        }
    }
}

impl EncodeOptions {
    pub fn image_width(&self) -> usize {
        self.padded_size * UPSCALE_FACTOR * self.tile_cols
    }

    pub fn image_height(&self) -> usize {
        self.padded_size * UPSCALE_FACTOR * self.tile_rows
    }

    /// Check the option set against a grid's dimensions: slices must fit the
    /// padded square, every slice needs a tile, and the image must hold at
    /// least four pixels per voxel.
    pub fn validate(&self, dims: GridDims) -> Result<(), CodecError> {
        if self.padded_size < self.slice_size {
            return Err(CodecError::Capacity(format!(
                "padded size {} smaller than slice size {}",
                self.padded_size, self.slice_size
            )));
        }
        if dims.w > self.padded_size || dims.h > self.padded_size {
            return Err(CodecError::Capacity(format!(
                "slice {}x{} exceeds padded size {}",
                dims.w, dims.h, self.padded_size
            )));
        }
        if dims.d > self.tile_cols * self.tile_rows {
            return Err(CodecError::Capacity(format!(
                "{} slices exceed the {}x{} tile grid",
                dims.d, self.tile_cols, self.tile_rows
            )));
        }
        let pixels = self.image_width() * self.image_height();
        if pixels < 4 * dims.total() {
            return Err(CodecError::Capacity(format!(
                "{} pixels cannot hold 4 x {} voxels",
                pixels,
                dims.total()
            )));
        }
        Ok(())
    }
}

/// A dense RGB raster, row-major, top-left origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pixels: Vec<Rgb>,
}

impl Raster {
    pub fn filled(width: usize, height: usize, rgb: Rgb) -> Self {
        Raster { width, height, pixels: vec![rgb; width * height] }
    }

    pub fn get(&self, col: usize, row: usize) -> Rgb {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, rgb: Rgb) {
        self.pixels[row * self.width + col] = rgb;
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }
}

/// The composite tiled image.
pub type TiledImage = Raster;

/// Slice a grid along Z into d rasters of w x h. Pixel (row=y, col=x) of
/// slice k carries the color of voxel (x,y,k), or background when empty.
pub fn slice_grid(grid: &VoxelGrid, background: Rgb) -> Vec<Raster> {
    let dims = grid.dims();
    let mut slices = vec![Raster::filled(dims.w, dims.h, background); dims.d];
    for ((x, y, z), rgb) in grid.occupied() {
        slices[z].set(x, y, rgb);
    }
    slices
}

/// Center a slice inside a padded_size x padded_size raster; the border is
/// background. Offsets are floor((padded - slice)/2) per axis.
pub fn pad_slice(
    slice: &Raster,
    padded_size: usize,
    background: Rgb,
) -> Result<Raster, CodecError> {
    if slice.width > padded_size || slice.height > padded_size {
        return Err(CodecError::Size {
            expected_w: padded_size,
            expected_h: padded_size,
            got_w: slice.width,
            got_h: slice.height,
        });
    }
    let off_col = (padded_size - slice.width) / 2;
    let off_row = (padded_size - slice.height) / 2;
    let mut out = Raster::filled(padded_size, padded_size, background);
    for row in 0..slice.height {
        for col in 0..slice.width {
            out.set(col + off_col, row + off_row, slice.get(col, row));
        }
    }
    Ok(out)
}

/// Upscale a raster by exactly 2x.
pub fn upscale_slice(src: &Raster, mode: UpscaleMode) -> Raster {
    let (w, h) = (src.width, src.height);
    let mut out = Raster::filled(w * 2, h * 2, Rgb::BLACK);
    match mode {
        UpscaleMode::Replication => {
            for row in 0..h {
                for col in 0..w {
                    let rgb = src.get(col, row);
                    for dr in 0..2 {
                        for dc in 0..2 {
                            out.set(col * 2 + dc, row * 2 + dr, rgb);
                        }
                    }
                }
            }
        }
        UpscaleMode::Bilinear => {
            // half-pixel centers: dst d samples src at (d + 0.5)/2 - 0.5
            let sample = |d: usize, limit: usize| -> (usize, usize, f64) {
                let s = (d as f64 + 0.5) / 2.0 - 0.5;
                let s0 = s.floor();
                let frac = s - s0;
                let i0 = s0.max(0.0) as usize;
                let i1 = ((s0 as i64 + 1).max(0) as usize).min(limit - 1);
                (i0.min(limit - 1), i1, frac)
            };
            for row in 0..h * 2 {
                let (r0, r1, fr) = sample(row, h);
                for col in 0..w * 2 {
                    let (c0, c1, fc) = sample(col, w);
                    let mut channels = [0.0f64; 3];
                    for (src_r, src_c, weight) in [
                        (r0, c0, (1.0 - fr) * (1.0 - fc)),
                        (r0, c1, (1.0 - fr) * fc),
                        (r1, c0, fr * (1.0 - fc)),
                        (r1, c1, fr * fc),
                    ] {
                        let p = src.get(src_c, src_r);
                        channels[0] += weight * p.r as f64;
                        channels[1] += weight * p.g as f64;
                        channels[2] += weight * p.b as f64;
                    }
                    out.set(
                        col,
                        row,
                        Rgb::new(
                            channels[0].round() as u8,
                            channels[1].round() as u8,
                            channels[2].round() as u8,
                        ),
                    );
                }
            }
        }
    }
    out
}

/// Arrange upscaled slices row-major by depth: slice k lands at tile
/// (k / tile_cols, k % tile_cols). Unused tiles stay background.
pub fn tile_slices(slices: &[Raster], options: &EncodeOptions) -> Result<TiledImage, CodecError> {
    let tile_px = options.padded_size * UPSCALE_FACTOR;
    if slices.len() > options.tile_cols * options.tile_rows {
        return Err(CodecError::Capacity(format!(
            "{} slices exceed the {}x{} tile grid",
            slices.len(),
            options.tile_cols,
            options.tile_rows
        )));
    }
    let mut image = Raster::filled(
        options.image_width(),
        options.image_height(),
        options.background_rgb,
    );
    for (k, slice) in slices.iter().enumerate() {
        if slice.width != tile_px || slice.height != tile_px {
            return Err(CodecError::Size {
                expected_w: tile_px,
                expected_h: tile_px,
                got_w: slice.width,
                got_h: slice.height,
            });
        }
        let tile_row = k / options.tile_cols;
        let tile_col = k % options.tile_cols;
        let origin_row = tile_row * tile_px;
        let origin_col = tile_col * tile_px;
        for row in 0..tile_px {
            for col in 0..tile_px {
                image.set(origin_col + col, origin_row + row, slice.get(col, row));
            }
        }
    }
    Ok(image)
}

/// Full encode: slice, pad, upscale, tile.
pub fn encode(grid: &VoxelGrid, options: &EncodeOptions) -> Result<TiledImage, CodecError> {
    options.validate(grid.dims())?;
    let upscaled: Vec<Raster> = slice_grid(grid, options.background_rgb)
        .iter()
        .map(|s| {
            pad_slice(s, options.padded_size, options.background_rgb)
                .map(|p| upscale_slice(&p, options.upscale_mode))
        })
        .collect::<Result<_, _>>()?;
    tile_slices(&upscaled, options)
}

/// Exact inverse of `encode` in replication mode. Each voxel's color is read
/// from its 2x2 pixel block, which must be uniform; background pixels decode
/// to empty cells. Refuses bilinear mode outright.
pub fn decode(
    image: &TiledImage,
    dims: GridDims,
    options: &EncodeOptions,
) -> Result<VoxelGrid, CodecError> {
    if options.upscale_mode == UpscaleMode::Bilinear {
        return Err(CodecError::LossyMode);
    }
    options.validate(dims)?;
    if image.width != options.image_width() || image.height != options.image_height() {
        return Err(CodecError::Size {
            expected_w: options.image_width(),
            expected_h: options.image_height(),
            got_w: image.width,
            got_h: image.height,
        });
    }
    let tile_px = options.padded_size * UPSCALE_FACTOR;
    let off_col = (options.padded_size - dims.w) / 2;
    let off_row = (options.padded_size - dims.h) / 2;
    let mut grid = VoxelGrid::new(dims);
    for z in 0..dims.d {
        let origin_row = (z / options.tile_cols) * tile_px;
        let origin_col = (z % options.tile_cols) * tile_px;
        for y in 0..dims.h {
            for x in 0..dims.w {
                let px = origin_col + (off_col + x) * UPSCALE_FACTOR;
                let py = origin_row + (off_row + y) * UPSCALE_FACTOR;
                let rgb = image.get(px, py);
                for (dc, dr) in [(1, 0), (0, 1), (1, 1)] {
                    if image.get(px + dc, py + dr) != rgb {
                        return Err(CodecError::NotReplicated { x: px, y: py });
                    }
                }
                if rgb != options.background_rgb {
                    grid.set(x, y, z, rgb)?;
                }
            }
        }
    }
    Ok(grid)
}

/// Write a tiled image as 8-bit RGB PNG.
pub fn save_png<P: AsRef<Path>>(image: &TiledImage, path: P) -> Result<(), CodecError> {
    let bytes = encode_png(image)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Encode a tiled image to in-memory PNG bytes.
pub fn encode_png(image: &TiledImage) -> Result<Vec<u8>, CodecError> {
    let mut buf = image::RgbImage::new(image.width as u32, image.height as u32);
    for row in 0..image.height {
        for col in 0..image.width {
            let p = image.get(col, row);
            buf.put_pixel(col as u32, row as u32, image::Rgb([p.r, p.g, p.b]));
        }
    }
    let mut bytes = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut bytes, image::ImageFormat::Png)
        .map_err(|e| CodecError::Image(e.to_string()))?;
    Ok(bytes.into_inner())
}

pub fn load_png<P: AsRef<Path>>(path: P) -> Result<TiledImage, CodecError> {
    let bytes = std::fs::read(path)?;
    decode_png(&bytes)
}

pub fn decode_png(bytes: &[u8]) -> Result<TiledImage, CodecError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| CodecError::Image(e.to_string()))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = Raster::filled(w, h, Rgb::BLACK);
    for row in 0..h {
        for col in 0..w {
            let p = img.get_pixel(col as u32, row as u32);
            out.set(col, row, Rgb::new(p[0], p[1], p[2]));
        }
    }
    Ok(out)
}
