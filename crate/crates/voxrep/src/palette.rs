//! Named color palette and nearest-color lookup.

use thiserror::Error;

use crate::grid::Rgb;

#[derive(Debug, Error)]
pub enum PaletteError {
    #[error("palette must contain at least one color")]
    Empty,
    #[error("duplicate palette name {0:?}")]
    DuplicateName(String),
    #[error("duplicate palette rgb ({0},{1},{2})")]
    DuplicateRgb(u8, u8, u8),
    #[error("palette may not contain (0,0,0): black is the empty-cell sentinel")]
    BlackEntry,
}

/// A named color: lowercase snake_case label plus its rgb value.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PaletteColor {
    pub name: String,
    pub rgb: Rgb,
}

impl PaletteColor {
    pub fn new(name: &str, r: u8, g: u8, b: u8) -> Self {
        PaletteColor { name: name.to_string(), rgb: Rgb::new(r, g, b) }
    }
}

/// An ordered list of distinct named colors. Order matters: nearest-color
/// ties resolve to the earliest index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    colors: Vec<PaletteColor>,
}

impl Palette {
    pub fn new(colors: Vec<PaletteColor>) -> Result<Self, PaletteError> {
        if colors.is_empty() {
            return Err(PaletteError::Empty);
        }
        for (i, c) in colors.iter().enumerate() {
            if c.rgb.is_black() {
                return Err(PaletteError::BlackEntry);
            }
            for earlier in &colors[..i] {
                if earlier.name == c.name {
                    return Err(PaletteError::DuplicateName(c.name.clone()));
                }
                if earlier.rgb == c.rgb {
                    return Err(PaletteError::DuplicateRgb(c.rgb.r, c.rgb.g, c.rgb.b));
                }
            }
        }
        Ok(Palette { colors })
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[PaletteColor] {
        &self.colors
    }

    pub fn get(&self, index: usize) -> &PaletteColor {
        &self.colors[index]
    }

    /// Index of the entry minimizing squared Euclidean rgb distance.
    /// Ties break to the earliest index.
    pub fn nearest_index(&self, rgb: Rgb) -> usize {
        let mut best = 0usize;
        let mut best_d = u32::MAX;
        for (i, c) in self.colors.iter().enumerate() {
            let d = dist_sq(rgb, c.rgb);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Name of the nearest palette entry.
    pub fn nearest_name(&self, rgb: Rgb) -> &str {
        &self.colors[self.nearest_index(rgb)].name
    }
}

fn dist_sq(a: Rgb, b: Rgb) -> u32 {
    let dr = a.r as i32 - b.r as i32;
    let dg = a.g as i32 - b.g as i32;
    let db = a.b as i32 - b.b as i32;
    (dr * dr + dg * dg + db * db) as u32
}

/// The default 12-color palette. Values are the common X11/CSS colors for
/// each label; none is pure black.
pub fn default_palette() -> Palette {
    Palette::new(vec![
        PaletteColor::new("red", 255, 0, 0),
        PaletteColor::new("green", 0, 255, 0),
        PaletteColor::new("dark_green", 0, 100, 0),
        PaletteColor::new("blue", 0, 0, 255),
        PaletteColor::new("light_blue", 173, 216, 230),
        PaletteColor::new("yellow", 255, 255, 0),
        PaletteColor::new("orange", 255, 165, 0),
        PaletteColor::new("purple", 128, 0, 128),
        PaletteColor::new("pink", 255, 192, 203),
        PaletteColor::new("brown", 139, 69, 19),
        PaletteColor::new("grey", 128, 128, 128),
        PaletteColor::new("white", 255, 255, 255),
    ])
    .expect("default palette is valid")
}
