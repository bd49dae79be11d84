//! OFF triangle-mesh ingestion and normalization.
//!
//! Parses the plain-text OFF format as shipped by ModelNet40, including the
//! widespread quirk where the `OFF` header token and the counts share the
//! first line (`OFF490 518 0`). Polygon faces are fan-triangulated. COFF and
//! binary OFF are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: missing OFF header (got {got:?})")]
    MissingHeader { line: usize, got: String },
    #[error("line {line}: expected {expected}, got {got:?}")]
    Parse { line: usize, expected: String, got: String },
    #[error("line {line}: vertex index {index} out of range (mesh has {vertices} vertices)")]
    IndexOutOfRange { line: usize, index: usize, vertices: usize },
    #[error("file truncated: expected {expected} more {what} line(s)")]
    Truncated { expected: usize, what: &'static str },
    #[error("degenerate mesh: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounding_box(&self) -> Option<([f64; 3], [f64; 3])> {
        let mut verts = self.vertices.iter();
        let first = *verts.next()?;
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
}

/// Parse OFF text into a triangle mesh. Comments (`#`) and blank lines are
/// skipped; polygons with more than three vertices are fan-triangulated from
/// their first vertex; the header edge count is ignored.
pub fn parse_off(text: &str) -> Result<TriangleMesh, MeshError> {
    // (1-based line number, comment-stripped content)
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            None
        } else {
            Some((i + 1, content))
        }
    });

    let (header_line, header) = lines
        .next()
        .ok_or(MeshError::Truncated { expected: 1, what: "header" })?;
    let counts_src: (usize, &str);
    if header == "OFF" {
        counts_src = lines
            .next()
            .ok_or(MeshError::Truncated { expected: 1, what: "counts" })?;
    } else if let Some(rest) = header.strip_prefix("OFF") {
        // ModelNet quirk: counts fused onto the header line
        counts_src = (header_line, rest.trim());
    } else {
        return Err(MeshError::MissingHeader { line: header_line, got: header.to_string() });
    }

    let (counts_line, counts_text) = counts_src;
    let counts: Vec<&str> = counts_text.split_whitespace().collect();
    if counts.len() != 3 {
        return Err(MeshError::Parse {
            line: counts_line,
            expected: "3 counts (vertices faces edges)".into(),
            got: counts_text.to_string(),
        });
    }
    let n_vertices = parse_usize(counts[0], counts_line, "vertex count")?;
    let n_faces = parse_usize(counts[1], counts_line, "face count")?;
    // edge count is conventionally unreliable; ignored
    parse_usize(counts[2], counts_line, "edge count")?;

    let mut vertices = Vec::with_capacity(n_vertices);
    for k in 0..n_vertices {
        let (line, content) = lines.next().ok_or(MeshError::Truncated {
            expected: n_vertices - k,
            what: "vertex",
        })?;
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(MeshError::Parse {
                line,
                expected: "3 vertex coordinates".into(),
                got: content.to_string(),
            });
        }
        let mut v = [0f64; 3];
        for (a, tok) in tokens.iter().enumerate() {
            v[a] = tok.parse::<f64>().map_err(|_| MeshError::Parse {
                line,
                expected: "a floating-point coordinate".into(),
                got: (*tok).to_string(),
            })?;
        }
        vertices.push(v);
    }

    let mut triangles = Vec::with_capacity(n_faces);
    for k in 0..n_faces {
        let (line, content) = lines.next().ok_or(MeshError::Truncated {
            expected: n_faces - k,
            what: "face",
        })?;
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(MeshError::Parse {
                line,
                expected: "a face line".into(),
                got: content.to_string(),
            });
        }
        let n = parse_usize(tokens[0], line, "polygon vertex count")?;
        if n < 3 {
            return Err(MeshError::Parse {
                line,
                expected: "polygon with >= 3 vertices".into(),
                got: content.to_string(),
            });
        }
        if tokens.len() != n + 1 {
            return Err(MeshError::Parse {
                line,
                expected: format!("{n} vertex indices"),
                got: content.to_string(),
            });
        }
        let mut poly = Vec::with_capacity(n);
        for tok in &tokens[1..] {
            let idx = parse_usize(tok, line, "vertex index")?;
            if idx >= vertices.len() {
                return Err(MeshError::IndexOutOfRange {
                    line,
                    index: idx,
                    vertices: vertices.len(),
                });
            }
            poly.push(idx);
        }
        for i in 1..n - 1 {
            triangles.push([poly[0], poly[i], poly[i + 1]]);
        }
    }

    Ok(TriangleMesh { vertices, triangles })
}

fn parse_usize(token: &str, line: usize, what: &str) -> Result<usize, MeshError> {
    token.parse::<usize>().map_err(|_| MeshError::Parse {
        line,
        expected: format!("{what} (a non-negative integer)"),
        got: token.to_string(),
    })
}

/// Translate the bounding-box center to the origin, then scale uniformly so
/// the largest bounding-box extent is exactly 1.0.
pub fn normalize_mesh(mesh: &TriangleMesh) -> Result<TriangleMesh, MeshError> {
    let (min, max) = mesh
        .bounding_box()
        .ok_or_else(|| MeshError::Degenerate("mesh has no vertices".into()))?;
    let extent = [max[0] - min[0], max[1] - min[1], max[2] - min[2]];
    let largest = extent[0].max(extent[1]).max(extent[2]);
    if largest <= 0.0 {
        return Err(MeshError::Degenerate("zero extent on all axes".into()));
    }
    let center = [
        (min[0] + max[0]) * 0.5,
        (min[1] + max[1]) * 0.5,
        (min[2] + max[2]) * 0.5,
    ];
    let scale = 1.0 / largest;
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| {
            [
                (v[0] - center[0]) * scale,
                (v[1] - center[1]) * scale,
                (v[2] - center[2]) * scale,
            ]
        })
        .collect();
    Ok(TriangleMesh { vertices, triangles: mesh.triangles.clone() })
}

/// Load a ModelNet-style directory tree `<category>/<split>/<file>.off` into
/// a per-category mesh library. `split` of `None` loads every split.
/// Categories with no parseable meshes are omitted.
pub fn load_library(
    root: &Path,
    categories: &[String],
    split: Option<&str>,
) -> Result<BTreeMap<String, Vec<TriangleMesh>>, MeshError> {
    let mut library = BTreeMap::new();
    for category in categories {
        let cat_dir = root.join(category);
        if !cat_dir.is_dir() {
            continue;
        }
        let mut meshes = Vec::new();
        let mut splits: Vec<_> = std::fs::read_dir(&cat_dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter(|e| split.is_none_or(|s| e.file_name().to_string_lossy() == s))
            .map(|e| e.path())
            .collect();
        splits.sort();
        for split_dir in splits {
            let mut files: Vec<_> = std::fs::read_dir(&split_dir)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "off"))
                .collect();
            files.sort();
            for file in files {
                let text = std::fs::read_to_string(&file)?;
                match parse_off(&text) {
                    Ok(mesh) if !mesh.triangles.is_empty() => meshes.push(mesh),
                    Ok(_) => log::warn!("{}: no faces, skipped", file.display()),
                    Err(err) => log::warn!("{}: {err}, skipped", file.display()),
                }
            }
        }
        if !meshes.is_empty() {
            library.insert(category.clone(), meshes);
        }
    }
    Ok(library)
}

/// Procedural stand-in meshes, one distinctive shape per supported category.
/// Useful for dataset generation and tests when no ModelNet tree is mounted.
pub mod primitives {
    use std::collections::BTreeMap;

    use super::TriangleMesh;

    /// Axis-aligned box spanning [0,sx]x[0,sy]x[0,sz].
    pub fn boxy(sx: f64, sy: f64, sz: f64) -> TriangleMesh {
        let v = |x: f64, y: f64, z: f64| [x * sx, y * sy, z * sz];
        let vertices = vec![
            v(0., 0., 0.),
            v(1., 0., 0.),
            v(1., 1., 0.),
            v(0., 1., 0.),
            v(0., 0., 1.),
            v(1., 0., 1.),
            v(1., 1., 1.),
            v(0., 1., 1.),
        ];
        let quads = [
            [0, 3, 2, 1], // bottom
            [4, 5, 6, 7], // top
            [0, 1, 5, 4],
            [1, 2, 6, 5],
            [2, 3, 7, 6],
            [3, 0, 4, 7],
        ];
        let mut triangles = Vec::new();
        for q in quads {
            triangles.push([q[0], q[1], q[2]]);
            triangles.push([q[0], q[2], q[3]]);
        }
        TriangleMesh { vertices, triangles }
    }

    /// Square-based pyramid with base side `s` and height `h`.
    pub fn pyramid(s: f64, h: f64) -> TriangleMesh {
        let vertices = vec![
            [0., 0., 0.],
            [s, 0., 0.],
            [s, s, 0.],
            [0., s, 0.],
            [s * 0.5, s * 0.5, h],
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [0, 1, 4],
            [1, 2, 4],
            [2, 3, 4],
            [3, 0, 4],
        ];
        TriangleMesh { vertices, triangles }
    }

    /// Closed cone with an `n`-gon base of radius `r` and height `h`.
    pub fn cone(n: usize, r: f64, h: f64) -> TriangleMesh {
        let mut vertices = Vec::with_capacity(n + 2);
        for i in 0..n {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            vertices.push([r * a.cos(), r * a.sin(), 0.0]);
        }
        let base_center = vertices.len();
        vertices.push([0.0, 0.0, 0.0]);
        let apex = vertices.len();
        vertices.push([0.0, 0.0, h]);
        let mut triangles = Vec::with_capacity(2 * n);
        for i in 0..n {
            let j = (i + 1) % n;
            triangles.push([i, j, apex]);
            triangles.push([j, i, base_center]);
        }
        TriangleMesh { vertices, triangles }
    }

    /// Closed upright cylinder (an `n`-gon prism) of radius `r`, height `h`.
    pub fn cylinder(n: usize, r: f64, h: f64) -> TriangleMesh {
        let mut vertices = Vec::with_capacity(2 * n + 2);
        for ring in 0..2 {
            let z = ring as f64 * h;
            for i in 0..n {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                vertices.push([r * a.cos(), r * a.sin(), z]);
            }
        }
        let bottom_center = vertices.len();
        vertices.push([0.0, 0.0, 0.0]);
        let top_center = vertices.len();
        vertices.push([0.0, 0.0, h]);
        let mut triangles = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            triangles.push([i, j, n + j]);
            triangles.push([i, n + j, n + i]);
            triangles.push([j, i, bottom_center]);
            triangles.push([n + i, n + j, top_center]);
        }
        TriangleMesh { vertices, triangles }
    }

    /// Right-triangular wedge (a box cut along a diagonal), like a ramp.
    pub fn wedge(sx: f64, sy: f64, sz: f64) -> TriangleMesh {
        let vertices = vec![
            [0., 0., 0.],
            [sx, 0., 0.],
            [sx, sy, 0.],
            [0., sy, 0.],
            [0., 0., sz],
            [0., sy, sz],
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [0, 1, 4],
            [1, 5, 4],
            [1, 2, 5],
            [2, 3, 5],
            [3, 0, 4],
            [3, 4, 5],
        ];
        TriangleMesh { vertices, triangles }
    }

    /// Table-like shape: a thin slab on four corner legs.
    pub fn table(s: f64, h: f64, top: f64, leg: f64) -> TriangleMesh {
        let mut mesh = boxy(s, s, top);
        for v in &mut mesh.vertices {
            v[2] += h - top;
        }
        for (lx, ly) in [(0.0, 0.0), (s - leg, 0.0), (0.0, s - leg), (s - leg, s - leg)] {
            let leg_mesh = boxy(leg, leg, h - top);
            let base = mesh.vertices.len();
            for v in &leg_mesh.vertices {
                mesh.vertices.push([v[0] + lx, v[1] + ly, v[2]]);
            }
            for t in &leg_mesh.triangles {
                mesh.triangles.push([t[0] + base, t[1] + base, t[2] + base]);
            }
        }
        mesh
    }

    /// Build a library keyed by the given category names, cycling through a
    /// fixed roster of primitives with per-category proportions.
    pub fn builtin_library(categories: &[String]) -> BTreeMap<String, Vec<TriangleMesh>> {
        let shapes: Vec<(&str, TriangleMesh)> = vec![
            ("toilet", boxy(0.6, 0.9, 0.8)),
            ("airplane", wedge(1.0, 0.25, 0.18)),
            ("bathtub", boxy(1.0, 0.5, 0.3)),
            ("bottle", cylinder(12, 0.12, 1.0)),
            ("bowl", cylinder(16, 0.5, 0.3)),
            ("cone", cone(16, 0.5, 1.0)),
            ("cup", cylinder(10, 0.22, 0.6)),
            ("desk", table(1.0, 0.55, 0.08, 0.08)),
            ("guitar", boxy(0.35, 1.0, 0.12)),
            ("laptop", boxy(0.9, 0.7, 0.05)),
            ("plant", cone(8, 0.35, 0.9)),
            ("sofa", boxy(1.0, 0.45, 0.42)),
            ("stool", table(0.4, 0.45, 0.06, 0.07)),
            ("tent", pyramid(1.0, 0.65)),
        ];
        let mut library = BTreeMap::new();
        for (i, category) in categories.iter().enumerate() {
            let mesh = shapes
                .iter()
                .find(|(name, _)| name == category)
                .map(|(_, m)| m.clone())
                .unwrap_or_else(|| shapes[i % shapes.len()].1.clone());
            library.insert(category.clone(), vec![mesh]);
        }
        library
    }
}
