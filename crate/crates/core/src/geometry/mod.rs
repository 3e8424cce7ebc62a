//! Per-object meshes: OBJ loading, surface point sampling and
//! rigid-motion-invariant deduplication.

mod dedup;
mod obj;
mod sampling;
mod signature;

pub use dedup::{deduplicate, deduplicate_with, greedy_survivors, DEDUP_TOLERANCE};
pub use obj::{load_obj, write_obj};
pub use sampling::{sample_point_cloud, sample_surface, PointCloud, DEFAULT_POINTS};
pub use signature::{shape_signature, ShapeSignature, DEFAULT_BINS, SIGNATURE_SAMPLES};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("line {line}: vertex index {index} out of range")]
    IndexOutOfRange { line: usize, index: i64 },
    #[error("mesh has no vertices or no faces")]
    EmptyMesh,
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("mesh has zero surface area")]
    ZeroAreaMesh,
    #[error("point count must be at least 2, got {0}")]
    InvalidPointCount(usize),
}

/// Triangle soup with 0-based face indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting out-of-range indices and dropping faces that
    /// repeat a vertex index.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if let Some(&bad) = faces.iter().flatten().find(|&&i| i >= vertices.len()) {
            return Err(GeometryError::IndexOutOfRange {
                line: 0,
                index: bad as i64 + 1,
            });
        }
        let faces: Vec<_> = faces
            .into_iter()
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        if vertices.is_empty() || faces.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        Ok(Self { vertices, faces })
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }

    /// Applies `p -> rotation * p + translation` to every vertex.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], translation: Point3) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|p| {
                let mut q = translation;
                for (r, row) in rotation.iter().enumerate() {
                    q[r] += row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
                }
                q
            })
            .collect();
        Self {
            vertices,
            faces: self.faces.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let s = factor;
        self.transformed(&[[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]], [0.0; 3])
    }

    /// Axis-aligned box `[0,sx]×[0,sy]×[0,sz]` as 12 triangles.
    pub fn cuboid(size: Point3) -> Self {
        let [x, y, z] = size;
        let vertices = vec![
            [0.0, 0.0, 0.0],
            [x, 0.0, 0.0],
            [x, y, 0.0],
            [0.0, y, 0.0],
            [0.0, 0.0, z],
            [x, 0.0, z],
            [x, y, z],
            [0.0, y, z],
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        Self { vertices, faces }
    }

    /// Closed prism with a regular `sides`-gon cross-section of circumradius
    /// `radius`, extruded along +z by `length`.
    pub fn prism(sides: usize, radius: f64, length: f64) -> Self {
        let sides = sides.max(3);
        let mut vertices = Vec::with_capacity(2 * sides + 2);
        for ring in 0..2 {
            let z = ring as f64 * length;
            for k in 0..sides {
                let t = std::f64::consts::TAU * k as f64 / sides as f64;
                vertices.push([radius * t.cos(), radius * t.sin(), z]);
            }
        }
        let bottom = vertices.len();
        vertices.push([0.0, 0.0, 0.0]);
        vertices.push([0.0, 0.0, length]);
        let mut faces = Vec::with_capacity(4 * sides);
        for k in 0..sides {
            let n = (k + 1) % sides;
            faces.push([k, n, sides + n]);
            faces.push([k, sides + n, sides + k]);
            faces.push([bottom, n, k]);
            faces.push([bottom + 1, sides + k, sides + n]);
        }
        Self { vertices, faces }
    }
}

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_faces_dropped() {
        let m = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2], [0, 0, 1]],
        )
        .unwrap();
        assert_eq!(m.faces.len(), 1);
    }

    #[test]
    fn primitive_areas() {
        let cube = TriangleMesh::cuboid([1.0, 2.0, 3.0]);
        assert!((cube.surface_area() - 22.0).abs() < 1e-12);
        let p = TriangleMesh::prism(64, 1.0, 2.0);
        let lateral = 64.0 * 2.0 * 2.0 * (std::f64::consts::PI / 64.0).sin() * 2.0 / 2.0;
        let caps = 2.0 * 0.5 * 64.0 * (std::f64::consts::TAU / 64.0).sin();
        assert!((p.surface_area() - lateral - caps).abs() < 1e-9);
    }
}
