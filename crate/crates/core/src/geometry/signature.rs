use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{sample_surface, GeometryError, Point3, TriangleMesh};

/// Surface samples used for the pairwise-distance histogram.
pub const SIGNATURE_SAMPLES: usize = 128;
pub const DEFAULT_BINS: usize = 32;
const SIGNATURE_SEED: u64 = 0x00C0_FFEE_D00D_F00D;

/// Rigid-motion-invariant shape descriptor, L2-normalised.
///
/// Layout: three principal-axis extents (descending, model units) followed by
/// a `bins`-bin histogram of pairwise sample distances over `[0, diagonal]`.
/// Extents carry absolute size, so the same shape at a different scale gets a
/// different signature; the relative weight of the histogram part depends on
/// the model's length unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSignature {
    pub descriptor: Vec<f64>,
}

impl ShapeSignature {
    pub fn extents(&self) -> &[f64] {
        &self.descriptor[..3]
    }

    pub fn distance(&self, other: &ShapeSignature) -> f64 {
        if self.descriptor.len() != other.descriptor.len() {
            return f64::INFINITY;
        }
        self.descriptor
            .iter()
            .zip(&other.descriptor)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Principal axes of the sample set (columns, by decreasing variance), each
/// oriented so the third moment of the projections is non-negative.
fn principal_axes(samples: &[Point3]) -> [Vector3<f64>; 3] {
    let n = samples.len() as f64;
    let mean = samples
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + Vector3::from(*p))
        / n;
    let mut cov = Matrix3::zeros();
    for p in samples {
        let d = Vector3::from(*p) - mean;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.map(|k| {
        let axis: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
        let third: f64 = samples
            .iter()
            .map(|p| (Vector3::from(*p) - mean).dot(&axis).powi(3))
            .sum();
        if third < 0.0 {
            -axis
        } else {
            axis
        }
    })
}

/// Computes the signature of `mesh` from deterministic surface samples.
pub fn shape_signature(mesh: &TriangleMesh, bins: usize) -> Result<ShapeSignature, GeometryError> {
    let bins = bins.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(SIGNATURE_SEED);
    let samples: Vec<Point3> = sample_surface(mesh, SIGNATURE_SAMPLES, &mut rng)?
        .into_iter()
        .map(|(_, p)| p)
        .collect();

    let axes = principal_axes(&samples);
    let mut used = vec![false; mesh.vertices.len()];
    for face in &mesh.faces {
        for &v in face {
            used[v] = true;
        }
    }
    let mut extents = axes.map(|axis| {
        let (lo, hi) = mesh
            .vertices
            .iter()
            .zip(&used)
            .filter(|(_, &u)| u)
            .map(|(p, _)| Vector3::from(*p).dot(&axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    });
    extents.sort_by(|a, b| b.total_cmp(a));

    let diagonal = extents.iter().map(|e| e * e).sum::<f64>().sqrt();
    if diagonal.is_nan() || diagonal <= 0.0 {
        return Err(GeometryError::ZeroAreaMesh);
    }

    // Linear (tent) binning keeps the histogram continuous in the distances,
    // so float noise from a rigid motion cannot flip a sample between bins.
    let mut hist = vec![0.0; bins];
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = super::norm(super::sub(samples[i], samples[j]));
            let t = (d / diagonal).clamp(0.0, 1.0) * bins as f64 - 0.5;
            let lo = t.floor();
            let frac = t - lo;
            let clamp = |b: f64| (b.max(0.0) as usize).min(bins - 1);
            hist[clamp(lo)] += 1.0 - frac;
            hist[clamp(lo + 1.0)] += frac;
        }
    }
    let total: f64 = hist.iter().sum();
    for h in &mut hist {
        *h /= total;
    }

    let mut descriptor = Vec::with_capacity(3 + bins);
    descriptor.extend_from_slice(&extents);
    descriptor.extend_from_slice(&hist);
    let length = descriptor.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut descriptor {
        *v /= length;
    }
    Ok(ShapeSignature { descriptor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEDUP_TOLERANCE;

    fn rot_z_90() -> [[f64; 3]; 3] {
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
    }

    fn lshape() -> TriangleMesh {
        // Two boxes glued into an L, as one triangle soup.
        let a = TriangleMesh::cuboid([2.0, 0.5, 0.3]);
        let b = TriangleMesh::cuboid([0.5, 1.5, 0.3]);
        let mut vertices = a.vertices.clone();
        let offset = vertices.len();
        vertices.extend(b.vertices.iter().map(|p| [p[0], p[1] + 0.5, p[2]]));
        let mut faces = a.faces.clone();
        faces.extend(b.faces.iter().map(|f| f.map(|i| i + offset)));
        TriangleMesh::new(vertices, faces).unwrap()
    }

    #[test]
    fn translation_invariant() {
        let m = lshape();
        let s0 = shape_signature(&m, DEFAULT_BINS).unwrap();
        let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let s1 = shape_signature(&m.transformed(&identity, [5.0, 7.0, 9.0]), DEFAULT_BINS).unwrap();
        assert!(s0.distance(&s1) < DEDUP_TOLERANCE);
    }

    #[test]
    fn rotation_invariant() {
        let m = lshape();
        let s0 = shape_signature(&m, DEFAULT_BINS).unwrap();
        let s1 = shape_signature(&m.transformed(&rot_z_90(), [0.0; 3]), DEFAULT_BINS).unwrap();
        assert!(s0.distance(&s1) < DEDUP_TOLERANCE);
    }

    #[test]
    fn scale_changes_signature() {
        let cube = TriangleMesh::cuboid([1.0, 1.0, 1.0]);
        let s1 = shape_signature(&cube, DEFAULT_BINS).unwrap();
        let s2 = shape_signature(&cube.scaled(2.0), DEFAULT_BINS).unwrap();
        // Extents double while the histogram is scale-free.
        let e1 = s1.extents()[0] / s1.descriptor[3..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let e2 = s2.extents()[0] / s2.descriptor[3..].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((e2 / e1 - 2.0).abs() < 1e-9);
        assert!(s1.distance(&s2) > DEDUP_TOLERANCE);
    }

    #[test]
    fn mirror_image_matches() {
        let m = lshape();
        let mirror = m.transformed(&[[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0.0; 3]);
        let s0 = shape_signature(&m, DEFAULT_BINS).unwrap();
        let s1 = shape_signature(&mirror, DEFAULT_BINS).unwrap();
        assert!(s0.distance(&s1) < DEDUP_TOLERANCE);
    }

    #[test]
    fn normalised_length() {
        let s = shape_signature(&lshape(), 16).unwrap();
        assert_eq!(s.descriptor.len(), 19);
        let n: f64 = s.descriptor.iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
}
