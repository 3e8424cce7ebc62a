use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, Point3, TriangleMesh};

/// Points per cloud unless configured otherwise.
pub const DEFAULT_POINTS: usize = 1024;

/// Fixed-size point set centred on its centroid and scaled into the unit ball
/// (farthest point at distance 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f32; 3]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        let mut c = [0.0f64; 3];
        for p in &self.points {
            for k in 0..3 {
                c[k] += f64::from(p[k]);
            }
        }
        let n = self.points.len().max(1) as f64;
        c.map(|v| v / n)
    }

    pub fn max_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| {
                let [x, y, z] = p.map(f64::from);
                (x * x + y * y + z * z).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Draws `n` area-weighted surface samples, returning each point with the
/// index of the face it landed on.
pub fn sample_surface<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(usize, Point3)>, GeometryError> {
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.triangle_area(f);
        cumulative.push(total);
    }
    if total <= 0.0 || !total.is_finite() {
        return Err(GeometryError::ZeroAreaMesh);
    }

    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        let face = cumulative
            .partition_point(|&c| c <= target)
            .min(cumulative.len() - 1);
        let [a, b, c] = mesh.triangle(face);
        let r1 = rng.random::<f64>().sqrt();
        let r2 = rng.random::<f64>();
        let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
        let p = [0, 1, 2].map(|k| wa * a[k] + wb * b[k] + wc * c[k]);
        out.push((face, p));
    }
    Ok(out)
}

/// Samples `n` points with probability proportional to triangle area, then
/// centres them on their centroid and scales the farthest point to norm 1.
/// Output is a pure function of `(mesh, n, seed)`.
pub fn sample_point_cloud(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<PointCloud, GeometryError> {
    if n < 2 {
        return Err(GeometryError::InvalidPointCount(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_surface(mesh, n, &mut rng)?;

    let mut centroid = [0.0; 3];
    for (_, p) in &samples {
        for k in 0..3 {
            centroid[k] += p[k];
        }
    }
    let centroid = centroid.map(|c| c / n as f64);
    let centred: Vec<Point3> = samples
        .iter()
        .map(|(_, p)| [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]])
        .collect();
    let radius = centred
        .iter()
        .map(|p| super::norm(*p))
        .fold(0.0, f64::max);
    if radius.is_nan() || radius <= 0.0 {
        return Err(GeometryError::ZeroAreaMesh);
    }
    let points = centred
        .iter()
        .map(|p| p.map(|v| (v / radius) as f32))
        .collect();
    Ok(PointCloud { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cross, dot, sub};

    fn triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![[0.3, -1.0, 2.0], [2.0, 0.5, 1.0], [-0.5, 1.5, 0.2]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn samples_lie_in_triangle_plane() {
        let mesh = triangle();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let [a, b, c] = mesh.triangle(0);
        let normal = cross(sub(b, a), sub(c, a));
        let unit = normal.map(|v| v / dot(normal, normal).sqrt());
        for (_, p) in sample_surface(&mesh, 4, &mut rng).unwrap() {
            assert!(dot(sub(p, a), unit).abs() < 1e-9);
        }
        assert_eq!(sample_point_cloud(&mesh, 4, 11).unwrap().len(), 4);
    }

    #[test]
    fn area_weighting() {
        // Areas 3:1 (legs 3x2 and 1x2 right triangles in separate places).
        let mesh = TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [3.0, 0.0, 0.0],
                [0.0, 2.0, 0.0],
                [10.0, 0.0, 0.0],
                [11.0, 0.0, 0.0],
                [10.0, 2.0, 0.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let samples = sample_surface(&mesh, 100_000, &mut rng).unwrap();
        let first = samples.iter().filter(|(f, _)| *f == 0).count() as f64 / 100_000.0;
        assert!((first - 0.75).abs() < 0.01, "{first}");
    }

    #[test]
    fn normalised_and_deterministic() {
        let mesh = TriangleMesh::cuboid([4.0, 1.0, 0.2]).transformed(
            &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            [100.0, -50.0, 3.0],
        );
        let cloud = sample_point_cloud(&mesh, 1024, 7).unwrap();
        assert!(cloud.centroid().iter().all(|c| c.abs() < 1e-5));
        assert!((cloud.max_norm() - 1.0).abs() < 1e-5);
        assert_eq!(cloud, sample_point_cloud(&mesh, 1024, 7).unwrap());
        assert_ne!(cloud, sample_point_cloud(&mesh, 1024, 8).unwrap());
    }

    #[test]
    fn zero_area() {
        let flat = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(
            sample_point_cloud(&flat, 8, 0),
            Err(GeometryError::ZeroAreaMesh)
        );
        assert_eq!(
            sample_point_cloud(&triangle(), 1, 0),
            Err(GeometryError::InvalidPointCount(1))
        );
    }
}
