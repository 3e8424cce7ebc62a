use super::{shape_signature, ShapeSignature, TriangleMesh, DEFAULT_BINS};

/// Maximum signature distance at which two objects count as the same shape.
pub const DEDUP_TOLERANCE: f64 = 1e-3;

/// Greedy first-occurrence deduplication in ascending id order, with the
/// default bin count and tolerance.
pub fn deduplicate(objects: &[(u64, TriangleMesh)]) -> Vec<u64> {
    deduplicate_with(objects, DEFAULT_BINS, DEDUP_TOLERANCE)
}

/// An object is dropped when its signature lies within `tolerance` of an
/// earlier survivor. Objects whose signature cannot be computed (zero area)
/// always survive.
pub fn deduplicate_with(objects: &[(u64, TriangleMesh)], bins: usize, tolerance: f64) -> Vec<u64> {
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.sort_by_key(|&i| objects[i].0);
    let signatures: Vec<Option<ShapeSignature>> = order
        .iter()
        .map(|&i| shape_signature(&objects[i].1, bins).ok())
        .collect();
    greedy_survivors(&signatures, tolerance)
        .into_iter()
        .map(|k| objects[order[k]].0)
        .collect()
}

/// Greedy pass over precomputed signatures in the given order; returns the
/// positions that survive. `None` entries always survive.
pub fn greedy_survivors(signatures: &[Option<ShapeSignature>], tolerance: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, signature) in signatures.iter().enumerate() {
        let duplicate = signature.as_ref().is_some_and(|sig| {
            kept.iter()
                .filter_map(|&k| signatures[k].as_ref())
                .any(|s| s.distance(sig) <= tolerance)
        });
        if !duplicate {
            kept.push(i);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_a() -> TriangleMesh {
        TriangleMesh::cuboid([1.0, 0.4, 0.2])
    }

    fn identity() -> [[f64; 3]; 3] {
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    }

    #[test]
    fn translated_copy_removed() {
        let objects = vec![
            (1, box_a()),
            (2, box_a().transformed(&identity(), [3.0, -2.0, 1.0])),
            (3, TriangleMesh::prism(8, 0.3, 2.0)),
        ];
        assert_eq!(deduplicate(&objects), vec![1, 3]);
    }

    #[test]
    fn distinct_set_unchanged() {
        let objects = vec![
            (5, box_a()),
            (2, TriangleMesh::prism(8, 0.3, 2.0)),
            (9, TriangleMesh::cuboid([2.0, 2.0, 0.1])),
        ];
        assert_eq!(deduplicate(&objects), vec![2, 5, 9]);
    }

    #[test]
    fn rotated_dropped_scaled_kept() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot_x_45 = [[1.0, 0.0, 0.0], [0.0, c, -c], [0.0, c, c]];
        let objects = vec![
            (1, box_a()),
            (2, box_a().transformed(&rot_x_45, [0.5, 0.5, 0.5])),
            (3, box_a().scaled(2.0)),
        ];
        assert_eq!(deduplicate(&objects), vec![1, 3]);
    }

    #[test]
    fn idempotent() {
        let objects = vec![
            (1, box_a()),
            (2, box_a().transformed(&identity(), [1.0, 1.0, 1.0])),
            (3, box_a().scaled(3.0)),
            (4, TriangleMesh::prism(6, 1.0, 1.0)),
        ];
        let once = deduplicate(&objects);
        let kept: Vec<_> = objects
            .iter()
            .filter(|(id, _)| once.contains(id))
            .cloned()
            .collect();
        assert_eq!(deduplicate(&kept), once);
    }
}
