//! Load a mesh, sample a normalized point cloud and find shape duplicates.

use ifc_grl::geometry::{deduplicate, load_obj, sample_point_cloud, shape_signature, write_obj, TriangleMesh, DEFAULT_BINS};

fn rotation_z(angle: f64) -> [[f64; 3]; 3] {
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let slab = TriangleMesh::cuboid([4.0, 3.0, 0.25]);
    let text = write_obj(&slab);
    let loaded = load_obj(&text)?;
    println!("OBJ round trip: {} vertices, {} faces, area {:.3}", loaded.vertices.len(), loaded.faces.len(), loaded.surface_area());

    let cloud = sample_point_cloud(&loaded, 1024, 7)?;
    println!("cloud: {} points, centroid {:?}, max norm {:.6}", cloud.len(), cloud.centroid(), cloud.max_norm());

    // A rigidly moved copy shares the signature. Extents carry absolute
    // size, so an enlarged copy and a column do not.
    let moved = slab.transformed(&rotation_z(0.8), [10.0, -2.0, 3.0]);
    let enlarged = slab.scaled(2.5);
    let column = TriangleMesh::prism(8, 0.2, 3.0);
    let reference = shape_signature(&slab, DEFAULT_BINS)?;
    for (name, mesh) in [("moved", &moved), ("enlarged", &enlarged), ("column", &column)] {
        println!("signature distance slab/{name}: {:.2e}", reference.distance(&shape_signature(mesh, DEFAULT_BINS)?));
    }

    let survivors = deduplicate(&[(1, slab), (2, moved), (3, enlarged), (4, column)]);
    println!("survivors after deduplication: {survivors:?}");
    Ok(())
}
