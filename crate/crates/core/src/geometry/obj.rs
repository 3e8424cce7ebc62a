use super::{GeometryError, Point3, TriangleMesh};

/// Parses Wavefront OBJ text. Only `v` and `f` records are read; polygons are
/// fan-triangulated around their first vertex and faces that repeat a
/// vertex index are dropped. Negative (relative) indices are supported.
pub fn load_obj(text: &str) -> Result<TriangleMesh, GeometryError> {
    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces = Vec::new();

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for slot in &mut p {
                    let field = fields.next().ok_or_else(|| GeometryError::MalformedLine {
                        line: line_no,
                        reason: "vertex needs three coordinates".into(),
                    })?;
                    *slot = field.parse().map_err(|_| GeometryError::MalformedLine {
                        line: line_no,
                        reason: format!("bad coordinate {field:?}"),
                    })?;
                }
                vertices.push(p);
            }
            Some("f") => {
                let corners = fields
                    .map(|f| resolve_index(f, vertices.len(), line_no))
                    .collect::<Result<Vec<_>, _>>()?;
                if corners.len() < 3 {
                    return Err(GeometryError::MalformedLine {
                        line: line_no,
                        reason: "face needs at least three vertices".into(),
                    });
                }
                for k in 1..corners.len() - 1 {
                    let tri = [corners[0], corners[k], corners[k + 1]];
                    if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                        faces.push(tri);
                    }
                }
            }
            _ => {}
        }
    }

    if vertices.is_empty() || faces.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    Ok(TriangleMesh { vertices, faces })
}

/// Writes `v` and `f` records; coordinates round-trip exactly through
/// [`load_obj`].
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for [x, y, z] in &mesh.vertices {
        out.push_str(&format!("v {x:?} {y:?} {z:?}\n"));
    }
    for [a, b, c] in &mesh.faces {
        out.push_str(&format!("f {} {} {}\n", a + 1, b + 1, c + 1));
    }
    out
}

/// `i`, `i/t`, `i//n` or `i/t/n`; 1-based, negative counts back from the
/// last vertex seen so far.
fn resolve_index(field: &str, seen: usize, line: usize) -> Result<usize, GeometryError> {
    let head = field.split('/').next().unwrap_or("");
    let index: i64 = head.parse().map_err(|_| GeometryError::MalformedLine {
        line,
        reason: format!("bad face index {field:?}"),
    })?;
    let resolved = if index > 0 {
        index - 1
    } else {
        seen as i64 + index
    };
    if index == 0 || resolved < 0 || resolved >= seen as i64 {
        return Err(GeometryError::IndexOutOfRange { line, index });
    }
    Ok(resolved as usize)
}
