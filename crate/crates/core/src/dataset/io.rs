//! Dataset directory layout:
//!
//! ```text
//! manifest.txt
//! clouds/000000.f32     N × 3 little-endian f32 per object
//! ```
//!
//! The manifest is line-oriented text:
//!
//! ```text
//! ifcnetpp-ds/1
//! seed <u64>
//! points <N>
//! objects <count>
//! <train|test> <uid> <class code> <c0> .. <c5> <cloud path> <sha256 of cloud>
//! digest <sha256 of every preceding byte>
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{BimObject, ClassLabel, DatasetError, DatasetSplit};
use crate::geometry::PointCloud;
use crate::relations::RelationCountVector;

pub const FORMAT_VERSION: &str = "ifcnetpp-ds/1";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CLOUDS_DIR: &str = "clouds";

fn io_err(path: &Path, e: std::io::Error) -> DatasetError {
    if e.kind() == std::io::ErrorKind::NotFound {
        DatasetError::MissingFile(path.display().to_string())
    } else {
        DatasetError::Io(format!("{}: {e}", path.display()))
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn cloud_bytes(cloud: &PointCloud) -> Vec<u8> {
    cloud
        .points
        .iter()
        .flat_map(|p| p.iter().flat_map(|c| c.to_le_bytes()))
        .collect()
}

fn valid_uid(uid: &str) -> bool {
    !uid.is_empty() && !uid.chars().any(char::is_whitespace)
}

/// Writes `split` under `dir`, creating it if needed. All clouds must have
/// the same point count.
pub fn save(split: &DatasetSplit, dir: &Path) -> Result<(), DatasetError> {
    let clouds = dir.join(CLOUDS_DIR);
    fs::create_dir_all(&clouds).map_err(|e| io_err(&clouds, e))?;
    let points = split
        .train
        .iter()
        .chain(&split.test)
        .next()
        .map_or(0, |o| o.cloud.len());

    let mut manifest = format!(
        "{FORMAT_VERSION}\nseed {}\npoints {points}\nobjects {}\n",
        split.seed,
        split.len()
    );
    let tagged = split
        .train
        .iter()
        .map(|o| ("train", o))
        .chain(split.test.iter().map(|o| ("test", o)));
    for (index, (part, object)) in tagged.enumerate() {
        if !valid_uid(&object.uid) {
            return Err(DatasetError::InvalidUid(object.uid.clone()));
        }
        if object.cloud.len() != points {
            return Err(DatasetError::Geometry(
                crate::geometry::GeometryError::InvalidPointCount(object.cloud.len()),
            ));
        }
        let rel = format!("{CLOUDS_DIR}/{index:06}.f32");
        let bytes = cloud_bytes(&object.cloud);
        let path = dir.join(&rel);
        fs::write(&path, &bytes).map_err(|e| io_err(&path, e))?;
        let counts = object.relation.0.map(|c| c.to_string()).join(" ");
        manifest.push_str(&format!(
            "{part} {} {} {counts} {rel} {}\n",
            object.uid,
            object.label.code(),
            hex_digest(&bytes)
        ));
    }
    let digest = hex_digest(manifest.as_bytes());
    manifest.push_str(&format!("digest {digest}\n"));
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(|e| io_err(&path, e))
}

fn header_value(line: Option<(usize, &str)>, key: &str) -> Result<u64, DatasetError> {
    let (no, text) = line.ok_or(DatasetError::MalformedManifest {
        line: 0,
        reason: format!("missing {key} line"),
    })?;
    text.strip_prefix(key)
        .and_then(|v| v.strip_prefix(' '))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| DatasetError::MalformedManifest {
            line: no + 1,
            reason: format!("expected `{key} <integer>`"),
        })
}

/// Reads a dataset written by [`save`], verifying the manifest digest and
/// every cloud checksum.
pub fn load(dir: &Path) -> Result<DatasetSplit, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut lines = text.lines().enumerate();

    let version = lines.next().map(|(_, l)| l).unwrap_or_default();
    if version != FORMAT_VERSION {
        return Err(DatasetError::FormatVersionMismatch {
            found: version.to_string(),
        });
    }
    let body_end = text
        .rfind("digest ")
        .filter(|&at| at == 0 || text.as_bytes()[at - 1] == b'\n')
        .ok_or(DatasetError::MalformedManifest {
            line: text.lines().count(),
            reason: "missing digest line".into(),
        })?;
    let expected = text[body_end + "digest ".len()..].trim_end();
    if hex_digest(&text.as_bytes()[..body_end]) != expected {
        return Err(DatasetError::ChecksumMismatch(MANIFEST_FILE.into()));
    }

    let seed = header_value(lines.next(), "seed")?;
    let points = header_value(lines.next(), "points")? as usize;
    let count = header_value(lines.next(), "objects")? as usize;

    let mut split = DatasetSplit {
        train: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (no, line) in lines {
        if line.starts_with("digest ") {
            break;
        }
        let malformed = |reason: &str| DatasetError::MalformedManifest {
            line: no + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split(' ').collect();
        let [part, uid, code, c0, c1, c2, c3, c4, c5, rel, sha] = fields[..] else {
            return Err(malformed("expected 11 fields"));
        };
        if !valid_uid(uid) {
            return Err(DatasetError::InvalidUid(uid.to_string()));
        }
        let label = code
            .parse()
            .ok()
            .and_then(ClassLabel::from_code)
            .ok_or_else(|| malformed("unknown class code"))?;
        let mut counts = [0u32; 6];
        for (slot, field) in counts.iter_mut().zip([c0, c1, c2, c3, c4, c5]) {
            *slot = field.parse().map_err(|_| malformed("bad relation count"))?;
        }
        if rel.contains("..") || rel.starts_with('/') {
            return Err(malformed("cloud path escapes the dataset directory"));
        }
        let cloud_path = dir.join(rel);
        let bytes = fs::read(&cloud_path).map_err(|e| io_err(&cloud_path, e))?;
        if hex_digest(&bytes) != sha {
            return Err(DatasetError::ChecksumMismatch(rel.to_string()));
        }
        if bytes.len() != points * 12 {
            return Err(malformed("cloud size does not match point count"));
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let object = BimObject {
            uid: uid.to_string(),
            label,
            cloud: PointCloud {
                points: values.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect(),
            },
            relation: RelationCountVector(counts),
        };
        match part {
            "train" => split.train.push(object),
            "test" => split.test.push(object),
            _ => return Err(malformed("split must be train or test")),
        }
    }
    if split.len() != count {
        return Err(DatasetError::MalformedManifest {
            line: 4,
            reason: format!("declares {count} objects, lists {}", split.len()),
        });
    }
    if !split.uids_unique() {
        let mut seen = std::collections::BTreeSet::new();
        let dup = split
            .train
            .iter()
            .chain(&split.test)
            .find(|o| !seen.insert(o.uid.as_str()))
            .map(|o| o.uid.clone())
            .unwrap_or_default();
        return Err(DatasetError::DuplicateUid(dup));
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::split;

    fn sample_split() -> DatasetSplit {
        let objects = (0..10)
            .map(|i| BimObject {
                uid: format!("m.ifc#{i}"),
                label: ClassLabel::from_code(i % 3).unwrap(),
                cloud: PointCloud {
                    points: vec![[i as f32, 0.5, -0.25], [0.1, 0.2, 1.0 / 3.0]],
                },
                relation: RelationCountVector([i as u32, 0, 1, 2, 3, 4]),
            })
            .collect();
        split(objects, 0.7, 11).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample_split();
        save(&s, dir.path()).unwrap();
        assert_eq!(load(dir.path()).unwrap(), s);
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        save(&sample_split(), dir.path()).unwrap();
        let cloud = dir.path().join("clouds/000003.f32");
        let mut bytes = fs::read(&cloud).unwrap();
        bytes[0] ^= 1;
        fs::write(&cloud, bytes).unwrap();
        assert_eq!(
            load(dir.path()),
            Err(DatasetError::ChecksumMismatch("clouds/000003.f32".into()))
        );
        fs::remove_file(&cloud).unwrap();
        assert!(matches!(load(dir.path()), Err(DatasetError::MissingFile(_))));
    }

    #[test]
    fn manifest_tampering_and_version() {
        let dir = tempfile::tempdir().unwrap();
        save(&sample_split(), dir.path()).unwrap();
        let manifest = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest).unwrap();
        fs::write(&manifest, text.replacen("seed 11", "seed 12", 1)).unwrap();
        assert_eq!(
            load(dir.path()),
            Err(DatasetError::ChecksumMismatch(MANIFEST_FILE.into()))
        );
        fs::write(&manifest, text.replacen("ifcnetpp-ds/1", "ifcnetpp-ds/2", 1)).unwrap();
        assert!(matches!(
            load(dir.path()),
            Err(DatasetError::FormatVersionMismatch { .. })
        ));
        assert!(matches!(
            load(&dir.path().join("nope")),
            Err(DatasetError::MissingFile(_))
        ));
    }

    #[test]
    fn rejects_bad_uids() {
        let mut s = sample_split();
        s.train[0].uid = "has space".into();
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            save(&s, dir.path()),
            Err(DatasetError::InvalidUid("has space".into()))
        );
    }
}
