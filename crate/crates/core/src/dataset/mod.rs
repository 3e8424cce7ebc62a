//! Labeled object datasets: assembly from parsed models and meshes, class
//! capping, stratified train/test splitting and on-disk persistence.

mod assemble;
mod corpus;
mod io;
mod label;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use assemble::{assemble, AssembleConfig, Assembly, SourceModel};
pub use corpus::{read_corpus, Corpus};
pub use io::{load, save, CLOUDS_DIR, FORMAT_VERSION, MANIFEST_FILE};
pub use label::ClassLabel;

use crate::geometry::{GeometryError, PointCloud};
use crate::relations::{RelationCountVector, RelationError};
use crate::step::StepError;

/// Objects kept per class unless configured otherwise.
pub const DEFAULT_CAP: usize = 2000;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("unsupported dataset format {found:?} (expected {FORMAT_VERSION})")]
    FormatVersionMismatch { found: String },
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("manifest line {line}: {reason}")]
    MalformedManifest { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(String),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("class cap must be positive")]
    InvalidCap,
    #[error("uid {0:?} appears more than once")]
    DuplicateUid(String),
    #[error("uid {0:?} is empty or contains whitespace")]
    InvalidUid(String),
    #[error("{label}: {train} of {total} objects in train, expected {expected}")]
    Stratification {
        label: ClassLabel,
        train: usize,
        total: usize,
        expected: String,
    },
}

/// One labeled object: geometry and relation vector always travel together.
#[derive(Debug, Clone, PartialEq)]
pub struct BimObject {
    pub uid: String,
    pub label: ClassLabel,
    pub cloud: PointCloud,
    pub relation: RelationCountVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<BimObject>,
    pub test: Vec<BimObject>,
    pub seed: u64,
}

impl DatasetSplit {
    /// `(train, test)` counts per class code.
    pub fn class_counts(&self) -> [(usize, usize); ClassLabel::COUNT] {
        let mut counts = [(0, 0); ClassLabel::COUNT];
        for o in &self.train {
            counts[o.label.code()].0 += 1;
        }
        for o in &self.test {
            counts[o.label.code()].1 += 1;
        }
        counts
    }

    /// Classes without any object.
    pub fn empty_classes(&self) -> Vec<ClassLabel> {
        let counts = self.class_counts();
        ClassLabel::ALL
            .into_iter()
            .filter(|l| counts[l.code()] == (0, 0))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that every class puts `floor` or `ceil` of `fraction · n`
    /// objects in train, so manifests produced with either rounding pass.
    pub fn check_stratification(&self, fraction: f64) -> Result<(), DatasetError> {
        for label in ClassLabel::ALL {
            let (train, test) = self.class_counts()[label.code()];
            let total = train + test;
            let exact = fraction * total as f64;
            let (lo, hi) = ((exact + 1e-9).floor() as usize, (exact - 1e-9).ceil() as usize);
            if train != lo && train != hi {
                return Err(DatasetError::Stratification {
                    label,
                    train,
                    total,
                    expected: if lo == hi { lo.to_string() } else { format!("{lo} or {hi}") },
                });
            }
        }
        Ok(())
    }

    pub fn uids_unique(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.train.iter().chain(&self.test).all(|o| seen.insert(o.uid.as_str()))
    }
}

/// Stable per-object seed, independent of processing order.
pub fn object_seed(seed: u64, uid: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(uid.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn class_rng(seed: u64, label: ClassLabel, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(object_seed(seed, &format!("{purpose}/{}", label.name())))
}

/// Down-samples every class above `cap` to exactly `cap` objects, uniformly
/// without replacement. Relative order is preserved; smaller classes are
/// untouched.
pub fn cap_per_class(
    objects: Vec<BimObject>,
    cap: usize,
    seed: u64,
) -> Result<Vec<BimObject>, DatasetError> {
    if cap == 0 {
        return Err(DatasetError::InvalidCap);
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ClassLabel::COUNT];
    for (i, o) in objects.iter().enumerate() {
        by_class[o.label.code()].push(i);
    }
    let mut keep = vec![true; objects.len()];
    for label in ClassLabel::ALL {
        let members = &by_class[label.code()];
        if members.len() <= cap {
            continue;
        }
        let mut rng = class_rng(seed, label, "cap");
        let chosen: BTreeSet<usize> = rand::seq::index::sample(&mut rng, members.len(), cap)
            .into_iter()
            .collect();
        for (pos, &i) in members.iter().enumerate() {
            keep[i] = chosen.contains(&pos);
        }
    }
    Ok(objects
        .into_iter()
        .zip(keep)
        .filter_map(|(o, k)| k.then_some(o))
        .collect())
}

/// Number of training objects for a class of `n`: `floor(fraction · n)`.
pub fn train_count(n: usize, fraction: f64) -> usize {
    // The epsilon absorbs representation error such as 0.7 · 10 = 7.000…01 or 6.999…9.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Stratified split: each class is shuffled with its own seeded stream and
/// the first `floor(fraction · n)` members go to train.
pub fn split(
    objects: Vec<BimObject>,
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(train_fraction));
    }
    let mut seen = BTreeSet::new();
    for o in &objects {
        if !seen.insert(o.uid.clone()) {
            return Err(DatasetError::DuplicateUid(o.uid.clone()));
        }
    }

    let mut by_class: Vec<Vec<BimObject>> = vec![Vec::new(); ClassLabel::COUNT];
    for o in objects {
        by_class[o.label.code()].push(o);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in ClassLabel::ALL {
        let mut members = std::mem::take(&mut by_class[label.code()]);
        members.shuffle(&mut class_rng(seed, label, "split"));
        let n_train = train_count(members.len(), train_fraction);
        let rest = members.split_off(n_train);
        train.extend(members);
        test.extend(rest);
    }
    Ok(DatasetSplit { train, test, seed })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn dummy(uid: &str, label: ClassLabel) -> BimObject {
        BimObject {
            uid: uid.to_string(),
            label,
            cloud: PointCloud {
                points: vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
            },
            relation: RelationCountVector::default(),
        }
    }

    fn population(sizes: &[(ClassLabel, usize)]) -> Vec<BimObject> {
        let mut out = Vec::new();
        for &(label, n) in sizes {
            for i in 0..n {
                out.push(dummy(&format!("{}-{i}", label.name()), label));
            }
        }
        out
    }

    #[test]
    fn capping() {
        let objs = population(&[(ClassLabel::IfcWall, 2500), (ClassLabel::IfcBeam, 93)]);
        let capped = cap_per_class(objs, DEFAULT_CAP, 3).unwrap();
        let walls = capped.iter().filter(|o| o.label == ClassLabel::IfcWall).count();
        let beams = capped.iter().filter(|o| o.label == ClassLabel::IfcBeam).count();
        assert_eq!((walls, beams), (2000, 93));
        let twice = cap_per_class(capped.clone(), DEFAULT_CAP, 3).unwrap();
        assert_eq!(twice, capped);
        assert_eq!(cap_per_class(Vec::new(), 0, 0), Err(DatasetError::InvalidCap));
    }

    #[test]
    fn capping_depends_on_seed_only() {
        let objs = population(&[(ClassLabel::IfcSlab, 50)]);
        let a = cap_per_class(objs.clone(), 10, 1).unwrap();
        assert_eq!(a, cap_per_class(objs.clone(), 10, 1).unwrap());
        assert_ne!(a, cap_per_class(objs, 10, 2).unwrap());
    }

    #[test]
    fn door_split_floors() {
        let s = split(population(&[(ClassLabel::IfcDoor, 1341)]), 0.7, 9).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (938, 403));
        s.check_stratification(0.7).unwrap();
    }

    #[test]
    fn ten_objects() {
        let s = split(population(&[(ClassLabel::IfcBeam, 10)]), 0.7, 0).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (7, 3));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let objs = population(&[(ClassLabel::IfcDoor, 40), (ClassLabel::IfcWindow, 17)]);
        let a = split(objs.clone(), 0.7, 5).unwrap();
        assert_eq!(a, split(objs.clone(), 0.7, 5).unwrap());
        assert!(a.uids_unique());
        assert_eq!(a.len(), 57);
        assert_ne!(a.train, split(objs, 0.7, 6).unwrap().train);
    }

    #[test]
    fn split_errors_and_warnings() {
        assert_eq!(split(Vec::new(), 1.0, 0), Err(DatasetError::InvalidFraction(1.0)));
        let dup = vec![dummy("a", ClassLabel::IfcBeam), dummy("a", ClassLabel::IfcWall)];
        assert_eq!(split(dup, 0.7, 0), Err(DatasetError::DuplicateUid("a".into())));
        let s = split(population(&[(ClassLabel::IfcBeam, 3)]), 0.7, 0).unwrap();
        assert_eq!(s.empty_classes().len(), 10);
    }

    #[test]
    fn stratification_accepts_ceil() {
        // 939/402 for 1341 doors uses ceil rounding; also valid.
        let mut s = split(population(&[(ClassLabel::IfcDoor, 1341)]), 0.7, 1).unwrap();
        let moved = s.test.pop().unwrap();
        s.train.push(moved);
        assert_eq!(s.train.len(), 939);
        s.check_stratification(0.7).unwrap();
        let moved = s.test.pop().unwrap();
        s.train.push(moved);
        assert!(s.check_stratification(0.7).is_err());
    }
}
