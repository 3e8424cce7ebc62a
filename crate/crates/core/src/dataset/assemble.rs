use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{object_seed, BimObject, ClassLabel, DatasetError};
use crate::geometry::{
    greedy_survivors, sample_point_cloud, shape_signature, TriangleMesh, DEDUP_TOLERANCE,
    DEFAULT_BINS, DEFAULT_POINTS,
};
use crate::relations::{build_vectors_with, ExtractorConfig, RelationCountVector, RelationError};
use crate::step::StepModel;

/// One parsed IFC file with the triangulated meshes of its objects, keyed by
/// instance id.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pub name: String,
    pub model: StepModel,
    pub meshes: BTreeMap<u64, TriangleMesh>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembleConfig {
    pub points: usize,
    pub seed: u64,
    pub signature_bins: usize,
    pub dedup_tolerance: f64,
    /// `false` keeps every object, duplicates included.
    pub deduplicate: bool,
    pub extractor: ExtractorConfig,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        Self {
            points: DEFAULT_POINTS,
            seed: 0,
            signature_bins: DEFAULT_BINS,
            dedup_tolerance: DEDUP_TOLERANCE,
            deduplicate: true,
            extractor: ExtractorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub objects: Vec<BimObject>,
    /// Meshes whose entity type is outside the label set.
    pub skipped_unlabeled: usize,
    pub duplicates_removed: usize,
    /// Files or objects that could not be processed; the rest of the corpus
    /// is unaffected.
    pub failures: Vec<(String, DatasetError)>,
}

struct Candidate {
    uid: String,
    label: ClassLabel,
    relation: RelationCountVector,
    mesh: TriangleMesh,
}

fn file_candidates(
    source: &SourceModel,
    extractor: &ExtractorConfig,
) -> Result<(Vec<Candidate>, usize), DatasetError> {
    let mut labeled = Vec::new();
    let mut skipped = 0;
    for (&id, mesh) in &source.meshes {
        let inst = source
            .model
            .get(id)
            .ok_or(RelationError::UnknownObjectId(id))?;
        match ClassLabel::from_ifc_type(&inst.type_name) {
            Some(label) => labeled.push((id, label, mesh)),
            None => skipped += 1,
        }
    }
    let ids: Vec<u64> = labeled.iter().map(|(id, ..)| *id).collect();
    let vectors = build_vectors_with(&source.model, &ids, extractor)?;
    let candidates = labeled
        .into_iter()
        .map(|(id, label, mesh)| Candidate {
            uid: format!("{}#{id}", source.name),
            label,
            relation: vectors[&id],
            mesh: mesh.clone(),
        })
        .collect();
    Ok((candidates, skipped))
}

/// Turns parsed models and their meshes into labeled objects.
///
/// Objects are labeled from their entity type, given relation vectors from
/// their own file, deduplicated by shape within each class (first occurrence
/// in file order then id order wins) and sampled into point clouds seeded by
/// `(seed, uid)`. A file that fails to process is reported and skipped.
pub fn assemble(sources: &[SourceModel], config: &AssembleConfig) -> Assembly {
    let per_file: Vec<_> = sources
        .par_iter()
        .map(|s| file_candidates(s, &config.extractor))
        .collect();

    let mut failures = Vec::new();
    let mut skipped_unlabeled = 0;
    let mut candidates = Vec::new();
    for (source, result) in sources.iter().zip(per_file) {
        match result {
            Ok((c, skipped)) => {
                candidates.extend(c);
                skipped_unlabeled += skipped;
            }
            Err(e) => failures.push((source.name.clone(), e)),
        }
    }

    let keep: Vec<bool> = if config.deduplicate {
        let signatures: Vec<_> = candidates
            .par_iter()
            .map(|c| shape_signature(&c.mesh, config.signature_bins).ok())
            .collect();
        let mut keep = vec![false; candidates.len()];
        for label in ClassLabel::ALL {
            let members: Vec<usize> = (0..candidates.len())
                .filter(|&i| candidates[i].label == label)
                .collect();
            let sigs: Vec<_> = members.iter().map(|&i| signatures[i].clone()).collect();
            for k in greedy_survivors(&sigs, config.dedup_tolerance) {
                keep[members[k]] = true;
            }
        }
        keep
    } else {
        vec![true; candidates.len()]
    };
    let duplicates_removed = keep.iter().filter(|k| !**k).count();

    let sampled: Vec<_> = candidates
        .into_par_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(c, _)| {
            let seed = object_seed(config.seed, &c.uid);
            let cloud = sample_point_cloud(&c.mesh, config.points, seed);
            (c, cloud)
        })
        .collect();

    let mut objects = Vec::with_capacity(sampled.len());
    for (c, cloud) in sampled {
        match cloud {
            Ok(cloud) => objects.push(BimObject {
                uid: c.uid,
                label: c.label,
                cloud,
                relation: c.relation,
            }),
            Err(e) => failures.push((c.uid, e.into())),
        }
    }
    Assembly {
        objects,
        skipped_unlabeled,
        duplicates_removed,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::step::parse;

    fn source(name: &str, body: &str, meshes: &[(u64, TriangleMesh)]) -> SourceModel {
        SourceModel {
            name: name.into(),
            model: parse(&format!("DATA;\n{body}\nENDSEC;")).unwrap(),
            meshes: meshes.iter().cloned().collect(),
        }
    }

    fn config() -> AssembleConfig {
        AssembleConfig {
            points: 16,
            seed: 4,
            ..AssembleConfig::default()
        }
    }

    const BODY: &str = "#1=IFCWALL('a',$,$,$,$,$,$,$);\n\
        #2=IFCDOOR('b',$,$,$,$,$,$,$);\n\
        #3=IFCWALL('c',$,$,$,$,$,$,$);\n\
        #4=IFCSPACE('d',$,$,$,$,$,$,$);\n\
        #9=IFCRELFILLSELEMENT('r',$,$,$,#7,#2);";

    #[test]
    fn labels_dedup_and_relations() {
        let panel = TriangleMesh::cuboid([1.0, 0.1, 2.0]);
        let src = source(
            "f",
            BODY,
            &[(1, panel.clone()), (2, panel.clone()), (3, panel.clone()), (4, panel)],
        );
        let a = assemble(&[src], &config());
        assert_eq!(a.skipped_unlabeled, 1);
        // The second wall duplicates the first; the door differs in label.
        assert_eq!(a.duplicates_removed, 1);
        let uids: Vec<_> = a.objects.iter().map(|o| o.uid.as_str()).collect();
        assert_eq!(uids, ["f#1", "f#2"]);
        assert_eq!(a.objects[1].relation.0, [0, 0, 0, 0, 0, 1]);
        assert_eq!(a.objects[0].cloud.len(), 16);
        assert!(a.failures.is_empty());
    }

    #[test]
    fn bad_file_is_isolated() {
        let good = source("good", BODY, &[(1, TriangleMesh::cuboid([1.0, 1.0, 1.0]))]);
        let bad = source("bad", BODY, &[(77, TriangleMesh::cuboid([1.0, 1.0, 1.0]))]);
        let a = assemble(&[bad, good], &config());
        assert_eq!(a.objects.len(), 1);
        assert_eq!(a.failures.len(), 1);
        assert_eq!(a.failures[0].0, "bad");
    }

    #[test]
    fn output_independent_of_thread_count() {
        let meshes: Vec<_> = (1..=3)
            .map(|id| (id, TriangleMesh::cuboid([id as f64, 1.0, 0.5])))
            .collect();
        let src = [source("f", BODY, &meshes)];
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let two = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let a = one.install(|| assemble(&src, &config()));
        let b = two.install(|| assemble(&src, &config()));
        assert_eq!(a, b);
    }
}
