//! A generated corpus in which shape alone cannot separate two class pairs.
//!
//! Doors and windows are drawn from one panel distribution, columns and flow
//! segments from one prism distribution. Relationships differ instead: doors
//! and columns fill an opening, windows and flow segments void one. Every
//! object is also aggregated into a storey and joined to an anchor element
//! a random number of times in each connects role.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{assemble, split, AssembleConfig, ClassLabel, DatasetError, DatasetSplit, SourceModel};
use crate::geometry::{write_obj, TriangleMesh};
use crate::relations::RelationCountVector;
use crate::step::{parse, StepError};

pub const SYNTHETIC_CLASSES: [ClassLabel; 4] = [
    ClassLabel::IfcDoor,
    ClassLabel::IfcWindow,
    ClassLabel::IfcColumn,
    ClassLabel::IfcFlowSegment,
];

/// Upper bound of the per-role connects count.
pub const MAX_CONNECTS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { per_class: 300, seed: 0 }
    }
}

/// Whether objects of `label` fill an opening (otherwise they void one).
pub fn fills_opening(label: ClassLabel) -> bool {
    matches!(label, ClassLabel::IfcDoor | ClassLabel::IfcColumn)
}

/// Relation vector the generator gives an object of `label` with the given
/// connects counts.
pub fn expected_vector(label: ClassLabel, relating: u32, related: u32) -> RelationCountVector {
    let fills = u32::from(fills_opening(label));
    RelationCountVector([relating, related, 0, 1, 1 - fills, fills])
}

fn shares_panel_shape(label: ClassLabel) -> bool {
    matches!(label, ClassLabel::IfcDoor | ClassLabel::IfcWindow)
}

fn random_mesh<R: Rng>(label: ClassLabel, rng: &mut R) -> TriangleMesh {
    if shares_panel_shape(label) {
        TriangleMesh::cuboid([
            rng.random_range(0.6..1.4),
            rng.random_range(1.9..2.3),
            rng.random_range(0.05..0.3),
        ])
    } else {
        let prism = TriangleMesh::prism(8, rng.random_range(0.1..0.4), rng.random_range(2.0..4.0));
        // Squashing the cross-section gives prisms as many shape degrees of
        // freedom as panels, so few of them are congruent up to scale.
        let squash = rng.random_range(0.4..1.0);
        prism.transformed(&[[1.0, 0.0, 0.0], [0.0, squash, 0.0], [0.0, 0.0, 1.0]], [0.0; 3])
    }
}

/// IFC text plus per-object meshes keyed by instance id.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub name: String,
    pub ifc: String,
    pub meshes: BTreeMap<u64, TriangleMesh>,
}

impl SyntheticCorpus {
    /// Objects are emitted round-robin over [`SYNTHETIC_CLASSES`].
    pub fn generate(config: &SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut data = String::new();
        let mut next = 10u64;
        let mut fresh = || {
            next += 1;
            next - 1
        };
        let _ = writeln!(data, "#1=IFCBUILDINGSTOREY('storey',$,'Level 1',$,$,$,$,$,$,$);");
        let _ = writeln!(data, "#2=IFCBUILDINGELEMENTPROXY('anchor',$,'Anchor',$,$,$,$,$);");

        let mut meshes = BTreeMap::new();
        let mut members = Vec::new();
        for i in 0..config.per_class {
            for label in SYNTHETIC_CLASSES {
                let id = fresh();
                let name = label.name();
                let entity = name.to_ascii_uppercase();
                let _ = writeln!(data, "#{id}={entity}('{name}-{i}',$,'{name} {i}',$,$,$,$,$);");
                meshes.insert(id, random_mesh(label, &mut rng));
                members.push(id);

                let opening = fresh();
                let _ = writeln!(data, "#{opening}=IFCOPENINGELEMENT('opening-{id}',$,$,$,$,$,$,$);");
                let rel = fresh();
                if fills_opening(label) {
                    let _ = writeln!(data, "#{rel}=IFCRELFILLSELEMENT('fills-{id}',$,$,$,#{opening},#{id});");
                } else {
                    let _ = writeln!(data, "#{rel}=IFCRELVOIDSELEMENT('voids-{id}',$,$,$,#{id},#{opening});");
                }
                let relating = rng.random_range(0..=MAX_CONNECTS);
                let related = rng.random_range(0..=MAX_CONNECTS);
                for k in 0..relating {
                    let rel = fresh();
                    let _ = writeln!(data, "#{rel}=IFCRELCONNECTSELEMENTS('a-{id}-{k}',$,$,$,$,#{id},#2);");
                }
                for k in 0..related {
                    let rel = fresh();
                    let _ = writeln!(data, "#{rel}=IFCRELCONNECTSELEMENTS('b-{id}-{k}',$,$,$,$,#2,#{id});");
                }
            }
        }
        let list: Vec<String> = members.iter().map(|id| format!("#{id}")).collect();
        let agg = fresh();
        let _ = writeln!(data, "#{agg}=IFCRELAGGREGATES('storey-contents',$,$,$,#1,({}));", list.join(","));

        let ifc = format!(
            "ISO-10303-21;\nHEADER;\nFILE_DESCRIPTION(('synthetic corpus'),'2;1');\n\
             FILE_NAME('synthetic.ifc','',(''),(''),'','','');\nFILE_SCHEMA(('IFC2X3'));\nENDSEC;\n\
             DATA;\n{data}ENDSEC;\nEND-ISO-10303-21;\n"
        );
        Self {
            name: "synthetic".to_string(),
            ifc,
            meshes,
        }
    }

    pub fn source(&self) -> Result<SourceModel, StepError> {
        Ok(SourceModel {
            name: self.name.clone(),
            model: parse(&self.ifc)?,
            meshes: self.meshes.clone(),
        })
    }

    /// Writes `root/ifc/<name>.ifc` and `root/obj/<name>/<id>.obj`; returns
    /// the IFC and OBJ directories.
    pub fn write(&self, root: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
        let ifc_dir = root.join("ifc");
        let obj_dir = root.join("obj");
        let mesh_dir = obj_dir.join(&self.name);
        fs::create_dir_all(&ifc_dir)?;
        fs::create_dir_all(&mesh_dir)?;
        fs::write(ifc_dir.join(format!("{}.ifc", self.name)), &self.ifc)?;
        for (id, mesh) in &self.meshes {
            fs::write(mesh_dir.join(format!("{id}.obj")), write_obj(mesh))?;
        }
        Ok((ifc_dir, obj_dir))
    }
}

/// Generates, assembles and splits the synthetic corpus in memory.
pub fn synthetic_split(
    config: &SyntheticConfig,
    points: usize,
    train_fraction: f64,
) -> Result<DatasetSplit, DatasetError> {
    let source = SyntheticCorpus::generate(config).source()?;
    let assembly = assemble(
        &[source],
        &AssembleConfig {
            points,
            seed: config.seed,
            ..AssembleConfig::default()
        },
    );
    if let Some((_, e)) = assembly.failures.into_iter().next() {
        return Err(e);
    }
    split(assembly.objects, train_fraction, config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_structure_and_vectors() {
        let config = SyntheticConfig { per_class: 12, seed: 3 };
        let corpus = SyntheticCorpus::generate(&config);
        assert_eq!(corpus.meshes.len(), 48);
        let source = corpus.source().unwrap();
        let assembly = assemble(&[source], &AssembleConfig { points: 16, ..AssembleConfig::default() });
        assert!(assembly.failures.is_empty());
        assert_eq!(assembly.duplicates_removed, 0);
        assert_eq!(assembly.objects.len(), 48);
        for o in &assembly.objects {
            let c = o.relation.0;
            assert!(c[0] <= MAX_CONNECTS && c[1] <= MAX_CONNECTS);
            assert_eq!(o.relation, expected_vector(o.label, c[0], c[1]), "{}", o.uid);
        }
        let labels: Vec<_> = assembly.objects.iter().take(4).map(|o| o.label).collect();
        assert_eq!(labels, SYNTHETIC_CLASSES.to_vec());
    }

    #[test]
    fn split_is_balanced_and_deterministic() {
        let config = SyntheticConfig { per_class: 20, seed: 1 };
        let a = synthetic_split(&config, 8, 0.7).unwrap();
        assert_eq!(a.train.len(), 56);
        assert_eq!(a.test.len(), 24);
        for label in SYNTHETIC_CLASSES {
            assert_eq!(a.class_counts()[label.code()], (14, 6));
        }
        assert_eq!(a, synthetic_split(&config, 8, 0.7).unwrap());
    }

    #[test]
    fn written_corpus_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = SyntheticCorpus::generate(&SyntheticConfig { per_class: 2, seed: 0 });
        let (ifc, obj) = corpus.write(dir.path()).unwrap();
        let read = crate::dataset::read_corpus(&ifc, &obj).unwrap();
        assert!(read.failures.is_empty());
        assert_eq!(read.sources[0].meshes, corpus.meshes);
        assert_eq!(read.sources[0].model, corpus.source().unwrap().model);
    }
}
