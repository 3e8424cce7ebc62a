//! Relationship-count vectors: how often an object is quoted in each of six
//! monitored relationship attributes.

use std::collections::BTreeMap;
use std::fmt;

use crate::step::{AttributeValue, EntityInstance, StepModel};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RelationError {
    #[error("relationship #{0} has fewer attributes than the monitored slot")]
    AttributeArityError(u64),
    #[error("relationship #{0} holds a non-reference value in a monitored slot")]
    NonReferenceSlot(u64),
    #[error("object #{0} is not in the model")]
    UnknownObjectId(u64),
}

/// The six monitored attribute slots, in vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationshipKind {
    ConnectsRelating,
    ConnectsRelated,
    AggregatesRelating,
    AggregatesRelated,
    VoidsRelating,
    FillsRelated,
}

impl RelationshipKind {
    pub const ALL: [RelationshipKind; 6] = [
        RelationshipKind::ConnectsRelating,
        RelationshipKind::ConnectsRelated,
        RelationshipKind::AggregatesRelating,
        RelationshipKind::AggregatesRelated,
        RelationshipKind::VoidsRelating,
        RelationshipKind::FillsRelated,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `Entity.Attribute` name of the slot.
    pub fn attribute_name(self) -> &'static str {
        match self {
            RelationshipKind::ConnectsRelating => "IfcRelConnectsElements.RelatingElement",
            RelationshipKind::ConnectsRelated => "IfcRelConnectsElements.RelatedElement",
            RelationshipKind::AggregatesRelating => "IfcRelAggregates.RelatingObject",
            RelationshipKind::AggregatesRelated => "IfcRelAggregates.RelatedObjects",
            RelationshipKind::VoidsRelating => "IfcRelVoidsElement.RelatingBuildingElement",
            RelationshipKind::FillsRelated => "IfcRelFillsElement.RelatedBuildingElement",
        }
    }
}

/// Per-object counts indexed by [`RelationshipKind::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct RelationCountVector(pub [u32; 6]);

impl RelationCountVector {
    pub fn get(&self, kind: RelationshipKind) -> u32 {
        self.0[kind.index()]
    }

    pub fn counts(&self) -> &[u32; 6] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl fmt::Display for RelationCountVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.0;
        write!(f, "[{},{},{},{},{},{}]", c[0], c[1], c[2], c[3], c[4], c[5])
    }
}

/// One monitored slot of one relationship instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationshipRecord {
    /// Id of the relationship instance the slot belongs to.
    pub relationship: u64,
    pub kind: RelationshipKind,
    /// Referenced ids; list-valued slots contribute every member.
    pub subjects: Vec<u64>,
}

/// Which entity names feed the connects slots.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtractorConfig {
    /// Extra entity names treated as `IfcRelConnectsElements`
    /// (e.g. `IFCRELCONNECTSPATHELEMENTS`). Empty by default.
    pub connects_subtypes: Vec<String>,
}

// 0-based attribute positions, identical in IFC2x3 and IFC4.
const CONNECTS_SLOTS: &[(usize, RelationshipKind)] = &[
    (5, RelationshipKind::ConnectsRelating),
    (6, RelationshipKind::ConnectsRelated),
];
const AGGREGATES_SLOTS: &[(usize, RelationshipKind)] = &[
    (4, RelationshipKind::AggregatesRelating),
    (5, RelationshipKind::AggregatesRelated),
];
const VOIDS_SLOTS: &[(usize, RelationshipKind)] = &[(4, RelationshipKind::VoidsRelating)];
const FILLS_SLOTS: &[(usize, RelationshipKind)] = &[(5, RelationshipKind::FillsRelated)];

fn monitored_slots(
    inst: &EntityInstance,
    config: &ExtractorConfig,
) -> Option<&'static [(usize, RelationshipKind)]> {
    let name = inst.type_name.as_str();
    let is = |n: &str| name.eq_ignore_ascii_case(n);
    if is("IFCRELCONNECTSELEMENTS")
        || is("IFCRELCONNECTSELEMENT")
        || config.connects_subtypes.iter().any(|s| is(s))
    {
        Some(CONNECTS_SLOTS)
    } else if is("IFCRELAGGREGATES") {
        Some(AGGREGATES_SLOTS)
    } else if is("IFCRELVOIDSELEMENT") {
        Some(VOIDS_SLOTS)
    } else if is("IFCRELFILLSELEMENT") {
        Some(FILLS_SLOTS)
    } else {
        None
    }
}

fn slot_subjects(inst: &EntityInstance, slot: usize) -> Result<Vec<u64>, RelationError> {
    let value = inst
        .attribute(slot)
        .ok_or(RelationError::AttributeArityError(inst.id))?;
    match value {
        AttributeValue::Null => Ok(Vec::new()),
        AttributeValue::Reference(id) => Ok(vec![*id]),
        AttributeValue::List(items) => items
            .iter()
            .map(|item| item.as_reference().ok_or(RelationError::NonReferenceSlot(inst.id)))
            .collect(),
        _ => Err(RelationError::NonReferenceSlot(inst.id)),
    }
}

/// Scans the four relationship entity types with the default configuration.
pub fn extract_relationship_records(
    model: &StepModel,
) -> Result<Vec<RelationshipRecord>, RelationError> {
    extract_relationship_records_with(model, &ExtractorConfig::default())
}

/// Emits one record per monitored slot of every relationship instance,
/// ascending by relationship id and then slot order.
pub fn extract_relationship_records_with(
    model: &StepModel,
    config: &ExtractorConfig,
) -> Result<Vec<RelationshipRecord>, RelationError> {
    let mut records = Vec::new();
    for inst in model.instances() {
        let Some(slots) = monitored_slots(inst, config) else {
            continue;
        };
        for &(slot, kind) in slots {
            records.push(RelationshipRecord {
                relationship: inst.id,
                kind,
                subjects: slot_subjects(inst, slot)?,
            });
        }
    }
    Ok(records)
}

/// Counts the occurrences of `object_id` per slot kind.
pub fn count_vector_for(object_id: u64, records: &[RelationshipRecord]) -> RelationCountVector {
    let mut counts = [0u32; 6];
    for record in records {
        let hits = record.subjects.iter().filter(|&&s| s == object_id).count() as u32;
        counts[record.kind.index()] += hits;
    }
    RelationCountVector(counts)
}

/// Vectors for every requested object, from a single pass over the records.
pub fn build_vectors(
    model: &StepModel,
    object_ids: &[u64],
) -> Result<BTreeMap<u64, RelationCountVector>, RelationError> {
    build_vectors_with(model, object_ids, &ExtractorConfig::default())
}

pub fn build_vectors_with(
    model: &StepModel,
    object_ids: &[u64],
    config: &ExtractorConfig,
) -> Result<BTreeMap<u64, RelationCountVector>, RelationError> {
    let mut vectors = BTreeMap::new();
    for &id in object_ids {
        if model.get(id).is_none() {
            return Err(RelationError::UnknownObjectId(id));
        }
        vectors.insert(id, RelationCountVector::default());
    }
    for record in extract_relationship_records_with(model, config)? {
        for subject in &record.subjects {
            if let Some(vector) = vectors.get_mut(subject) {
                vector.0[record.kind.index()] += 1;
            }
        }
    }
    Ok(vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::step::parse;

    fn model(body: &str) -> StepModel {
        parse(&format!("DATA;\n{body}\nENDSEC;")).unwrap()
    }

    #[test]
    fn voids_record() {
        let m = model("#8=IFCRELVOIDSELEMENT('g',$,$,$,#3,#4);");
        let recs = extract_relationship_records(&m).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].kind, RelationshipKind::VoidsRelating);
        assert_eq!(recs[0].subjects, vec![3]);
    }

    #[test]
    fn aggregates_record() {
        let m = model("#9=IFCRELAGGREGATES('g',$,$,$,#1,(#2,#3));");
        let recs = extract_relationship_records(&m).unwrap();
        let pairs: Vec<_> = recs.iter().map(|r| (r.kind, r.subjects.clone())).collect();
        assert_eq!(
            pairs,
            vec![
                (RelationshipKind::AggregatesRelating, vec![1]),
                (RelationshipKind::AggregatesRelated, vec![2, 3]),
            ]
        );
    }

    #[test]
    fn no_relationships() {
        let m = model("#1=IFCWALL('a');");
        assert!(extract_relationship_records(&m).unwrap().is_empty());
    }

    #[test]
    fn single_quotes() {
        let m = model(
            "#3=IFCWALL('w');#4=IFCOPENINGELEMENT('o');#5=IFCDOOR('d');\
             #8=IFCRELVOIDSELEMENT('g',$,$,$,#3,#4);#9=IFCRELFILLSELEMENT('g',$,$,$,#4,#5);",
        );
        let recs = extract_relationship_records(&m).unwrap();
        assert_eq!(count_vector_for(3, &recs).0, [0, 0, 0, 0, 1, 0]);
        assert_eq!(count_vector_for(5, &recs).0, [0, 0, 0, 0, 0, 1]);
        assert_eq!(count_vector_for(42, &recs).0, [0; 6]);
    }

    #[test]
    fn build_for_aggregate() {
        let m = model("#1=A();#2=B();#3=C();#7=IFCRELAGGREGATES('g',$,$,$,#1,(#2,#3));");
        let v = build_vectors(&m, &[1, 2, 3]).unwrap();
        assert_eq!(v[&1].0, [0, 0, 1, 0, 0, 0]);
        assert_eq!(v[&2].0, [0, 0, 0, 1, 0, 0]);
        assert_eq!(v[&3].0, [0, 0, 0, 1, 0, 0]);
        assert_eq!(build_vectors(&m, &[1, 2, 3]).unwrap(), v);
        assert_eq!(
            build_vectors(&m, &[1, 99]),
            Err(RelationError::UnknownObjectId(99))
        );
    }

    #[test]
    fn connects_both_spellings_and_subtypes() {
        let m = model(
            "#1=A();#2=B();\
             #5=IFCRELCONNECTSELEMENTS('g',$,$,$,$,#1,#2);\
             #6=IFCRELCONNECTSELEMENT('g',$,$,$,$,#1,#2);\
             #7=IFCRELCONNECTSPATHELEMENTS('g',$,$,$,$,#1,#2,(),(),.ATSTART.,.ATEND.);",
        );
        let v = build_vectors(&m, &[1, 2]).unwrap();
        assert_eq!(v[&1].0, [2, 0, 0, 0, 0, 0]);
        assert_eq!(v[&2].0, [0, 2, 0, 0, 0, 0]);

        let config = ExtractorConfig {
            connects_subtypes: vec!["IFCRELCONNECTSPATHELEMENTS".into()],
        };
        let v = build_vectors_with(&m, &[1, 2], &config).unwrap();
        assert_eq!(v[&1].0, [3, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn null_slot_counts_nothing() {
        let m = model("#1=A();#9=IFCRELAGGREGATES('g',$,$,$,$,(#1));");
        let v = build_vectors(&m, &[1]).unwrap();
        assert_eq!(v[&1].0, [0, 0, 0, 1, 0, 0]);
    }

    #[test]
    fn slot_errors() {
        let m = model("#9=IFCRELVOIDSELEMENT('g',$,$,$);");
        assert_eq!(
            extract_relationship_records(&m),
            Err(RelationError::AttributeArityError(9))
        );
        let m = model("#9=IFCRELVOIDSELEMENT('g',$,$,$,'oops',#2);");
        assert_eq!(
            extract_relationship_records(&m),
            Err(RelationError::NonReferenceSlot(9))
        );
        let m = model("#9=IFCRELAGGREGATES('g',$,$,$,#1,(#2,3));");
        assert_eq!(
            extract_relationship_records(&m),
            Err(RelationError::NonReferenceSlot(9))
        );
    }
}
