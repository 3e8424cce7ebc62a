//! Reading ISO 10303-21 ("STEP physical file") encodings of IFC models.
//!
//! Only the `DATA` section is interpreted. The header is kept as opaque text
//! and the parser carries no EXPRESS schema: entity names are compared
//! verbatim and subtypes are never expanded.

mod lexer;
mod parser;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

pub use lexer::{decode_escapes, encode_string, tokenize, Position, Spanned, Token};
pub use parser::{parse, parse_data_section, MAX_NESTING_DEPTH};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("unterminated string starting at {line}:{column}")]
    UnterminatedString { line: usize, column: usize },
    #[error("unterminated comment starting at {line}:{column}")]
    UnterminatedComment { line: usize, column: usize },
    #[error("invalid character {found:?} at {line}:{column}")]
    InvalidCharacter {
        found: char,
        line: usize,
        column: usize,
    },
    #[error("duplicate instance id #{0}")]
    DuplicateId(u64),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("no DATA section found")]
    MissingDataSection,
}

/// One attribute value of an entity instance.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    /// `$`
    Null,
    /// `*`
    Derived,
    Integer(i64),
    Real(f64),
    Text(String),
    /// `.NAME.`, stored without dots.
    Enum(String),
    /// `#id`
    Reference(u64),
    List(Vec<AttributeValue>),
    /// `IFCLABEL('x')` style typed parameter.
    Typed(String, Box<AttributeValue>),
}

impl AttributeValue {
    pub fn as_reference(&self) -> Option<u64> {
        match self {
            AttributeValue::Reference(id) => Some(*id),
            _ => None,
        }
    }

    /// Numeric value; integers are widened.
    pub fn as_real(&self) -> Option<f64> {
        match self {
            AttributeValue::Real(v) => Some(*v),
            AttributeValue::Integer(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttributeValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[AttributeValue]> {
        match self {
            AttributeValue::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, AttributeValue::Null)
    }

    /// Calls `f` for every reference reachable inside this value, in textual order.
    pub fn for_each_reference(&self, f: &mut impl FnMut(u64)) {
        match self {
            AttributeValue::Reference(id) => f(*id),
            AttributeValue::List(items) => items.iter().for_each(|v| v.for_each_reference(f)),
            AttributeValue::Typed(_, inner) => inner.for_each_reference(f),
            _ => {}
        }
    }

    /// Nesting depth of lists and typed values (scalars are depth 0).
    pub fn depth(&self) -> usize {
        match self {
            AttributeValue::List(items) => 1 + items.iter().map(|v| v.depth()).max().unwrap_or(0),
            AttributeValue::Typed(_, inner) => 1 + inner.depth(),
            _ => 0,
        }
    }

    fn write_step(&self, out: &mut String) {
        match self {
            AttributeValue::Null => out.push('$'),
            AttributeValue::Derived => out.push('*'),
            AttributeValue::Integer(v) => {
                let _ = write!(out, "{v}");
            }
            AttributeValue::Real(v) => out.push_str(&format_real(*v)),
            AttributeValue::Text(s) => out.push_str(&encode_string(s)),
            AttributeValue::Enum(e) => {
                let _ = write!(out, ".{e}.");
            }
            AttributeValue::Reference(id) => {
                let _ = write!(out, "#{id}");
            }
            AttributeValue::List(items) => {
                out.push('(');
                write_list(items, out);
                out.push(')');
            }
            AttributeValue::Typed(name, inner) => {
                out.push_str(name);
                out.push('(');
                inner.write_step(out);
                out.push(')');
            }
        }
    }
}

fn write_list(items: &[AttributeValue], out: &mut String) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        item.write_step(out);
    }
}

/// Shortest round-tripping real in STEP syntax (`1.5E0`, `1.E-5`).
fn format_real(v: f64) -> String {
    let s = format!("{v:E}");
    let (mantissa, exponent) = s.split_once('E').unwrap_or((&s, "0"));
    if mantissa.contains('.') {
        format!("{mantissa}E{exponent}")
    } else {
        format!("{mantissa}.E{exponent}")
    }
}

/// A `#id=TYPE(...)` record.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityInstance {
    pub id: u64,
    /// Type name as written (IFC exporters write uppercase).
    pub type_name: String,
    pub attributes: Vec<AttributeValue>,
}

impl EntityInstance {
    pub fn attribute(&self, index: usize) -> Option<&AttributeValue> {
        self.attributes.get(index)
    }

    pub fn is_type(&self, name: &str) -> bool {
        self.type_name.eq_ignore_ascii_case(name)
    }

    /// Canonical single-line encoding of the record.
    pub fn to_step(&self) -> String {
        let mut out = format!("#{}={}(", self.id, self.type_name);
        write_list(&self.attributes, &mut out);
        out.push_str(");");
        out
    }
}

impl fmt::Display for EntityInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_step())
    }
}

/// Id-indexed instance graph of one exchange file. Immutable once parsed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepModel {
    pub header: String,
    instances: BTreeMap<u64, EntityInstance>,
}

impl StepModel {
    pub fn new(header: String) -> Self {
        Self {
            header,
            instances: BTreeMap::new(),
        }
    }

    /// Inserts an instance, rejecting an id that is already present.
    pub fn insert(&mut self, instance: EntityInstance) -> Result<(), StepError> {
        use std::collections::btree_map::Entry;
        match self.instances.entry(instance.id) {
            Entry::Occupied(_) => Err(StepError::DuplicateId(instance.id)),
            Entry::Vacant(slot) => {
                slot.insert(instance);
                Ok(())
            }
        }
    }

    pub fn get(&self, id: u64) -> Option<&EntityInstance> {
        self.instances.get(&id)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// All instances, ascending by id.
    pub fn instances(&self) -> impl Iterator<Item = &EntityInstance> {
        self.instances.values()
    }

    /// Instances whose type name equals `type_name` (ASCII case-insensitive),
    /// ascending by id. Subtypes are not expanded.
    pub fn instances_of_type(&self, type_name: &str) -> Vec<&EntityInstance> {
        self.instances
            .values()
            .filter(|inst| inst.is_type(type_name))
            .collect()
    }

    /// Every `(referencing id, missing id)` pair, in id then textual order.
    pub fn validate_references(&self) -> Vec<(u64, u64)> {
        let mut dangling = Vec::new();
        for inst in self.instances.values() {
            for attr in &inst.attributes {
                attr.for_each_reference(&mut |target| {
                    if !self.instances.contains_key(&target) {
                        dangling.push((inst.id, target));
                    }
                });
            }
        }
        dangling
    }
}

/// Convenience wrapper around [`StepModel::instances_of_type`].
pub fn instances_of_type<'m>(model: &'m StepModel, type_name: &str) -> Vec<&'m EntityInstance> {
    model.instances_of_type(type_name)
}

/// Convenience wrapper around [`StepModel::validate_references`].
pub fn validate_references(model: &StepModel) -> Vec<(u64, u64)> {
    model.validate_references()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(data: &str) -> StepModel {
        parse(&format!("ISO-10303-21;\nHEADER;\nENDSEC;\nDATA;\n{data}\nENDSEC;\nEND-ISO-10303-21;\n")).unwrap()
    }

    #[test]
    fn type_lookup() {
        let m = model("#3=IFCWALL('a');#1=IFCWALL('b');#2=IFCDOOR('c');");
        let walls = m.instances_of_type("IFCWALL");
        assert_eq!(walls.iter().map(|w| w.id).collect::<Vec<_>>(), vec![1, 3]);
        assert!(m.instances_of_type("IFCBEAM").is_empty());
        let doors = instances_of_type(&m, "ifcdoor");
        assert_eq!(doors.len(), 1);
        assert_eq!(doors[0].id, 2);
    }

    #[test]
    fn no_subtype_expansion() {
        let m = model("#1=IFCWALL('a');");
        assert!(m.instances_of_type("IFCBUILDINGELEMENT").is_empty());
        assert!(m.instances_of_type("IFCWALLSTANDARDCASE").is_empty());
    }

    #[test]
    fn dangling_references() {
        assert_eq!(model("#1=A(#2);").validate_references(), vec![(1, 2)]);
        assert!(model("#1=A(#2);#2=B(#1);").validate_references().is_empty());
        assert_eq!(
            validate_references(&model("#1=A((#9,(#10)));")),
            vec![(1, 9), (1, 10)]
        );
    }

    #[test]
    fn canonical_form() {
        let m = model("#7=IFCX('It''s',1.,-2,.T.,$,*,(#1,(#2)),IFCLABEL('x'),1.5E-3);");
        assert_eq!(
            m.get(7).unwrap().to_step(),
            "#7=IFCX('It''s',1.E0,-2,.T.,$,*,(#1,(#2)),IFCLABEL('x'),1.5E-3);"
        );
    }

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(1.0), "1.E0");
        assert_eq!(format_real(-0.25), "-2.5E-1");
        assert_eq!(format_real(1e300), "1.E300");
    }
}
