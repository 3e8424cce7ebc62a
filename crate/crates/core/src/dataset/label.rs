use std::fmt;

/// The eleven object types, with integer codes 0..=10 in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    IfcBeam,
    IfcColumn,
    IfcDoor,
    IfcFlowFitting,
    IfcFlowSegment,
    IfcFlowTerminal,
    IfcPlate,
    IfcRailing,
    IfcSlab,
    IfcWall,
    IfcWindow,
}

impl ClassLabel {
    pub const COUNT: usize = 11;

    pub const ALL: [ClassLabel; 11] = [
        ClassLabel::IfcBeam,
        ClassLabel::IfcColumn,
        ClassLabel::IfcDoor,
        ClassLabel::IfcFlowFitting,
        ClassLabel::IfcFlowSegment,
        ClassLabel::IfcFlowTerminal,
        ClassLabel::IfcPlate,
        ClassLabel::IfcRailing,
        ClassLabel::IfcSlab,
        ClassLabel::IfcWall,
        ClassLabel::IfcWindow,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::IfcBeam => "IfcBeam",
            ClassLabel::IfcColumn => "IfcColumn",
            ClassLabel::IfcDoor => "IfcDoor",
            ClassLabel::IfcFlowFitting => "IfcFlowFitting",
            ClassLabel::IfcFlowSegment => "IfcFlowSegment",
            ClassLabel::IfcFlowTerminal => "IfcFlowTerminal",
            ClassLabel::IfcPlate => "IfcPlate",
            ClassLabel::IfcRailing => "IfcRailing",
            ClassLabel::IfcSlab => "IfcSlab",
            ClassLabel::IfcWall => "IfcWall",
            ClassLabel::IfcWindow => "IfcWindow",
        }
    }

    /// Maps an IFC entity name to its class. Matching is case-insensitive and
    /// also accepts the `...StandardCase` entities that exporters emit for
    /// the same element kinds.
    pub fn from_ifc_type(type_name: &str) -> Option<Self> {
        let upper = type_name.to_ascii_uppercase();
        let base = upper.strip_suffix("STANDARDCASE").unwrap_or(&upper);
        Self::ALL
            .into_iter()
            .find(|label| label.name().eq_ignore_ascii_case(base))
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_table_order() {
        assert_eq!(ClassLabel::ALL.len(), 11);
        for (i, label) in ClassLabel::ALL.iter().enumerate() {
            assert_eq!(label.code(), i);
            assert_eq!(ClassLabel::from_code(i), Some(*label));
        }
        assert_eq!(ClassLabel::from_code(11), None);
        assert_eq!(ClassLabel::IfcWindow.code(), 10);
    }

    #[test]
    fn ifc_names() {
        assert_eq!(ClassLabel::from_ifc_type("IFCWALL"), Some(ClassLabel::IfcWall));
        assert_eq!(ClassLabel::from_ifc_type("IFCWALLSTANDARDCASE"), Some(ClassLabel::IfcWall));
        assert_eq!(ClassLabel::from_ifc_type("IfcFlowTerminal"), Some(ClassLabel::IfcFlowTerminal));
        assert_eq!(ClassLabel::from_ifc_type("IFCSPACE"), None);
        assert_eq!(ClassLabel::from_ifc_type("STANDARDCASE"), None);
    }
}
