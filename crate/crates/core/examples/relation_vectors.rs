//! Count how often each object appears in the monitored relationship slots.

use ifc_grl::dataset::ClassLabel;
use ifc_grl::relations::{build_vectors, extract_relationship_records, RelationshipKind};
use ifc_grl::step::parse;

const MODEL: &str = "DATA;
#1=IFCBUILDINGSTOREY('s',$,$,$,$,$,$,$,$);
#10=IFCWALL('w',$,$,$,$,$,$,$);
#11=IFCDOOR('d',$,$,$,$,$,$,$);
#12=IFCCOLUMN('c',$,$,$,$,$,$,$);
#13=IFCBEAM('b',$,$,$,$,$,$,$);
#20=IFCOPENINGELEMENT('o',$,$,$,$,$,$,$);
#30=IFCRELAGGREGATES('a',$,$,$,#1,(#10,#11,#12,#13));
#31=IFCRELVOIDSELEMENT('v',$,$,$,#10,#20);
#32=IFCRELFILLSELEMENT('f',$,$,$,#20,#11);
#33=IFCRELCONNECTSELEMENTS('x',$,$,$,$,#12,#13);
ENDSEC;";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = parse(MODEL)?;
    for record in extract_relationship_records(&model)? {
        println!("#{} {:<20} {:?}", record.relationship, record.kind.attribute_name(), record.subjects);
    }

    let ids: Vec<u64> = model.instances().map(|i| i.id).filter(|id| *id < 30).collect();
    let vectors = build_vectors(&model, &ids)?;
    println!("\nslots: {:?}", RelationshipKind::ALL.map(|k| k.attribute_name()));
    for id in ids {
        let ty = &model.get(id).unwrap().type_name;
        let label = ClassLabel::from_ifc_type(ty).map_or("-", ClassLabel::name);
        println!("#{:<5}{:<22}{:?}", id, label, vectors[&id].counts());
    }
    Ok(())
}
