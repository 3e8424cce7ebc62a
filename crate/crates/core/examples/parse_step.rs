//! Parse an exchange file, walk its instances and print them back in
//! canonical form.

use ifc_grl::step::{parse, AttributeValue};

const MODEL: &str = r#"ISO-10303-21;
HEADER;
FILE_DESCRIPTION(('example'),'2;1');
FILE_SCHEMA(('IFC2X3'));
ENDSEC;
DATA;
#1 = IFCBUILDINGSTOREY('s1', $, 'Ground floor', $, $, $, $, $, .ELEMENT., 0.);
#2=IFCWALL('w1',$,'Wall d''entr\X\E9e',$,$,$,$,$);
#3=IFCCARTESIANPOINTLIST3D(((0.,0.,0.),(1.5,0.,2.5E0)),$);
#4=IFCRELAGGREGATES('a1',$,$,$,#1,(#2,#7));
ENDSEC;
END-ISO-10303-21;
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = parse(MODEL)?;
    println!("{} instances", model.len());
    for inst in model.instances() {
        println!("  #{:<3} {:<26} {} attributes", inst.id, inst.type_name, inst.attributes.len());
    }

    let name = model.get(2).and_then(|w| w.attribute(2)).and_then(AttributeValue::as_text);
    println!("decoded wall name: {name:?}");
    println!("points nest {} levels deep", model.get(3).unwrap().attribute(0).unwrap().depth());
    println!("dangling references: {:?}", model.validate_references());
    println!("canonical: {}", model.get(1).unwrap().to_step());
    Ok(())
}
