//! Read a corpus from disk, assemble labeled point clouds, cap, split and
//! save the result.

use ifc_grl::dataset::{assemble, cap_per_class, load, read_corpus, save, split, AssembleConfig, ClassLabel};
use ifc_grl::synthetic::{SyntheticConfig, SyntheticCorpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = tempfile::tempdir()?;
    let (ifc_dir, obj_dir) = SyntheticCorpus::generate(&SyntheticConfig { per_class: 40, seed: 1 }).write(work.path())?;

    let corpus = read_corpus(&ifc_dir, &obj_dir)?;
    let assembly = assemble(&corpus.sources, &AssembleConfig { points: 256, seed: 3, ..AssembleConfig::default() });
    println!(
        "{} objects, {} duplicates removed, {} unlabeled skipped, {} failures",
        assembly.objects.len(),
        assembly.duplicates_removed,
        assembly.skipped_unlabeled,
        assembly.failures.len() + corpus.failures.len()
    );

    let capped = cap_per_class(assembly.objects, 30, 3)?;
    let dataset = split(capped, 0.7, 3)?;
    dataset.check_stratification(0.7)?;
    for (label, (train, test)) in ClassLabel::ALL.iter().zip(dataset.class_counts()) {
        if train + test > 0 {
            println!("  {:<16} train {train:>3}  test {test:>3}", label.name());
        }
    }

    let out = work.path().join("dataset");
    save(&dataset, &out)?;
    assert_eq!(load(&out)?, dataset);
    println!("saved and reloaded {} objects", dataset.len());
    Ok(())
}
