use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{DatasetError, SourceModel};
use crate::geometry::load_obj;
use crate::step::parse;

fn io_error(path: &Path, e: std::io::Error) -> DatasetError {
    DatasetError::Io(format!("{}: {e}", path.display()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>, DatasetError> {
    let mut paths = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| io_error(dir, e)))
        .collect::<Result<Vec<_>, _>>()?;
    paths.sort();
    Ok(paths)
}

/// Corpus read from disk. Files that could not be used are listed in
/// `failures` instead of aborting the whole read.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub sources: Vec<SourceModel>,
    pub failures: Vec<(String, DatasetError)>,
}

/// Reads every `*.ifc` file of `ifc_dir` (sorted by name) together with the
/// meshes at `obj_dir/<file stem>/<instance id>.obj`. OBJ files whose stem is
/// not an integer are ignored.
pub fn read_corpus(ifc_dir: &Path, obj_dir: &Path) -> Result<Corpus, DatasetError> {
    let mut corpus = Corpus::default();
    for path in sorted_entries(ifc_dir)? {
        let is_ifc = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("ifc"));
        if !is_ifc {
            continue;
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let model = match fs::read(&path) {
            Ok(bytes) => match parse(&String::from_utf8_lossy(&bytes)) {
                Ok(model) => model,
                Err(e) => {
                    corpus.failures.push((name, e.into()));
                    continue;
                }
            },
            Err(e) => {
                corpus.failures.push((name, io_error(&path, e)));
                continue;
            }
        };

        let mut meshes = BTreeMap::new();
        let mesh_dir = obj_dir.join(&name);
        if mesh_dir.is_dir() {
            for obj in sorted_entries(&mesh_dir)? {
                let Some(id) = obj
                    .extension()
                    .filter(|e| e.eq_ignore_ascii_case("obj"))
                    .and_then(|_| obj.file_stem()?.to_str()?.parse::<u64>().ok())
                else {
                    continue;
                };
                let label = format!("{name}/{id}.obj");
                match fs::read_to_string(&obj).map_err(|e| io_error(&obj, e)) {
                    Ok(text) => match load_obj(&text) {
                        Ok(mesh) => {
                            meshes.insert(id, mesh);
                        }
                        Err(e) => corpus.failures.push((label, e.into())),
                    },
                    Err(e) => corpus.failures.push((label, e)),
                }
            }
        }
        corpus.sources.push(SourceModel { name, model, meshes });
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_models_meshes_and_reports_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let ifc = dir.path().join("ifc");
        let obj = dir.path().join("obj");
        fs::create_dir_all(obj.join("a")).unwrap();
        fs::create_dir_all(&ifc).unwrap();
        fs::write(ifc.join("a.ifc"), "DATA;\n#1=IFCWALL('w',$);\nENDSEC;\n").unwrap();
        fs::write(ifc.join("b.ifc"), "DATA;\n#1=IFCWALL('w',$;\nENDSEC;\n").unwrap();
        fs::write(ifc.join("notes.txt"), "ignored").unwrap();
        fs::write(obj.join("a/1.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        fs::write(obj.join("a/2.obj"), "f 1 2 3\n").unwrap();
        fs::write(obj.join("a/readme.obj"), "").unwrap();

        let corpus = read_corpus(&ifc, &obj).unwrap();
        assert_eq!(corpus.sources.len(), 1);
        assert_eq!(corpus.sources[0].name, "a");
        assert_eq!(corpus.sources[0].meshes.keys().copied().collect::<Vec<_>>(), vec![1]);
        let failed: Vec<&str> = corpus.failures.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(failed, vec!["a/2.obj", "b"]);
        assert!(read_corpus(&dir.path().join("missing"), &obj).is_err());
    }
}
