use std::fs;
use std::path::{Path, PathBuf};

use ifc_grl::cli;
use ifc_grl::model::{arch_path, save_model, ArchConfig, GrModel};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(std::iter::once("ifc-grl").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn extract_writes_relation_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["extract", &fixture("toy.ifc"), &fixture("escapes.ifc"), "--out", s(dir.path())]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(dir.path().join(cli::RELATIONS_FILE)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(cli::RELATIONS_TAG));
    for expected in [
        "object #14 IFCSLAB [2,0,0,1,0,0]",
        "object #17 IFCRAILING [0,1,0,1,0,0]",
        "object #12 IFCDOOR [0,0,0,1,0,1]",
        "object #2 IFCWALL [1,0,0,1,1,0]",
        "dangling #7 -> #99",
    ] {
        assert!(text.lines().any(|l| l == expected), "missing {expected:?} in\n{text}");
    }
    assert_eq!(text.lines().filter(|l| l.starts_with("file ")).count(), 2);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let (code, out, err) = run(&["train", "--no-such-flag"]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("Usage"), "{err}");

    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["extract", "build-dataset", "train", "evaluate", "ablate", "report"] {
        assert!(out.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn missing_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    assert_eq!(run(&["extract", s(&missing.join("a.ifc")), "--out", s(dir.path())]).0, 1);
    assert_eq!(run(&["train", "--dataset", s(&missing), "--out", s(&dir.path().join("m.ckpt"))]).0, 1);
    assert_eq!(run(&["report", "--ckpt", s(&missing)]).0, 1);
}

#[test]
fn zero_epoch_training_saves_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus = root.join("corpus");
    let ds = root.join("ds");
    assert_eq!(run(&["synth", "--out", s(&corpus), "--per-class", "10", "--seed", "2"]).0, 0);
    let (code, _, err) = run(&[
        "build-dataset", "--ifc-dir", s(&corpus.join("ifc")), "--obj-dir", s(&corpus.join("obj")),
        "--out", s(&ds), "--points", "32",
    ]);
    assert_eq!(code, 0, "{err}");

    let trained: PathBuf = root.join("runs/full.ckpt");
    let (code, _, err) = run(&["train", "--dataset", s(&ds), "--epochs", "0", "--seed", "4", "--out", s(&trained)]);
    assert_eq!(code, 0, "{err}");
    let initial = root.join("init.ckpt");
    save_model(&GrModel::new(ArchConfig::default(), 4).unwrap(), &initial).unwrap();
    assert_eq!(fs::read(&trained).unwrap(), fs::read(&initial).unwrap());
    assert_eq!(fs::read(arch_path(&trained)).unwrap(), fs::read(arch_path(&initial)).unwrap());

    let (code, out, _) = run(&["report", "--ckpt", s(&trained), "--points", "1024"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l == "variant=full"), "{out}");

    assert_eq!(run(&["train", "--dataset", s(&ds), "--variant", "hybrid", "--out", s(&trained)]).0, 1);
}
