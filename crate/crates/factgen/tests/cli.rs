//! Exit-code contract of the binary: 0 success, 2 config error, 3 stage
//! failure.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_factgen"))
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .arg("--config")
        .arg(dir.path().join("nope.toml"))
        .arg("ingest")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("factgen.toml");
    std::fs::write(&path, "schema_version = 999\noutput_root = \"x\"\n").unwrap();
    let status = bin()
        .arg("--config")
        .arg(&path)
        .arg("ingest")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn stage_without_inputs_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("factgen.toml");
    let root = dir.path().join("out");
    std::fs::write(
        &path,
        format!(
            "schema_version = 1\noutput_root = \"{root}\"\n\
             corpus_manifest = \"{root}/corpus/manifest.json\"\n\
             mode = \"both\"\nscales = [1, 5, 10]\nbackend = \"mock\"\n",
            root = root.display()
        ),
    )
    .unwrap();
    // synth before ingest: the corpus manifest does not exist yet
    let status = bin()
        .arg("--config")
        .arg(&path)
        .arg("synth")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn ingest_succeeds_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("factgen.toml");
    let root = dir.path().join("out");
    std::fs::write(
        &path,
        format!(
            "schema_version = 1\noutput_root = \"{root}\"\n\
             corpus_manifest = \"{root}/corpus/manifest.json\"\n\
             mode = \"both\"\nscales = [1, 5, 10]\nbackend = \"mock\"\n",
            root = root.display()
        ),
    )
    .unwrap();
    let status = bin()
        .arg("--config")
        .arg(&path)
        .arg("ingest")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(root.join("corpus/manifest.json").exists());
}
