//! End-to-end checks of the binary: exit codes, emitted files, config
//! round-trip stability.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anisoflow"))
}

const CIRCLE_CONFIG: &str = r#"
[domain]
width = 1.0
height = 1.0

[numerics]
h = 0.05
dt = 1e-3
t_end = 2e-3

[case]
kind = "circle"
R = 0.25
center = [0.5, 0.5]

[model]
name = "constant"
params = [1.0]
variant = "iso"
mu = 1.0

[output]
dir = "out"
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_valid_config_exits_zero_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", CIRCLE_CONFIG);
    let out = dir.path().join("results");
    let status = bin()
        .args(["run", "--config"])
        .arg(&config)
        .env("ANISOFLOW_OUT", &out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("run.csv").exists());
    assert!(out.join("contour_final.csv").exists());
    let text = std::fs::read_to_string(out.join("run.csv")).unwrap();
    assert!(text.lines().count() >= 4); // header comment + columns + 3 rows
}

#[test]
fn run_invalid_mesh_size_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CIRCLE_CONFIG.replace("h = 0.05", "h = -0.05");
    let config = write_config(dir.path(), "bad.toml", &bad);
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .env("ANISOFLOW_OUT", dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
}

#[test]
fn run_inadmissible_model_exits_three_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CIRCLE_CONFIG
        .replace("name = \"constant\"", "name = \"fourfold\"")
        .replace("params = [1.0]", "params = []")
        .replace("variant = \"iso\"", "variant = \"aniso\"")
        .replace("t_end = 2e-3", "t_end = 2e-4")
        .replace("dt = 1e-3", "dt = 1e-4");
    let config = write_config(dir.path(), "fourfold.toml", &bad);
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .env("ANISOFLOW_OUT", dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let forced = bin()
        .args(["run", "--force-inadmissible", "--config"])
        .arg(&config)
        .env("ANISOFLOW_OUT", dir.path().join("forced"))
        .status()
        .unwrap();
    assert_eq!(forced.code(), Some(0));
}

#[test]
fn check_model_exit_codes() {
    let ok = bin().args(["check-model", "sixfold377"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.contains("admissible=true"));

    let bad = bin().args(["check-model", "fourfold"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(3));
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.contains("admissible=false"));
    assert!(text.contains("-13"), "worst eigenvalue in {text}");

    let unknown = bin().args(["check-model", "nosuch"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    let constant = bin()
        .args(["check-model", "constant", "1.0"])
        .output()
        .unwrap();
    assert_eq!(constant.status.code(), Some(0));
}

#[test]
fn study_writes_per_run_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let base = r#"
[domain]
width = 1.0
height = 1.0

[numerics]
h = 0.05
dt = 2e-3
t_end = 6e-3

[case]
kind = "ellipse"
a0 = 0.25
r = 2.0
center = [0.5, 0.5]

[model]
name = "ellipse"
variant = "aniso"
mu = 1.0
"#;
    write_config(dir.path(), "base.toml", base);
    let study = r#"
[study]
axis = "meshSize"
values = [0.05, 0.04, 0.025]
base = "base.toml"
outputs = "sweep"
"#;
    let study_path = write_config(dir.path(), "study.toml", study);
    let output = bin()
        .args(["study", "--config"])
        .arg(&study_path)
        .env_remove("ANISOFLOW_OUT")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let sweep = dir.path().join("sweep");
    assert!(sweep.join("study.csv").exists());
    assert!(sweep.join("meshSize_0.05/run.csv").exists());
    assert!(sweep.join("meshSize_0.025/run.csv").exists());
    let text = std::fs::read_to_string(sweep.join("study.csv")).unwrap();
    assert!(text.contains("fit_slope"));
}

#[test]
fn study_rejects_too_few_values() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "base.toml", CIRCLE_CONFIG);
    let study = r#"
[study]
axis = "meshSize"
values = [0.05, 0.025]
base = "base.toml"
outputs = "sweep"
"#;
    let study_path = write_config(dir.path(), "study.toml", study);
    let output = bin().args(["study", "--config"]).arg(&study_path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn compare_emits_lambda_table() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = CIRCLE_CONFIG
        .replace("name = \"constant\"", "name = \"sixfold377\"")
        .replace("params = [1.0]", "params = []");
    let config = write_config(dir.path(), "cmp.toml", &config_text);
    let out = dir.path().join("cmp_out");
    let status = bin()
        .args(["compare", "--config"])
        .arg(&config)
        .env("ANISOFLOW_OUT", &out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("lambda_compare.csv").exists());
    assert!(out.join("iso/run.csv").exists());
    assert!(out.join("aniso/run.csv").exists());
    let text = std::fs::read_to_string(out.join("lambda_compare.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,lambda_iso,lambda_aniso");
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn export_vtk_writes_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", CIRCLE_CONFIG);
    let out = dir.path().join("initial.vtk");
    let status = bin()
        .args(["export-vtk", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("SCALARS phi"));
    assert!(text.contains("SCALARS gamma"));
    assert!(text.contains("TENSORS D"));
}

#[test]
fn config_roundtrip_is_identity() {
    let config: anisoflow::sim::SimConfig = toml::from_str(CIRCLE_CONFIG).unwrap();
    let serialized = toml::to_string(&config).unwrap();
    let reparsed: anisoflow::sim::SimConfig = toml::from_str(&serialized).unwrap();
    assert_eq!(config, reparsed);
}
