use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
}

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oslc-transport"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Every file under `dir`, relative path and contents, sorted by path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn passing_scenario_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario("sgn2d-reference");
    let o = cli(&["pairing", cfg.to_str().unwrap(), "--grid", "33"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(tmp.path().join("summary.json").exists());
}

#[test]
fn violated_tolerance_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = scenario("expansive-sgn");
    let o = cli(&["oslc-check", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL oslc"));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], serde_json::Value::Bool(false));
}

#[test]
fn bad_input_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&cli(&["demo", "nope"], tmp.path())), 2);
    let missing = tmp.path().join("missing.json");
    assert_eq!(code(&cli(&["run", missing.to_str().unwrap()], tmp.path())), 2);
    let broken = tmp.path().join("broken.json");
    fs::write(&broken, "{ \"name\": ").unwrap();
    assert_eq!(code(&cli(&["run", broken.to_str().unwrap()], tmp.path())), 2);
}

#[test]
fn empty_diagnostics_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_slice(&fs::read(scenario("sgn2d-reference")).unwrap()).unwrap();
    cfg["diagnostics"] = serde_json::json!([]);
    let path = tmp.path().join("empty.json");
    fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    let o = cli(
        &["run", path.to_str().unwrap(), "--grid", "17"],
        &tmp.path().join("out"),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = scenario("sgn2d-reference");
    let args = ["run", cfg.to_str().unwrap(), "--grid", "33", "--seed", "19"];
    let (oa, ob) = (cli(&args, a.path()), cli(&args, b.path()));
    assert_eq!(code(&oa), code(&ob));
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert!(sa.len() > 10);
    assert_eq!(
        sa.iter().map(|f| &f.0).collect::<Vec<_>>(),
        sb.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    for ((name, x), (_, y)) in sa.iter().zip(&sb) {
        assert!(x == y, "{} differs between runs", name.display());
    }
}

#[test]
fn demo_runs_the_reference_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["demo", "sgn2d", "--grid", "17"], tmp.path());
    assert!(matches!(code(&o), 0 | 1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("pairing.csv").exists());
}
