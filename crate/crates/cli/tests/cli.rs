use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn magstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magstab")).args(args).output().unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("magstab-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn corpus_file(dir: &Path, name: &str) -> PathBuf {
    let out = magstab(&["corpus", "show", name]);
    assert_eq!(out.status.code(), Some(0));
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, out.stdout).unwrap();
    path
}

#[test]
fn corpus_listing_is_json() {
    let out = magstab(&["corpus", "list"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 8);
    assert_eq!(magstab(&["corpus", "show", "no-such-entry"]).status.code(), Some(2));
}

#[test]
fn certify_writes_shell_tables() {
    let dir = scratch("certify");
    let file = corpus_file(&dir, "stable-magnetic-plane");
    let out = magstab(&["certify", file.to_str().unwrap(), "--format", "csv", "--shells", "-6:-3", "--samples", "100"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("condition,delta,"));
    // Four shells for each of the two conditions.
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    let out = magstab(&["certify", file.to_str().unwrap(), "--out", dir.join("reports").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.join("reports/stable-magnetic-plane-certify.json").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = scratch("codes");
    let broken = dir.join("broken.json");
    std::fs::write(&broken, r#"{"dimension": 3, "potential": "x1 +", "f": "x1", "center": [0, 0, 0]}"#).unwrap();
    assert_eq!(magstab(&["certify", broken.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(magstab(&["certify", "/nonexistent/problem.json"]).status.code(), Some(2));
    assert_eq!(magstab(&["certify", broken.to_str().unwrap(), "--shells", "3:1"]).status.code(), Some(2));

    let plane = corpus_file(&dir, "mechanical-plane");
    let text = std::fs::read_to_string(&plane).unwrap().replace("\"unstable\"", "\"stable\"");
    let mislabeled = dir.join("mislabeled.json");
    std::fs::write(&mislabeled, text).unwrap();
    assert_eq!(magstab(&["escape", plane.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(magstab(&["escape", mislabeled.to_str().unwrap()]).status.code(), Some(1));

    // U = x3² − x1³ turns negative along the escape direction.
    let negative = dir.join("negative.json");
    std::fs::write(&negative, r#"{"dimension": 3, "metric": "euclidean", "potential": "x3^2 - x1^3", "f": "x1", "center": [0, 0, 0], "T": 1}"#).unwrap();
    let out = magstab(&["sweep", negative.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_and_chart_commands() {
    let dir = scratch("sweep");
    let file = corpus_file(&dir, "corollary1-demo");
    let out = magstab(&["sweep", file.to_str().unwrap(), "--eps", "0.1,0.05", "--T", "0.25", "--format", "csv", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("corollary1-demo-eps5e-2.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("tau,"));
    for multi in [false, true] {
        let mut args = vec!["chart", file.to_str().unwrap()];
        if multi {
            args.push("--multi");
        }
        let out = magstab(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["pass"], true);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
