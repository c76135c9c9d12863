use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use scarbench_cli::run;
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn manifest() -> String {
    fixtures().join("manifest.json").display().to_string()
}

fn scarbench(args: &[&str]) -> i32 {
    run(std::iter::once("scarbench").chain(args.iter().copied()))
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

/// Everything except the run report, which records wall time.
fn outputs(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut t = read_tree(dir);
    t.remove(Path::new("run_report.json"));
    t
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("run_report.json")).unwrap()).unwrap()
}

/// Fixture manifest with entries rewritten by `edit` and file paths made
/// absolute, saved to `dir/manifest.json`.
fn edited_manifest(dir: &Path, edit: impl FnOnce(&mut Vec<Value>)) -> String {
    let text = fs::read_to_string(fixtures().join("manifest.json")).unwrap();
    let mut entries: Vec<Value> = serde_json::from_str(&text).unwrap();
    for e in &mut entries {
        for key in ["image", "mask", "pred", "scores"] {
            let rel = e[key].as_str().unwrap();
            e[key] = Value::String(fixtures().join(rel).display().to_string());
        }
    }
    edit(&mut entries);
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string(&entries).unwrap()).unwrap();
    path.display().to_string()
}

#[test]
fn evaluate_matches_golden_files() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    assert_eq!(
        scarbench(&["evaluate", "--manifest", &manifest(), "--out-dir", o]),
        0
    );
    for name in ["per_case.csv", "aggregate.csv"] {
        let golden = fs::read(fixtures().join("golden").join(name)).unwrap();
        assert_eq!(fs::read(out.path().join(name)).unwrap(), golden, "{name}");
    }
    let r = report(out.path());
    assert_eq!(r["subcommand"], "evaluate");
    assert_eq!(r["seed"], 0);
    assert_eq!(r["n_cases_processed"], 3);
    assert_eq!(r["n_cases_skipped"], 0);
    assert_eq!(r["warnings"][0]["case"], "B_p03_1");
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let spec = tempfile::NamedTempFile::new().unwrap();
    fs::write(
        spec.path(),
        r#"{"seed": 3, "steps": [{"kind": "gamma"}, {"kind": "rician"}, {"kind": "elastic"}, {"kind": "bbox_jitter"}]}"#,
    )
    .unwrap();
    let spec = spec.path().to_str().unwrap().to_owned();
    let commands: [&[&str]; 4] = [
        &["evaluate"],
        &["features", "--connectivity", "4"],
        &["loss", "--weights", "0.3,0.3,0.4"],
        &["augment", "--spec", &spec, "--resize", "48x40"],
    ];
    for cmd in commands {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for (dir, workers) in [(&a, "1"), (&b, "4")] {
            let mut args = cmd.to_vec();
            let o = dir.path().to_str().unwrap();
            let m = manifest();
            args.extend(["--manifest", &m, "--out-dir", o, "--workers", workers]);
            assert_eq!(scarbench(&args), 0, "{cmd:?}");
        }
        let (ta, tb) = (outputs(a.path()), outputs(b.path()));
        assert!(!ta.is_empty());
        assert_eq!(ta, tb, "{cmd:?}");
    }
}

#[test]
fn split_and_gradcheck_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = dir.path().to_str().unwrap();
        assert_eq!(
            scarbench(&[
                "split",
                "--manifest",
                &manifest(),
                "--out-dir",
                o,
                "--seed",
                "11"
            ]),
            0
        );
        assert_eq!(
            scarbench(&["gradcheck", "--seed", "7", "--trials", "3", "--out-dir", o]),
            0
        );
    }
    assert_eq!(outputs(a.path()), outputs(b.path()));
    let split: BTreeMap<String, String> =
        serde_json::from_slice(&fs::read(a.path().join("split.json")).unwrap()).unwrap();
    assert_eq!(split.len(), 3);
}

#[test]
fn inputs_are_left_untouched() {
    let before = read_tree(&fixtures());
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    let m = manifest();
    let case = |f: &str| fixtures().join("cases").join(f).display().to_string();
    assert_eq!(
        scarbench(&["evaluate", "--manifest", &m, "--out-dir", o]),
        0
    );
    assert_eq!(
        scarbench(&["features", "--manifest", &m, "--out-dir", o]),
        0
    );
    assert_eq!(scarbench(&["split", "--manifest", &m, "--out-dir", o]), 0);
    assert_eq!(scarbench(&["loss", "--manifest", &m, "--out-dir", o]), 0);
    let fwhm = [
        "fwhm",
        "--image",
        &case("A_p01_0_image.pgm"),
        "--myocardium",
        &case("A_p01_0_myocardium.pgm"),
        "--roi",
        &case("A_p01_0_roi.pgm"),
        "--out-dir",
        o,
    ];
    assert_eq!(scarbench(&fwhm), 0);
    assert_eq!(read_tree(&fixtures()), before);
}

#[test]
fn usage_errors_exit_2() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    assert_eq!(
        scarbench(&["evaluate", "--manifest", "missing.json", "--out-dir", o]),
        2
    );
    assert_eq!(scarbench(&["evaluate", "--manifest", &manifest()]), 2);
    assert_eq!(
        scarbench(&[
            "features",
            "--manifest",
            &manifest(),
            "--out-dir",
            o,
            "--connectivity",
            "6"
        ]),
        2
    );
    assert_eq!(
        scarbench(&[
            "loss",
            "--manifest",
            &manifest(),
            "--out-dir",
            o,
            "--weights",
            "1,-1,0"
        ]),
        2
    );
    assert_eq!(
        scarbench(&[
            "evaluate",
            "--manifest",
            &manifest(),
            "--out-dir",
            o,
            "--workers",
            "0"
        ]),
        2
    );
    assert_eq!(
        scarbench(&[
            "augment",
            "--manifest",
            &manifest(),
            "--out-dir",
            o,
            "--spec",
            "none.json"
        ]),
        2
    );
}

#[test]
fn manifest_validation_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("out").display().to_string();

    let dup = edited_manifest(dir.path(), |e| {
        let first = e[0].clone();
        e.push(first);
    });
    assert_eq!(
        scarbench(&["evaluate", "--manifest", &dup, "--out-dir", &o]),
        3
    );

    let bad_spacing = edited_manifest(dir.path(), |e| e[1]["spacing_x_mm"] = Value::from(-1.0));
    assert_eq!(
        scarbench(&["evaluate", "--manifest", &bad_spacing, "--out-dir", &o]),
        3
    );

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "[{\"patient_id\": ").unwrap();
    assert_eq!(
        scarbench(&[
            "evaluate",
            "--manifest",
            garbage.to_str().unwrap(),
            "--out-dir",
            &o
        ]),
        3
    );

    // split output is keyed by patient id alone
    let collision = edited_manifest(dir.path(), |e| e[2]["patient_id"] = Value::from("p01"));
    assert_eq!(
        scarbench(&["split", "--manifest", &collision, "--out-dir", &o]),
        3
    );
}

#[test]
fn unreadable_cases_are_skipped_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let m = edited_manifest(dir.path(), |e| {
        e[1]["pred"] = Value::from("/nonexistent/pred.pgm")
    });
    assert_eq!(
        scarbench(&[
            "evaluate",
            "--manifest",
            &m,
            "--out-dir",
            out.to_str().unwrap()
        ]),
        0
    );
    let csv = fs::read_to_string(out.join("per_case.csv")).unwrap();
    let row = csv.lines().nth(2).unwrap();
    assert!(
        row.starts_with("p02,A,3,,,,,skipped: file not found"),
        "{row}"
    );
    let r = report(&out);
    assert_eq!(r["n_cases_processed"], 2);
    assert_eq!(r["n_cases_skipped"], 1);
    assert_eq!(r["skipped"][0]["case"], "A_p02_3");
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(agg.lines().any(|l| l.starts_with("Total,2,")));
}

#[test]
fn all_cases_failing_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("out").display().to_string();
    let m = edited_manifest(dir.path(), |e| {
        for entry in e.iter_mut() {
            entry.as_object_mut().unwrap().remove("scores");
        }
    });
    assert_eq!(scarbench(&["loss", "--manifest", &m, "--out-dir", &o]), 4);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_scarbench");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let ok = status(&["gradcheck", "--seed", "7", "--trials", "20"]);
    assert_eq!(ok.status.code(), Some(0));
    let stdout = String::from_utf8(ok.stdout).unwrap();
    let last = stdout.lines().last().unwrap();
    let value: f64 = last
        .strip_prefix("max relative error: ")
        .and_then(|r| r.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(value <= 1e-4, "{last}");

    let missing = status(&[
        "evaluate",
        "--manifest",
        "missing.json",
        "--out-dir",
        "unused",
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8(missing.stderr)
        .unwrap()
        .contains("missing.json"));
}
