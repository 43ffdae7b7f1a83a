use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nmlsdr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmlsdr")).args(args).current_dir(cwd).output().unwrap()
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"alpha_labeled": 1.0}"#).unwrap();
    let out = nmlsdr(&["run", "--config", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha_labeled"));
    fs::write(dir.path().join("typo.toml"), "alpha_labelled = 0.5\n").unwrap();
    assert_eq!(nmlsdr(&["run", "--config", "typo.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(nmlsdr(&["eval", "--table", "x.csv", "--metric", "nope"], dir.path()).status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nmlsdr(&["run", "--config", "missing.json"], dir.path()).status.code(), Some(3));
    fs::write(dir.path().join("train.csv"), "1,2,0\n3,4,7\n").unwrap();
    fs::write(
        dir.path().join("run.json"),
        r#"{"datasets": [{"source": "files", "name": "f", "train": "train.csv", "test": "train.csv",
            "format": "csv", "label_count": 1}]}"#,
    )
    .unwrap();
    let out = nmlsdr(&["run", "--config", "run.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn numeric_failures_exit_with_4() {
    // RBF weights underflow to zero, leaving every node isolated.
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..30)
        .map(|i| format!("{},{},{}\n", i as f64 * 1e3, (i % 2) as f64, i % 2))
        .collect();
    fs::write(dir.path().join("d.csv"), rows).unwrap();
    fs::write(
        dir.path().join("run.json"),
        r#"{"graph": {"kind": "rbf", "sigma": 1e-3}, "mlknn_k": 3,
            "datasets": [{"source": "files", "name": "f", "train": "d.csv", "test": "d.csv",
            "format": "csv", "label_count": 1}]}"#,
    )
    .unwrap();
    let out = nmlsdr(&["run", "--config", "run.json"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_bundle_run_eval_compare() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(nmlsdr(&["synth", "--seed", "3", "--out", "bundle"], p).status.success());
    let manifest = fs::read_to_string(p.join("bundle/manifest.json")).unwrap();
    assert!(manifest.contains("\"n\": 6000") && manifest.contains("\"n\": 2000"));

    // Five small file-based datasets so that Wilcoxon totals are produced.
    let mut datasets = Vec::new();
    for s in 0..5 {
        let rows: String = (0..60)
            .map(|i| {
                let c = i % 2;
                let extra = u8::from(i % 3 == 0);
                let x0 = c as f64 * 4.0 + (i * 7 + s) as f64 % 5.0 / 10.0;
                let x1 = extra as f64 * 4.0 + (i * 3 % 11) as f64 / 11.0;
                format!("{x0},{x1},{s},{c},{extra}\n")
            })
            .collect();
        let name = format!("d{s}.csv");
        fs::write(p.join(&name), rows).unwrap();
        datasets.push(format!(
            r#"{{"source": "files", "name": "set{s}", "train": "{name}", "test": "{name}", "format": "csv", "label_count": 2}}"#
        ));
    }
    fs::write(
        p.join("grid.json"),
        format!(
            r#"{{"methods": ["nmlsdr", "mddmp", "pca"], "mlknn_k": 5, "graph": {{"k": 5}}, "eval": "supervised", "datasets": [{}]}}"#,
            datasets.join(",")
        ),
    )
    .unwrap();
    let out = nmlsdr(&["run", "--config", "grid.json", "--out", "res"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(p.join("res/results.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 15);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("res/summary.json")).unwrap()).unwrap();
    let totals: f64 = summary["wilcoxon"]["ap"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
    assert_eq!(totals, 3.0);

    let eval = nmlsdr(&["eval", "--table", "res/results.csv", "--metric", "ap"], p);
    assert!(eval.status.success());
    let text = String::from_utf8(eval.stdout).unwrap();
    assert!(text.starts_with("method,set0,set1,set2,set3,set4\n"));
    assert!(text.contains("# best values:"));

    let cmp = nmlsdr(&["compare", "--table", "res/results.csv"], p);
    assert!(cmp.status.success());
    let text = String::from_utf8(cmp.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 7 + 1);
    assert!(text.starts_with("metric,nmlsdr,mddmp,pca\n"));
}
