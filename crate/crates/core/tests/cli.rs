use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tscond::cli::EvalOutput;

fn tscond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tscond")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tscond(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> (i32, String) {
    let out = tscond(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    let last = err.lines().last().unwrap_or("").to_string();
    (out.status.code().unwrap(), last)
}

/// Relative path -> bytes for every file below `root`.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&["gen", "--out", s(dir), "--n", "120", "--t", "10", "--f", "3", "--seed", "11", "--format", "csv"]);
    }
    let snap = snapshot(&a);
    assert!(snap.contains_key(Path::new("train/samples.csv")));
    assert!(snap.contains_key(Path::new("run.cfg")));
    assert_eq!(snap, snapshot(&b));
    let c = tmp.path().join("c");
    ok(&["gen", "--out", s(&c), "--n", "120", "--t", "10", "--f", "3", "--seed", "12", "--format", "csv"]);
    assert_ne!(snap, snapshot(&c));
}

#[test]
fn pipeline_compare_table_and_rerun_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name);
    ok(&["gen", "--out", s(&p("data")), "--n", "160", "--t", "8", "--f", "3", "--seed", "4"]);
    ok(&[
        "condense", "--data", s(&p("data")), "--out", s(&p("cond")), "--size", "20", "--iterations", "30",
        "--batch-size", "16", "--networks", "TCN-β,RNN-α", "--seed", "4",
    ]);
    let (data, cond_dir, eo, ec) = (p("data"), p("cond"), p("eo"), p("ec"));
    let common = ["--archs", "TCN-β,LSTM-β", "--repeats", "2", "--steps", "20", "--eval-interval", "2", "--seed", "4"];
    let mut orig = vec!["eval", "--data", s(&data), "--out", s(&eo)];
    orig.extend(common);
    ok(&orig);
    let mut cond = vec!["eval", "--data", s(&data), "--out", s(&ec), "--train", "condensed", "--condensed", s(&cond_dir)];
    cond.extend(common);
    ok(&cond);
    let table = ok(&["compare", "--original", s(&p("eo")), "--condensed", s(&p("ec")), "--out", s(&p("cmp"))]);
    let row = |label: &str| table.lines().find(|l| l.starts_with(label)).unwrap_or_else(|| panic!("no `{label}` row in\n{table}")).to_string();
    let o = row("Original (102)");
    let c = row("Condensed (20)");
    // AUC ± SD plus the two MB columns
    assert_eq!(o.split_whitespace().count(), 7, "{o}");
    assert_eq!(c.split_whitespace().count(), 7, "{c}");
    assert!(table.contains("MB (32-bit)") && table.contains("MB (64-bit)"));
    assert_eq!(fs::read_to_string(p("cmp").join("compare.txt")).unwrap(), table);

    let report: EvalOutput = serde_json::from_str(&fs::read_to_string(p("ec").join("report.json")).unwrap()).unwrap();
    assert_eq!(report.train_kind, "condensed");
    assert_eq!(report.report.train_samples, 20);
    assert_eq!(report.report.trials.len(), 4);
    assert_eq!(report.run_config["seed"], "4");
    assert!(p("ec").join("curves").join("LSTM-β_r1.csv").exists());

    // each run.cfg alone reproduces its outputs bitwise
    for (cmd, dir) in [("condense", "cond"), ("eval", "ec")] {
        let again = p(&format!("{dir}_again"));
        ok(&[cmd, "--config", s(&p(dir).join("run.cfg")), "--out", s(&again)]);
        assert_eq!(snapshot(&p(dir)), snapshot(&again), "{cmd}");
    }

    let diag = ok(&["diagnose", "--data", s(&p("data")), "--condensed", s(&cond_dir), "--out", s(&p("diag")), "--bins", "5"]);
    assert!(diag.contains("0 exact copies"), "{diag}");
    let hist = fs::read_to_string(p("diag").join("hist_c2o.csv")).unwrap();
    assert_eq!(hist.lines().count(), 6);
    assert!(p("diag").join("trends").join("condensed_2.csv").exists());
}

#[test]
fn failures_have_categories_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name);

    let (code, line) = fails(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(line.starts_with("error[usage]: "), "{line}");

    let (code, line) = fails(&["eval", "--data", s(&p("missing")), "--out", s(&p("x"))]);
    assert_eq!(code, 3);
    assert!(line.starts_with("error[io]: "), "{line}");

    let (code, line) = fails(&["gen", "--out", s(&p("x")), "--n", "lots"]);
    assert_eq!(code, 2);
    assert!(line.starts_with("error[config]: "), "{line}");

    fs::write(p("bad.cfg"), "n = 100\nwidth = 3\n").unwrap();
    let (code, line) = fails(&["gen", "--out", s(&p("x")), "--config", s(&p("bad.cfg"))]);
    assert_eq!(code, 2);
    assert!(line.contains("unknown setting `width`"), "{line}");

    ok(&["gen", "--out", s(&p("data")), "--n", "80", "--t", "8", "--f", "2"]);
    ok(&[
        "condense", "--data", s(&p("data")), "--out", s(&p("short")), "--size", "4", "--t-star", "4", "--iterations", "2",
        "--networks", "RNN-β",
    ]);
    let (code, line) = fails(&["diagnose", "--data", s(&p("data")), "--condensed", s(&p("short")), "--out", s(&p("d"))]);
    assert_eq!(code, 4);
    assert!(line.starts_with("error[shape]: ") && line.contains("embedding space"), "{line}");

    let (code, line) = fails(&["eval", "--data", s(&p("data")), "--out", s(&p("e")), "--train", "condensed"]);
    assert_eq!(code, 2);
    assert!(line.contains("--condensed"), "{line}");
}

#[test]
fn eval_on_well_separated_originals() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["gen", "--out", s(&data), "--n", "400", "--t", "12", "--f", "4", "--delta", "3", "--sigma", "0.5", "--seed", "2"]);
    let out = tmp.path().join("eval");
    ok(&[
        "eval", "--data", s(&data), "--out", s(&out), "--repeats", "1", "--steps", "150", "--eval-interval", "10",
        "--seed", "2", "--workers", "2",
    ]);
    let report: EvalOutput = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.report.archs.len(), 11);
    assert!(report.report.cohort_mean_auc >= 0.95, "{}", report.report.cohort_mean_auc);
}

#[test]
fn eval_without_separation_stays_near_chance() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["gen", "--out", s(&data), "--n", "600", "--t", "12", "--f", "4", "--delta", "0", "--seed", "5"]);
    let out = tmp.path().join("eval");
    ok(&[
        "eval", "--data", s(&data), "--out", s(&out), "--archs", "TCN-β,LSTM-β,ViT-β", "--repeats", "2", "--steps", "100",
        "--eval-interval", "10", "--seed", "5", "--workers", "2",
    ]);
    let report: EvalOutput = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let auc = report.report.cohort_mean_auc;
    assert!((0.4..=0.6).contains(&auc), "{auc}");
}
