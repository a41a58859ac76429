use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use herec_core::pipeline::CheckpointMeta;
use herec_core::recommend::{Provenance, RecommendationList};
use serde_json::Value;
use tempfile::TempDir;

fn herec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herec"))
        .args(args)
        .env("HEREC_LOG", "error")
        .output()
        .expect("spawn herec")
}

fn ok(args: &[&str]) -> String {
    let out = herec(args);
    assert!(
        out.status.success(),
        "herec {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    herec(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: TempDir,
    data: PathBuf,
    ckpt: PathBuf,
}

fn trained() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let ckpt = dir.path().join("m.ckpt");
    ok(&["gen-synth", "--out", s(&data), "--users", "60", "--items", "90", "--seed", "2"]);
    ok(&[
        "train",
        "--data",
        s(&data),
        "--checkpoint",
        s(&ckpt),
        "--epochs",
        "5",
        "--dim",
        "8",
    ]);
    Fixture { _dir: dir, data, ckpt }
}

fn parse_table(text: &str) -> Vec<(u32, String)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[1].parse().unwrap(), f[3].to_string())
        })
        .collect()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&["train", "--bogus"]), 1);
    assert_eq!(code(&["nope"]), 1);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["--help"]), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_herec"))
        .args(["verify"])
        .env("HEREC_LOG", "loud")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.ckpt");
    assert_eq!(code(&["eval", "--checkpoint", s(&missing)]), 2);
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "0\t1\n1\tx\n").unwrap();
    let out = herec(&["train", "--data", s(&bad), "--checkpoint", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
}

#[test]
fn manifest_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    ok(&["gen-synth", "--out", s(&data), "--users", "20", "--items", "40"]);
    fs::write(data.join("manifest.txt"), "users=21\n").unwrap();
    let ckpt = dir.path().join("m.ckpt");
    assert_eq!(code(&["train", "--data", s(&data), "--checkpoint", s(&ckpt), "--epochs", "1"]), 2);
}

#[test]
fn gen_synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["gen-synth", "--out", s(&a), "--seed", "5", "--users", "30", "--items", "40"]);
    ok(&["gen-synth", "--out", s(&b), "--seed", "5", "--users", "30", "--items", "40"]);
    for f in ["interactions.tsv", "semantic.tsv", "manifest.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(code(&["gen-synth", "--out", s(&a), "--users", "0"]), 1);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    ok(&["gen-synth", "--out", s(&data), "--users", "30", "--items", "40"]);
    let cfg = dir.path().join("train.cfg");
    fs::write(&cfg, "# small run\ndim=6\nepochs=2\nseed=4\nlr=0.002\n").unwrap();
    let ckpt = dir.path().join("m.ckpt");
    let out = ok(&[
        "train",
        "--data",
        s(&data),
        "--config",
        s(&cfg),
        "--checkpoint",
        s(&ckpt),
        "--seed",
        "9",
        "--json",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["dim"], 6);
    assert_eq!(v["config"]["seed"], 9);
    assert_eq!(v["config"]["lr"], 0.002);
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(format!("{}.json", ckpt.display())).unwrap()).unwrap();
    assert_eq!(meta.config.epochs, 2);
    assert_eq!(meta.config.seed, 9);

    fs::write(&cfg, "dim=6\nwidth=3\n").unwrap();
    assert_eq!(code(&["train", "--data", s(&data), "--config", s(&cfg), "--checkpoint", s(&ckpt)]), 2);
    assert_eq!(code(&["train", "--data", s(&data), "--checkpoint", s(&ckpt), "--lr", "-1"]), 1);
}

#[test]
fn recommend_outputs_agree() {
    let f = trained();
    let base = ["recommend", "--checkpoint", s(&f.ckpt), "--user", "4", "--k", "10"];
    let table = ok(&base);
    let json = ok(&[&base[..], &["--json"]].concat());
    let list: RecommendationList = serde_json::from_str(&json).unwrap();
    let rows = parse_table(&table);
    assert_eq!(rows.len(), 10);
    for (row, item) in rows.iter().zip(&list.items) {
        assert_eq!(row.0, item.item_id);
        assert_eq!(row.1, "retained");
    }
    let tau0 = ok(&[&base[..], &["--tau", "0", "--layer", "3"]].concat());
    assert_eq!(tau0, table);
}

#[test]
fn half_explored_at_layer_five() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let ckpt = dir.path().join("m.ckpt");
    ok(&["gen-synth", "--out", s(&data)]);
    ok(&["train", "--data", s(&data), "--checkpoint", s(&ckpt)]);
    let args = [
        "recommend",
        "--checkpoint",
        s(&ckpt),
        "--user",
        "7",
        "--k",
        "10",
        "--tau",
        "0.5",
        "--layer",
        "5",
        "--json",
    ];
    let list: RecommendationList = serde_json::from_str(&ok(&args)).unwrap();
    let explored = list.items.iter().filter(|i| i.provenance == Provenance::Explored).count();
    let retained = list.items.iter().take(5).filter(|i| i.provenance == Provenance::Retained).count();
    assert_eq!((retained, explored, list.len()), (5, 5, 10));
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn recommend_errors() {
    let f = trained();
    let c = s(&f.ckpt);
    assert_eq!(code(&["recommend", "--checkpoint", c, "--user", "60"]), 2);
    assert_eq!(code(&["recommend", "--checkpoint", c, "--user", "1", "--tau", "0.5"]), 1);
    assert_eq!(code(&["recommend", "--checkpoint", c, "--user", "1", "--tau", "2", "--layer", "1"]), 1);
    assert_eq!(code(&["recommend", "--checkpoint", c, "--user", "1", "--tau", "0.5", "--layer", "99"]), 1);
}

#[test]
fn cluster_then_recommend_with_tree() {
    let f = trained();
    let tree = f.ckpt.with_extension("tree");
    let out = ok(&["cluster", "--checkpoint", s(&f.ckpt), "--out", s(&tree), "--json"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    let sizes = v["layer_sizes"].as_array().unwrap();
    assert_eq!(sizes[0], 1);
    assert_eq!(sizes.last().unwrap(), 150);
    assert!(v["dasgupta_cost"].as_f64().unwrap() > 0.0);
    let args = |t: &str| {
        vec![
            "recommend".to_string(),
            "--checkpoint".into(),
            s(&f.ckpt).into(),
            "--tree".into(),
            t.into(),
            "--user".into(),
            "2".into(),
            "--tau".into(),
            "1".into(),
            "--layer".into(),
            "1".into(),
            "--k".into(),
            "6".into(),
        ]
    };
    let with_tree: Vec<String> = args(s(&tree));
    let a = ok(&with_tree.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(parse_table(&a).iter().all(|r| r.1 == "explored"));
    let missing = args("/nonexistent/tree.json");
    assert_eq!(code(&missing.iter().map(String::as_str).collect::<Vec<_>>()), 2);
}

#[test]
fn eval_json_and_out() {
    let f = trained();
    let out = f.ckpt.with_extension("eval.json");
    ok(&["eval", "--checkpoint", s(&f.ckpt), "--baseline", "--json", "--out", s(&out)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["model"]["cutoffs"].as_array().unwrap().len() == 2);
    assert!(v["most_popular"]["users_evaluated"].as_u64().unwrap() > 0);
    let table = ok(&["eval", "--checkpoint", s(&f.ckpt)]);
    assert!(table.contains("Recall"));
    // re-splitting the raw data with the stored seed reproduces the stored split
    let resplit = ok(&["eval", "--checkpoint", s(&f.ckpt), "--data", s(&f.data), "--json"]);
    let stored = ok(&["eval", "--checkpoint", s(&f.ckpt), "--json"]);
    assert_eq!(resplit, stored);
}

#[test]
fn eval_rejects_mismatched_data() {
    let f = trained();
    let other = f.data.with_file_name("other");
    ok(&["gen-synth", "--out", s(&other), "--users", "61", "--items", "90"]);
    assert_eq!(code(&["eval", "--checkpoint", s(&f.ckpt), "--data", s(&other)]), 2);
}

#[test]
fn verify_reports_and_exits_three_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("grid.csv");
    let out = herec(&["verify", "--out", s(&csv)]);
    let summary = String::from_utf8(out.stdout).unwrap();
    let checks = summary.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count();
    assert_eq!(checks, 5);
    let expected = if summary.contains("FAIL") { 3 } else { 0 };
    assert_eq!(out.status.code(), Some(expected));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "norm_x,norm_y,theta,exact,approx,fd,rel_err,bound"
    );
    assert_eq!(text.lines().count(), 1 + 64);

    let to_stdout = herec(&["verify"]);
    assert!(String::from_utf8_lossy(&to_stdout.stdout).starts_with("norm_x,"));
    assert!(String::from_utf8_lossy(&to_stdout.stderr).contains("adaptivity"));
}
