use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dualenc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualenc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = dualenc(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_key_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dualenc(dir.path(), &["--set", "train.bogus_rate=3", "train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.bogus_rate"));

    fs::write(dir.path().join("run.cfg"), "# comment\nloss.w_t2t = 0.1\nmodel.widht = 8\n").unwrap();
    let out = dualenc(dir.path(), &["-c", "run.cfg", "config"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.widht") && err.contains("run.cfg:3"), "{err}");
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dualenc(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(dualenc(dir.path(), &["--set", "train.total_steps=ten", "config"]).status.code(), Some(1));
    // Missing checkpoint and corpus files are data errors.
    assert_eq!(dualenc(dir.path(), &["eval"]).status.code(), Some(2));
    assert_eq!(dualenc(dir.path(), &["train"]).status.code(), Some(2));
    fs::create_dir_all(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/svcca.json"), "{ not json").unwrap();
    assert_eq!(dualenc(dir.path(), &["map"]).status.code(), Some(2));
}

#[test]
fn config_command_echoes_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["--set", "loss.w_t2t=0.05", "--set", "train.seed=9", "config"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l == "loss.w_t2t = 0.05"));
    assert!(text.lines().any(|l| l == "train.seed = 9"));
}

fn pipeline(dir: &Path) {
    for cmd in ["gen", "train", "eval", "translate-test", "svcca", "map"] {
        ok(dir, &[cmd]);
    }
}

const FILES: [&str; 9] = [
    "data/train_i2t.jsonl",
    "data/train_t2t.jsonl",
    "data/eval_i2t.jsonl",
    "out/model.ckpt",
    "out/train_log.jsonl",
    "out/metrics.json",
    "out/translate_test.json",
    "out/svcca.json",
    "out/eigenmap.svg",
];

#[test]
fn default_pipeline_is_complete_and_rerunnable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    for f in FILES.iter().chain(&["out/eigenmap.json"]) {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        assert!(x == y, "{f} differs between identical runs");
    }

    let metrics = read_json(&a.path().join("out/metrics.json"));
    let per_lang = metrics["per_lang"].as_array().unwrap();
    assert_eq!(per_lang.len(), 5);
    for r in per_lang {
        let m = r["mean_recall"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&m));
        for dir in ["i2t", "t2i"] {
            assert!(r[dir]["r_at"]["10"].as_f64().unwrap() >= r[dir]["r_at"]["1"].as_f64().unwrap());
        }
    }
    assert!(metrics["model_id"].as_str().unwrap().starts_with("model.ckpt@"));
    assert_eq!(metrics["config"]["loss.w_t2t"], "0.1");
    assert!(metrics["correlations"]["sts"].is_number());

    let tt = read_json(&a.path().join("out/translate_test.json"));
    assert_eq!(tt["pivot"], "l0");
    assert_eq!(tt["per_lang"].as_array().unwrap().len(), 5);

    let svcca = read_json(&a.path().join("out/svcca.json"));
    assert_eq!(svcca["langs"].as_array().unwrap().len(), 5);
    let map = read_json(&a.path().join("out/eigenmap.json"));
    assert_eq!(map["coords"].as_array().unwrap().len(), 5);
    let svg = fs::read_to_string(a.path().join("out/eigenmap.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 5);

    // Eval does not touch its inputs.
    let before = fs::read(a.path().join("out/model.ckpt")).unwrap();
    ok(a.path(), &["eval"]);
    assert_eq!(before, fs::read(a.path().join("out/model.ckpt")).unwrap());
}

#[test]
fn sweep_writes_one_checkpoint_per_weight_and_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let small = [
        "--set",
        "world.n_concepts=60",
        "--set",
        "world.n_eval_concepts=20",
        "--set",
        "train.total_steps=100",
        "--set",
        "train.warmup_steps=10",
    ];
    let with = |cmd: &'static str| -> Vec<&'static str> { small.iter().copied().chain([cmd]).collect() };
    ok(dir.path(), &with("gen"));
    ok(dir.path(), &with("sweep"));
    let sweep = dir.path().join("out/sweep");
    for w in ["0", "0.05", "0.1", "1"] {
        assert!(sweep.join(format!("model_w_t2t_{w}.ckpt")).is_file(), "missing checkpoint for {w}");
    }
    let table = fs::read_to_string(sweep.join("summary.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "lang\tw_t2t=0\tw_t2t=0.05\tw_t2t=0.1\tw_t2t=1");
    assert_eq!(lines.len(), 1 + 5 + 1);
    assert!(lines.last().unwrap().starts_with("average\t"));
    for l in &lines[1..] {
        assert_eq!(l.split('\t').count(), 5);
    }
    let summary = read_json(&sweep.join("summary.json"));
    assert_eq!(summary["rows"].as_array().unwrap().len(), 4);
}
