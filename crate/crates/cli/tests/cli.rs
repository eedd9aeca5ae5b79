//! End-to-end tests of the command-line surface and its exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpdtw"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn field(text: &str, key: &str) -> Option<String> {
    text.lines()
        .find(|l| l.starts_with(&format!("{key}\t")))
        .map(|l| l.split('\t').nth(1).unwrap().to_string())
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(code(&run(&[])), 1);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&run(&["baseline", "--bogus"])), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn missing_data_is_a_data_error() {
    let out = run(&["train-seg", "--data", "/nonexistent.jsonl", "--out", "/tmp/x.model"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn malformed_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("bad.jsonl");
    fs::write(&corpus, "not json\n").unwrap();
    let out = run(&[
        "train-seg",
        "--data",
        corpus.to_str().unwrap(),
        "--out",
        dir.path().join("m.model").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn bad_encoder_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    fs::write(&corpus, r#"{"id":"v","frames":[[0.0]],"transcript":[1]}"#).unwrap();
    let out = run(&[
        "train-seg",
        "--data",
        corpus.to_str().unwrap(),
        "--encoder",
        "mystery",
        "--out",
        dir.path().join("m.model").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

fn gen_tsc_dir(dir: &Path, seed: &str) {
    let out = run(&[
        "synth-gen",
        "--format",
        "ucr",
        "--k",
        "2",
        "--seed",
        seed,
        "--out",
        dir.join("D").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn tsc_pipeline_train_eval_baseline() {
    let dir = tempfile::tempdir().unwrap();
    gen_tsc_dir(dir.path(), "3");
    let model = dir.path().join("m.model");
    let out = run(&[
        "train-tsc",
        "--data",
        dir.path().to_str().unwrap(),
        "--epochs",
        "10",
        "--lr",
        "0.05",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(model.exists());

    let out = run(&[
        "eval-tsc",
        "--model",
        model.to_str().unwrap(),
        "--data",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let acc: f64 = field(&stdout(&out), "accuracy").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    for method in ["ed", "dtw", "dba"] {
        let out = run(&[
            "baseline",
            "--data",
            dir.path().to_str().unwrap(),
            "--method",
            method,
        ]);
        assert_eq!(code(&out), 0, "method {method}");
        let acc: f64 = field(&stdout(&out), "accuracy").unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&acc), "method {method}");
    }

    let out = run(&[
        "baseline",
        "--data",
        dir.path().to_str().unwrap(),
        "--method",
        "dtww",
        "--window",
        "2",
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn same_seed_produces_identical_model_files() {
    let dir = tempfile::tempdir().unwrap();
    gen_tsc_dir(dir.path(), "4");
    let m1 = dir.path().join("a.model");
    let m2 = dir.path().join("b.model");
    for m in [&m1, &m2] {
        let out = run(&[
            "train-tsc",
            "--data",
            dir.path().to_str().unwrap(),
            "--epochs",
            "5",
            "--seed",
            "11",
            "--out",
            m.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
}

#[test]
fn seg_pipeline_eval_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let out = run(&[
        "synth-gen",
        "--k",
        "3",
        "--m",
        "2",
        "--samples",
        "16",
        "--min-duration",
        "6",
        "--max-duration",
        "10",
        "--orderings",
        "4",
        "--seed",
        "5",
        "--out",
        corpus.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let model = dir.path().join("m.model");
    let out = run(&[
        "train-seg",
        "--data",
        corpus.to_str().unwrap(),
        "--q",
        "3",
        "--steps",
        "15",
        "--batch",
        "8",
        "--tau-p",
        "4",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let labels_dir = dir.path().join("labels");
    for setting in ["alignment", "segmentation"] {
        let out = run(&[
            "eval-seg",
            "--model",
            model.to_str().unwrap(),
            "--data",
            corpus.to_str().unwrap(),
            "--setting",
            setting,
            "--out-dir",
            labels_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let text = stdout(&out);
        for key in ["f_acc", "iou", "iod"] {
            let v: f64 = field(&text, key).unwrap().parse().unwrap();
            assert!((0.0..=1.0).contains(&v), "{setting} {key}");
        }
    }
    let label_file = labels_dir.join("synth-0000.labels.txt");
    let text = fs::read_to_string(&label_file).unwrap();
    assert!(text.lines().all(|l| l.parse::<usize>().is_ok()));

    let out = run(&[
        "summarize",
        "--model",
        model.to_str().unwrap(),
        "--data",
        corpus.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let rate: f64 = field(&text, "matching_rate").unwrap().parse().unwrap();
    let uniform: f64 = field(&text, "uniform_matching_rate").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&rate) && (0.0..=1.0).contains(&uniform));

    // wrong model mode for eval-tsc is a usage error
    let out = run(&[
        "eval-tsc",
        "--model",
        model.to_str().unwrap(),
        "--data",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn report_ranks_and_no_worse() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    fs::write(&table, "dataset,a,b\nd1,0.9,0.8\nd2,0.7,0.7\n").unwrap();
    let out = run(&["report", "--table", table.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("a\t1.25"), "{text}");
    assert!(text.contains("b\t1.75"), "{text}");
    assert!(text.contains("b\t0.5\t1"), "{text}");

    fs::write(&table, "dataset,a,b\nd1,0.9,oops\n").unwrap();
    assert_eq!(code(&run(&["report", "--table", table.to_str().unwrap()])), 2);
}

#[test]
fn corrupted_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.model");
    fs::write(&model, "{\"version\":1}\n#sha256:beef\n").unwrap();
    let out = run(&[
        "eval-tsc",
        "--model",
        model.to_str().unwrap(),
        "--data",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    gen_tsc_dir(dir.path(), "8");
    let config = dir.path().join("cfg.json");
    fs::write(
        &config,
        r#"{"lambda":0.0,"temperature":1.0,"epochs":3,"batch_fraction":0.5,"learning_rate":0.05,"seed":2,"band":"None"}"#,
    )
    .unwrap();
    let model = dir.path().join("m.model");
    let out = run(&[
        "train-tsc",
        "--data",
        dir.path().to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(&config, "not json").unwrap();
    let out = run(&[
        "train-tsc",
        "--data",
        dir.path().to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}
