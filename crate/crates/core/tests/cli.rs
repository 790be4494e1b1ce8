//! End-to-end runs of the `sensemble` binary on a synthetic split.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sensemble::analysis::{parse_report, EvaluationReport};
use sensemble::dataset::Sample;
use sensemble::ensemble::EnsembleWeights;
use sensemble::scorer::synthetic::separable_validation_set;

const BIN: &str = env!("CARGO_BIN_EXE_sensemble");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes `samples` as `id,sent0,sent1,label` with the label marking the
/// nonsensical statement.
fn write_split(path: &Path, samples: &[Sample]) {
    let mut text = String::from("id,sent0,sent1,label\n");
    for s in samples {
        let Sample::Validation(v) = s else { unreachable!() };
        text += &format!("{},{},{},{}\n", v.id, v.statements[0], v.statements[1], v.nonsensical_index());
    }
    fs::write(path, text).unwrap();
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    format: PathBuf,
    train: PathBuf,
    dev: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let format = root.join("format.json");
        fs::write(
            &format,
            r#"{"task": "validation", "statement_columns": ["sent0", "sent1"], "answer": {"column": "label"}}"#,
        )
        .unwrap();
        let train = root.join("train.csv");
        let dev = root.join("dev.csv");
        write_split(&train, &separable_validation_set(200, 11));
        write_split(&dev, &separable_validation_set(60, 12));
        Self { _dir: dir, root, format, train, dev }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Logits that score the gold choice highest on the samples where
    /// `keep(index)` holds and the wrong one otherwise.
    fn oracle_logits(&self, name: &str, keep: impl Fn(usize) -> bool) -> PathBuf {
        let path = self.path(name);
        let mut text = String::new();
        for (i, s) in separable_validation_set(60, 12).iter().enumerate() {
            let mut scores = [0.0, 0.0];
            let favored = if keep(i) { s.label() } else { 1 - s.label() };
            scores[favored] = 1.0 + (i % 7) as f64 / 10.0;
            text += &format!("{{\"id\":\"{}\",\"scores\":[{},{}]}}\n", s.id(), scores[0], scores[1]);
        }
        fs::write(&path, text).unwrap();
        path
    }

    fn train_toy(&self) -> PathBuf {
        let out = self.path("toy");
        ok(&[
            "train-toy",
            "--train",
            p(&self.train),
            "--dev",
            p(&self.dev),
            "--format",
            p(&self.format),
            "--out-dir",
            p(&out),
            "--epochs",
            "3",
            "--learning-rate",
            "3e-3",
            "--seed",
            "5",
        ]);
        out.join("params.json")
    }
}

#[test]
fn stats_prints_table_and_writes_json() {
    let f = Fixture::new();
    let out = f.path("stats.json");
    let text = ok(&[
        "stats",
        "--data",
        p(&f.train),
        "--data",
        &format!("dev={}", p(&f.dev)),
        "--format",
        p(&f.format),
        "--out",
        p(&out),
    ]);
    assert!(text.contains("Number of samples"));
    assert!(text.contains("200") && text.contains("60"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json["splits"]["train"]["validation_samples"], 200);
    assert!(json["config"]["format"].is_string());
}

#[test]
fn train_score_fit_evaluate_overlap() {
    let f = Fixture::new();
    let params = f.train_toy();
    let (_, provenance) = sensemble::scorer::ToyScorerParams::load(&params).unwrap();
    assert_eq!(provenance["seed"], 5);
    assert_eq!(provenance["train"]["epochs"], 3);
    assert!(f.path("toy/trace.csv").exists());

    let toy_logits = f.path("toy.jsonl");
    ok(&[
        "score",
        "--data",
        p(&f.dev),
        "--format",
        p(&f.format),
        "--backend",
        &format!("toy:toy:{}", p(&params)),
        "--out",
        p(&toy_logits),
    ]);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(f.path("toy.jsonl.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 5);

    // The same params behind the worker protocol give identical scores.
    let worker_logits = f.path("worker.jsonl");
    ok(&[
        "score",
        "--data",
        p(&f.dev),
        "--format",
        p(&f.format),
        "--backend",
        &format!("worker:toy:{BIN} serve-toy --params {}", p(&params)),
        "--out",
        p(&worker_logits),
    ]);
    assert_eq!(fs::read_to_string(&toy_logits).unwrap(), fs::read_to_string(&worker_logits).unwrap());

    let a = f.oracle_logits("a.jsonl", |i| i % 3 != 0);
    let b = f.oracle_logits("b.jsonl", |i| i % 3 != 1);
    let backends =
        [format!("logits:toy:{}", p(&toy_logits)), format!("logits:a:{}", p(&a)), format!("logits:b:{}", p(&b))];
    let weights_path = f.path("weights.json");
    let trace = f.path("de.csv");
    let mut args = vec![
        "fit-weights",
        "--data",
        p(&f.dev),
        "--format",
        p(&f.format),
        "--out",
        p(&weights_path),
        "--de-trace",
        p(&trace),
        "--seed",
        "3",
        "--de-iterations",
        "300",
    ];
    for b in &backends {
        args.extend(["--backend", b.as_str()]);
    }
    ok(&args);
    let weights = EnsembleWeights::load(&weights_path).unwrap();
    assert_eq!(weights.seed, 3);
    assert_eq!(weights.config["de"]["max_iterations"], 300);
    assert!(fs::read_to_string(&trace).unwrap().starts_with("generation,best_f"));

    let mut eval_args = vec![
        "evaluate",
        "--data",
        p(&f.dev),
        "--format",
        p(&f.format),
        "--weights",
        p(&weights_path),
        "--report-format",
        "structured",
        "--vote-fallback",
        "a",
    ];
    for b in &backends {
        eval_args.extend(["--backend", b.as_str()]);
    }
    let report: EvaluationReport = parse_report(&ok(&eval_args)).unwrap();
    let acc = |name: &str| report.accuracies.iter().find(|a| a.system == name).unwrap().accuracy;
    let best_single = acc("toy").max(acc("a")).max(acc("b"));
    assert_eq!(weights.dev_accuracy, Some(acc("ensemble")));
    assert!(acc("ensemble") >= best_single);
    assert!((acc("a") - 40.0 / 60.0).abs() < 1e-12);
    assert!(report.accuracies.iter().any(|a| a.system == "majority-vote"));

    // A unit weight vector reproduces that backend exactly.
    let unit = f.path("unit.json");
    EnsembleWeights::new(vec![0.0, 1.0, 0.0], vec!["toy".into(), "a".into(), "b".into()]).unwrap().save(&unit).unwrap();
    eval_args[6] = p(&unit);
    let report: EvaluationReport = parse_report(&ok(&eval_args)).unwrap();
    let acc = |name: &str| report.accuracies.iter().find(|a| a.system == name).unwrap().accuracy;
    assert_eq!(acc("ensemble"), acc("a"));

    eval_args[0] = "overlap";
    let report: EvaluationReport = parse_report(&ok(&eval_args)).unwrap();
    let venn = report.venn.unwrap();
    assert_eq!(venn.regions.len(), 8);
    assert_eq!(venn.total(), 60);
    // a and b are never wrong on the same sample.
    assert_eq!(venn.region(&[]).unwrap().alpha, 0);
    let text = ok(&[&eval_args[..7], &["--report-format", "text"], &eval_args[9..]].concat());
    assert!(text.contains("alpha|beta"));
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(run(&["evaluate", "--nope"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let missing = run(&["stats", "--data", p(&f.path("absent.csv")), "--format", p(&f.format)]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.csv"));

    let silent = run(&[
        "score",
        "--data",
        p(&f.dev),
        "--format",
        p(&f.format),
        "--backend",
        "worker:w:true",
        "--out",
        p(&f.path("x.jsonl")),
    ]);
    assert_eq!(silent.status.code(), Some(4));

    let short = f.oracle_logits("short.jsonl", |_| true);
    let text = fs::read_to_string(&short).unwrap();
    fs::write(&short, text.lines().skip(1).collect::<Vec<_>>().join("\n")).unwrap();
    let out = run(&[
        "score",
        "--data",
        p(&f.dev),
        "--format",
        p(&f.format),
        "--backend",
        &format!("logits:s:{}", p(&short)),
        "--out",
        p(&f.path("y.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("syn-12-0"));
}
