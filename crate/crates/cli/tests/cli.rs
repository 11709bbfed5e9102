use std::path::Path;
use std::process::{Command, Output};

use spamnet_core::metrics::{parse_reports, EvalReport};

fn spamnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spamnet"))
        .args(args)
        .env_remove("SPAMNET_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, spam: usize, ham: usize, seed: u64) {
    ok(&spamnet(&[
        "synth",
        "--out",
        p(dir),
        "--spam",
        &spam.to_string(),
        "--ham",
        &ham.to_string(),
        "--seed",
        &seed.to_string(),
    ]));
}

#[test]
fn full_pipeline_on_synthetic_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let ckpt = tmp.path().join("model.ckpt");
    let report_path = tmp.path().join("train.report");
    synth(&corpus, 200, 200, 1);
    assert!(corpus.join("manifest.tsv").is_file());

    let train_out = ok(&spamnet(&[
        "train",
        "--corpus",
        p(&corpus),
        "--checkpoint",
        p(&ckpt),
        "--seed",
        "1",
        "--epochs",
        "30",
        "--report",
        p(&report_path),
    ]));
    assert!(ckpt.is_file());
    let trained = EvalReport::parse(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(trained.serialize(), train_out);
    assert_eq!(trained.total(), 80);
    assert!(trained.accuracy >= 0.95, "{train_out}");

    let eval_out = ok(&spamnet(&[
        "evaluate",
        "--corpus",
        p(&corpus),
        "--checkpoint",
        p(&ckpt),
        "--seed",
        "1",
    ]));
    assert_eq!(eval_out, train_out);

    let full = EvalReport::parse(&ok(&spamnet(&[
        "evaluate",
        "--corpus",
        p(&corpus),
        "--checkpoint",
        p(&ckpt),
        "--seed",
        "1",
        "--full",
    ])))
    .unwrap();
    assert_eq!(full.total(), 400);
    assert!(full.dataset.starts_with("all:"));

    let baselines = parse_reports(&ok(&spamnet(&[
        "baseline",
        "--corpus",
        p(&corpus),
        "--seed",
        "1",
    ])))
    .unwrap();
    assert_eq!(baselines.len(), 2);
    for b in &baselines {
        assert_eq!(
            b.dataset, trained.dataset,
            "baselines must share the CNN's split"
        );
        assert!(trained.accuracy >= b.accuracy);
    }
    assert!(baselines[0].accuracy >= 0.8);

    let image = corpus.join("spam/spam_0000.ppm");
    let lines = ok(&spamnet(&[
        "predict",
        "--checkpoint",
        p(&ckpt),
        p(&image),
        p(&image),
    ]));
    let lines: Vec<&str> = lines.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], lines[1]);
    let fields: Vec<&str> = lines[0].split('\t').collect();
    assert_eq!(fields[0], p(&image));
    let prob: f64 = fields[1].parse().unwrap();
    assert!((0.0..=1.0).contains(&prob));
    assert_eq!(fields[1].split('.').nth(1).unwrap().len(), 4);
    assert!(fields[2] == "spam" || fields[2] == "ham");
}

#[test]
fn same_seed_gives_same_report() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, 12, 12, 3);
    let run = |ckpt: &str, env_seed: bool| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_spamnet"));
        cmd.args([
            "train",
            "--corpus",
            p(&corpus),
            "--epochs",
            "2",
            "--batch-size",
            "8",
        ]);
        cmd.args(["--checkpoint", p(&tmp.path().join(ckpt))]);
        if env_seed {
            cmd.env("SPAMNET_SEED", "7");
        } else {
            cmd.env_remove("SPAMNET_SEED").args(["--seed", "7"]);
        }
        ok(&cmd.output().unwrap())
    };
    let a = run("a.ckpt", false);
    assert_eq!(a, run("b.ckpt", false));
    assert_eq!(a, run("c.ckpt", true));
    assert_eq!(
        std::fs::read(tmp.path().join("a.ckpt")).unwrap(),
        std::fs::read(tmp.path().join("c.ckpt")).unwrap()
    );
}

#[test]
fn missing_corpus_is_reported() {
    let out = spamnet(&[
        "train",
        "--corpus",
        "/nonexistent/corpus-dir",
        "--epochs",
        "1",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/corpus-dir"));
}

#[test]
fn unknown_flags_are_rejected() {
    let out = spamnet(&["synth", "--out", "x", "--bogus"]);
    assert!(!out.status.success());
    assert!(!spamnet(&["frobnicate"]).status.success());
}

#[test]
fn one_class_corpus_reports_undefined_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let ckpt = tmp.path().join("m.ckpt");
    synth(&corpus, 3, 3, 4);
    ok(&spamnet(&[
        "train",
        "--corpus",
        p(&corpus),
        "--checkpoint",
        p(&ckpt),
        "--epochs",
        "1",
    ]));
    for f in std::fs::read_dir(corpus.join("spam")).unwrap() {
        std::fs::remove_file(f.unwrap().path()).unwrap();
    }
    let out = spamnet(&["evaluate", "--corpus", p(&corpus), "--checkpoint", p(&ckpt)]);
    let text = ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let r = EvalReport::parse(&text).unwrap();
    assert_eq!(r.total(), 3);
    assert!(text.contains("recall=null"));
    assert!(text.contains("f1=null"));
}

#[test]
fn predict_continues_past_bad_files() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let ckpt = tmp.path().join("m.ckpt");
    synth(&corpus, 2, 2, 5);
    ok(&spamnet(&[
        "train",
        "--corpus",
        p(&corpus),
        "--checkpoint",
        p(&ckpt),
        "--epochs",
        "1",
        "--train-frac",
        "0.5",
    ]));
    let bad = tmp.path().join("bad.png");
    std::fs::write(&bad, b"not an image").unwrap();
    let good = corpus.join("ham/ham_0001.ppm");

    let out = spamnet(&["predict", "--checkpoint", p(&ckpt), p(&bad), p(&good)]);
    assert_eq!(ok(&out).lines().count(), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.png"));

    let out = spamnet(&["predict", "--checkpoint", p(&ckpt), p(&bad)]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
}
