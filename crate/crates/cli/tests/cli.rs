mod common;

use std::path::Path;

use serde_json::{json, Value};

use incongruity_cli::{FileDigest, RunManifest, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use incongruity_core::textcorpus::read_corpus_vec;

use common::{cli, p};

fn ok<S: AsRef<str>>(args: &[S]) -> common::Output {
    let o = cli(args);
    assert_eq!(o.code, EXIT_OK, "{:?}\nstdout: {}\nstderr: {}", args.iter().map(|a| a.as_ref()).collect::<Vec<_>>(), o.stdout, o.stderr);
    o
}

fn synth(dir: &Path, articles: usize) -> (String, String) {
    let out = dir.join("synth");
    ok(&["synth-corpus", "--articles", &articles.to_string(), "--topics", "3", "--words-per-topic", "40", "--seed", "4", "--out-dir", &p(&out)]);
    (p(&out.join("corpus.jsonl")), p(&out.join("vocab.tsv")))
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cli(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(cli::<&str>(&[]).code, EXIT_USAGE);
    let o = cli(&["generate", "--corpus", "c.jsonl", "--out-dir", "x"]);
    assert_eq!(o.code, EXIT_USAGE);
    assert!(o.stderr.contains("--seed"), "{}", o.stderr);
    assert_eq!(cli(&["train", "--model", "svm", "--train", "a", "--vocab", "b", "--seed", "1", "--out-dir", "o"]).code, EXIT_USAGE);
    assert_eq!(cli(&["generate", "--corpus", "c", "--seed", "1", "--out-dir", "o", "--split", "0.5,0.5"]).code, EXIT_USAGE);
}

#[test]
fn help_goes_to_stdout() {
    let o = cli(&["--help"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.contains("synth-corpus"));
    let o = cli(&["train", "--help"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.contains("--objective"));
}

#[test]
fn missing_input_fails_at_run_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["stats", "--corpus", &p(&dir.path().join("absent.jsonl"))]);
    assert_eq!(o.code, EXIT_FAILURE);
    assert!(o.stderr.starts_with("error:"), "{}", o.stderr);
}

#[test]
fn synth_then_stats() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(dir.path(), 50);
    let o = ok(&["stats", "--corpus", &corpus]);
    let stats: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(stats["articles"], 50);
    assert!(stats["paragraphs_per_body"]["mean"].as_f64().unwrap() >= 4.0);
    let m = RunManifest::read(dir.path().join("synth/manifest.json")).unwrap();
    assert_eq!(m.command, "synth-corpus");
    assert_eq!(m.seed, Some(4));
    assert_eq!(m.outputs["corpus.jsonl"].sha256, FileDigest::of(&corpus).unwrap().sha256);
}

#[test]
fn prep_tokenizes_and_skips_invalid_articles() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.jsonl");
    let lines = [
        json!({"id": "a", "category": "world", "headline": "Rain expected, officials say", "body": "Forecasters expect rain.\n\nUmbrellas advised."}),
        json!({"id": "b", "headline": "Markets rally", "paragraphs": ["Stocks rose on Monday.", "Bonds fell."], "label": 1}),
        json!({"id": "c", "headline": "   ", "body": "No headline here."}),
    ];
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(&raw, text).unwrap();
    let out = dir.path().join("prepped");
    let o = ok(&["prep", "--input", &p(&raw), "--out-dir", &p(&out)]);
    assert!(o.stderr.contains("1 skipped"), "{}", o.stderr);
    let corpus = read_corpus_vec(out.join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(corpus[0].category, "world");
    assert_eq!(corpus[0].paragraphs.len(), 2);
    assert_eq!(corpus[1].label.map(u8::from), Some(1));
    let m = RunManifest::read(out.join("manifest.json")).unwrap();
    assert_eq!(m.details["skipped"][0]["id"], "c");
    assert_eq!(m.inputs["raw"], FileDigest::of(&raw).unwrap());

    // both body and paragraphs is malformed
    std::fs::write(&raw, json!({"id": "d", "headline": "h", "body": "x", "paragraphs": ["y"]}).to_string()).unwrap();
    assert_eq!(cli(&["prep", "--input", &p(&raw), "--out-dir", &p(&out)]).code, EXIT_FAILURE);
}

fn generate(corpus: &str, out: &Path, seed: &str, extra: &[&str]) -> common::Output {
    let mut args = vec!["generate", "--corpus", corpus, "--seed", seed, "--out-dir"];
    let out = p(out);
    args.push(&out);
    args.extend_from_slice(extra);
    cli(&args)
}

#[test]
fn generate_is_deterministic_in_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(dir.path(), 200);
    let runs = ["a", "b", "c"].map(|n| dir.path().join(n));
    for (run, seed) in runs.iter().zip(["7", "7", "8"]) {
        let o = generate(&corpus, run, seed, &["--per-class", "60", "--split", "0.5,0.25,0.25"]);
        assert_eq!(o.code, 0, "{}", o.stderr);
    }
    for f in ["train.jsonl", "dev.jsonl", "test.jsonl", "manifest.json"] {
        let a = std::fs::read(runs[0].join(f)).unwrap();
        assert_eq!(a, std::fs::read(runs[1].join(f)).unwrap(), "{f}");
        assert_ne!(a, std::fs::read(runs[2].join(f)).unwrap(), "{f}");
    }
    let m = RunManifest::read(runs[0].join("manifest.json")).unwrap();
    assert_eq!(m.details["counts"]["train"]["total"], 60);
    assert_eq!(m.details["counts"]["dev"]["incongruent"], 15);
    assert_eq!(m.outputs["train.jsonl"].sha256, FileDigest::of(runs[0].join("train.jsonl")).unwrap().sha256);
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(dir.path(), 200);
    let config = dir.path().join("gen.json");
    std::fs::write(&config, json!({"per-class": 40, "donor_max": 1, "split": [0.5, 0.3, 0.2], "mode": "replace"}).to_string()).unwrap();

    let from_file = dir.path().join("file");
    let o = generate(&corpus, &from_file, "1", &["--config", &p(&config)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let m = RunManifest::read(from_file.join("manifest.json")).unwrap();
    assert_eq!(m.settings["per_class"], 40);
    assert_eq!(m.settings["donor_max"], 1);
    assert_eq!(m.settings["mode"], "replace");
    assert_eq!(m.details["counts"]["test"]["total"], 16);

    let overridden = dir.path().join("flag");
    let o = generate(&corpus, &overridden, "1", &["--config", &p(&config), "--per-class", "30"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let m = RunManifest::read(overridden.join("manifest.json")).unwrap();
    assert_eq!(m.settings["per_class"], 30);
    assert_eq!(m.settings["donor_max"], 1);

    std::fs::write(&config, json!({"donor_maximum": 2}).to_string()).unwrap();
    assert_eq!(generate(&corpus, &overridden, "1", &["--config", &p(&config)]).code, EXIT_USAGE);
    std::fs::write(&config, "[1, 2]").unwrap();
    assert_eq!(generate(&corpus, &overridden, "1", &["--config", &p(&config)]).code, EXIT_USAGE);
    let absent = p(&dir.path().join("absent.json"));
    assert_eq!(generate(&corpus, &overridden, "1", &["--config", &absent]).code, EXIT_USAGE);
}

#[test]
fn ip_expand_writes_one_article_per_paragraph() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(dir.path(), 30);
    let out = dir.path().join("ip");
    ok(&["ip-expand", "--input", &corpus, "--out-dir", &p(&out)]);
    let before = read_corpus_vec(&corpus).unwrap();
    let after = read_corpus_vec(out.join("corpus.jsonl")).unwrap();
    assert_eq!(after.len(), before.iter().map(|a| a.paragraphs.len()).sum::<usize>());
    assert!(after.iter().all(|a| a.paragraphs.len() == 1));
    assert_eq!(cli(&["ip-expand", "--input", &corpus, "--input", &corpus, "--out-dir", &p(&out)]).code, EXIT_USAGE);
}

#[test]
fn train_eval_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab) = synth(dir.path(), 160);
    let data = dir.path().join("data");
    let o = generate(&corpus, &data, "3", &["--per-class", "60", "--donor-category", "different"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let [train, dev, test] = ["train", "dev", "test"].map(|s| p(&data.join(format!("{s}.jsonl"))));

    let run = dir.path().join("run");
    let o = ok(&[
        "train", "--model", "hrde", "--ip", "--train", &train, "--dev", &dev, "--vocab", &vocab, "--d-emb", "8", "--d-h", "8",
        "--epochs", "2", "--batch-size", "8", "--seed", "5", "--out-dir", &p(&run),
    ]);
    assert_eq!(o.stderr.matches("epoch ").count(), 2, "{}", o.stderr);
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    let m = RunManifest::read(run.join("manifest.json")).unwrap();
    assert_eq!(m.settings["model"]["kind"], "hrde");
    assert_eq!(m.details["history"].as_array().unwrap().len(), 2);
    let version = m.details["model_version"].as_str().unwrap().to_string();

    let model = p(&run.join("model.bwck"));
    let report_dir = dir.path().join("report");
    let o = ok(&["eval", "--model", &model, "--vocab", &vocab, "--data", &test, "--out-dir", &p(&report_dir)]);
    let report: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(report["n"], 12);
    assert!((0.0..=1.0).contains(&report["auroc"].as_f64().unwrap()));
    let on_disk: Value = serde_json::from_str(&std::fs::read_to_string(report_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);
    assert_eq!(std::fs::read_to_string(report_dir.join("scores.csv")).unwrap().lines().count(), 13);

    let (h, b) = (dir.path().join("h.txt"), dir.path().join("b.txt"));
    std::fs::write(&h, "t0w1 t0w2 t0w3\n").unwrap();
    std::fs::write(&b, "t0w4 t0w5 t0w6\n\nt1w1 t1w2 t1w3\n").unwrap();
    let o = ok(&["score", "--model", &model, "--vocab", &vocab, "--headline", &p(&h), "--body", &p(&b)]);
    let pred: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(pred["model_version"], version.as_str());
    assert_eq!(pred["paragraph_scores"].as_array().unwrap().len(), 2);
    let score = pred["score"].as_f64().unwrap();
    assert_eq!(pred["label"], if score >= 0.5 { "incongruent" } else { "congruent" });

    // vocabulary that does not match the checkpoint
    let other = dir.path().join("other.tsv");
    std::fs::write(&other, "<pad>\t0\n<unk>\t0\nx\t1\n").unwrap();
    let o = cli(&["score", "--model", &model, "--vocab", &p(&other), "--headline", &p(&h), "--body", &p(&b)]);
    assert_ne!(o.code, EXIT_OK);
}

#[test]
fn linear_baseline_trains_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab) = synth(dir.path(), 160);
    let data = dir.path().join("data");
    assert_eq!(generate(&corpus, &data, "3", &["--per-class", "60", "--donor-category", "different"]).code, 0);
    let run = dir.path().join("linear");
    ok(&[
        "train", "--model", "linear", "--train", &p(&data.join("train.jsonl")), "--dev", &p(&data.join("dev.jsonl")),
        "--vocab", &vocab, "--epochs", "50", "--seed", "1", "--out-dir", &p(&run),
    ]);
    let m = RunManifest::read(run.join("manifest.json")).unwrap();
    assert!(m.details["dev_auroc"].as_f64().is_some());
    let o = ok(&["eval", "--model", &p(&run.join("model.json")), "--vocab", &vocab, "--data", &p(&data.join("test.jsonl"))]);
    let report: Value = serde_json::from_str(&o.stdout).unwrap();
    assert!(report["auroc"].as_f64().unwrap() > 0.5, "{report}");
}

#[test]
fn divergence_keeps_the_last_good_state_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, vocab) = synth(dir.path(), 80);
    let data = dir.path().join("data");
    assert_eq!(generate(&corpus, &data, "3", &["--per-class", "30", "--donor-category", "different"]).code, 0);
    let run = dir.path().join("run");
    let o = cli(&[
        "train", "--model", "rde", "--train", &p(&data.join("train.jsonl")), "--vocab", &vocab, "--d-emb", "4", "--d-h", "4",
        "--epochs", "3", "--lr", "1e38", "--seed", "1", "--out-dir", &p(&run),
    ]);
    assert_eq!(o.code, EXIT_FAILURE, "{}", o.stderr);
    assert!(o.stderr.contains("divergence"), "{}", o.stderr);
    assert!(o.stderr.contains("lowering the learning rate"), "{}", o.stderr);
    assert!(run.join("model.bwck").exists());
    let m = RunManifest::read(run.join("manifest.json")).unwrap();
    assert!(m.details["diverged"].is_string());
}
