use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tps")).args(args).output().expect("tps runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn gen(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let p = dir.path().join(name);
    let mut all = vec!["generate", "--output", p.to_str().unwrap()];
    all.extend_from_slice(args);
    let out = tps(&all);
    assert!(out.status.success(), "{}", stderr(&out));
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn single_heavy_stream() {
    let dir = TempDir::new().unwrap();
    let p = gen(&dir, "h.txt", &["--kind", "single-heavy", "--n", "10", "--m", "100"]);
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n=10 model=insertion_only"));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 100);
    assert!(body.iter().all(|l| *l == "1"));
}

#[test]
fn generation_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = gen(&dir, "a.txt", &["--kind", "zipf(1.2)", "--n", "100", "--m", "20000", "--seed", "9"]);
    let b = gen(&dir, "b.txt", &["--kind", "zipf(1.2)", "--n", "100", "--m", "20000", "--seed", "9"]);
    let c = gen(&dir, "c.txt", &["--kind", "zipf(1.2)", "--n", "100", "--m", "20000", "--seed", "10"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn shuffled_and_window_headers() {
    let dir = TempDir::new().unwrap();
    let p = gen(&dir, "s.txt", &["--kind", "shuffled(2,2)", "--n", "2", "--m", "4"]);
    assert!(std::fs::read_to_string(p).unwrap().starts_with("n=2 model=random_order\n"));
    let p = gen(&dir, "w.txt", &["--kind", "sliding-trace", "--n", "50", "--m", "300", "--window", "40"]);
    assert!(std::fs::read_to_string(p).unwrap().starts_with("n=50 model=sliding_window W=40\n"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tps(&["generate", "--kind", "uniform", "--n", "0", "--m", "5"]).status.code(), Some(2));
    assert_eq!(tps(&["generate", "--kind", "nonsense", "--n", "3", "--m", "5"]).status.code(), Some(2));
    assert_eq!(tps(&["sample", "--sampler", "gsampler"]).status.code(), Some(2));
    assert_eq!(tps(&["verify", "no-such-battery"]).status.code(), Some(2));
    let out = tps(&["sample", "--input", "/nonexistent/stream.txt", "--sampler", "gsampler"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/stream.txt"), "{}", stderr(&out));
}

#[test]
fn invalid_parameters_are_rejected_before_running() {
    let dir = TempDir::new().unwrap();
    let p = gen(&dir, "z.txt", &["--kind", "uniform", "--n", "5", "--m", "50"]);
    assert_eq!(tps(&["sample", "--input", s(&p), "--sampler", "smallp", "--p", "3/2"]).status.code(), Some(2));
    assert_eq!(tps(&["sample", "--input", s(&p), "--sampler", "gsampler", "--delta", "1.5"]).status.code(), Some(2));
    assert_eq!(tps(&["sample", "--input", s(&p), "--sampler", "sw-lp"]).status.code(), Some(2));
    assert_eq!(tps(&["sample", "--input", s(&p), "--sampler", "matrix", "--measure", "l2"]).status.code(), Some(2));
}

#[test]
fn zero_trials_give_an_empty_histogram() {
    let dir = TempDir::new().unwrap();
    let p = gen(&dir, "z.txt", &["--kind", "zipf(1.2)", "--n", "20", "--m", "200"]);
    let out = tps(&["sample", "--input", s(&p), "--sampler", "gsampler", "--p", "2", "--trials", "0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["histogram"], serde_json::json!({}));
    assert_eq!(v["errors"], 0);
    assert_eq!(v["fail_rate"], 0.0);
    for key in ["sampler", "measure", "trials", "seed", "fail", "bottom", "wall_seconds", "updates_per_sec", "warnings"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn gsampler_fail_rate_within_delta() {
    let dir = TempDir::new().unwrap();
    let p = gen(&dir, "z.txt", &["--kind", "zipf(1.2)", "--n", "30", "--m", "300", "--seed", "3"]);
    let out = tps(&["sample", "--input", s(&p), "--sampler", "gsampler", "--p", "2", "--delta", "0.1", "--trials", "300", "--seed", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    let rate = v["fail_rate"].as_f64().unwrap();
    assert!(rate <= 0.1 + 4.0 * (0.09f64 / 300.0).sqrt(), "{rate}");
    let total: u64 = v["histogram"].as_object().unwrap().values().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(total + v["fail"].as_u64().unwrap(), 300);
}

#[test]
fn sampling_is_deterministic_under_a_seed() {
    let dir = TempDir::new().unwrap();
    let p = gen(&dir, "z.txt", &["--kind", "uniform", "--n", "8", "--m", "64"]);
    let run = || json(&tps(&["sample", "--input", s(&p), "--sampler", "f0", "--trials", "50", "--seed", "11"]));
    assert_eq!(run()["histogram"], run()["histogram"]);
}

#[test]
fn every_sampler_runs() {
    let dir = TempDir::new().unwrap();
    let ins = gen(&dir, "i.txt", &["--kind", "zipf(1.2)", "--n", "6", "--m", "40", "--seed", "5"]);
    let sw = gen(&dir, "w.txt", &["--kind", "zipf(1.2)", "--n", "6", "--m", "40", "--window", "12"]);
    let ro = gen(&dir, "r.txt", &["--kind", "shuffled(5,3,2)", "--n", "3", "--m", "10"]);
    let turn = write(&dir, "t.txt", "n=4 model=strict_turnstile\n1 3\n2 2\n1 -1\n4 1\n");
    let mat = write(&dir, "m.txt", "n=3 model=insertion_only d=2\n1 1 1\n2 2 1\n1 2 1\n3 1 1\n");
    let cases: Vec<(PathBuf, Vec<&str>)> = vec![
        (ins.clone(), vec!["--sampler", "gsampler", "--measure", "huber", "--tau", "2"]),
        (ins.clone(), vec!["--sampler", "f0"]),
        (ins.clone(), vec!["--sampler", "tukey", "--tau", "2"]),
        (ins.clone(), vec!["--sampler", "smallp", "--p", "1/2", "--duplication", "32"]),
        (sw.clone(), vec!["--sampler", "sw-gsampler", "--measure", "l1l2"]),
        (sw.clone(), vec!["--sampler", "sw-lp", "--p", "3/2"]),
        (ro, vec!["--sampler", "random-order", "--p", "2"]),
        (turn, vec!["--sampler", "multipass", "--p", "2", "--passes-gamma", "1/2"]),
        (mat, vec!["--sampler", "matrix", "--measure", "l2"]),
    ];
    for (path, extra) in cases {
        let mut args = vec!["sample", "--input", s(&path), "--trials", "20"];
        args.extend(extra.iter());
        let out = tps(&args);
        assert!(out.status.success(), "{extra:?}: {}", stderr(&out));
        let v = json(&out);
        let drawn: u64 = v["histogram"].as_object().unwrap().values().map(|c| c.as_u64().unwrap()).sum();
        assert_eq!(drawn + v["fail"].as_u64().unwrap() + v["bottom"].as_u64().unwrap() + v["errors"].as_u64().unwrap(), 20, "{extra:?}");
        assert_eq!(v["errors"], 0, "{extra:?}: {v}");
    }
}

#[test]
fn random_order_on_unshuffled_input_warns() {
    let dir = TempDir::new().unwrap();
    let p = gen(&dir, "z.txt", &["--kind", "zipf(1.2)", "--n", "10", "--m", "100"]);
    let out = tps(&["sample", "--input", s(&p), "--sampler", "random-order", "--p", "2", "--trials", "5"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("precondition"), "{}", stderr(&out));
    let q = gen(&dir, "s.txt", &["--kind", "shuffled", "--n", "10", "--m", "100"]);
    let out = tps(&["sample", "--input", s(&q), "--sampler", "random-order", "--p", "2", "--trials", "5"]);
    assert!(!stderr(&out).contains("precondition"));
    let out = tps(&["verify", "mc-random-order", "--stream", "zipf(1.2)"]);
    assert!(stderr(&out).contains("precondition"), "{}", stderr(&out));
}

#[test]
fn verify_passes_on_exact_batteries() {
    let out = tps(&["verify", "insertion-small", "window-small", "multipass-small"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["results"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_catches_mutants() {
    for m in ["inclusive-forward", "strictly-after-backward"] {
        let out = tps(&["verify", "insertion-small", "--mutant", m]);
        assert_eq!(out.status.code(), Some(1), "{m}");
        let v = json(&out);
        assert!(v["results"][0]["mismatches"].as_u64().unwrap() > 0, "{m}");
    }
    // counting the sampled occurrence and differencing backwards is the same sampler
    let out = tps(&["verify", "insertion-small", "--mutant", "inclusive-backward"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_lists_and_renders_tables() {
    let out = tps(&["verify", "--list"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["groups"]["quick"].as_array().unwrap().len() > 3);
    let out = tps(&["verify", "random-order-small", "--format", "table"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("battery"), "{text}");
    assert!(text.contains("random-order-small  pass"), "{text}");
}

#[test]
fn bench_reports_both_sizes() {
    let out = tps(&["bench", "--r", "8", "--updates", "20000"]);
    assert!(matches!(out.status.code(), Some(0) | Some(1)));
    let v = json(&out);
    assert_eq!(v["r"], 8);
    assert!(v["updates_per_sec_r"].as_f64().unwrap() > 0.0);
    assert!(v["updates_per_sec_10r"].as_f64().unwrap() > 0.0);
    assert_eq!(v["within_2x"].as_bool().unwrap(), out.status.code() == Some(0));
}
