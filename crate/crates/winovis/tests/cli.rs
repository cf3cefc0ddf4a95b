use std::path::Path;
use std::process::{Command, Output};

use winovis::bundle_io::{load_bundle, save_stack, StackFile, StackSlice};
use winovis::instances::write_instances;
use winovis_core::corpus::WinoVisInstance;
use winovis_core::{aggregate_all, Pathway, SliceKey, TokenRole};

fn winovis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_winovis")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn synth_then_evaluate_is_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    let ev = dir.path().join("ev");
    assert_eq!(winovis(&["synth-fixtures", "--count", "60", "--seed", "5", "--out", s(&fx)]).status.code(), Some(0));
    let bundles = fx.join("bundles");
    let out = winovis(&[
        "evaluate",
        "--bundles",
        s(&bundles),
        "--instances",
        s(&fx.join("instances.jsonl")),
        "--out",
        s(&ev),
        "--jobs",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(fx.join("expected_verdicts.csv")), read(ev.join("verdicts.csv")));
    assert_eq!(read(ev.join("errors.csv")), b"instance_id,error\n");
    let report: serde_json::Value = serde_json::from_slice(&read(ev.join("report.json"))).unwrap();
    assert_eq!(report["counts"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum::<u64>(), 60);
}

#[test]
fn format_flag_limits_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    winovis(&["synth-fixtures", "--count", "10", "--out", s(&fx)]);
    let (ev, bundles, instances) = (dir.path().join("ev"), fx.join("bundles"), fx.join("instances.jsonl"));
    let out = winovis(&["evaluate", "--bundles", s(&bundles), "--instances", s(&instances), "--out", s(&ev), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(ev.join("report.json").exists() && !ev.join("verdicts.csv").exists());
}

#[test]
fn missing_bundles_give_partial_exit() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    winovis(&["synth-fixtures", "--count", "10", "--out", s(&fx)]);
    let bundles = fx.join("bundles");
    let victim = std::fs::read_dir(&bundles).unwrap().next().unwrap().unwrap().path();
    std::fs::remove_file(&victim).unwrap();
    let ev = dir.path().join("ev");
    let out = winovis(&["evaluate", "--bundles", s(&bundles), "--instances", s(&fx.join("instances.jsonl")), "--out", s(&ev)]);
    assert_eq!(out.status.code(), Some(2));
    let errors = String::from_utf8(read(ev.join("errors.csv"))).unwrap();
    assert!(errors.contains("missing bundle"), "{errors}");
    let verdicts = String::from_utf8(read(ev.join("verdicts.csv"))).unwrap();
    assert_eq!(verdicts.lines().count(), 10);

    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = winovis(&["evaluate", "--bundles", s(&empty), "--instances", s(&fx.join("instances.jsonl")), "--out", s(&ev)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_bundle_is_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    winovis(&["synth-fixtures", "--count", "5", "--out", s(&fx)]);
    std::fs::write(fx.join("bundles").join("zz.wvhm"), b"WVHM\x01\x00garbage").unwrap();
    let ev = dir.path().join("ev");
    let out = winovis(&["evaluate", "--bundles", s(&fx.join("bundles")), "--instances", s(&fx.join("instances.jsonl")), "--out", s(&ev)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(read(ev.join("errors.csv"))).unwrap().contains("zz.wvhm"));
}

#[test]
fn bad_configuration_fails_hard() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[pipeline]\nquantile = 2.0\n").unwrap();
    assert_eq!(winovis(&["--config", s(&cfg), "evaluate"]).status.code(), Some(1));
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    assert_eq!(winovis(&["--config", s(&cfg), "evaluate"]).status.code(), Some(1));
    assert_eq!(winovis(&["evaluate", "--decision-threshold", "-1"]).status.code(), Some(1));
    assert_eq!(winovis(&["evaluate"]).status.code(), Some(1));
    assert_eq!(winovis(&["evaluate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(winovis(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_supplies_paths() {
    let dir = tempfile::tempdir().unwrap();
    winovis(&["synth-fixtures", "--count", "8", "--out", s(&dir.path().join("fx"))]);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "formats = [\"csv\"]\n[paths]\ninstances = \"fx/instances.jsonl\"\nbundles = \"fx/bundles\"\nout = \"ev\"\n").unwrap();
    let out = winovis(&["--config", s(&cfg), "evaluate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("ev/verdicts.csv").exists());
    assert!(!dir.path().join("ev/report.json").exists());
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = winovis(&["synth-fixtures", "--count", "4", "--out", s(&dir.path().join("fx")), "--dry-run"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("would write"));
    assert!(!dir.path().join("fx").exists());
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(winovis(&["synth-fixtures", "--out", s(d)]).status.code(), Some(0));
    }
    assert_eq!(read(a.join("instances.jsonl")), read(b.join("instances.jsonl")));
    assert_eq!(read(a.join("expected_verdicts.csv")), read(b.join("expected_verdicts.csv")));
    let mut names: Vec<_> = std::fs::read_dir(a.join("bundles")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 100);
    for n in names {
        assert_eq!(read(a.join("bundles").join(&n)), read(b.join("bundles").join(&n)));
    }
}

#[test]
fn zero_fixtures_is_fine() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(winovis(&["synth-fixtures", "--count", "0", "--out", s(dir.path())]).status.code(), Some(0));
    assert_eq!(read(dir.path().join("expected_verdicts.csv")).iter().filter(|b| **b == b'\n').count(), 1);
    assert!(read(dir.path().join("instances.jsonl")).is_empty());
}

fn sample_stack(id: &str, with_roles: bool) -> StackFile {
    let tokens: Vec<String> = ["The", "dog", "chased", "cat", "it"].iter().map(|t| t.to_string()).collect();
    let slices = (0..3u32)
        .map(|k| StackSlice {
            key: SliceKey { pathway: if k == 1 { Pathway::Up } else { Pathway::Down }, timestep: k, layer: 0, head: k },
            grid_w: 4,
            grid_h: 4,
            grids: (0..tokens.len()).map(|t| (0..16).map(|c| ((c * (t + 1) + k as usize) % 7) as f32 * 0.1).collect()).collect(),
        })
        .collect();
    let roles = with_roles.then(|| {
        [("dog", TokenRole::Entity1), ("cat", TokenRole::Entity2), ("it", TokenRole::Pronoun)]
            .iter()
            .map(|(t, r)| (t.to_string(), *r))
            .collect()
    });
    StackFile { instance_id: id.into(), tokens, slices, roles }
}

#[test]
fn aggregate_matches_library_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let stacks = dir.path().join("stacks");
    std::fs::create_dir(&stacks).unwrap();
    let with_roles = sample_stack("withroles", true);
    save_stack(&stacks.join("a.wvas"), &with_roles).unwrap();
    save_stack(&stacks.join("b.wvas"), &sample_stack("fromcorpus", false)).unwrap();
    let inst = WinoVisInstance::new("The dog chased the cat because it was fast.", "it", "it was fast", ["the dog", "the cat"], 0, "");
    let inst = WinoVisInstance { id: "fromcorpus".into(), ..inst };
    let instances = dir.path().join("i.jsonl");
    let mut buf = Vec::new();
    write_instances(&mut buf, &[inst]).unwrap();
    std::fs::write(&instances, buf).unwrap();

    let out_dir = dir.path().join("out");
    let out = winovis(&["aggregate", "--stacks", s(&stacks), "--instances", s(&instances), "--out", s(&out_dir), "--out-size", "16x8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let expected = aggregate_all(&with_roles.attention_stack().unwrap(), 16, 8).unwrap();
    let got = load_bundle(&out_dir.join("withroles.wvhm")).unwrap();
    assert_eq!((got.width, got.height), (16, 8));
    for (g, e) in got.grids.iter().zip(expected.heatmaps()) {
        assert_eq!(g, &e.to_f32());
    }
    let derived = load_bundle(&out_dir.join("fromcorpus.wvhm")).unwrap();
    assert_eq!(derived.roles, with_roles.roles.unwrap());
}

#[test]
fn aggregate_empty_and_corrupt_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let stacks = dir.path().join("stacks");
    std::fs::create_dir(&stacks).unwrap();
    let out_dir = dir.path().join("out");
    assert_eq!(winovis(&["aggregate", "--stacks", s(&stacks), "--out", s(&out_dir)]).status.code(), Some(2));

    save_stack(&stacks.join("good.wvas"), &sample_stack("good", true)).unwrap();
    std::fs::write(stacks.join("bad.wvas"), b"WVAS\x01\x00\xff\xff\xff\xff").unwrap();
    let out = winovis(&["aggregate", "--stacks", s(&stacks), "--out", s(&out_dir), "--out-size", "8x8"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.wvas"));
    assert!(out_dir.join("good.wvhm").exists());

    save_stack(&stacks.join("bad.wvas"), &sample_stack("../escape", true)).unwrap();
    assert_eq!(winovis(&["aggregate", "--stacks", s(&stacks), "--out", s(&out_dir), "--out-size", "8x8"]).status.code(), Some(1));
    assert!(!dir.path().join("escape.wvhm").exists());
}

#[test]
fn calibrate_writes_curve_and_selects() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("l.csv");
    let mut text = String::from("instance_id,iou_value,human_positive\n");
    for i in 0..10 {
        text += &format!("p{i},{},1\nn{i},{},0\n", 0.5 + i as f64 * 0.04, 0.02 + i as f64 * 0.03);
    }
    std::fs::write(&labels, text).unwrap();
    let out = winovis(&["calibrate", "--labels", s(&labels), "--out", s(dir.path()), "--grid-start", "0.4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("selected threshold 0.40"));
    let curve = String::from_utf8(read(dir.path().join("agreement_curve.csv"))).unwrap();
    assert!(curve.starts_with("threshold,agreement\n0.40,1\n"), "{curve}");

    std::fs::write(&labels, "instance_id,iou_value,human_positive\n").unwrap();
    assert_eq!(winovis(&["calibrate", "--labels", s(&labels), "--out", s(dir.path())]).status.code(), Some(1));
}

fn corpus_file(dir: &Path, instances: &[WinoVisInstance]) -> std::path::PathBuf {
    let p = dir.join("corpus.jsonl");
    let mut buf = Vec::new();
    write_instances(&mut buf, instances).unwrap();
    std::fs::write(&p, buf).unwrap();
    p
}

#[test]
fn validate_corpus_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let good = WinoVisInstance::new("The king banished the jester because he was annoying.", "he", "he was annoying", ["king", "jester"], 1, "");
    let path = corpus_file(dir.path(), std::slice::from_ref(&good));
    let out = winovis(&["validate-corpus", "--instances", s(&path), "--out", s(&dir.path().join("v"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    let bad = WinoVisInstance::new("The king banished the jester because the king was annoying.", "he", "the king was annoying", ["king", "jester"], 1, "");
    let twin = WinoVisInstance::new("The king banished the jester because he was annoying!", "he", "he was annoying", ["king", "jester"], 1, "");
    let path = corpus_file(dir.path(), &[good, bad, twin]);
    let out = winovis(&["validate-corpus", "--instances", s(&path), "--out", s(&dir.path().join("v"))]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("violation"), "{stdout}");
    assert!(stdout.contains("review"), "{stdout}");
    let red = String::from_utf8(read(dir.path().join("v/redundancy.csv"))).unwrap();
    // Header plus all three pairs: the twins match exactly, the rewrite scores 7/8.
    assert_eq!(red.lines().count(), 4, "{red}");
}

const TRANSCRIPT: &str = r#"[
  {"error": "rate limited"},
  "1. {\"statement\": \"The cat watched the vase because it was curious.\", \"pronoun\": \"it\", \"snippet\": \"it was curious\", \"options\": [\"cat\", \"vase\"], \"answer\": 0, \"reason\": \"r\"}\n2. {\"statement\": \"bad\", \"pronoun\": \"it\"}",
  "{\"statement\": \"The dog chased the ball because it was playful.\", \"pronoun\": \"it\", \"snippet\": \"it was playful\", \"options\": [\"dog\", \"ball\"], \"answer\": 0, \"reason\": \"r\"}"
]"#;

#[test]
fn generate_corpus_with_mock_transcript_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("t.json");
    std::fs::write(&script, TRANSCRIPT).unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[llm]\nbackoff_ms = 0\n").unwrap();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = winovis(&[
            "--config", s(&cfg), "generate-corpus", "--transcript", s(&script), "--target", "2", "--batch-size", "2", "--out", s(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        runs.push((read(out_dir.join("candidates.jsonl")), read(out_dir.join("audit.jsonl"))));
    }
    assert_eq!(runs[0], runs[1]);
    let candidates = String::from_utf8(runs[0].0.clone()).unwrap();
    assert_eq!(candidates.lines().count(), 2);
    let audit = String::from_utf8(runs[0].1.clone()).unwrap();
    let first: serde_json::Value = serde_json::from_str(audit.lines().next().unwrap()).unwrap();
    assert_eq!(first["attempts"], 2);
    assert_eq!(first["rejections"].as_array().unwrap().len(), 1);

    let out = winovis(&["generate-corpus", "--transcript", s(&script), "--target", "5", "--out", s(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(read(dir.path().join("c/candidates.jsonl")).iter().filter(|b| **b == b'\n').count(), 2);
}

#[test]
fn generate_corpus_needs_key_for_http() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_winovis"))
        .args(["generate-corpus", "--out", s(dir.path())])
        .env_remove("WINOVIS_LLM_API_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("WINOVIS_LLM_API_KEY"));
}

#[test]
fn compare_prints_ztests() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |name: &str, c: u64, i: u64, n: u64| {
        let p = dir.path().join(name);
        let report = serde_json::json!({
            "counts": {"captioned": 0, "overlapped": 0, "correct": c, "incorrect": i, "neither": n},
            "precision": null, "recall": null, "f1": null, "certainty": null,
            "confusion": {"c11": 0, "c12": 0, "c21": 0, "c22": 0},
            "multiclass": {"accuracy": null, "macro_precision": null, "macro_recall": null, "macro_f1": null},
            "shares": {"captioned": 0.0, "overlapped": 0.0, "correct": 0.0, "incorrect": 0.0, "neither": 0.0},
            "low_support": false, "per_category": {}
        });
        std::fs::write(&p, report.to_string()).unwrap();
        p
    };
    let a = mk("a.json", 55, 42, 172);
    let b = mk("b.json", 38, 31, 260);
    let out = winovis(&["compare", s(&a), s(&b)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("recall,55/227,38/298,3.4"), "{text}");
}
