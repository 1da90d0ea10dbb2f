//! End-to-end runs of the `bipro` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bipro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bipro")).args(args).env_remove("BIPRO_MODEL_URL").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(stdout(o).trim()).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

const GENERATE: [&str; 9] = ["generate", "--title", "春山", "--format", "5-jueju", "--model", "mock", "--seed", "7"];

#[test]
fn generate_is_deterministic_and_matches_the_golden_output() {
    let a = bipro(&GENERATE);
    let b = bipro(&GENERATE);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let golden = fixture("generate_seed7.json");
    if std::env::var_os("BIPRO_BLESS").is_some() {
        std::fs::write(&golden, &a.stdout).unwrap();
    }
    assert_eq!(stdout(&a), std::fs::read_to_string(golden).unwrap());
    let poem = json(&a);
    assert_eq!(poem["title"], "春山");
    assert_eq!(poem["sentences"].as_array().unwrap().len(), 4);
}

#[test]
fn generated_poem_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poem.json");
    std::fs::write(&path, bipro(&GENERATE).stdout).unwrap();
    let out = bipro(&["verify", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["valid"], true);
}

fn trace_kinds(extra: &[&str]) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let mut args = GENERATE.to_vec();
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--trace-out", trace.to_str().unwrap()]);
    let out = bipro(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read_to_string(trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["kind"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn zero_rewrites_leave_no_rewrite_events() {
    let kinds = trace_kinds(&["--max-rewrites", "0"]);
    assert!(kinds.iter().all(|k| k != "rewritten"));
    assert_eq!(kinds.iter().filter(|k| *k == "generated").count(), 4);
}

#[test]
fn direct_generation_only_generates() {
    assert_eq!(trace_kinds(&["--direct"]), vec!["generated"; 4]);
}

#[test]
fn exhaustion_exits_2_with_a_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let dict = dir.path().join("ping.tsv");
    std::fs::write(&dict, "东\tP\t1\n风\tP\t1\n红\tP\t1\n").unwrap();
    let out = bipro(&["generate", "--title", "东风", "--dict", dict.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code(&out), 2);
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "exhausted");
    assert!(out.stdout.is_empty());
}

#[test]
fn verify_exit_codes() {
    let ok = bipro(&["verify", fixture("valid_poem.json").to_str().unwrap()]);
    assert_eq!(code(&ok), 0);
    assert_eq!(json(&ok), serde_json::json!({ "valid": true, "violations": [] }));

    let bad = bipro(&["verify", fixture("three_sentences.json").to_str().unwrap()]);
    assert_eq!(code(&bad), 3);
    let v = json(&bad);
    assert_eq!(v["valid"], false);
    assert_eq!(v["violations"][0]["rule"], 1);

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&bipro(&["verify", empty.to_str().unwrap()])), 1);
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"title":"t","sentences":["雨鸟山天X","春风雨树东","山人秋酒月","水雨草花红"]}"#)
        .unwrap();
    let out = bipro(&["verify", unknown.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains('X'));
    assert_eq!(code(&bipro(&["verify", "/nonexistent/poem.json"])), 1);
}

#[test]
fn cost_examples() {
    let run = |args: &[&str]| {
        let mut all = vec!["cost"];
        all.extend_from_slice(args);
        let out = bipro(&all);
        (code(&out), stdout(&out).trim().to_string())
    };
    assert_eq!(
        run(&["--n", "8", "--s", "7", "--m", "10", "--t", "5", "--k", "6", "--mode", "full"]),
        (0, "6912".into())
    );
    assert_eq!(run(&["--k", "6", "--t", "5", "--s", "7", "--mode", "single"]), (0, "72".into()));
    assert_eq!(run(&["--n", "1", "--k", "1", "--t", "1", "--s", "1", "--mode", "with-revise"]), (0, "4".into()));
    assert_eq!(run(&["--k", "0", "--t", "5", "--s", "7", "--mode", "single"]).0, 1);
    assert_eq!(run(&["--k", "-3", "--t", "5", "--s", "7", "--mode", "single"]).0, 1);
    assert_eq!(run(&["--t", "5", "--s", "7", "--mode", "single"]).0, 1);
}

fn eval(reviews: &Path, manifest: &Path) -> Output {
    bipro(&["eval", "--reviews", reviews.to_str().unwrap(), "--manifest", manifest.to_str().unwrap()])
}

/// Mean and sample deviation, formatted like the table.
fn cell(values: &[f64]) -> String {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    format!("{mean:.4},{sd:.4}")
}

#[test]
fn eval_table_matches_recomputation() {
    let out = eval(&fixture("reviews.csv"), &fixture("manifest.csv"));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    let reviews = std::fs::read_to_string(fixture("reviews.csv")).unwrap();
    let rows: Vec<Vec<&str>> = reviews.lines().skip(1).map(|l| l.split(',').collect()).collect();
    for (i, (system, poem)) in [("bipro", "p1"), ("direct", "p2"), ("human", "p3")].iter().enumerate() {
        let mine: Vec<&Vec<&str>> = rows.iter().filter(|r| r[1] == *poem).collect();
        let mut expected = format!("{system},{},1", mine.len());
        for col in 2..7 {
            let values: Vec<f64> = mine.iter().map(|r| r[col].parse().unwrap()).collect();
            expected.push(',');
            expected.push_str(&cell(&values));
        }
        assert!(lines[i + 1].starts_with(&expected), "{} vs {expected}", lines[i + 1]);
    }
    let ar_start = text.find('[').unwrap();
    let ar: serde_json::Value = serde_json::from_str(&text[ar_start..]).unwrap();
    assert_eq!(ar.as_array().unwrap().len(), 3);
    for p in ar.as_array().unwrap() {
        let v = p["ar"].as_f64().unwrap();
        assert!((1.25..=9.75).contains(&v));
    }
}

#[test]
fn eval_ignores_row_order() {
    let dir = tempfile::tempdir().unwrap();
    let original = std::fs::read_to_string(fixture("reviews.csv")).unwrap();
    let mut lines: Vec<&str> = original.lines().collect();
    let header = lines.remove(0);
    lines.reverse();
    lines.rotate_left(3);
    let permuted = dir.path().join("reviews.csv");
    std::fs::write(&permuted, format!("{header}\n{}\n", lines.join("\n"))).unwrap();
    let a = eval(&fixture("reviews.csv"), &fixture("manifest.csv"));
    let b = eval(&permuted, &fixture("manifest.csv"));
    assert_eq!(code(&b), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn eval_single_reviewer_has_zero_deviation_and_bad_schema_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    std::fs::write(
        &one,
        "reviewer_id,poem_id,format,informativeness,relevance,aesthetics,overall,predicted\nr,p1,4,3,2,5,6,7\n",
    )
    .unwrap();
    let out = eval(&one, &fixture("manifest.csv"));
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).lines().nth(1).unwrap().starts_with("bipro,1,1,4.0000,0.0000,3.0000,0.0000"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "reviewer_id,poem_id,format,informativeness,relevance,aesthetics,overall\nr,p1,4,3,2,5,6\n")
        .unwrap();
    let out = eval(&bad, &fixture("manifest.csv"));
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("predicted"));
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bipro.toml");
    std::fs::write(&config, "seed = 7\nbeam_size = 3\nmax_rewrites = 1\n").unwrap();
    let cfg = config.to_str().unwrap();
    let from_config = bipro(&["--config", cfg, "generate", "--title", "春山"]);
    let from_flags = bipro(&["generate", "--title", "春山", "--seed", "7", "--beam-size", "3", "--max-rewrites", "1"]);
    assert_eq!(code(&from_config), 0);
    assert_eq!(from_config.stdout, from_flags.stdout);
    let overridden = bipro(&["--config", cfg, "generate", "--title", "春山", "--seed", "9"]);
    let flags_only = bipro(&["generate", "--title", "春山", "--seed", "9", "--beam-size", "3", "--max-rewrites", "1"]);
    assert_eq!(overridden.stdout, flags_only.stdout);
    assert_ne!(overridden.stdout, from_config.stdout);
    let defaults = bipro(&["generate", "--title", "春山", "--seed", "7"]);
    let explicit = bipro(&[
        "generate",
        "--title",
        "春山",
        "--seed",
        "7",
        "--beam-size",
        "6",
        "--max-rewrites",
        "20",
        "--alpha-title",
        "0.5",
    ]);
    assert_eq!(defaults.stdout, explicit.stdout);

    std::fs::write(&config, "beam_size = 0\n").unwrap();
    assert_eq!(code(&bipro(&["--config", cfg, "generate", "--title", "春山"])), 1);
    std::fs::write(&config, "unknown_key = 1\n").unwrap();
    assert_eq!(code(&bipro(&["--config", cfg, "generate", "--title", "春山"])), 1);
}

#[test]
fn remote_without_url_is_a_config_error() {
    let out = bipro(&["generate", "--title", "春山", "--model", "remote"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("BIPRO_MODEL_URL"));
}

#[test]
fn score_prints_the_sentence_score() {
    let out = bipro(&["score", fixture("valid_poem.json").to_str().unwrap(), "--sentence", "2", "--phase", "revise"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["sentence"], 2);
    assert_eq!(v["phase"], "revise");
    assert!(v["score"].as_f64().unwrap() < 0.0);
    let again = bipro(&["score", fixture("valid_poem.json").to_str().unwrap(), "--sentence", "2", "--phase", "revise"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn batch_generation_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let titles = dir.path().join("titles.txt");
    std::fs::write(&titles, "春山\n秋月\n\n山水\n").unwrap();
    let t = titles.to_str().unwrap();
    let one = bipro(&["generate", "--titles-file", t, "--jobs", "1", "--max-rewrites", "1"]);
    let three = bipro(&["generate", "--titles-file", t, "--jobs", "3", "--max-rewrites", "1"]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, three.stdout);
    assert_eq!(stdout(&one).lines().count(), 3);
}

#[test]
fn help_documents_the_flags() {
    let top = stdout(&bipro(&["--help"]));
    for cmd in ["generate", "verify", "score", "cost", "eval"] {
        assert!(top.contains(cmd), "{cmd}");
    }
    let gen = bipro(&["generate", "--help"]);
    assert_eq!(code(&gen), 0);
    let text = stdout(&gen);
    for flag in [
        "--config",
        "--dict",
        "--model",
        "--seed",
        "--title",
        "--format",
        "--beam-size",
        "--max-rewrites",
        "--alpha-title",
        "--direct",
        "--trace-out",
        "BIPRO_MODEL_URL",
    ] {
        assert!(text.contains(flag), "generate --help lacks {flag}");
    }
    for cmd in ["verify", "score", "cost", "eval"] {
        let out = bipro(&[cmd, "--help"]);
        assert_eq!(code(&out), 0);
        for flag in ["--config", "--dict", "--model", "--seed"] {
            assert!(stdout(&out).contains(flag), "{cmd} --help lacks {flag}");
        }
    }
    assert_eq!(code(&bipro(&["generate"])), 1);
}
