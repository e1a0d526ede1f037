use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use authcil::RunReport;

fn authcil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_authcil"))
        .args(args)
        .env_remove(authcil::config::OUTPUT_DIR_ENV)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = authcil(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    corpus: PathBuf,
    manifest: PathBuf,
    config: PathBuf,
}

/// Small synthetic corpus split into two sessions, plus a fast config.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let corpus = root.join("corpus.jsonl");
    let manifest = root.join("manifest.json");
    let config = root.join("run.toml");
    ok(&["synth-corpus", "--authors", "4", "--docs", "10", "--seed", "1", "--out", p(&corpus)]);
    std::fs::write(
        &config,
        "seed = 1\n[sessions]\nratios = [0.5, 0.5]\n[features]\ndim = 256\n[train]\nepochs = 2\nhidden_dim = 8\n",
    )
    .unwrap();
    ok(&["build-sessions", "--config", p(&config), "--corpus", p(&corpus), "--out", p(&manifest)]);
    Fixture {
        _dir: dir,
        root,
        corpus,
        manifest,
        config,
    }
}

fn is_row(line: &str) -> bool {
    line.starts_with('s') && line[1..].starts_with(|c: char| c.is_ascii_digit())
}

#[test]
fn build_sessions_prints_table_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    ok(&["synth-corpus", "--authors", "50", "--docs", "100", "--words", "5", "--out", p(&corpus)]);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = |out: &Path| {
        vec![
            "build-sessions".to_string(),
            "--corpus".into(),
            p(&corpus).into(),
            "--ratios".into(),
            "0.5,0.1,0.1,0.1,0.1,0.1".into(),
            "--seed".into(),
            "3".into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    let out = ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let rows: Vec<Vec<&str>> = out
        .lines()
        .filter(|l| is_row(l))
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert_eq!(rows[0][..5], ["s0", "25", "1500", "500", "500"]);
    for r in &rows[1..6] {
        assert_eq!(r[1..5], ["5", "300", "100", "100"]);
    }
    assert_eq!(rows[5][6..], ["50", "1000"]);

    let one = dir.path().join("one.json");
    let out = ok(&["build-sessions", "--corpus", p(&corpus), "--ratios", "1.0", "--out", p(&one)]);
    assert_eq!(out.lines().filter(|l| is_row(l)).count(), 1);
}

#[test]
fn train_writes_per_session_artifacts() {
    let f = fixture();
    let run = f.root.join("run-ft");
    let out = ok(&[
        "train", "--config", p(&f.config), "--manifest", p(&f.manifest), "--strategy", "FT",
        "--run-dir", p(&run),
    ]);
    assert!(out.contains("PD"));
    for name in ["run.json", "report.json", "report.csv", "model_s0.json", "model_s1.json", "state_s1.json", "confusion_s1.csv"] {
        assert!(run.join(name).exists(), "{name}");
    }
    let report = RunReport::load(&run.join("report.json")).unwrap();
    assert_eq!(report.sessions.len(), 2);
    assert_eq!(report.strategy, "FT");
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("model_s1.json")).unwrap()).unwrap();
    assert_eq!(model["config_hash"], report.config_hash.as_str());

    let eval = ok(&["eval", "--manifest", p(&f.manifest), "--model", p(&run.join("model_s1.json"))]);
    let acc = format!("accuracy {:.2}", report.sessions[1].accuracy);
    assert!(eval.contains(&acc), "{eval}");
}

#[test]
fn train_uses_timestamped_dirs_and_env_override() {
    let f = fixture();
    let out_root = f.root.join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_authcil"))
        .args(["train", "--config", p(&f.config), "--corpus", p(&f.corpus), "--strategy", "FT+", "--seeds", "1,2"])
        .env(authcil::config::OUTPUT_DIR_ENV, &out_root)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&out_root)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 2);
    assert!(names[0].starts_with("run-") && names[0].ends_with("-FTp-s1"), "{names:?}");
    assert!(names[1].ends_with("-FTp-s2"));
}

#[test]
fn resume_matches_uninterrupted_run() {
    let f = fixture();
    let full = f.root.join("full");
    let part = f.root.join("part");
    let base = ["train", "--config", p(&f.config), "--manifest", p(&f.manifest), "--strategy", "EWC"];
    ok(&[&base[..], &["--run-dir", p(&full)]].concat());
    ok(&[&base[..], &["--run-dir", p(&part)]].concat());
    std::fs::remove_file(part.join("model_s1.json")).unwrap();
    ok(&[&base[..], &["--run-dir", p(&part), "--resume-from", "1"]].concat());
    for name in ["model_s1.json", "state_s1.json", "report.json", "report.csv"] {
        assert_eq!(std::fs::read(full.join(name)).unwrap(), std::fs::read(part.join(name)).unwrap(), "{name}");
    }

    // A different config cannot resume this run.
    let o = authcil(&[&base[..], &["--run-dir", p(&part), "--resume-from", "1", "--epochs", "3"]].concat());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config hash mismatch"));
}

#[test]
fn compare_reports() {
    let f = fixture();
    let mut reports = Vec::new();
    for s in ["FT", "FT_E2"] {
        let dir = f.root.join(s);
        ok(&["train", "--config", p(&f.config), "--manifest", p(&f.manifest), "--strategy", s, "--run-dir", p(&dir)]);
        reports.push(dir.join("report.json"));
    }
    let table = ok(&["compare", p(&reports[0]), p(&reports[1])]);
    assert_eq!(table.lines().count(), 4);
    assert_eq!(table.matches("**").count(), 2 * table.lines().filter(|l| l.contains("**")).count());
    let r0 = RunReport::load(&reports[0]).unwrap();
    assert!(table.contains(&format!("| FT | 1 | {:.2} |", r0.sessions[0].accuracy)));
}

#[test]
fn inspect_manifest_verifies() {
    let f = fixture();
    let out = ok(&["inspect-manifest", p(&f.manifest)]);
    assert!(out.contains("(verified)"));
    let text = std::fs::read_to_string(&f.manifest).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["sessions"][0]["entries"][0]["texts"][0] = "tampered".into();
    std::fs::write(&f.manifest, json.to_string()).unwrap();
    let o = authcil(&["inspect-manifest", p(&f.manifest)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let f = fixture();
    let o = authcil(&["train", "--manifest", p(&f.manifest), "--strategy", "GEM"]);
    assert_eq!(o.status.code(), Some(1));
    let o = authcil(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = authcil(&["inspect-manifest", p(&f.root.join("missing.json"))]);
    assert_eq!(o.status.code(), Some(2));
    // A huge penalty weight blows the parameters up within a few steps.
    let boom = f.root.join("boom.toml");
    let text = std::fs::read_to_string(&f.config).unwrap();
    std::fs::write(&boom, text + "[strategy]\nkind = \"MAS\"\nlambda_reg = 1e300\n").unwrap();
    let o = authcil(&[
        "train", "--config", p(&boom), "--manifest", p(&f.manifest), "--epochs", "5",
        "--run-dir", p(&f.root.join("boom")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(authcil(&["--help"]).status.code(), Some(0));
}
