use authcil::compare::compare_table;
use authcil::config::RunConfig;
use authcil::corpus_io::{load_corpus, write_records, CorpusRecord};
use authcil::error::Error;
use authcil::manifest::{load_manifest, read_manifest, save_manifest, Manifest};
use authcil::persist::{decode_f64s, encode_f64s, load_model, load_state, save_model, save_state};
use authcil::report::{confusion_csv, RunReport, CSV_HEADER, CSV_METRICS};
use authcil::runner::{fit_featurizer, run_in_memory};
use authcil::SynthConfig;
use authcil_core::eval::OriginAccuracy;
use authcil_core::{build_cil_data, ConfusionMatrix, SessionSpec, StrategyConfig};

fn trivial_corpus() -> authcil_core::AuthorCorpus {
    authcil_core::AuthorCorpus::from_documents((0..2).flat_map(|a| {
        (0..10).map(move |d| (format!("a{a}"), format!("text {d} from {a}")))
    }))
    .unwrap()
}

fn small_run_config(strategy: &str) -> RunConfig {
    let mut cfg = RunConfig::synthetic_benchmark(5);
    cfg.strategy = strategy.parse::<StrategyConfig>().unwrap();
    cfg.sessions.ratios = vec![0.5, 0.5];
    cfg.train.epochs = 1;
    cfg.train.hidden_dim = 8;
    cfg.features.dim = 256;
    cfg
}

fn small_cil(cfg: &RunConfig) -> authcil_core::CilData {
    let corpus = SynthConfig {
        authors: 4,
        docs_per_author: 10,
        ..SynthConfig::default()
    }
    .corpus()
    .unwrap();
    build_cil_data(&corpus, &cfg.session_spec()).unwrap()
}

#[test]
fn corpus_jsonl_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let records: Vec<CorpusRecord> = SynthConfig {
        authors: 3,
        docs_per_author: 6,
        ..SynthConfig::default()
    }
    .generate()
    .unwrap();
    write_records(&path, &records).unwrap();
    let corpus = load_corpus(&path).unwrap();
    assert_eq!(corpus.num_authors(), 3);
    assert_eq!(corpus.num_documents(), 18);
    let first: Vec<&str> = corpus.documents("author_000").unwrap().iter().map(|d| d.text.as_str()).collect();
    let want: Vec<&str> = records[..6].iter().map(|r| r.text.as_str()).collect();
    assert_eq!(first, want);
}

#[test]
fn corpus_rejects_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"author_id\": \"a\"}\n").unwrap();
    assert!(matches!(load_corpus(&path), Err(Error::Parse { .. })));
    std::fs::write(&path, "{\"author_id\": \"a\", \"text\": \"x\"}\n").unwrap();
    let err = load_corpus(&path).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn synthetic_corpus_is_seeded() {
    let a = SynthConfig::default().generate().unwrap();
    let b = SynthConfig::default().generate().unwrap();
    let c = SynthConfig { seed: 1, ..SynthConfig::default() }.generate().unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.len(), 800);
    assert!(a.iter().all(|r| r.text.split(' ').count() == 40));
}

#[test]
fn synthetic_vocabularies_overlap_by_the_shared_fraction() {
    let cfg = SynthConfig { docs_per_author: 200, ..SynthConfig::default() };
    let records = cfg.generate().unwrap();
    let vocab = |a: &str| -> std::collections::BTreeSet<String> {
        records
            .iter()
            .filter(|r| r.author_id == a)
            .flat_map(|r| r.text.split(' ').map(String::from))
            .collect()
    };
    let v0 = vocab("author_000");
    assert_eq!(v0.len(), 30);
    for other in ["author_001", "author_007", "author_019"] {
        let shared = v0.intersection(&vocab(other)).count();
        assert!(shared <= cfg.shared_words(), "{other}: {shared}");
    }
}

#[test]
fn manifest_round_trip() {
    let cil = build_cil_data(&trivial_corpus(), &SessionSpec::new(vec![1.0], 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_manifest(&cil, "abc", &path).unwrap();
    let (back, m) = load_manifest(&path).unwrap();
    assert_eq!(back, cil);
    assert_eq!(m.config_hash, "abc");
    assert_eq!(back.sessions[0].authors.iter().map(|a| a.iid).collect::<Vec<_>>(), vec![0, 1]);
}

#[test]
fn manifest_round_trip_keeps_counts() {
    let corpus = authcil_core::AuthorCorpus::from_documents((0..50).flat_map(|a| {
        (0..100).map(move |d| (format!("a{a}"), format!("{a}-{d}")))
    }))
    .unwrap();
    let cil = build_cil_data(&corpus, &SessionSpec::new(vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1], 0)).unwrap();
    let back = Manifest::from_cil(&cil, "h").to_cil().unwrap();
    assert_eq!(back.summary(), cil.summary());
}

#[test]
fn manifest_rejects_overlap_checksum_and_version() {
    let cil = build_cil_data(&trivial_corpus(), &SessionSpec::new(vec![0.5, 0.5], 3)).unwrap();
    let m = Manifest::from_cil(&cil, "h");

    let mut overlap = m.clone();
    let moved = overlap.sessions[0].entries[0].author_id.clone();
    for e in &mut overlap.sessions[1].entries {
        e.author_id = moved.clone();
    }
    let err = overlap.to_cil().unwrap_err();
    assert!(err.to_string().contains("disjointness violated"), "{err}");

    let mut edited = m.clone();
    edited.sessions[0].entries[0].texts[0].push('!');
    assert!(matches!(edited.to_cil(), Err(Error::Checksum { .. })));

    let mut version = m.clone();
    version.version = 99;
    assert!(matches!(version.to_cil(), Err(Error::Version { .. })));

    let mut prng = m;
    prng.prng = "mt19937".into();
    assert!(prng.to_cil().is_err());
}

#[test]
fn manifest_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cil = build_cil_data(&trivial_corpus(), &SessionSpec::new(vec![1.0], 8)).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    save_manifest(&cil, "h", &a).unwrap();
    save_manifest(&cil, "h", &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(read_manifest(&a).unwrap().sha256, read_manifest(&b).unwrap().sha256);
}

#[test]
fn f64_blobs_are_bit_exact() {
    let v = vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300, -3.5];
    let back = decode_f64s(&encode_f64s(&v)).unwrap();
    assert_eq!(
        v.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        back.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
    assert!(decode_f64s("AAA=").is_err());
}

#[test]
fn model_and_state_round_trip() {
    let cfg = small_run_config("LWF_E2");
    let cil = small_cil(&cfg);
    let run = run_in_memory(&cil, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mp = dir.path().join("model.json");
    let sp = dir.path().join("state.json");
    save_model(&mp, &run.model, &run.featurizer, &cil.author_table(), 1, &cfg.config_hash()).unwrap();
    save_state(&sp, &run.state, &cfg.strategy, &cfg.config_hash()).unwrap();

    let loaded = load_model(&mp, Some(&run.featurizer)).unwrap();
    assert_eq!(loaded.model, run.model);
    assert_eq!(loaded.authors, cil.author_table());
    assert_eq!(loaded.session, 1);
    let (state, file) = load_state(&sp).unwrap();
    assert_eq!(state, run.state);
    assert_eq!(file.strategy, cfg.strategy);
}

#[test]
fn model_refuses_other_featurizer() {
    let cfg = small_run_config("FT");
    let cil = small_cil(&cfg);
    let run = run_in_memory(&cil, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mp = dir.path().join("model.json");
    save_model(&mp, &run.model, &run.featurizer, &cil.author_table(), 1, "h").unwrap();

    let mut other = cfg.clone();
    other.features.ngram_range = (1, 2);
    let f = fit_featurizer(&cil, &other).unwrap();
    assert!(matches!(load_model(&mp, Some(&f)), Err(Error::FeaturizerMismatch(_))));

    let text = std::fs::read_to_string(&mp).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["featurizer"]["hash"] = "murmur3".into();
    std::fs::write(&mp, json.to_string()).unwrap();
    assert!(matches!(load_model(&mp, None), Err(Error::FeaturizerMismatch(_))));
}

#[test]
fn model_detects_tampered_parameters() {
    let cfg = small_run_config("FT");
    let cil = small_cil(&cfg);
    let run = run_in_memory(&cil, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mp = dir.path().join("model.json");
    save_model(&mp, &run.model, &run.featurizer, &cil.author_table(), 1, "h").unwrap();
    let text = std::fs::read_to_string(&mp).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut params = run.model.params().to_vec();
    params[0] += 1.0;
    json["model"]["params"] = encode_f64s(&params).into();
    std::fs::write(&mp, json.to_string()).unwrap();
    assert!(matches!(load_model(&mp, None), Err(Error::Checksum { .. })));
}

fn report(strategy: &str, hash: &str, acc: &[f64]) -> RunReport {
    let mut r = RunReport::new(strategy, 0, hash);
    for (t, &a) in acc.iter().enumerate() {
        r.push(authcil::report::SessionRow {
            t,
            accuracy: a,
            correct: 0,
            total: 0,
            per_origin: vec![OriginAccuracy { session: 0, correct: 0, total: 0, accuracy: a }],
        });
    }
    r
}

#[test]
fn report_json_round_trip() {
    let r = report("FT", "h", &[90.0, 45.123456789, 10.0]);
    assert_eq!(RunReport::from_json(&r.to_json()).unwrap(), r);
    assert_eq!(r.pd, Some(80.0));
}

#[test]
fn report_csv_shape() {
    let empty = RunReport::new("FT", 0, "h");
    assert_eq!(empty.to_csv(), format!("{CSV_HEADER}\n"));

    let r = report("FT+", "h", &[90.0, 60.0, 30.0]);
    let csv = r.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 3 * CSV_METRICS.len());
    assert_eq!(lines[0], "strategy,seed,session,metric,value");
    assert!(lines.contains(&"FT+,0,2,accuracy,30.00"));
    assert!(lines.contains(&"FT+,0,2,pd_so_far,60.00"));
    assert!(lines.contains(&"FT+,0,1,avg_a_so_far,75.00"));
}

#[test]
fn confusion_grid() {
    let mut c = ConfusionMatrix::new(2);
    c.counts = vec![2, 0, 1, 1];
    let grid = confusion_csv(&c, &["x".into(), "y,z".into()]);
    assert_eq!(grid, "true\\predicted,x,\"y,z\"\nx,2,0\n\"y,z\",1,1\n");
}

#[test]
fn compare_tables() {
    let a = report("FT", "h", &[90.0, 20.0]);
    let b = report("LWF", "h", &[90.0, 70.0]);
    let one = compare_table(std::slice::from_ref(&a), false).unwrap();
    assert_eq!(one.lines().count(), 3);
    assert!(one.contains("| FT | 0 | 90.00 | 20.00 | **70.00** | 55.00 |"));

    let two = compare_table(&[a.clone(), b.clone()], false).unwrap();
    assert!(two.contains("| LWF | 0 | 90.00 | 70.00 | **20.00** |"));
    assert!(two.contains("| FT | 0 | 90.00 | 20.00 | 70.00 |"));

    let other = report("EWC", "other", &[90.0, 50.0]);
    assert!(matches!(
        compare_table(&[a.clone(), other.clone()], false),
        Err(Error::ConfigHashMismatch { .. })
    ));
    assert!(compare_table(&[a.clone(), other], true).is_ok());
    let short = report("FZ", "h", &[90.0]);
    assert!(compare_table(&[a, short], true).is_err());
}

#[test]
fn config_toml_round_trip_and_hashes() {
    let cfg = small_run_config("FT_E5");
    let text = cfg.to_toml_string();
    let back = RunConfig::from_toml_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.config_hash(), cfg.config_hash());

    let mut other_strategy = cfg.clone();
    other_strategy.strategy = "LWF".parse().unwrap();
    other_strategy.seed = 99;
    assert_eq!(other_strategy.config_hash(), cfg.config_hash());
    assert_ne!(other_strategy.run_hash(), cfg.run_hash());

    let mut other_train = cfg.clone();
    other_train.train.epochs += 1;
    assert_ne!(other_train.config_hash(), cfg.config_hash());
}

#[test]
fn config_file_defaults_fill_gaps() {
    let cfg = RunConfig::from_toml_str(
        "seed = 4\n[train]\nepochs = 2\n[strategy]\nkind = \"FT_Ek\"\nk_exemplars = 3\n",
    )
    .unwrap();
    assert_eq!(cfg.seed, 4);
    assert_eq!(cfg.train.epochs, 2);
    assert_eq!(cfg.train.batch_size, 32);
    assert_eq!(cfg.strategy.label(), "FT_E3");
    assert_eq!(cfg.sessions.ratios.len(), 6);
    assert!(RunConfig::from_toml_str("sed = 4\n").is_err());
}

#[test]
fn documented_config_is_the_default() {
    let text = r#"
seed = 0
output_dir = "runs"

[sessions]
ratios = [0.5, 0.1, 0.1, 0.1, 0.1, 0.1]
split_fractions = [0.6, 0.2, 0.2]

[features]
ngram_range = [2, 4]
dim = 65536
tf_mode = "sublinear"
normalize = "l2"
channels = ["char_ngram_hash"]
vocab_size = 100

[train]
learning_rate = 0.5
epochs = 5
batch_size = 32
weight_decay = 0.0
hidden_dim = 64
init = "uniform_scaled"

[strategy]
kind = "FT"
k_exemplars = 0
lambda_reg = 100.0
lambda_distill = 1.0
distill_temperature = 2.0
"#;
    assert_eq!(RunConfig::from_toml_str(text).unwrap(), RunConfig::default());
}
