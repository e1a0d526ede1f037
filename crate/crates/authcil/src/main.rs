use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use authcil::compare::compare_table;
use authcil::config::RunConfig;
use authcil::corpus_io::{load_corpus, write_records};
use authcil::error::{Error, Result};
use authcil::manifest::{load_manifest, read_manifest, save_manifest, summary_table};
use authcil::persist::load_model;
use authcil::report::{confusion_csv, RunReport};
use authcil::runner::{run_dir_name, train_to_dir};
use authcil::synth::SynthConfig;
use authcil_core::{build_cil_data, evaluate, CilData, StrategyConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "authcil", version, about = "Class-incremental authorship attribution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a JSONL corpus into sessions and write a manifest.
    BuildSessions(BuildArgs),
    /// Write a separable synthetic JSONL corpus.
    SynthCorpus(SynthArgs),
    /// Train a strategy across all sessions.
    Train(TrainArgs),
    /// Evaluate a saved model on a cumulative test set.
    Eval(EvalArgs),
    /// Tabulate run reports as markdown.
    Compare(CompareArgs),
    /// Verify a manifest and print its session table.
    InspectManifest(InspectArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Comma-separated author fractions, e.g. 0.5,0.1,0.1.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    authors: usize,
    #[arg(long, default_value_t = 40)]
    docs: usize,
    #[arg(long, default_value_t = 30)]
    vocab: usize,
    #[arg(long, default_value_t = 0.1)]
    overlap: f64,
    #[arg(long, default_value_t = 40)]
    words: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest from build-sessions; otherwise sessions are built from the corpus.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// FT, FT+, FZ, FZ+, LWF, EWC, MAS, FT_E<k>, LWF_E<k>.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds, run one after another.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exact run directory instead of a timestamped one.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Continue an existing run directory at this session.
    #[arg(long, requires = "run_dir")]
    resume_from: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Cumulative test set to use; defaults to the model's last session.
    #[arg(long)]
    session: Option<usize>,
    /// Write the confusion grid here.
    #[arg(long)]
    confusion: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Allow reports with different config hashes.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    manifest: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn corpus_path(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.corpus.clone())
        .ok_or_else(|| Error::Usage("no corpus given (--corpus or `corpus` in the config)".into()))
}

fn build_sessions(args: BuildArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(r) = args.ratios {
        cfg.sessions.ratios = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let corpus = load_corpus(&corpus_path(args.corpus, &cfg)?)?;
    let cil = build_cil_data(&corpus, &cfg.session_spec())?;
    let m = save_manifest(&cil, &cfg.config_hash(), &args.out)?;
    print!("{}", summary_table(&cil));
    println!("manifest {} sha256 {}", args.out.display(), m.sha256);
    Ok(())
}

fn synth_corpus(args: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        authors: args.authors,
        docs_per_author: args.docs,
        vocab_size: args.vocab,
        overlap: args.overlap,
        words_per_doc: args.words,
        seed: args.seed,
    };
    let records = cfg.generate()?;
    write_records(&args.out, &records)?;
    println!("wrote {} documents by {} authors to {}", records.len(), cfg.authors, args.out.display());
    Ok(())
}

fn unix_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(s) = &args.strategy {
        cfg.strategy = s
            .parse::<StrategyConfig>()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.lr {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.hidden_dim {
        cfg.train.hidden_dim = v;
    }
    if let Some(c) = &args.corpus {
        cfg.corpus = Some(c.clone());
    }
    let root = args.out_dir.clone().unwrap_or_else(|| cfg.resolved_output_dir());
    let seeds = match (args.seed, args.seeds) {
        (Some(s), _) => vec![s],
        (None, Some(s)) => s,
        (None, None) => vec![cfg.seed],
    };
    if args.run_dir.is_some() && seeds.len() > 1 {
        return Err(Error::Usage("--run-dir takes a single seed".into()));
    }
    let fixed = match &args.manifest {
        Some(p) => {
            let (cil, m) = load_manifest(p)?;
            Some((cil, m.sha256))
        }
        None => None,
    };
    for seed in seeds {
        cfg.seed = seed;
        cfg.validate()?;
        let (cil, sha): (CilData, String) = match &fixed {
            Some((cil, sha)) => (cil.clone(), sha.clone()),
            None => {
                let corpus = load_corpus(&corpus_path(None, &cfg)?)?;
                let cil = build_cil_data(&corpus, &cfg.session_spec())?;
                let m = authcil::Manifest::from_cil(&cil, &cfg.config_hash());
                (cil, m.sha256)
            }
        };
        let dir = args
            .run_dir
            .clone()
            .unwrap_or_else(|| run_dir_name(&root, &cfg, unix_secs()));
        let report = train_to_dir(&cil, &sha, &cfg, &dir, args.resume_from)?;
        println!("{} seed {seed} -> {}", report.strategy, dir.display());
        for s in &report.sessions {
            println!("  s{}  acc {:6.2}  ({}/{})", s.t, s.accuracy, s.correct, s.total);
        }
        if let Some(pd) = report.pd {
            println!("  PD {pd:.2}  AvgA {:.2}", report.avg_a.unwrap_or(0.0));
        }
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let (cil, _) = load_manifest(&args.manifest)?;
    let loaded = load_model(&args.model, None)?;
    let t = args.session.unwrap_or(loaded.session);
    let (e, confusion) = evaluate(&loaded.model, &cil, t, &loaded.featurizer)?;
    println!("session {t}: accuracy {:.2} ({}/{})", e.accuracy, e.correct, e.total);
    for o in &e.per_origin {
        println!("  from s{}: {:.2} ({}/{})", o.session, o.accuracy, o.correct, o.total);
    }
    if let Some(path) = args.confusion {
        let grid = confusion_csv(&confusion, &cil.author_table());
        std::fs::write(&path, grid).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let reports = args
        .reports
        .iter()
        .map(|p| RunReport::load(p))
        .collect::<Result<Vec<_>>>()?;
    let table = compare_table(&reports, args.force)?;
    match args.out {
        Some(path) => std::fs::write(&path, &table).map_err(|e| Error::io(&path, e))?,
        None => print!("{table}"),
    }
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let m = read_manifest(&args.manifest)?;
    let cil = m.to_cil()?;
    println!(
        "version {}  seed {}  prng {}  config {}",
        m.version, m.seed, m.prng, m.config_hash
    );
    println!("ratios {:?}  splits {:?}", m.ratios, m.split_fractions);
    println!("sha256 {} (verified)", m.sha256);
    print!("{}", summary_table(&cil));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::BuildSessions(a) => build_sessions(a),
        Command::SynthCorpus(a) => synth_corpus(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::InspectManifest(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
