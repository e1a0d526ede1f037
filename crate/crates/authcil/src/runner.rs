//! Drives a strategy through every session, evaluating after each one.

use std::fs;
use std::path::{Path, PathBuf};

use authcil_core::{
    evaluate, train_session, CilData, ConfusionMatrix, Featurizer, ModelState, SeededRng,
    SessionData, StrategyState,
};
use authcil_core::rng::stream;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::persist::{load_model, load_state, save_model, save_state};
use crate::report::{confusion_csv, RunReport, SessionRow};

pub const RUN_FILE: &str = "run.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

pub fn model_file(t: usize) -> String {
    format!("model_s{t}.json")
}

pub fn state_file(t: usize) -> String {
    format!("state_s{t}.json")
}

pub fn confusion_file(t: usize) -> String {
    format!("confusion_s{t}.csv")
}

/// Featurizer for a run; the word channel vocabulary comes from session 0's
/// training texts.
pub fn fit_featurizer(cil: &CilData, cfg: &RunConfig) -> Result<Featurizer> {
    let mut f = Featurizer::new(cfg.features.clone())?;
    let texts: Vec<&str> = cil
        .session(0)?
        .authors
        .iter()
        .flat_map(|a| a.train.iter().map(String::as_str))
        .collect();
    f.fit(&texts);
    Ok(f)
}

/// Everything a run carries between sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub model: ModelState,
    pub state: StrategyState,
    pub report: RunReport,
    pub featurizer: Featurizer,
}

impl RunState {
    pub fn fresh(cil: &CilData, cfg: &RunConfig) -> Result<Self> {
        let featurizer = fit_featurizer(cil, cfg)?;
        let mut rng = SeededRng::derive(cfg.seed, stream::MODEL_INIT, 0);
        let model = ModelState::new(featurizer.output_dim(), cfg.train.hidden_dim, &mut rng);
        Ok(Self {
            model,
            state: StrategyState::default(),
            report: RunReport::new(cfg.strategy.label(), cfg.seed, cfg.config_hash()),
            featurizer,
        })
    }

    pub fn next_session(&self) -> usize {
        self.state.sessions_trained
    }
}

/// Handed to the caller after each session.
pub struct Checkpoint<'a> {
    pub session: usize,
    pub run: &'a RunState,
    pub confusion: &'a ConfusionMatrix,
}

/// Trains the remaining sessions of `run`, calling `sink` after each one.
pub fn run_sessions<F>(cil: &CilData, cfg: &RunConfig, mut run: RunState, mut sink: F) -> Result<RunState>
where
    F: FnMut(Checkpoint<'_>) -> Result<()>,
{
    cfg.validate()?;
    let train = cfg.train_config();
    for t in run.next_session()..cil.num_sessions() {
        let data = SessionData::from_session(cil.session(t)?, &run.featurizer);
        train_session(
            &mut run.model,
            &cfg.strategy,
            &mut run.state,
            &data,
            &train,
            &run.featurizer,
        )?;
        let (eval, confusion) = evaluate(&run.model, cil, t, &run.featurizer)?;
        run.report.push(SessionRow::from(&eval));
        sink(Checkpoint {
            session: t,
            run: &run,
            confusion: &confusion,
        })?;
    }
    Ok(run)
}

/// Trains all sessions without writing anything.
pub fn run_in_memory(cil: &CilData, cfg: &RunConfig) -> Result<RunState> {
    run_sessions(cil, cfg, RunState::fresh(cil, cfg)?, |_| Ok(()))
}

/// Metadata file at the root of every run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub strategy: String,
    pub seed: u64,
    pub config_hash: String,
    pub run_hash: String,
    pub manifest_sha256: String,
    pub num_sessions: usize,
    pub config: RunConfig,
}

/// Conventional run directory name under `root`.
pub fn run_dir_name(root: &Path, cfg: &RunConfig, unix_secs: u64) -> PathBuf {
    let label: String = cfg
        .strategy
        .label()
        .chars()
        .map(|c| if c == '+' { 'p' } else { c })
        .collect();
    root.join(format!("run-{unix_secs}-{label}-s{}", cfg.seed))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Trains into `dir`, writing a model, strategy state and confusion grid per
/// session plus the report. With `resume_from = Some(r)`, sessions before `r`
/// are loaded from `dir` instead of retrained.
pub fn train_to_dir(
    cil: &CilData,
    manifest_sha256: &str,
    cfg: &RunConfig,
    dir: &Path,
    resume_from: Option<usize>,
) -> Result<RunReport> {
    cfg.validate()?;
    let meta = RunMeta {
        strategy: cfg.strategy.label(),
        seed: cfg.seed,
        config_hash: cfg.config_hash(),
        run_hash: cfg.run_hash(),
        manifest_sha256: manifest_sha256.to_string(),
        num_sessions: cil.num_sessions(),
        config: cfg.clone(),
    };
    let start = match resume_from {
        None | Some(0) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write(
                &dir.join(RUN_FILE),
                &serde_json::to_string_pretty(&meta).expect("run meta serializes"),
            )?;
            RunState::fresh(cil, cfg)?
        }
        Some(r) => resume_state(cil, cfg, &meta, dir, r)?,
    };
    let authors = cil.author_table();
    let hash = meta.config_hash.clone();
    let run = run_sessions(cil, cfg, start, |cp| {
        let t = cp.session;
        save_model(
            &dir.join(model_file(t)),
            &cp.run.model,
            &cp.run.featurizer,
            &authors,
            t,
            &hash,
        )?;
        save_state(&dir.join(state_file(t)), &cp.run.state, &cfg.strategy, &hash)?;
        write(&dir.join(confusion_file(t)), &confusion_csv(cp.confusion, &authors))?;
        cp.run.report.save(&dir.join(REPORT_FILE))?;
        cp.run.report.save_csv(&dir.join(REPORT_CSV))
    })?;
    Ok(run.report)
}

fn resume_state(cil: &CilData, cfg: &RunConfig, meta: &RunMeta, dir: &Path, r: usize) -> Result<RunState> {
    if r >= cil.num_sessions() {
        return Err(Error::Usage(format!(
            "cannot resume at session {r}: the manifest has {} sessions",
            cil.num_sessions()
        )));
    }
    let path = dir.join(RUN_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let old: RunMeta = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e))?;
    if old.run_hash != meta.run_hash {
        return Err(Error::ConfigHashMismatch {
            expected: old.run_hash,
            found: meta.run_hash.clone(),
        });
    }
    if old.manifest_sha256 != meta.manifest_sha256 {
        return Err(Error::Checksum {
            expected: old.manifest_sha256,
            found: meta.manifest_sha256.clone(),
        });
    }
    let featurizer = fit_featurizer(cil, cfg)?;
    let loaded = load_model(&dir.join(model_file(r - 1)), Some(&featurizer))?;
    if loaded.session != r - 1 || loaded.config_hash != meta.config_hash {
        return Err(Error::Data(format!(
            "{} does not belong to this run",
            model_file(r - 1)
        )));
    }
    let (state, file) = load_state(&dir.join(state_file(r - 1)))?;
    if state.sessions_trained != r || file.strategy != cfg.strategy {
        return Err(Error::Data(format!(
            "{} does not belong to this run",
            state_file(r - 1)
        )));
    }
    let mut report = RunReport::load(&dir.join(REPORT_FILE))?;
    if report.sessions.len() < r {
        return Err(Error::Data(format!(
            "report holds {} sessions, cannot resume at {r}",
            report.sessions.len()
        )));
    }
    report.sessions.truncate(r);
    report.refresh();
    Ok(RunState {
        model: loaded.model,
        state,
        report,
        featurizer,
    })
}
