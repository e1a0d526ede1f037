//! Session trainers for class-incremental learning.
//!
//! Every strategy follows the same protocol: append a head for the session's
//! new authors, run SGD on the session's training data under a strategy
//! specific objective and trainability mask, then update the strategy state
//! (previous-model snapshot, importance map, exemplar store). Session 0 is
//! plain supervised training for every strategy.

mod distill;
mod regularize;
mod replay;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Session;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Featurizer};
use crate::model::{
    accumulate_ce, accumulate_weight_decay, add_head, snapshot, Gradients, HeadSet, ModelState,
    ParamSnapshot, TrainConfig, TrainMask,
};
use crate::rng::{stream, SeededRng};

pub use distill::{distill_term, lwf_loss};
use distill::lwf_replay_loss;
pub use regularize::{ewc_importance, mas_importance, param_reg_loss, ImportanceMap};
pub use replay::{sample_exemplars, AuthorExemplars, ExemplarPolicy, ExemplarStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "FT")]
    Ft,
    #[serde(rename = "FTplus")]
    FtPlus,
    #[serde(rename = "FZ")]
    Fz,
    #[serde(rename = "FZplus")]
    FzPlus,
    #[serde(rename = "LWF")]
    Lwf,
    #[serde(rename = "EWC")]
    Ewc,
    #[serde(rename = "MAS")]
    Mas,
    #[serde(rename = "FT_Ek")]
    FtReplay,
    #[serde(rename = "LWF_Ek")]
    LwfReplay,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 9] = [
        StrategyKind::Ft,
        StrategyKind::FtPlus,
        StrategyKind::Fz,
        StrategyKind::FzPlus,
        StrategyKind::Lwf,
        StrategyKind::Ewc,
        StrategyKind::Mas,
        StrategyKind::FtReplay,
        StrategyKind::LwfReplay,
    ];

    pub fn uses_exemplars(self) -> bool {
        matches!(self, StrategyKind::FtReplay | StrategyKind::LwfReplay)
    }

    pub fn uses_snapshot(self) -> bool {
        matches!(
            self,
            StrategyKind::Lwf | StrategyKind::LwfReplay | StrategyKind::Ewc | StrategyKind::Mas
        )
    }

    pub fn freezes_trunk(self) -> bool {
        matches!(self, StrategyKind::Fz | StrategyKind::FzPlus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Exemplars kept per author (replay kinds).
    pub k_exemplars: usize,
    /// Weight of the parameter penalty (EWC, MAS).
    pub lambda_reg: f64,
    /// Weight of the distillation term (LWF kinds).
    pub lambda_distill: f64,
    pub distill_temperature: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self::new(StrategyKind::Ft)
    }
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            k_exemplars: if kind.uses_exemplars() { 2 } else { 0 },
            lambda_reg: 100.0,
            lambda_distill: 1.0,
            distill_temperature: 2.0,
        }
    }

    pub fn replay(kind: StrategyKind, k: usize) -> Self {
        Self {
            k_exemplars: k,
            ..Self::new(kind)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.uses_exemplars() && self.k_exemplars == 0 {
            return Err(Error::InvalidStrategyConfig(
                "replay strategies need k_exemplars >= 1".into(),
            ));
        }
        if !(self.lambda_reg.is_finite() && self.lambda_reg >= 0.0) {
            return Err(Error::InvalidStrategyConfig(alloc::format!(
                "lambda_reg must be finite and nonnegative, got {}",
                self.lambda_reg
            )));
        }
        if !(self.lambda_distill.is_finite() && self.lambda_distill >= 0.0) {
            return Err(Error::InvalidStrategyConfig(alloc::format!(
                "lambda_distill must be finite and nonnegative, got {}",
                self.lambda_distill
            )));
        }
        if !(self.distill_temperature.is_finite() && self.distill_temperature > 0.0) {
            return Err(Error::InvalidStrategyConfig(alloc::format!(
                "distill_temperature must be positive, got {}",
                self.distill_temperature
            )));
        }
        Ok(())
    }

    /// Display label, e.g. `FT+` or `LWF_E10`.
    pub fn label(&self) -> String {
        match self.kind {
            StrategyKind::Ft => "FT".into(),
            StrategyKind::FtPlus => "FT+".into(),
            StrategyKind::Fz => "FZ".into(),
            StrategyKind::FzPlus => "FZ+".into(),
            StrategyKind::Lwf => "LWF".into(),
            StrategyKind::Ewc => "EWC".into(),
            StrategyKind::Mas => "MAS".into(),
            StrategyKind::FtReplay => alloc::format!("FT_E{}", self.k_exemplars),
            StrategyKind::LwfReplay => alloc::format!("LWF_E{}", self.k_exemplars),
        }
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for StrategyConfig {
    type Err = Error;

    /// Accepts labels (`FT+`, `FT_E2`) and config names (`FTplus`).
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "FT" => StrategyKind::Ft,
            "FT+" | "FTplus" => StrategyKind::FtPlus,
            "FZ" => StrategyKind::Fz,
            "FZ+" | "FZplus" => StrategyKind::FzPlus,
            "LWF" => StrategyKind::Lwf,
            "EWC" => StrategyKind::Ewc,
            "MAS" => StrategyKind::Mas,
            "FT_Ek" => StrategyKind::FtReplay,
            "LWF_Ek" => StrategyKind::LwfReplay,
            _ => {
                let (kind, k) = if let Some(k) = s.strip_prefix("FT_E") {
                    (StrategyKind::FtReplay, k)
                } else if let Some(k) = s.strip_prefix("LWF_E") {
                    (StrategyKind::LwfReplay, k)
                } else {
                    return Err(Error::InvalidStrategyConfig(alloc::format!(
                        "unknown strategy {s:?}"
                    )));
                };
                let k: usize = k.parse().map_err(|_| {
                    Error::InvalidStrategyConfig(alloc::format!("bad exemplar count in {s:?}"))
                })?;
                let cfg = Self::replay(kind, k);
                cfg.validate()?;
                return Ok(cfg);
            }
        };
        Ok(Self::new(kind))
    }
}

/// One author's training documents within a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorDocs {
    pub iid: usize,
    pub author_id: String,
    pub texts: Vec<String>,
}

/// A session's featurized training data.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionData {
    pub index: usize,
    pub authors: Vec<AuthorDocs>,
    pub features: Vec<FeatureVector>,
    /// Global class id per feature row.
    pub labels: Vec<usize>,
}

impl SessionData {
    pub fn new(index: usize, authors: Vec<AuthorDocs>, featurizer: &Featurizer) -> Self {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for a in &authors {
            features.extend(featurizer.featurize_batch(&a.texts));
            labels.extend(core::iter::repeat_n(a.iid, a.texts.len()));
        }
        Self {
            index,
            authors,
            features,
            labels,
        }
    }

    /// Training split of a built session.
    pub fn from_session(session: &Session, featurizer: &Featurizer) -> Self {
        let authors = session
            .authors
            .iter()
            .map(|a| AuthorDocs {
                iid: a.iid,
                author_id: a.author_id.clone(),
                texts: a.train.clone(),
            })
            .collect();
        Self::new(session.index, authors, featurizer)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_new_classes(&self) -> usize {
        self.authors.len()
    }

    pub fn samples(&self) -> Vec<(&[f64], usize)> {
        self.features
            .iter()
            .zip(&self.labels)
            .map(|(f, &l)| (f.as_slice(), l))
            .collect()
    }
}

/// State carried between sessions by one training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrategyState {
    pub sessions_trained: usize,
    /// Model at the end of the previous session (LWF teacher, EWC/MAS anchor).
    pub previous: Option<ParamSnapshot>,
    pub importance: Option<ImportanceMap>,
    pub exemplars: ExemplarStore,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionSummary {
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub warnings: Vec<String>,
}

/// A training sample; `replay` marks stored exemplars.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Item<'a> {
    pub x: &'a [f64],
    pub label: usize,
    pub replay: bool,
}

/// Mini-batch SGD over `pool` for `cfg.epochs` epochs, reshuffling every epoch.
pub(crate) fn run_epochs<F>(
    model: &mut ModelState,
    pool: &[Item<'_>],
    cfg: &TrainConfig,
    rng: &mut SeededRng,
    mask: &TrainMask,
    mut objective: F,
) -> Result<SessionSummary>
where
    F: FnMut(&ModelState, &[Item<'_>]) -> Result<(f64, Gradients)>,
{
    let mut summary = SessionSummary::default();
    if pool.is_empty() {
        return Ok(summary);
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| pool[i]));
            let (loss, grads) = objective(model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(loss));
            }
            crate::model::sgd_step(model, &grads, cfg.learning_rate, mask)?;
            total += loss;
            batches += 1;
            summary.steps += 1;
        }
        summary.epoch_losses.push(total / batches as f64);
    }
    Ok(summary)
}

fn ce_objective(
    model: &ModelState,
    batch: &[Item<'_>],
    heads: HeadSet,
    weight_decay: f64,
) -> Result<(f64, Gradients)> {
    let pairs: Vec<(&[f64], usize)> = batch.iter().map(|i| (i.x, i.label)).collect();
    crate::model::ce_loss_and_grads(model, &pairs, heads, weight_decay)
}

fn check_session(model: &ModelState, state: &StrategyState, data: &SessionData) -> Result<()> {
    let t = data.index;
    if state.sessions_trained != t || model.num_heads() != t {
        return Err(Error::DisjointnessViolated(alloc::format!(
            "session {t} presented after {} trained sessions and {} heads",
            state.sessions_trained,
            model.num_heads()
        )));
    }
    if data.authors.is_empty() {
        return Err(Error::EmptyData);
    }
    let start = model.num_classes();
    for (k, a) in data.authors.iter().enumerate() {
        if a.iid != start + k {
            return Err(Error::DisjointnessViolated(alloc::format!(
                "author {} has iid {} but session {t} must introduce classes {}..{}",
                a.author_id,
                a.iid,
                start,
                start + data.authors.len()
            )));
        }
    }
    let end = start + data.authors.len();
    if let Some(&bad) = data.labels.iter().find(|l| !(start..end).contains(l)) {
        return Err(Error::DisjointnessViolated(alloc::format!(
            "label {bad} is not a class of session {t}"
        )));
    }
    Ok(())
}

/// Trains one session in place and advances `state`.
pub fn train_session(
    model: &mut ModelState,
    strategy: &StrategyConfig,
    state: &mut StrategyState,
    data: &SessionData,
    cfg: &TrainConfig,
    featurizer: &Featurizer,
) -> Result<SessionSummary> {
    strategy.validate()?;
    cfg.validate()?;
    check_session(model, state, data)?;
    let t = data.index;

    let mut head_rng = SeededRng::derive(cfg.seed, stream::HEAD_INIT, t as u64);
    add_head(model, data.num_new_classes(), &mut head_rng)?;
    let mut rng = SeededRng::derive(cfg.seed, stream::BATCHES, t as u64);
    let wd = cfg.weight_decay;

    let mut pool: Vec<Item<'_>> = data
        .features
        .iter()
        .zip(&data.labels)
        .map(|(f, &label)| Item {
            x: f.as_slice(),
            label,
            replay: false,
        })
        .collect();

    let mut warnings = Vec::new();
    let summary = if t == 0 {
        let mask = TrainMask::all(model);
        run_epochs(model, &pool, cfg, &mut rng, &mask, |m, b| {
            ce_objective(m, b, HeadSet::All, wd)
        })?
    } else {
        let replay_features: Vec<(FeatureVector, usize)>;
        if strategy.kind.uses_exemplars() {
            if state.exemplars.is_empty() {
                warnings.push(alloc::format!(
                    "session {t}: exemplar store is empty, training on current data only"
                ));
            }
            replay_features = state
                .exemplars
                .items()
                .map(|(text, iid)| (featurizer.featurize(text), iid))
                .collect();
            pool.extend(replay_features.iter().map(|(f, iid)| Item {
                x: f.as_slice(),
                label: *iid,
                replay: true,
            }));
        }
        train_incremental(model, strategy, state, &pool, cfg, &mut rng, t)?
    };

    finish_session(model, strategy, state, data, cfg)?;
    let mut summary = summary;
    summary.warnings.extend(warnings);
    Ok(summary)
}

fn train_incremental(
    model: &mut ModelState,
    strategy: &StrategyConfig,
    state: &StrategyState,
    pool: &[Item<'_>],
    cfg: &TrainConfig,
    rng: &mut SeededRng,
    t: usize,
) -> Result<SessionSummary> {
    let wd = cfg.weight_decay;
    let previous = || state.previous.as_ref().ok_or(Error::MissingSnapshot { session: t });
    match strategy.kind {
        StrategyKind::Ft | StrategyKind::FtReplay => {
            let mask = TrainMask::all(model);
            run_epochs(model, pool, cfg, rng, &mask, |m, b| {
                ce_objective(m, b, HeadSet::All, wd)
            })
        }
        StrategyKind::FtPlus => {
            let mask = TrainMask::trunk_and_head(model, t);
            run_epochs(model, pool, cfg, rng, &mask, |m, b| {
                ce_objective(m, b, HeadSet::Only(t), wd)
            })
        }
        StrategyKind::Fz => {
            let mask = TrainMask::heads_only(model);
            run_epochs(model, pool, cfg, rng, &mask, |m, b| {
                ce_objective(m, b, HeadSet::All, wd)
            })
        }
        StrategyKind::FzPlus => {
            let mask = TrainMask::head_only(model, t);
            run_epochs(model, pool, cfg, rng, &mask, |m, b| {
                ce_objective(m, b, HeadSet::Only(t), wd)
            })
        }
        StrategyKind::Lwf => {
            let teacher = previous()?;
            let mask = TrainMask::all(model);
            run_epochs(model, pool, cfg, rng, &mask, |m, b| {
                let pairs: Vec<(&[f64], usize)> = b.iter().map(|i| (i.x, i.label)).collect();
                lwf_loss(m, teacher, &pairs, strategy, wd)
            })
        }
        StrategyKind::LwfReplay => {
            let teacher = previous()?;
            let mask = TrainMask::all(model);
            run_epochs(model, pool, cfg, rng, &mask, |m, b| {
                lwf_replay_loss(m, teacher, b, strategy, wd)
            })
        }
        StrategyKind::Ewc | StrategyKind::Mas => {
            let anchor = previous()?;
            let importance = state
                .importance
                .as_ref()
                .ok_or(Error::MissingSnapshot { session: t })?;
            let mask = TrainMask::all(model);
            run_epochs(model, pool, cfg, rng, &mask, |m, b| {
                let (ce, mut grads) = ce_objective(m, b, HeadSet::All, wd)?;
                let (reg, reg_grads) = param_reg_loss(m, anchor, importance, strategy.lambda_reg)?;
                grads.add_scaled(&reg_grads, 1.0);
                Ok((ce + reg, grads))
            })
        }
    }
}

fn finish_session(
    model: &ModelState,
    strategy: &StrategyConfig,
    state: &mut StrategyState,
    data: &SessionData,
    cfg: &TrainConfig,
) -> Result<()> {
    let t = data.index;
    match strategy.kind {
        StrategyKind::Ewc => {
            let fresh = ewc_importance(model, &data.samples(), t)?;
            state.importance = Some(ImportanceMap::merge(state.importance.take(), fresh));
        }
        StrategyKind::Mas => {
            let xs: Vec<&[f64]> = data.features.iter().map(|f| f.as_slice()).collect();
            let fresh = mas_importance(model, &xs, t)?;
            state.importance = Some(ImportanceMap::merge(state.importance.take(), fresh));
        }
        _ => {}
    }
    if strategy.kind.uses_snapshot() {
        state.previous = Some(snapshot(model, t));
    }
    if strategy.kind.uses_exemplars() {
        let mut rng = SeededRng::derive(cfg.seed, stream::EXEMPLARS, t as u64);
        let added = sample_exemplars(data, strategy.k_exemplars, &mut rng);
        state.exemplars.extend(added);
    }
    state.sessions_trained += 1;
    Ok(())
}

/// Weight-decayed cross-entropy where each sample picks its own head set.
pub(crate) fn mixed_ce(
    model: &ModelState,
    batch: &[Item<'_>],
    current: HeadSet,
    replay: HeadSet,
    scale: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    let cur = model.class_range(current)?;
    let rep = model.class_range(replay)?;
    let mut loss = 0.0;
    for item in batch {
        let classes = if item.replay { rep.clone() } else { cur.clone() };
        loss += accumulate_ce(model, item.x, item.label, classes, scale, &mut grads.0)?;
    }
    Ok(loss * scale)
}

pub(crate) fn all_heads_weight_decay(model: &ModelState, wd: f64, grads: &mut Gradients) -> f64 {
    accumulate_weight_decay(model, 0..model.num_heads(), wd, &mut grads.0)
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StrategyKind::Ft => "FT",
            StrategyKind::FtPlus => "FTplus",
            StrategyKind::Fz => "FZ",
            StrategyKind::FzPlus => "FZplus",
            StrategyKind::Lwf => "LWF",
            StrategyKind::Ewc => "EWC",
            StrategyKind::Mas => "MAS",
            StrategyKind::FtReplay => "FT_Ek",
            StrategyKind::LwfReplay => "LWF_Ek",
        };
        f.write_str(s)
    }
}

/// Short labels of the kinds without an exemplar count.
pub fn kind_names() -> Vec<String> {
    StrategyKind::ALL.iter().map(|k| k.to_string()).collect()
}
