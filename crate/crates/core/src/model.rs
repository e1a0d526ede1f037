//! Shared trunk plus an expanding list of per-session linear heads.
//!
//! All parameters live in one flat vector: the trunk (`W1` row-major, then
//! `b1`) followed by each head in creation order (`W2` row-major, then `b2`).
//! Adding a head only appends, so snapshots, importance maps and gradients of
//! earlier sessions stay index-compatible with later models.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub classes: usize,
    /// First global class id of the head.
    pub class_offset: usize,
    /// First parameter index of the head.
    pub param_offset: usize,
}

/// Which heads contribute logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadSet {
    All,
    /// Heads `0..=t`.
    UpTo(usize),
    /// Head `t` only.
    Only(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    feature_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
    heads: Vec<HeadLayout>,
}

fn uniform_scaled(rng: &mut SeededRng, fan_in: usize, fan_out: usize, out: &mut Vec<f64>, n: usize) {
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    out.extend((0..n).map(|_| rng.symmetric(bound)));
}

impl ModelState {
    /// A model with an initialised trunk and no heads. `hidden_dim == 0`
    /// makes the trunk the identity.
    pub fn new(feature_dim: usize, hidden_dim: usize, rng: &mut SeededRng) -> Self {
        let mut params = Vec::with_capacity(hidden_dim * feature_dim + hidden_dim);
        if hidden_dim > 0 {
            uniform_scaled(rng, feature_dim, hidden_dim, &mut params, hidden_dim * feature_dim);
            params.extend(core::iter::repeat_n(0.0, hidden_dim));
        }
        Self {
            feature_dim,
            hidden_dim,
            params,
            heads: Vec::new(),
        }
    }

    /// Rebuilds a model from persisted parts.
    pub fn from_parts(
        feature_dim: usize,
        hidden_dim: usize,
        head_classes: &[usize],
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut model = Self {
            feature_dim,
            hidden_dim,
            params: Vec::new(),
            heads: Vec::new(),
        };
        let mut expected = model.trunk_len();
        for &classes in head_classes {
            model.heads.push(HeadLayout {
                classes,
                class_offset: model.num_classes(),
                param_offset: expected,
            });
            expected += classes * model.rep_dim() + classes;
        }
        if params.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: params.len(),
            });
        }
        if let Some(index) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteParameter { index });
        }
        model.params = params;
        Ok(model)
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// Width of the representation fed to the heads.
    pub fn rep_dim(&self) -> usize {
        if self.hidden_dim == 0 {
            self.feature_dim
        } else {
            self.hidden_dim
        }
    }

    pub fn trunk_len(&self) -> usize {
        self.hidden_dim * self.feature_dim + self.hidden_dim
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn num_classes(&self) -> usize {
        self.heads.last().map_or(0, |h| h.class_offset + h.classes)
    }

    pub fn heads(&self) -> &[HeadLayout] {
        &self.heads
    }

    pub fn head_classes(&self) -> Vec<usize> {
        self.heads.iter().map(|h| h.classes).collect()
    }

    pub fn class_offsets(&self) -> Vec<usize> {
        self.heads.iter().map(|h| h.class_offset).collect()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the flat parameter vector (tests, custom optimisers).
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn trunk_params(&self) -> &[f64] {
        &self.params[..self.trunk_len()]
    }

    pub fn head_param_range(&self, head: usize) -> Range<usize> {
        let h = self.heads[head];
        h.param_offset..h.param_offset + h.classes * self.rep_dim() + h.classes
    }

    pub fn head_params(&self, head: usize) -> &[f64] {
        &self.params[self.head_param_range(head)]
    }

    /// Head indices selected by `set`.
    pub fn head_range(&self, set: HeadSet) -> Result<Range<usize>> {
        let n = self.heads.len();
        let check = |t: usize| {
            if t < n {
                Ok(())
            } else {
                Err(Error::HeadOutOfRange { head: t, heads: n })
            }
        };
        match set {
            HeadSet::All => Ok(0..n),
            HeadSet::UpTo(t) => check(t).map(|_| 0..t + 1),
            HeadSet::Only(t) => check(t).map(|_| t..t + 1),
        }
    }

    /// Global class ids covered by `set`.
    pub fn class_range(&self, set: HeadSet) -> Result<Range<usize>> {
        let heads = self.head_range(set)?;
        if heads.is_empty() {
            return Ok(0..0);
        }
        let first = self.heads[heads.start];
        let last = self.heads[heads.end - 1];
        Ok(first.class_offset..last.class_offset + last.classes)
    }

    fn head_of_class(&self, class: usize) -> usize {
        self.heads
            .partition_point(|h| h.class_offset + h.classes <= class)
    }

    /// Parameter index of the weight row start and of the bias of `class`.
    fn class_params(&self, class: usize) -> (usize, usize) {
        let h = self.heads[self.head_of_class(class)];
        let local = class - h.class_offset;
        let d = self.rep_dim();
        (
            h.param_offset + local * d,
            h.param_offset + h.classes * d + local,
        )
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Trunk output: `tanh(W1 x + b1)`, or `x` itself for the identity trunk.
    pub fn representation(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if self.hidden_dim == 0 {
            return Ok(x.to_vec());
        }
        let f = self.feature_dim;
        let bias = &self.params[self.hidden_dim * f..self.trunk_len()];
        let nz: Vec<usize> = (0..f).filter(|&i| x[i] != 0.0).collect();
        Ok((0..self.hidden_dim)
            .map(|j| {
                let row = &self.params[j * f..(j + 1) * f];
                let mut acc = 0.0;
                for &i in &nz {
                    acc += row[i] * x[i];
                }
                libm::tanh(acc + bias[j])
            })
            .collect())
    }

    /// Logits of `classes` given a trunk representation.
    pub fn logits_from(&self, rep: &[f64], classes: Range<usize>) -> Vec<f64> {
        let d = self.rep_dim();
        classes
            .map(|c| {
                let (w, b) = self.class_params(c);
                let row = &self.params[w..w + d];
                let mut acc = 0.0;
                for (wi, ri) in row.iter().zip(rep) {
                    acc += wi * ri;
                }
                acc + self.params[b]
            })
            .collect()
    }

    /// Accumulates into `grads` the parameter gradient given `dlogits`, the
    /// loss gradient with respect to the logits of `classes`.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        rep: &[f64],
        classes: Range<usize>,
        dlogits: &[f64],
        grads: &mut [f64],
    ) {
        debug_assert_eq!(classes.len(), dlogits.len());
        let d = self.rep_dim();
        let mut drep = vec![0.0; d];
        for (c, &dz) in classes.zip(dlogits) {
            if dz == 0.0 {
                continue;
            }
            let (w, b) = self.class_params(c);
            for i in 0..d {
                grads[w + i] += dz * rep[i];
                drep[i] += dz * self.params[w + i];
            }
            grads[b] += dz;
        }
        if self.hidden_dim == 0 {
            return;
        }
        let f = self.feature_dim;
        let bias = self.hidden_dim * f;
        let nz: Vec<usize> = (0..f).filter(|&i| x[i] != 0.0).collect();
        for j in 0..self.hidden_dim {
            let dpre = drep[j] * (1.0 - rep[j] * rep[j]);
            if dpre == 0.0 {
                continue;
            }
            for &i in &nz {
                grads[j * f + i] += dpre * x[i];
            }
            grads[bias + j] += dpre;
        }
    }

    /// Order-sensitive fingerprint of all parameter bits.
    pub fn fingerprint(&self) -> u64 {
        fingerprint(&self.params)
    }

    pub fn trunk_fingerprint(&self) -> u64 {
        fingerprint(self.trunk_params())
    }
}

/// FNV-1a over the IEEE-754 bits.
pub fn fingerprint(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Parameter gradient, laid out like [`ModelState::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Which parameter blocks an update may touch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainMask {
    pub trunk: bool,
    pub heads: Vec<bool>,
}

impl TrainMask {
    pub fn all(model: &ModelState) -> Self {
        Self {
            trunk: true,
            heads: vec![true; model.num_heads()],
        }
    }

    pub fn none(model: &ModelState) -> Self {
        Self {
            trunk: false,
            heads: vec![false; model.num_heads()],
        }
    }

    /// Trunk plus head `t`.
    pub fn trunk_and_head(model: &ModelState, t: usize) -> Self {
        let mut m = Self::head_only(model, t);
        m.trunk = true;
        m
    }

    pub fn heads_only(model: &ModelState) -> Self {
        Self {
            trunk: false,
            heads: vec![true; model.num_heads()],
        }
    }

    pub fn head_only(model: &ModelState, t: usize) -> Self {
        let mut heads = vec![false; model.num_heads()];
        if let Some(h) = heads.get_mut(t) {
            *h = true;
        }
        Self {
            trunk: false,
            heads,
        }
    }

    pub fn ranges(&self, model: &ModelState) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        if self.trunk && model.trunk_len() > 0 {
            out.push(0..model.trunk_len());
        }
        for (h, &on) in self.heads.iter().enumerate() {
            if on && h < model.num_heads() {
                out.push(model.head_param_range(h));
            }
        }
        out
    }
}

/// A frozen deep copy of a model, tagged with the session it closed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot {
    session: usize,
    model: ModelState,
}

impl ParamSnapshot {
    pub fn new(session: usize, model: ModelState) -> Self {
        Self { session, model }
    }

    pub fn session(&self) -> usize {
        self.session
    }

    pub fn model(&self) -> &ModelState {
        &self.model
    }

    pub fn params(&self) -> &[f64] {
        self.model.params()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    UniformScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub init: InitScheme,
    /// Trunk width; 0 for an identity trunk.
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 5,
            batch_size: 32,
            weight_decay: 0.0,
            seed: 0,
            init: InitScheme::UniformScaled,
            hidden_dim: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidTrainConfig(alloc::format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidTrainConfig("batch_size must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidTrainConfig(alloc::format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Logits over the classes of `heads`, ordered by global class id.
pub fn forward(model: &ModelState, x: &[f64], heads: HeadSet) -> Result<Vec<f64>> {
    let classes = model.class_range(heads)?;
    let rep = model.representation(x)?;
    Ok(model.logits_from(&rep, classes))
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(logits.iter().map(|z| libm::exp(z - m)).sum::<f64>())
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| libm::exp(z - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Softmax of `logits / temperature`.
pub fn softmax_t(logits: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    softmax(&scaled)
}

/// Adds `scale * d(-log p_label)/dθ` for one sample and returns `-log p_label`.
pub(crate) fn accumulate_ce(
    model: &ModelState,
    x: &[f64],
    label: usize,
    classes: Range<usize>,
    scale: f64,
    grads: &mut [f64],
) -> Result<f64> {
    if !classes.contains(&label) {
        return Err(Error::LabelOutOfRange {
            label,
            start: classes.start,
            end: classes.end,
        });
    }
    let rep = model.representation(x)?;
    let logits = model.logits_from(&rep, classes.clone());
    let local = label - classes.start;
    let nll = log_sum_exp(&logits) - logits[local];
    let mut d = softmax(&logits);
    d[local] -= 1.0;
    for v in &mut d {
        *v *= scale;
    }
    model.backward(x, &rep, classes, &d, grads);
    Ok(nll)
}

/// Adds the gradient of `wd/2 * ||θ||²` over the trunk and `heads`; returns the penalty.
pub(crate) fn accumulate_weight_decay(
    model: &ModelState,
    heads: Range<usize>,
    weight_decay: f64,
    grads: &mut [f64],
) -> f64 {
    if weight_decay == 0.0 {
        return 0.0;
    }
    let mut ranges = Vec::new();
    if model.trunk_len() > 0 {
        ranges.push(0..model.trunk_len());
    }
    ranges.extend(heads.map(|h| model.head_param_range(h)));
    let mut sq = 0.0;
    for r in ranges {
        for i in r {
            let p = model.params[i];
            sq += p * p;
            grads[i] += weight_decay * p;
        }
    }
    0.5 * weight_decay * sq
}

/// Mean cross-entropy over `batch` on the classes of `heads`, plus
/// `weight_decay/2 * ||θ||²` over the trunk and the selected heads.
/// Labels are global class ids.
pub fn ce_loss_and_grads(
    model: &ModelState,
    batch: &[(&[f64], usize)],
    heads: HeadSet,
    weight_decay: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyData);
    }
    let classes = model.class_range(heads)?;
    let mut grads = Gradients::zeros(model.num_params());
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for &(x, label) in batch {
        loss += accumulate_ce(model, x, label, classes.clone(), scale, &mut grads.0)?;
    }
    loss *= scale;
    loss += accumulate_weight_decay(model, model.head_range(heads)?, weight_decay, &mut grads.0);
    Ok((loss, grads))
}

/// `θ ← θ − lr·g` on the blocks enabled by `mask`; other parameters keep their bits.
pub fn sgd_step(model: &mut ModelState, grads: &Gradients, lr: f64, mask: &TrainMask) -> Result<()> {
    if grads.len() != model.num_params() {
        return Err(Error::ShapeMismatch {
            expected: model.num_params(),
            found: grads.len(),
        });
    }
    if let Some(index) = grads.0.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            index,
            value: grads.0[index],
        });
    }
    if lr == 0.0 {
        return Ok(());
    }
    for r in mask.ranges(model) {
        for i in r {
            let next = model.params[i] - lr * grads.0[i];
            if !next.is_finite() {
                return Err(Error::NonFiniteParameter { index: i });
            }
            model.params[i] = next;
        }
    }
    Ok(())
}

/// Appends a head for `num_new_classes` classes; existing parameters are untouched.
pub fn add_head(model: &mut ModelState, num_new_classes: usize, rng: &mut SeededRng) -> Result<()> {
    if num_new_classes == 0 {
        return Err(Error::InvalidStrategyConfig("a head needs at least one class".into()));
    }
    let d = model.rep_dim();
    let layout = HeadLayout {
        classes: num_new_classes,
        class_offset: model.num_classes(),
        param_offset: model.params.len(),
    };
    uniform_scaled(rng, d, num_new_classes, &mut model.params, num_new_classes * d);
    model
        .params
        .extend(core::iter::repeat_n(0.0, num_new_classes));
    model.heads.push(layout);
    Ok(())
}

pub fn snapshot(model: &ModelState, session: usize) -> ParamSnapshot {
    ParamSnapshot::new(session, model.clone())
}

/// Argmax over all heads; ties go to the lowest class id.
pub fn predict(model: &ModelState, x: &[f64]) -> Result<usize> {
    if model.num_heads() == 0 {
        return Err(Error::EmptyModel);
    }
    let logits = forward(model, x, HeadSet::All)?;
    Ok(argmax(&logits))
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
