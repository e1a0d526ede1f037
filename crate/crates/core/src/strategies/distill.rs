//! Learning-without-forgetting objective.
//!
//! `L = CE(current head) + λ · mean_x Σ_{k < K_old} −p_k log q_k`, where `p`
//! is the frozen previous model's softmax over its classes and `q` the current
//! model's softmax over the same classes, both at temperature `τ`. The teacher
//! is a constant; only the student receives gradients.

use alloc::vec::Vec;
use core::ops::Range;

use super::{all_heads_weight_decay, mixed_ce, Item, StrategyConfig};
use crate::error::{Error, Result};
use crate::model::{
    accumulate_ce, forward, log_sum_exp, softmax_t, Gradients, HeadSet, ModelState, ParamSnapshot,
};

fn old_classes(model: &ModelState, teacher: &ParamSnapshot) -> Result<Range<usize>> {
    let old = teacher.model().num_classes();
    if old == 0 || model.num_heads() < 2 {
        return Err(Error::MissingSnapshot {
            session: model.num_heads().saturating_sub(1),
        });
    }
    let current = model.heads()[model.num_heads() - 1];
    if current.class_offset != old {
        return Err(Error::ShapeMismatch {
            expected: current.class_offset,
            found: old,
        });
    }
    Ok(0..old)
}

/// Adds `scale * dD/dθ` and returns `D`, the cross-entropy of the student's
/// tempered softmax against the teacher's on the old classes.
fn accumulate_distill(
    model: &ModelState,
    teacher: &ModelState,
    x: &[f64],
    old: Range<usize>,
    temperature: f64,
    scale: f64,
    grads: &mut [f64],
) -> Result<f64> {
    let target = softmax_t(&forward(teacher, x, HeadSet::All)?, temperature);
    let rep = model.representation(x)?;
    let logits = model.logits_from(&rep, old.clone());
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    let lse = log_sum_exp(&scaled);
    let mut d = 0.0;
    let mut dlogits = Vec::with_capacity(scaled.len());
    for (k, &s) in scaled.iter().enumerate() {
        let log_q = s - lse;
        d -= target[k] * log_q;
        dlogits.push(scale * (libm::exp(log_q) - target[k]) / temperature);
    }
    if scale != 0.0 {
        model.backward(x, &rep, old, &dlogits, grads);
    }
    Ok(d)
}

/// Distillation term for one input (no gradient).
pub fn distill_term(
    model: &ModelState,
    teacher: &ParamSnapshot,
    x: &[f64],
    temperature: f64,
) -> Result<f64> {
    let old = old_classes(model, teacher)?;
    let mut scratch = [];
    accumulate_distill(model, teacher.model(), x, old, temperature, 0.0, &mut scratch)
}

/// LWF loss and gradient on a batch of current-session samples.
pub fn lwf_loss(
    model: &ModelState,
    teacher: &ParamSnapshot,
    batch: &[(&[f64], usize)],
    cfg: &StrategyConfig,
    weight_decay: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyData);
    }
    let old = old_classes(model, teacher)?;
    let current = model.class_range(HeadSet::Only(model.num_heads() - 1))?;
    let scale = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros(model.num_params());
    let mut ce = 0.0;
    let mut distill = 0.0;
    for &(x, label) in batch {
        ce += accumulate_ce(model, x, label, current.clone(), scale, &mut grads.0)?;
        if cfg.lambda_distill != 0.0 {
            distill += accumulate_distill(
                model,
                teacher.model(),
                x,
                old.clone(),
                cfg.distill_temperature,
                cfg.lambda_distill * scale,
                &mut grads.0,
            )?;
        }
    }
    let mut loss = ce * scale + cfg.lambda_distill * distill * scale;
    loss += all_heads_weight_decay(model, weight_decay, &mut grads);
    Ok((loss, grads))
}

/// LWF with replay: current samples use the current head's cross-entropy,
/// exemplars use cross-entropy over all heads, and every sample is distilled.
pub(crate) fn lwf_replay_loss(
    model: &ModelState,
    teacher: &ParamSnapshot,
    batch: &[Item<'_>],
    cfg: &StrategyConfig,
    weight_decay: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyData);
    }
    let old = old_classes(model, teacher)?;
    let t = model.num_heads() - 1;
    let scale = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros(model.num_params());
    let mut loss = mixed_ce(model, batch, HeadSet::Only(t), HeadSet::All, scale, &mut grads)?;
    if cfg.lambda_distill != 0.0 {
        let mut distill = 0.0;
        for item in batch {
            distill += accumulate_distill(
                model,
                teacher.model(),
                item.x,
                old.clone(),
                cfg.distill_temperature,
                cfg.lambda_distill * scale,
                &mut grads.0,
            )?;
        }
        loss += cfg.lambda_distill * distill * scale;
    }
    loss += all_heads_weight_decay(model, weight_decay, &mut grads);
    Ok((loss, grads))
}
