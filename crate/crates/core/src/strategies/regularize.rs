//! Quadratic parameter anchoring and the two importance estimators.
//!
//! The penalty is `λ/2 · Σ_i Ω_i (θ_i − θ*_i)²` over the parameters that
//! existed when the anchor `θ*` was taken. EWC estimates `Ω` as the empirical
//! Fisher diagonal (squared gradient of the true-label log-likelihood); MAS as
//! the mean absolute gradient of `½‖z‖²`, with `z` the concatenated logits.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{accumulate_ce, Gradients, HeadSet, ModelState, ParamSnapshot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMap {
    pub values: Vec<f64>,
    /// Last session folded into the map.
    pub session: usize,
    /// Number of samples behind the running mean.
    pub samples: usize,
}

impl ImportanceMap {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample-weighted running mean. The older map is zero-padded to the
    /// newer (longer) parameter layout.
    pub fn merge(previous: Option<ImportanceMap>, fresh: ImportanceMap) -> ImportanceMap {
        let Some(prev) = previous else {
            return fresh;
        };
        let total = prev.samples + fresh.samples;
        let (wp, wf) = (
            prev.samples as f64 / total as f64,
            fresh.samples as f64 / total as f64,
        );
        let values = fresh
            .values
            .iter()
            .enumerate()
            .map(|(i, &f)| wp * prev.values.get(i).copied().unwrap_or(0.0) + wf * f)
            .collect();
        ImportanceMap {
            values,
            session: fresh.session,
            samples: total,
        }
    }
}

/// `λ/2 · Σ Ω_i (θ_i − θ*_i)²` and its gradient `λ Ω_i (θ_i − θ*_i)`.
pub fn param_reg_loss(
    model: &ModelState,
    anchor: &ParamSnapshot,
    importance: &ImportanceMap,
    lambda: f64,
) -> Result<(f64, Gradients)> {
    let n = importance.len();
    if anchor.params().len() != n {
        return Err(Error::ShapeMismatch {
            expected: anchor.params().len(),
            found: n,
        });
    }
    if n > model.num_params() {
        return Err(Error::ShapeMismatch {
            expected: model.num_params(),
            found: n,
        });
    }
    let theta = model.params();
    let mut grads = Gradients::zeros(model.num_params());
    let mut sum = 0.0;
    let terms = theta.iter().zip(anchor.params()).zip(&importance.values);
    for (g, ((t, a), w)) in grads.0.iter_mut().zip(terms) {
        let delta = t - a;
        sum += w * delta * delta;
        *g = lambda * w * delta;
    }
    Ok((0.5 * lambda * sum, grads))
}

/// Diagonal empirical Fisher over `samples` (global labels), all heads.
pub fn ewc_importance(
    model: &ModelState,
    samples: &[(&[f64], usize)],
    session: usize,
) -> Result<ImportanceMap> {
    if samples.is_empty() {
        return Err(Error::EmptyData);
    }
    let classes = model.class_range(HeadSet::All)?;
    let n = model.num_params();
    let mut values = vec![0.0; n];
    let mut g = vec![0.0; n];
    let scale = 1.0 / samples.len() as f64;
    for &(x, label) in samples {
        g.iter_mut().for_each(|v| *v = 0.0);
        accumulate_ce(model, x, label, classes.clone(), 1.0, &mut g)?;
        for (v, gi) in values.iter_mut().zip(&g) {
            *v += scale * gi * gi;
        }
    }
    Ok(ImportanceMap {
        values,
        session,
        samples: samples.len(),
    })
}

/// Mean absolute gradient of `½‖logits‖²` over `inputs`; needs no labels.
pub fn mas_importance(model: &ModelState, inputs: &[&[f64]], session: usize) -> Result<ImportanceMap> {
    if inputs.is_empty() {
        return Err(Error::EmptyData);
    }
    let classes = model.class_range(HeadSet::All)?;
    let n = model.num_params();
    let mut values = vec![0.0; n];
    let mut g = vec![0.0; n];
    let scale = 1.0 / inputs.len() as f64;
    for &x in inputs {
        g.iter_mut().for_each(|v| *v = 0.0);
        let rep = model.representation(x)?;
        let logits = model.logits_from(&rep, classes.clone());
        model.backward(x, &rep, classes.clone(), &logits, &mut g);
        for (v, gi) in values.iter_mut().zip(&g) {
            *v += scale * gi.abs();
        }
    }
    Ok(ImportanceMap {
        values,
        session,
        samples: inputs.len(),
    })
}
