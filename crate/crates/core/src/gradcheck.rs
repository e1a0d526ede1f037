//! Central finite-difference gradient checking.

use crate::model::{Gradients, ModelState};

/// Denominator floor for the relative error of near-zero gradients.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares `analytic` against `(L(θ + ε e_i) − L(θ − ε e_i)) / 2ε` for every
/// parameter, with relative error `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn check_gradients<F>(model: &ModelState, analytic: &Gradients, eps: f64, mut loss: F) -> GradCheck
where
    F: FnMut(&ModelState) -> f64,
{
    let mut probe = model.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for i in 0..model.num_params() {
        let orig = model.params()[i];
        probe.params_mut()[i] = orig + eps;
        let up = loss(&probe);
        probe.params_mut()[i] = orig - eps;
        let down = loss(&probe);
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic.0[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > out.max_rel_error {
            out = GradCheck {
                max_rel_error: rel,
                worst_index: i,
                analytic: a,
                numeric,
            };
        }
    }
    out
}
