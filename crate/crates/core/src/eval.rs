//! Cumulative-test evaluation and the summary metrics.
//!
//! Accuracies are percentages in `[0, 100]`. The performance drop is the
//! first-session accuracy minus the last, and the average accuracy is the
//! unweighted mean over sessions (with a variant that skips session 0).

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{cumulative_test, CilData};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Featurizer};
use crate::model::{predict, ModelState};

/// A featurized test document.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub features: FeatureVector,
    pub label: usize,
    /// Session that introduced the author.
    pub origin: usize,
}

/// Cumulative test set through session `t`, featurized.
pub fn cumulative_items(cil: &CilData, t: usize, featurizer: &Featurizer) -> Result<Vec<EvalItem>> {
    Ok(cumulative_test(cil, t)?
        .into_iter()
        .flat_map(|e| {
            e.documents.iter().map(move |d| EvalItem {
                features: featurizer.featurize(d),
                label: e.iid,
                origin: e.session,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    /// Row-major, `counts[true * classes + predicted]`.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.classes..(truth + 1) * self.classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginAccuracy {
    pub session: usize,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Evaluation after training one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEval {
    pub session: usize,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// Accuracy restricted to the authors of each earlier session.
    pub per_origin: Vec<OriginAccuracy>,
}

fn percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64 * 100.0
    }
}

/// Scores `items` with [`predict`] over all heads.
pub fn evaluate_items(
    model: &ModelState,
    items: &[EvalItem],
    session: usize,
) -> Result<(SessionEval, ConfusionMatrix)> {
    let classes = items
        .iter()
        .map(|i| i.label + 1)
        .chain(core::iter::once(model.num_classes()))
        .max()
        .unwrap_or(0);
    let mut confusion = ConfusionMatrix::new(classes);
    let origins = items.iter().map(|i| i.origin + 1).max().unwrap_or(0).max(session + 1);
    let mut per = vec![(0usize, 0usize); origins];
    let mut correct = 0;
    for item in items {
        let p = predict(model, item.features.as_slice())?;
        confusion.counts[item.label * classes + p] += 1;
        per[item.origin].1 += 1;
        if p == item.label {
            correct += 1;
            per[item.origin].0 += 1;
        }
    }
    let per_origin = per
        .into_iter()
        .enumerate()
        .map(|(s, (c, n))| OriginAccuracy {
            session: s,
            correct: c,
            total: n,
            accuracy: percent(c, n),
        })
        .collect();
    Ok((
        SessionEval {
            session,
            correct,
            total: items.len(),
            accuracy: percent(correct, items.len()),
            per_origin,
        },
        confusion,
    ))
}

/// Accuracy of `model` on the cumulative test set of session `t`.
pub fn evaluate(
    model: &ModelState,
    cil: &CilData,
    t: usize,
    featurizer: &Featurizer,
) -> Result<(SessionEval, ConfusionMatrix)> {
    let items = cumulative_items(cil, t, featurizer)?;
    evaluate_items(model, &items, t)
}

/// Row `t` holds the evaluation after training session `t`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub rows: Vec<SessionEval>,
}

impl AccuracyMatrix {
    pub fn push(&mut self, row: SessionEval) {
        self.rows.push(row);
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.accuracy).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// `acc[0] − acc[last]`.
pub fn performance_drop(accuracies: &[f64]) -> Result<f64> {
    match accuracies {
        [first, .., last] => Ok(first - last),
        _ => Err(Error::NotEnoughSessions {
            needed: 2,
            found: accuracies.len(),
        }),
    }
}

/// Mean over every session, session 0 included.
pub fn average_accuracy(accuracies: &[f64]) -> Result<f64> {
    if accuracies.is_empty() {
        return Err(Error::NotEnoughSessions { needed: 1, found: 0 });
    }
    Ok(accuracies.iter().sum::<f64>() / accuracies.len() as f64)
}

/// Mean over the incremental sessions `1..`.
pub fn average_accuracy_incremental(accuracies: &[f64]) -> Result<f64> {
    if accuracies.len() < 2 {
        return Err(Error::NotEnoughSessions {
            needed: 2,
            found: accuracies.len(),
        });
    }
    average_accuracy(&accuracies[1..])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub matrix: AccuracyMatrix,
    /// `None` for single-session runs.
    pub pd: Option<f64>,
    pub avg_a: f64,
    pub avg_a_incremental: Option<f64>,
    /// Confusion at the last evaluated session.
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn new(matrix: AccuracyMatrix, confusion: ConfusionMatrix) -> Result<Self> {
        let acc = matrix.accuracies();
        Ok(Self {
            pd: performance_drop(&acc).ok(),
            avg_a: average_accuracy(&acc)?,
            avg_a_incremental: average_accuracy_incremental(&acc).ok(),
            matrix,
            confusion,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(x: Vec<f64>, label: usize, origin: usize) -> EvalItem {
        EvalItem {
            features: x.into(),
            label,
            origin,
        }
    }

    #[test]
    fn perfect_two_author_model() {
        let m = ModelState::from_parts(2, 0, &[2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let items = vec![
            item(vec![1.0, 0.0], 0, 0),
            item(vec![0.9, 0.1], 0, 0),
            item(vec![0.0, 1.0], 1, 0),
            item(vec![0.2, 0.8], 1, 0),
        ];
        let (e, c) = evaluate_items(&m, &items, 0).unwrap();
        assert_eq!(e.accuracy, 100.0);
        assert_eq!(c.counts, vec![2, 0, 0, 2]);
    }

    #[test]
    fn constant_prediction_is_chance() {
        // Zero model: every logit ties, so class 0 always wins.
        let m = ModelState::from_parts(1, 0, &[2, 2], vec![0.0; 8]).unwrap();
        let items: Vec<EvalItem> = (0..4)
            .flat_map(|c| (0..3).map(move |_| item(vec![1.0], c, c / 2)))
            .collect();
        let (e, c) = evaluate_items(&m, &items, 1).unwrap();
        assert_eq!(e.accuracy, 25.0);
        assert_eq!(e.per_origin[0].accuracy, 50.0);
        assert_eq!(e.per_origin[1].accuracy, 0.0);
        assert_eq!(c.total(), 12);
        for k in 0..4 {
            assert_eq!(c.row(k).iter().sum::<u64>(), 3);
            assert_eq!(c.get(k, 0), 3);
        }
    }

    #[test]
    fn accuracy_matches_prediction_log_recount() {
        let mut rng = crate::rng::SeededRng::new(5);
        let mut m = ModelState::new(3, 2, &mut rng);
        crate::model::add_head(&mut m, 3, &mut rng).unwrap();
        let items: Vec<EvalItem> = (0..60)
            .map(|i| {
                item(
                    (0..3).map(|_| rng.symmetric(1.0)).collect(),
                    i % 3,
                    0,
                )
            })
            .collect();
        let log: Vec<usize> = items
            .iter()
            .map(|i| predict(&m, i.features.as_slice()).unwrap())
            .collect();
        let hits = log.iter().zip(&items).filter(|(p, i)| **p == i.label).count();
        let (e, c) = evaluate_items(&m, &items, 0).unwrap();
        assert_eq!(e.correct, hits);
        assert!((e.accuracy - hits as f64 / 60.0 * 100.0).abs() < 1e-12);
        assert!((c.trace() as f64 / c.total() as f64 - e.accuracy / 100.0).abs() < 1e-9);
    }

    #[test]
    fn performance_drop_values() {
        let blog50_ft = [83.86, 30.9, 14.08, 11.92, 12.29, 11.02];
        assert!((performance_drop(&blog50_ft).unwrap() - 72.84).abs() < 0.005);
        let ccat50_ft = [87.6, 28.99, 19.0, 14.62, 12.33, 10.6];
        assert!((performance_drop(&ccat50_ft).unwrap() - 77.0).abs() < 0.005);
        assert_eq!(performance_drop(&[40.0, 40.0, 40.0]).unwrap(), 0.0);
        assert!(matches!(
            performance_drop(&[50.0]),
            Err(Error::NotEnoughSessions { needed: 2, found: 1 })
        ));
    }

    #[test]
    fn average_accuracy_values() {
        assert_eq!(average_accuracy(&[33.0; 4]).unwrap(), 33.0);
        assert_eq!(average_accuracy(&[100.0, 0.0]).unwrap(), 50.0);
        // Blog50 FT with its initial-session accuracy, summed by hand:
        // 83.86 + 30.9 + 14.08 + 11.92 + 12.29 + 11.02 = 164.07.
        let row = [83.86, 30.9, 14.08, 11.92, 12.29, 11.02];
        assert!((average_accuracy(&row).unwrap() - 164.07 / 6.0).abs() < 1e-9);
        // 80.21 / 5 without session 0.
        assert!((average_accuracy_incremental(&row).unwrap() - 16.042).abs() < 1e-9);
        assert!(average_accuracy(&[]).is_err());
    }

    #[test]
    fn report_from_matrix() {
        let mut matrix = AccuracyMatrix::default();
        for (s, a) in [(0, 90.0), (1, 60.0)] {
            matrix.push(SessionEval {
                session: s,
                correct: 0,
                total: 0,
                accuracy: a,
                per_origin: vec![],
            });
        }
        let r = EvalReport::new(matrix, ConfusionMatrix::new(0)).unwrap();
        assert_eq!(r.pd, Some(30.0));
        assert_eq!(r.avg_a, 75.0);
        assert_eq!(r.avg_a_incremental, Some(60.0));
    }
}
