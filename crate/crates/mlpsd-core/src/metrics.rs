//! Multi-label evaluation: ranking AP/mAP and thresholded P/R/F1.
//!
//! Average precision is the all-point (non-interpolated) variant, with ties
//! in the score ranking broken by ascending sample index so results are
//! reproducible to the last bit. Categories without a single ground-truth
//! positive have no defined AP; they are skipped from the per-category means
//! and listed in the report.

use alloc::vec::Vec;

use ndarray::Array2;

use crate::dataset::AnnotationSet;
use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::model::{forward, MultiLabelModel};

/// Evaluation summary. `cp`/`cr`/`cf1` average per-category precision,
/// recall, F1 over categories with ground-truth positives; `op`/`or_`/`of1`
/// pool every (sample, category) decision.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub map: f64,
    pub per_category_ap: Vec<Option<f64>>,
    pub cp: f64,
    pub cr: f64,
    pub cf1: f64,
    pub op: f64,
    pub or_: f64,
    pub of1: f64,
    pub threshold: f64,
    pub n_eval: usize,
    pub skipped_categories: Vec<usize>,
}

/// All-point average precision of one score column.
///
/// Returns `None` when there is no positive label (AP undefined; callers
/// skip the category). Ranking is by descending score, ties by ascending
/// sample index.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> Option<f64> {
    debug_assert_eq!(scores.len(), labels.len());
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return None;
    }
    let order = ranked_order(scores);
    let mut hits = 0usize;
    let mut sum = 0.0f64;
    for (rank0, &idx) in order.iter().enumerate() {
        if labels[idx] == 1 {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

fn ranked_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Runs the model on the whole set and scores it at the given probability
/// threshold. The model must predict all m categories in original order.
pub fn evaluate(
    model: &MultiLabelModel,
    set: &AnnotationSet,
    threshold: f64,
) -> Result<MetricsReport> {
    let m = set.num_categories();
    let covers_all = model.category_subset.len() == m
        && model.category_subset.iter().enumerate().all(|(j, &c)| c == j);
    if !covers_all {
        return Err(Error::IncompleteModel { m });
    }
    let logits = forward(model, &set.feature_matrix())?;
    let probabilities = logits.values.mapv(sigmoid);
    Ok(report_from_probabilities(
        &probabilities,
        &set.label_matrix(),
        threshold,
    ))
}

/// Scores an n x m probability matrix against binary labels.
pub fn report_from_probabilities(
    probabilities: &Array2<f64>,
    labels: &Array2<u8>,
    threshold: f64,
) -> MetricsReport {
    let (n, m) = probabilities.dim();
    debug_assert_eq!(labels.dim(), (n, m));

    let mut per_category_ap: Vec<Option<f64>> = Vec::with_capacity(m);
    let mut skipped_categories = Vec::new();
    let mut ap_sum = 0.0f64;
    let mut precision_sum = 0.0f64;
    let mut recall_sum = 0.0f64;
    let mut scored = 0usize;

    let mut tp_total = 0u64;
    let mut predicted_total = 0u64;
    let mut actual_total = 0u64;

    for j in 0..m {
        let scores: Vec<f64> = (0..n).map(|i| probabilities[[i, j]]).collect();
        let column: Vec<u8> = (0..n).map(|i| labels[[i, j]]).collect();

        let mut tp = 0u64;
        let mut predicted = 0u64;
        let mut actual = 0u64;
        for i in 0..n {
            let positive = scores[i] >= threshold;
            if positive {
                predicted += 1;
            }
            if column[i] == 1 {
                actual += 1;
                if positive {
                    tp += 1;
                }
            }
        }
        tp_total += tp;
        predicted_total += predicted;
        actual_total += actual;

        match average_precision(&scores, &column) {
            Some(ap) => {
                per_category_ap.push(Some(ap));
                ap_sum += ap;
                precision_sum += ratio(tp, predicted);
                recall_sum += ratio(tp, actual);
                scored += 1;
            }
            None => {
                per_category_ap.push(None);
                skipped_categories.push(j);
            }
        }
    }

    let map = if scored > 0 {
        ap_sum / scored as f64
    } else {
        0.0
    };
    let cp = if scored > 0 {
        precision_sum / scored as f64
    } else {
        0.0
    };
    let cr = if scored > 0 {
        recall_sum / scored as f64
    } else {
        0.0
    };
    let op = ratio(tp_total, predicted_total);
    let or_ = ratio(tp_total, actual_total);

    MetricsReport {
        map,
        per_category_ap,
        cp,
        cr,
        cf1: f1(cp, cr),
        op,
        or_,
        of1: f1(op, or_),
        threshold,
        n_eval: n,
        skipped_categories,
    }
}

fn ratio(numerator: u64, denominator: u64) -> f64 {
    if denominator > 0 {
        numerator as f64 / denominator as f64
    } else {
        0.0
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}
