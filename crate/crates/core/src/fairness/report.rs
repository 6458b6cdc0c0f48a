use serde::{Deserialize, Serialize};

use crate::numcore::Matrix;

use super::forest::ForestModel;
use super::{FairnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// One-vs-rest metrics from a confusion matrix. A class never predicted has
/// precision 0.
pub fn report_from_confusion(confusion: &[Vec<usize>], labels: &[&str]) -> Result<ClassificationReport> {
    let k = confusion.len();
    if k == 0 || labels.len() != k || confusion.iter().any(|r| r.len() != k) {
        return Err(FairnessError::InvalidArgument("confusion matrix must be square and labelled".into()));
    }
    let total: usize = confusion.iter().flatten().sum();
    let mut classes = Vec::with_capacity(k);
    for c in 0..k {
        let tp = confusion[c][c];
        let predicted: usize = (0..k).map(|t| confusion[t][c]).sum();
        let support: usize = confusion[c].iter().sum();
        let p = ratio(tp, predicted);
        let r = ratio(tp, support);
        classes.push(ClassMetrics {
            label: labels[c].to_string(),
            precision: p,
            recall: r,
            f1: f1(p, r),
            support,
        });
    }
    let kf = k as f64;
    let macro_avg = Averages {
        precision: classes.iter().map(|c| c.precision).sum::<f64>() / kf,
        recall: classes.iter().map(|c| c.recall).sum::<f64>() / kf,
        f1: classes.iter().map(|c| c.f1).sum::<f64>() / kf,
    };
    let w = |get: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            classes.iter().map(|c| get(c) * c.support as f64).sum::<f64>() / total as f64
        }
    };
    let weighted_avg = Averages {
        precision: w(|c| c.precision),
        recall: w(|c| c.recall),
        f1: w(|c| c.f1),
    };
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(ClassificationReport {
        accuracy: ratio(correct, total),
        classes,
        macro_avg,
        weighted_avg,
        confusion: confusion.to_vec(),
    })
}

pub fn report_from_predictions(pred: &[usize], truth: &[usize], labels: &[&str]) -> Result<ClassificationReport> {
    if pred.len() != truth.len() {
        return Err(FairnessError::InvalidArgument("predictions and labels differ in length".into()));
    }
    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(FairnessError::InvalidArgument(format!("class {} has no label", p.max(t))));
        }
        confusion[t][p] += 1;
    }
    report_from_confusion(&confusion, labels)
}

pub fn classification_report(m: &ForestModel, x: &Matrix, truth: &[usize], labels: &[&str]) -> Result<ClassificationReport> {
    report_from_predictions(&m.predict_all(x), truth, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let r = report_from_predictions(&[0, 1, 1, 0], &[0, 1, 1, 0], &["a", "b"]).unwrap();
        for c in &r.classes {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.macro_avg.f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn single_predicted_class() {
        let r = report_from_predictions(&[0, 0, 0, 0], &[0, 1, 1, 0], &["a", "b"]).unwrap();
        assert_eq!(r.classes[1].recall, 0.0);
        assert_eq!(r.classes[1].precision, 0.0);
        assert_eq!(r.classes[0].precision, 0.5);
    }

    #[test]
    fn related_class_row() {
        let r = report_from_confusion(&[vec![19, 1], vec![0, 40]], &["related", "none"]).unwrap();
        let c = &r.classes[0];
        assert_eq!(c.precision, 1.0);
        assert_eq!(c.recall, 0.95);
        assert!((c.f1 - 0.98).abs() <= 0.01);
        assert!((c.f1 - 38.0 / 39.0).abs() < 1e-12);
    }

    /// Every entry recomputed by counting over the rows directly.
    #[test]
    fn matches_row_counting() {
        let truth = [0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 1];
        let pred = [0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 1];
        let r = report_from_predictions(&pred, &truth, &["n", "p"]).unwrap();
        for c in 0..2 {
            let tp = (0..20).filter(|&i| pred[i] == c && truth[i] == c).count() as f64;
            let fp = (0..20).filter(|&i| pred[i] == c && truth[i] != c).count() as f64;
            let fn_ = (0..20).filter(|&i| pred[i] != c && truth[i] == c).count() as f64;
            let p = tp / (tp + fp);
            let rc = tp / (tp + fn_);
            assert_eq!(r.classes[c].precision, p);
            assert_eq!(r.classes[c].recall, rc);
            assert_eq!(r.classes[c].f1, 2.0 * p * rc / (p + rc));
        }
    }
}
