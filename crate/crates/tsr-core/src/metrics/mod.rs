//! Evaluation artifacts: overall accuracy, confusion matrix, per-class
//! precision/recall/F1, class-wise accuracy, and per-epoch curve points.

mod render;

pub use render::{
    read_confusion_csv, read_curves_csv, read_per_class_csv, read_report_csv, render_reports,
    svg_bar_chart, svg_confusion_heatmap, svg_curves_chart, svg_line_chart, svg_report_chart,
    write_confusion_csv, write_curves_csv, write_per_class_csv, write_report_csv, CONFUSION_CSV,
    CONFUSION_SVG, CURVES_CSV, CURVES_SVG, PER_CLASS_CSV, PER_CLASS_SVG, REPORT_CSV, REPORT_SVG,
};

use crate::error::{Error, Result};

/// Fraction of exact prediction/truth matches.
pub fn accuracy(predictions: &[usize], truths: &[usize]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::EvalLengthMismatch {
            preds: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let correct = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| p == t)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Counts grid with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_predictions(
        predictions: &[usize],
        truths: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        if predictions.len() != truths.len() {
            return Err(Error::EvalLengthMismatch {
                preds: predictions.len(),
                truths: truths.len(),
            });
        }
        let mut counts = vec![0u64; n_classes * n_classes];
        for (&p, &t) in predictions.iter().zip(truths) {
            if p >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label: p,
                    max: n_classes - 1,
                });
            }
            if t >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label: t,
                    max: n_classes - 1,
                });
            }
            counts[t * n_classes + p] += 1;
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != n_classes * n_classes {
            return Err(Error::LengthMismatch {
                left: counts.len(),
                right: n_classes * n_classes,
            });
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    /// Row sum: number of true examples of `class`.
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class * self.n_classes..(class + 1) * self.n_classes]
            .iter()
            .sum()
    }

    /// Column sum: number of predictions of `class`.
    pub fn predicted(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|t| self.get(t, class)).sum()
    }

    /// `trace / total`; integer counts divided once, so this is exactly the
    /// value `accuracy` computes on the same inputs.
    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-class precision/recall/F1/support plus overall accuracy and macro and
/// support-weighted averages. Any 0/0 is defined as 0 and the affected
/// classes are listed in `zero_division_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub zero_division_classes: Vec<usize>,
}

impl ClassificationReport {
    pub fn total_support(&self) -> u64 {
        self.per_class.iter().map(|m| m.support).sum()
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classification_report(cm: &ConfusionMatrix) -> ClassificationReport {
    let n = cm.n_classes();
    let mut per_class = Vec::with_capacity(n);
    let mut zero_division = Vec::new();
    for c in 0..n {
        let tp = cm.get(c, c);
        let support = cm.support(c);
        let predicted = cm.predicted(c);
        if support == 0 || predicted == 0 {
            zero_division.push(c);
        }
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }
    let total: u64 = per_class.iter().map(|m| m.support).sum();
    let nf = n as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| -> f64 {
        if total == 0 {
            0.0
        } else {
            per_class
                .iter()
                .map(|m| f(m) * m.support as f64)
                .sum::<f64>()
                / total as f64
        }
    };
    ClassificationReport {
        accuracy: if total == 0 { 0.0 } else { cm.accuracy() },
        macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / nf,
        macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / nf,
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / nf,
        weighted_precision: weighted(|m| m.precision),
        weighted_recall: weighted(|m| m.recall),
        weighted_f1: weighted(|m| m.f1),
        zero_division_classes: zero_division,
        per_class,
    }
}

/// Diagonal over row sum per class; identical to recall, emitted separately
/// to mirror the class-wise accuracy chart. Zero-support classes report 0.
pub fn per_class_accuracy(cm: &ConfusionMatrix) -> Vec<f64> {
    (0..cm.n_classes())
        .map(|c| ratio(cm.get(c, c), cm.support(c)))
        .collect()
}

/// One epoch of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epoch: usize,
    pub train_loss: f32,
    pub train_acc: f32,
    pub val_loss: f32,
    pub val_acc: f32,
    pub lr: f32,
}
