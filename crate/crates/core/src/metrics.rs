//! Confusion counts and the Matthews correlation coefficient.

use crate::error::{Error, Result};
use crate::mask::{ClassMask, CLASS_SKYRMION};

/// Pixel tallies against a binary positive/negative rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Maps each class index to positive/negative. The default keeps skyrmions
/// positive and folds defects and background into the negative class, which
/// is valid for both 2- and 3-class masks.
#[derive(Clone, Debug)]
pub struct PositiveRule {
    positive: Vec<u8>,
}

impl Default for PositiveRule {
    fn default() -> Self {
        PositiveRule {
            positive: vec![CLASS_SKYRMION],
        }
    }
}

impl PositiveRule {
    pub fn new(positive_classes: &[u8]) -> Self {
        PositiveRule {
            positive: positive_classes.to_vec(),
        }
    }

    #[inline]
    pub fn is_positive(&self, class_id: u8) -> bool {
        self.positive.contains(&class_id)
    }
}

/// Pixel-wise confusion tallies between prediction and truth.
pub fn confusion_from_masks(
    pred: &ClassMask,
    truth: &ClassMask,
    rule: &PositiveRule,
) -> Result<ConfusionCounts> {
    if pred.dims() != truth.dims() {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs truth {}x{}",
            pred.dims().0,
            pred.dims().1,
            truth.dims().0,
            truth.dims().1
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        match (rule.is_positive(p), rule.is_positive(t)) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// MCC = (TP·TN − FP·FN) / √((TP+FP)(TP+FN)(TN+FP)(TN+FN)), computed in
/// f64; 0 when any denominator factor vanishes (the "perfectly
/// inconclusive" convention).
pub fn mcc(c: &ConfusionCounts) -> f64 {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}
