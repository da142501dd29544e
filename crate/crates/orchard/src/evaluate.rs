//! Ground-truth ingestion and the evaluation metric suite: one-vs-rest
//! segmentation metrics, apple detection matching and assignment accuracy.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{OrchardError, Result};
use crate::segment::SemanticLabel;

/// A metric that may be undefined when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Value(f64),
    NotApplicable(Option<()>),
}

impl MetricValue {
    pub fn ratio(num: f64, den: f64) -> Self {
        if den > 0.0 {
            MetricValue::Value(num / den)
        } else {
            MetricValue::NotApplicable(None)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(*v),
            MetricValue::NotApplicable(_) => None,
        }
    }

    pub fn na() -> Self {
        MetricValue::NotApplicable(None)
    }
}

/// One-vs-rest confusion counts for a single class.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// Per-class segmentation metrics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub confusion: Confusion,
    pub recall: MetricValue,
    pub precision: MetricValue,
    pub f1: MetricValue,
    pub iou: MetricValue,
    pub class_accuracy: MetricValue,
}

impl ClassMetrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let tp = c.tp as f64;
        let fp = c.fp as f64;
        let tn = c.tn as f64;
        let fn_ = c.fn_ as f64;
        let recall = MetricValue::ratio(tp, tp + fn_);
        let precision = MetricValue::ratio(tp, tp + fp);
        let f1 = match (precision.value(), recall.value()) {
            (Some(p), Some(r)) if p + r > 0.0 => MetricValue::Value(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => MetricValue::Value(0.0),
            _ => MetricValue::na(),
        };
        let iou = MetricValue::ratio(tp, tp + fp + fn_);
        let class_accuracy = MetricValue::ratio(tp + tn, tp + tn + fp + fn_);
        ClassMetrics {
            confusion: c,
            recall,
            precision,
            f1,
            iou,
            class_accuracy,
        }
    }
}

/// One-vs-rest confusion for `class`, then metrics per the standard
/// formulas: Re = TP/(TP+FN), Pr = TP/(TP+FP), F1 = 2PrRe/(Pr+Re),
/// IoU = TP/(TP+FP+FN), CA = (TP+TN)/all.
pub fn segmentation_metrics(
    pred: &[SemanticLabel],
    gt: &[SemanticLabel],
    class: SemanticLabel,
) -> Result<ClassMetrics> {
    if pred.len() != gt.len() {
        return Err(OrchardError::ShapeError(pred.len(), gt.len()));
    }
    let mut c = Confusion::default();
    for (p, g) in pred.iter().zip(gt) {
        match (*p == class, *g == class) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(ClassMetrics::from_confusion(c))
}

/// Metrics from already-known precision/recall (formula fidelity checks).
pub fn metrics_from_pr(recall: f64, precision: f64) -> (f64, f64) {
    let f1 = 2.0 * precision * recall / (precision + recall);
    let iou = f1 / (2.0 - f1);
    (f1, iou)
}

/// Result of matching detections against ground-truth apples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppleMatch {
    /// (detection index, ground-truth index) pairs.
    pub pairs: Vec<(usize, usize)>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Mutual-nearest matching within `radius`: a detection and a GT apple pair
/// up only when each is the other's closest counterpart within the radius.
/// Each detection matches at most once. TP = |pairs|, FP = detections − TP,
/// FN = ground truth − TP.
pub fn match_apples(
    detections: &[Point3<f64>],
    ground_truth: &[Point3<f64>],
    radius: f64,
) -> AppleMatch {
    let nearest = |from: &Point3<f64>, to: &[Point3<f64>]| -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, p) in to.iter().enumerate() {
            let d = (from - p).norm();
            if d <= radius && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    };
    let det_to_gt: Vec<Option<usize>> = detections
        .iter()
        .map(|d| nearest(d, ground_truth))
        .collect();
    let gt_to_det: Vec<Option<usize>> = ground_truth
        .iter()
        .map(|g| nearest(g, detections))
        .collect();
    let mut pairs = Vec::new();
    for (g, det) in gt_to_det.iter().enumerate() {
        if let Some(d) = det {
            if det_to_gt[*d] == Some(g) {
                pairs.push((*d, g));
            }
        }
    }
    let tp = pairs.len();
    AppleMatch {
        tp,
        fp: detections.len() - tp,
        fn_: ground_truth.len() - tp,
        pairs,
    }
}

/// ACC = correctly assigned true positives / true positives.
pub fn assignment_accuracy(
    matches: &AppleMatch,
    pred_tree: &[u32],
    gt_tree: &[u32],
) -> MetricValue {
    if matches.tp == 0 {
        return MetricValue::na();
    }
    let correct = matches
        .pairs
        .iter()
        .filter(|&&(d, g)| pred_tree[d] == gt_tree[g])
        .count();
    MetricValue::Value(correct as f64 / matches.tp as f64)
}

/// Ground-truth apple record (JSON sidecar entry).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtApple {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub tree_id: u32,
}

impl GtApple {
    pub fn point(&self) -> Point3<f64> {
        Point3::new(self.x, self.y, self.z)
    }
}

pub fn read_gt_apples(path: impl AsRef<std::path::Path>) -> Result<Vec<GtApple>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| OrchardError::ParseError {
        location: "gt apples json".into(),
        message: e.to_string(),
    })
}

pub fn write_gt_apples(path: impl AsRef<std::path::Path>, apples: &[GtApple]) -> Result<()> {
    let text = serde_json::to_string_pretty(apples).expect("serializable");
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction_is_all_ones() {
        let gt = vec![
            SemanticLabel::TreeTrunk,
            SemanticLabel::Branch,
            SemanticLabel::TreeTrunk,
            SemanticLabel::SupportPole,
        ];
        let m = segmentation_metrics(&gt, &gt, SemanticLabel::TreeTrunk).unwrap();
        assert_eq!(m.recall, MetricValue::Value(1.0));
        assert_eq!(m.precision, MetricValue::Value(1.0));
        assert_eq!(m.f1, MetricValue::Value(1.0));
        assert_eq!(m.iou, MetricValue::Value(1.0));
        assert_eq!(m.class_accuracy, MetricValue::Value(1.0));
    }

    /// Formula fidelity against published values: Re=84.98, Pr=81.61 must
    /// give F1=83.26 and IoU=71.32 (percent) within 0.01.
    #[test]
    fn formula_fidelity_published_row() {
        let (f1, iou) = metrics_from_pr(0.8498, 0.8161);
        assert!((f1 * 100.0 - 83.26).abs() < 0.01, "F1 {}", f1 * 100.0);
        assert!((iou * 100.0 - 71.32).abs() < 0.01, "IoU {}", iou * 100.0);
    }

    #[test]
    fn hand_confusion_arithmetic() {
        let m = ClassMetrics::from_confusion(Confusion {
            tp: 1,
            fp: 1,
            tn: 1,
            fn_: 1,
        });
        assert_eq!(m.recall, MetricValue::Value(0.5));
        assert_eq!(m.precision, MetricValue::Value(0.5));
        assert_eq!(m.f1, MetricValue::Value(0.5));
        assert_eq!(m.iou, MetricValue::Value(1.0 / 3.0));
        assert_eq!(m.class_accuracy, MetricValue::Value(0.5));
    }

    #[test]
    fn zero_denominators_are_not_applicable() {
        let m = ClassMetrics::from_confusion(Confusion {
            tp: 0,
            fp: 0,
            tn: 5,
            fn_: 0,
        });
        assert_eq!(m.recall, MetricValue::na());
        assert_eq!(m.precision, MetricValue::na());
        assert_eq!(m.f1, MetricValue::na());
        assert_eq!(m.iou, MetricValue::na());
    }

    #[test]
    fn iou_f1_identity_random_confusions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let c = Confusion {
                tp: rng.gen_range(1..1000),
                fp: rng.gen_range(0..1000),
                tn: rng.gen_range(0..1000),
                fn_: rng.gen_range(0..1000),
            };
            let m = ClassMetrics::from_confusion(c);
            let f1 = m.f1.value().unwrap();
            let iou = m.iou.value().unwrap();
            assert!((iou - f1 / (2.0 - f1)).abs() < 1e-12);
            assert!(iou <= f1 + 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        let a = vec![SemanticLabel::Branch];
        let b = vec![SemanticLabel::Branch, SemanticLabel::Branch];
        assert!(matches!(
            segmentation_metrics(&a, &b, SemanticLabel::Branch),
            Err(OrchardError::ShapeError(1, 2))
        ));
    }

    #[test]
    fn match_simple_cases() {
        let gt = vec![Point3::new(0.0, 0.0, 0.0)];
        let near = vec![Point3::new(0.05, 0.0, 0.0)];
        let m = match_apples(&near, &gt, 0.10);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));

        let far = vec![Point3::new(0.15, 0.0, 0.0)];
        let m = match_apples(&far, &gt, 0.10);
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));

        let two = vec![Point3::new(0.04, 0.0, 0.0), Point3::new(0.07, 0.0, 0.0)];
        let m = match_apples(&two, &gt, 0.10);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 0));
        assert_eq!(m.pairs, vec![(0, 0)]);
    }

    /// Exhaustive-assignment oracle: over all one-to-one assignments within
    /// the radius, mutual-nearest must never beat the optimum and must agree
    /// with it whenever the optimum is unique by proximity structure used in
    /// the paper (checked here: TP counts never exceed the oracle's).
    #[test]
    fn matching_vs_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for case in 0..150 {
            let n_gt = rng.gen_range(0..6);
            let n_det = rng.gen_range(0..6);
            let gt: Vec<Point3<f64>> = (0..n_gt)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(0.0..0.5),
                        rng.gen_range(0.0..0.5),
                        rng.gen_range(0.0..0.5),
                    )
                })
                .collect();
            let det: Vec<Point3<f64>> = (0..n_det)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(0.0..0.5),
                        rng.gen_range(0.0..0.5),
                        rng.gen_range(0.0..0.5),
                    )
                })
                .collect();
            let m = match_apples(&det, &gt, 0.10);
            assert_eq!(m.tp + m.fp, det.len());
            assert_eq!(m.tp + m.fn_, gt.len());
            let best = exhaustive_max_matching(&det, &gt, 0.10);
            assert!(m.tp <= best, "case {case}: tp {} > oracle {}", m.tp, best);
            // Mutual-nearest pairs must each be valid edges.
            for (d, g) in &m.pairs {
                assert!((det[*d] - gt[*g]).norm() <= 0.10);
            }
            // Each detection used at most once.
            let mut seen = std::collections::HashSet::new();
            for (d, _) in &m.pairs {
                assert!(seen.insert(*d));
            }
        }
    }

    fn exhaustive_max_matching(det: &[Point3<f64>], gt: &[Point3<f64>], radius: f64) -> usize {
        fn rec(
            g: usize,
            used: &mut Vec<bool>,
            det: &[Point3<f64>],
            gt: &[Point3<f64>],
            radius: f64,
        ) -> usize {
            if g == gt.len() {
                return 0;
            }
            let mut best = rec(g + 1, used, det, gt, radius);
            for d in 0..det.len() {
                if !used[d] && (det[d] - gt[g]).norm() <= radius {
                    used[d] = true;
                    best = best.max(1 + rec(g + 1, used, det, gt, radius));
                    used[d] = false;
                }
            }
            best
        }
        let mut used = vec![false; det.len()];
        rec(0, &mut used, det, gt, radius)
    }

    #[test]
    fn accuracy_arithmetic() {
        let m = AppleMatch {
            pairs: (0..20).map(|i| (i, i)).collect(),
            tp: 20,
            fp: 0,
            fn_: 0,
        };
        let all: Vec<u32> = vec![1; 20];
        assert_eq!(assignment_accuracy(&m, &all, &all), MetricValue::Value(1.0));
        let mut one_off = all.clone();
        one_off[7] = 2;
        assert_eq!(
            assignment_accuracy(&m, &one_off, &all),
            MetricValue::Value(0.95)
        );
        let empty = AppleMatch {
            pairs: vec![],
            tp: 0,
            fp: 3,
            fn_: 2,
        };
        assert_eq!(assignment_accuracy(&empty, &[], &[]), MetricValue::na());
    }

    #[test]
    fn gt_apples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("apples.json");
        let apples = vec![
            GtApple {
                x: 0.1,
                y: 0.2,
                z: 0.3,
                tree_id: 1,
            },
            GtApple {
                x: -0.4,
                y: 1.5,
                z: 1.9,
                tree_id: 3,
            },
        ];
        write_gt_apples(&path, &apples).unwrap();
        let back = read_gt_apples(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].tree_id, 3);
        assert_eq!(back[0].x, 0.1);
    }
}
