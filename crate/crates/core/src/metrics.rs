//! Class-based, category-based and object-level accuracy evaluation of
//! predicted masks against ground truth.
//!
//! Pixel metrics are computed one-vs-rest per class from a K×K confusion
//! matrix over non-void-truth pixels: IoU = TP/(TP+FP+FN), Global =
//! (TP+TN)/total, Precision = TP/(TP+FP), Recall = TP/(TP+FN), F1 the
//! harmonic mean of precision and recall. Zero-denominator metrics are
//! reported as undefined and excluded from means. Category mode folds the
//! matrix through the class→category map onto {traversable, obstacle},
//! dropping undefined-category truth pixels.
//!
//! Object-level detection counts a ground-truth obstacle component as
//! detected when at least half of its pixels are predicted as any
//! obstacle-category class — mistaking one obstacle class for another still
//! avoids the collision.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::DIR_STEPS;
use crate::mask::{Category, ClassSchema, LabelMask};

/// K×K pixel counts, `counts[truth][pred]`, over non-void-truth pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    #[inline]
    pub fn add(&mut self, truth: usize, pred: usize, n: u64) {
        self.counts[truth * self.k + pred] += n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    /// Merge another matrix into this one. Summation is associative and
    /// commutative, so parallel per-image evaluation merges to the same
    /// result as a serial pass.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.k, other.k, "confusion matrices must match in size");
        for (a, b) in self.counts.iter_mut().zip(other.counts.iter()) {
            *a += b;
        }
    }
}

/// Tally the confusion matrix of a prediction against ground truth. Pixels
/// whose truth class is void are disregarded; predicted void still lands in
/// its own column.
pub fn confusion(
    pred: &LabelMask,
    truth: &LabelMask,
    schema: &ClassSchema,
) -> Result<ConfusionMatrix> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::DimensionMismatch(
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height(),
        ));
    }
    pred.validate(schema)?;
    truth.validate(schema)?;
    let mut cm = ConfusionMatrix::zeros(schema.len());
    for (&t, &p) in truth.labels().iter().zip(pred.labels().iter()) {
        if schema.is_void(t) {
            continue;
        }
        cm.add(t as usize, p as usize, 1);
    }
    Ok(cm)
}

/// Evaluation granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    /// One-vs-rest over the original classes.
    Class,
    /// One-vs-rest over {traversable, obstacle} after folding.
    Category,
}

/// One-vs-rest metrics for a single class or category. `None` marks a
/// zero-denominator metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub iou: Option<f64>,
    pub global: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Per-class metrics plus their means and the plain trace accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: MetricMode,
    pub per_class: Vec<ClassMetrics>,
    pub mean_iou: Option<f64>,
    pub mean_global: Option<f64>,
    pub overall_pixel_accuracy: Option<f64>,
    pub evaluated_pixels: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn one_vs_rest(
    cm_get: impl Fn(usize, usize) -> u64,
    n: usize,
    c: usize,
    total: u64,
) -> (u64, u64, u64, u64) {
    let tp = cm_get(c, c);
    let fp: u64 = (0..n).filter(|&t| t != c).map(|t| cm_get(t, c)).sum();
    let fn_: u64 = (0..n).filter(|&p| p != c).map(|p| cm_get(c, p)).sum();
    let tn = total - tp - fp - fn_;
    (tp, fp, fn_, tn)
}

fn metrics_row(name: &str, tp: u64, fp: u64, fn_: u64, tn: u64, total: u64) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    ClassMetrics {
        name: name.to_string(),
        tp,
        fp,
        fn_,
        tn,
        iou: ratio(tp, tp + fp + fn_),
        global: ratio(tp + tn, total),
        precision,
        recall,
        f1,
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Compute per-class (or per-category) metrics from a confusion matrix.
/// Void classes are excluded from the class-mode report, matching their
/// exclusion from evaluation.
pub fn pixel_metrics(
    cm: &ConfusionMatrix,
    mode: MetricMode,
    schema: &ClassSchema,
) -> MetricsReport {
    match mode {
        MetricMode::Class => {
            let total = cm.total();
            let per_class: Vec<ClassMetrics> = schema
                .classes()
                .iter()
                .filter(|class| !class.is_void)
                .map(|class| {
                    let c = class.id as usize;
                    let (tp, fp, fn_, tn) =
                        one_vs_rest(|t, p| cm.get(t, p), cm.classes(), c, total);
                    metrics_row(&class.name, tp, fp, fn_, tn, total)
                })
                .collect();
            finish_report(MetricMode::Class, per_class, cm.trace(), total)
        }
        MetricMode::Category => {
            let folded = fold_to_categories(cm, schema);
            let total: u64 = folded.iter().flatten().sum();
            let names = ["traversable", "obstacle"];
            let per_class: Vec<ClassMetrics> = (0..2)
                .map(|c| {
                    let (tp, fp, fn_, tn) = one_vs_rest(|t, p| folded[t][p], 3, c, total);
                    metrics_row(names[c], tp, fp, fn_, tn, total)
                })
                .collect();
            let trace = folded[0][0] + folded[1][1];
            finish_report(MetricMode::Category, per_class, trace, total)
        }
    }
}

fn finish_report(
    mode: MetricMode,
    per_class: Vec<ClassMetrics>,
    trace: u64,
    total: u64,
) -> MetricsReport {
    MetricsReport {
        mode,
        mean_iou: mean(per_class.iter().map(|m| m.iou)),
        mean_global: mean(per_class.iter().map(|m| m.global)),
        overall_pixel_accuracy: ratio(trace, total),
        evaluated_pixels: total,
        per_class,
    }
}

const CATEGORY_ORDER: [Category; 3] = [
    Category::Traversable,
    Category::Obstacle,
    Category::Undefined,
];

fn category_index(cat: Category) -> usize {
    CATEGORY_ORDER.iter().position(|&c| c == cat).unwrap()
}

/// Fold a class confusion matrix through the class→category map. Truth rows
/// of undefined-category classes are dropped; predictions of any category
/// keep their own column so missed pixels still count against recall.
pub fn fold_to_categories(cm: &ConfusionMatrix, schema: &ClassSchema) -> [[u64; 3]; 3] {
    let mut folded = [[0u64; 3]; 3];
    for t in 0..cm.classes() {
        let t_cat = schema.category_of(t as u8);
        if t_cat == Category::Undefined {
            continue;
        }
        for p in 0..cm.classes() {
            let p_cat = schema.category_of(p as u8);
            folded[category_index(t_cat)][category_index(p_cat)] += cm.get(t, p);
        }
    }
    folded
}

/// One ground-truth obstacle component and how well the prediction covers it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectStat {
    pub id: usize,
    pub size: usize,
    pub coverage: f64,
    pub detected: bool,
}

/// Object-level detection over all ground-truth obstacle components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectReport {
    pub objects: Vec<ObjectStat>,
    /// `detected / total`; `None` when the truth contains no objects.
    pub detection_rate: Option<f64>,
}

/// Detection threshold: a component is detected when at least this fraction
/// of its pixels is predicted as obstacle-category.
pub const OBJECT_COVERAGE_THRESHOLD: f64 = 0.5;

/// Label 8-connected components of obstacle-category truth cells and score
/// each by the fraction of its pixels predicted as obstacle-category.
pub fn object_level_accuracy(
    pred: &LabelMask,
    truth: &LabelMask,
    schema: &ClassSchema,
) -> Result<ObjectReport> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::DimensionMismatch(
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height(),
        ));
    }
    pred.validate(schema)?;
    truth.validate(schema)?;

    let (w, h) = (truth.width(), truth.height());
    let is_obstacle = |mask: &LabelMask, x: usize, y: usize| {
        schema.category_of(mask.get(x, y)) == Category::Obstacle
    };

    let mut component = vec![usize::MAX; w * h];
    let mut objects = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !is_obstacle(truth, x, y) || component[y * w + x] != usize::MAX {
                continue;
            }
            let id = objects.len();
            let mut size = 0usize;
            let mut covered = 0usize;
            let mut queue = VecDeque::from([(x, y)]);
            component[y * w + x] = id;
            while let Some((cx, cy)) = queue.pop_front() {
                size += 1;
                if is_obstacle(pred, cx, cy) {
                    covered += 1;
                }
                for &(dx, dy) in &DIR_STEPS {
                    let nx = cx as i32 + dx;
                    let ny = cy as i32 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if component[ny * w + nx] == usize::MAX && is_obstacle(truth, nx, ny) {
                        component[ny * w + nx] = id;
                        queue.push_back((nx, ny));
                    }
                }
            }
            let coverage = covered as f64 / size as f64;
            objects.push(ObjectStat {
                id,
                size,
                coverage,
                detected: coverage >= OBJECT_COVERAGE_THRESHOLD,
            });
        }
    }
    let detection_rate = (!objects.is_empty())
        .then(|| objects.iter().filter(|o| o.detected).count() as f64 / objects.len() as f64);
    Ok(ObjectReport {
        objects,
        detection_rate,
    })
}
