//! Accuracy curves over prediction logs and the closed-form random
//! superclass oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelspace::LabelSpace;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub epoch: u32,
    pub example_id: String,
    pub true_label: usize,
    pub pred_label: usize,
}

/// Per-epoch (example, true, predicted) records in one label space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionLog {
    records: Vec<Record>,
    label_count: usize,
}

impl PredictionLog {
    /// Validates label ranges, positive epochs and contiguous epoch groups.
    pub fn new(records: Vec<Record>, label_count: usize) -> Result<Self> {
        let mut finished = std::collections::HashSet::new();
        let mut current = None;
        for (i, r) in records.iter().enumerate() {
            if r.epoch == 0 {
                return Err(Error::Log(format!("record {i}: epochs start at 1")));
            }
            for label in [r.true_label, r.pred_label] {
                if label >= label_count {
                    return Err(Error::LabelOutOfRange {
                        label,
                        count: label_count,
                    });
                }
            }
            if current != Some(r.epoch) {
                if let Some(prev) = current {
                    finished.insert(prev);
                }
                if finished.contains(&r.epoch) {
                    return Err(Error::Log(format!(
                        "record {i}: epoch {} is not contiguous",
                        r.epoch
                    )));
                }
                current = Some(r.epoch);
            }
        }
        Ok(PredictionLog {
            records,
            label_count,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records grouped by epoch, in log order.
    pub fn epochs(&self) -> Vec<(u32, &[Record])> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.records.len() {
            if i == self.records.len() || self.records[i].epoch != self.records[start].epoch {
                out.push((self.records[start].epoch, &self.records[start..i]));
                start = i;
            }
        }
        out
    }

    pub fn epoch_slice(&self, epoch: u32) -> Option<&[Record]> {
        self.epochs()
            .into_iter()
            .find(|(e, _)| *e == epoch)
            .map(|(_, r)| r)
    }

    /// Relative frequency of each true label in the first epoch.
    pub fn empirical_priors(&self) -> Result<Vec<f64>> {
        let (_, first) = self
            .epochs()
            .into_iter()
            .next()
            .ok_or_else(|| Error::Log("empty log".into()))?;
        let mut priors = vec![0.0; self.label_count];
        for r in first {
            priors[r.true_label] += 1.0;
        }
        let n = first.len() as f64;
        priors.iter_mut().for_each(|p| *p /= n);
        Ok(priors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Percent,
    Unit,
    Signed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub points: Vec<(u32, f64)>,
    pub scale: Scale,
}

impl MetricSeries {
    pub fn new(points: Vec<(u32, f64)>, scale: Scale) -> Result<Self> {
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Metric("epochs must be strictly increasing".into()));
        }
        if points.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::Metric("non-finite value".into()));
        }
        Ok(MetricSeries { points, scale })
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Index and value of the maximum; ties go to the earliest epoch.
    fn peak(&self) -> Result<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &(_, v)) in self.points.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.ok_or_else(|| Error::Metric("empty series".into()))
    }

    fn map(&self, scale: Scale, f: impl Fn(f64) -> f64) -> Result<MetricSeries> {
        MetricSeries::new(self.points.iter().map(|&(e, v)| (e, f(v))).collect(), scale)
    }
}

/// Percentage of correct predictions per epoch.
pub fn accuracy_series(log: &PredictionLog) -> Result<MetricSeries> {
    if log.is_empty() {
        return Err(Error::Metric("empty log".into()));
    }
    let points = log
        .epochs()
        .into_iter()
        .map(|(epoch, recs)| {
            let hits = recs.iter().filter(|r| r.true_label == r.pred_label).count();
            (epoch, 100.0 * hits as f64 / recs.len() as f64)
        })
        .collect();
    MetricSeries::new(points, Scale::Percent)
}

fn superclass_mass(s: &LabelSpace, priors: &[f64]) -> Result<Vec<f64>> {
    if priors.len() != s.class_count() {
        return Err(Error::Metric(format!(
            "{} priors for {} classes",
            priors.len(),
            s.class_count()
        )));
    }
    if priors.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Metric("priors must be non-negative".into()));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Metric(format!("priors sum to {total}, expected 1")));
    }
    Ok(s.superclasses()
        .iter()
        .map(|sc| sc.members.iter().map(|&c| priors[c]).sum())
        .collect())
}

pub fn uniform_priors(class_count: usize) -> Vec<f64> {
    vec![1.0 / class_count as f64; class_count]
}

/// Chance accuracy of guessing superclasses by their prior mass: sum of
/// squared superclass masses, in [0,1].
pub fn baseline(s: &LabelSpace, priors: &[f64]) -> Result<f64> {
    Ok(superclass_mass(s, priors)?.iter().map(|p| p * p).sum())
}

/// A(t) / A(T) where T is the (earliest) best epoch.
pub fn relative_accuracy(a: &MetricSeries) -> Result<MetricSeries> {
    let (_, best) = a.peak()?;
    if best == 0.0 {
        return Err(Error::Metric("peak accuracy is zero".into()));
    }
    a.map(Scale::Unit, |v| v / best)
}

/// (A(t) - 100b) / (A(T) - 100b) for a baseline `b` in [0,1].
pub fn relative_gain(a: &MetricSeries, b: f64) -> Result<MetricSeries> {
    let (_, best) = a.peak()?;
    let chance = 100.0 * b;
    let denom = best - chance;
    if denom <= 0.0 {
        return Err(Error::Metric(format!(
            "peak accuracy {best} does not exceed chance level {chance}"
        )));
    }
    a.map(Scale::Unit, |v| (v - chance) / denom)
}

/// (100 - A(t)) / (100 - A(T)) - 1, with T the last epoch of the series.
pub fn residual_error(a: &MetricSeries) -> Result<MetricSeries> {
    let &(_, last) = a
        .points
        .last()
        .ok_or_else(|| Error::Metric("empty series".into()))?;
    let denom = 100.0 - last;
    if denom <= 0.0 {
        return Err(Error::Metric("final accuracy is 100, residual error undefined".into()));
    }
    a.map(Scale::Signed, |v| (100.0 - v) / denom - 1.0)
}

/// Probability that a greedy superclass prediction is right given the
/// hyponym hit rate `p_h`, when wrong hyponyms land in superclasses
/// independently with their prior mass.
pub fn theoretical_superclass_accuracy(p_h: f64, s: &LabelSpace, priors: &[f64]) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_h) {
        return Err(Error::Metric(format!("p_h = {p_h} outside [0,1]")));
    }
    Ok(p_h + (1.0 - p_h) * baseline(s, priors)?)
}

/// First epoch whose value reaches `fraction` of the series maximum.
pub fn convergence_epoch(a: &MetricSeries, fraction: f64) -> Result<u32> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Metric(format!("fraction {fraction} outside (0,1]")));
    }
    let (peak_idx, best) = a.peak()?;
    let threshold = fraction * best;
    let idx = a
        .points
        .iter()
        .position(|&(_, v)| v >= threshold)
        .unwrap_or(peak_idx);
    Ok(a.points[idx].0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub order: Vec<usize>,
    /// Row-major; rows are true labels, columns predictions, both in `order`.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.order.len() + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Confusion counts of one epoch slice with rows/columns in `order`.
pub fn confusion_matrix(
    records: &[Record],
    label_count: usize,
    order: &[usize],
) -> Result<ConfusionMatrix> {
    let mut position = vec![usize::MAX; label_count];
    if order.len() != label_count {
        return Err(Error::Metric("order is not a permutation of the labels".into()));
    }
    for (i, &l) in order.iter().enumerate() {
        match position.get_mut(l) {
            Some(p) if *p == usize::MAX => *p = i,
            _ => return Err(Error::Metric("order is not a permutation of the labels".into())),
        }
    }
    let n = order.len();
    let mut counts = vec![0u64; n * n];
    for r in records {
        let i = *position.get(r.true_label).ok_or(Error::LabelOutOfRange {
            label: r.true_label,
            count: label_count,
        })?;
        let j = *position.get(r.pred_label).ok_or(Error::LabelOutOfRange {
            label: r.pred_label,
            count: label_count,
        })?;
        counts[i * n + j] += 1;
    }
    Ok(ConfusionMatrix {
        order: order.to_vec(),
        counts,
    })
}
