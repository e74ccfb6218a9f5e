//! Class-level geometry of feature sets: mutual/self cover similarity,
//! class distance matrices and their correlation with taxonomy distances.
//!
//! Cover similarity follows a query/support protocol. For classes `i` and
//! `j`, every query point of `i` is reduced to its minimum Euclidean distance
//! to the support set of `j`; `P_r` is the fraction of those distances
//! strictly below `r`, and the similarity is the mean of `P_r` over
//! `r ∈ [0, r_max]`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hierarchy::DistanceMatrix;

/// `n × p` feature vectors with class labels in `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    class_count: usize,
    /// Row-major, `labels.len() * dim` values.
    data: Vec<f64>,
    labels: Vec<usize>,
    pub epoch: Option<u32>,
}

impl FeatureSet {
    pub fn new(dim: usize, class_count: usize, data: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if data.len() != labels.len() * dim {
            return Err(Error::Features(format!(
                "{} values for {} rows of dimension {dim}",
                data.len(),
                labels.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Features(format!(
                "non-finite value in row {}",
                i / dim.max(1)
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::LabelOutOfRange {
                label: l,
                count: class_count,
            });
        }
        Ok(FeatureSet {
            dim,
            class_count,
            data,
            labels,
            epoch: None,
        })
    }

    pub fn with_epoch(mut self, epoch: u32) -> Self {
        self.epoch = Some(epoch);
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.labels.iter().copied().zip(self.data.chunks_exact(self.dim.max(1)))
    }

    /// Row indices per class, in row order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Classes with at least one row, ascending.
    pub fn present_classes(&self) -> Vec<usize> {
        self.class_indices()
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(c, _)| c)
            .collect()
    }

    /// Copy with labels replaced by `table[label]`.
    pub fn relabeled(&self, table: &[usize], class_count: usize) -> Result<FeatureSet> {
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                table.get(l).copied().ok_or(Error::LabelOutOfRange {
                    label: l,
                    count: table.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut f = FeatureSet::new(self.dim, class_count, self.data.clone(), labels)?;
        f.epoch = self.epoch;
        Ok(f)
    }

    fn subset(&self, rows: &[usize]) -> FeatureSet {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureSet {
            dim: self.dim,
            class_count: self.class_count,
            data,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            epoch: self.epoch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    /// Trapezoid rule on `grid_points` equally spaced radii.
    Trapezoid,
    /// Closed form for the step function `P_r`.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverConfig {
    /// Examples per class on each side of the split.
    pub k: usize,
    /// `None` picks the largest query-to-support minimum distance.
    pub r_max: Option<f64>,
    pub grid_points: usize,
    pub integration: Integration,
    pub seed: u64,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig {
            k: 10,
            r_max: None,
            grid_points: 200,
            integration: Integration::Trapezoid,
            seed: 0,
        }
    }
}

/// Per class, draws `2k` rows without replacement: the first `k` go to the
/// query set, the next `k` to the support set. Classes absent from `f` are
/// skipped.
pub fn split_query_support(f: &FeatureSet, cfg: &CoverConfig) -> Result<(FeatureSet, FeatureSet)> {
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut query = Vec::new();
    let mut support = Vec::new();
    for (class, mut rows) in f.class_indices().into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 * cfg.k {
            return Err(Error::InsufficientExamples {
                class,
                have: rows.len(),
                need: 2 * cfg.k,
            });
        }
        let (picked, _) = rows.partial_shuffle(&mut rng, 2 * cfg.k);
        query.extend_from_slice(&picked[..cfg.k]);
        support.extend_from_slice(&picked[cfg.k..]);
    }
    Ok((f.subset(&query), f.subset(&support)))
}

/// Matrix of cover values in `[0,1]`; diagonal entries are self-cover.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub labels: Vec<usize>,
    /// Row-major, query class by row and support class by column.
    pub values: Vec<f64>,
    /// Radius the similarities were integrated up to.
    pub r_max: f64,
}

impl SimilarityMatrix {
    pub fn new(labels: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::InvalidArgument("similarity matrix is not square".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("similarity outside [0,1]".into()));
        }
        Ok(SimilarityMatrix {
            labels,
            values,
            r_max: f64::NAN,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.labels.len() + j]
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// For query class `i` and support class `j`: each query point's minimum
/// distance to the support points of `j`.
fn min_distances(q: &FeatureSet, s: &FeatureSet, labels: &[usize]) -> Vec<Vec<Vec<f64>>> {
    let q_rows = q.class_indices();
    let s_rows = s.class_indices();
    labels
        .iter()
        .map(|&ci| {
            labels
                .iter()
                .map(|&cj| {
                    q_rows[ci]
                        .iter()
                        .map(|&u| {
                            s_rows[cj]
                                .iter()
                                .map(|&v| euclidean(q.row(u), s.row(v)))
                                .fold(f64::INFINITY, f64::min)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Mean over `r ∈ [0, r_max]` of the fraction of `dists` strictly below `r`.
pub fn integrate_cover(dists: &[f64], r_max: f64, grid_points: usize, method: Integration) -> f64 {
    let n = dists.len() as f64;
    match method {
        Integration::Exact => {
            dists.iter().map(|&d| (r_max - d).max(0.0)).sum::<f64>() / (n * r_max)
        }
        Integration::Trapezoid => {
            let step = r_max / (grid_points - 1) as f64;
            let p_at = |r: f64| dists.iter().filter(|&&d| d < r).count() as f64 / n;
            let mut acc = 0.0;
            let mut prev = p_at(0.0);
            for g in 1..grid_points {
                let cur = p_at(step * g as f64);
                acc += 0.5 * (prev + cur) * step;
                prev = cur;
            }
            acc / r_max
        }
    }
}

/// Cover similarity for every ordered pair of classes present in `q`.
pub fn cover_similarity(q: &FeatureSet, s: &FeatureSet, cfg: &CoverConfig) -> Result<SimilarityMatrix> {
    if q.dim() != s.dim() {
        return Err(Error::Features("query and support dimensions differ".into()));
    }
    if cfg.grid_points < 2 {
        return Err(Error::InvalidArgument("grid_points must be at least 2".into()));
    }
    let labels = q.present_classes();
    if labels.is_empty() {
        return Err(Error::Features("empty query set".into()));
    }
    if labels != s.present_classes() {
        return Err(Error::Features("query and support cover different classes".into()));
    }
    let mins = min_distances(q, s, &labels);
    let r_max = match cfg.r_max {
        Some(r) => r,
        None => mins
            .iter()
            .flatten()
            .flatten()
            .copied()
            .fold(0.0, f64::max),
    };
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("r_max must be positive, got {r_max}")));
    }
    let values = mins
        .iter()
        .flat_map(|row| {
            row.iter()
                .map(|d| integrate_cover(d, r_max, cfg.grid_points, cfg.integration))
        })
        .collect();
    Ok(SimilarityMatrix {
        labels,
        values,
        r_max,
    })
}

/// `1 - (A + Aᵀ)/2` with a zero diagonal.
pub fn to_distance_matrix(a: &SimilarityMatrix) -> DistanceMatrix {
    let n = a.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                values[i * n + j] = 1.0 - 0.5 * (a.get(i, j) + a.get(j, i));
            }
        }
    }
    DistanceMatrix {
        labels: a.labels.clone(),
        values,
    }
}

/// Mean feature vector of every present class, with the class list.
pub fn class_means(f: &FeatureSet) -> (Vec<usize>, Vec<Vec<f64>>) {
    let labels = f.present_classes();
    let idx = f.class_indices();
    let means = labels
        .iter()
        .map(|&c| {
            let mut m = vec![0.0; f.dim()];
            for &r in &idx[c] {
                m.iter_mut().zip(f.row(r)).for_each(|(a, b)| *a += b);
            }
            let n = idx[c].len() as f64;
            m.iter_mut().for_each(|a| *a /= n);
            m
        })
        .collect();
    (labels, means)
}

/// Euclidean distances between class means.
pub fn class_mean_distances(f: &FeatureSet) -> DistanceMatrix {
    let (labels, means) = class_means(f);
    let n = labels.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&means[i], &means[j]);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix { labels, values }
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 || x.is_empty() {
        return Err(Error::Degenerate("zero variance, correlation undefined".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Cophenetic correlation: Pearson correlation of the `i < j` entries.
pub fn ccc(d1: &DistanceMatrix, d2: &DistanceMatrix) -> Result<f64> {
    if d1.labels != d2.labels {
        return Err(Error::InvalidArgument("distance matrices use different label orders".into()));
    }
    pearson(&d1.upper_triangle(), &d2.upper_triangle())
}

/// Correlates sampled cross-class example distances (query of `c_i` to
/// support of `c_j`, `i ≠ j`) with `d_w(c_i, c_j)` without forming class
/// distances.
pub fn direct_correlation(
    q: &FeatureSet,
    s: &FeatureSet,
    d_w: &DistanceMatrix,
    sample: usize,
    seed: u64,
) -> Result<f64> {
    let pos: std::collections::HashMap<usize, usize> =
        d_w.labels.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    for &l in q.labels().iter().chain(s.labels()) {
        if !pos.contains_key(&l) {
            return Err(Error::InvalidArgument(format!("class {l} missing from d_w")));
        }
    }
    if q.is_empty() || s.is_empty() || q.present_classes().len() < 2 {
        return Err(Error::Features("need at least two classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feat = Vec::with_capacity(sample);
    let mut graph = Vec::with_capacity(sample);
    while feat.len() < sample {
        let u = rng.random_range(0..q.len());
        let v = rng.random_range(0..s.len());
        let (ci, cj) = (q.labels()[u], s.labels()[v]);
        if ci == cj {
            continue;
        }
        feat.push(euclidean(q.row(u), s.row(v)));
        graph.push(d_w.get(pos[&ci], pos[&cj]));
    }
    pearson(&feat, &graph)
}

/// (mean self-cover, mean mutual cover).
pub fn cover_stats(a: &SimilarityMatrix) -> (f64, f64) {
    let n = a.len();
    let diag: f64 = (0..n).map(|i| a.get(i, i)).sum();
    let total: f64 = a.values.iter().sum();
    let off = n * n - n;
    let mutual = if off == 0 { 0.0 } else { (total - diag) / off as f64 };
    (diag / n as f64, mutual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(dim: usize, c: usize, rows: &[(usize, &[f64])]) -> FeatureSet {
        let data = rows.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        let labels = rows.iter().map(|(l, _)| *l).collect();
        FeatureSet::new(dim, c, data, labels).unwrap()
    }

    fn dm(n: usize, upper: &[f64]) -> DistanceMatrix {
        let mut values = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                values[i * n + j] = upper[k];
                values[j * n + i] = upper[k];
                k += 1;
            }
        }
        DistanceMatrix::new((0..n).collect(), values).unwrap()
    }

    #[test]
    fn featureset_validation() {
        assert!(FeatureSet::new(2, 1, vec![0.0; 3], vec![0]).is_err());
        assert!(FeatureSet::new(1, 1, vec![f64::NAN], vec![0]).is_err());
        assert!(FeatureSet::new(1, 1, vec![0.0], vec![1]).is_err());
    }

    #[test]
    fn split_is_disjoint_and_seeded() {
        let rows: Vec<(usize, Vec<f64>)> = (0..30).map(|i| (i % 3, vec![i as f64])).collect();
        let f = FeatureSet::new(
            1,
            3,
            rows.iter().flat_map(|r| r.1.clone()).collect(),
            rows.iter().map(|r| r.0).collect(),
        )
        .unwrap();
        let cfg = CoverConfig { k: 5, seed: 9, ..Default::default() };
        let (q, s) = split_query_support(&f, &cfg).unwrap();
        let (q2, s2) = split_query_support(&f, &cfg).unwrap();
        assert_eq!((&q, &s), (&q2, &s2));
        assert_eq!(q.len(), 15);
        for c in 0..3 {
            let qv: Vec<f64> = q.rows().filter(|r| r.0 == c).map(|r| r.1[0]).collect();
            let sv: Vec<f64> = s.rows().filter(|r| r.0 == c).map(|r| r.1[0]).collect();
            assert_eq!(qv.len(), 5);
            assert!(qv.iter().all(|v| !sv.contains(v)));
        }
        let exact = CoverConfig { k: 5, seed: 1, ..Default::default() };
        let (q, s) = split_query_support(&f, &CoverConfig { k: 5, ..exact.clone() }).unwrap();
        assert_eq!(q.len() + s.len(), 30);
        let err = split_query_support(&f, &CoverConfig { k: 6, ..exact }).unwrap_err();
        assert!(matches!(err, Error::InsufficientExamples { class: 0, have: 10, need: 12 }));
    }

    #[test]
    fn hand_cover_example() {
        let q = fs(1, 2, &[(0, &[0.0]), (0, &[1.0]), (1, &[5.0])]);
        let s = fs(1, 2, &[(1, &[0.0]), (1, &[2.0]), (0, &[9.0])]);
        let cfg = CoverConfig { r_max: Some(2.0), ..Default::default() };
        let a = cover_similarity(&q, &s, &cfg).unwrap();
        assert!((a.get(0, 1) - 0.75).abs() < 0.01, "{}", a.get(0, 1));
        let exact = cover_similarity(&q, &s, &CoverConfig { integration: Integration::Exact, ..cfg })
            .unwrap();
        assert!((exact.get(0, 1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn identical_and_distant_covers() {
        let q = fs(2, 2, &[(0, &[0.0, 0.0]), (0, &[1.0, 1.0]), (1, &[10.0, 0.0])]);
        let s = q.clone();
        let cfg = CoverConfig { r_max: Some(2.0), grid_points: 1000, ..Default::default() };
        let a = cover_similarity(&q, &s, &cfg).unwrap();
        assert!(a.get(0, 0) > 0.999);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn cover_errors() {
        let q = fs(1, 1, &[(0, &[0.0])]);
        let cfg = CoverConfig { r_max: Some(0.0), ..Default::default() };
        assert!(cover_similarity(&q, &q, &cfg).is_err());
        // default radius collapses to zero when every minimum distance is zero
        assert!(cover_similarity(&q, &q, &CoverConfig::default()).is_err());
        let empty = FeatureSet::new(1, 1, vec![], vec![]).unwrap();
        assert!(cover_similarity(&empty, &empty, &CoverConfig::default()).is_err());
    }

    #[test]
    fn distance_from_similarity() {
        let a = SimilarityMatrix::new(vec![0, 1], vec![1.0, 0.2, 0.4, 1.0]).unwrap();
        let d = to_distance_matrix(&a);
        assert!((d.get(0, 1) - 0.7).abs() < 1e-15);
        assert_eq!(d.get(0, 0), 0.0);
        let a = SimilarityMatrix::new(vec![0, 1], vec![1.0, 0.25, 0.25, 1.0]).unwrap();
        assert_eq!(to_distance_matrix(&a).get(1, 0), 0.75);
        let id = SimilarityMatrix::new(vec![0, 1, 2], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        assert!(to_distance_matrix(&id).upper_triangle().iter().all(|&v| v == 1.0));
        assert!(SimilarityMatrix::new(vec![0], vec![1.5]).is_err());
    }

    #[test]
    fn mean_distances() {
        let f = fs(1, 3, &[(0, &[0.0]), (1, &[0.5]), (1, &[1.5]), (2, &[2.0])]);
        let d = class_mean_distances(&f);
        assert_eq!(d.values, vec![0., 1., 2., 1., 0., 1., 2., 1., 0.]);
        let f = fs(2, 2, &[(0, &[0.0, 0.0]), (1, &[3.0, 0.0])]);
        assert_eq!(class_mean_distances(&f).get(0, 1), 3.0);
        let f = fs(1, 2, &[(0, &[1.0]), (1, &[1.0])]);
        assert_eq!(class_mean_distances(&f).get(0, 1), 0.0);
    }

    #[test]
    fn ccc_values() {
        let d1 = dm(4, &[1.0, 2.0, 3.0, 2.0, 5.0, 1.0]);
        assert!((ccc(&d1, &d1).unwrap() - 1.0).abs() < 1e-15);
        let mut affine = d1.clone();
        affine.values.iter_mut().for_each(|v| *v = if *v == 0.0 { 0.0 } else { 2.0 * *v + 5.0 });
        assert!((ccc(&d1, &affine).unwrap() - 1.0).abs() < 1e-15);

        let dw = dm(3, &[1.0, 2.0, 1.0]);
        let df = dm(3, &[0.2, 0.9, 0.3]);
        let v = ccc(&dw, &df).unwrap();
        assert!((v - 0.9912).abs() < 0.001, "{v}");
        assert_eq!(v, ccc(&df, &dw).unwrap());

        let flat = dm(3, &[1.0, 1.0, 1.0]);
        assert!(matches!(ccc(&dw, &flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn direct_correlation_cases() {
        let f = fs(1, 3, &[(0, &[0.0]), (1, &[1.0]), (2, &[2.0])]);
        let dw = dm(3, &[1.0, 2.0, 1.0]);
        let v = direct_correlation(&f, &f, &dw, 500, 3).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let flat = dm(3, &[2.0, 2.0, 2.0]);
        assert!(direct_correlation(&f, &f, &flat, 200, 3).is_err());
    }

    #[test]
    fn cover_stat_means() {
        let a = SimilarityMatrix::new(vec![0, 1], vec![1.0, 0.2, 0.4, 0.9]).unwrap();
        let (s, m) = cover_stats(&a);
        assert!((s - 0.95).abs() < 1e-15 && (m - 0.3).abs() < 1e-15);
        let half = SimilarityMatrix::new(vec![0, 1, 2], vec![0.5; 9]).unwrap();
        assert_eq!(cover_stats(&half), (0.5, 0.5));
        let id = SimilarityMatrix::new(vec![0, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(cover_stats(&id), (1.0, 0.0));
    }
}
