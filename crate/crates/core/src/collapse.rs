//! Neural-collapse statistics (NC1–NC4) for a feature snapshot and a linear
//! classifier head, in the training label space or lifted to superclasses.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::labelspace::LabelSpace;
use crate::manifold::FeatureSet;

/// First and second moments of a labelled feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub global_mean: DVector<f64>,
    /// `C × p`, one class mean per row.
    pub class_means: DMatrix<f64>,
    pub sigma_w: DMatrix<f64>,
    pub sigma_b: DMatrix<f64>,
    pub counts: Vec<usize>,
}

/// Last linear layer: logits are `W h + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    /// `C × p`, one row per class.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl ClassifierHead {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::InvalidArgument(format!(
                "head has {} weight rows but {} biases",
                weights.nrows(),
                bias.len()
            )));
        }
        Ok(ClassifierHead { weights, bias })
    }

    pub fn class_count(&self) -> usize {
        self.bias.len()
    }

    /// `w_c = μ_c`, `b_c = -½‖μ_c‖²`: the linear form of nearest centroid.
    pub fn nearest_centroid(means: &DMatrix<f64>) -> Self {
        let bias = DVector::from_iterator(
            means.nrows(),
            means.row_iter().map(|r| -0.5 * r.norm_squared()),
        );
        ClassifierHead {
            weights: means.clone(),
            bias,
        }
    }

    pub fn logits(&self, h: &DVector<f64>) -> DVector<f64> {
        &self.weights * h + &self.bias
    }
}

fn row_vector(f: &FeatureSet, i: usize) -> DVector<f64> {
    DVector::from_column_slice(f.row(i))
}

/// Class means, global mean, and the between/within covariances.
///
/// `Σ_B` averages over classes without weighting; `Σ_W` averages over all
/// examples. Every class in `0..C` must have at least one example.
pub fn class_statistics(f: &FeatureSet) -> Result<ClassStats> {
    let p = f.dim();
    let c_count = f.class_count();
    let idx = f.class_indices();
    if let Some(c) = idx.iter().position(Vec::is_empty) {
        return Err(Error::InsufficientExamples {
            class: c,
            have: 0,
            need: 1,
        });
    }
    let n = f.len() as f64;

    let mut class_means = DMatrix::zeros(c_count, p);
    let mut global_sum = DVector::zeros(p);
    for (c, rows) in idx.iter().enumerate() {
        let mut sum = DVector::zeros(p);
        for &r in rows {
            sum += row_vector(f, r);
        }
        global_sum += &sum;
        class_means.set_row(c, &(sum / rows.len() as f64).transpose());
    }
    let global_mean = global_sum / n;

    let mut sigma_w = DMatrix::zeros(p, p);
    for (c, rows) in idx.iter().enumerate() {
        let mu = class_means.row(c).transpose();
        for &r in rows {
            let d = row_vector(f, r) - &mu;
            sigma_w.ger(1.0, &d, &d, 1.0);
        }
    }
    sigma_w /= n;

    let sigma_b = between_covariance(&class_means, &global_mean);
    Ok(ClassStats {
        global_mean,
        class_means,
        sigma_w,
        sigma_b,
        counts: idx.iter().map(Vec::len).collect(),
    })
}

fn between_covariance(means: &DMatrix<f64>, global: &DVector<f64>) -> DMatrix<f64> {
    let p = global.len();
    let mut sb = DMatrix::zeros(p, p);
    for row in means.row_iter() {
        let d = row.transpose() - global;
        sb.ger(1.0, &d, &d, 1.0);
    }
    sb / means.nrows() as f64
}

/// Moore–Penrose pseudoinverse via SVD. Singular values at or below
/// `1e-10 · σ_max · max(rows, cols)` are treated as zero.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let svd = m.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let cutoff = 1e-10 * s_max * r.max(c) as f64;
    let u = svd.u.expect("left singular vectors requested");
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out.ger(1.0 / s, &vt.row(k).transpose(), &u.column(k), 1.0);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nc1 {
    pub value: f64,
    /// Set when `Σ_B` has no singular value above the cutoff.
    pub degenerate: bool,
}

/// `tr(Σ_W Σ_B†) / C`.
pub fn nc1(stats: &ClassStats) -> Nc1 {
    let c = stats.class_means.nrows() as f64;
    let sb_pinv = pinv(&stats.sigma_b);
    let degenerate = sb_pinv.iter().all(|&v| v == 0.0);
    let value = (&stats.sigma_w * sb_pinv).trace() / c;
    Nc1 { value, degenerate }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nc2 {
    pub beta_mu: f64,
    pub beta_w: f64,
    pub alpha_mu: f64,
    pub alpha_w: f64,
}

fn std_over_mean(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}

fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Norm spread and pairwise-cosine spread of the rows of `m`.
fn norm_and_angle_spread(m: &DMatrix<f64>, what: &str) -> Result<(f64, f64)> {
    let norms: Vec<f64> = m.row_iter().map(|r| r.norm()).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::Degenerate(format!("{what} row {i} has zero length")));
    }
    let mut cosines = Vec::with_capacity(norms.len() * (norms.len() - 1) / 2);
    for i in 0..m.nrows() {
        for j in i + 1..m.nrows() {
            cosines.push(m.row(i).dot(&m.row(j)) / (norms[i] * norms[j]));
        }
    }
    Ok((std_over_mean(&norms), population_std(&cosines)))
}

fn centered_means(stats: &ClassStats) -> DMatrix<f64> {
    let mut m = stats.class_means.clone();
    for mut row in m.row_iter_mut() {
        row -= stats.global_mean.transpose();
    }
    m
}

/// Equal-norm and equal-angle deviations of centered means and head rows.
pub fn nc2_metrics(stats: &ClassStats, head: &ClassifierHead) -> Result<Nc2> {
    if stats.class_means.nrows() < 2 {
        return Err(Error::Degenerate("NC2 needs at least two classes".into()));
    }
    let (beta_mu, alpha_mu) = norm_and_angle_spread(&centered_means(stats), "centered mean")?;
    let (beta_w, alpha_w) = norm_and_angle_spread(&head.weights, "weight")?;
    Ok(Nc2 {
        beta_mu,
        beta_w,
        alpha_mu,
        alpha_w,
    })
}

/// Frobenius gap between `Wᵀ` and the centered-mean matrix, both scaled to
/// unit Frobenius norm.
pub fn nc3_self_duality(stats: &ClassStats, head: &ClassifierHead) -> Result<f64> {
    let w_t = head.weights.transpose();
    let m = centered_means(stats).transpose();
    if w_t.shape() != m.shape() {
        return Err(Error::InvalidArgument("head and statistics disagree in shape".into()));
    }
    let (wn, mn) = (w_t.norm(), m.norm());
    if wn == 0.0 || mn == 0.0 {
        return Err(Error::Degenerate("zero matrix in self-duality".into()));
    }
    Ok((w_t / wn - m / mn).norm())
}

fn argmax_low(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Index of the nearest row of `means` to `h`; ties to the lower index.
pub fn nearest_centroid(means: &DMatrix<f64>, h: &DVector<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, row) in means.row_iter().enumerate() {
        let d = (row.transpose() - h).norm_squared();
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Fraction of examples where the head's argmax disagrees with the
/// nearest class mean.
pub fn nc4_mismatch(f: &FeatureSet, stats: &ClassStats, head: &ClassifierHead) -> Result<f64> {
    if head.class_count() != stats.class_means.nrows() {
        return Err(Error::InvalidArgument("head and statistics disagree in class count".into()));
    }
    if f.is_empty() {
        return Ok(0.0);
    }
    let mismatches = (0..f.len())
        .filter(|&i| {
            let h = row_vector(f, i);
            argmax_low(&head.logits(&h)) != nearest_centroid(&stats.class_means, &h)
        })
        .count();
    Ok(mismatches as f64 / f.len() as f64)
}

/// Superclass statistics and head from class-level ones.
///
/// Superclass means, weights and biases are unweighted averages over member
/// classes. `Σ_W` is re-centred on superclass means through
/// `Σ_W + Σ_c (n_c/N)(μ_c − μ_s)(μ_c − μ_s)ᵀ`, which equals averaging
/// `(h − μ_s)(h − μ_s)ᵀ` over all examples. The global mean is kept.
pub fn lift_to_superclass(
    stats: &ClassStats,
    head: &ClassifierHead,
    s: &LabelSpace,
) -> Result<(ClassStats, ClassifierHead)> {
    let c_count = stats.class_means.nrows();
    if s.class_count() != c_count || head.class_count() != c_count {
        return Err(Error::LabelSpace(format!(
            "label space covers {} classes, statistics {} and head {}",
            s.class_count(),
            c_count,
            head.class_count()
        )));
    }
    let p = stats.global_mean.len();
    let s_count = s.len();
    let n: usize = stats.counts.iter().sum();
    let mut means = DMatrix::zeros(s_count, p);
    let mut weights = DMatrix::zeros(s_count, p);
    let mut bias = DVector::zeros(s_count);
    let mut counts = vec![0; s_count];
    let mut sigma_w = stats.sigma_w.clone();
    for (si, sc) in s.superclasses().iter().enumerate() {
        let k = sc.members.len() as f64;
        let mut mu = DVector::zeros(p);
        let mut w = DVector::zeros(p);
        for &c in &sc.members {
            mu += stats.class_means.row(c).transpose();
            w += head.weights.row(c).transpose();
            bias[si] += head.bias[c];
            counts[si] += stats.counts[c];
        }
        mu /= k;
        w /= k;
        bias[si] /= k;
        for &c in &sc.members {
            let d = stats.class_means.row(c).transpose() - &mu;
            sigma_w.ger(stats.counts[c] as f64 / n as f64, &d, &d, 1.0);
        }
        means.set_row(si, &mu.transpose());
        weights.set_row(si, &w.transpose());
    }
    let sigma_b = between_covariance(&means, &stats.global_mean);
    Ok((
        ClassStats {
            global_mean: stats.global_mean.clone(),
            class_means: means,
            sigma_w,
            sigma_b,
            counts,
        },
        ClassifierHead { weights, bias },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NcReport {
    pub nc1: f64,
    pub beta_mu: Option<f64>,
    pub beta_w: Option<f64>,
    pub alpha_mu: Option<f64>,
    pub alpha_w: Option<f64>,
    pub nc3: Option<f64>,
    pub nc4: f64,
    pub label_space: String,
    pub degenerate_flags: Vec<String>,
}

/// Every NC statistic for one (features, stats, head) triple. Undefined
/// NC2/NC3 values are reported as `None` with a flag.
pub fn nc_report(
    f: &FeatureSet,
    stats: &ClassStats,
    head: &ClassifierHead,
    label_space: &str,
) -> Result<NcReport> {
    let mut flags = Vec::new();
    let n1 = nc1(stats);
    if n1.degenerate {
        flags.push("nc1: between-class covariance is zero".to_string());
    }
    let n2 = match nc2_metrics(stats, head) {
        Ok(v) => Some(v),
        Err(Error::Degenerate(msg)) => {
            flags.push(format!("nc2: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    let n3 = match nc3_self_duality(stats, head) {
        Ok(v) => Some(v),
        Err(Error::Degenerate(msg)) => {
            flags.push(format!("nc3: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    Ok(NcReport {
        nc1: n1.value,
        beta_mu: n2.map(|v| v.beta_mu),
        beta_w: n2.map(|v| v.beta_w),
        alpha_mu: n2.map(|v| v.alpha_mu),
        alpha_w: n2.map(|v| v.alpha_w),
        nc3: n3,
        nc4: nc4_mismatch(f, stats, head)?,
        label_space: label_space.to_string(),
        degenerate_flags: flags,
    })
}
