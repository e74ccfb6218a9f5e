//! Synthetic generators and Monte-Carlo oracles.
//!
//! All randomness is drawn from ChaCha8 seeded with a single 64-bit seed.
//! Independent pieces use separate ChaCha streams (`set_stream`), so an
//! epoch's draws depend only on `(seed, epoch)`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::labelspace::LabelSpace;
use crate::manifold::FeatureSet;
use crate::metrics::{PredictionLog, Record};

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const DIRECTION_STREAM: u64 = 0;
const EPOCH_STREAM_BASE: u64 = 1 << 32;

/// `C` equal-norm, zero-mean vectors in `R^p` with pairwise cosine
/// `-1/(C-1)`, each of length `scale`.
pub fn gen_etf(c_count: usize, dim: usize, scale: f64) -> Result<DMatrix<f64>> {
    if c_count < 2 {
        return Err(Error::InvalidArgument("a simplex needs at least two vertices".into()));
    }
    if dim + 1 < c_count {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} too small for {c_count} classes (need ≥ {})",
            c_count - 1
        )));
    }
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::InvalidArgument("scale must be positive".into()));
    }
    // Coordinates of the centred basis vectors e_c - 1/C in the Helmert
    // basis of the sum-zero subspace; that basis is orthonormal, so the
    // Gram matrix is preserved exactly.
    let c = c_count;
    let mut out = DMatrix::zeros(c, dim);
    for k in 1..c {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for row in 0..c {
            // u_k = (1,..,1 (k times), -k, 0,..) / norm; centring drops out
            // because u_k sums to zero.
            let v = match row.cmp(&k) {
                std::cmp::Ordering::Less => 1.0 / norm,
                std::cmp::Ordering::Equal => -(k as f64) / norm,
                std::cmp::Ordering::Greater => 0.0,
            };
            out[(row, k - 1)] = v;
        }
    }
    let len = ((c - 1) as f64 / c as f64).sqrt();
    Ok(out * (scale / len))
}

/// Random orthogonal `n × n` matrix (QR of a Gaussian matrix, sign-fixed).
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, DIRECTION_STREAM);
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Rows of `count` orthonormal (when `count <= dim`) or independent unit
/// (otherwise) isotropic directions.
fn directions(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(count);
    for _ in 0..count {
        loop {
            let mut v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            if count <= dim {
                for u in &out {
                    let proj = u.dot(&v);
                    v.axpy(-proj, u, 1.0);
                }
            }
            let n = v.norm();
            if n > 1e-8 {
                out.push(v / n);
                break;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryParams {
    pub epochs: usize,
    /// Per-epoch scale of the superclass anchor offset.
    pub hypernym_gap: Vec<f64>,
    /// Per-epoch scale of the class-specific offset.
    pub hyponym_gap: Vec<f64>,
    /// Per-epoch within-class standard deviation.
    pub noise: Vec<f64>,
    pub dim: usize,
    pub examples_per_class: usize,
    pub seed: u64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl TrajectoryParams {
    /// Default schedules over epochs `t = 1..=T`: the superclass gap
    /// saturates within a few epochs, the class gap rises around mid
    /// training, and noise decays linearly to zero at the last epoch.
    pub fn with_default_schedules(epochs: usize, dim: usize, examples_per_class: usize, seed: u64) -> Self {
        let t_max = epochs as f64;
        let ts = || (1..=epochs).map(|t| t as f64);
        TrajectoryParams {
            epochs,
            hypernym_gap: ts().map(|t| 4.0 * (1.0 - (-t / 3.0).exp())).collect(),
            hyponym_gap: ts()
                .map(|t| 4.0 * logistic((t - 0.5 * t_max) / (0.075 * t_max)))
                .collect(),
            noise: ts().map(|t| 1.0 - t / t_max).collect(),
            dim,
            examples_per_class,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("hypernym_gap", &self.hypernym_gap),
            ("hyponym_gap", &self.hyponym_gap),
            ("noise", &self.noise),
        ] {
            if s.len() != self.epochs {
                return Err(Error::InvalidArgument(format!(
                    "{name} has {} entries for {} epochs",
                    s.len(),
                    self.epochs
                )));
            }
            if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative")));
            }
        }
        if self.epochs == 0 || self.dim == 0 || self.examples_per_class == 0 {
            return Err(Error::InvalidArgument(
                "epochs, dim and examples_per_class must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Reads `key=value` lines. Schedules are comma-separated lists; keys
    /// left out fall back to the default schedules.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected key=value".into(),
            })?;
            kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let scalar = |key: &str, default: u64| -> Result<u64> {
            match kv.get(key) {
                None => Ok(default),
                Some((line, v)) => v.parse().map_err(|_| Error::Parse {
                    line: *line,
                    message: format!("invalid {key} `{v}`"),
                }),
            }
        };
        let epochs = scalar("epochs", 40)? as usize;
        let dim = scalar("dim", 64)? as usize;
        let examples = scalar("examples_per_class", 20)? as usize;
        let seed = scalar("seed", 0)?;
        let mut params = TrajectoryParams::with_default_schedules(epochs, dim, examples, seed);
        for (key, slot) in [
            ("hypernym_gap", &mut params.hypernym_gap),
            ("hyponym_gap", &mut params.hyponym_gap),
            ("noise", &mut params.noise),
        ] {
            if let Some((line, v)) = kv.get(key) {
                *slot = v
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| Error::Parse {
                        line: *line,
                        message: format!("invalid {key} list"),
                    })?;
            }
        }
        if let Some(k) = kv.keys().find(|k| {
            !matches!(
                k.as_str(),
                "epochs" | "dim" | "examples_per_class" | "seed" | "hypernym_gap" | "hyponym_gap" | "noise"
            )
        }) {
            return Err(Error::InvalidArgument(format!("unknown key `{k}`")));
        }
        params.validate()?;
        Ok(params)
    }
}

/// One feature snapshot per epoch. Class `c` in superclass `s` has mean
/// `hypernym_gap(t)·a_s + hyponym_gap(t)·e_c`, with the anchor and class
/// directions drawn once; examples add isotropic noise of std `noise(t)`.
pub fn gen_hierarchical_trajectory(
    h: &Hierarchy,
    s: &LabelSpace,
    params: &TrajectoryParams,
) -> Result<Vec<FeatureSet>> {
    params.validate()?;
    if h.class_count() != s.class_count() {
        return Err(Error::LabelSpace(format!(
            "hierarchy has {} classes, label space {}",
            h.class_count(),
            s.class_count()
        )));
    }
    let c_count = s.class_count();
    let mapping = s.mapping();
    let mut rng = stream(params.seed, DIRECTION_STREAM);
    let dirs = directions(&mut rng, s.len() + c_count, params.dim);
    let (anchors, class_dirs) = dirs.split_at(s.len());

    let n = params.examples_per_class;
    let labels: Vec<usize> = (0..c_count).flat_map(|c| std::iter::repeat_n(c, n)).collect();
    (0..params.epochs)
        .map(|t| {
            let mut rng = stream(params.seed, EPOCH_STREAM_BASE + t as u64);
            let (gs, gh, sigma) = (params.hypernym_gap[t], params.hyponym_gap[t], params.noise[t]);
            let mut data = Vec::with_capacity(labels.len() * params.dim);
            for &c in &labels {
                let mean = &anchors[mapping.table()[c]] * gs + &class_dirs[c] * gh;
                for x in mean.iter() {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push(x + sigma * z);
                }
            }
            Ok(FeatureSet::new(params.dim, c_count, data, labels.clone())?.with_epoch(t as u32 + 1))
        })
        .collect()
}

/// Nearest-class-mean predictions over a trajectory, using each epoch's own
/// empirical class means. Example ids are `x<row>`.
pub fn ncc_prediction_log(trajectory: &[FeatureSet]) -> Result<PredictionLog> {
    let c_count = trajectory.first().map_or(0, FeatureSet::class_count);
    let mut records = Vec::new();
    for (t, f) in trajectory.iter().enumerate() {
        let (_, means) = crate::manifold::class_means(f);
        let means = DMatrix::from_row_iterator(means.len(), f.dim(), means.into_iter().flatten());
        if means.nrows() != f.class_count() {
            return Err(Error::Features("every class needs examples".into()));
        }
        for (i, (label, row)) in f.rows().enumerate() {
            let pred = crate::collapse::nearest_centroid(&means, &DVector::from_column_slice(row));
            records.push(Record {
                epoch: f.epoch.unwrap_or(t as u32 + 1),
                example_id: format!("x{i}"),
                true_label: label,
                pred_label: pred,
            });
        }
    }
    PredictionLog::new(records, c_count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrajectory {
    pub log: PredictionLog,
    /// Epochs where a within-superclass error was requested for a singleton
    /// superclass and the draw fell back to a uniform wrong label.
    pub fallback_epochs: Vec<u32>,
}

/// Synthetic prediction log. Example `i` has true class `i mod C`. At each
/// epoch it is correct with probability `accuracy[t]`; otherwise the wrong
/// label stays inside the true superclass with probability `within[t]`,
/// else it is uniform over all wrong labels.
pub fn gen_prediction_trajectory(
    s: &LabelSpace,
    accuracy: &[f64],
    within: &[f64],
    examples: usize,
    seed: u64,
) -> Result<PredictionTrajectory> {
    if accuracy.len() != within.len() {
        return Err(Error::InvalidArgument("schedules differ in length".into()));
    }
    if accuracy.iter().chain(within).any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument("schedules must lie in [0,1]".into()));
    }
    let c_count = s.class_count();
    if c_count < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    let mapping = s.mapping();
    let mut records = Vec::with_capacity(accuracy.len() * examples);
    let mut fallback_epochs = Vec::new();
    let wrong = Uniform::new(0, c_count - 1).expect("non-empty range");
    for (t, (&acc, &w)) in accuracy.iter().zip(within).enumerate() {
        let epoch = t as u32 + 1;
        let mut rng = stream(seed, EPOCH_STREAM_BASE + t as u64);
        let mut fell_back = false;
        for i in 0..examples {
            let truth = i % c_count;
            let pred = if rng.random::<f64>() < acc {
                truth
            } else {
                let members = &s.superclasses()[mapping.table()[truth]].members;
                let inside = rng.random::<f64>() < w;
                if inside && members.len() > 1 {
                    let k = rng.random_range(0..members.len() - 1);
                    let pick = members.iter().copied().filter(|&c| c != truth).nth(k);
                    pick.expect("superclass has another member")
                } else {
                    fell_back |= inside;
                    let k = wrong.sample(&mut rng);
                    if k >= truth { k + 1 } else { k }
                }
            };
            records.push(Record {
                epoch,
                example_id: format!("x{i}"),
                true_label: truth,
                pred_label: pred,
            });
        }
        if fell_back {
            fallback_epochs.push(epoch);
        }
    }
    Ok(PredictionTrajectory {
        log: PredictionLog::new(records, c_count)?,
        fallback_epochs,
    })
}

/// Monte-Carlo estimate of superclass accuracy: the true superclass is
/// drawn by size; with probability `p_h` the prediction is correct,
/// otherwise the predicted superclass is an independent size-weighted draw.
/// Returns the hit rate and its binomial standard error.
pub fn mc_superclass_accuracy(p_h: f64, sizes: &[usize], trials: usize, seed: u64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p_h) {
        return Err(Error::InvalidArgument(format!("p_h = {p_h} outside [0,1]")));
    }
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("sizes must not all be zero".into()));
    }
    let mut cumulative = Vec::with_capacity(sizes.len());
    let mut acc = 0;
    for &s in sizes {
        acc += s;
        cumulative.push(acc);
    }
    let draw = |rng: &mut ChaCha8Rng| {
        let x = rng.random_range(0..total);
        cumulative.partition_point(|&c| c <= x)
    };
    let mut rng = stream(seed, DIRECTION_STREAM);
    let mut hits = 0usize;
    for _ in 0..trials {
        let truth = draw(&mut rng);
        if rng.random::<f64>() < p_h || draw(&mut rng) == truth {
            hits += 1;
        }
    }
    let est = hits as f64 / trials as f64;
    let se = (est * (1.0 - est) / trials as f64).sqrt();
    Ok((est, se))
}

/// Balanced two-level taxonomy `root → s{i} → c{j}` with `sizes[i]` leaves
/// under superclass `i`, plus the matching label space.
pub fn balanced_taxonomy(sizes: &[usize]) -> Result<(Hierarchy, LabelSpace)> {
    let mut edges = Vec::new();
    let mut classes = Vec::new();
    let mut groups = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let sup = format!("s{i}");
        edges.push(("root".to_string(), sup.clone()));
        for _ in 0..n {
            let leaf = format!("c{}", classes.len());
            edges.push((sup.clone(), leaf.clone()));
            classes.push(leaf);
        }
        groups.push(crate::labelspace::Group {
            name: sup.clone(),
            nodes: vec![sup],
        });
    }
    let h = Hierarchy::from_edges(&edges, &classes)?;
    let (s, _) = crate::labelspace::build_labelspace(&h, "hypernym", &groups)?;
    Ok((h, s))
}

/// Features whose class centres realise the tree metric: every node gets an
/// orthonormal direction and a leaf sits at the sum of the directions on its
/// root path, so squared centre distances equal hop counts. Each class gets
/// `per_class` points with isotropic noise `sigma`.
pub fn tree_embedded_features(h: &Hierarchy, per_class: usize, sigma: f64, seed: u64) -> Result<FeatureSet> {
    let c_count = h.class_count();
    let paths = (0..c_count).map(|c| h.ancestry(c)).collect::<Result<Vec<_>>>()?;
    let mut node_ids: HashMap<&str, usize> = HashMap::new();
    for p in &paths {
        for &n in p {
            let next = node_ids.len();
            node_ids.entry(n).or_insert(next);
        }
    }
    let dim = node_ids.len();
    let mut rng = stream(seed, EPOCH_STREAM_BASE);
    let mut data = Vec::with_capacity(c_count * per_class * dim);
    let mut labels = Vec::with_capacity(c_count * per_class);
    for (c, path) in paths.iter().enumerate() {
        let mut centre = vec![0.0; dim];
        // the root carries no edge, so its direction is skipped
        for &n in &path[..path.len() - 1] {
            centre[node_ids[n]] = 1.0;
        }
        for _ in 0..per_class {
            for x in &centre {
                let z: f64 = rng.sample(StandardNormal);
                data.push(x + sigma * z);
            }
            labels.push(c);
        }
    }
    FeatureSet::new(dim, c_count, data, labels)
}
