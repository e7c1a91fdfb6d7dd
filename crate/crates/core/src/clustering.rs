//! Global weight codebooks.
//!
//! Every weight and bias of a network is reduced to one of `|W|` shared
//! values, either by one-dimensional Lloyd iterations or by the closed-form
//! L1-optimal placement for a Laplacian weight distribution.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMethod {
    KMeans,
    LaplacianL1,
}

impl ClusterMethod {
    pub fn code(self) -> u8 {
        match self {
            ClusterMethod::KMeans => 1,
            ClusterMethod::LaplacianL1 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(ClusterMethod::KMeans),
            2 => Some(ClusterMethod::LaplacianL1),
            _ => None,
        }
    }
}

impl std::str::FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(ClusterMethod::KMeans),
            "laplacian" | "laplacian-l1" => Ok(ClusterMethod::LaplacianL1),
            other => Err(Error::InvalidArgument(format!("unknown cluster method `{other}`"))),
        }
    }
}

/// The set of unique weight values shared by the whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightCodebook {
    centers: Vec<f64>,
    method: ClusterMethod,
    /// Mean of the clustered values (Laplacian codebooks only).
    pub mean: f64,
    /// Scale applied to the Laplacian levels (Laplacian codebooks only).
    pub scale: f64,
}

impl WeightCodebook {
    pub fn from_centers(centers: Vec<f64>, method: ClusterMethod) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("codebook needs at least one center".into()));
        }
        if centers.iter().any(|c| !c.is_finite()) || centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "codebook centers must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self {
            centers,
            method,
            mean: 0.0,
            scale: 0.0,
        })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn method(&self) -> ClusterMethod {
        self.method
    }

    /// Index of the nearest center; ties resolve to the lower index.
    pub fn nearest(&self, value: f64) -> usize {
        let p = self.centers.partition_point(|&c| c < value);
        if p == 0 {
            0
        } else if p == self.centers.len() || value - self.centers[p - 1] <= self.centers[p] - value {
            p - 1
        } else {
            p
        }
    }

    pub fn assign(&self, values: &[f64]) -> Vec<u32> {
        values.iter().map(|&v| self.nearest(v) as u32).collect()
    }

    /// Replaces every value with its nearest center.
    pub fn snap_in_place(&self, values: &mut [f64]) {
        for v in values {
            *v = self.centers[self.nearest(*v)];
        }
    }

    /// Index of a center exactly equal to `value`.
    pub fn exact_index(&self, value: f64) -> Option<usize> {
        let i = self.nearest(value);
        (self.centers[i] == value).then_some(i)
    }
}

/// Nearest-center assignment of `values` against `codebook`.
pub fn assign_to_codebook(values: &[f64], codebook: &WeightCodebook) -> Vec<u32> {
    codebook.assign(values)
}

/// Result of a Lloyd run, with the objective after each assignment step.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: WeightCodebook,
    pub objective: Vec<f64>,
    pub iterations: usize,
}

/// One-dimensional Lloyd clustering.
#[derive(Debug, Clone)]
pub struct KMeans<'a> {
    k: usize,
    max_iters: usize,
    warm_start: Option<&'a [f64]>,
}

impl<'a> KMeans<'a> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iters: 100,
            warm_start: None,
        }
    }

    pub fn max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    /// Starts from previous centers instead of quantiles.
    pub fn warm_start(mut self, centers: &'a [f64]) -> Self {
        self.warm_start = Some(centers);
        self
    }

    pub fn fit(&self, values: &[f64]) -> Result<KMeansFit> {
        let k = self.k;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument("cannot cluster an empty value list".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("values must be finite".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
        if k > distinct {
            return Err(Error::DegenerateClustering { k, distinct });
        }

        let mut centers: Vec<f64> = match self.warm_start {
            Some(prev) if prev.len() == k => prev.to_vec(),
            Some(prev) => {
                return Err(Error::ShapeMismatch {
                    expected: k,
                    got: prev.len(),
                })
            }
            None => {
                let n = sorted.len();
                (0..k)
                    .map(|i| sorted[((2 * i + 1) * n / (2 * k)).min(n - 1)])
                    .collect()
            }
        };
        centers.sort_by(f64::total_cmp);
        centers.dedup();

        let mut objective = Vec::new();
        let mut previous_bounds: Vec<usize> = Vec::new();
        let mut iterations = 0;
        loop {
            repair_centers(&sorted, &mut centers, k);
            let bounds = cluster_bounds(&sorted, &centers);
            objective.push(sse(&sorted, &centers, &bounds));
            if bounds == previous_bounds || iterations >= self.max_iters {
                break;
            }
            iterations += 1;
            let mut empty = false;
            for c in 0..k {
                let (lo, hi) = (bounds[c], bounds[c + 1]);
                if lo == hi {
                    empty = true;
                    continue;
                }
                centers[c] = mean_of(&sorted[lo..hi]);
            }
            if empty {
                // Drop the stale center; repair reseeds it on the next pass.
                let keep: Vec<f64> = (0..k)
                    .filter(|&c| bounds[c] < bounds[c + 1])
                    .map(|c| centers[c])
                    .collect();
                centers = keep;
            }
            previous_bounds = bounds;
        }

        Ok(KMeansFit {
            codebook: WeightCodebook::from_centers(centers, ClusterMethod::KMeans)?,
            objective,
            iterations,
        })
    }
}

/// Lloyd clustering with quantile initialization.
pub fn kmeans_1d(values: &[f64], k: usize, max_iters: usize) -> Result<WeightCodebook> {
    Ok(KMeans::new(k).max_iters(max_iters).fit(values)?.codebook)
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Start offsets of each cluster in `sorted`, plus a trailing `sorted.len()`.
fn cluster_bounds(sorted: &[f64], centers: &[f64]) -> Vec<usize> {
    let mut bounds = Vec::with_capacity(centers.len() + 1);
    bounds.push(0);
    for w in centers.windows(2) {
        // Values at or below the midpoint belong to the lower center.
        let (lo, hi) = (w[0], w[1]);
        bounds.push(sorted.partition_point(|&v| v - lo <= hi - v));
    }
    bounds.push(sorted.len());
    bounds
}

fn sse(sorted: &[f64], centers: &[f64], bounds: &[usize]) -> f64 {
    centers
        .iter()
        .enumerate()
        .map(|(c, &m)| {
            sorted[bounds[c]..bounds[c + 1]]
                .iter()
                .map(|v| (v - m) * (v - m))
                .sum::<f64>()
        })
        .sum()
}

/// Adds centers at the worst-quantized values until there are `k` distinct ones.
fn repair_centers(sorted: &[f64], centers: &mut Vec<f64>, k: usize) {
    while centers.len() < k {
        let mut worst = (f64::NEG_INFINITY, 0.0);
        if centers.is_empty() {
            centers.push(sorted[sorted.len() / 2]);
            continue;
        }
        for &v in sorted {
            let p = centers.partition_point(|&c| c < v);
            let mut d = f64::INFINITY;
            if p > 0 {
                d = d.min(v - centers[p - 1]);
            }
            if p < centers.len() {
                d = d.min(centers[p] - v);
            }
            if d > worst.0 {
                worst = (d, v);
            }
        }
        let v = worst.1;
        let p = centers.partition_point(|&c| c < v);
        centers.insert(p, v);
    }
}

/// Uniform sample without replacement of `⌈fraction·n⌉` values.
pub fn subsample(values: &[f64], fraction: f64, seed: u64) -> Result<Vec<f64>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "subsample fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n = values.len();
    let amount = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let amount = amount.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, n, amount)
        .into_iter()
        .map(|i| values[i])
        .collect())
}

/// Positive levels `L_1..L_{(N-1)/2}` of the L1-optimal Laplacian quantizer.
pub fn laplacian_levels(n: usize) -> Result<Vec<f64>> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "laplacian codebook size must be odd and at least 3, got {n}"
        )));
    }
    let count = (n - 1) / 2;
    let mut levels = Vec::with_capacity(count);
    let mut prev = 0.0f64;
    for _ in 0..count {
        let arg = 1.0 - 2.0 * prev.exp() / n as f64;
        if !(arg > 0.0) {
            return Err(Error::LaplacianRecurrence {
                feasible: levels.len(),
                requested: count,
            });
        }
        prev -= arg.ln();
        levels.push(prev);
    }
    Ok(levels)
}

/// Closed-form codebook `a ± b·L_i` (plus `a`) with the early/late scale nudges.
pub fn fit_laplacian_codebook(values: &[f64], n: usize) -> Result<WeightCodebook> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot cluster an empty value list".into()));
    }
    let levels = laplacian_levels(n)?;
    let mean = mean_of(values);
    let w_max = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if !(w_max > 0.0) || !w_max.is_finite() {
        return Err(Error::DegenerateClustering {
            k: n,
            distinct: 1,
        });
    }
    let top = levels[levels.len() - 1];
    let top_step = top - if levels.len() > 1 { levels[levels.len() - 2] } else { 0.0 };
    let mut scale = w_max / top;
    if w_max < 0.5 {
        scale *= (top + top_step / (2.0 * (1.0 - w_max))) / top;
    } else if w_max > 1.25 {
        scale *= (top - 0.25 * top_step) / top;
    }
    let mut centers = Vec::with_capacity(n);
    centers.extend(levels.iter().rev().map(|l| mean - scale * l));
    centers.push(mean);
    centers.extend(levels.iter().map(|l| mean + scale * l));
    let mut codebook = WeightCodebook::from_centers(centers, ClusterMethod::LaplacianL1)?;
    codebook.mean = mean;
    codebook.scale = scale;
    Ok(codebook)
}
