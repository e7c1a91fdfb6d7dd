//! Training loop with the periodic global weight-clustering schedule.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clustering::{fit_laplacian_codebook, subsample, ClusterMethod, KMeans, WeightCodebook};
use crate::data::{Dataset, DatasetTargets};
use crate::error::{Error, Result};
use crate::net::{DenseNet, Head, Targets};
use crate::optim::{Optimizer, OptimizerState};

/// Step-decayed learning rate: `base · decay^(step / decay_every)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub decay: f64,
    pub decay_every: usize,
}

impl LrSchedule {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            decay: 1.0,
            decay_every: usize::MAX,
        }
    }

    pub fn at(&self, step: usize) -> f64 {
        if self.decay == 1.0 {
            return self.base;
        }
        self.base * self.decay.powi((step / self.decay_every.max(1)) as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub method: ClusterMethod,
    /// Codebook size `|W|`.
    pub size: usize,
    pub every: usize,
    pub subsample: f64,
    pub kmeans_iters: usize,
}

impl ClusterConfig {
    pub fn new(method: ClusterMethod, size: usize) -> Self {
        Self {
            method,
            size,
            every: 1000,
            subsample: 1.0,
            kmeans_iters: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.every == 0 {
            return Err(Error::InvalidArgument("cluster_every must be at least 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "subsample fraction must be in (0, 1], got {}",
                self.subsample
            )));
        }
        if self.method == ClusterMethod::LaplacianL1 && self.size % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "laplacian codebooks need an odd size, got {}",
                self.size
            )));
        }
        if self.size == 0 {
            return Err(Error::InvalidArgument("codebook size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub lr: LrSchedule,
    pub batch_size: usize,
    pub steps: usize,
    pub clustering: Option<ClusterConfig>,
    /// Snap once more after the last step so the result has at most `|W|` values.
    pub terminal_snap: bool,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::adam(),
            lr: LrSchedule::constant(1e-3),
            batch_size: 32,
            steps: 1000,
            clustering: None,
            terminal_snap: true,
            eval_every: 1000,
            seed: 0,
        }
    }
}

/// One row of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub train_loss: f64,
    /// Accuracy for classifiers, mean L2 error for regression; NaN when no eval set.
    pub eval_metric: f64,
    pub distinct_weights: usize,
    pub w_max: f64,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "step,train_loss,eval_metric,distinct_weights,w_max";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.step, self.train_loss, self.eval_metric, self.distinct_weights, self.w_max
        )
    }
}

/// Evaluation result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub count: usize,
    /// Fraction of argmax hits (classification).
    pub accuracy: Option<f64>,
    /// Mean over samples of the summed squared error (regression).
    pub l2: Option<f64>,
}

impl Metrics {
    /// The head's headline number.
    pub fn value(&self) -> f64 {
        self.accuracy.or(self.l2).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub net: DenseNet,
    pub codebook: Option<WeightCodebook>,
    pub history: Vec<MetricsRow>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(net: &DenseNet, data: &Dataset) -> Result<Metrics> {
    const CHUNK: usize = 256;
    let out_dim = net.output_dim();
    let mut hits = 0usize;
    let mut l2 = 0.0;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(CHUNK) {
        let batch = data.gather(chunk);
        let out = net.predict(&batch.inputs)?;
        match &data.targets {
            DatasetTargets::Labels { .. } => {
                for (row, label) in out.chunks(out_dim).zip(&batch.labels) {
                    if argmax(row) == *label {
                        hits += 1;
                    }
                }
            }
            DatasetTargets::Values { dim, .. } => {
                if *dim != out_dim {
                    return Err(Error::ShapeMismatch {
                        expected: out_dim,
                        got: *dim,
                    });
                }
                l2 += out
                    .iter()
                    .zip(&batch.values)
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum::<f64>();
            }
        }
    }
    let count = data.len();
    Ok(match data.targets {
        DatasetTargets::Labels { .. } => Metrics {
            count,
            accuracy: Some(hits as f64 / count.max(1) as f64),
            l2: None,
        },
        DatasetTargets::Values { .. } => Metrics {
            count,
            accuracy: None,
            l2: Some(l2 / count.max(1) as f64),
        },
    })
}

/// Clusters every weight and bias of `net` into one global codebook and snaps them.
pub fn cluster_network(
    net: &mut DenseNet,
    config: &ClusterConfig,
    previous: Option<&WeightCodebook>,
    seed: u64,
) -> Result<WeightCodebook> {
    let pool = net.parameters();
    let sample = if config.subsample < 1.0 {
        subsample(&pool, config.subsample, seed)?
    } else {
        pool
    };
    let codebook = match config.method {
        ClusterMethod::KMeans => {
            let mut km = KMeans::new(config.size).max_iters(config.kmeans_iters);
            if let Some(prev) = previous.filter(|p| p.len() == config.size) {
                km = km.warm_start(prev.centers());
            }
            km.fit(&sample)?.codebook
        }
        ClusterMethod::LaplacianL1 => fit_laplacian_codebook(&sample, config.size)?,
    };
    net.snap_to(&codebook);
    Ok(codebook)
}

/// Runs a clustering pass when `step` is a positive multiple of the interval.
pub fn apply_clustering_schedule(
    net: &mut DenseNet,
    step: usize,
    config: &ClusterConfig,
    previous: Option<&WeightCodebook>,
    seed: u64,
) -> Result<Option<WeightCodebook>> {
    if step == 0 || step % config.every != 0 {
        return Ok(None);
    }
    cluster_network(net, config, previous, seed ^ step as u64).map(Some)
}

fn head_matches(net: &DenseNet, data: &Dataset) -> Result<()> {
    match (&net.head, &data.targets) {
        (Head::SoftmaxCrossEntropy, DatasetTargets::Labels { .. })
        | (Head::L2Regression, DatasetTargets::Values { .. }) => Ok(()),
        _ => Err(Error::InvalidArgument("dataset targets do not match the network head".into())),
    }
}

fn w_max(net: &DenseNet) -> f64 {
    let p = net.parameters();
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    p.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max)
}

/// Trains `net` on `train`, clustering on schedule and (optionally) once at the end.
pub fn train_loop(
    mut net: DenseNet,
    train: &Dataset,
    eval: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    if train.dim != net.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: net.input_dim(),
            got: train.dim,
        });
    }
    if train.is_empty() || config.batch_size == 0 {
        return Err(Error::InvalidArgument("empty dataset or zero batch size".into()));
    }
    head_matches(&net, train)?;
    if let Some(c) = &config.clustering {
        c.validate()?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut state = OptimizerState::new(config.optimizer, &net);
    let mut codebook: Option<WeightCodebook> = None;
    let mut history = Vec::new();
    let mut interval_loss = 0.0;
    let mut interval_steps = 0usize;

    let record = |net: &DenseNet, step: usize, loss: f64| -> Result<MetricsRow> {
        let eval_metric = match eval {
            Some(d) => evaluate(net, d)?.value(),
            None => f64::NAN,
        };
        Ok(MetricsRow {
            step,
            train_loss: loss,
            eval_metric,
            distinct_weights: net.distinct_parameters(),
            w_max: w_max(net),
        })
    };

    for step in 1..=config.steps {
        let mut idx = Vec::with_capacity(config.batch_size);
        while idx.len() < config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            idx.push(order[cursor]);
            cursor += 1;
        }
        let batch = train.gather(&idx);
        let fwd = net.forward_train(&batch.inputs)?;
        let targets = match net.head {
            Head::SoftmaxCrossEntropy => Targets::Classes(&batch.labels),
            Head::L2Regression => Targets::Values(&batch.values),
        };
        let (loss, grads) = net.backward(&fwd, targets)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!(
                    "loss {loss}, max |param| {}, lr {}",
                    net.max_abs_parameter(),
                    config.lr.at(step)
                ),
            });
        }
        state.step(&mut net, &grads, config.lr.at(step));
        interval_loss += loss;
        interval_steps += 1;

        let mut clustered = false;
        if let Some(c) = &config.clustering {
            if let Some(cb) =
                apply_clustering_schedule(&mut net, step, c, codebook.as_ref(), config.seed)?
            {
                codebook = Some(cb);
                clustered = true;
            }
        }
        let last = step == config.steps;
        if clustered || step % config.eval_every.max(1) == 0 || last {
            let loss = interval_loss / interval_steps.max(1) as f64;
            history.push(record(&net, step, loss)?);
            interval_loss = 0.0;
            interval_steps = 0;
        }
    }

    if let (true, Some(c)) = (config.terminal_snap, &config.clustering) {
        let already = codebook.is_some() && config.steps % c.every == 0;
        if !already {
            let cb = cluster_network(&mut net, c, codebook.as_ref(), config.seed ^ 0x5eed)?;
            codebook = Some(cb);
            let loss = history.last().map_or(f64::NAN, |r| r.train_loss);
            history.push(record(&net, config.steps, loss)?);
        }
    }

    Ok(TrainOutput {
        net,
        codebook,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{Activation, ActivationKind, ActivationSpec};
    use crate::data::{gen_parabola, parabola_at};

    fn parabola_net(levels: usize, seed: u64) -> DenseNet {
        let spec = ActivationSpec::new(ActivationKind::TanhD, levels).unwrap();
        DenseNet::new(&[1, 2, 1], Activation::Quantized(spec), Head::L2Regression, seed).unwrap()
    }

    #[test]
    fn schedule_skips_off_steps() {
        let mut net = parabola_net(4, 0);
        let before = net.clone();
        let cfg = ClusterConfig {
            every: 1000,
            ..ClusterConfig::new(ClusterMethod::KMeans, 3)
        };
        assert!(apply_clustering_schedule(&mut net, 999, &cfg, None, 0).unwrap().is_none());
        assert!(apply_clustering_schedule(&mut net, 0, &cfg, None, 0).unwrap().is_none());
        assert_eq!(net, before);
        let cb = apply_clustering_schedule(&mut net, 1000, &cfg, None, 0).unwrap().unwrap();
        assert!(net.distinct_parameters() <= 3);
        let snapped = net.clone();
        net.snap_to(&cb);
        assert_eq!(net, snapped);
    }

    #[test]
    fn training_is_deterministic() {
        let data = gen_parabola(256, 1);
        let cfg = TrainConfig {
            steps: 200,
            eval_every: 50,
            lr: LrSchedule::constant(0.01),
            seed: 5,
            ..TrainConfig::default()
        };
        let a = train_loop(parabola_net(8, 2), &data, Some(&data), &cfg).unwrap();
        let b = train_loop(parabola_net(8, 2), &data, Some(&data), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.net, b.net);
    }

    #[test]
    fn terminal_snap_bounds_distinct_values() {
        let data = gen_parabola(128, 1);
        let cfg = TrainConfig {
            steps: 50,
            clustering: Some(ClusterConfig {
                every: 1000,
                ..ClusterConfig::new(ClusterMethod::KMeans, 4)
            }),
            ..TrainConfig::default()
        };
        let out = train_loop(parabola_net(8, 2), &data, None, &cfg).unwrap();
        assert!(out.net.distinct_parameters() <= 4);
        assert!(out.codebook.is_some());
    }

    #[test]
    fn baseline_without_terminal_snap_stays_float() {
        let data = gen_parabola(128, 1);
        let cfg = TrainConfig {
            steps: 20,
            terminal_snap: false,
            clustering: Some(ClusterConfig {
                every: 1000,
                ..ClusterConfig::new(ClusterMethod::KMeans, 2)
            }),
            ..TrainConfig::default()
        };
        let out = train_loop(parabola_net(8, 2), &data, None, &cfg).unwrap();
        assert!(out.codebook.is_none());
        assert_eq!(out.net.distinct_parameters(), out.net.parameter_count());
    }

    #[test]
    fn evaluate_perfect_and_constant() {
        let mut net = DenseNet::new(&[1, 1], Activation::Identity, Head::L2Regression, 0).unwrap();
        net.layers[0].weights = vec![0.0];
        net.layers[0].bias = vec![0.25];
        let data = Dataset {
            dim: 1,
            inputs: vec![0.1, 0.7, -0.3],
            targets: DatasetTargets::Values {
                dim: 1,
                values: vec![0.25; 3],
            },
        };
        assert_eq!(evaluate(&net, &data).unwrap().l2, Some(0.0));

        let mut clf = DenseNet::new(&[2, 2], Activation::Identity, Head::SoftmaxCrossEntropy, 0)
            .unwrap();
        clf.layers[0].weights = vec![1.0, 0.0, 0.0, 1.0];
        clf.layers[0].bias = vec![0.0, 0.0];
        let inputs: Vec<f64> = (0..10).flat_map(|i| if i % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] }).collect();
        let labels = (0..10).map(|i| i % 2).collect();
        let data = Dataset {
            dim: 2,
            inputs,
            targets: DatasetTargets::Labels { classes: 2, labels },
        };
        assert_eq!(evaluate(&clf, &data).unwrap().accuracy, Some(1.0));
    }

    #[test]
    fn mismatched_head_rejected() {
        let data = parabola_at(&[0.0]);
        let net = DenseNet::new(&[1, 2], Activation::Identity, Head::SoftmaxCrossEntropy, 0).unwrap();
        assert!(train_loop(net, &data, None, &TrainConfig::default()).is_err());
    }

    #[test]
    fn diverging_training_aborts() {
        let data = gen_parabola(64, 3);
        let net = DenseNet::new(&[1, 4, 1], Activation::Smooth(ActivationKind::Relu6D), Head::L2Regression, 0)
            .unwrap();
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd,
            lr: LrSchedule::constant(1e200),
            steps: 50,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_loop(net, &data, None, &cfg),
            Err(Error::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0]), 0);
    }
}
