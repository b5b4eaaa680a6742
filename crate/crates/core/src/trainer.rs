//! Two-stage pipeline: contrastive representation learning, then a linear
//! classifier on frozen features evaluated on the balanced test split.
//!
//! Stage one runs plain k-positive contrastive training for the warm-up
//! epochs. For the targeted methods, the first post-warm-up epoch starts by
//! computing exact class centers from a full pass over the training set and
//! matching them to the targets. From then on every iteration
//!
//! 1. evaluates the targeted loss under the current assignment,
//! 2. steps the encoder,
//! 3. folds the batch centers into the EMA tracker,
//! 4. re-solves the assignment (online matching only).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::assignment::{self, assign_targets, batch_class_centers, Assignment, CenterTracker};
use crate::datagen::{self, generate_dataset, generate_hierarchy, DatasetConfig, LongTailDataset};
use crate::encoder::{self, accuracy, cosine_lr, train_classifier, ClassifierConfig, Mlp, Sgd};
use crate::error::{Error, Result};
use crate::losses::{kcl_loss, tsc_loss, FeatureBatch, LossConfig};
use crate::metrics::{self, MetricsReport};
use crate::seed::{self, stream};
use crate::targets::{generate_targets, TargetGenConfig, TargetSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// k-positive contrastive learning only.
    Kcl,
    /// Targeted loss with online class-target matching.
    Tsc,
    /// Targeted loss with a seeded random assignment fixed for the whole run.
    TscRandomAssign,
}

impl Method {
    pub fn uses_targets(self) -> bool {
        !matches!(self, Method::Kcl)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Kcl => "kcl",
            Method::Tsc => "tsc",
            Method::TscRandomAssign => "tsc-random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kcl" => Ok(Method::Kcl),
            "tsc" => Ok(Method::Tsc),
            "tsc-random" => Ok(Method::TscRandomAssign),
            other => Err(Error::validation(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    /// Fraction of epochs trained without targets.
    pub warmup_fraction: f64,
    pub batch_size: usize,
    pub loss: LossConfig,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Global gradient-norm cap applied before each step (0 disables).
    pub grad_clip: f64,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    /// Standard deviation of the additive Gaussian augmentation.
    pub augment_noise: f64,
    pub seed: u64,
    /// Record a center-uniformity snapshot every this many epochs (0 disables).
    pub log_interval: usize,
    pub renormalize_centers: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Tsc,
            epochs: 200,
            warmup_fraction: 0.5,
            batch_size: 128,
            loss: LossConfig::default(),
            learning_rate: 0.05,
            momentum: 0.9,
            grad_clip: 1.0,
            hidden: vec![64, 64],
            output_dim: 128,
            augment_noise: 0.02,
            seed: 0,
            log_interval: 0,
            renormalize_centers: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::validation(format!(
                "warm-up fraction must lie in [0, 1], got {}",
                self.warmup_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::validation("learning rate must be positive"));
        }
        if !(self.grad_clip >= 0.0) {
            return Err(Error::validation("gradient clip must be non-negative"));
        }
        if self.output_dim < 2 {
            return Err(Error::validation("output dimension must be at least 2"));
        }
        if !(self.augment_noise >= 0.0) {
            return Err(Error::validation("augmentation noise must be non-negative"));
        }
        self.loss.validate()
    }

    /// Number of leading epochs trained without targets.
    pub fn warmup_epochs(&self) -> usize {
        ((self.warmup_fraction * self.epochs as f64).floor() as usize).min(self.epochs)
    }
}

/// Class-center uniformity of the training set at the end of an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub uniformity: f64,
    pub nearest_uniformity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Whether this epoch used the targeted loss.
    pub targeted: bool,
    /// Assignment in force at the end of the epoch; its cost uses the EMA centers.
    pub assignment: Option<Assignment>,
    pub snapshot: Option<Snapshot>,
}

/// Stage-two results.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub accuracy: f64,
    pub test_features: Vec<Vec<f64>>,
    pub test_labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub warmup_epochs: usize,
    pub epochs: Vec<EpochRecord>,
    pub evaluation: Option<Evaluation>,
}

impl RunRecord {
    pub fn final_assignment(&self) -> Option<&Assignment> {
        self.epochs.last().and_then(|e| e.assignment.as_ref())
    }

    /// Assignment cost per targeted epoch, in order.
    pub fn assignment_costs(&self) -> Vec<f64> {
        self.epochs
            .iter()
            .filter_map(|e| e.assignment.as_ref().map(|a| a.cost))
            .collect()
    }

    /// `epoch,loss,targeted,assignment_cost,U,U1` lines with a header.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,loss,targeted,assignment_cost,U,U1\n");
        for e in &self.epochs {
            let cost = e.assignment.as_ref().map(|a| format!("{:.10}", a.cost)).unwrap_or_default();
            let (u, u1) = e
                .snapshot
                .as_ref()
                .map(|s| (format!("{:.10}", s.uniformity), format!("{:.10}", s.nearest_uniformity)))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{:.12},{},{},{},{}\n",
                e.epoch,
                e.mean_loss,
                u8::from(e.targeted),
                cost,
                u,
                u1
            ));
        }
        out
    }
}

fn full_pass_centers(net: &Mlp, dataset: &LongTailDataset) -> Result<BTreeMap<usize, Vec<f64>>> {
    let features = net.forward(&dataset.train.inputs)?;
    let centers = batch_class_centers(&features, &dataset.train.labels)?;
    if let Some(c) = (0..dataset.num_classes()).find(|c| !centers.contains_key(c)) {
        return Err(Error::NotReady(format!(
            "class {c} has no center at the end of warm-up; lengthen the warm-up"
        )));
    }
    Ok(centers)
}

fn snapshot(net: &Mlp, dataset: &LongTailDataset) -> Result<Snapshot> {
    let features = net.forward(&dataset.train.inputs)?;
    let centers = metrics::class_centers(&features, &dataset.train.labels, dataset.num_classes())?;
    Ok(Snapshot {
        uniformity: metrics::uniformity(&centers)?,
        nearest_uniformity: metrics::neighborhood_uniformity(&centers, 1)?,
    })
}

/// Stage one: trains the encoder and records per-epoch statistics.
pub fn train_representation(
    dataset: &LongTailDataset,
    config: &TrainConfig,
    targets: Option<&TargetSet>,
) -> Result<(Mlp, RunRecord)> {
    config.validate()?;
    let c = dataset.num_classes();
    match (config.method.uses_targets(), targets) {
        (true, None) => {
            return Err(Error::Contract(format!(
                "method {} needs a target set",
                config.method.name()
            )))
        }
        (false, Some(_)) => {
            return Err(Error::Contract("method kcl takes no target set".into()));
        }
        (true, Some(ts)) => {
            if ts.num_classes() != c || ts.dim() != config.output_dim {
                return Err(Error::validation(format!(
                    "targets are {}×{} but the run needs {c}×{}",
                    ts.num_classes(),
                    ts.dim(),
                    config.output_dim
                )));
            }
        }
        (false, None) => {}
    }

    let mut widths = vec![dataset.input_dim()];
    widths.extend(&config.hidden);
    widths.push(config.output_dim);
    let mut net = Mlp::new(&widths, config.seed)?;
    let mut params = net.params();
    let mut opt = Sgd::new(params.len(), config.momentum);

    let n = dataset.train.len();
    let steps_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let warmup = config.warmup_epochs();
    let augment = if config.augment_noise > 0.0 {
        Some(Normal::new(0.0, config.augment_noise).map_err(|e| Error::validation(e.to_string()))?)
    } else {
        None
    };

    // Drawn up front so the permutation is fixed for the whole run.
    let random_sigma: Vec<usize> = {
        let mut s: Vec<usize> = (0..c).collect();
        s.shuffle(&mut seed::rng(config.seed, &[stream::RANDOM_ASSIGN]));
        s
    };

    let mut tracker = CenterTracker::new(c, config.output_dim);
    if !config.renormalize_centers {
        tracker = tracker.without_renormalization();
    }
    let mut current: Option<Assignment> = None;
    let mut record = RunRecord {
        method: config.method,
        warmup_epochs: warmup,
        epochs: Vec::with_capacity(config.epochs),
        evaluation: None,
    };

    let mut order: Vec<usize> = (0..n).collect();
    let mut global_step = 0usize;
    for epoch in 0..config.epochs {
        let targeted = config.method.uses_targets() && epoch >= warmup;
        if targeted && current.is_none() {
            let ts = targets.expect("checked above");
            tracker.reset_from(&full_pass_centers(&net, dataset)?);
            current = Some(match config.method {
                Method::Tsc => assign_targets(&tracker, ts)?,
                _ => fixed_assignment(&tracker, ts, &random_sigma),
            });
        }

        order.sort_unstable();
        order.shuffle(&mut seed::rng(config.seed, &[stream::SHUFFLE, epoch as u64]));
        let mut loss_sum = 0.0;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut aug_rng = seed::rng(config.seed, &[stream::AUGMENT, epoch as u64, step as u64]);
            let mut view = |x: &Vec<f64>| -> Vec<f64> {
                match &augment {
                    Some(dist) => x.iter().map(|v| v + dist.sample(&mut aug_rng)).collect(),
                    None => x.clone(),
                }
            };
            let first: Vec<Vec<f64>> = chunk.iter().map(|&i| view(&dataset.train.inputs[i])).collect();
            let second: Vec<Vec<f64>> = chunk.iter().map(|&i| view(&dataset.train.inputs[i])).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| dataset.train.labels[i]).collect();
            let ids: Vec<u64> = chunk.iter().map(|&i| i as u64).collect();

            let cache_first = net.forward_cached(&first)?;
            let cache_second = net.forward_cached(&second)?;
            let batch = FeatureBatch::with_ids(
                cache_first.features.clone(),
                cache_second.features.clone(),
                labels,
                ids,
            )?;
            let loss_cfg = LossConfig {
                positive_sampling_seed: seed::derive(
                    config.seed,
                    &[stream::POSITIVES, epoch as u64, step as u64],
                ),
                ..config.loss.clone()
            };
            let out = match (&current, targeted) {
                (Some(a), true) => tsc_loss(&batch, targets.expect("checked above"), a, &loss_cfg)?,
                _ => kcl_loss(&batch, &loss_cfg, None)?,
            };
            if !out.loss.is_finite() {
                return Err(Error::Optimization {
                    iteration: global_step,
                    detail: format!("loss became {}", out.loss),
                });
            }
            loss_sum += out.loss;

            let mut grad = net.backward(&cache_first, &out.grad_features)?;
            let grad_second = net.backward(&cache_second, &out.grad_augmented)?;
            grad.iter_mut().zip(&grad_second).for_each(|(a, b)| *a += b);
            clip_norm(&mut grad, config.grad_clip);
            opt.step(&mut params, &grad, cosine_lr(config.learning_rate, global_step, total_steps));
            net.set_params(&params)?;
            global_step += 1;

            if targeted {
                let ts = targets.expect("checked above");
                tracker.update(&batch_class_centers(&batch.features, &batch.labels)?)?;
                current = Some(match config.method {
                    Method::Tsc => assign_targets(&tracker, ts)?,
                    _ => fixed_assignment(&tracker, ts, &random_sigma),
                });
            }
        }

        let snap = if config.log_interval > 0
            && ((epoch + 1) % config.log_interval == 0 || epoch + 1 == config.epochs)
        {
            Some(snapshot(&net, dataset)?)
        } else {
            None
        };
        record.epochs.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / steps_per_epoch as f64,
            targeted,
            assignment: if targeted { current.clone() } else { None },
            snapshot: snap,
        });
    }
    Ok((net, record))
}

fn clip_norm(grad: &mut [f64], cap: f64) {
    if cap <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > cap {
        let scale = cap / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
}

fn fixed_assignment(tracker: &CenterTracker, ts: &TargetSet, sigma: &[usize]) -> Assignment {
    let centers: Vec<Vec<f64>> = (0..tracker.num_classes())
        .map(|i| tracker.center(i).expect("tracker is initialized").to_vec())
        .collect();
    Assignment {
        cost: assignment::assignment_cost(&centers, ts, sigma),
        sigma: sigma.to_vec(),
    }
}

/// Stage two: fits a class-balanced linear classifier on training features
/// and evaluates accuracy and metrics on the balanced test split.
pub fn evaluate(
    encoder: &Mlp,
    dataset: &LongTailDataset,
    metrics_k: usize,
    classifier: &ClassifierConfig,
) -> Result<Evaluation> {
    let c = dataset.num_classes();
    let train_features = encoder.forward(&dataset.train.inputs)?;
    let clf = train_classifier(&train_features, &dataset.train.labels, c, classifier)?;
    let test_features = encoder.forward(&dataset.test.inputs)?;
    let predictions = clf.classify(&test_features);
    let groups = datagen::frequency_groups(&dataset.counts);
    let report = MetricsReport::compute(
        &test_features,
        &dataset.test.labels,
        &dataset.hierarchy,
        &groups,
        metrics_k,
        Some(&predictions),
    )?;
    Ok(Evaluation {
        report,
        accuracy: accuracy(&predictions, &dataset.test.labels),
        test_features,
        test_labels: dataset.test.labels.clone(),
    })
}

/// Everything needed to reproduce one run: data, targets, training and evaluation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub counts: Vec<usize>,
    pub input_dim: usize,
    pub noise: f64,
    pub spread: f64,
    pub test_per_class: usize,
    pub branching: usize,
    pub data_seed: u64,
    pub train: TrainConfig,
    pub target_iterations: usize,
    pub metrics_k: Option<usize>,
    pub classifier: ClassifierConfig,
}

/// Output of [`Experiment::run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dataset: LongTailDataset,
    pub targets: Option<TargetSet>,
    pub encoder: Mlp,
    pub record: RunRecord,
}

impl RunOutput {
    pub fn evaluation(&self) -> &Evaluation {
        self.record.evaluation.as_ref().expect("run() always evaluates")
    }
}

impl Experiment {
    /// Ten classes, exponential imbalance, the protocol sized for quick desk runs.
    /// The default toy protocol: C = 10, n_max = 500, 16-d inputs, 200 epochs, batch 128.
    pub fn default_protocol(rho: f64, output_dim: usize, seed: u64) -> Result<Self> {
        Ok(Self::preset(datagen::longtail_counts(500, rho, 10)?, 0.15, 50, output_dim, 200, seed))
    }

    /// Three classes with a 100:1:1 split in a 2-d feature space.
    pub fn three_class_toy(method: Method, seed: u64) -> Self {
        let mut exp = Self::preset(vec![400, 4, 4], 0.1, 100, 2, 200, seed);
        exp.train.method = method;
        exp.target_iterations = 2_000;
        exp.metrics_k = Some(1);
        exp
    }

    /// Eight classes on a binary hierarchy, ρ = 10, 2-d features.
    pub fn hierarchical_toy(method: Method, seed: u64) -> Result<Self> {
        let mut exp = Self::preset(datagen::longtail_counts(200, 10.0, 8)?, 0.1, 50, 2, 200, seed);
        exp.train.method = method;
        exp.target_iterations = 2_000;
        exp.metrics_k = Some(1);
        Ok(exp)
    }

    fn preset(
        counts: Vec<usize>,
        noise: f64,
        test_per_class: usize,
        output_dim: usize,
        epochs: usize,
        seed: u64,
    ) -> Self {
        Self {
            counts,
            input_dim: 16,
            noise,
            spread: 1.0,
            test_per_class,
            branching: 2,
            data_seed: seed,
            train: TrainConfig {
                epochs,
                output_dim,
                // Augmentation at a tenth of the cluster noise.
                augment_noise: 0.1 * noise,
                seed,
                ..TrainConfig::default()
            },
            target_iterations: 10_000,
            metrics_k: None,
            classifier: ClassifierConfig {
                seed,
                ..ClassifierConfig::default()
            },
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn dataset(&self) -> Result<LongTailDataset> {
        let hierarchy = generate_hierarchy(self.num_classes(), self.branching, self.data_seed)?;
        generate_dataset(
            &DatasetConfig {
                input_dim: self.input_dim,
                counts: self.counts.clone(),
                noise: self.noise,
                spread: self.spread,
                test_per_class: self.test_per_class,
                seed: self.data_seed,
            },
            &hierarchy,
        )
    }

    pub fn targets(&self) -> Result<Option<TargetSet>> {
        if !self.train.method.uses_targets() {
            return Ok(None);
        }
        generate_targets(
            self.num_classes(),
            self.train.output_dim,
            &TargetGenConfig {
                iterations: self.target_iterations,
                seed: self.train.seed,
                temperature: self.train.loss.temperature,
                ..TargetGenConfig::default()
            },
        )
        .map(Some)
    }

    pub fn metrics_k(&self) -> usize {
        self.metrics_k.unwrap_or_else(|| metrics::default_k(self.num_classes()))
    }

    /// Generates data and targets, trains, and evaluates.
    pub fn run(&self) -> Result<RunOutput> {
        let dataset = self.dataset()?;
        let targets = self.targets()?;
        let (encoder, mut record) = train_representation(&dataset, &self.train, targets.as_ref())?;
        record.evaluation = Some(evaluate(&encoder, &dataset, self.metrics_k(), &self.classifier)?);
        Ok(RunOutput {
            dataset,
            targets,
            encoder,
            record,
        })
    }
}

/// Writes features of a 2-d run as `x y label` lines.
pub fn scatter_lines(features: &[Vec<f64>], labels: &[usize]) -> Result<String> {
    let mut out = String::new();
    for (f, y) in features.iter().zip(labels) {
        if f.len() != 2 {
            return Err(Error::validation(format!(
                "scatter data needs 2-d features, got {}-d",
                f.len()
            )));
        }
        out.push_str(&format!("{:.10} {:.10} {y}\n", f[0], f[1]));
    }
    Ok(out)
}

/// Re-exported so callers can build classifier settings without importing `encoder`.
pub use encoder::Sampling;

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(method: Method) -> Experiment {
        let mut e = Experiment::three_class_toy(method, 1);
        e.counts = vec![40, 4, 4];
        e.train.epochs = 4;
        e.train.batch_size = 16;
        e.target_iterations = 200;
        e.test_per_class = 10;
        e
    }

    #[test]
    fn kcl_records_no_assignment() {
        let out = tiny(Method::Kcl).run().unwrap();
        assert_eq!(out.record.epochs.len(), 4);
        assert!(out.record.assignment_costs().is_empty());
        assert!(out.targets.is_none());
    }

    #[test]
    fn warmup_boundary_is_respected() {
        let out = tiny(Method::Tsc).run().unwrap();
        let targeted: Vec<bool> = out.record.epochs.iter().map(|e| e.targeted).collect();
        assert_eq!(targeted, vec![false, false, true, true]);
        assert!(out.record.epochs[..2].iter().all(|e| e.assignment.is_none()));
        assert_eq!(out.record.assignment_costs().len(), 2);
    }

    #[test]
    fn full_warmup_matches_kcl() {
        let mut tsc = tiny(Method::Tsc);
        tsc.train.warmup_fraction = 1.0;
        let kcl = tiny(Method::Kcl);
        let a = tsc.run().unwrap();
        let b = kcl.run().unwrap();
        assert_eq!(a.encoder.params(), b.encoder.params());
    }

    #[test]
    fn random_assignment_never_changes() {
        let out = tiny(Method::TscRandomAssign).run().unwrap();
        let sigmas: Vec<&Vec<usize>> = out
            .record
            .epochs
            .iter()
            .filter_map(|e| e.assignment.as_ref().map(|a| &a.sigma))
            .collect();
        assert!(sigmas.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn runs_are_reproducible() {
        let a = tiny(Method::Tsc).run().unwrap();
        let b = tiny(Method::Tsc).run().unwrap();
        assert_eq!(a.record, b.record);
        assert_eq!(a.encoder, b.encoder);
    }

    #[test]
    fn method_target_contract() {
        let e = tiny(Method::Tsc);
        let ds = e.dataset().unwrap();
        assert!(matches!(
            train_representation(&ds, &e.train, None),
            Err(Error::Contract(_))
        ));
        let bad = TrainConfig {
            warmup_fraction: 1.5,
            ..e.train.clone()
        };
        assert!(matches!(
            train_representation(&ds, &bad, None),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn perfectly_separated_features_are_classified_exactly() {
        // Identity encoder on prototypes that are already well separated.
        let e = tiny(Method::Kcl);
        let mut ds = e.dataset().unwrap();
        let protos = [vec![1.0, 0.0], vec![-0.5, 0.8], vec![-0.5, -0.8]];
        for s in [&mut ds.train, &mut ds.test] {
            for (x, &y) in s.inputs.iter_mut().zip(&s.labels) {
                *x = crate::sphere::normalized(&protos[y]).unwrap();
            }
        }
        let id = Mlp::from_layers(&[2, 2], vec![(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0])], 0).unwrap();
        let ev = evaluate(&id, &ds, 1, &ClassifierConfig::default()).unwrap();
        assert_eq!(ev.accuracy, 1.0);
    }
}
