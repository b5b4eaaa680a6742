//! k-positive supervised contrastive loss and its targeted extension.
//!
//! Anchors are the first views `v_i`. For anchor `i` the candidate set is
//!
//! ```text
//! D_i = {ṽ_i} ∪ {v_j : j ≠ i} [∪ U]
//! ```
//!
//! where `U` (the class targets) is included when targets act as negatives.
//! The positive set is `P_i = {ṽ_i} ∪ S_i` with `S_i` at most `k` same-class
//! features drawn without replacement. With `LSE_i = log Σ_{x∈D_i} exp(v_iᵀx/τ)`:
//!
//! ```text
//! loss = −(1/N) Σ_i [ (1/m_i) Σ_{p∈P_i} (v_iᵀp/τ − LSE_i) + λ (v_iᵀc*_i/τ − LSE_i) ]
//! ```
//!
//! with `c*_i` the target assigned to the anchor's class and `m_i` the
//! positive-set divisor (see [`PositiveDivisor`]). Gradients are returned for
//! every `v_i` and `ṽ_i`; targets are constants.

use rand::seq::index;

use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::seed;
use crate::sphere;
use crate::targets::{log_sum_exp, TargetSet};

/// A batch of unit features, their augmented views, labels and stable sample ids.
///
/// Sample ids key the positive-sampling streams, so the draw for a sample does
/// not depend on its position in the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub features: Vec<Vec<f64>>,
    pub augmented: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub ids: Vec<u64>,
}

impl FeatureBatch {
    /// Builds a batch whose sample ids are the positions `0..N`.
    pub fn new(features: Vec<Vec<f64>>, augmented: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let ids = (0..features.len() as u64).collect();
        Self::with_ids(features, augmented, labels, ids)
    }

    pub fn with_ids(
        features: Vec<Vec<f64>>,
        augmented: Vec<Vec<f64>>,
        labels: Vec<usize>,
        ids: Vec<u64>,
    ) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::validation("a feature batch needs at least one sample"));
        }
        if augmented.len() != n || labels.len() != n || ids.len() != n {
            return Err(Error::validation(format!(
                "batch parts disagree in length: {n} features, {} augmented, {} labels, {} ids",
                augmented.len(),
                labels.len(),
                ids.len()
            )));
        }
        let d = features[0].len();
        sphere::check_unit_rows(&features, d, "feature")?;
        sphere::check_unit_rows(&augmented, d, "augmented feature")?;
        Ok(Self {
            features,
            augmented,
            labels,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }
}

/// How the first term is normalized when an anchor has fewer than `k` positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveDivisor {
    /// Divide by the actual positive-set size `|P_i|`.
    ActualSize,
    /// Always divide by `k + 1`, so anchors with few positives are down-weighted.
    KPlusOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Sampled positives per anchor (besides the anchor's own augmented view).
    pub k: usize,
    /// Weight of the target term.
    pub lambda: f64,
    pub temperature: f64,
    pub positive_sampling_seed: u64,
    pub divisor: PositiveDivisor,
    /// Whether the targets join every denominator in [`tsc_loss`].
    pub targets_in_denominator: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            k: 6,
            lambda: 0.2,
            temperature: 0.07,
            positive_sampling_seed: 0,
            divisor: PositiveDivisor::ActualSize,
            targets_in_denominator: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::validation(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::validation(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Loss value with gradients for every feature and augmented feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad_features: Vec<Vec<f64>>,
    pub grad_augmented: Vec<Vec<f64>>,
}

/// Draws up to `k` same-class positives for `anchor`, uniformly without replacement.
///
/// The anchor itself is never drawn. When the class has at most `k` other
/// members in the batch, all of them are returned. Indices come back ordered
/// by sample id.
pub fn sample_positives(batch: &FeatureBatch, anchor: usize, k: usize, seed: u64) -> Vec<usize> {
    let label = batch.labels[anchor];
    let mut pool: Vec<usize> = (0..batch.len())
        .filter(|&j| j != anchor && batch.labels[j] == label)
        .collect();
    pool.sort_by_key(|&j| batch.ids[j]);
    if pool.len() <= k {
        return pool;
    }
    let mut rng = seed::rng(seed, &[seed::stream::POSITIVES, batch.ids[anchor]]);
    let mut picked: Vec<usize> = index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|p| pool[p])
        .collect();
    picked.sort_by_key(|&j| batch.ids[j]);
    picked
}

/// The k-positive contrastive loss, optionally with the targets as extra negatives.
pub fn kcl_loss(
    batch: &FeatureBatch,
    cfg: &LossConfig,
    extra_negatives: Option<&TargetSet>,
) -> Result<LossOutput> {
    cfg.validate()?;
    if let Some(ts) = extra_negatives {
        check_target_dim(batch, ts)?;
    }
    Ok(contrastive(batch, cfg, extra_negatives, None))
}

/// The targeted supervised contrastive loss.
///
/// Every class present in the batch must be covered by `assignment`.
pub fn tsc_loss(
    batch: &FeatureBatch,
    targets: &TargetSet,
    assignment: &Assignment,
    cfg: &LossConfig,
) -> Result<LossOutput> {
    cfg.validate()?;
    check_target_dim(batch, targets)?;
    if assignment.sigma.len() != targets.num_classes() {
        return Err(Error::Contract(format!(
            "assignment covers {} classes but there are {} targets",
            assignment.sigma.len(),
            targets.num_classes()
        )));
    }
    let mut assigned = Vec::with_capacity(batch.len());
    for &y in &batch.labels {
        let t = assignment
            .target_of(y)
            .filter(|&t| t < targets.num_classes())
            .ok_or_else(|| Error::Contract(format!("class {y} has no assigned target")))?;
        assigned.push(targets.get(t));
    }
    let negatives = cfg.targets_in_denominator.then_some(targets);
    let pull = (cfg.lambda != 0.0).then_some(assigned.as_slice());
    Ok(contrastive(batch, cfg, negatives, pull))
}

fn check_target_dim(batch: &FeatureBatch, ts: &TargetSet) -> Result<()> {
    if ts.dim() != batch.dim() {
        return Err(Error::validation(format!(
            "targets have dimension {} but features have {}",
            ts.dim(),
            batch.dim()
        )));
    }
    Ok(())
}

/// Shared implementation. `pull[i]` is the assigned target of anchor `i`.
fn contrastive(
    batch: &FeatureBatch,
    cfg: &LossConfig,
    negatives: Option<&TargetSet>,
    pull: Option<&[&[f64]]>,
) -> LossOutput {
    let n = batch.len();
    let d = batch.dim();
    let tau = cfg.temperature;
    let num_targets = negatives.map_or(0, TargetSet::num_classes);
    let inv_n = 1.0 / n as f64;

    let mut grad_v = vec![vec![0.0; d]; n];
    let mut grad_a = vec![vec![0.0; d]; n];
    let mut total = 0.0;

    // Candidate layout: [ṽ_i, v_0..v_{n-1} (v_i skipped), targets...]
    let mut logits = Vec::with_capacity(n + num_targets);
    for i in 0..n {
        let v = &batch.features[i];
        logits.clear();
        logits.push(sphere::dot(v, &batch.augmented[i]) / tau);
        for (j, x) in batch.features.iter().enumerate() {
            if j != i {
                logits.push(sphere::dot(v, x) / tau);
            }
        }
        if let Some(ts) = negatives {
            logits.extend(ts.points().iter().map(|t| sphere::dot(v, t) / tau));
        }
        let lse = log_sum_exp(&logits);

        let positives = sample_positives(batch, i, cfg.k, cfg.positive_sampling_seed);
        let set_size = positives.len() + 1;
        let divisor = match cfg.divisor {
            PositiveDivisor::ActualSize => set_size as f64,
            PositiveDivisor::KPlusOne => (cfg.k + 1) as f64,
        };
        let pos_w = 1.0 / divisor;
        let lambda = if pull.is_some() { cfg.lambda } else { 0.0 };

        // Objective for this anchor (before the −1/N factor).
        let mut objective = pos_w * (logits[0] - lse);
        for &j in &positives {
            let s = sphere::dot(v, &batch.features[j]) / tau;
            objective += pos_w * (s - lse);
        }
        let target = pull.map(|p| p[i]);
        if let Some(c) = target {
            objective += lambda * (sphere::dot(v, c) / tau - lse);
        }
        total += objective;

        // ∂(−objective/N)/∂x for every vector x touching anchor i.
        let lse_w = set_size as f64 * pos_w + lambda;
        let scale = inv_n / tau;
        let add = |g: &mut [f64], x: &[f64], w: f64| {
            g.iter_mut().zip(x).for_each(|(gk, xk)| *gk += w * xk);
        };

        // Softmax weights over candidates, pulled back into v_i and each candidate.
        let mut idx = 0;
        let p_aug = (logits[idx] - lse).exp();
        add(&mut grad_v[i], &batch.augmented[i], scale * lse_w * p_aug);
        add(&mut grad_a[i], v, scale * (lse_w * p_aug - pos_w));
        idx += 1;
        for j in 0..n {
            if j == i {
                continue;
            }
            let p = (logits[idx] - lse).exp();
            idx += 1;
            add(&mut grad_v[i], &batch.features[j], scale * lse_w * p);
            add(&mut grad_v[j], v, scale * lse_w * p);
        }
        if let Some(ts) = negatives {
            for t in ts.points() {
                let p = (logits[idx] - lse).exp();
                idx += 1;
                add(&mut grad_v[i], t, scale * lse_w * p);
            }
        }
        // Numerator terms.
        add(&mut grad_v[i], &batch.augmented[i], -scale * pos_w);
        for &j in &positives {
            add(&mut grad_v[i], &batch.features[j], -scale * pos_w);
            add(&mut grad_v[j], v, -scale * pos_w);
        }
        if let Some(c) = target {
            add(&mut grad_v[i], c, -scale * lambda);
        }
    }

    LossOutput {
        loss: -total * inv_n,
        grad_features: grad_v,
        grad_augmented: grad_a,
    }
}
