//! A small ReLU MLP producing unit-norm features, plus a linear classifier head.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed;
use crate::sphere;
use crate::targets::{parse_header, parse_num};

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out × n_in`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks(self.n_in)
                .zip(&self.bias)
                .map(|(row, b)| sphere::dot(row, x) + b),
        );
    }
}

/// Multilayer perceptron: ReLU on hidden layers, identity on the last layer,
/// followed by L2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    seed: u64,
}

/// Per-sample intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[l]` is the input to layer `l`; the last entry is the raw output.
    activations: Vec<Vec<Vec<f64>>>,
    /// Unit-norm outputs.
    pub features: Vec<Vec<f64>>,
}

impl Mlp {
    /// He-initialized network with the given layer widths (input first).
    pub fn new(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::validation("an MLP needs at least an input and an output width"));
        }
        if let Some(w) = widths.iter().find(|&&w| w == 0) {
            return Err(Error::validation(format!("layer width {w} is not allowed")));
        }
        let mut rng = seed::rng(seed, &[seed::stream::INIT]);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / n_in as f64).sqrt()).expect("valid std");
                Dense {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out).map(|_| normal.sample(&mut rng)).collect(),
                    bias: vec![0.0; n_out],
                }
            })
            .collect();
        Ok(Self { layers, seed })
    }

    /// Builds a network from explicit `(weights, bias)` pairs, weights row-major `out × in`.
    pub fn from_layers(widths: &[usize], params: Vec<(Vec<f64>, Vec<f64>)>, seed: u64) -> Result<Self> {
        if widths.len() < 2 || params.len() != widths.len() - 1 {
            return Err(Error::validation("layer widths and parameter blocks disagree"));
        }
        let layers = widths
            .windows(2)
            .zip(params)
            .map(|(w, (weights, bias))| {
                if weights.len() != w[0] * w[1] || bias.len() != w[1] {
                    return Err(Error::validation(format!(
                        "layer {}→{} has {} weights and {} biases",
                        w[0],
                        w[1],
                        weights.len(),
                        bias.len()
                    )));
                }
                Ok(Dense {
                    n_in: w[0],
                    n_out: w[1],
                    weights,
                    bias,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers, seed })
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_in)
            .chain(self.layers.iter().map(|l| l.n_out))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").n_out
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `Σ (w_in + 1) · w_out`.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| (l.n_in + 1) * l.n_out).sum()
    }

    /// All parameters, layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::validation(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    /// Unit-norm features for a batch of inputs.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_cached(inputs)?.features)
    }

    pub fn forward_cached(&self, inputs: &[Vec<f64>]) -> Result<ForwardCache> {
        let n_layers = self.layers.len();
        let mut activations: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(inputs.len()); n_layers + 1];
        let mut features = Vec::with_capacity(inputs.len());
        for (s, x) in inputs.iter().enumerate() {
            if x.len() != self.input_dim() {
                return Err(Error::validation(format!(
                    "input {s} has width {} (expected {})",
                    x.len(),
                    self.input_dim()
                )));
            }
            let mut cur = x.clone();
            for (l, layer) in self.layers.iter().enumerate() {
                let mut next = Vec::with_capacity(layer.n_out);
                layer.forward(&cur, &mut next);
                if l + 1 < n_layers {
                    next.iter_mut().for_each(|z| *z = z.max(0.0));
                }
                activations[l].push(cur);
                cur = next;
            }
            features.push(sphere::normalized(&cur).map_err(|_| {
                Error::Degenerate(format!("encoder output for input {s} is the zero vector"))
            })?);
            activations[n_layers].push(cur);
        }
        Ok(ForwardCache {
            activations,
            features,
        })
    }

    /// Parameter gradient given `∂L/∂features` (the unit-norm outputs).
    ///
    /// The normalization Jacobian is applied first, then the error is
    /// back-propagated through the layers. Layout matches [`Mlp::params`].
    pub fn backward(&self, cache: &ForwardCache, grad_features: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n_layers = self.layers.len();
        let raw = &cache.activations[n_layers];
        if grad_features.len() != raw.len() {
            return Err(Error::validation(format!(
                "{} upstream gradients for {} samples",
                grad_features.len(),
                raw.len()
            )));
        }
        // Offsets of each layer's block inside the flat gradient.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.weights.len() + l.bias.len();
        }
        let mut grad = vec![0.0; acc];

        for (s, g) in grad_features.iter().enumerate() {
            if g.len() != self.output_dim() {
                return Err(Error::validation("upstream gradient has the wrong width"));
            }
            let mut delta = sphere::normalize_backward(&raw[s], g);
            for l in (0..n_layers).rev() {
                let layer = &self.layers[l];
                let input = &cache.activations[l][s];
                let block = &mut grad[offsets[l]..offsets[l] + layer.weights.len() + layer.n_out];
                let (gw, gb) = block.split_at_mut(layer.weights.len());
                for (o, &dz) in delta.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    gb[o] += dz;
                    gw[o * layer.n_in..(o + 1) * layer.n_in]
                        .iter_mut()
                        .zip(input)
                        .for_each(|(gwk, xk)| *gwk += dz * xk);
                }
                if l == 0 {
                    break;
                }
                // Through the weights, then the ReLU of the previous layer.
                let mut prev = vec![0.0; layer.n_in];
                for (o, &dz) in delta.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    prev.iter_mut()
                        .zip(&layer.weights[o * layer.n_in..(o + 1) * layer.n_in])
                        .for_each(|(p, w)| *p += dz * w);
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok(grad)
    }

    /// Text checkpoint: `widths=a,b,c seed=S`, then per layer the weight rows
    /// followed by one bias line, all at 17 significant digits.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        let widths: Vec<String> = self.widths().iter().map(usize::to_string).collect();
        writeln!(out, "widths={} seed={}", widths.join(","), self.seed)?;
        let mut line = String::new();
        for l in &self.layers {
            for row in l.weights.chunks(l.n_in).chain(std::iter::once(&l.bias[..])) {
                line.clear();
                for (k, x) in row.iter().enumerate() {
                    if k > 0 {
                        line.push(' ');
                    }
                    write!(line, "{x:.16e}").expect("write to String");
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty checkpoint"))?;
        let fields = parse_header(&header?, 1, &["widths", "seed"])?;
        let widths = fields[0]
            .split(',')
            .map(|w| parse_num::<usize>(w, 1))
            .collect::<Result<Vec<_>>>()?;
        let seed = parse_num::<u64>(&fields[1], 1)?;
        if widths.len() < 2 {
            return Err(Error::parse(1, "need at least two widths"));
        }
        let mut next_row = |expected: usize| -> Result<Vec<f64>> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, "checkpoint ends early"))?;
            let row = line?
                .split_whitespace()
                .map(|t| parse_num::<f64>(t, n + 1))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != expected {
                return Err(Error::parse(
                    n + 1,
                    format!("expected {expected} values, found {}", row.len()),
                ));
            }
            Ok(row)
        };
        let mut params = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let mut weights = Vec::with_capacity(w[0] * w[1]);
            for _ in 0..w[1] {
                weights.extend(next_row(w[0])?);
            }
            let bias = next_row(w[1])?;
            params.push((weights, bias));
        }
        if let Some((n, _)) = lines.next() {
            return Err(Error::parse(n + 1, "trailing data after the last layer"));
        }
        Self::from_layers(&widths, params, seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_checkpoint(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// SGD with momentum; the learning rate is passed per step so callers can schedule it.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(num_params: usize, momentum: f64) -> Self {
        Self {
            momentum,
            velocity: vec![0.0; num_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v + g;
            *p -= lr * *v;
        }
    }
}

/// Cosine decay from `base` at step 0 to zero at `total`.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    let progress = (step as f64 / total as f64).min(1.0);
    base * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// How training rows are drawn when fitting the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Pick a class uniformly, then a sample uniformly within it.
    Balanced,
    /// Pick a sample uniformly.
    Instance,
}

/// Draws row indices under a [`Sampling`] scheme.
#[derive(Debug, Clone)]
pub struct Sampler {
    sampling: Sampling,
    by_class: Vec<Vec<usize>>,
    n: usize,
}

impl Sampler {
    pub fn new(labels: &[usize], num_classes: usize, sampling: Sampling) -> Result<Self> {
        let mut by_class = vec![Vec::new(); num_classes];
        for (i, &y) in labels.iter().enumerate() {
            by_class
                .get_mut(y)
                .ok_or_else(|| Error::validation(format!("label {y} is out of range")))?
                .push(i);
        }
        if labels.is_empty() {
            return Err(Error::validation("no training samples"));
        }
        if sampling == Sampling::Balanced {
            if let Some(c) = by_class.iter().position(Vec::is_empty) {
                return Err(Error::validation(format!(
                    "class {c} has no samples; balanced sampling is impossible"
                )));
            }
        }
        Ok(Self {
            sampling,
            by_class,
            n: labels.len(),
        })
    }

    pub fn draw(&self, rng: &mut impl Rng) -> usize {
        match self.sampling {
            Sampling::Instance => rng.random_range(0..self.n),
            Sampling::Balanced => {
                let members = &self.by_class[rng.random_range(0..self.by_class.len())];
                members[rng.random_range(0..members.len())]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub sampling: Sampling,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            batch_size: 64,
            learning_rate: 1.0,
            momentum: 0.9,
            sampling: Sampling::Balanced,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression on frozen features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    /// Row-major `C × d`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub dim: usize,
}

impl LinearClassifier {
    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.dim)
            .zip(&self.bias)
            .map(|(w, b)| sphere::dot(w, x) + b)
            .collect()
    }

    /// Arg-max class per feature; ties go to the lower class index.
    pub fn classify(&self, features: &[Vec<f64>]) -> Vec<usize> {
        features
            .iter()
            .map(|x| {
                self.logits(x)
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (c, &z)| {
                        if z > best.1 {
                            (c, z)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }
}

/// Fits a linear classifier with cross-entropy and mini-batch SGD.
pub fn train_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    cfg: &ClassifierConfig,
) -> Result<LinearClassifier> {
    if features.len() != labels.len() {
        return Err(Error::validation("features and labels differ in length"));
    }
    if num_classes < 2 {
        return Err(Error::validation("need at least two classes"));
    }
    let sampler = Sampler::new(labels, num_classes, cfg.sampling)?;
    let d = features[0].len();
    sphere::check_unit_rows(features, d, "feature")?;

    let mut clf = LinearClassifier {
        weights: vec![0.0; num_classes * d],
        bias: vec![0.0; num_classes],
        dim: d,
    };
    let n_params = clf.weights.len() + clf.bias.len();
    let mut opt = Sgd::new(n_params, cfg.momentum);
    let mut rng = seed::rng(cfg.seed, &[seed::stream::CLASSIFIER]);
    let mut params = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let inv_b = 1.0 / cfg.batch_size as f64;

    for step in 0..cfg.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for _ in 0..cfg.batch_size {
            let i = sampler.draw(&mut rng);
            let x = &features[i];
            let z = clf.logits(x);
            let lse = crate::targets::log_sum_exp(&z);
            for (c, zc) in z.iter().enumerate() {
                let p = (zc - lse).exp() - if c == labels[i] { 1.0 } else { 0.0 };
                grad[c * d..(c + 1) * d]
                    .iter_mut()
                    .zip(x)
                    .for_each(|(g, xk)| *g += p * xk * inv_b);
                grad[num_classes * d + c] += p * inv_b;
            }
        }
        params[..num_classes * d].copy_from_slice(&clf.weights);
        params[num_classes * d..].copy_from_slice(&clf.bias);
        opt.step(&mut params, &grad, cosine_lr(cfg.learning_rate, step, cfg.steps));
        clf.weights.copy_from_slice(&params[..num_classes * d]);
        clf.bias.copy_from_slice(&params[num_classes * d..]);
    }
    Ok(clf)
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_inputs(n: usize, d: usize, s: u64) -> Vec<Vec<f64>> {
        let mut rng = seed::rng(s, &[]);
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn parameter_count() {
        let net = Mlp::new(&[16, 64, 64, 128], 0).unwrap();
        assert_eq!(net.param_count(), 17 * 64 + 65 * 64 + 65 * 128);
        assert_eq!(net.params().len(), net.param_count());
    }

    #[test]
    fn zero_network_output_is_degenerate() {
        let net = Mlp::from_layers(&[3, 2], vec![(vec![0.0; 6], vec![0.0; 2])], 0).unwrap();
        assert!(matches!(net.forward(&[vec![1.0, 2.0, 3.0]]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn identity_layer_passes_unit_input() {
        let net = Mlp::from_layers(&[3, 3], vec![(vec![1., 0., 0., 0., 1., 0., 0., 0., 1.], vec![0.0; 3])], 0)
            .unwrap();
        let x = sphere::normalized(&[0.2, -0.4, 0.7]).unwrap();
        assert_eq!(net.forward(&[x.clone()]).unwrap()[0], x);
    }

    #[test]
    fn outputs_are_unit_norm() {
        let net = Mlp::new(&[5, 8, 3], 4).unwrap();
        for f in net.forward(&random_inputs(100, 5, 1)).unwrap() {
            assert!((sphere::norm(&f) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let net = Mlp::new(&[5, 8, 3], 4).unwrap();
        assert!(matches!(net.forward(&[vec![1.0; 4]]), Err(Error::Validation(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let net = Mlp::new(&[4, 6, 3], 2).unwrap();
        let cache = net.forward_cached(&random_inputs(5, 4, 3)).unwrap();
        let g = net.backward(&cache, &vec![vec![0.0; 3]; 5]).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_layer_linear_probe_matches_outer_product() {
        // Probe loss L = aᵀ f(x); for one layer, ∂L/∂W = δ xᵀ and ∂L/∂b = δ,
        // with δ the probe pulled back through the normalization.
        let net = Mlp::new(&[3, 2], 5).unwrap();
        let x = vec![0.5, -1.0, 2.0];
        let a = vec![0.3, -0.7];
        let cache = net.forward_cached(&[x.clone()]).unwrap();
        let g = net.backward(&cache, &[a.clone()]).unwrap();
        let params = net.params();
        let z = [
            sphere::dot(&params[0..3], &x) + params[6],
            sphere::dot(&params[3..6], &x) + params[7],
        ];
        let delta = sphere::normalize_backward(&z, &a);
        for o in 0..2 {
            for k in 0..3 {
                assert!((g[o * 3 + k] - delta[o] * x[k]).abs() < 1e-14);
            }
            assert!((g[6 + o] - delta[o]).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut net = Mlp::new(&[4, 7, 5, 3], 8).unwrap();
        let inputs = random_inputs(6, 4, 9);
        let probe = random_inputs(6, 3, 10);
        let loss = |net: &Mlp| -> f64 {
            net.forward(&inputs)
                .unwrap()
                .iter()
                .zip(&probe)
                .map(|(f, p)| sphere::dot(f, p))
                .sum()
        };
        let cache = net.forward_cached(&inputs).unwrap();
        let analytic = net.backward(&cache, &probe).unwrap();
        let base = net.params();
        let h = 1e-6;
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += h;
            net.set_params(&p).unwrap();
            let up = loss(&net);
            p[k] -= 2.0 * h;
            net.set_params(&p).unwrap();
            let down = loss(&net);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - analytic[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{k}: {fd} vs {}", analytic[k]);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let net = Mlp::new(&[4, 6, 2], 77).unwrap();
        let mut buf = Vec::new();
        net.write_checkpoint(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("widths=4,6,2 seed=77\n"));
        let back = Mlp::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        let truncated = &buf[..buf.len() / 2];
        assert!(Mlp::read_checkpoint(truncated).is_err());
    }

    #[test]
    fn separable_two_class_toy_is_fit_exactly() {
        let features: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let a = if i % 2 == 0 { 0.3 } else { 2.8 } + 0.01 * i as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let clf = train_classifier(&features, &labels, 2, &ClassifierConfig::default()).unwrap();
        assert_eq!(accuracy(&clf.classify(&features), &labels), 1.0);
    }

    #[test]
    fn balanced_sampler_is_uniform_over_classes() {
        let mut labels = vec![0usize; 1000];
        labels.extend(vec![1usize; 100]);
        labels.extend(vec![2usize; 10]);
        let sampler = Sampler::new(&labels, 3, Sampling::Balanced).unwrap();
        let mut rng = seed::rng(3, &[]);
        let mut counts = [0usize; 3];
        let draws = 10_000;
        for _ in 0..draws {
            counts[labels[sampler.draw(&mut rng)]] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn balanced_sampling_needs_every_class() {
        assert!(Sampler::new(&[0, 0, 2], 3, Sampling::Balanced).is_err());
        assert!(Sampler::new(&[0, 0, 2], 3, Sampling::Instance).is_ok());
    }

    #[test]
    fn classifier_beats_chance_on_random_features() {
        let net = Mlp::new(&[6, 16, 4], 1).unwrap();
        let features = net.forward(&random_inputs(60, 6, 2)).unwrap();
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let clf = train_classifier(&features, &labels, 3, &ClassifierConfig::default()).unwrap();
        assert!(accuracy(&clf.classify(&features), &labels) >= 1.0 / 3.0);
    }
}
