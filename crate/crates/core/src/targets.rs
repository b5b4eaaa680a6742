//! Class targets: maximally uniform points on the unit hypersphere.
//!
//! Targets minimize the log-sum-exp uniformity energy
//!
//! ```text
//! L(t) = (1/C) Σ_i log Σ_j exp(t_iᵀ t_j / τ)
//! ```
//!
//! where the inner sum runs over every `j`, including `j = i`. The self term is
//! a constant `exp(1/τ)` inside each logarithm; it leaves the minimizer alone
//! but dominates the reported value (`≈ 1/τ` for small `τ`).
//!
//! For `C ≤ d + 1` the minimizer is a regular simplex, with all pairwise inner
//! products equal to `−1/(C−1)` and the points summing to zero.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed;
use crate::sphere;

pub const DEFAULT_TEMPERATURE: f64 = 0.07;

/// Settings for [`generate_targets`].
///
/// The optimizer is Riemannian gradient descent with a normalized step: each
/// iteration moves the point with the largest tangential gradient by exactly
/// the current step length, and the step length follows a cosine decay from
/// `learning_rate` to zero. Every step is followed by re-projection onto the
/// sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetGenConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
    pub temperature: f64,
}

impl Default for TargetGenConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            iterations: 10_000,
            seed: 0,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl TargetGenConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::validation(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be at least 1"));
        }
        check_temperature(self.temperature)
    }
}

/// A fixed set of `C` unit-norm class targets in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    points: Vec<Vec<f64>>,
    temperature: f64,
    final_energy: f64,
    seed: u64,
}

impl TargetSet {
    /// Wraps caller-supplied points, validating them and computing their energy.
    pub fn from_points(points: Vec<Vec<f64>>, temperature: f64, seed: u64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::validation("a target set needs at least 2 points"));
        }
        let d = points[0].len();
        if d < 2 {
            return Err(Error::validation("targets need dimension at least 2"));
        }
        sphere::check_unit_rows(&points, d, "target")?;
        let final_energy = uniformity_energy(&points, temperature)?;
        Ok(Self {
            points,
            temperature,
            final_energy,
            seed,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn get(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    pub fn num_classes(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn final_energy(&self) -> f64 {
        self.final_energy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Writes the flat text table: one header line, then one row per target.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "C={} d={} tau={:e} seed={} energy={:.17e}",
            self.num_classes(),
            self.dim(),
            self.temperature,
            self.seed,
            self.final_energy
        )?;
        let mut line = String::new();
        for p in &self.points {
            line.clear();
            for (k, x) in p.iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                write!(line, "{x:.17e}").expect("write to String");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parses the format produced by [`TargetSet::write_to`].
    ///
    /// The stored energy is checked against a recomputation of the loaded points.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty target file"))?;
        let header = header?;
        let fields = parse_header(&header, 1, &["C", "d", "tau", "seed", "energy"])?;
        let c = parse_num::<usize>(&fields[0], 1)?;
        let d = parse_num::<usize>(&fields[1], 1)?;
        let tau = parse_num::<f64>(&fields[2], 1)?;
        let seed = parse_num::<u64>(&fields[3], 1)?;
        let energy = parse_num::<f64>(&fields[4], 1)?;

        let mut points = Vec::with_capacity(c);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| parse_num::<f64>(tok, idx + 1))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != d {
                return Err(Error::parse(
                    idx + 1,
                    format!("expected {d} fields, found {}", row.len()),
                ));
            }
            points.push(row);
        }
        if points.len() != c {
            return Err(Error::parse(
                points.len() + 1,
                format!("header declares {c} targets, found {}", points.len()),
            ));
        }
        let ts = Self::from_points(points, tau, seed)?;
        if (ts.final_energy - energy).abs() > 1e-9 * energy.abs().max(1.0) {
            return Err(Error::parse(
                1,
                format!(
                    "stored energy {energy} does not match recomputed {}",
                    ts.final_energy
                ),
            ));
        }
        Ok(ts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Parses `key=value` tokens in a fixed order.
pub(crate) fn parse_header(line: &str, line_no: usize, keys: &[&str]) -> Result<Vec<String>> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != keys.len() {
        return Err(Error::parse(
            line_no,
            format!("expected header fields {keys:?}, found `{line}`"),
        ));
    }
    tokens
        .iter()
        .zip(keys)
        .map(|(tok, key)| {
            tok.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| Error::parse(line_no, format!("expected `{key}=...`, found `{tok}`")))
        })
        .collect()
}

pub(crate) fn parse_num<T: std::str::FromStr>(tok: &str, line_no: usize) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| Error::parse(line_no, format!("cannot parse `{tok}`")))
}

fn check_temperature(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::validation(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    Ok(())
}

/// The uniformity energy of a set of unit vectors.
pub fn uniformity_energy(points: &[Vec<f64>], tau: f64) -> Result<f64> {
    check_temperature(tau)?;
    if points.is_empty() {
        return Err(Error::validation("uniformity energy of an empty point set"));
    }
    let d = points[0].len();
    sphere::check_unit_rows(points, d, "point")?;
    Ok(energy_unchecked(points, tau))
}

fn energy_unchecked(points: &[Vec<f64>], tau: f64) -> f64 {
    let c = points.len();
    let mut total = 0.0;
    let mut logits = vec![0.0; c];
    for a in points {
        for (l, b) in logits.iter_mut().zip(points) {
            *l = sphere::dot(a, b) / tau;
        }
        total += log_sum_exp(&logits);
    }
    total / c as f64
}

/// Gradient of the uniformity energy with respect to the raw (ambient) coordinates.
///
/// `∂L/∂t_i = (1/(Cτ)) Σ_j (P_ij + P_ji) t_j`, with `P` the row-wise softmax of
/// the scaled Gram matrix. No unit-norm check is performed, so the result can be
/// compared against finite differences of the same formula off the sphere.
pub fn energy_gradient(points: &[Vec<f64>], tau: f64) -> Vec<Vec<f64>> {
    let c = points.len();
    let d = points.first().map_or(0, Vec::len);
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let mut ws = Workspace::new(c, d);
    ws.energy_and_gradient(&flat, tau);
    ws.grad.chunks(d).map(<[f64]>::to_vec).collect()
}

/// Energy of the regular simplex with `c` vertices (reachable when `c ≤ d + 1`).
pub fn simplex_energy(c: usize, tau: f64) -> f64 {
    assert!(c >= 2, "simplex energy needs at least 2 vertices");
    let m = (c - 1) as f64;
    let off = -1.0 / (m * tau);
    let self_term = 1.0 / tau;
    self_term + (m * (off - self_term).exp()).ln_1p()
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Scratch buffers for the optimizer; `points` are stored flat, row-major.
struct Workspace {
    c: usize,
    d: usize,
    probs: Vec<f64>,
    grad: Vec<f64>,
}

impl Workspace {
    fn new(c: usize, d: usize) -> Self {
        Self {
            c,
            d,
            probs: vec![0.0; c * c],
            grad: vec![0.0; c * d],
        }
    }

    /// Fills `probs` (row softmax) and `grad`; returns the energy.
    fn energy_and_gradient(&mut self, points: &[f64], tau: f64) -> f64 {
        let (c, d) = (self.c, self.d);
        let row = |i: usize| &points[i * d..(i + 1) * d];
        for i in 0..c {
            for j in i..c {
                let s = sphere::dot(row(i), row(j)) / tau;
                self.probs[i * c + j] = s;
                self.probs[j * c + i] = s;
            }
        }
        let mut energy = 0.0;
        for i in 0..c {
            let r = &mut self.probs[i * c..(i + 1) * c];
            let lse = log_sum_exp(r);
            energy += lse;
            r.iter_mut().for_each(|s| *s = (*s - lse).exp());
        }
        energy /= c as f64;

        let scale = 1.0 / (c as f64 * tau);
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..c {
            let gi = &mut self.grad[i * d..(i + 1) * d];
            for j in 0..c {
                let w = (self.probs[i * c + j] + self.probs[j * c + i]) * scale;
                for (g, t) in gi.iter_mut().zip(&points[j * d..(j + 1) * d]) {
                    *g += w * t;
                }
            }
        }
        energy
    }
}

/// Computes `c` targets in `d` dimensions by projected gradient descent on the
/// uniformity energy.
pub fn generate_targets(c: usize, d: usize, config: &TargetGenConfig) -> Result<TargetSet> {
    if c < 2 {
        return Err(Error::validation(format!("need at least 2 classes, got {c}")));
    }
    if d < 2 {
        return Err(Error::validation(format!("need dimension at least 2, got {d}")));
    }
    config.validate()?;
    let tau = config.temperature;

    let mut rng = seed::rng(config.seed, &[seed::stream::TARGETS]);
    let mut points: Vec<f64> = (0..c * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    for p in points.chunks_mut(d) {
        sphere::normalize_in_place(p)?;
    }
    separate_coincident(&mut points, d, &mut rng)?;

    let mut ws = Workspace::new(c, d);
    for it in 0..config.iterations {
        let energy = ws.energy_and_gradient(&points, tau);
        if !energy.is_finite() {
            return Err(Error::Optimization {
                iteration: it,
                detail: format!("energy became {energy}"),
            });
        }
        // Project each gradient onto the tangent space at its point.
        let mut max_norm = 0.0f64;
        for (g, t) in ws.grad.chunks_mut(d).zip(points.chunks(d)) {
            let radial = sphere::dot(g, t);
            g.iter_mut().zip(t).for_each(|(gk, tk)| *gk -= radial * tk);
            max_norm = max_norm.max(sphere::norm(g));
        }
        if !max_norm.is_finite() {
            return Err(Error::Optimization {
                iteration: it,
                detail: "gradient became non-finite".into(),
            });
        }
        if max_norm == 0.0 {
            break;
        }
        let progress = it as f64 / config.iterations as f64;
        let step = config.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        let scale = step / max_norm;
        for (t, g) in points.chunks_mut(d).zip(ws.grad.chunks(d)) {
            t.iter_mut().zip(g).for_each(|(tk, gk)| *tk -= scale * gk);
            sphere::normalize_in_place(t).map_err(|e| Error::Optimization {
                iteration: it,
                detail: e.to_string(),
            })?;
        }
    }

    let points: Vec<Vec<f64>> = points.chunks(d).map(<[f64]>::to_vec).collect();
    let final_energy = energy_unchecked(&points, tau);
    if !final_energy.is_finite() {
        return Err(Error::Optimization {
            iteration: config.iterations,
            detail: format!("final energy is {final_energy}"),
        });
    }
    Ok(TargetSet {
        points,
        temperature: tau,
        final_energy,
        seed: config.seed,
    })
}

/// Coincident points have zero gradient along their separation; nudge them apart.
fn separate_coincident(points: &mut [f64], d: usize, rng: &mut impl rand::Rng) -> Result<()> {
    let c = points.len() / d;
    for i in 0..c {
        for j in 0..i {
            let s = sphere::dot(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d]);
            if s > 1.0 - 1e-12 {
                let p = &mut points[i * d..(i + 1) * d];
                for x in p.iter_mut() {
                    let n: f64 = StandardNormal.sample(rng);
                    *x += 1e-6 * n;
                }
                sphere::normalize_in_place(p)?;
            }
        }
    }
    Ok(())
}

/// Outcome of [`certify_simplex`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexReport {
    /// False when `C > d + 1`, where no regular simplex fits.
    pub applicable: bool,
    pub certified: bool,
    /// `max_{i≠j} |t_iᵀt_j + 1/(C−1)|`.
    pub max_deviation: f64,
    /// `‖Σ_i t_i‖`.
    pub centroid_norm: f64,
}

/// Checks whether the targets form a regular simplex within `tol`.
///
/// Certified iff every off-diagonal inner product is within `tol` of
/// `−1/(C−1)` and `‖Σ t_i‖ ≤ C·tol`.
pub fn certify_simplex(ts: &TargetSet, tol: f64) -> SimplexReport {
    let c = ts.num_classes();
    let d = ts.dim();
    let delta = -1.0 / (c as f64 - 1.0);
    let mut max_deviation = 0.0f64;
    for i in 0..c {
        for j in (i + 1)..c {
            let dev = (sphere::dot(ts.get(i), ts.get(j)) - delta).abs();
            max_deviation = max_deviation.max(dev);
        }
    }
    let mut sum = vec![0.0; d];
    for p in ts.points() {
        sum.iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    let centroid_norm = sphere::norm(&sum);
    let applicable = c <= d + 1;
    SimplexReport {
        applicable,
        certified: applicable && max_deviation <= tol && centroid_norm <= c as f64 * tol,
        max_deviation,
        centroid_norm,
    }
}
