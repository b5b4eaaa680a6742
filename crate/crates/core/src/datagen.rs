//! Synthetic long-tailed data with a known class hierarchy.
//!
//! Class prototypes are produced by a random walk down a tree: each child is
//! its parent's prototype plus a perturbation whose magnitude halves per level,
//! so classes that share a deep ancestor are geometrically close. Samples are
//! noisy copies of their class prototype, projected back to the unit sphere.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::seed;
use crate::sphere;
use crate::targets::{parse_header, parse_num};

/// Per-class counts decaying exponentially from `n_max` to `n_max / rho`.
///
/// `n_i = round(n_max · rho^(−i/(C−1)))`.
pub fn longtail_counts(n_max: usize, rho: f64, num_classes: usize) -> Result<Vec<usize>> {
    if n_max == 0 {
        return Err(Error::validation("n_max must be at least 1"));
    }
    if num_classes < 2 {
        return Err(Error::validation("need at least 2 classes"));
    }
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::validation(format!("imbalance ratio must be ≥ 1, got {rho}")));
    }
    let last = (num_classes - 1) as f64;
    let counts: Vec<usize> = (0..num_classes)
        .map(|i| (n_max as f64 * rho.powf(-(i as f64) / last)).round() as usize)
        .collect();
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::validation(format!(
            "n_max={n_max} with rho={rho} leaves a class with no samples"
        )));
    }
    Ok(counts)
}

/// Reporting bucket for a class, by training frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrequencyGroup {
    Many,
    Medium,
    Few,
}

impl FrequencyGroup {
    pub const ALL: [FrequencyGroup; 3] = [Self::Many, Self::Medium, Self::Few];

    pub fn name(self) -> &'static str {
        match self {
            Self::Many => "many",
            Self::Medium => "medium",
            Self::Few => "few",
        }
    }
}

/// Splits classes into thirds by count: the most frequent third is `Many`,
/// the least frequent third is `Few`. Ties in count keep class order.
pub fn frequency_groups(counts: &[usize]) -> Vec<FrequencyGroup> {
    let c = counts.len();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut groups = vec![FrequencyGroup::Many; c];
    for (rank, &class) in order.iter().enumerate() {
        groups[class] = FrequencyGroup::ALL[(3 * rank / c.max(1)).min(2)];
    }
    groups
}

/// A rooted tree whose nodes `0..C` are exactly the class leaves.
///
/// Every edge has length 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyTree {
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    num_classes: usize,
}

impl HierarchyTree {
    /// Validates a parent table: exactly one root, no cycles, class nodes are leaves.
    pub fn new(parent: Vec<Option<usize>>, num_classes: usize) -> Result<Self> {
        let n = parent.len();
        if num_classes == 0 || num_classes > n {
            return Err(Error::validation(format!(
                "{num_classes} classes cannot be leaves of a {n}-node tree"
            )));
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::validation(format!(
                "a hierarchy needs exactly one root, found {}",
                roots.len()
            )));
        }
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n || p == i {
                    return Err(Error::validation(format!("node {i} has invalid parent {p}")));
                }
                children[p].push(i);
            }
        }
        if let Some(c) = (0..num_classes).find(|&c| !children[c].is_empty()) {
            return Err(Error::validation(format!("class {c} is not a leaf")));
        }
        // Breadth-first from the root: reaching every node once proves the
        // table is a connected, acyclic tree.
        let mut depth = vec![usize::MAX; n];
        depth[roots[0]] = 0;
        let mut queue = VecDeque::from([roots[0]]);
        while let Some(u) = queue.pop_front() {
            for &v in &children[u] {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
        if let Some(u) = depth.iter().position(|&d| d == usize::MAX) {
            return Err(Error::validation(format!("node {u} is not connected to the root")));
        }
        Ok(Self {
            parent,
            depth,
            num_classes,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn root(&self) -> usize {
        self.parent
            .iter()
            .position(Option::is_none)
            .expect("validated tree has a root")
    }

    /// Number of edges on the path between two class leaves.
    pub fn distance(&self, a: usize, b: usize) -> Result<usize> {
        for c in [a, b] {
            if c >= self.num_classes {
                return Err(Error::validation(format!("unknown class {c}")));
            }
        }
        let (mut x, mut y) = (a, b);
        let mut steps = 0;
        while self.depth[x] > self.depth[y] {
            x = self.parent[x].expect("non-root");
            steps += 1;
        }
        while self.depth[y] > self.depth[x] {
            y = self.parent[y].expect("non-root");
            steps += 1;
        }
        while x != y {
            x = self.parent[x].expect("non-root");
            y = self.parent[y].expect("non-root");
            steps += 2;
        }
        Ok(steps)
    }

    /// Largest leaf-to-leaf distance.
    pub fn max_class_distance(&self) -> usize {
        let mut best = 0;
        for a in 0..self.num_classes {
            for b in (a + 1)..self.num_classes {
                best = best.max(self.distance(a, b).expect("valid classes"));
            }
        }
        best
    }

    /// Nodes ordered so that every parent precedes its children.
    pub fn top_down(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.num_nodes()).collect();
        order.sort_by_key(|&u| (self.depth[u], u));
        order
    }

    /// `C=<int>` header, then one `id parent_id` line per node (`-1` for the root).
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "C={}", self.num_classes)?;
        for (i, p) in self.parent.iter().enumerate() {
            match p {
                Some(p) => writeln!(out, "{i} {p}")?,
                None => writeln!(out, "{i} -1")?,
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty hierarchy file"))?;
        let fields = parse_header(&header?, 1, &["C"])?;
        let num_classes = parse_num::<usize>(&fields[0], 1)?;
        let mut entries = Vec::new();
        for (n, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let (Some(id), Some(parent), None) = (toks.next(), toks.next(), toks.next()) else {
                return Err(Error::parse(n + 1, "expected `id parent_id`"));
            };
            let id = parse_num::<usize>(id, n + 1)?;
            let parent = parse_num::<i64>(parent, n + 1)?;
            entries.push((id, parent, n + 1));
        }
        let mut parent = vec![None; entries.len()];
        let mut seen = vec![false; entries.len()];
        for (id, p, line) in entries {
            if id >= parent.len() || std::mem::replace(&mut seen[id], true) {
                return Err(Error::parse(line, format!("node id {id} is out of range or repeated")));
            }
            parent[id] = match p {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                _ => return Err(Error::parse(line, format!("invalid parent {p}"))),
            };
        }
        Self::new(parent, num_classes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Balanced tree over `C` classes: class slots are split into `branching`
/// near-equal contiguous groups recursively; the seed shuffles which class
/// lands in which slot.
pub fn generate_hierarchy(num_classes: usize, branching: usize, seed: u64) -> Result<HierarchyTree> {
    if num_classes < 2 {
        return Err(Error::validation("need at least 2 classes"));
    }
    if branching < 2 {
        return Err(Error::validation("branching factor must be at least 2"));
    }
    let mut slots: Vec<usize> = (0..num_classes).collect();
    slots.shuffle(&mut seed::rng(seed, &[seed::stream::HIERARCHY]));

    let mut parent: Vec<Option<usize>> = vec![None; num_classes];
    let root = push_node(&mut parent, None);
    let mut stack = vec![(root, 0usize, num_classes)];
    while let Some((node, lo, hi)) = stack.pop() {
        let len = hi - lo;
        let parts = branching.min(len);
        let mut start = lo;
        for p in 0..parts {
            let end = lo + (len * (p + 1)) / parts;
            if end - start == 1 {
                parent[slots[start]] = Some(node);
            } else {
                let child = push_node(&mut parent, Some(node));
                stack.push((child, start, end));
            }
            start = end;
        }
    }
    HierarchyTree::new(parent, num_classes)
}

fn push_node(parent: &mut Vec<Option<usize>>, p: Option<usize>) -> usize {
    parent.push(p);
    parent.len() - 1
}

/// Raw labeled inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSamples {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledSamples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Header fields shared by the dataset files.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub num_classes: usize,
    pub input_dim: usize,
    pub rho: f64,
    pub seed: u64,
}

/// Writes `C=<int> d_in=<int> rho=<float> seed=<int>`, then `label v₁ … v_d` per sample.
pub fn write_samples<W: Write>(header: &DatasetHeader, samples: &LabeledSamples, mut out: W) -> Result<()> {
    writeln!(
        out,
        "C={} d_in={} rho={} seed={}",
        header.num_classes, header.input_dim, header.rho, header.seed
    )?;
    let mut line = String::new();
    for (x, y) in samples.inputs.iter().zip(&samples.labels) {
        line.clear();
        write!(line, "{y}").unwrap();
        for v in x {
            write!(line, " {v:.16e}").unwrap();
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(input: R) -> Result<(DatasetHeader, LabeledSamples)> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty dataset file"))?;
    let fields = parse_header(&header?, 1, &["C", "d_in", "rho", "seed"])?;
    let header = DatasetHeader {
        num_classes: parse_num(&fields[0], 1)?,
        input_dim: parse_num(&fields[1], 1)?,
        rho: parse_num(&fields[2], 1)?,
        seed: parse_num(&fields[3], 1)?,
    };
    let mut samples = LabeledSamples {
        inputs: Vec::new(),
        labels: Vec::new(),
    };
    for (n, line) in lines {
        let line = line?;
        let mut toks = line.split_whitespace();
        let Some(label) = toks.next() else { continue };
        let label = parse_num::<usize>(label, n + 1)?;
        if label >= header.num_classes {
            return Err(Error::parse(n + 1, format!("label {label} is out of range")));
        }
        let x = toks.map(|t| parse_num::<f64>(t, n + 1)).collect::<Result<Vec<_>>>()?;
        if x.len() != header.input_dim {
            return Err(Error::parse(
                n + 1,
                format!("expected {} values, found {}", header.input_dim, x.len()),
            ));
        }
        samples.labels.push(label);
        samples.inputs.push(x);
    }
    Ok((header, samples))
}

pub fn save_samples(path: impl AsRef<Path>, header: &DatasetHeader, samples: &LabeledSamples) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_samples(header, samples, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<(DatasetHeader, LabeledSamples)> {
    read_samples(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub input_dim: usize,
    /// Training count per class.
    pub counts: Vec<usize>,
    /// Per-coordinate standard deviation of the sample noise.
    pub noise: f64,
    /// Perturbation magnitude of the first level below the root; halves per level.
    pub spread: f64,
    pub test_per_class: usize,
    pub seed: u64,
}

/// A long-tailed training split, a class-balanced test split and the
/// hierarchy that generated the prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTailDataset {
    pub train: LabeledSamples,
    pub test: LabeledSamples,
    pub counts: Vec<usize>,
    pub rho: f64,
    pub prototypes: Vec<Vec<f64>>,
    pub hierarchy: HierarchyTree,
    pub seed: u64,
}

impl LongTailDataset {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn input_dim(&self) -> usize {
        self.prototypes[0].len()
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            num_classes: self.num_classes(),
            input_dim: self.input_dim(),
            rho: self.rho,
            seed: self.seed,
        }
    }
}

pub fn generate_dataset(cfg: &DatasetConfig, hierarchy: &HierarchyTree) -> Result<LongTailDataset> {
    let c = cfg.counts.len();
    if c != hierarchy.num_classes() {
        return Err(Error::validation(format!(
            "{c} class counts but the hierarchy has {} classes",
            hierarchy.num_classes()
        )));
    }
    if cfg.input_dim < 2 {
        return Err(Error::validation("input dimension must be at least 2"));
    }
    if let Some(i) = cfg.counts.iter().position(|&n| n == 0) {
        return Err(Error::validation(format!("class {i} has no training samples")));
    }
    if !(cfg.noise >= 0.0) || !(cfg.spread >= 0.0) {
        return Err(Error::validation("noise and spread must be non-negative"));
    }

    let d = cfg.input_dim;
    let mut rng = seed::rng(cfg.seed, &[seed::stream::PROTOTYPES]);
    let mut node_proto: Vec<Vec<f64>> = vec![Vec::new(); hierarchy.num_nodes()];
    for u in hierarchy.top_down() {
        let direction = loop {
            let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Ok(v) = sphere::normalized(&g) {
                break v;
            }
        };
        node_proto[u] = match hierarchy.parent(u) {
            None => direction,
            Some(p) => {
                let magnitude = cfg.spread * 0.5f64.powi(hierarchy.depth(u) as i32 - 1);
                let moved: Vec<f64> = node_proto[p]
                    .iter()
                    .zip(&direction)
                    .map(|(a, b)| a + magnitude * b)
                    .collect();
                sphere::normalized(&moved)?
            }
        };
    }
    let prototypes: Vec<Vec<f64>> = node_proto.into_iter().take(c).collect();

    let noise = if cfg.noise > 0.0 {
        Some(Normal::new(0.0, cfg.noise).map_err(|e| Error::validation(e.to_string()))?)
    } else {
        None
    };
    let draw = |class: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Result<Vec<f64>> {
        let p = &prototypes[class];
        match &noise {
            None => Ok(p.clone()),
            Some(dist) => {
                let x: Vec<f64> = p.iter().map(|v| v + dist.sample(rng)).collect();
                sphere::normalized(&x)
            }
        }
    };

    let mut train_rng = seed::rng(cfg.seed, &[seed::stream::TRAIN_SAMPLES]);
    let mut train = LabeledSamples {
        inputs: Vec::new(),
        labels: Vec::new(),
    };
    for (class, &n) in cfg.counts.iter().enumerate() {
        for _ in 0..n {
            train.inputs.push(draw(class, &mut train_rng)?);
            train.labels.push(class);
        }
    }
    let mut test_rng = seed::rng(cfg.seed, &[seed::stream::TEST_SAMPLES]);
    let mut test = LabeledSamples {
        inputs: Vec::new(),
        labels: Vec::new(),
    };
    for class in 0..c {
        for _ in 0..cfg.test_per_class {
            test.inputs.push(draw(class, &mut test_rng)?);
            test.labels.push(class);
        }
    }

    let max = *cfg.counts.iter().max().expect("non-empty");
    let min = *cfg.counts.iter().min().expect("non-empty");
    Ok(LongTailDataset {
        train,
        test,
        counts: cfg.counts.clone(),
        rho: max as f64 / min as f64,
        prototypes,
        hierarchy: hierarchy.clone(),
        seed: cfg.seed,
    })
}
