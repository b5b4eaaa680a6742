//! Feature-space quality metrics over a labeled set of unit features.
//!
//! * alignment `A`: mean intra-class pairwise distance (ordered pairs, self-pairs included);
//! * uniformity `U`: mean distance between distinct class centers;
//! * neighborhood uniformity `U_k`: mean distance from each center to its `k` nearest centers;
//! * reasonability `R`: mean tree distance from each class to its `k` geometrically nearest classes.
//!
//! Centers are normalized class means of the evaluated features. Each metric
//! is an average of per-class contributions, which is what the frequency-group
//! breakdown in [`MetricsReport`] averages over.

use std::fmt::Write as _;

use crate::assignment::batch_class_centers;
use crate::datagen::{FrequencyGroup, HierarchyTree};
use crate::error::{Error, Result};
use crate::sphere;

/// Normalized per-class means; every class in `0..num_classes` must occur.
pub fn class_centers(features: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<Vec<Vec<f64>>> {
    let map = batch_class_centers(features, labels)?;
    (0..num_classes)
        .map(|c| {
            map.get(&c)
                .cloned()
                .ok_or_else(|| Error::validation(format!("class {c} has no features")))
        })
        .collect()
}

/// Groups features by label into `num_classes` buckets.
pub fn group_by_class(features: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut groups = vec![Vec::new(); num_classes];
    for (v, &y) in features.iter().zip(labels) {
        groups
            .get_mut(y)
            .ok_or_else(|| Error::validation(format!("label {y} is out of range")))?
            .push(v.clone());
    }
    Ok(groups)
}

fn per_class_alignment(classes: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    classes
        .iter()
        .enumerate()
        .map(|(i, fs)| {
            if fs.is_empty() {
                return Err(Error::validation(format!("class {i} has no features")));
            }
            sphere::check_unit_rows(fs, fs[0].len(), "feature")?;
            let mut total = 0.0;
            for a in fs {
                for b in fs {
                    total += sphere::distance(a, b);
                }
            }
            Ok(total / (fs.len() * fs.len()) as f64)
        })
        .collect()
}

/// `A = (1/C) Σ_i (1/|F_i|²) Σ_{a,b∈F_i} ‖a − b‖`.
pub fn alignment(classes: &[Vec<Vec<f64>>]) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::validation("alignment of zero classes"));
    }
    Ok(mean(&per_class_alignment(classes)?))
}

fn check_centers(centers: &[Vec<f64>]) -> Result<()> {
    if centers.len() < 2 {
        return Err(Error::validation(format!(
            "need at least 2 class centers, got {}",
            centers.len()
        )));
    }
    sphere::check_unit_rows(centers, centers[0].len(), "center")
}

fn check_k(k: usize, c: usize) -> Result<()> {
    if k == 0 || k + 1 > c {
        return Err(Error::validation(format!(
            "neighborhood size {k} must lie in 1..={}",
            c - 1
        )));
    }
    Ok(())
}

fn distance_matrix(centers: &[Vec<f64>]) -> Vec<Vec<f64>> {
    centers
        .iter()
        .map(|a| centers.iter().map(|b| sphere::distance(a, b)).collect())
        .collect()
}

/// Indices of the `k` nearest other centers, ties broken by lower index.
fn nearest(dist: &[f64], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..dist.len()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    others.truncate(k);
    others
}

/// Per-class mean distance to the `k` nearest centers. Selected distances are
/// summed in index order, so `k = C − 1` reproduces [`uniformity`] bit for bit.
fn per_class_neighborhood(dist: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..dist.len())
        .map(|i| {
            let mut chosen = nearest(&dist[i], i, k);
            chosen.sort_unstable();
            chosen.iter().map(|&j| dist[i][j]).sum::<f64>() / k as f64
        })
        .collect()
}

fn per_class_uniformity(dist: &[Vec<f64>]) -> Vec<f64> {
    let c = dist.len();
    (0..c)
        .map(|i| (0..c).filter(|&j| j != i).map(|j| dist[i][j]).sum::<f64>() / (c - 1) as f64)
        .collect()
}

fn per_class_reasonability(dist: &[Vec<f64>], tree: &HierarchyTree, k: usize) -> Result<Vec<f64>> {
    if tree.num_classes() < dist.len() {
        return Err(Error::validation(format!(
            "hierarchy has {} classes but there are {} centers",
            tree.num_classes(),
            dist.len()
        )));
    }
    (0..dist.len())
        .map(|i| {
            let total = nearest(&dist[i], i, k)
                .into_iter()
                .map(|j| tree.distance(i, j))
                .sum::<Result<usize>>()?;
            Ok(total as f64 / k as f64)
        })
        .collect()
}

/// `U = (1/(C(C−1))) Σ_i Σ_{j≠i} ‖c_i − c_j‖`.
pub fn uniformity(centers: &[Vec<f64>]) -> Result<f64> {
    check_centers(centers)?;
    Ok(mean(&per_class_uniformity(&distance_matrix(centers))))
}

/// `U_k = (1/(Ck)) Σ_i (sum of the k smallest distances from c_i to other centers)`.
pub fn neighborhood_uniformity(centers: &[Vec<f64>], k: usize) -> Result<f64> {
    check_centers(centers)?;
    check_k(k, centers.len())?;
    Ok(mean(&per_class_neighborhood(&distance_matrix(centers), k)))
}

/// Mean hierarchy distance from each class to its `k` nearest class centers.
pub fn reasonability(centers: &[Vec<f64>], tree: &HierarchyTree, k: usize) -> Result<f64> {
    check_centers(centers)?;
    check_k(k, centers.len())?;
    Ok(mean(&per_class_reasonability(&distance_matrix(centers), tree, k)?))
}

/// Neighborhood size used when none is given: `min(10, C − 1)`.
pub fn default_k(num_classes: usize) -> usize {
    10.min(num_classes.saturating_sub(1)).max(1)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Metric values over one set of classes.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    /// `many`, `medium`, `few` or `all`.
    pub name: String,
    pub num_classes: usize,
    pub alignment: f64,
    pub uniformity: f64,
    pub neighborhood_uniformity: f64,
    pub reasonability: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub k: usize,
    /// Frequency groups that contain at least one class, then `all`.
    pub groups: Vec<GroupMetrics>,
}

impl MetricsReport {
    /// Evaluates all metrics on a labeled feature set.
    ///
    /// `groups[c]` is the frequency group of class `c`; `predictions`, when
    /// given, adds per-group accuracy.
    pub fn compute(
        features: &[Vec<f64>],
        labels: &[usize],
        tree: &HierarchyTree,
        groups: &[FrequencyGroup],
        k: usize,
        predictions: Option<&[usize]>,
    ) -> Result<Self> {
        let c = groups.len();
        check_k(k, c)?;
        let by_class = group_by_class(features, labels, c)?;
        let centers = class_centers(features, labels, c)?;
        let dist = distance_matrix(&centers);
        let align = per_class_alignment(&by_class)?;
        let unif = per_class_uniformity(&dist);
        let neigh = per_class_neighborhood(&dist, k);
        let reason = per_class_reasonability(&dist, tree, k)?;

        let summarize = |name: &str, members: &[usize]| -> GroupMetrics {
            let pick = |xs: &[f64]| mean(&members.iter().map(|&i| xs[i]).collect::<Vec<_>>());
            let accuracy = predictions.map(|pred| {
                let (mut hit, mut total) = (0usize, 0usize);
                for (p, &y) in pred.iter().zip(labels) {
                    if members.contains(&y) {
                        total += 1;
                        hit += usize::from(*p == y);
                    }
                }
                if total == 0 {
                    0.0
                } else {
                    hit as f64 / total as f64
                }
            });
            GroupMetrics {
                name: name.to_owned(),
                num_classes: members.len(),
                alignment: pick(&align),
                uniformity: pick(&unif),
                neighborhood_uniformity: pick(&neigh),
                reasonability: pick(&reason),
                accuracy,
            }
        };

        let mut out = Vec::new();
        for g in FrequencyGroup::ALL {
            let members: Vec<usize> = (0..c).filter(|&i| groups[i] == g).collect();
            if !members.is_empty() {
                out.push(summarize(g.name(), &members));
            }
        }
        let all: Vec<usize> = (0..c).collect();
        out.push(summarize("all", &all));
        Ok(Self { k, groups: out })
    }

    pub fn group(&self, name: &str) -> Option<&GroupMetrics> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn all(&self) -> &GroupMetrics {
        self.group("all").expect("report always has an `all` row")
    }

    /// `group.metric=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = format!("k={}\n", self.k);
        for g in &self.groups {
            let n = &g.name;
            writeln!(out, "{n}.classes={}", g.num_classes).unwrap();
            writeln!(out, "{n}.A={:.10}", g.alignment).unwrap();
            writeln!(out, "{n}.U={:.10}", g.uniformity).unwrap();
            writeln!(out, "{n}.U{}={:.10}", self.k, g.neighborhood_uniformity).unwrap();
            writeln!(out, "{n}.R{}={:.10}", self.k, g.reasonability).unwrap();
            if let Some(acc) = g.accuracy {
                writeln!(out, "{n}.acc={acc:.10}").unwrap();
            }
        }
        out
    }

    pub const CSV_HEADER: &'static str = "group,A,U,Uk,R,acc";

    /// One CSV row per group, without the header; missing accuracy is left empty.
    pub fn csv_rows(&self) -> Vec<String> {
        self.groups
            .iter()
            .map(|g| {
                format!(
                    "{},{:.10},{:.10},{:.10},{:.10},{}",
                    g.name,
                    g.alignment,
                    g.uniformity,
                    g.neighborhood_uniformity,
                    g.reasonability,
                    g.accuracy.map(|a| format!("{a:.10}")).unwrap_or_default()
                )
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in self.csv_rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }
}
