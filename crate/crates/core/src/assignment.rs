//! Class centers and the class-to-target matching.
//!
//! During training each class keeps an exponential moving average of its
//! normalized batch centers. After every iteration the classes are matched to
//! the fixed targets by minimizing the mean center-to-target distance, solved
//! exactly with the Hungarian algorithm.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sphere;
use crate::targets::TargetSet;

/// Normalized per-class means of the unit features in a batch.
///
/// Classes absent from the batch are absent from the map. A class whose
/// features sum to (numerically) zero yields a degenerate-center error.
pub fn batch_class_centers(
    features: &[Vec<f64>],
    labels: &[usize],
) -> Result<BTreeMap<usize, Vec<f64>>> {
    if features.is_empty() {
        return Err(Error::validation("cannot compute centers of an empty batch"));
    }
    if features.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} features but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let d = features[0].len();
    sphere::check_unit_rows(features, d, "feature")?;

    let mut sums: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (v, &y) in features.iter().zip(labels) {
        let s = sums.entry(y).or_insert_with(|| vec![0.0; d]);
        s.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    sums.into_iter()
        .map(|(class, sum)| {
            let n = sphere::norm(&sum);
            if !(n >= sphere::DEGENERATE_NORM) {
                return Err(Error::Degenerate(format!(
                    "features of class {class} cancel out (sum norm {n:e})"
                )));
            }
            Ok((class, sum.into_iter().map(|x| x / n).collect()))
        })
        .collect()
}

/// EMA-tracked class centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterTracker {
    centers: Vec<Option<Vec<f64>>>,
    dim: usize,
    ema_old_weight: f64,
    renormalize: bool,
}

impl CenterTracker {
    /// Weight kept on the running center in each update.
    pub const OLD_WEIGHT: f64 = 0.9;

    pub fn new(num_classes: usize, dim: usize) -> Self {
        Self {
            centers: vec![None; num_classes],
            dim,
            ema_old_weight: Self::OLD_WEIGHT,
            renormalize: true,
        }
    }

    /// Disables re-projection onto the sphere after the blend, leaving the raw
    /// `0.9·c + 0.1·c'` combination.
    pub fn without_renormalization(mut self) -> Self {
        self.renormalize = false;
        self
    }

    pub fn num_classes(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ema_old_weight(&self) -> f64 {
        self.ema_old_weight
    }

    pub fn ema_new_weight(&self) -> f64 {
        1.0 - self.ema_old_weight
    }

    pub fn center(&self, class: usize) -> Option<&[f64]> {
        self.centers.get(class).and_then(|c| c.as_deref())
    }

    pub fn is_ready(&self) -> bool {
        self.centers.iter().all(Option::is_some)
    }

    /// Overwrites every center, e.g. from a full pass over the training set.
    pub fn reset_from(&mut self, centers: &BTreeMap<usize, Vec<f64>>) {
        for c in &mut self.centers {
            *c = None;
        }
        for (&class, v) in centers {
            if let Some(slot) = self.centers.get_mut(class) {
                *slot = Some(v.clone());
            }
        }
    }

    /// Folds one batch's centers into the running averages.
    ///
    /// First observation of a class copies the batch center; later ones blend
    /// `0.9·c + 0.1·c'` and re-normalize. Classes not in the map are untouched.
    pub fn update(&mut self, batch_centers: &BTreeMap<usize, Vec<f64>>) -> Result<()> {
        for (&class, new) in batch_centers {
            if new.len() != self.dim {
                return Err(Error::validation(format!(
                    "center of class {class} has dimension {} (expected {})",
                    new.len(),
                    self.dim
                )));
            }
            let old_w = self.ema_old_weight;
            let new_w = 1.0 - old_w;
            let renormalize = self.renormalize;
            let slot = self.centers.get_mut(class).ok_or_else(|| {
                Error::validation(format!("class {class} is out of range"))
            })?;
            match slot {
                None => *slot = Some(new.clone()),
                Some(c) => {
                    c.iter_mut()
                        .zip(new)
                        .for_each(|(a, b)| *a = old_w * *a + new_w * b);
                    if renormalize {
                        sphere::normalize_in_place(c)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// A class-to-target matching: class `i` is pulled toward target `sigma[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub sigma: Vec<usize>,
    /// Mean center-to-target distance `(1/C) Σ_i ‖t_{σ_i} − c_i‖`.
    pub cost: f64,
}

impl Assignment {
    pub fn identity(num_classes: usize) -> Self {
        Self {
            sigma: (0..num_classes).collect(),
            cost: 0.0,
        }
    }

    pub fn target_of(&self, class: usize) -> Option<usize> {
        self.sigma.get(class).copied()
    }

    /// `class=<i> target=<σ_i>` lines followed by `cost=<float>`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.sigma.iter().enumerate() {
            writeln!(out, "class={i} target={t}").unwrap();
        }
        writeln!(out, "cost={:.17e}", self.cost).unwrap();
        out
    }

    /// Parses the output of [`Assignment::dump`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut sigma = Vec::new();
        let mut cost = None;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(v) = line.strip_prefix("cost=") {
                cost = Some(
                    v.parse::<f64>()
                        .map_err(|_| Error::parse(n + 1, format!("bad cost `{v}`")))?,
                );
                continue;
            }
            let (class, target) = line
                .split_once(' ')
                .and_then(|(a, b)| Some((a.strip_prefix("class=")?, b.strip_prefix("target=")?)))
                .ok_or_else(|| Error::parse(n + 1, format!("unrecognized line `{line}`")))?;
            let class: usize = class
                .parse()
                .map_err(|_| Error::parse(n + 1, "bad class index"))?;
            let target: usize = target
                .parse()
                .map_err(|_| Error::parse(n + 1, "bad target index"))?;
            if class != sigma.len() {
                return Err(Error::parse(n + 1, "classes must be listed in order"));
            }
            sigma.push(target);
        }
        let cost = cost.ok_or_else(|| Error::parse(0, "missing cost line"))?;
        check_permutation(&sigma)?;
        Ok(Self { sigma, cost })
    }
}

fn check_permutation(sigma: &[usize]) -> Result<()> {
    let mut seen = vec![false; sigma.len()];
    for &s in sigma {
        if s >= sigma.len() || std::mem::replace(&mut seen[s], true) {
            return Err(Error::validation(format!("{sigma:?} is not a permutation")));
        }
    }
    Ok(())
}

/// Solution of a square linear assignment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct HungarianSolution {
    /// `sigma[row] = column`.
    pub sigma: Vec<usize>,
    /// `Σ_row cost[row][sigma[row]]`, summed in row order.
    pub total: f64,
}

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Among all optimal permutations the lexicographically smallest one is
/// returned: the potentials from the shortest-augmenting-path solve identify
/// every optimal edge (zero reduced cost), and the final matching is chosen
/// greedily row by row within that tight subgraph.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<HungarianSolution> {
    let n = cost.len();
    for (i, row) in cost.iter().enumerate() {
        if row.len() != n {
            return Err(Error::validation(format!(
                "cost matrix is not square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(x) = row.iter().find(|x| !x.is_finite()) {
            return Err(Error::validation(format!("non-finite cost {x} in row {i}")));
        }
    }
    if n == 0 {
        return Ok(HungarianSolution {
            sigma: Vec::new(),
            total: 0.0,
        });
    }

    let (row_pot, col_pot, initial) = shortest_augmenting_path(cost);

    let scale = cost
        .iter()
        .flatten()
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let eps = 1e-9 * scale;
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| cost[i][j] - row_pot[i] - col_pot[j] <= eps)
                .collect()
        })
        .collect();

    let sigma = lexicographic_matching(&tight, initial);
    let total = sigma.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(HungarianSolution { sigma, total })
}

/// O(n³) Hungarian algorithm with row/column potentials (Jonker–Volgenant style).
///
/// Returns `(row potentials, column potentials, row→column matching)`, with
/// `cost[i][j] − u[i] − v[j] ≥ 0` everywhere and equality on the matching.
fn shortest_augmenting_path(cost: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = cost.len();
    // 1-based arrays, index 0 is the virtual column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut sigma = vec![0usize; n];
    for j in 1..=n {
        sigma[owner[j] - 1] = j - 1;
    }
    (u[1..].to_vec(), v[1..].to_vec(), sigma)
}

/// Lexicographically smallest perfect matching of a bipartite graph, given any
/// perfect matching `start` of it.
fn lexicographic_matching(tight: &[Vec<bool>], start: Vec<usize>) -> Vec<usize> {
    let n = tight.len();
    let mut row_of = vec![usize::MAX; n];
    for (i, &j) in start.iter().enumerate() {
        row_of[j] = i;
    }
    let mut sigma = start;
    let mut col_fixed = vec![false; n];

    for i in 0..n {
        for j in 0..n {
            if col_fixed[j] || !tight[i][j] {
                continue;
            }
            if sigma[i] == j {
                break;
            }
            // Give column j to row i; its previous owner must find a new
            // column among the unfixed ones via an alternating path that ends
            // at the column row i gave up.
            let displaced = row_of[j];
            let freed = sigma[i];
            let saved = (sigma.clone(), row_of.clone());
            col_fixed[j] = true;
            sigma[i] = j;
            row_of[j] = i;
            row_of[freed] = usize::MAX;
            let mut visited = vec![false; n];
            if augment(displaced, tight, &mut sigma, &mut row_of, &col_fixed, &mut visited) {
                break;
            }
            col_fixed[j] = false;
            (sigma, row_of) = saved;
        }
        col_fixed[sigma[i]] = true;
    }
    sigma
}

fn augment(
    row: usize,
    tight: &[Vec<bool>],
    sigma: &mut [usize],
    row_of: &mut [usize],
    col_fixed: &[bool],
    visited: &mut [bool],
) -> bool {
    for j in 0..tight.len() {
        if col_fixed[j] || visited[j] || !tight[row][j] {
            continue;
        }
        visited[j] = true;
        let owner = row_of[j];
        if owner == usize::MAX || augment(owner, tight, sigma, row_of, col_fixed, visited) {
            sigma[row] = j;
            row_of[j] = row;
            return true;
        }
    }
    false
}

/// Matches every class center to a target, minimizing the mean Euclidean distance.
pub fn assign_targets(tracker: &CenterTracker, targets: &TargetSet) -> Result<Assignment> {
    let c = tracker.num_classes();
    if c != targets.num_classes() {
        return Err(Error::validation(format!(
            "{c} class centers but {} targets",
            targets.num_classes()
        )));
    }
    if tracker.dim() != targets.dim() {
        return Err(Error::validation(format!(
            "centers have dimension {} but targets have {}",
            tracker.dim(),
            targets.dim()
        )));
    }
    let centers = (0..c)
        .map(|i| {
            tracker.center(i).ok_or_else(|| {
                Error::NotReady(format!("class {i} has no center yet; extend the warm-up"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cost: Vec<Vec<f64>> = centers
        .iter()
        .map(|ci| targets.points().iter().map(|tj| sphere::distance(tj, ci)).collect())
        .collect();
    let solution = hungarian(&cost)?;
    Ok(Assignment {
        cost: solution.total / c as f64,
        sigma: solution.sigma,
    })
}

/// Mean distance between each class center and its assigned target.
pub fn assignment_cost(centers: &[Vec<f64>], targets: &TargetSet, sigma: &[usize]) -> f64 {
    centers
        .iter()
        .zip(sigma)
        .map(|(c, &s)| sphere::distance(targets.get(s), c))
        .sum::<f64>()
        / centers.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn brute_force(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
        fn rec(
            cost: &[Vec<f64>],
            row: usize,
            used: &mut Vec<bool>,
            cur: &mut Vec<usize>,
            best: &mut (f64, Vec<usize>),
        ) {
            let n = cost.len();
            if row == n {
                let total: f64 = cur.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
                // Strict improvement keeps the first (lexicographically smallest) optimum.
                if total < best.0 - 1e-12 {
                    *best = (total, cur.clone());
                }
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    cur.push(j);
                    rec(cost, row + 1, used, cur, best);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut best = (f64::INFINITY, Vec::new());
        rec(cost, 0, &mut vec![false; cost.len()], &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn single_class_centers() {
        let c = batch_class_centers(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[0, 0]).unwrap();
        assert_eq!(c[&0], vec![1.0, 0.0]);
        let c = batch_class_centers(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[3, 3]).unwrap();
        let h = 0.5f64.sqrt();
        assert!((c[&3][0] - h).abs() < 1e-15 && (c[&3][1] - h).abs() < 1e-15);
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn cancelling_features_are_degenerate() {
        let r = batch_class_centers(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &[0, 0]);
        assert!(matches!(r, Err(Error::Degenerate(_))));
        assert!(batch_class_centers(&[], &[]).is_err());
    }

    #[test]
    fn ema_rules() {
        let mut t = CenterTracker::new(2, 2);
        assert!((t.ema_old_weight() + t.ema_new_weight() - 1.0).abs() < 1e-15);
        let mut m = BTreeMap::new();
        m.insert(1, vec![0.0, 1.0]);
        t.update(&m).unwrap();
        assert_eq!(t.center(1), Some(&[0.0, 1.0][..]));
        assert_eq!(t.center(0), None);

        let mut t = CenterTracker::new(1, 2);
        m.clear();
        m.insert(0, vec![1.0, 0.0]);
        t.update(&m).unwrap();
        t.update(&m).unwrap();
        assert_eq!(t.center(0), Some(&[1.0, 0.0][..]));

        m.insert(0, vec![0.0, 1.0]);
        t.update(&m).unwrap();
        let n = (0.81f64 + 0.01).sqrt();
        let c = t.center(0).unwrap();
        assert!((c[0] - 0.9 / n).abs() < 1e-12 && (c[1] - 0.1 / n).abs() < 1e-12);
        assert!((c[0] - 0.99388).abs() < 1e-5 && (c[1] - 0.11043).abs() < 1e-5);
    }

    #[test]
    fn ema_without_renormalization_is_raw_blend() {
        let mut t = CenterTracker::new(1, 2).without_renormalization();
        let mut m = BTreeMap::new();
        m.insert(0, vec![1.0, 0.0]);
        t.update(&m).unwrap();
        m.insert(0, vec![0.0, 1.0]);
        t.update(&m).unwrap();
        let c = t.center(0).unwrap();
        assert!((c[0] - 0.9).abs() < 1e-15 && (c[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn hungarian_small_cases() {
        let s = hungarian(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(s.sigma, vec![0, 1]);
        assert_eq!(s.total, 0.0);
        let s = hungarian(&vec![vec![0.0; 3]; 3]).unwrap();
        assert_eq!(s.sigma, vec![0, 1, 2]);
        let s = hungarian(&[vec![5.0, 1.0], vec![1.0, 5.0]]).unwrap();
        assert_eq!(s.sigma, vec![1, 0]);
        assert_eq!(s.total, 2.0);
    }

    #[test]
    fn hungarian_rejects_bad_input() {
        assert!(hungarian(&[vec![0.0, 1.0]]).is_err());
        assert!(hungarian(&[vec![0.0, f64::NAN], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn hungarian_matches_exhaustive_search() {
        let mut rng = seed::rng(11, &[]);
        for trial in 0..200 {
            let n = 1 + trial % 7;
            // Small integer costs make ties common, exercising the tie-break.
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(0..4) as f64).collect())
                .collect();
            let (best, perm) = brute_force(&cost);
            let s = hungarian(&cost).unwrap();
            assert_eq!(s.total, best, "{cost:?}");
            assert_eq!(s.sigma, perm, "{cost:?}");
        }
    }

    #[test]
    fn assignment_recovers_permutation() {
        let ts = crate::targets::generate_targets(
            5,
            4,
            &crate::targets::TargetGenConfig {
                iterations: 500,
                ..Default::default()
            },
        )
        .unwrap();
        let perm = [3usize, 0, 4, 1, 2];
        let mut tracker = CenterTracker::new(5, 4);
        let centers: BTreeMap<usize, Vec<f64>> = perm
            .iter()
            .enumerate()
            .map(|(class, &t)| (class, ts.get(t).to_vec()))
            .collect();
        tracker.update(&centers).unwrap();
        let a = assign_targets(&tracker, &ts).unwrap();
        assert_eq!(a.sigma, perm.to_vec());
        assert_eq!(a.cost, 0.0);
        assert_eq!(assign_targets(&tracker, &ts).unwrap(), a);
    }

    #[test]
    fn assignment_requires_all_centers() {
        let ts = crate::targets::TargetSet::from_points(
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            1.0,
            0,
        )
        .unwrap();
        let mut tracker = CenterTracker::new(2, 2);
        let mut m = BTreeMap::new();
        m.insert(0, vec![1.0, 0.0]);
        tracker.update(&m).unwrap();
        assert!(matches!(assign_targets(&tracker, &ts), Err(Error::NotReady(_))));
    }

    #[test]
    fn dump_round_trip() {
        let a = Assignment {
            sigma: vec![2, 0, 1],
            cost: 0.125,
        };
        let text = a.dump();
        assert!(text.starts_with("class=0 target=2\n"));
        assert!(text.trim_end().ends_with("cost=1.25000000000000000e-1"));
        assert_eq!(Assignment::parse(&text).unwrap(), a);
        assert!(Assignment::parse("class=0 target=0\nclass=1 target=0\ncost=0\n").is_err());
    }
}
