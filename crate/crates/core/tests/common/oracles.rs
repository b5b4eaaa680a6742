//! Brute-force metric implementations, written independently of the library.

use std::collections::VecDeque;

use tsc_core::datagen::HierarchyTree;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn center(fs: &[Vec<f64>]) -> Vec<f64> {
    let d = fs[0].len();
    let mut s = vec![0.0; d];
    for f in fs {
        for k in 0..d {
            s[k] += f[k];
        }
    }
    let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    s.iter().map(|x| x / n).collect()
}

pub fn centers(classes: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    classes.iter().map(|fs| center(fs)).collect()
}

pub fn alignment(classes: &[Vec<Vec<f64>>]) -> f64 {
    let mut total = 0.0;
    for fs in classes {
        let mut s = 0.0;
        for a in fs {
            for b in fs {
                s += dist(a, b);
            }
        }
        total += s / (fs.len() * fs.len()) as f64;
    }
    total / classes.len() as f64
}

pub fn uniformity(centers: &[Vec<f64>]) -> f64 {
    let c = centers.len();
    let mut s = 0.0;
    for i in 0..c {
        for j in 0..c {
            if i != j {
                s += dist(&centers[i], &centers[j]);
            }
        }
    }
    s / (c * (c - 1)) as f64
}

/// Minimum of Σ over every k-subset of the other centers, as the metric is defined.
pub fn neighborhood_uniformity(centers: &[Vec<f64>], k: usize) -> f64 {
    let c = centers.len();
    let mut total = 0.0;
    for i in 0..c {
        let others: Vec<usize> = (0..c).filter(|&j| j != i).collect();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << others.len()) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let s: f64 = (0..others.len())
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| dist(&centers[i], &centers[others[b]]))
                .sum();
            best = best.min(s);
        }
        total += best / k as f64;
    }
    total / c as f64
}

/// Path length between two nodes by breadth-first search over the undirected tree.
pub fn tree_distance(tree: &HierarchyTree, a: usize, b: usize) -> usize {
    let n = tree.num_nodes();
    let mut adj = vec![Vec::new(); n];
    for u in 0..n {
        if let Some(p) = tree.parent(u) {
            adj[u].push(p);
            adj[p].push(u);
        }
    }
    let mut seen = vec![usize::MAX; n];
    seen[a] = 0;
    let mut queue = VecDeque::from([a]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if seen[v] == usize::MAX {
                seen[v] = seen[u] + 1;
                queue.push_back(v);
            }
        }
    }
    seen[b]
}

pub fn reasonability(centers: &[Vec<f64>], tree: &HierarchyTree, k: usize) -> f64 {
    let c = centers.len();
    let mut total = 0.0;
    for i in 0..c {
        let mut others: Vec<(f64, usize)> = (0..c)
            .filter(|&j| j != i)
            .map(|j| (dist(&centers[i], &centers[j]), j))
            .collect();
        others.sort_by(|x, y| x.partial_cmp(y).unwrap());
        total += others[..k]
            .iter()
            .map(|&(_, j)| tree_distance(tree, i, j) as f64)
            .sum::<f64>()
            / k as f64;
    }
    total / c as f64
}
