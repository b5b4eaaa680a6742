//! Random labeled feature sets for the metric tests.

use rand::Rng;

use tsc_core::datagen::{generate_hierarchy, HierarchyTree};
use tsc_core::metrics;

/// A random labeled feature set with every class present.
pub struct Instance {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub tree: HierarchyTree,
    pub c: usize,
    pub k: usize,
}

pub fn instance(seed: u64) -> Instance {
    let mut r = super::rng(seed);
    let c = r.random_range(2..=10);
    let d = r.random_range(2..=6);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for class in 0..c {
        for _ in 0..r.random_range(1..=20) {
            features.push(super::unit(&mut r, d));
            labels.push(class);
        }
    }
    let tree = generate_hierarchy(c, r.random_range(2..=3), seed).unwrap();
    let k = r.random_range(1..c);
    Instance {
        features,
        labels,
        tree,
        c,
        k,
    }
}

impl Instance {
    pub fn grouped(&self) -> Vec<Vec<Vec<f64>>> {
        metrics::group_by_class(&self.features, &self.labels, self.c).unwrap()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        metrics::class_centers(&self.features, &self.labels, self.c).unwrap()
    }

    /// (A, U, U_k, R) from the library.
    pub fn metrics(&self) -> [f64; 4] {
        let centers = self.centers();
        [
            metrics::alignment(&self.grouped()).unwrap(),
            metrics::uniformity(&centers).unwrap(),
            metrics::neighborhood_uniformity(&centers, self.k).unwrap(),
            metrics::reasonability(&centers, &self.tree, self.k).unwrap(),
        ]
    }
}
