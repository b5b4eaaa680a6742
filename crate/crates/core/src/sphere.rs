//! Small dense-vector helpers for points on the unit hypersphere.

use crate::error::{Error, Result};

/// Norms below this are treated as zero when normalizing.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Tolerance used when validating that caller-supplied vectors are unit-norm.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent lanes let the compiler vectorize; the order is fixed,
    // so results stay deterministic.
    let mut lanes = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            lanes[k] += x[k] * y[k];
        }
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Returns `v / ‖v‖`, or a degenerate-vector error when `‖v‖ < 1e-12`.
pub fn normalized(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !(n >= DEGENERATE_NORM) {
        return Err(Error::Degenerate(format!(
            "cannot normalize a vector of norm {n:e}"
        )));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn normalize_in_place(v: &mut [f64]) -> Result<()> {
    let n = norm(v);
    if !(n >= DEGENERATE_NORM) {
        return Err(Error::Degenerate(format!(
            "cannot normalize a vector of norm {n:e}"
        )));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

/// Back-propagates a gradient through `v = u / ‖u‖`.
///
/// Given `g = ∂L/∂v`, returns `∂L/∂u = (g − (vᵀg) v) / ‖u‖`.
pub fn normalize_backward(u: &[f64], grad_v: &[f64]) -> Vec<f64> {
    let n = norm(u);
    let radial: f64 = u.iter().zip(grad_v).map(|(x, g)| x * g).sum::<f64>() / n;
    u.iter()
        .zip(grad_v)
        .map(|(x, g)| (g - radial * x / n) / n)
        .collect()
}

/// Checks that every row has the given dimension and unit norm within `UNIT_TOLERANCE`.
pub fn check_unit_rows(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::validation(format!(
                "{what} {i} has dimension {} (expected {dim})",
                r.len()
            )));
        }
        let n = norm(r);
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::validation(format!(
                "{what} {i} is not unit-norm (norm {n})"
            )));
        }
    }
    Ok(())
}
