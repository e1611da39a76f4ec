#![allow(dead_code)]

use isoprofile::l1ot::SignedFunction;
use isoprofile::mms::{FiniteMMS, SpaceMeta};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use std::f64::consts::PI;

/// Boundary density of the cap of mass `v` under normalized `sin^{N−1}` on
/// `[0, π]`, by bisection on midpoint sums.
pub fn sphere_cap_value(n: f64, v: f64) -> f64 {
    let p = n - 1.0;
    let m = 200_000;
    let h = PI / m as f64;
    let mass = |r: f64| -> f64 {
        let k = ((r / PI) * m as f64).round().max(1.0) as usize;
        let hh = r / k as f64;
        (0..k).map(|i| ((i as f64 + 0.5) * hh).sin().powf(p)).sum::<f64>() * hh
    };
    let total: f64 = (0..m).map(|i| ((i as f64 + 0.5) * h).sin().powf(p)).sum::<f64>() * h;
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) / total < v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).sin().powf(p) / total
}

/// `N/D · inf_{ξ≥0} (w(ξ+1)^N + (1−w)ξ^N)^{(N−1)/N} / ((ξ+1)^N − ξ^N)` with
/// `w = min(v, 1−v)`, by a log scan plus ternary refinement, and the
/// `ξ → ∞` limit `1/N`.
pub fn printed_case3(n: f64, d: f64, v: f64) -> f64 {
    let w = v.min(1.0 - v);
    let g = |xi: f64| {
        (w * (xi + 1.0).powf(n) + (1.0 - w) * xi.powf(n)).powf((n - 1.0) / n) / ((xi + 1.0).powf(n) - xi.powf(n))
    };
    let mut best = f64::INFINITY;
    let mut arg = 0.0;
    for i in 0..=20_000 {
        let xi = if i == 0 { 0.0 } else { 1e-4 * 1.0008f64.powi(i) };
        let val = g(xi);
        if val < best {
            best = val;
            arg = xi;
        }
    }
    let (mut a, mut b) = ((arg / 1.001 - 1e-4).max(0.0), arg * 1.001 + 1e-4);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if g(m1) < g(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let best = best.min(g(0.5 * (a + b))).min(1.0 / n);
    n / d * best
}

pub fn planar_space(pts: &[(f64, f64)]) -> FiniteMMS {
    let n = pts.len();
    let dist = (0..n * n)
        .map(|k| {
            let (a, b) = (pts[k / n], pts[k % n]);
            (a.0 - b.0).hypot(a.1 - b.1)
        })
        .collect();
    FiniteMMS::new(dist, vec![1.0 / n as f64; n], None, SpaceMeta::default()).unwrap()
}

/// Optimal transport cost from a dense LP over all `n²` couplings.
pub fn lp_cost(x: &FiniteMMS, mu0: &[f64], mu1: &[f64]) -> f64 {
    let n = x.len();
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..n * n)
        .map(|k| p.add_var(x.d(k / n, k % n), (0.0, f64::INFINITY)))
        .collect();
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (vars[i * n + j], 1.0)).collect();
        p.add_constraint(&row[..], ComparisonOp::Eq, mu0[i]);
        let col: Vec<_> = (0..n).map(|j| (vars[j * n + i], 1.0)).collect();
        p.add_constraint(&col[..], ComparisonOp::Eq, mu1[i]);
    }
    p.solve().unwrap().objective()
}

/// Normalized `f₊ m` and `f₋ m`.
pub fn marginals(x: &FiniteMMS, f: &SignedFunction) -> (Vec<f64>, Vec<f64>) {
    let z = f.positive_mass(x);
    let w = x.weights();
    let mu0 = f.positive_part().iter().zip(w).map(|(a, b)| a * b / z).collect();
    let mu1 = f.negative_part().iter().zip(w).map(|(a, b)| a * b / z).collect();
    (mu0, mu1)
}
