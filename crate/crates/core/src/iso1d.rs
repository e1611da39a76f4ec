//! Isoperimetric profile of a probability density on an interval.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::density1d::{Density1D, IntervalSet};
use crate::error::{domain, Error, Result};
use crate::numeric::scan_then_golden;

/// Which candidate family produced a minimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    HalflineLeft,
    HalflineRight,
    InteriorInterval,
    Complement,
    Bruteforce,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::HalflineLeft => "halfline_left",
            Method::HalflineRight => "halfline_right",
            Method::InteriorInterval => "interior_interval",
            Method::Complement => "complement",
            Method::Bruteforce => "bruteforce",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoResult {
    pub v: f64,
    pub value: f64,
    pub minimizer: IntervalSet,
    pub method: Method,
}

impl IsoResult {
    /// The two free endpoints of the minimizer: the interval bounds for a
    /// single component, the removed gap for a complement.
    pub fn endpoints(&self) -> (f64, f64) {
        let c = self.minimizer.components();
        match c.len() {
            0 => (f64::NAN, f64::NAN),
            1 => c[0],
            _ => (c[0].1, c[c.len() - 1].0),
        }
    }
}

/// Search effort of [`profile_structured_with`].
#[derive(Clone, Copy, Debug)]
pub struct IsoOptions {
    pub scan_samples: usize,
    pub golden_iters: usize,
}

impl Default for IsoOptions {
    fn default() -> Self {
        IsoOptions {
            scan_samples: 33,
            golden_iters: 60,
        }
    }
}

fn check_v(v: f64) -> Result<()> {
    if v.is_nan() || !(0.0..=1.0).contains(&v) {
        return domain(format!("volume v must lie in [0,1], got {v}"));
    }
    Ok(())
}

fn trivial(d: &Density1D, v: f64) -> Option<IsoResult> {
    if v == 0.0 {
        Some(IsoResult {
            v,
            value: 0.0,
            minimizer: IntervalSet::empty(),
            method: Method::HalflineLeft,
        })
    } else if v == 1.0 {
        Some(IsoResult {
            v,
            value: 0.0,
            minimizer: IntervalSet::interval(d.a(), d.b()).unwrap(),
            method: Method::HalflineLeft,
        })
    } else {
        None
    }
}

/// Content of `[l, r]` under the one-sided boundary rule.
fn interval_content(d: &Density1D, l: f64, r: f64, edge_tol: f64) -> f64 {
    let mut c = 0.0;
    if l > d.a() + edge_tol {
        c += d.eval(l);
    }
    if r < d.b() - edge_tol {
        c += d.eval(r);
    }
    c
}

fn classify(d: &Density1D, set: &IntervalSet, edge_tol: f64) -> Method {
    match set.components() {
        [(l, r)] => {
            if *l <= d.a() + edge_tol {
                Method::HalflineLeft
            } else if *r >= d.b() - edge_tol {
                Method::HalflineRight
            } else {
                Method::InteriorInterval
            }
        }
        _ => Method::Complement,
    }
}

/// Isoperimetric profile at `v` over half-lines, interior intervals and
/// complements of interior intervals.
pub fn profile_structured(d: &Density1D, v: f64) -> Result<IsoResult> {
    profile_structured_with(d, v, &IsoOptions::default())
}

pub fn profile_structured_with(d: &Density1D, v: f64, opts: &IsoOptions) -> Result<IsoResult> {
    check_v(v)?;
    if let Some(r) = trivial(d, v) {
        return Ok(r);
    }
    let edge_tol = 1e-12 * (d.b() - d.a());
    let (a, b) = (d.a(), d.b());

    let r = d.quantile(v);
    let mut best = (interval_content(d, a, r, edge_tol), vec![(a, r)]);
    let l = d.quantile(1.0 - v);
    let right = interval_content(d, l, b, edge_tol);
    if right < best.0 {
        best = (right, vec![(l, b)]);
    }

    let interior = |p: f64| {
        let l = d.quantile(p);
        let r = d.quantile((p + v).min(1.0));
        interval_content(d, l, r, edge_tol)
    };
    let (p, val) = scan_then_golden(interior, 0.0, 1.0 - v, opts.scan_samples, opts.golden_iters);
    if val < best.0 {
        best = (val, vec![(d.quantile(p), d.quantile((p + v).min(1.0)))]);
    }

    let complement_set = |p: f64| {
        let l = d.quantile(p);
        let r = d.quantile((p + 1.0 - v).min(1.0));
        let mut comps = Vec::with_capacity(2);
        if l > a {
            comps.push((a, l));
        }
        if r < b {
            comps.push((r, b));
        }
        comps
    };
    let complement = |p: f64| {
        complement_set(p)
            .iter()
            .map(|&(l, r)| interval_content(d, l, r, edge_tol))
            .sum::<f64>()
    };
    let (p, val) = scan_then_golden(complement, 0.0, v, opts.scan_samples, opts.golden_iters);
    if val < best.0 {
        best = (val, complement_set(p));
    }

    let minimizer = IntervalSet::new(best.1)?;
    let method = classify(d, &minimizer, edge_tol);
    Ok(IsoResult {
        v,
        value: best.0,
        minimizer,
        method,
    })
}

/// Mass tolerance for brute-force candidates.
pub const BRUTEFORCE_MASS_TOL: f64 = 1e-3;
pub const DEFAULT_BRUTEFORCE_BUDGET: u64 = 200_000_000;

/// Exhaustive search over unions of at most `k_max ≤ 2` intervals with
/// endpoints on every `grid_stride`-th grid node and mass within
/// [`BRUTEFORCE_MASS_TOL`] of `v`.
pub fn profile_bruteforce(
    d: &Density1D,
    v: f64,
    k_max: usize,
    grid_stride: usize,
) -> Result<IsoResult> {
    profile_bruteforce_budgeted(d, v, k_max, grid_stride, DEFAULT_BRUTEFORCE_BUDGET)
}

pub fn profile_bruteforce_budgeted(
    d: &Density1D,
    v: f64,
    k_max: usize,
    grid_stride: usize,
    budget: u64,
) -> Result<IsoResult> {
    check_v(v)?;
    if k_max == 0 || k_max > 2 {
        return domain(format!("k_max must be 1 or 2, got {k_max}"));
    }
    if grid_stride == 0 {
        return domain("grid_stride must be positive");
    }
    if let Some(mut r) = trivial(d, v) {
        r.method = Method::Bruteforce;
        return Ok(r);
    }
    let grid = d.grid();
    let mut idx: Vec<usize> = (0..=grid.m).step_by(grid_stride).collect();
    if *idx.last().unwrap() != grid.m {
        idx.push(grid.m);
    }
    let xs: Vec<f64> = idx.iter().map(|&i| grid.node(i)).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| d.cdf(x)).collect();
    let n = xs.len() - 1;
    // boundary weights: zero at the domain ends
    let hs: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| if i == 0 || i == n { 0.0 } else { d.eval(x) })
        .collect();
    let nn = xs.len() as u64;
    let estimate = if k_max == 2 { nn * nn * nn / 6 } else { nn * nn / 2 };
    if estimate > budget {
        return Err(Error::Resource(format!(
            "brute-force enumeration needs about {estimate} candidates, budget is {budget}"
        )));
    }
    let tol = BRUTEFORCE_MASS_TOL;
    let mut best: Option<(f64, Vec<(f64, f64)>)> = None;
    let mut consider = |val: f64, set: Vec<(f64, f64)>| {
        if best.as_ref().map_or(true, |b| val < b.0) {
            best = Some((val, set));
        }
    };
    // indices l > from with |fs[l] - target| ≤ tol
    let window = |from: usize, target: f64| {
        let lo = fs.partition_point(|&f| f < target - tol).max(from + 1);
        let hi = fs.partition_point(|&f| f <= target + tol);
        lo..hi.max(lo)
    };
    for i in 0..n {
        for j in window(i, fs[i] + v) {
            consider(hs[i] + hs[j], vec![(xs[i], xs[j])]);
        }
    }
    let mut work: u64 = 0;
    if k_max == 2 {
        // boundary weights are nonnegative, so partial sums bound the total
        let bound = |b: &Option<(f64, Vec<(f64, f64)>)>| b.as_ref().map_or(f64::INFINITY, |b| b.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let first = fs[j] - fs[i];
                if first > v + tol {
                    break;
                }
                if hs[i] + hs[j] >= bound(&best) {
                    continue;
                }
                for k in (j + 1)..n {
                    work += 1;
                    let target = fs[k] + v - first;
                    if target > 1.0 + tol {
                        break;
                    }
                    let partial = hs[i] + hs[j] + hs[k];
                    if partial >= bound(&best) {
                        continue;
                    }
                    for l in window(k, target) {
                        let val = partial + hs[l];
                        if val < bound(&best) {
                            best = Some((val, vec![(xs[i], xs[j]), (xs[k], xs[l])]));
                        }
                    }
                }
            }
            if work > budget {
                return Err(Error::Resource(format!(
                    "brute-force enumeration exceeded the budget of {budget} candidates"
                )));
            }
        }
    }
    let (value, set) = best.ok_or_else(|| {
        Error::Infeasible(format!(
            "no grid-aligned candidate has mass within {tol} of {v}"
        ))
    })?;
    Ok(IsoResult {
        v,
        value,
        minimizer: IntervalSet::new(set)?,
        method: Method::Bruteforce,
    })
}

/// Stride that leaves about `target_nodes` brute-force nodes on `d`'s grid.
pub fn stride_for(d: &Density1D, target_nodes: usize) -> usize {
    (d.grid().m / target_nodes.max(2)).max(1)
}

/// Largest stride whose node-to-node mass step stays within
/// `2·BRUTEFORCE_MASS_TOL`, so every target mass has a candidate in the window.
pub fn oracle_stride(d: &Density1D) -> usize {
    let per_node = d.grid().step() * d.max_value();
    ((2.0 * BRUTEFORCE_MASS_TOL / per_node).floor() as usize).max(1)
}

/// Tolerance `2Δ·Lip(h)` for comparing the structured search with the
/// brute-force oracle at the given stride.
pub fn oracle_tolerance(d: &Density1D, grid_stride: usize) -> f64 {
    2.0 * d.grid().step() * grid_stride as f64 * d.lipschitz_estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density1d::{measure, minkowski_content, Shape};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sin_density() -> Density1D {
        Density1D::closed_form(Shape::SinPow { rate: 1.0, power: 1.0 }, 0.0, PI).unwrap()
    }

    #[test]
    fn uniform_example() {
        let u = Density1D::closed_form(Shape::Constant, 0.0, 1.0).unwrap();
        let r = profile_structured(&u, 0.3).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert_eq!(r.method, Method::HalflineLeft);
        let (l, rr) = r.endpoints();
        assert_abs_diff_eq!(l, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rr, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn sin_half_mass() {
        let s = sin_density();
        let r = profile_structured(&s, 0.5).unwrap();
        assert_abs_diff_eq!(r.value, 0.5, epsilon = 1e-12);
        let (l, rr) = r.endpoints();
        // either half-line is a minimizer
        assert!((l.abs() < 1e-12 && (rr - PI / 2.0).abs() < 1e-9) || (l - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn trivial_volumes() {
        let s = sin_density();
        assert_eq!(profile_structured(&s, 0.0).unwrap().value, 0.0);
        assert_eq!(profile_structured(&s, 1.0).unwrap().value, 0.0);
        assert_eq!(profile_bruteforce(&s, 0.0, 2, 8).unwrap().value, 0.0);
        assert!(profile_structured(&s, 1.2).is_err());
    }

    #[test]
    fn result_invariants() {
        let d = Density1D::closed_form(Shape::CoshPow { rate: 1.0, power: 1.0 }, -1.0, 1.0).unwrap();
        for i in 1..20 {
            let v = i as f64 / 20.0;
            let r = profile_structured(&d, v).unwrap();
            assert_abs_diff_eq!(measure(&d, &r.minimizer).unwrap(), v, epsilon = 1e-6);
            assert_abs_diff_eq!(minkowski_content(&d, &r.minimizer).unwrap(), r.value, epsilon = 1e-9);
        }
    }

    #[test]
    fn bruteforce_uniform() {
        let u = Density1D::closed_form(Shape::Constant, 0.0, 1.0).unwrap();
        let r = profile_bruteforce(&u, 0.3, 2, 8).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert_eq!(r.minimizer.components().len(), 1);
    }

    #[test]
    fn bruteforce_agrees_on_sin() {
        let s = sin_density();
        let stride = stride_for(&s, 240);
        let tol = oracle_tolerance(&s, stride);
        let b = profile_bruteforce(&s, 0.5, 2, stride).unwrap();
        let r = profile_structured(&s, 0.5).unwrap();
        assert!((b.value - r.value).abs() <= tol, "{} vs {}", b.value, r.value);
    }

    #[test]
    fn bruteforce_budget() {
        let s = sin_density();
        assert!(matches!(
            profile_bruteforce_budgeted(&s, 0.5, 2, 1, 1000),
            Err(Error::Resource(_))
        ));
        assert!(profile_bruteforce(&s, 0.5, 3, 8).is_err());
    }

    #[test]
    fn complement_wins_for_u_shaped_density() {
        // mass concentrated at both ends: the complement of a middle interval
        // has boundary in the low-density middle.
        let vals: Vec<f64> = (0..=400)
            .map(|i| {
                let t = i as f64 / 400.0;
                1.0 + 40.0 * (t - 0.5) * (t - 0.5)
            })
            .collect();
        let d = Density1D::from_samples(0.0, 1.0, vals).unwrap();
        let r = profile_structured(&d, 0.9).unwrap();
        assert_eq!(r.method, Method::Complement);
    }
}
