//! Model isoperimetric profiles `I_{K,N,D}` built from the one-dimensional
//! Jacobian densities `J_{H,K,N}`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coeffs::ProfileParams;
use crate::density1d::{jacobian_base, Density1D, Shape};
use crate::error::{domain, Result};
use crate::iso1d::{profile_structured_with, IsoOptions};
use crate::numeric::{golden_section, scan_points_then_golden, scan_then_golden};

const WINDOW_GRID: usize = 64;
const WINDOW_CELLS: usize = 64;

/// Parameters of a Jacobian density `J_{H,K,N}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDensitySpec {
    pub h: f64,
    pub k: f64,
    pub n: f64,
}

impl ModelDensitySpec {
    pub fn new(h: f64, k: f64, n: f64) -> Result<Self> {
        if n.is_nan() || n < 1.0 || !n.is_finite() {
            return domain(format!("N must be finite and >= 1, got {n}"));
        }
        if !h.is_finite() || !k.is_finite() {
            return domain(format!("H and K must be finite, got H = {h}, K = {k}"));
        }
        Ok(ModelDensitySpec { h, k, n })
    }

    /// Open interval around `0` on which `J` is positive, bounded by the
    /// first nonpositive and first positive roots of `c_δ + H/(N−1)·s_δ`.
    /// For `N = 1` this is the support of the indicator.
    pub fn positive_interval(&self) -> (f64, f64) {
        let (h, k, n) = (self.h, self.k, self.n);
        if n == 1.0 {
            return if k > 0.0 {
                (0.0, 0.0)
            } else if h > 0.0 {
                (0.0, f64::INFINITY)
            } else if h < 0.0 {
                (f64::NEG_INFINITY, 0.0)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
        }
        let delta = k / (n - 1.0);
        if delta > 0.0 {
            // cos(√δ t) + λ sin(√δ t) ∝ cos(√δ t − φ)
            let r = delta.sqrt();
            let phi = (h / ((n - 1.0) * r)).atan();
            ((phi - FRAC_PI_2) / r, (phi + FRAC_PI_2) / r)
        } else if delta == 0.0 {
            let slope = h / (n - 1.0);
            if slope > 0.0 {
                (-1.0 / slope, f64::INFINITY)
            } else if slope < 0.0 {
                (f64::NEG_INFINITY, -1.0 / slope)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
        } else {
            // cosh(rt) + λ sinh(rt)
            let r = (-delta).sqrt();
            let lambda = h / ((n - 1.0) * r);
            if lambda > 1.0 {
                (-(1.0 / lambda).atanh() / r, f64::INFINITY)
            } else if lambda < -1.0 {
                (f64::NEG_INFINITY, (-1.0 / lambda).atanh() / r)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
        }
    }
}

/// Value of `J_{H,K,N}(t)` with the positive-part truncation applied.
pub fn jacobian_density(spec: &ModelDensitySpec, t: f64) -> Result<f64> {
    let spec = ModelDensitySpec::new(spec.h, spec.k, spec.n)?;
    let (lo, hi) = spec.positive_interval();
    if spec.n == 1.0 {
        let inside = if spec.k > 0.0 { t == 0.0 } else { spec.h * t >= 0.0 };
        return Ok(if inside { 1.0 } else { 0.0 });
    }
    if t <= lo || t >= hi {
        return Ok(0.0);
    }
    Ok(jacobian_base(spec.h, spec.k, spec.n, t).max(0.0).powf(spec.n - 1.0))
}

/// Which branch produced a model profile value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCase {
    /// `v ∈ {0, 1}` or `K ≤ 0` with unbounded diameter.
    Trivial,
    /// `K > 0`, `D` below the Bonnet-Myers diameter.
    Case1,
    /// `K > 0`, `D` at or above the Bonnet-Myers diameter.
    Case2,
    /// `K = 0`, `D < ∞`.
    Case3,
    /// `K < 0`, `D < ∞`.
    Case4,
    /// Double infimum over `(H, a)`.
    Infimum,
}

impl fmt::Display for ModelCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelCase::Trivial => "trivial",
            ModelCase::Case1 => "case1",
            ModelCase::Case2 => "case2",
            ModelCase::Case3 => "case3",
            ModelCase::Case4 => "case4",
            ModelCase::Infimum => "infimum",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    Dispatch,
    Infimum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub v: f64,
    pub value: f64,
    pub case: ModelCase,
    /// Parameters of the minimizing window, e.g. `xi=0.13` or `H=1;a=0.2`.
    pub argmin: String,
}

fn window_options() -> IsoOptions {
    IsoOptions {
        scan_samples: 13,
        golden_iters: 24,
    }
}

/// Profile at `v` of the normalized density proportional to `shape` on
/// `[lo, hi]`; `+∞` if the window carries no mass.
fn window_profile(shape: Shape, lo: f64, hi: f64, v: f64, opts: &IsoOptions) -> f64 {
    if !(hi > lo) {
        return f64::INFINITY;
    }
    match Density1D::closed_form_with(shape, lo, hi, WINDOW_GRID, WINDOW_CELLS) {
        Ok(d) => profile_structured_with(&d, v, opts)
            .map(|r| r.value)
            .unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    }
}

fn xi_cap(p: &ProfileParams) -> f64 {
    50.0 * p.d.max(1.0) / (p.k.abs() + 1.0).sqrt()
}

/// Sample points `{0} ∪ logspace(lo_scale, hi)` shifted by `start`.
fn log_points(start: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = hi - start;
    let first = (span * 1e-5).max(1e-12);
    let mut xs = vec![start];
    for i in 0..count {
        let s = first * (span / first).powf(i as f64 / (count - 1) as f64);
        xs.push(start + s);
    }
    xs
}

fn minimize_over<F: FnMut(f64) -> f64>(mut f: F, points: &[f64]) -> (f64, f64) {
    if points.len() == 1 {
        let v = f(points[0]);
        return (points[0], v);
    }
    scan_points_then_golden(&mut f, points, 60)
}

/// Model profile `I_{K,N,D}(v)` by dispatch on the four explicit cases.
pub fn model_profile(k: f64, n: f64, d: f64, v: f64) -> Result<ModelProfile> {
    model_profile_mode(k, n, d, v, ProfileMode::Dispatch)
}

pub fn model_profile_mode(k: f64, n: f64, d: f64, v: f64, mode: ProfileMode) -> Result<ModelProfile> {
    let p = ProfileParams::new(k, n, d)?;
    if v.is_nan() || !(0.0..=1.0).contains(&v) {
        return domain(format!("volume v must lie in [0,1], got {v}"));
    }
    if n == 1.0 && k > 0.0 {
        return domain("K > 0 with N = 1 forces a one-point space; the profile is undefined");
    }
    let trivial = |case| ModelProfile {
        v,
        value: 0.0,
        case,
        argmin: String::new(),
    };
    if v == 0.0 || v == 1.0 {
        return Ok(trivial(ModelCase::Trivial));
    }
    if k <= 0.0 && d.is_infinite() {
        return Ok(trivial(ModelCase::Trivial));
    }
    match mode {
        ProfileMode::Dispatch => dispatch(&p, v),
        ProfileMode::Infimum => infimum(&p, v),
    }
}

fn dispatch(p: &ProfileParams, v: f64) -> Result<ModelProfile> {
    let opts = IsoOptions::default();
    let (k, n, d) = (p.k, p.n, p.d);
    let found = |case, value, argmin: String| {
        Ok(ModelProfile {
            v,
            value,
            case,
            argmin,
        })
    };
    if n == 1.0 {
        // every admissible density is a constant on a window of length D
        let case = if k == 0.0 { ModelCase::Case3 } else { ModelCase::Case4 };
        let value = window_profile(Shape::Constant, 0.0, d, v, &opts);
        return found(case, value, "family=flat".into());
    }
    if k > 0.0 {
        let bm = p.bonnet_myers().unwrap();
        let rate = (k / (n - 1.0)).sqrt();
        let shape = Shape::SinPow { rate, power: n - 1.0 };
        if d >= bm {
            let value = window_profile(shape, 0.0, bm, v, &opts);
            return found(ModelCase::Case2, value, "xi=0".into());
        }
        // windows [ξ, ξ+D] inside the hump; reflection ξ ↦ L−D−ξ preserves the profile
        let half = 0.5 * (bm - d);
        let pts: Vec<f64> = (0..=24).map(|i| half * i as f64 / 24.0).collect();
        let (xi, value) = minimize_over(|xi| window_profile(shape.clone(), xi, xi + d, v, &opts), &pts);
        return found(ModelCase::Case1, value, format!("xi={}", short(xi)));
    }
    let cap = xi_cap(p);
    if k == 0.0 {
        let flat = window_profile(Shape::Constant, 0.0, d, v, &opts);
        let shape = Shape::Pow { power: n - 1.0 };
        let pts = log_points(0.0, cap, 40);
        let (xi, value) = minimize_over(|xi| window_profile(shape.clone(), xi, xi + d, v, &opts), &pts);
        return if flat <= value {
            found(ModelCase::Case3, flat, "family=flat".into())
        } else {
            found(ModelCase::Case3, value, format!("xi={}", short(xi)))
        };
    }
    let r = (-k / (n - 1.0)).sqrt();
    let exp_rate = (-k * (n - 1.0)).sqrt();
    let mut best = (
        window_profile(Shape::Exp { rate: exp_rate }, 0.0, d, v, &opts),
        "family=exp".to_string(),
    );
    let sinh = Shape::SinhPow { rate: r, power: n - 1.0 };
    let pts = log_points(0.0, cap, 40);
    let (xi, value) = minimize_over(|xi| window_profile(sinh.clone(), xi, xi + d, v, &opts), &pts);
    if value < best.0 {
        best = (value, format!("family=sinh;xi={}", short(xi)));
    }
    // cosh windows, parametrized by the window center c = ξ + D/2 ≥ 0
    let cosh = Shape::CoshPow { rate: r, power: n - 1.0 };
    let (c, value) = minimize_over(
        |c| window_profile(cosh.clone(), c - 0.5 * d, c + 0.5 * d, v, &opts),
        &pts,
    );
    if value < best.0 {
        best = (value, format!("family=cosh;xi={}", short(c - 0.5 * d)));
    }
    found(ModelCase::Case4, best.0, best.1)
}

fn short(x: f64) -> String {
    format!("{x:.6e}")
}

/// Profile of the window `[−a, D−a]` of `J_{H,K,N}`, truncated to the
/// positive interval of `J`.
fn jacobian_window_profile(spec: &ModelDensitySpec, a: f64, d: f64, v: f64, opts: &IsoOptions) -> f64 {
    let (r0, r1) = spec.positive_interval();
    let lo = (-a).max(r0);
    let hi = (d - a).min(r1);
    if !(hi - lo > 1e-9 * d) {
        return f64::INFINITY;
    }
    let shape = if spec.n == 1.0 {
        Shape::Constant
    } else {
        Shape::Jacobian {
            h: spec.h,
            k: spec.k,
            n: spec.n,
        }
    };
    window_profile(shape, lo, hi, v, opts)
}

fn infimum(p: &ProfileParams, v: f64) -> Result<ModelProfile> {
    let opts = window_options();
    let (k, n) = (p.k, p.n);
    let d = p.effective_diameter();
    let inner = |h: f64| {
        let spec = ModelDensitySpec { h, k, n };
        scan_then_golden(|a| jacobian_window_profile(&spec, a, d, v, &opts), 0.0, d, 9, 20)
    };
    let mut hs: Vec<f64> = (-3..=3).rev().map(|e| -(10f64).powi(e)).collect();
    hs.push(0.0);
    hs.extend((-3..=3).map(|e| (10f64).powi(e)));
    let evals: Vec<(f64, f64)> = hs.iter().map(|&h| inner(h)).collect();
    let best_i = (0..hs.len())
        .min_by(|&i, &j| evals[i].1.total_cmp(&evals[j].1))
        .unwrap();
    let edge = FRAC_PI_2 - 1e-9;
    let alpha_lo = if best_i == 0 { -edge } else { hs[best_i - 1].atan() };
    let alpha_hi = if best_i + 1 == hs.len() { edge } else { hs[best_i + 1].atan() };
    let mut best = (hs[best_i], evals[best_i].0, evals[best_i].1);
    let (alpha, _) = golden_section(|al| inner(al.tan()).1, alpha_lo, alpha_hi, 16);
    let h = alpha.tan();
    let (a, value) = inner(h);
    if value < best.2 {
        best = (h, a, value);
    }
    Ok(ModelProfile {
        v,
        value: best.2,
        case: ModelCase::Infimum,
        argmin: format!("H={};a={}", short(best.0), short(best.1)),
    })
}

/// Maps [`model_profile_mode`] over a list of volumes.
pub fn profile_curve(
    k: f64,
    n: f64,
    d: f64,
    v_grid: &[f64],
    mode: ProfileMode,
) -> Result<Vec<ModelProfile>> {
    v_grid
        .iter()
        .map(|&v| model_profile_mode(k, n, d, v, mode))
        .collect()
}

/// `N/D · inf_{ξ≥0} (w(ξ+1)^N + (1−w)ξ^N)^{(N−1)/N} / ((ξ+1)^N − ξ^N)` with
/// `w = min(v, 1−v)`, including the `ξ → ∞` limit `1/D`.
pub fn case3_closed_form(n: f64, d: f64, v: f64) -> Result<f64> {
    let p = ProfileParams::new(0.0, n, d)?;
    if v.is_nan() || !(0.0..=1.0).contains(&v) {
        return domain(format!("volume v must lie in [0,1], got {v}"));
    }
    if v == 0.0 || v == 1.0 {
        return Ok(0.0);
    }
    if d.is_infinite() {
        return Ok(0.0);
    }
    let w = v.min(1.0 - v);
    let g = |xi: f64| {
        let a = (xi + 1.0).powf(n);
        let b = xi.powf(n);
        (w * a + (1.0 - w) * b).powf((n - 1.0) / n) / (a - b)
    };
    let cap = xi_cap(&p) / d;
    let pts = log_points(0.0, cap, 40);
    let (_, inf) = minimize_over(g, &pts);
    Ok((n / d) * inf.min(1.0 / n))
}

/// Normalized model density `c·sin^{N−1}(√(K/(N−1))·t)` on its full hump.
pub fn sphere_density(k: f64, n: f64) -> Result<Density1D> {
    if !(k > 0.0 && n > 1.0) {
        return domain("sphere density needs K > 0 and N > 1");
    }
    let rate = (k / (n - 1.0)).sqrt();
    Ok(Density1D::closed_form(Shape::SinPow { rate, power: n - 1.0 }, 0.0, PI / rate)?.with_claim(k, n))
}
