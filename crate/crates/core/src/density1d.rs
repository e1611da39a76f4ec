//! Probability densities on a closed interval.
//!
//! A [`Density1D`] always carries samples on a uniform grid (used by the
//! curvature test and for file output). Sampled densities are represented by
//! the piecewise-linear interpolant of those samples, and their mass and CDF
//! are exact integrals of that interpolant. Closed-form densities are
//! evaluated analytically and integrated with graded Gauss-Legendre panels.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coeffs::{c_delta, s_delta, sigma, Extended};
use crate::error::{domain, Error, Result};
use crate::numeric::{cumulative, gauss_legendre, graded_edges, locate};

pub const DEFAULT_GRID_INTERVALS: usize = 2000;
pub const DEFAULT_QUAD_CELLS: usize = 256;
const QUAD_GRADING: usize = 30;

/// Uniform grid `a = t_0 < … < t_m = b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub a: f64,
    pub b: f64,
    /// Number of intervals (`m + 1` nodes).
    pub m: usize,
}

impl UniformGrid {
    pub fn new(a: f64, b: f64, m: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return domain(format!("grid needs finite a < b, got [{a}, {b}]"));
        }
        if m < 1 {
            return domain("grid needs at least one interval");
        }
        Ok(UniformGrid { a, b, m })
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.m as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.m {
            self.b
        } else {
            self.a + self.step() * i as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.m).map(move |i| self.node(i))
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }
}

/// Analytic (unnormalized) density shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Constant,
    /// `sin(rate·t)^power` where the sine is positive, `0` elsewhere.
    SinPow { rate: f64, power: f64 },
    /// `t^power` for `t ≥ 0`.
    Pow { power: f64 },
    /// `sinh(rate·t)^power` for `t ≥ 0`.
    SinhPow { rate: f64, power: f64 },
    /// `cosh(rate·t)^power`.
    CoshPow { rate: f64, power: f64 },
    /// `exp(rate·t)`.
    Exp { rate: f64 },
    /// Jacobian `(c_δ(t) + H/(N−1)·s_δ(t))^{N−1}` with `δ = K/(N−1)`, `N > 1`.
    /// The positive-part truncation is applied by the caller's choice of
    /// support; outside the positive region the value is 0.
    Jacobian { h: f64, k: f64, n: f64 },
}

fn ln_sinh(x: f64) -> f64 {
    // x > 0
    if x > 20.0 {
        x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
    } else {
        x.sinh().ln()
    }
}

fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
}

impl Shape {
    /// Natural log of the unnormalized density (`-∞` where it vanishes).
    pub fn ln_value(&self, t: f64) -> f64 {
        match *self {
            Shape::Constant => 0.0,
            Shape::SinPow { rate, power } => {
                let s = (rate * t).sin();
                if s > 0.0 && (0.0..=PI).contains(&(rate * t)) {
                    power * s.ln()
                } else if power == 0.0 && (0.0..=PI).contains(&(rate * t)) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Shape::Pow { power } => {
                if t > 0.0 {
                    power * t.ln()
                } else if t == 0.0 && power == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Shape::SinhPow { rate, power } => {
                let x = rate * t;
                if x > 0.0 {
                    power * ln_sinh(x)
                } else if x == 0.0 && power == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Shape::CoshPow { rate, power } => power * ln_cosh(rate * t),
            Shape::Exp { rate } => rate * t,
            Shape::Jacobian { h, k, n } => {
                let g = jacobian_base(h, k, n, t);
                if g > 0.0 {
                    (n - 1.0) * g.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.ln_value(t).exp()
    }
}

/// `c_δ(t) + H/(N−1)·s_δ(t)` with `δ = K/(N−1)`.
pub(crate) fn jacobian_base(h: f64, k: f64, n: f64, t: f64) -> f64 {
    let delta = k / (n - 1.0);
    c_delta(t, delta) + h / (n - 1.0) * s_delta(t, delta)
}

/// A `(K, N)` pair a density is claimed to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdClaim {
    pub k: f64,
    pub n: f64,
}

#[derive(Clone, Debug)]
struct ClosedForm {
    shape: Shape,
    ln_ref: f64,
    inv_z: f64,
}

#[derive(Clone, Debug)]
enum Cdf {
    /// Cumulative mass of the linear interpolant at the grid nodes.
    Linear(Vec<f64>),
    /// Cumulative mass at quadrature panel edges.
    Panels { edges: Vec<f64>, cum: Vec<f64> },
}

/// Probability density on `[a, b]`.
#[derive(Clone, Debug)]
pub struct Density1D {
    grid: UniformGrid,
    values: Vec<f64>,
    closed: Option<ClosedForm>,
    cdf: Cdf,
    raw_mass: f64,
    claim: Option<CdClaim>,
}

fn check_support_interval(values: &[f64]) -> Result<()> {
    let first = values.iter().position(|&v| v > 0.0);
    let last = values.iter().rposition(|&v| v > 0.0);
    match (first, last) {
        (Some(f), Some(l)) => {
            if let Some(gap) = values[f..=l].iter().position(|&v| v <= 0.0) {
                return domain(format!(
                    "support is not an interval: zero sample at index {} inside the support",
                    f + gap
                ));
            }
            Ok(())
        }
        _ => domain("density has zero mass"),
    }
}

impl Density1D {
    /// Builds a density from samples on a uniform grid over `[a, b]` and
    /// normalizes it to unit mass.
    pub fn from_samples(a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return domain("need at least two samples");
        }
        let grid = UniformGrid::new(a, b, values.len() - 1)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return domain(format!("density samples must be finite and nonnegative, got {v}"));
        }
        check_support_interval(&values)?;
        let dt = grid.step();
        let mut cum = Vec::with_capacity(values.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for w in values.windows(2) {
            acc += 0.5 * dt * (w[0] + w[1]);
            cum.push(acc);
        }
        let mass = acc;
        if !(mass > 0.0) {
            return domain("density has zero mass");
        }
        let values: Vec<f64> = values.into_iter().map(|v| v / mass).collect();
        for c in cum.iter_mut() {
            *c /= mass;
        }
        Ok(Density1D {
            grid,
            values,
            closed: None,
            cdf: Cdf::Linear(cum),
            raw_mass: mass,
            claim: None,
        })
    }

    /// Closed-form density proportional to `shape` on `[a, b]`.
    pub fn closed_form(shape: Shape, a: f64, b: f64) -> Result<Self> {
        Self::closed_form_with(shape, a, b, DEFAULT_GRID_INTERVALS, DEFAULT_QUAD_CELLS)
    }

    pub fn closed_form_with(
        shape: Shape,
        a: f64,
        b: f64,
        grid_intervals: usize,
        quad_cells: usize,
    ) -> Result<Self> {
        let grid = UniformGrid::new(a, b, grid_intervals)?;
        let edges = graded_edges(a, b, quad_cells, QUAD_GRADING);
        let ln_ref = grid
            .nodes()
            .chain(edges.iter().copied())
            .map(|t| shape.ln_value(t))
            .fold(f64::NEG_INFINITY, f64::max);
        if !ln_ref.is_finite() {
            return domain(format!("shape {shape:?} vanishes on [{a}, {b}]"));
        }
        let f = |t: f64| (shape.ln_value(t) - ln_ref).exp();
        let mut cum = cumulative(&f, &edges);
        let z = *cum.last().unwrap();
        if !(z > 0.0) || !z.is_finite() {
            return domain(format!("shape {shape:?} has no finite positive mass on [{a}, {b}]"));
        }
        for c in cum.iter_mut() {
            *c /= z;
        }
        let inv_z = 1.0 / z;
        let values: Vec<f64> = grid.nodes().map(|t| f(t) * inv_z).collect();
        check_support_interval(&values)?;
        Ok(Density1D {
            grid,
            values,
            closed: Some(ClosedForm { shape, ln_ref, inv_z }),
            cdf: Cdf::Panels { edges, cum },
            raw_mass: z * ln_ref.exp(),
            claim: None,
        })
    }

    /// Attaches the `(K, N)` pair this density is meant to satisfy.
    pub fn with_claim(mut self, k: f64, n: f64) -> Self {
        self.claim = Some(CdClaim { k, n });
        self
    }

    pub fn claim(&self) -> Option<CdClaim> {
        self.claim
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn a(&self) -> f64 {
        self.grid.a
    }

    pub fn b(&self) -> f64 {
        self.grid.b
    }

    /// Normalized samples at the grid nodes.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mass of the input before normalization (samples or unnormalized shape).
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn shape(&self) -> Option<&Shape> {
        self.closed.as_ref().map(|c| &c.shape)
    }

    pub fn is_closed_form(&self) -> bool {
        self.closed.is_some()
    }

    /// Normalized density at `t`; `0` outside `[a, b]`.
    pub fn eval(&self, t: f64) -> f64 {
        if !(t >= self.grid.a && t <= self.grid.b) {
            return 0.0;
        }
        match &self.closed {
            Some(c) => (c.shape.ln_value(t) - c.ln_ref).exp() * c.inv_z,
            None => {
                let dt = self.grid.step();
                let x = (t - self.grid.a) / dt;
                let i = (x.floor() as usize).min(self.grid.m - 1);
                let s = x - i as f64;
                self.values[i] * (1.0 - s) + self.values[i + 1] * s
            }
        }
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.grid.a {
            return 0.0;
        }
        if x >= self.grid.b {
            return 1.0;
        }
        match &self.cdf {
            Cdf::Linear(cum) => {
                let dt = self.grid.step();
                let i = (((x - self.grid.a) / dt).floor() as usize).min(self.grid.m - 1);
                let s = x - self.grid.node(i);
                let (h0, h1) = (self.values[i], self.values[i + 1]);
                (cum[i] + h0 * s + (h1 - h0) * s * s / (2.0 * dt)).clamp(0.0, 1.0)
            }
            Cdf::Panels { edges, cum } => {
                let i = locate(edges, x);
                let f = |t: f64| self.eval(t);
                (cum[i] + gauss_legendre(&f, edges[i], x)).clamp(0.0, 1.0)
            }
        }
    }

    /// Smallest `x` with `cdf(x) ≥ p` (up to round-off).
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.grid.a;
        }
        match &self.cdf {
            Cdf::Linear(cum) => {
                if p >= 1.0 {
                    let last = self.values.iter().rposition(|&v| v > 0.0).unwrap_or(self.grid.m);
                    return self.grid.node((last + 1).min(self.grid.m));
                }
                let i = cum.partition_point(|&c| c < p).saturating_sub(1).min(self.grid.m - 1);
                let dt = self.grid.step();
                let (h0, h1) = (self.values[i], self.values[i + 1]);
                let r = (p - cum[i]).max(0.0);
                let c = (h1 - h0) / dt;
                let disc = (h0 * h0 + 2.0 * c * r).max(0.0);
                let denom = h0 + disc.sqrt();
                let s = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
                (self.grid.node(i) + s.min(dt)).min(self.grid.b)
            }
            Cdf::Panels { edges, cum } => {
                let p = p.min(1.0);
                let i = cum.partition_point(|&c| c < p).saturating_sub(1).min(edges.len() - 2);
                let (mut lo, mut hi) = (edges[i], edges[i + 1]);
                let span = cum[i + 1] - cum[i];
                if span <= 0.0 {
                    return lo;
                }
                let f = |t: f64| self.eval(t);
                let mut x = lo + (p - cum[i]) / span * (hi - lo);
                for _ in 0..60 {
                    let fx = cum[i] + gauss_legendre(&f, edges[i], x) - p;
                    if fx == 0.0 {
                        break;
                    }
                    if fx < 0.0 {
                        lo = x;
                    } else {
                        hi = x;
                    }
                    let h = self.eval(x);
                    let newton = x - fx / h;
                    let next = if h > 0.0 && newton > lo && newton < hi {
                        newton
                    } else {
                        0.5 * (lo + hi)
                    };
                    let done = (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-15 * (1.0 + x.abs());
                    x = next;
                    if done {
                        break;
                    }
                }
                x
            }
        }
    }

    /// Smallest and largest grid nodes carrying positive density.
    pub fn support_nodes(&self) -> (usize, usize) {
        let f = self.values.iter().position(|&v| v > 0.0).unwrap_or(0);
        let l = self.values.iter().rposition(|&v| v > 0.0).unwrap_or(self.grid.m);
        (f, l)
    }

    /// Closed support `[l, r]` of the density as seen on the grid.
    pub fn support(&self) -> (f64, f64) {
        let (f, l) = self.support_nodes();
        let lo = if f > 0 { self.grid.node(f - 1) } else { self.grid.a };
        let hi = if l < self.grid.m { self.grid.node(l + 1) } else { self.grid.b };
        (lo, hi)
    }

    /// Largest slope of the sampled density (Lipschitz estimate).
    pub fn lipschitz_estimate(&self) -> f64 {
        let dt = self.grid.step();
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / dt)
            .fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Samples on the nodes `i0..=i1`, renormalized.
    pub fn restrict_to_nodes(&self, i0: usize, i1: usize) -> Result<Density1D> {
        if i1 <= i0 || i1 > self.grid.m {
            return domain(format!("invalid node range {i0}..={i1}"));
        }
        Density1D::from_samples(
            self.grid.node(i0),
            self.grid.node(i1),
            self.values[i0..=i1].to_vec(),
        )
    }

    /// Restriction to the grid nodes lying in `[l, r]`, renormalized.
    pub fn restrict(&self, l: f64, r: f64) -> Result<Density1D> {
        let dt = self.grid.step();
        let i0 = ((l - self.grid.a) / dt - 1e-9).ceil().max(0.0) as usize;
        let i1 = (((r - self.grid.a) / dt + 1e-9).floor() as usize).min(self.grid.m);
        self.restrict_to_nodes(i0, i1)
    }

    /// Same density translated by `shift`.
    pub fn translated(&self, shift: f64) -> Result<Density1D> {
        Density1D::from_samples(self.grid.a + shift, self.grid.b + shift, self.values.clone())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
        w.write_record(["t", "h"]).map_err(|e| Error::Parse(e.to_string()))?;
        for (t, h) in self.grid.nodes().zip(self.values.iter()) {
            w.write_record([crate::report::fmt_num(t), crate::report::fmt_num(*h)])
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a two-column `t,h` CSV with header; rejects non-uniform spacing.
    pub fn read_csv(path: &Path) -> Result<Density1D> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.len() != 2 || headers[0].trim() != "t" || headers[1].trim() != "h" {
            return Err(Error::Parse(format!("expected header `t,h`, got {headers:?}")));
        }
        let mut ts = Vec::new();
        let mut hs = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
            };
            ts.push(parse(&rec[0])?);
            hs.push(parse(&rec[1])?);
        }
        if ts.len() < 2 {
            return Err(Error::Parse("density file needs at least two rows".into()));
        }
        let a = ts[0];
        let b = *ts.last().unwrap();
        let dt = (b - a) / (ts.len() - 1) as f64;
        for (i, &t) in ts.iter().enumerate() {
            let expected = a + dt * i as f64;
            if (t - expected).abs() > 1e-6 * dt.abs() {
                return Err(Error::Parse(format!(
                    "non-uniform spacing at row {i}: t = {t}, expected {expected}"
                )));
            }
        }
        Density1D::from_samples(a, b, hs)
    }
}

/// Finite union of disjoint closed intervals, sorted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    components: Vec<(f64, f64)>,
}

impl IntervalSet {
    /// Sorts and merges overlapping or touching components.
    pub fn new(mut components: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(l, r)) = components.iter().find(|(l, r)| !(l <= r)) {
            return domain(format!("interval [{l}, {r}] has l > r"));
        }
        components.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(components.len());
        for (l, r) in components {
            match merged.last_mut() {
                Some(last) if l <= last.1 => last.1 = last.1.max(r),
                _ => merged.push((l, r)),
            }
        }
        Ok(IntervalSet { components: merged })
    }

    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn interval(l: f64, r: f64) -> Result<Self> {
        IntervalSet::new(vec![(l, r)])
    }

    pub fn components(&self) -> &[(f64, f64)] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

fn check_inside(d: &Density1D, set: &IntervalSet) -> Result<()> {
    let tol = 1e-9 * d.grid.len();
    for &(l, r) in set.components() {
        if l < d.a() - tol || r > d.b() + tol {
            return domain(format!(
                "set component [{l}, {r}] exceeds the domain [{}, {}]",
                d.a(),
                d.b()
            ));
        }
    }
    Ok(())
}

/// `μ(A)` for a finite interval union.
pub fn measure(d: &Density1D, set: &IntervalSet) -> Result<f64> {
    check_inside(d, set)?;
    let m: f64 = set.components().iter().map(|&(l, r)| d.cdf(r) - d.cdf(l)).sum();
    Ok(m.clamp(0.0, 1.0))
}

/// Minkowski content `μ⁺(A)` of a finite interval union.
///
/// Each boundary point of `A` with room to grow on its outer side inside
/// `[a, b]` contributes the density value there; boundary points on the
/// domain ends contribute nothing.
pub fn minkowski_content(d: &Density1D, set: &IntervalSet) -> Result<f64> {
    check_inside(d, set)?;
    let tol = 1e-12 * d.grid.len();
    let mut total = 0.0;
    for &(l, r) in set.components() {
        if l > d.a() + tol {
            total += d.eval(l);
        }
        if r < d.b() - tol {
            total += d.eval(r);
        }
    }
    Ok(total)
}

/// Outcome of the curvature-dimension test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CdVerdict {
    Pass { worst_violation: f64 },
    Fail(CdWitness),
}

impl CdVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, CdVerdict::Pass { .. })
    }

    pub fn worst_violation(&self) -> f64 {
        match self {
            CdVerdict::Pass { worst_violation } => *worst_violation,
            CdVerdict::Fail(w) => w.violation,
        }
    }
}

/// Worst-violating pair of the midpoint inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdWitness {
    pub t0: f64,
    pub t1: f64,
    /// `h(mid)^{1/(N−1)}`.
    pub lhs: f64,
    /// `σ^{(1/2)}_{K,N−1}(t1 − t0)·(h(t0)^{1/(N−1)} + h(t1)^{1/(N−1)})`; may be `+∞`.
    pub rhs: f64,
    pub violation: f64,
}

/// Default tolerance `1e−6·(1 + max h)`.
pub fn default_cd_tol(d: &Density1D) -> f64 {
    1e-6 * (1.0 + d.max_value())
}

/// Synthetic CD(K, N) test of a density on its grid.
///
/// For `N > 1` checks the midpoint form of the distorted concavity
/// inequality on every pair of support nodes with an even index gap. For
/// `N = 1` the density must be constant on its support.
pub fn check_cd(d: &Density1D, k: f64, n: f64, tol: f64) -> Result<CdVerdict> {
    if n.is_nan() || n < 1.0 {
        return domain(format!("check_cd requires N >= 1, got {n}"));
    }
    let (i0, i1) = d.support_nodes();
    let vals = &d.values[i0..=i1];
    let grid = d.grid();
    if n == 1.0 {
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = max - min;
        return Ok(if spread <= tol {
            CdVerdict::Pass { worst_violation: spread }
        } else {
            let imax = vals.iter().position(|&v| v == max).unwrap();
            let imin = vals.iter().position(|&v| v == min).unwrap();
            let (a, b) = (imax.min(imin), imax.max(imin));
            CdVerdict::Fail(CdWitness {
                t0: grid.node(i0 + a),
                t1: grid.node(i0 + b),
                lhs: min,
                rhs: max,
                violation: spread,
            })
        });
    }
    let p = 1.0 / (n - 1.0);
    let powered: Vec<f64> = vals.iter().map(|v| v.powf(p)).collect();
    let len = powered.len();
    let dt = grid.step();
    // σ^{(1/2)}_{K,N−1} depends only on the index gap.
    let coeff: Vec<Extended> = (0..len)
        .map(|gap| sigma(0.5, gap as f64 * dt, k, n - 1.0))
        .collect::<Result<_>>()?;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for i in 0..len {
        for j in ((i + 2)..len).step_by(2) {
            let gap = j - i;
            let sum = powered[i] + powered[j];
            let rhs = coeff[gap].scale(sum).to_f64();
            let lhs = powered[(i + j) / 2];
            let violation = rhs - lhs;
            if violation > worst {
                worst = violation;
                witness = Some(CdWitness {
                    t0: grid.node(i0 + i),
                    t1: grid.node(i0 + j),
                    lhs,
                    rhs,
                    violation,
                });
            }
        }
    }
    Ok(match witness {
        Some(w) if w.violation > tol => CdVerdict::Fail(w),
        Some(w) => CdVerdict::Pass { worst_violation: w.violation },
        None => CdVerdict::Pass { worst_violation: 0.0 },
    })
}

/// Counts violations of the measure-contraction ratio bounds
/// `(s_δ(b−t1)/s_δ(b−t0))^{N−1} ≤ h(t1)/h(t0) ≤ (s_δ(t1−a)/s_δ(t0−a))^{N−1}`
/// on pairs of support nodes strictly inside `(a, b)`, sampled every
/// `stride` nodes. Returns `(violations, pairs_checked, worst_excess)`.
pub fn mcp_ratio_violations(
    d: &Density1D,
    k: f64,
    n: f64,
    tol: f64,
    stride: usize,
) -> Result<(usize, usize, f64)> {
    if n.is_nan() || n <= 1.0 {
        return domain(format!("ratio bounds need N > 1, got {n}"));
    }
    let delta = k / (n - 1.0);
    let (i0, i1) = d.support_nodes();
    let grid = d.grid();
    let (a, b) = (grid.node(i0), grid.node(i1));
    let stride = stride.max(1);
    let mut violations = 0;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let idx: Vec<usize> = ((i0 + 1)..i1).step_by(stride).collect();
    for (p, &u) in idx.iter().enumerate() {
        for &w in &idx[p + 1..] {
            let (t0, t1) = (grid.node(u), grid.node(w));
            let (h0, h1) = (d.values[u], d.values[w]);
            if h0 <= 0.0 {
                continue;
            }
            let lo = (s_delta(b - t1, delta) / s_delta(b - t0, delta)).powf(n - 1.0);
            let hi = (s_delta(t1 - a, delta) / s_delta(t0 - a, delta)).powf(n - 1.0);
            if !(lo.is_finite() && hi.is_finite()) {
                continue;
            }
            let ratio = h1 / h0;
            checked += 1;
            let excess = (lo - ratio).max(ratio - hi);
            worst = worst.max(excess);
            if excess > tol {
                violations += 1;
            }
        }
    }
    Ok((violations, checked, worst))
}

/// Bump `ψ(x) ∝ exp(−1/(1−(2x−1)²))` on `(0, 1)` (unnormalized).
fn bump(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let y = 2.0 * x - 1.0;
    (-1.0 / (1.0 - y * y)).exp()
}

/// Result of [`mollify`].
#[derive(Clone, Debug)]
pub struct Mollified {
    pub density: Density1D,
    /// Mass of `(h^{1/(N−1)} ∗ ψ_ε)^{N−1}` before renormalization.
    pub scale: f64,
}

const MOLLIFIER_PANELS: usize = 48;

/// Nonlinear mollification `h_ε = (h^{1/(N−1)} ∗ ψ_ε)^{N−1}` sampled on the
/// enlarged interval `[a − ε, b + ε]` with the input grid spacing.
pub fn mollify(d: &Density1D, eps: f64, n: f64) -> Result<Mollified> {
    if eps.is_nan() || eps <= 0.0 {
        return domain(format!("eps must be positive, got {eps}"));
    }
    if n.is_nan() || n <= 1.0 {
        return domain(format!("mollify requires N > 1, got {n}"));
    }
    let p = 1.0 / (n - 1.0);
    let norm = {
        let edges: Vec<f64> = (0..=MOLLIFIER_PANELS)
            .map(|i| i as f64 / MOLLIFIER_PANELS as f64)
            .collect();
        *cumulative(&bump, &edges).last().unwrap()
    };
    let dt = d.grid.step();
    let lo = d.a() - eps;
    let hi = d.b() + eps;
    let m = ((hi - lo) / dt).round().max(2.0) as usize;
    let grid = UniformGrid::new(lo, hi, m)?;
    let panel = eps / MOLLIFIER_PANELS as f64;
    let values: Vec<f64> = grid
        .nodes()
        .map(|t| {
            let integrand = |s: f64| d.eval(t - s).powf(p) * bump(s / eps) / (eps * norm);
            let conv: f64 = (0..MOLLIFIER_PANELS)
                .map(|k| gauss_legendre(&integrand, panel * k as f64, panel * (k + 1) as f64))
                .sum();
            conv.max(0.0).powf(n - 1.0)
        })
        .collect();
    let density = Density1D::from_samples(lo, hi, values)?;
    let scale = density.raw_mass();
    Ok(Mollified { density, scale })
}

/// Sup-norm distance between two densities over the union of their grids.
pub fn sup_distance(d1: &Density1D, d2: &Density1D) -> f64 {
    d1.grid
        .nodes()
        .chain(d2.grid.nodes())
        .map(|t| (d1.eval(t) - d2.eval(t)).abs())
        .fold(0.0, f64::max)
}

/// Named closed-form densities: `uniform`, `sin`, `sin2`, `linear`, `cosh`,
/// `exp`, and the parametric `sinpow:K=..,N=..`. Each carries the `(K, N)`
/// pair it satisfies with equality or strictly.
pub fn named_density(spec: &str) -> Result<Density1D> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n.trim(), p),
        None => (spec.trim(), ""),
    };
    let mut kv = std::collections::BTreeMap::new();
    for item in params.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got {item:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad value for {k}: {e}")))?;
        kv.insert(k.trim().to_string(), v);
    }
    let get = |key: &str| {
        kv.get(key)
            .copied()
            .ok_or_else(|| Error::Parse(format!("density {name} needs parameter {key}")))
    };
    let d = match name {
        "uniform" => Density1D::closed_form(Shape::Constant, 0.0, 1.0)?.with_claim(0.0, 2.0),
        "sin" => Density1D::closed_form(Shape::SinPow { rate: 1.0, power: 1.0 }, 0.0, PI)?
            .with_claim(1.0, 2.0),
        "sin2" => Density1D::closed_form(Shape::SinPow { rate: 1.0, power: 2.0 }, 0.0, PI)?
            .with_claim(2.0, 3.0),
        "linear" => Density1D::closed_form(Shape::Pow { power: 1.0 }, 0.0, 1.0)?.with_claim(0.0, 2.0),
        "cosh" => Density1D::closed_form(Shape::CoshPow { rate: 1.0, power: 1.0 }, -1.0, 1.0)?
            .with_claim(-1.0, 2.0),
        "exp" => Density1D::closed_form(Shape::Exp { rate: 1.0 }, 0.0, 1.0)?.with_claim(-1.0, 2.0),
        "sinpow" => {
            let (k, n) = (get("K")?, get("N")?);
            if !(k > 0.0 && n > 1.0) {
                return domain("sinpow needs K > 0 and N > 1");
            }
            let rate = (k / (n - 1.0)).sqrt();
            Density1D::closed_form(Shape::SinPow { rate, power: n - 1.0 }, 0.0, PI / rate)?
                .with_claim(k, n)
        }
        other => return Err(Error::Parse(format!("unknown density name {other:?}"))),
    };
    Ok(d)
}

/// Loads a density from a CSV path or, failing that, from the named catalog.
pub fn load_density(spec: &str) -> Result<Density1D> {
    let path = Path::new(spec);
    if path.exists() {
        Density1D::read_csv(path)
    } else {
        named_density(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uniform() -> Density1D {
        Density1D::closed_form(Shape::Constant, 0.0, 1.0).unwrap()
    }

    fn sin_density() -> Density1D {
        Density1D::closed_form(Shape::SinPow { rate: 1.0, power: 1.0 }, 0.0, PI).unwrap()
    }

    #[test]
    fn measure_examples() {
        let u = uniform();
        let a = IntervalSet::interval(0.0, 0.25).unwrap();
        assert_abs_diff_eq!(measure(&u, &a).unwrap(), 0.25, epsilon = 1e-12);
        let s2 = Density1D::closed_form(Shape::SinPow { rate: 1.0, power: 2.0 }, 0.0, PI).unwrap();
        let half = IntervalSet::interval(0.0, PI / 2.0).unwrap();
        // ∫_0^{π/2} (2/π) sin² = (2/π)(π/4)
        assert_abs_diff_eq!(measure(&s2, &half).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(measure(&s2, &IntervalSet::empty()).unwrap(), 0.0);
    }

    #[test]
    fn measure_is_additive() {
        let s = sin_density();
        let a = IntervalSet::new(vec![(0.1, 0.4), (1.0, 2.5)]).unwrap();
        let parts = measure(&s, &IntervalSet::interval(0.1, 0.4).unwrap()).unwrap()
            + measure(&s, &IntervalSet::interval(1.0, 2.5).unwrap()).unwrap();
        assert_abs_diff_eq!(measure(&s, &a).unwrap(), parts, epsilon = 1e-14);
        let exact = 0.5 * ((0.1f64.cos() - 0.4f64.cos()) + (1.0f64.cos() - 2.5f64.cos()));
        assert_abs_diff_eq!(parts, exact, epsilon = 1e-12);
    }

    #[test]
    fn measure_rejects_sets_outside_domain() {
        let u = uniform();
        let a = IntervalSet::interval(-0.5, 0.2).unwrap();
        assert!(measure(&u, &a).is_err());
        assert!(minkowski_content(&u, &a).is_err());
    }

    #[test]
    fn minkowski_examples() {
        let u = uniform();
        let a = IntervalSet::interval(0.0, 0.37).unwrap();
        assert_abs_diff_eq!(minkowski_content(&u, &a).unwrap(), 1.0, epsilon = 1e-12);
        let s = sin_density();
        let half = IntervalSet::interval(0.0, PI / 2.0).unwrap();
        assert_abs_diff_eq!(minkowski_content(&s, &half).unwrap(), 0.5, epsilon = 1e-12);
        let full = IntervalSet::interval(0.0, PI).unwrap();
        assert_eq!(minkowski_content(&s, &full).unwrap(), 0.0);
        let inner = IntervalSet::interval(0.2, 0.7).unwrap();
        assert_abs_diff_eq!(minkowski_content(&u, &inner).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn interval_set_merges_touching_components() {
        let s = IntervalSet::new(vec![(0.5, 0.7), (0.0, 0.2), (0.2, 0.3)]).unwrap();
        assert_eq!(s.components(), &[(0.0, 0.3), (0.5, 0.7)]);
        assert!(IntervalSet::new(vec![(0.3, 0.1)]).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let s = sin_density();
        for &p in &[1e-6, 0.1, 0.5, 0.77, 0.999] {
            let x = s.quantile(p);
            assert_abs_diff_eq!(s.cdf(x), p, epsilon = 1e-12);
            // analytic: F(x) = (1 - cos x)/2
            assert_abs_diff_eq!(x, (1.0 - 2.0 * p).acos(), epsilon = 1e-9);
        }
        let lin = Density1D::from_samples(0.0, 1.0, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        for &p in &[0.0625, 0.3, 0.9] {
            // h = 2t, F = t²
            assert_abs_diff_eq!(lin.quantile(p), p.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sampled_density_normalizes_and_rejects_gaps() {
        let d = Density1D::from_samples(0.0, 2.0, vec![1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(d.eval(1.3), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.raw_mass(), 2.0, epsilon = 1e-15);
        assert!(Density1D::from_samples(0.0, 1.0, vec![1.0, 0.0, 1.0]).is_err());
        assert!(Density1D::from_samples(0.0, 1.0, vec![1.0, -0.1, 1.0]).is_err());
        assert!(Density1D::from_samples(0.0, 1.0, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn check_cd_examples() {
        let s2 = Density1D::closed_form(Shape::SinPow { rate: 1.0, power: 2.0 }, 0.0, PI).unwrap();
        let v = check_cd(&s2, 2.0, 3.0, default_cd_tol(&s2)).unwrap();
        assert!(v.passed(), "{v:?}");
        let u = uniform();
        for n in [1.0, 1.5, 2.0, 7.0] {
            assert!(check_cd(&u, 0.0, n, default_cd_tol(&u)).unwrap().passed());
        }
        let delta = 0.05;
        let sq = Density1D::closed_form(Shape::Pow { power: 2.0 }, delta, 1.0).unwrap();
        match check_cd(&sq, 0.0, 2.0, default_cd_tol(&sq)).unwrap() {
            CdVerdict::Fail(w) => assert!(w.violation > 0.0 && w.t0 < w.t1),
            other => panic!("expected failure, got {other:?}"),
        }
        assert!(check_cd(&u, 0.0, 0.5, 1e-6).is_err());
    }

    #[test]
    fn check_cd_rejects_constant_density_with_positive_curvature() {
        let u = Density1D::closed_form(Shape::Constant, 0.0, 2.0).unwrap();
        assert!(!check_cd(&u, 1.0, 2.0, default_cd_tol(&u)).unwrap().passed());
    }

    #[test]
    fn check_cd_n_one_requires_constant() {
        let lin = Density1D::closed_form(Shape::Pow { power: 1.0 }, 0.0, 1.0).unwrap();
        assert!(!check_cd(&lin, 0.0, 1.0, 1e-6).unwrap().passed());
    }

    #[test]
    fn mcp_bounds_hold_for_model_density() {
        let s = Density1D::closed_form(Shape::SinPow { rate: 1.0, power: 2.0 }, 0.0, PI).unwrap();
        let (viol, checked, _) = mcp_ratio_violations(&s, 2.0, 3.0, 1e-6, 50).unwrap();
        assert!(checked > 100);
        assert_eq!(viol, 0);
    }

    #[test]
    fn mollify_rejects_bad_input() {
        let s = sin_density();
        assert!(mollify(&s, 0.0, 2.0).is_err());
        assert!(mollify(&s, 0.1, 1.0).is_err());
    }

    #[test]
    fn mollify_constant_is_constant_in_the_interior() {
        let u = Density1D::closed_form_with(Shape::Constant, 0.0, 1.0, 400, 64).unwrap();
        let m = mollify(&u, 0.05, 2.0).unwrap();
        let d = &m.density;
        let inner = d.eval(0.5);
        for &t in &[0.1, 0.3, 0.7, 0.99] {
            assert_abs_diff_eq!(d.eval(t), inner, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(d.a(), -0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(d.b(), 1.05, epsilon = 1e-12);
        assert_eq!(d.eval(-0.01), 0.0);
    }

    #[test]
    fn csv_roundtrip_and_spacing_check() {
        let dir = std::env::temp_dir().join(format!("isoprofile-d1-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("d.csv");
        let d = Density1D::closed_form_with(Shape::SinPow { rate: 1.0, power: 1.0 }, 0.0, PI, 50, 32)
            .unwrap();
        d.write_csv(&p).unwrap();
        let back = Density1D::read_csv(&p).unwrap();
        assert_abs_diff_eq!(back.eval(1.0), d.eval(1.0), epsilon = 1e-3);
        let bad = dir.join("bad.csv");
        std::fs::write(&bad, "t,h\n0,1\n0.1,1\n0.3,1\n").unwrap();
        assert!(matches!(Density1D::read_csv(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn named_catalog() {
        for name in ["uniform", "sin", "sin2", "linear", "cosh", "exp", "sinpow:K=1,N=1.5"] {
            let d = named_density(name).unwrap();
            let c = d.claim().unwrap();
            assert!(check_cd(&d, c.k, c.n, default_cd_tol(&d)).unwrap().passed(), "{name}");
        }
        assert!(named_density("nope").is_err());
        assert!(named_density("sinpow:K=1").is_err());
    }
}
