//! Finite metric measure spaces, generators and ε-enlargements.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density1d::Density1D;
use crate::error::{domain, Error, Result};
use crate::report::fmt_num;

const TRIANGLE_TOL: f64 = 1e-9;
const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 300;
const SAMPLED_TRIANGLES: usize = 100_000;

/// Generator metadata carried alongside a space.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceMeta {
    pub kind: String,
    /// Curvature bound the generator models, if any.
    pub k: Option<f64>,
    /// Dimension bound the generator models, if any.
    pub n: Option<f64>,
    /// Largest nearest-neighbour distance.
    pub resolution: f64,
}

/// A finite metric measure space with a dense distance matrix.
#[derive(Clone, Debug)]
pub struct FiniteMMS {
    n: usize,
    dist: Vec<f64>,
    weights: Vec<f64>,
    labels: Option<Vec<Vec<f64>>>,
    meta: SpaceMeta,
}

impl FiniteMMS {
    /// Validates and builds a space. `dist` is row-major `n×n`.
    pub fn new(
        dist: Vec<f64>,
        weights: Vec<f64>,
        labels: Option<Vec<Vec<f64>>>,
        meta: SpaceMeta,
    ) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return domain("space needs at least one point");
        }
        if dist.len() != n * n {
            return domain(format!("distance matrix has {} entries, expected {}", dist.len(), n * n));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return domain("label count differs from point count");
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return domain("weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return domain(format!("weights must sum to 1, got {total}"));
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return domain(format!("nonzero diagonal at point {i}"));
            }
            for j in (i + 1)..n {
                let (a, b) = (dist[i * n + j], dist[j * n + i]);
                if !a.is_finite() || a < 0.0 {
                    return domain(format!("invalid distance {a} between {i} and {j}"));
                }
                if (a - b).abs() > 1e-12 * (1.0 + a) {
                    return domain(format!("distance matrix not symmetric at ({i}, {j})"));
                }
            }
        }
        let mut space = FiniteMMS {
            n,
            dist,
            weights,
            labels,
            meta,
        };
        space.check_triangle()?;
        space.meta.resolution = space.nearest_neighbour_radius();
        Ok(space)
    }

    fn check_triangle(&self) -> Result<()> {
        let n = self.n;
        let violated = |i: usize, j: usize, k: usize| {
            self.d(i, k) > self.d(i, j) + self.d(j, k) + TRIANGLE_TOL
        };
        if n <= EXHAUSTIVE_TRIANGLE_LIMIT {
            for i in 0..n {
                for j in 0..n {
                    for k in (i + 1)..n {
                        if violated(i, j, k) {
                            return domain(format!("triangle inequality fails on ({i}, {j}, {k})"));
                        }
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7f4a_7c15);
            for _ in 0..SAMPLED_TRIANGLES {
                let (i, j, k) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if violated(i, j, k) {
                    return domain(format!("triangle inequality fails on ({i}, {j}, {k})"));
                }
            }
        }
        Ok(())
    }

    fn nearest_neighbour_radius(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .filter(|&j| j != i)
                    .map(|j| self.d(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[Vec<f64>]> {
        self.labels.as_deref()
    }

    pub fn meta(&self) -> &SpaceMeta {
        &self.meta
    }

    /// Sampling resolution: the largest nearest-neighbour distance.
    pub fn resolution(&self) -> f64 {
        self.meta.resolution
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// `m(A)` for a point mask.
    pub fn mass(&self, set: &[bool]) -> f64 {
        set.iter()
            .zip(&self.weights)
            .filter(|(s, _)| **s)
            .map(|(_, w)| *w)
            .sum()
    }

    /// Writes `<stem>.dist.csv` (`n`, then the strict lower triangle row by
    /// row), `<stem>.weights.csv` and `<stem>.meta.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let mut text = format!("{}\n", self.n);
        for i in 1..self.n {
            let row: Vec<String> = (0..i).map(|j| fmt_num(self.d(i, j))).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(with_suffix(stem, "dist.csv"), text)?;
        let mut w = String::from("w\n");
        for x in &self.weights {
            w.push_str(&fmt_num(*x));
            w.push('\n');
        }
        fs::write(with_suffix(stem, "weights.csv"), w)?;
        let sidecar = Sidecar {
            meta: self.meta.clone(),
            labels: self.labels.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(with_suffix(stem, "meta.json"), json)?;
        Ok(())
    }

    /// Reads a space written by [`FiniteMMS::save`]; `path` may be the stem
    /// or the `.dist.csv` file.
    pub fn load(path: &Path) -> Result<Self> {
        let stem = space_stem(path);
        let text = fs::read_to_string(with_suffix(&stem, "dist.csv"))?;
        let mut lines = text.lines();
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty distance file".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad point count: {e}")))?;
        let mut dist = vec![0.0; n * n];
        for i in 1..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("distance file ends before row {i}")))?;
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {i}: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != i {
                return Err(Error::Parse(format!("row {i} has {} entries, expected {i}", vals.len())));
            }
            for (j, v) in vals.into_iter().enumerate() {
                dist[i * n + j] = v;
                dist[j * n + i] = v;
            }
        }
        let wtext = fs::read_to_string(with_suffix(&stem, "weights.csv"))?;
        let weights: Vec<f64> = wtext
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|e| Error::Parse(format!("weights: {e}"))))
            .collect::<Result<_>>()?;
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let sidecar: Sidecar = match fs::read_to_string(with_suffix(&stem, "meta.json")) {
            Ok(s) => serde_json::from_str(&s).map_err(|e| Error::Parse(e.to_string()))?,
            Err(_) => Sidecar::default(),
        };
        FiniteMMS::new(dist, weights, sidecar.labels, sidecar.meta)
    }
}

#[derive(Default, Serialize, Deserialize)]
struct Sidecar {
    meta: SpaceMeta,
    labels: Option<Vec<Vec<f64>>>,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn space_stem(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    for suffix in [".dist.csv", ".weights.csv", ".meta.json"] {
        if let Some(stem) = s.strip_suffix(suffix) {
            return PathBuf::from(stem);
        }
    }
    path.to_path_buf()
}

/// `n` equispaced points on the support of `density`, weighted by the mass
/// of their cells (half cells at the ends).
pub fn gen_interval(density: &Density1D, n: usize) -> Result<FiniteMMS> {
    if n < 2 {
        return domain(format!("interval space needs n >= 2, got {n}"));
    }
    let (lo, hi) = density.support();
    let step = (hi - lo) / (n - 1) as f64;
    let ts: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let cuts: Vec<f64> = std::iter::once(lo)
        .chain(ts.windows(2).map(|w| 0.5 * (w[0] + w[1])))
        .chain(std::iter::once(hi))
        .collect();
    let mut weights: Vec<f64> = cuts.windows(2).map(|c| density.cdf(c[1]) - density.cdf(c[0])).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            dist[i * n + j] = (ts[i] - ts[j]).abs();
        }
    }
    let claim = density.claim();
    FiniteMMS::new(
        dist,
        weights,
        Some(ts.iter().map(|&t| vec![t]).collect()),
        SpaceMeta {
            kind: "interval".into(),
            k: claim.map(|c| c.k),
            n: claim.map(|c| c.n),
            resolution: 0.0,
        },
    )
}

/// Geodesic distance between unit vectors, stable for near and antipodal
/// pairs.
pub fn sphere_distance(x: &[f64], y: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// `n` points on the unit sphere `S^dim` with uniform weights: equispaced
/// for `S¹`, a Fibonacci lattice for `S²` and rejection samples for `S³`.
/// The seed rotates the `S¹`/`S²` configurations about the polar axis.
pub fn gen_sphere(dim: usize, n: usize, seed: u64) -> Result<FiniteMMS> {
    if n < 1 {
        return domain("sphere sample needs at least one point");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = rng.gen_range(0.0..2.0 * PI);
    let coords: Vec<Vec<f64>> = match dim {
        1 => (0..n)
            .map(|i| {
                let a = rotation + 2.0 * PI * i as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        2 => (0..n)
            .map(|i| {
                let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let a = rotation + GOLDEN_ANGLE * i as f64;
                vec![r * a.cos(), r * a.sin(), z]
            })
            .collect(),
        3 => {
            let mut pts = Vec::with_capacity(n);
            while pts.len() < n {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= 1.0 && norm > 1e-3 {
                    pts.push(x.iter().map(|v| v / norm).collect());
                }
            }
            pts
        }
        other => return domain(format!("unsupported sphere dimension {other}; use 1, 2 or 3")),
    };
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sphere_distance(&coords[i], &coords[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    FiniteMMS::new(
        dist,
        vec![1.0 / n as f64; n],
        Some(coords),
        SpaceMeta {
            kind: format!("sphere{dim}"),
            k: Some(dim as f64 - 1.0),
            n: Some(dim as f64),
            resolution: 0.0,
        },
    )
}

/// Spherical suspension `[0,π] ×_{sin^{N−1}} Y` sampled on `n_t` equispaced
/// heights including both poles; each pole is a single point.
///
/// Weights are the `sin^{N−1}` mass of each height cell times the base
/// weight. Labels are `(t, base index)`, with base index `-1` at the poles.
pub fn gen_suspension(base: &FiniteMMS, n_dim: f64, n_t: usize) -> Result<FiniteMMS> {
    if n_dim.is_nan() || n_dim < 2.0 {
        return domain(format!("suspension needs N >= 2, got {n_dim}"));
    }
    if n_t < 3 {
        return domain(format!("suspension needs n_t >= 3, got {n_t}"));
    }
    if base.diameter() > PI + 1e-9 {
        return domain(format!("base diameter {} exceeds π", base.diameter()));
    }
    let dt = PI / (n_t - 1) as f64;
    let ts: Vec<f64> = (0..n_t)
        .map(|k| if k == n_t - 1 { PI } else { dt * k as f64 })
        .collect();
    let p = n_dim - 1.0;
    let cell_mass = |k: usize| {
        let lo = (ts[k] - 0.5 * dt).max(0.0);
        let hi = (ts[k] + 0.5 * dt).min(PI);
        crate::numeric::cumulative(&|t: f64| t.sin().max(0.0).powf(p), &[lo, 0.5 * (lo + hi), hi])[2]
    };
    let nb = base.len();
    let mut pts: Vec<(f64, Option<usize>)> = Vec::new();
    let mut weights = Vec::new();
    for (k, &t) in ts.iter().enumerate() {
        let cm = cell_mass(k);
        if k == 0 || k == n_t - 1 {
            pts.push((t, None));
            weights.push(cm);
        } else {
            for j in 0..nb {
                pts.push((t, Some(j)));
                weights.push(cm * base.weights()[j]);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let n = pts.len();
    let mut dist = vec![0.0; n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            let (t, y) = pts[a];
            let (s, z) = pts[b];
            let dy = match (y, z) {
                (Some(y), Some(z)) => base.d(y, z),
                _ => 0.0,
            };
            let ss = t.sin() * s.sin();
            let h = ((t - s) * 0.5).sin().powi(2) + ss * (0.5 * dy).sin().powi(2);
            let co = ((t + s) * 0.5).cos().powi(2) + ss * (0.5 * dy).cos().powi(2);
            let d = 2.0 * h.max(0.0).sqrt().atan2(co.max(0.0).sqrt());
            dist[a * n + b] = d;
            dist[b * n + a] = d;
        }
    }
    let labels = pts
        .iter()
        .map(|&(t, y)| vec![t, y.map_or(-1.0, |j| j as f64)])
        .collect();
    FiniteMMS::new(
        dist,
        weights,
        Some(labels),
        SpaceMeta {
            kind: "suspension".into(),
            k: Some(n_dim - 1.0),
            n: Some(n_dim),
            resolution: 0.0,
        },
    )
}

/// `{x : ∃ y ∈ A, d(x, y) < eps}`.
pub fn enlarge(space: &FiniteMMS, set: &[bool], eps: f64) -> Vec<bool> {
    let members: Vec<usize> = (0..space.len()).filter(|&i| set[i]).collect();
    (0..space.len())
        .map(|x| set[x] || members.iter().any(|&y| space.d(x, y) < eps))
        .collect()
}

/// One-scale surrogate `(m(A^ε) − m(A))/ε` of the Minkowski content.
pub fn minkowski_discrete(space: &FiniteMMS, set: &[bool], eps: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return domain(format!("eps must be positive, got {eps}"));
    }
    let grown = enlarge(space, set, eps);
    Ok(((space.mass(&grown) - space.mass(set)) / eps).max(0.0))
}

/// Rungs of the ε-ladder in units of the sampling resolution.
pub const LADDER: [f64; 3] = [2.0, 4.0, 8.0];

/// Relative inflation of every rung, so that points at a distance of exactly
/// `rung · resolution` on regular grids are counted independently of rounding.
pub const RUNG_INFLATION: f64 = 1e-9;

/// Surrogate values on the ladder `{2,4,8}·resolution` and their minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub rungs: Vec<(f64, f64)>,
    pub min: f64,
}

pub fn minkowski_ladder(space: &FiniteMMS, set: &[bool]) -> Result<LadderReport> {
    minkowski_ladder_at(space, set, space.resolution())
}

pub fn minkowski_ladder_at(space: &FiniteMMS, set: &[bool], resolution: f64) -> Result<LadderReport> {
    minkowski_ladder_with(space, set, resolution, &LADDER)
}

/// Surrogate values at `eps = c · resolution · (1 + RUNG_INFLATION)` for each
/// multiplier `c`.
pub fn minkowski_ladder_with(
    space: &FiniteMMS,
    set: &[bool],
    resolution: f64,
    multipliers: &[f64],
) -> Result<LadderReport> {
    if multipliers.is_empty() {
        return domain("the ε-ladder needs at least one rung");
    }
    let rungs: Vec<(f64, f64)> = multipliers
        .iter()
        .map(|&c| {
            let eps = c * resolution * (1.0 + RUNG_INFLATION);
            minkowski_discrete(space, set, eps).map(|v| (eps, v))
        })
        .collect::<Result<_>>()?;
    let min = rungs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(LadderReport { rungs, min })
}
