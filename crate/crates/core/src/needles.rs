//! Discrete needle decomposition.
//!
//! From a Kantorovich potential `φ` the saturated pairs
//! `Γ = {(x, y) : φ(x) − φ(y) = d(x, y)}` are collected together with the
//! initial, final and branching points. The points of the transport set are
//! then grouped into needles: representatives are taken on a level set of
//! `φ`, every point joins the representative it is most tightly saturated
//! with, and each needle carries a 1-D density `h_q` in the arc-length
//! parameter `t = φ(top) − φ(x)`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density1d::{check_cd, mcp_ratio_violations, CdVerdict, Density1D};
use crate::error::{domain, Error, Result};
use crate::l1ot::{KantorovichSolution, Potential, SignedFunction};
use crate::mms::FiniteMMS;
use crate::parallel::par_map;

/// Accuracy of the potential's strong duality.
pub const DUALITY_TOL: f64 = 1e-8;

/// `10 · DUALITY_TOL · diam(X)`.
pub fn default_tol_sat(space: &FiniteMMS) -> f64 {
    10.0 * DUALITY_TOL * space.diameter().max(1.0)
}

/// Saturation excess `d(x, y) − |φ(x) − φ(y)|`; zero on a common ray.
pub fn excess(space: &FiniteMMS, phi: &[f64], x: usize, y: usize) -> f64 {
    space.d(x, y) - (phi[x] - phi[y]).abs()
}

/// Tolerances for [`build_structure`].
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// Saturation tolerance defining `Γ`.
    pub tol_sat: f64,
    /// Sampling-scale tolerance: two points lie on distinct rays when their
    /// saturation excess exceeds it. Defaults to `tol_sat`.
    pub ray_tol: f64,
}

impl Tolerances {
    pub fn exact(space: &FiniteMMS) -> Self {
        let t = default_tol_sat(space);
        Tolerances { tol_sat: t, ray_tol: t }
    }

    /// Exact saturation with rays separated at `ray_tol`.
    pub fn sampled(space: &FiniteMMS, ray_tol: f64) -> Self {
        Tolerances {
            tol_sat: default_tol_sat(space),
            ray_tol,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransportStructure {
    pub tol_sat: f64,
    pub ray_tol: f64,
    pub phi: Vec<f64>,
    /// `successors[x]` lists every `y` with `(x, y) ∈ Γ`.
    pub successors: Vec<Vec<usize>>,
    pub predecessors: Vec<Vec<usize>>,
    pub initial: Vec<bool>,
    pub final_points: Vec<bool>,
    pub transport_set_e: Vec<bool>,
    pub branch_forward: Vec<bool>,
    pub branch_backward: Vec<bool>,
    /// `T_e \ (A₊ ∪ A₋)`.
    pub transport_set: Vec<bool>,
    /// Positive-mass plan entries, used to keep transported mass together.
    pub plan_links: Vec<(usize, usize)>,
}

impl TransportStructure {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn gamma_len(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.successors[x].binary_search(&y).is_ok()
    }

    pub fn gamma_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.successors
            .iter()
            .enumerate()
            .flat_map(|(x, s)| s.iter().map(move |&y| (x, y)))
    }
}

fn has_unrelated_pair(space: &FiniteMMS, phi: &[f64], set: &[usize], gap: f64) -> bool {
    for (i, &a) in set.iter().enumerate() {
        for &b in &set[i + 1..] {
            if excess(space, phi, a, b) > gap {
                return true;
            }
        }
    }
    false
}

/// Saturated pairs, rays and branching sets of `phi`. A point branches when
/// two of its successors (or predecessors) have saturation excess above
/// `3 · ray_tol`.
pub fn build_structure(space: &FiniteMMS, phi: &Potential, tol: Tolerances) -> Result<TransportStructure> {
    let Tolerances { tol_sat, ray_tol } = tol;
    let n = space.len();
    if phi.phi.len() != n {
        return domain("potential length differs from point count");
    }
    if !(tol_sat >= 0.0 && ray_tol >= 0.0) {
        return domain(format!("tolerances must be nonnegative, got {tol_sat}, {ray_tol}"));
    }
    if phi.lipschitz_defect > tol_sat {
        return domain(format!(
            "potential is not 1-Lipschitz: defect {:e} exceeds {tol_sat:e}",
            phi.lipschitz_defect
        ));
    }
    let p = &phi.phi;
    let mut successors = vec![Vec::new(); n];
    let mut predecessors = vec![Vec::new(); n];
    for x in 0..n {
        let row = space.row(x);
        for y in 0..n {
            if row[y] > tol_sat && p[x] - p[y] >= row[y] - tol_sat {
                successors[x].push(y);
                predecessors[y].push(x);
            }
        }
    }
    let transport_set_e: Vec<bool> = (0..n)
        .map(|x| !successors[x].is_empty() || !predecessors[x].is_empty())
        .collect();
    let initial: Vec<bool> = (0..n)
        .map(|x| transport_set_e[x] && predecessors[x].is_empty())
        .collect();
    let final_points: Vec<bool> = (0..n)
        .map(|x| transport_set_e[x] && successors[x].is_empty())
        .collect();
    let gap = 3.0 * ray_tol;
    let branch_forward: Vec<bool> = (0..n)
        .map(|x| has_unrelated_pair(space, p, &successors[x], gap))
        .collect();
    let branch_backward: Vec<bool> = (0..n)
        .map(|x| has_unrelated_pair(space, p, &predecessors[x], gap))
        .collect();
    let transport_set = (0..n)
        .map(|x| transport_set_e[x] && !branch_forward[x] && !branch_backward[x])
        .collect();
    Ok(TransportStructure {
        tol_sat,
        ray_tol,
        phi: p.clone(),
        successors,
        predecessors,
        initial,
        final_points,
        transport_set_e,
        branch_forward,
        branch_backward,
        transport_set,
        plan_links: Vec::new(),
    })
}

/// [`build_structure`] for a solved Kantorovich problem, recording the
/// plan's positive entries.
pub fn build_structure_from(
    space: &FiniteMMS,
    sol: &KantorovichSolution,
    tol: Tolerances,
) -> Result<TransportStructure> {
    let mut s = build_structure(space, &sol.potential, tol)?;
    s.plan_links = sol
        .plan
        .entries
        .iter()
        .filter(|e| e.mass > 1e-12 && e.from != e.to)
        .map(|e| (e.from, e.to))
        .collect();
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct Needle {
    /// Point indices ordered by decreasing `φ`.
    pub chain: Vec<usize>,
    /// Arc-length parameters `φ(chain[0]) − φ(chain[i])`.
    pub t: Vec<f64>,
    /// `m` of each chain point.
    pub weights: Vec<f64>,
    /// Normalized density `h_q` on `[0, t_last]`; `None` for degenerate needles.
    pub density: Option<Density1D>,
    /// `m` of the needle's points.
    pub quotient_weight: f64,
    pub representative: usize,
    /// `max |d(chain_i, chain_j) − |t_i − t_j||`.
    pub isometry_defect: f64,
}

impl Needle {
    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NeedleOptions {
    /// Keep the points of each plan component in one needle.
    pub plan_closed: bool,
    /// Chain points per interval of the resampling grid of `h_q`.
    pub points_per_bin: usize,
    /// Fail when a needle's isometry defect exceeds this.
    pub tol_iso: Option<f64>,
}

impl Default for NeedleOptions {
    fn default() -> Self {
        NeedleOptions {
            plan_closed: true,
            points_per_bin: 1,
            tol_iso: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub needles: Vec<Needle>,
    /// Points outside every needle.
    pub off_transport: Vec<usize>,
    /// Level of `φ` carrying the representatives.
    pub level: f64,
}

impl Decomposition {
    /// `m(T)`.
    pub fn transport_mass(&self) -> f64 {
        self.needles.iter().map(|n| n.quotient_weight).sum()
    }

    /// `Σ_{x ∈ Z} |f(x)| m(x)`.
    pub fn off_transport_mass(&self, space: &FiniteMMS, f: &SignedFunction) -> f64 {
        self.off_transport
            .iter()
            .map(|&x| f.values[x].abs() * space.weights()[x])
            .sum()
    }
}

fn weighted_median(values: &[(f64, f64)]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = v.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(x, w) in &v {
        acc += w;
        if acc >= 0.5 * total {
            return x;
        }
    }
    v.last().map(|p| p.0).unwrap_or(0.0)
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

/// Partitions the transport set into needles.
pub fn extract_needles(
    s: &TransportStructure,
    space: &FiniteMMS,
    opts: &NeedleOptions,
) -> Result<Decomposition> {
    let n = space.len();
    if s.len() != n {
        return domain("structure and space sizes differ");
    }
    let ray_tol = s.ray_tol;
    let phi = &s.phi;
    let w = space.weights();
    let members: Vec<usize> = (0..n).filter(|&x| s.transport_set[x]).collect();
    let off_transport: Vec<usize> = (0..n).filter(|&x| !s.transport_set[x]).collect();
    if members.is_empty() {
        return Ok(Decomposition {
            needles: Vec::new(),
            off_transport,
            level: 0.0,
        });
    }
    let level = weighted_median(&members.iter().map(|&x| (phi[x], w[x])).collect::<Vec<_>>());
    let mut order = members.clone();
    order.sort_by(|&a, &b| {
        (phi[a] - level)
            .abs()
            .total_cmp(&(phi[b] - level).abs())
            .then(a.cmp(&b))
    });
    let mut reps: Vec<usize> = Vec::new();
    for &x in &order {
        if reps.iter().all(|&r| excess(space, phi, x, r) > ray_tol) {
            reps.push(x);
        }
    }
    let mut assign = vec![usize::MAX; n];
    for &x in &members {
        let mut best = (f64::INFINITY, 0);
        for (j, &r) in reps.iter().enumerate() {
            let e = excess(space, phi, x, r);
            if e < best.0 {
                best = (e, j);
            }
        }
        assign[x] = best.1;
    }
    if opts.plan_closed && !s.plan_links.is_empty() {
        let mut parent: Vec<usize> = (0..n).collect();
        for &(a, b) in &s.plan_links {
            if s.transport_set[a] && s.transport_set[b] {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut votes: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        for &x in &members {
            let root = find(&mut parent, x);
            *votes.entry(root).or_default().entry(assign[x]).or_default() += w[x];
        }
        let winner: BTreeMap<usize, usize> = votes
            .into_iter()
            .map(|(root, tally)| {
                let mut best = (f64::NEG_INFINITY, 0);
                for (j, m) in tally {
                    if m > best.0 {
                        best = (m, j);
                    }
                }
                (root, best.1)
            })
            .collect();
        for &x in &members {
            assign[x] = winner[&find(&mut parent, x)];
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); reps.len()];
    for &x in &members {
        groups[assign[x]].push(x);
    }
    let mut needles = Vec::new();
    for (j, mut chain) in groups.into_iter().enumerate() {
        if chain.is_empty() {
            continue;
        }
        chain.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(a.cmp(&b)));
        let top = phi[chain[0]];
        let t: Vec<f64> = chain.iter().map(|&x| top - phi[x]).collect();
        let mut isometry_defect: f64 = 0.0;
        for i in 0..chain.len() {
            for k in i + 1..chain.len() {
                isometry_defect = isometry_defect.max((space.d(chain[i], chain[k]) - (t[k] - t[i])).abs());
            }
        }
        if let Some(tol) = opts.tol_iso {
            if isometry_defect > tol {
                return Err(Error::Infeasible(format!(
                    "needle {j} deviates from an isometric chain by {isometry_defect:e} (tolerance {tol:e})"
                )));
            }
        }
        let weights: Vec<f64> = chain.iter().map(|&x| w[x]).collect();
        let density = cell_density(&t, &weights, opts.points_per_bin)?;
        needles.push(Needle {
            quotient_weight: weights.iter().sum(),
            representative: reps[j],
            chain,
            t,
            weights,
            density,
            isometry_defect,
        });
    }
    Ok(Decomposition {
        needles,
        off_transport,
        level,
    })
}

/// Spreads the weight of chain point `i` over
/// `[(t_{i−1} + t_i)/2, (t_i + t_{i+1})/2]` (clipped to `[t_0, t_last]`) and
/// averages the resulting step density over the cells of a uniform grid.
fn cell_density(t: &[f64], weights: &[f64], points_per_bin: usize) -> Result<Option<Density1D>> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&t, &w)| (t, w))
        .collect();
    let m = pts.len();
    if m < 2 {
        return Ok(None);
    }
    let (t0, len) = (pts[0].0, pts[m - 1].0 - pts[0].0);
    if !(len > 0.0) {
        return Ok(None);
    }
    let mut edges = Vec::with_capacity(m + 1);
    edges.push(0.0);
    for p in pts.windows(2) {
        edges.push(0.5 * (p[0].0 + p[1].0) - t0);
    }
    edges.push(len);
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for p in &pts {
        acc += p.1 / total;
        cum.push(acc);
    }
    let cdf = |s: f64| -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= len {
            return 1.0;
        }
        let k = edges.partition_point(|&e| e <= s) - 1;
        let (a, b) = (edges[k], edges[k + 1]);
        cum[k] + (cum[k + 1] - cum[k]) * (s - a) / (b - a)
    };
    let bins = (((m - 1) as f64 / points_per_bin.max(1) as f64).round() as usize).max(1);
    let step = len / bins as f64;
    let values: Vec<f64> = (0..=bins)
        .map(|i| {
            let c = i as f64 * step;
            let (l, r) = ((c - 0.5 * step).max(0.0), (c + 0.5 * step).min(len));
            (cdf(r) - cdf(l)) / (r - l)
        })
        .collect();
    Density1D::from_samples(0.0, len, values).map(Some)
}

/// Largest angular distance from the needle's points to the great circle
/// through `pole` and the needle's mean direction. Needs unit-vector labels.
pub fn meridian_deviation(space: &FiniteMMS, needle: &Needle, pole: &[f64]) -> Option<f64> {
    let labels = space.labels()?;
    let dim = pole.len();
    let w = space.weights();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut u = vec![0.0; dim];
    for &x in &needle.chain {
        let p = &labels[x];
        let c = dot(p, pole);
        for k in 0..dim {
            u[k] += w[x] * (p[k] - c * pole[k]);
        }
    }
    let norm = dot(&u, &u).sqrt();
    if norm == 0.0 {
        return Some(0.0);
    }
    u.iter_mut().for_each(|v| *v /= norm);
    let worst = needle
        .chain
        .iter()
        .map(|&x| {
            let p = &labels[x];
            let (a, b) = (dot(p, pole), dot(p, &u));
            let off: f64 = (0..dim).map(|k| (p[k] - a * pole[k] - b * u[k]).powi(2)).sum();
            off.sqrt().min(1.0).asin()
        })
        .fold(0.0, f64::max);
    Some(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct NeedleVerdict {
    pub index: usize,
    pub points: usize,
    pub weight: f64,
    pub length: f64,
    /// `|∫ f h_q dt|`.
    pub zero_mean_defect: f64,
    /// `None` for degenerate needles, which pass vacuously.
    pub cd: Option<CdVerdict>,
    pub mcp_violations: usize,
    pub mcp_checked: usize,
}

impl NeedleVerdict {
    pub fn cd_passed(&self) -> bool {
        self.cd.as_ref().map_or(true, CdVerdict::passed)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NeedleCheck {
    pub needles: Vec<NeedleVerdict>,
    pub total_weight: f64,
    pub worst_zero_mean_defect: f64,
    pub worst_cd_violation: f64,
    pub cd_pass_weight: f64,
    pub mcp_violations: usize,
}

impl NeedleCheck {
    /// Share of the quotient mass on needles satisfying `pred`.
    pub fn weight_fraction<P: Fn(&NeedleVerdict) -> bool>(&self, pred: P) -> f64 {
        if self.total_weight <= 0.0 {
            return 1.0;
        }
        self.needles.iter().filter(|v| pred(v)).map(|v| v.weight).sum::<f64>() / self.total_weight
    }
}

const MCP_NODES: usize = 48;

/// Zero-mean, CD(K, N) and ratio-bound checks on every needle.
pub fn check_needles(
    needles: &[Needle],
    f: &SignedFunction,
    k: f64,
    n: f64,
    tol: f64,
) -> Result<NeedleCheck> {
    if n.is_nan() || n < 1.0 {
        return domain(format!("N must be at least 1, got {n}"));
    }
    let indexed: Vec<(usize, &Needle)> = needles.iter().enumerate().collect();
    let verdicts: Vec<Result<NeedleVerdict>> = par_map(&indexed, |&(index, needle)| {
        let mass: f64 = needle.quotient_weight;
        let weighted: f64 = needle
            .chain
            .iter()
            .map(|&x| f.values[x])
            .zip(&needle.weights)
            .map(|(f, w)| f * w)
            .sum();
        let zero_mean_defect = if mass > 0.0 { (weighted / mass).abs() } else { 0.0 };
        let (cd, mcp) = match &needle.density {
            Some(h) => {
                let cd = check_cd(h, k, n, tol)?;
                let mcp = if n > 1.0 {
                    let nodes = h.values().len();
                    let (v, c, _) = mcp_ratio_violations(h, k, n, tol, (nodes / MCP_NODES).max(1))?;
                    (v, c)
                } else {
                    (0, 0)
                };
                (Some(cd), mcp)
            }
            None => (None, (0, 0)),
        };
        Ok(NeedleVerdict {
            index,
            points: needle.len(),
            weight: mass,
            length: needle.length(),
            zero_mean_defect,
            cd,
            mcp_violations: mcp.0,
            mcp_checked: mcp.1,
        })
    });
    let needles: Vec<NeedleVerdict> = verdicts.into_iter().collect::<Result<_>>()?;
    let total_weight = needles.iter().map(|v| v.weight).sum();
    let worst_zero_mean_defect = needles.iter().map(|v| v.zero_mean_defect).fold(0.0, f64::max);
    let worst_cd_violation = needles
        .iter()
        .filter_map(|v| v.cd.as_ref().map(CdVerdict::worst_violation))
        .fold(0.0, f64::max);
    let cd_pass_weight = needles.iter().filter(|v| v.cd_passed()).map(|v| v.weight).sum();
    let mcp_violations = needles.iter().map(|v| v.mcp_violations).sum();
    Ok(NeedleCheck {
        needles,
        total_weight,
        worst_zero_mean_defect,
        worst_cd_violation,
        cd_pass_weight,
        mcp_violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotoneReport {
    pub tuples: usize,
    pub violations: usize,
    pub worst: f64,
}

/// Samples tuples `{(x_i, y_i)} ⊆ Γ` of size at most `max_size` whose
/// members satisfy `(φ(y_j) − φ(y_i))(φ(x_j) − φ(x_i)) ≥ 0` and checks
/// `Σ d²(x_i, y_i) ≤ Σ d²(x_i, y_{i+s})` for every cyclic shift `s`.
pub fn check_d2_monotone(
    s: &TransportStructure,
    space: &FiniteMMS,
    samples: usize,
    max_size: usize,
    seed: u64,
    tol: f64,
) -> MonotoneReport {
    let pairs: Vec<(usize, usize)> = s.gamma_pairs().collect();
    let mut report = MonotoneReport {
        tuples: 0,
        violations: 0,
        worst: 0.0,
    };
    if pairs.is_empty() || samples == 0 {
        return report;
    }
    let phi = &s.phi;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_size = max_size.max(1);
    for _ in 0..samples {
        let size = rng.gen_range(1..=max_size);
        let mut tuple = vec![pairs[rng.gen_range(0..pairs.len())]];
        let mut attempts = 0;
        while tuple.len() < size && attempts < 64 {
            attempts += 1;
            let cand = pairs[rng.gen_range(0..pairs.len())];
            let ok = tuple.iter().all(|&(x, y)| (phi[cand.1] - phi[y]) * (phi[cand.0] - phi[x]) >= 0.0);
            if ok {
                tuple.push(cand);
            }
        }
        report.tuples += 1;
        let k = tuple.len();
        let d2 = |a: usize, b: usize| space.d(a, b).powi(2);
        let base: f64 = tuple.iter().map(|&(x, y)| d2(x, y)).sum();
        for shift in 1..k {
            let shifted: f64 = (0..k).map(|i| d2(tuple[i].0, tuple[(i + shift) % k].1)).sum();
            let excess = base - shifted;
            if excess > report.worst {
                report.worst = excess;
            }
            if excess > tol {
                report.violations += 1;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density1d::named_density;
    use crate::l1ot::solve_potential;
    use crate::mms::{gen_interval, SpaceMeta};

    fn space(dist: Vec<f64>, weights: Vec<f64>) -> FiniteMMS {
        FiniteMMS::new(dist, weights, None, SpaceMeta::default()).unwrap()
    }

    fn line(ts: &[f64]) -> FiniteMMS {
        let n = ts.len();
        let dist = (0..n * n).map(|k| (ts[k / n] - ts[k % n]).abs()).collect();
        space(dist, vec![1.0 / n as f64; n])
    }

    #[test]
    fn interval_chain_is_one_needle() {
        let x = gen_interval(&named_density("uniform").unwrap(), 41).unwrap();
        let ts: Vec<f64> = x.labels().unwrap().iter().map(|l| l[0]).collect();
        let phi = Potential::new(&x, ts.iter().map(|t| -t).collect()).unwrap();
        let s = build_structure(&x, &phi, Tolerances::exact(&x)).unwrap();
        assert_eq!(s.gamma_len(), 41 * 40 / 2);
        assert!(s.initial[0] && s.initial.iter().filter(|b| **b).count() == 1);
        assert!(s.final_points[40] && s.final_points.iter().filter(|b| **b).count() == 1);
        assert!(!s.branch_forward.iter().any(|b| *b) && !s.branch_backward.iter().any(|b| *b));
        let dec = extract_needles(&s, &x, &NeedleOptions::default()).unwrap();
        assert_eq!(dec.needles.len(), 1);
        let needle = &dec.needles[0];
        assert_eq!(needle.chain, (0..41).collect::<Vec<_>>());
        let h = needle.density.as_ref().unwrap();
        assert!(h.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
        for (i, &x) in needle.chain.iter().enumerate() {
            assert!((s.phi[x] - (s.phi[needle.chain[0]] - needle.t[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_potential_has_no_rays() {
        let x = line(&[0.0, 0.5, 1.0]);
        let phi = Potential::new(&x, vec![0.0; 3]).unwrap();
        let s = build_structure(&x, &phi, Tolerances::exact(&x)).unwrap();
        assert_eq!(s.gamma_len(), 0);
        assert!(!s.transport_set_e.iter().any(|b| *b));
        let dec = extract_needles(&s, &x, &NeedleOptions::default()).unwrap();
        assert!(dec.needles.is_empty());
        assert_eq!(dec.off_transport, vec![0, 1, 2]);
    }

    #[test]
    fn tripod_hub_branches_forward() {
        // hub 0, legs {1,2,3}, {4,5,6}, {7,8,9} at distances 1, 2, 3
        let pos = |i: usize| if i == 0 { (0, 0.0) } else { ((i - 1) / 3, ((i - 1) % 3 + 1) as f64) };
        let n = 10;
        let dist = (0..n * n)
            .map(|k| {
                let ((la, a), (lb, b)) = (pos(k / n), pos(k % n));
                if la == lb || a == 0.0 || b == 0.0 { (a - b).abs() } else { a + b }
            })
            .collect();
        let x = space(dist, vec![0.1; n]);
        let phi: Vec<f64> = (0..n).map(|i| { let (l, s) = pos(i); if l == 0 { s } else { -s } }).collect();
        let phi = Potential::new(&x, phi).unwrap();
        assert!(phi.lipschitz_defect <= 1e-12);
        let s = build_structure(&x, &phi, Tolerances::exact(&x)).unwrap();
        assert!(s.branch_forward[0]);
        assert!(!s.transport_set[0]);
        assert!(!s.branch_forward[6] && !s.branch_forward[9]);
    }

    #[test]
    fn disjoint_blocks_give_two_needles() {
        let ts = [0.0f64, 1.0, 2.0, 3.0, 0.0, 1.0, 2.0];
        let block = |i: usize| usize::from(i >= 4);
        let n = ts.len();
        let dist = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if block(i) == block(j) { (ts[i] - ts[j]).abs() } else { 50.0 }
            })
            .collect();
        let weights = vec![0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 0.2];
        let x = space(dist, weights);
        let phi = Potential::new(&x, ts.iter().map(|t| -t).collect()).unwrap();
        let s = build_structure(&x, &phi, Tolerances::exact(&x)).unwrap();
        let dec = extract_needles(&s, &x, &NeedleOptions::default()).unwrap();
        assert_eq!(dec.needles.len(), 2);
        let mut w: Vec<f64> = dec.needles.iter().map(|n| n.quotient_weight).collect();
        w.sort_by(f64::total_cmp);
        assert!((w[0] - 0.4).abs() < 1e-12 && (w[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn single_point_needle_is_vacuous() {
        let needle = Needle {
            chain: vec![0],
            t: vec![0.0],
            weights: vec![1.0],
            density: None,
            quotient_weight: 1.0,
            representative: 0,
            isometry_defect: 0.0,
        };
        let f = SignedFunction::new(vec![0.0]).unwrap();
        let report = check_needles(&[needle], &f, 1.0, 2.0, 1e-6).unwrap();
        assert!(report.needles[0].cd_passed());
        assert_eq!(report.needles[0].zero_mean_defect, 0.0);
    }

    #[test]
    fn interval_transport_decomposition() {
        let x = gen_interval(&named_density("uniform").unwrap(), 51).unwrap();
        let set: Vec<bool> = x.labels().unwrap().iter().map(|l| l[0] <= 0.5).collect();
        let f = SignedFunction::centered_indicator(&x, &set);
        let sol = solve_potential(&x, &f).unwrap();
        let s = build_structure_from(&x, &sol, Tolerances::exact(&x)).unwrap();
        let dec = extract_needles(&s, &x, &NeedleOptions::default()).unwrap();
        assert_eq!(dec.needles.len(), 1);
        assert!((dec.transport_mass() + x.mass(&vec![false; 51]) - 1.0).abs() < 1e-10);
        let report = check_needles(&dec.needles, &f, 0.0, 3.0, 1e-6).unwrap();
        assert!(report.worst_zero_mean_defect < 1e-8);
        assert!(report.needles[0].cd_passed());
        let mono = check_d2_monotone(&s, &x, 2000, 4, 3, 1e-9);
        assert_eq!(mono.violations, 0);
    }

    #[test]
    fn singleton_tuples_are_monotone() {
        let x = line(&[0.0, 1.0, 2.0]);
        let phi = Potential::new(&x, vec![0.0, -1.0, -2.0]).unwrap();
        let s = build_structure(&x, &phi, Tolerances::exact(&x)).unwrap();
        let r = check_d2_monotone(&s, &x, 100, 1, 0, 1e-12);
        assert_eq!((r.tuples, r.violations), (100, 0));
    }

    #[test]
    fn non_lipschitz_potential_is_rejected() {
        let x = line(&[0.0, 1.0]);
        let phi = Potential::new(&x, vec![0.0, 2.0]).unwrap();
        assert!(build_structure(&x, &phi, Tolerances::exact(&x)).is_err());
    }
}
