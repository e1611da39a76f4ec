//! Harnesses comparing finite spaces with the model profiles: the
//! profile comparison, the needle replay of the lower bound, cap optimality
//! on suspensions and the diameter gap.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density1d::{minkowski_content, Density1D, IntervalSet, Shape};
use crate::error::{domain, Result};
use crate::iso1d::profile_structured;
use crate::l1ot::{solve_potential, SignedFunction};
use crate::mms::{FiniteMMS, SpaceMeta, LADDER, RUNG_INFLATION};
use crate::model_profiles::model_profile;
use crate::needles::{build_structure_from, extract_needles, NeedleOptions, Tolerances};
use crate::parallel::par_map;

/// Calibrated `c_eps`; see [`calibrate_slack`].
pub const SLACK_C_EPS: f64 = 1.0;
/// Calibrated `c_res`; see [`calibrate_slack`].
pub const SLACK_C_RES: f64 = 0.0;

/// Discretization allowance `c_eps·ε + c_res·resolution`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub c_eps: f64,
    pub c_res: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Slack {
            c_eps: SLACK_C_EPS,
            c_res: SLACK_C_RES,
        }
    }
}

impl Slack {
    pub fn at(&self, eps: f64, resolution: f64) -> f64 {
        self.c_eps * eps + self.c_res * resolution
    }
}

/// Rungs of a Minkowski ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EpsLadder {
    /// Multiples of the sampling resolution.
    Relative(Vec<f64>),
    Absolute(Vec<f64>),
}

impl Default for EpsLadder {
    fn default() -> Self {
        EpsLadder::Relative(LADDER.to_vec())
    }
}

impl EpsLadder {
    pub fn resolve(&self, resolution: f64) -> Result<Vec<f64>> {
        let eps: Vec<f64> = match self {
            EpsLadder::Relative(c) => c.iter().map(|c| c * resolution).collect(),
            EpsLadder::Absolute(e) => e.clone(),
        };
        if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return domain("ε-ladder rungs must be positive and finite");
        }
        Ok(eps)
    }
}

/// One rung of a ladder; `value` is `None` when `A^ε` swallows the complement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub eps: f64,
    pub value: Option<f64>,
}

fn distances_to_set(space: &FiniteMMS, set: &[bool]) -> Vec<f64> {
    let members: Vec<usize> = (0..space.len()).filter(|&i| set[i]).collect();
    (0..space.len())
        .map(|x| {
            if set[x] {
                0.0
            } else {
                let row = space.row(x);
                members.iter().map(|&y| row[y]).fold(f64::INFINITY, f64::min)
            }
        })
        .collect()
}

/// `(m(A^ε) − m(A))/ε` on every rung, skipping rungs with
/// `ε ≥ max_{x∉A} d(x, A)`. Enlargement is strict at `ε·(1 + RUNG_INFLATION)`.
pub fn rung_values(space: &FiniteMMS, set: &[bool], eps: &[f64]) -> Vec<Rung> {
    let w = space.weights();
    let mass = space.mass(set);
    if mass <= 0.0 || set.iter().all(|&b| b) {
        return eps.iter().map(|&e| Rung { eps: e, value: Some(0.0) }).collect();
    }
    let dist = distances_to_set(space, set);
    let far = dist.iter().copied().fold(0.0, f64::max);
    eps.iter()
        .map(|&e| {
            let r = e * (1.0 + RUNG_INFLATION);
            let value = (e < far).then(|| {
                let grown: f64 = (0..space.len()).filter(|&x| !set[x] && dist[x] < r).map(|x| w[x]).sum();
                grown / r
            });
            Rung { eps: e, value }
        })
        .collect()
}

fn ladder_min(rungs: &[Rung]) -> Option<(f64, f64)> {
    rungs
        .iter()
        .filter_map(|r| r.value.map(|v| (r.eps, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Points of `order` taken while `m + w/2 ≤ v`.
fn prefix_set(space: &FiniteMMS, order: &[usize], v: f64) -> Vec<bool> {
    let w = space.weights();
    let mut set = vec![false; space.len()];
    let mut m = 0.0;
    for &i in order {
        if m + 0.5 * w[i] > v {
            break;
        }
        set[i] = true;
        m += w[i];
    }
    set
}

fn order_by(key: &[f64]) -> Vec<usize> {
    let mut o: Vec<usize> = (0..key.len()).collect();
    o.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    o
}

fn ball_order(space: &FiniteMMS, center: usize) -> Vec<usize> {
    order_by(space.row(center))
}

/// Largest deficit of the discrete surrogate below the exact profile on
/// interval spaces built from `densities`, as `c_eps` (per unit ε) and then
/// `c_res` (the remainder per unit resolution). Sets are prefixes, suffixes
/// and centred windows.
pub fn calibrate_slack(densities: &[Density1D], sizes: &[usize]) -> Result<Slack> {
    let mut samples: Vec<(f64, f64, f64)> = Vec::new();
    for d in densities {
        for &n in sizes {
            let x = crate::mms::gen_interval(d, n)?;
            let res = x.resolution();
            let eps = EpsLadder::default().resolve(res)?;
            let c = n / 2;
            let sets: Vec<Vec<bool>> = (0..n)
                .flat_map(|k| {
                    let half = k.min(c.saturating_sub(1)) / 2;
                    [
                        (0..n).map(|i| i <= k).collect::<Vec<bool>>(),
                        (0..n).map(|i| i >= k).collect(),
                        (0..n).map(|i| i + half >= c && i <= c + half).collect(),
                    ]
                })
                .collect();
            let found = par_map(&sets, |set| -> Result<Vec<(f64, f64, f64)>> {
                let m = x.mass(set);
                if m <= 0.0 || m >= 1.0 {
                    return Ok(Vec::new());
                }
                let exact = profile_structured(d, m)?.value;
                Ok(rung_values(&x, set, &eps)
                    .into_iter()
                    .filter_map(|r| r.value.map(|val| (exact - val, r.eps, res)))
                    .collect())
            });
            for f in found {
                samples.extend(f?);
            }
        }
    }
    let c_eps = samples.iter().map(|&(def, e, _)| def / e).fold(0.0, f64::max);
    let c_res = samples
        .iter()
        .map(|&(def, e, r)| (def - c_eps * e).max(0.0) / r)
        .fold(0.0, f64::max);
    Ok(Slack { c_eps, c_res })
}

#[derive(Clone, Debug)]
pub struct CompareOptions {
    pub ladder: EpsLadder,
    /// Ball candidates around this many seeded centres.
    pub centers: usize,
    /// Sublevel and superlevel candidates of this many Kantorovich potentials.
    pub potentials: usize,
    pub seed: u64,
    pub slack: Slack,
    /// Named extra sets, evaluated at their own mass.
    pub user_sets: Vec<(String, Vec<bool>)>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            ladder: EpsLadder::default(),
            centers: 16,
            potentials: 2,
            seed: 0,
            slack: Slack::default(),
            user_sets: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    /// Target mass the candidate was built for.
    pub v: f64,
    pub family: String,
    pub label: String,
    pub mass: f64,
    pub rungs: Vec<Rung>,
    /// Ladder minimum over unsaturated rungs.
    pub content: Option<f64>,
    pub eps: Option<f64>,
    /// Model profile at `mass`.
    pub model: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub v: f64,
    pub family: String,
    pub label: String,
    pub mass: f64,
    pub eps: f64,
    pub content: f64,
    pub model: f64,
    pub slack: f64,
    pub resolution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub v: f64,
    pub model: f64,
    /// Smallest candidate content; an upper estimate of the profile.
    pub i_hat: Option<f64>,
    pub best: Option<String>,
    pub best_mass: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub k: f64,
    pub n: f64,
    pub diameter: f64,
    pub resolution: f64,
    pub eps: Vec<f64>,
    pub slack: Slack,
    pub rows: Vec<ProfileRow>,
    pub candidates: Vec<CandidateResult>,
    pub violations: Vec<Violation>,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Candidate {
    v: f64,
    family: String,
    label: String,
    set: Vec<bool>,
}

fn model_cache(k: f64, n: f64, d: f64, masses: impl Iterator<Item = f64>) -> Result<HashMap<u64, f64>> {
    let mut uniq: Vec<f64> = masses.map(mass_key).collect();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let values = par_map(&uniq, |&m| model_profile(k, n, d, m).map(|p| p.value));
    uniq.iter()
        .zip(values)
        .map(|(m, val)| Ok((m.to_bits(), val?)))
        .collect()
}

fn mass_key(m: f64) -> f64 {
    m.clamp(0.0, 1.0) + 0.0
}

fn lookup(cache: &HashMap<u64, f64>, m: f64) -> f64 {
    cache[&mass_key(m).to_bits()]
}

/// Upper estimate `Î_X(v) = min` over candidate sets of the discrete content,
/// checked against `I_{K,N,D}` with `D = diam X`.
///
/// A violation is a candidate whose content on some unsaturated rung falls
/// below `I_{K,N,D}(m(A)) − slack(ε, resolution)`.
pub fn compare_profile(
    space: &FiniteMMS,
    k: f64,
    n: f64,
    v_grid: &[f64],
    opts: &CompareOptions,
) -> Result<CompareReport> {
    if let Some(v) = v_grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return domain(format!("v must lie in [0, 1], got {v}"));
    }
    for (name, set) in &opts.user_sets {
        if set.len() != space.len() {
            return domain(format!("user set {name} has the wrong length"));
        }
    }
    let res = space.resolution();
    let diameter = space.diameter();
    let eps = opts.ladder.resolve(res)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let centers: Vec<usize> = if opts.centers >= space.len() {
        (0..space.len()).collect()
    } else {
        sample(&mut rng, space.len(), opts.centers).into_vec()
    };
    let mut orders: Vec<(String, String, Vec<usize>)> = centers
        .iter()
        .map(|&c| ("ball".to_string(), format!("ball@{c}"), ball_order(space, c)))
        .collect();
    for j in 0..opts.potentials {
        let c = rng.gen_range(0..space.len());
        let u = rng.gen_range(0.2..0.8);
        let seed_set = prefix_set(space, &ball_order(space, c), u);
        let f = SignedFunction::centered_indicator(space, &seed_set);
        if f.values.iter().all(|&x| x == 0.0) {
            continue;
        }
        let phi = solve_potential(space, &f)?.potential.phi;
        let neg: Vec<f64> = phi.iter().map(|p| -p).collect();
        orders.push(("sublevel".into(), format!("phi{j}-sub"), order_by(&phi)));
        orders.push(("sublevel".into(), format!("phi{j}-sup"), order_by(&neg)));
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    for &v in v_grid {
        for (family, label, order) in &orders {
            candidates.push(Candidate {
                v,
                family: family.clone(),
                label: label.clone(),
                set: prefix_set(space, order, v),
            });
        }
    }
    for (name, set) in &opts.user_sets {
        candidates.push(Candidate {
            v: space.mass(set),
            family: "user".into(),
            label: name.clone(),
            set: set.clone(),
        });
    }
    let evaluated = par_map(&candidates, |c| (space.mass(&c.set), rung_values(space, &c.set, &eps)));
    let cache = model_cache(
        k,
        n,
        diameter,
        evaluated.iter().map(|e| e.0).chain(v_grid.iter().copied()),
    )?;
    let mut results = Vec::with_capacity(candidates.len());
    let mut violations = Vec::new();
    for (c, (mass, rungs)) in candidates.iter().zip(evaluated) {
        let model = lookup(&cache, mass);
        let worst = rungs
            .iter()
            .filter_map(|r| r.value.map(|val| (r.eps, val, val - model + opts.slack.at(r.eps, res))))
            .min_by(|a, b| a.2.total_cmp(&b.2));
        if let Some((e, val, margin)) = worst {
            if margin < 0.0 {
                violations.push(Violation {
                    v: c.v,
                    family: c.family.clone(),
                    label: c.label.clone(),
                    mass,
                    eps: e,
                    content: val,
                    model,
                    slack: opts.slack.at(e, res),
                    resolution: res,
                });
            }
        }
        let best = ladder_min(&rungs);
        results.push(CandidateResult {
            v: c.v,
            family: c.family.clone(),
            label: c.label.clone(),
            mass,
            content: best.map(|b| b.1),
            eps: best.map(|b| b.0),
            rungs,
            model,
        });
    }
    let rows = v_grid
        .iter()
        .map(|&v| {
            let best = results
                .iter()
                .filter(|r| r.v == v && r.family != "user")
                .filter_map(|r| r.content.map(|c| (c, r)))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            ProfileRow {
                v,
                model: lookup(&cache, v),
                i_hat: best.map(|b| b.0),
                best: best.map(|b| b.1.label.clone()),
                best_mass: best.map(|b| b.1.mass),
            }
        })
        .collect();
    Ok(CompareReport {
        k,
        n,
        diameter,
        resolution: res,
        eps,
        slack: opts.slack,
        rows,
        candidates: results,
        violations,
    })
}

/// Violations of `coarse` whose target mass and family still violate in
/// `fine`, a run on a refined sample.
pub fn persistent_violations(coarse: &CompareReport, fine: &CompareReport) -> Vec<Violation> {
    coarse
        .violations
        .iter()
        .filter(|c| {
            fine.violations
                .iter()
                .any(|f| f.family == c.family && (f.v - c.v).abs() <= 1e-12)
        })
        .cloned()
        .collect()
}

#[derive(Clone, Debug)]
pub struct NeedleBoundOptions {
    /// Ray separation for the needle extraction; exact when `None`.
    pub ray_tol: Option<f64>,
    pub needles: NeedleOptions,
    pub ladder: EpsLadder,
    pub slack: Slack,
}

impl Default for NeedleBoundOptions {
    fn default() -> Self {
        NeedleBoundOptions {
            ray_tol: None,
            needles: NeedleOptions::default(),
            ladder: EpsLadder::default(),
            slack: Slack::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeedleTerm {
    pub index: usize,
    pub weight: f64,
    pub length: f64,
    /// `h_q`-mass of the trace of `A`.
    pub trace_mass: f64,
    /// 1-D Minkowski content of the trace under `h_q`.
    pub trace_content: f64,
    /// `I_{K,N,length}(v)`; zero for degenerate needles.
    pub model: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeedleBoundReport {
    pub v: f64,
    pub k: f64,
    pub n: f64,
    pub needles: Vec<NeedleTerm>,
    pub transport_mass: f64,
    pub off_transport: usize,
    /// `Σ_q 𝔮(q)·I_{K,N,|supp h_q|}(v)`.
    pub model_bound: f64,
    /// `Σ_q 𝔮(q)·(h_q L¹)⁺(trace)`.
    pub trace_bound: f64,
    /// Ladder minimum of the discrete content of `A`.
    pub measured: f64,
    pub measured_eps: Option<f64>,
    pub slack: f64,
}

impl NeedleBoundReport {
    /// `model_bound ≤ measured + slack`.
    pub fn consistent(&self) -> bool {
        self.model_bound <= self.measured + self.slack
    }
}

fn trace_on_needle(t: &[f64], weights: &[f64], inside: &[bool]) -> Result<IntervalSet> {
    let pts: Vec<(f64, bool)> = t
        .iter()
        .zip(weights)
        .zip(inside)
        .filter(|((_, &w), _)| w > 0.0)
        .map(|((&t, _), &a)| (t, a))
        .collect();
    let m = pts.len();
    if m < 2 {
        return Ok(IntervalSet::empty());
    }
    let t0 = pts[0].0;
    let len = pts[m - 1].0 - t0;
    let edge = |i: usize| match i {
        0 => 0.0,
        i if i == m => len,
        i => 0.5 * (pts[i - 1].0 + pts[i].0) - t0,
    };
    let mut comps: Vec<(f64, f64)> = Vec::new();
    for (i, &(_, a)) in pts.iter().enumerate() {
        if !a {
            continue;
        }
        let (l, r) = (edge(i), edge(i + 1));
        match comps.last_mut() {
            Some(last) if last.1 >= l => last.1 = r,
            _ => comps.push((l, r)),
        }
    }
    IntervalSet::new(comps)
}

/// Discrete replay of the needle lower bound for `m⁺(A)` with
/// `f = χ_A − m(A)`.
pub fn needle_lower_bound(
    space: &FiniteMMS,
    set: &[bool],
    k: f64,
    n: f64,
    opts: &NeedleBoundOptions,
) -> Result<NeedleBoundReport> {
    if set.len() != space.len() {
        return domain("set length differs from point count");
    }
    let v = space.mass(set);
    let res = space.resolution();
    let eps = opts.ladder.resolve(res)?;
    let measured = ladder_min(&rung_values(space, set, &eps));
    let slack = measured.map_or(0.0, |(e, _)| opts.slack.at(e, res));
    let mut report = NeedleBoundReport {
        v,
        k,
        n,
        needles: Vec::new(),
        transport_mass: 0.0,
        off_transport: 0,
        model_bound: 0.0,
        trace_bound: 0.0,
        measured: measured.map_or(0.0, |m| m.1),
        measured_eps: measured.map(|m| m.0),
        slack,
    };
    let f = SignedFunction::centered_indicator(space, set);
    if f.values.iter().all(|&x| x.abs() <= 1e-15) {
        report.off_transport = space.len();
        return Ok(report);
    }
    let sol = solve_potential(space, &f)?;
    let tol = match opts.ray_tol {
        Some(r) => Tolerances::sampled(space, r),
        None => Tolerances::exact(space),
    };
    let structure = build_structure_from(space, &sol, tol)?;
    let dec = extract_needles(&structure, space, &opts.needles)?;
    let terms = par_map(&dec.needles.iter().enumerate().collect::<Vec<_>>(), |&(i, needle)| -> Result<NeedleTerm> {
        let inside: Vec<bool> = needle.chain.iter().map(|&x| set[x]).collect();
        let total: f64 = needle.weights.iter().sum();
        let in_mass: f64 = needle.weights.iter().zip(&inside).filter(|p| *p.1).map(|p| p.0).sum();
        let (trace_content, model) = match &needle.density {
            Some(h) => {
                let trace = trace_on_needle(&needle.t, &needle.weights, &inside)?;
                (
                    minkowski_content(h, &trace)?,
                    model_profile(k, n, needle.length(), v)?.value,
                )
            }
            None => (0.0, 0.0),
        };
        Ok(NeedleTerm {
            index: i,
            weight: needle.quotient_weight,
            length: needle.length(),
            trace_mass: if total > 0.0 { in_mass / total } else { 0.0 },
            trace_content,
            model,
        })
    });
    report.needles = terms.into_iter().collect::<Result<_>>()?;
    report.transport_mass = dec.transport_mass();
    report.off_transport = dec.off_transport.len();
    report.model_bound = report.needles.iter().map(|t| t.weight * t.model).sum();
    report.trace_bound = report.needles.iter().map(|t| t.weight * t.trace_content).sum();
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct RigidityOptions {
    /// Allowed relative distance of the cap content from the model value.
    pub model_tol_rel: f64,
    /// Allowed shortfall of a competitor below the cap; defaults to the
    /// slack at the smallest rung.
    pub competitor_tol: Option<f64>,
    pub ladder: EpsLadder,
    pub slack: Slack,
    /// Base masses of `Q₁` in the split competitors.
    pub split_fractions: Vec<f64>,
    /// Height rows of the centres of tilted balls.
    pub tilt_rows: Vec<usize>,
}

impl Default for RigidityOptions {
    fn default() -> Self {
        RigidityOptions {
            model_tol_rel: 0.1,
            competitor_tol: None,
            ladder: EpsLadder::default(),
            slack: Slack::default(),
            split_fractions: vec![0.5, 0.25],
            tilt_rows: vec![2, 5, 10],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Competitor {
    pub family: String,
    pub label: String,
    pub mass: f64,
    pub content: f64,
    /// `content − cap content`.
    pub margin: f64,
    /// `min(v, 1−v)·(m_Y⁺(Q₁) + m_Y⁺(Q₂))` for split competitors.
    pub predicted_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub n_dim: f64,
    pub v: f64,
    pub r_v: f64,
    pub cap_mass: f64,
    pub cap_content: f64,
    /// `I_{N−1,N,∞}(cap mass)`.
    pub model: f64,
    pub model_ok: bool,
    pub tolerance: f64,
    pub competitors: Vec<Competitor>,
    pub competitors_ok: bool,
}

impl RigidityReport {
    pub fn passed(&self) -> bool {
        self.model_ok && self.competitors_ok
    }
}

struct SuspensionLayout {
    t: Vec<f64>,
    base: Vec<Option<usize>>,
    rows: Vec<f64>,
}

fn suspension_layout(s: &FiniteMMS) -> Result<SuspensionLayout> {
    let labels = match s.labels() {
        Some(l) if s.meta().kind == "suspension" && l.iter().all(|x| x.len() == 2) => l,
        _ => return domain("rigidity check needs a space from gen_suspension"),
    };
    let t: Vec<f64> = labels.iter().map(|l| l[0]).collect();
    let base = labels
        .iter()
        .map(|l| (l[1] >= 0.0).then_some(l[1] as usize))
        .collect();
    let mut rows = t.clone();
    rows.sort_by(f64::total_cmp);
    rows.dedup();
    Ok(SuspensionLayout { t, base, rows })
}

/// Base space recovered from the row nearest the equator through
/// `cos d_Y = (cos d − cos²t)/sin²t`.
fn recover_base(s: &FiniteMMS, lay: &SuspensionLayout) -> Result<(FiniteMMS, Vec<usize>)> {
    let t_eq = lay
        .rows
        .iter()
        .copied()
        .min_by(|a, b| (a - FRAC_PI_2).abs().total_cmp(&(b - FRAC_PI_2).abs()))
        .unwrap_or(FRAC_PI_2);
    let mut row: Vec<(usize, usize)> = (0..s.len())
        .filter(|&i| lay.t[i] == t_eq)
        .filter_map(|i| lay.base[i].map(|j| (j, i)))
        .collect();
    row.sort();
    let m = row.len();
    if m == 0 {
        return domain("suspension has no interior row");
    }
    let (st, ct) = (t_eq.sin(), t_eq.cos());
    let mut dist = vec![0.0; m * m];
    for a in 0..m {
        for b in (a + 1)..m {
            let c = ((s.d(row[a].1, row[b].1).cos() - ct * ct) / (st * st)).clamp(-1.0, 1.0);
            dist[a * m + b] = c.acos();
            dist[b * m + a] = c.acos();
        }
    }
    let w: Vec<f64> = row.iter().map(|&(_, i)| s.weights()[i]).collect();
    let total: f64 = w.iter().sum();
    let base = FiniteMMS::new(
        dist,
        w.iter().map(|x| x / total).collect(),
        None,
        SpaceMeta {
            kind: "base".into(),
            ..SpaceMeta::default()
        },
    )?;
    Ok((base, row.iter().map(|&(j, _)| j).collect()))
}

/// Compares the polar cap `{t ≤ r_v}` of a suspension with the model value
/// `I_{N−1,N,∞}` and with tilted balls, two-sided bands and split sets
/// `[0,r_v]×Q₁ ∪ [π−r_v,π]×Q₂`.
pub fn rigidity_cap_check(s: &FiniteMMS, v: f64, opts: &RigidityOptions) -> Result<RigidityReport> {
    if !(0.0..=1.0).contains(&v) {
        return domain(format!("v must lie in [0, 1], got {v}"));
    }
    let lay = suspension_layout(s)?;
    let n_dim = match s.meta().n {
        Some(n) if n >= 2.0 => n,
        _ => return domain("suspension metadata lacks N"),
    };
    let res = s.resolution();
    let eps = opts.ladder.resolve(res)?;
    let tolerance = opts
        .competitor_tol
        .unwrap_or_else(|| opts.slack.at(eps.iter().copied().fold(f64::INFINITY, f64::min), res));
    let model_density = Density1D::closed_form(Shape::SinPow { rate: 1.0, power: n_dim - 1.0 }, 0.0, PI)?;
    let r_v = model_density.quantile(v);
    let row_tol = 1e-9;
    let cap: Vec<bool> = lay.t.iter().map(|&t| t <= r_v + row_tol).collect();
    let cap_mass = s.mass(&cap);
    let content = |set: &[bool]| ladder_min(&rung_values(s, set, &eps)).map_or(0.0, |m| m.1);
    let cap_content = content(&cap);
    let model = model_profile(n_dim - 1.0, n_dim, f64::INFINITY, cap_mass)?.value;
    let model_ok = (cap_content - model).abs() <= opts.model_tol_rel * model.max(f64::MIN_POSITIVE) + 1e-12;

    let mut sets: Vec<(String, String, Vec<bool>, Option<f64>)> = Vec::new();
    let pole = (0..s.len()).find(|&i| lay.t[i] == 0.0);
    let base0 = |row: usize| {
        let t = lay.rows.get(row).copied();
        (0..s.len()).find(|&i| Some(lay.t[i]) == t && lay.base[i] == Some(0))
    };
    for &j in &opts.tilt_rows {
        if let Some(c) = base0(j) {
            sets.push((
                "tilted".into(),
                format!("ball@row{j}"),
                prefix_set(s, &ball_order(s, c), cap_mass),
                None,
            ));
        }
    }
    let eq: Vec<f64> = lay.t.iter().map(|t| (t - FRAC_PI_2).abs()).collect();
    sets.push(("band".into(), "equatorial".into(), prefix_set(s, &order_by(&eq), cap_mass), None));
    let polar: Vec<f64> = lay.t.iter().map(|&t| t.min(PI - t)).collect();
    sets.push(("band".into(), "double-cap".into(), prefix_set(s, &order_by(&polar), cap_mass), None));

    if !opts.split_fractions.is_empty() && pole.is_some() {
        let (base, base_index) = recover_base(s, &lay)?;
        let base_eps = EpsLadder::default().resolve(base.resolution())?;
        let lambda = v.min(1.0 - v);
        for &q in &opts.split_fractions {
            let q1_local = prefix_set(&base, &ball_order(&base, 0), q);
            let q2_local: Vec<bool> = q1_local.iter().map(|b| !b).collect();
            let bc = |set: &[bool]| ladder_min(&rung_values(&base, set, &base_eps)).map_or(0.0, |m| m.1);
            let predicted = lambda * (bc(&q1_local) + bc(&q2_local));
            let mut q1 = vec![false; base_index.iter().max().map_or(0, |m| m + 1)];
            for (local, &j) in base_index.iter().enumerate() {
                q1[j] = q1_local[local];
            }
            let set: Vec<bool> = (0..s.len())
                .map(|i| {
                    let t = lay.t[i];
                    let in_q1 = match lay.base[i] {
                        Some(j) => q1.get(j).copied().unwrap_or(false),
                        None => (t == 0.0) == (q >= 0.5),
                    };
                    (t <= r_v + row_tol && in_q1) || (t >= PI - r_v - row_tol && !in_q1)
                })
                .collect();
            sets.push(("split".into(), format!("q1={q}"), set, Some(predicted)));
        }
    }

    let evaluated = par_map(&sets, |(_, _, set, _)| (s.mass(set), content(set)));
    let competitors: Vec<Competitor> = sets
        .into_iter()
        .zip(evaluated)
        .map(|((family, label, _, predicted_gap), (mass, c))| Competitor {
            family,
            label,
            mass,
            content: c,
            margin: c - cap_content,
            predicted_gap,
        })
        .collect();
    let competitors_ok = competitors.iter().all(|c| c.margin >= -tolerance);
    Ok(RigidityReport {
        n_dim,
        v,
        r_v,
        cap_mass,
        cap_content,
        model,
        model_ok,
        tolerance,
        competitors,
        competitors_ok,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterGap {
    pub n: f64,
    pub delta: f64,
    /// `N − 1 − δ`.
    pub k: f64,
    /// `N + δ`.
    pub n_eff: f64,
    pub d: f64,
    pub v: f64,
    pub finite: f64,
    pub infinite: f64,
    /// `finite − infinite`.
    pub eta: f64,
}

impl DiameterGap {
    pub fn positive(&self) -> bool {
        self.eta > 0.0
    }
}

fn check_delta(n: f64, delta: f64) -> Result<()> {
    if !(n.is_finite() && n > 1.0) {
        return domain(format!("N must exceed 1, got {n}"));
    }
    if !(0.0..=0.5 * (n - 1.0)).contains(&delta) {
        return domain(format!("δ must lie in [0, (N−1)/2], got {delta}"));
    }
    Ok(())
}

/// `η̂ = I_{N−1−δ,N+δ,D}(v) − I_{N−1−δ,N+δ,∞}(v)` for `D ∈ (0, π)`.
pub fn diameter_gap(n: f64, delta: f64, d: f64, v: f64) -> Result<DiameterGap> {
    check_delta(n, delta)?;
    if !(d > 0.0 && d < PI) {
        return domain(format!("D must lie in (0, π), got {d}"));
    }
    let (k, n_eff) = (n - 1.0 - delta, n + delta);
    let finite = model_profile(k, n_eff, d, v)?.value;
    let infinite = model_profile(k, n_eff, f64::INFINITY, v)?.value;
    Ok(DiameterGap {
        n,
        delta,
        k,
        n_eff,
        d,
        v,
        finite,
        infinite,
        eta: finite - infinite,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCurve {
    pub points: Vec<DiameterGap>,
    /// `η̂` non-increasing along the increasing `D` grid.
    pub monotone: bool,
    pub positive: bool,
}

pub fn diameter_gap_curve(n: f64, delta: f64, v: f64, d_grid: &[f64]) -> Result<GapCurve> {
    let mut grid = d_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let points = par_map(&grid, |&d| diameter_gap(n, delta, d, v))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let monotone = points.windows(2).all(|w| w[1].eta <= w[0].eta + 1e-9);
    let positive = points.iter().all(|p| p.positive());
    Ok(GapCurve {
        points,
        monotone,
        positive,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaContinuity {
    pub n: f64,
    pub v: f64,
    pub deltas: Vec<f64>,
    /// `I_{N−1−δ,N+δ,∞}(v)`.
    pub values: Vec<f64>,
    pub max_jump: f64,
    /// Largest `|ΔI|/Δδ` between neighbours.
    pub constant: f64,
}

pub fn profile_continuity_in_delta(n: f64, v: f64, deltas: &[f64]) -> Result<DeltaContinuity> {
    let mut grid = deltas.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    for &d in &grid {
        check_delta(n, d)?;
    }
    let values = par_map(&grid, |&d| model_profile(n - 1.0 - d, n + d, f64::INFINITY, v).map(|p| p.value))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (mut max_jump, mut constant) = (0.0f64, 0.0f64);
    for i in 1..grid.len() {
        let jump = (values[i] - values[i - 1]).abs();
        max_jump = max_jump.max(jump);
        constant = constant.max(jump / (grid[i] - grid[i - 1]));
    }
    Ok(DeltaContinuity {
        n,
        v,
        deltas: grid,
        values,
        max_jump,
        constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density1d::named_density;
    use crate::mms::{gen_interval, gen_sphere, minkowski_ladder};

    #[test]
    fn rung_values_match_the_mms_ladder() {
        let x = gen_sphere(2, 300, 3).unwrap();
        let set = prefix_set(&x, &ball_order(&x, 0), 0.3);
        let eps = EpsLadder::default().resolve(x.resolution()).unwrap();
        let ours = rung_values(&x, &set, &eps);
        let theirs = minkowski_ladder(&x, &set).unwrap();
        for (a, b) in ours.iter().zip(&theirs.rungs) {
            assert!((a.value.unwrap() - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_rungs_are_skipped() {
        let x = gen_interval(&named_density("uniform").unwrap(), 11).unwrap();
        let set: Vec<bool> = (0..11).map(|i| i < 10).collect();
        let rungs = rung_values(&x, &set, &[0.05, 0.2]);
        assert!(rungs[0].value.is_some());
        assert!(rungs[1].value.is_none());
    }

    #[test]
    fn prefix_takes_half_weight_rule() {
        let x = gen_interval(&named_density("uniform").unwrap(), 11).unwrap();
        let order: Vec<usize> = (0..11).collect();
        let set = prefix_set(&x, &order, 0.32);
        assert!((x.mass(&set) - 0.35).abs() < 1e-12);
    }

    #[test]
    fn trivial_masses_have_zero_content() {
        let x = gen_interval(&named_density("sin").unwrap(), 41).unwrap();
        let r = compare_profile(&x, 1.0, 2.0, &[0.0, 1.0], &CompareOptions { potentials: 0, ..Default::default() }).unwrap();
        for row in &r.rows {
            assert_eq!(row.model, 0.0);
            assert_eq!(row.i_hat, Some(0.0));
        }
        assert!(r.passed());
    }

    #[test]
    fn full_set_has_zero_needle_bound() {
        let x = gen_interval(&named_density("uniform").unwrap(), 21).unwrap();
        let r = needle_lower_bound(&x, &[true; 21], 0.0, 2.0, &NeedleBoundOptions::default()).unwrap();
        assert_eq!(r.model_bound, 0.0);
        assert_eq!(r.measured, 0.0);
        assert!(r.needles.is_empty());
    }

    #[test]
    fn trace_merges_adjacent_cells() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let w = [0.5, 1.0, 1.0, 0.5];
        let tr = trace_on_needle(&t, &w, &[true, true, false, true]).unwrap();
        assert_eq!(tr.components(), &[(0.0, 1.5), (2.5, 3.0)]);
    }

    #[test]
    fn diameter_gap_domain() {
        assert!(diameter_gap(2.0, 0.0, PI, 0.5).is_err());
        assert!(diameter_gap(2.0, 0.6, 2.0, 0.5).is_err());
        assert!(diameter_gap(1.0, 0.0, 2.0, 0.5).is_err());
        assert!(profile_continuity_in_delta(2.0, 0.5, &[0.0, 0.7]).is_err());
    }

    #[test]
    fn rigidity_needs_a_suspension() {
        let x = gen_sphere(2, 50, 1).unwrap();
        assert!(rigidity_cap_check(&x, 0.5, &RigidityOptions::default()).is_err());
    }
}
