//! Exact L¹ optimal transport on finite metric measure spaces.
//!
//! The Kantorovich problem is solved as a balanced transportation problem
//! with a primal network simplex on the bipartite source/sink graph. The dual
//! values give a potential on the transported points, which is extended to
//! the whole space by the inf-convolution `φ(x) = min_y d(x, y) + φ(y)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mms::FiniteMMS;

/// A real function on the points of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedFunction {
    pub values: Vec<f64>,
}

impl SignedFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return domain("function values must be finite");
        }
        Ok(SignedFunction { values })
    }

    pub fn positive_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.max(0.0)).collect()
    }

    pub fn negative_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| (-v).max(0.0)).collect()
    }

    /// `∫ f dm`.
    pub fn mean(&self, space: &FiniteMMS) -> f64 {
        self.values.iter().zip(space.weights()).map(|(f, w)| f * w).sum()
    }

    /// `∫ f₊ dm`.
    pub fn positive_mass(&self, space: &FiniteMMS) -> f64 {
        self.values
            .iter()
            .zip(space.weights())
            .map(|(f, w)| f.max(0.0) * w)
            .sum()
    }

    /// `χ_A − m(A)` for a point mask `A`; has zero mean by construction.
    pub fn centered_indicator(space: &FiniteMMS, set: &[bool]) -> Self {
        let m = space.mass(set);
        SignedFunction {
            values: set.iter().map(|&s| if s { 1.0 - m } else { -m }).collect(),
        }
    }

    /// Subtracts the mean so that `∫ f dm = 0`.
    pub fn centered(&self, space: &FiniteMMS) -> Self {
        let m = self.mean(space);
        SignedFunction {
            values: self.values.iter().map(|v| v - m).collect(),
        }
    }
}

/// One entry of a transport plan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub from: usize,
    pub to: usize,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub entries: Vec<PlanEntry>,
    pub cost: f64,
    /// Dual value per point on the support of either marginal: `φ(x)` with
    /// `φ(from) − φ(to) ≤ d`, equality on plan entries. `NaN` elsewhere.
    pub dual: Vec<f64>,
    pub pivots: usize,
}

/// A 1-Lipschitz Kantorovich potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub phi: Vec<f64>,
    /// `max_{x,y} φ(x) − φ(y) − d(x, y)`.
    pub lipschitz_defect: f64,
}

impl Potential {
    pub fn new(space: &FiniteMMS, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != space.len() {
            return domain("potential length differs from point count");
        }
        let lipschitz_defect = lipschitz_defect(space, &phi);
        Ok(Potential { phi, lipschitz_defect })
    }

    /// `∫ f φ dm`.
    pub fn objective(&self, space: &FiniteMMS, f: &SignedFunction) -> f64 {
        self.phi
            .iter()
            .zip(&f.values)
            .zip(space.weights())
            .map(|((p, f), w)| p * f * w)
            .sum()
    }
}

pub fn lipschitz_defect(space: &FiniteMMS, phi: &[f64]) -> f64 {
    let n = space.len();
    let mut worst = f64::NEG_INFINITY;
    for x in 0..n {
        let row = space.row(x);
        for y in 0..n {
            worst = worst.max(phi[x] - phi[y] - row[y]);
        }
    }
    worst
}

/// Solver options.
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Pivot budget; `None` means `100·(sources + sinks) + 1000`.
    pub max_pivots: Option<usize>,
    /// Marginal values at or below this are treated as absent.
    pub support_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_pivots: None,
            support_tol: 1e-15,
        }
    }
}

/// Optimal plan between two probability vectors on the points of `space`.
pub fn solve_plan(space: &FiniteMMS, mu0: &[f64], mu1: &[f64]) -> Result<TransportPlan> {
    solve_plan_with(space, mu0, mu1, &SolverOptions::default())
}

pub fn solve_plan_with(
    space: &FiniteMMS,
    mu0: &[f64],
    mu1: &[f64],
    opts: &SolverOptions,
) -> Result<TransportPlan> {
    let n = space.len();
    if mu0.len() != n || mu1.len() != n {
        return domain("marginals must have one entry per point");
    }
    if mu0.iter().chain(mu1).any(|v| !v.is_finite() || *v < 0.0) {
        return domain("marginals must be finite and nonnegative");
    }
    let (s0, s1): (f64, f64) = (mu0.iter().sum(), mu1.iter().sum());
    if (s0 - 1.0).abs() > 1e-10 || (s1 - 1.0).abs() > 1e-10 {
        return domain(format!("marginals must each sum to 1, got {s0} and {s1}"));
    }
    let sources: Vec<usize> = (0..n).filter(|&i| mu0[i] > opts.support_tol).collect();
    let sinks: Vec<usize> = (0..n).filter(|&i| mu1[i] > opts.support_tol).collect();
    let supply: Vec<f64> = sources.iter().map(|&i| mu0[i] / s0).collect();
    let demand: Vec<f64> = sinks.iter().map(|&j| mu1[j] / s1).collect();
    let cost: Vec<f64> = sources
        .iter()
        .flat_map(|&i| sinks.iter().map(move |&j| space.d(i, j)))
        .collect();
    let budget = opts
        .max_pivots
        .unwrap_or(100 * (sources.len() + sinks.len()) + 1000);
    let sol = TransportSimplex::new(supply, demand, cost).solve(budget)?;
    let mut dual = vec![f64::NAN; n];
    for (r, &i) in sources.iter().enumerate() {
        dual[i] = sol.u[r];
    }
    for (c, &j) in sinks.iter().enumerate() {
        // a point in both supports keeps the source value; the two agree
        // whenever the point ships mass to itself
        if dual[j].is_nan() {
            dual[j] = -sol.v[c];
        }
    }
    let entries = sol
        .flows
        .iter()
        .filter(|&&(_, _, x)| x > 0.0)
        .map(|&(r, c, x)| PlanEntry {
            from: sources[r],
            to: sinks[c],
            mass: x,
        })
        .collect();
    Ok(TransportPlan {
        entries,
        cost: sol.cost,
        dual,
        pivots: sol.pivots,
    })
}

/// Kantorovich solution for a zero-mean function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KantorovichSolution {
    pub plan: TransportPlan,
    pub potential: Potential,
    /// `∫ f₊ dm`.
    pub scale: f64,
    /// `∫ f φ dm`.
    pub objective: f64,
    /// `|∫ f φ dm − scale · cost|`.
    pub duality_gap: f64,
    /// Index where `φ` is pinned to zero.
    pub root: usize,
}

pub const MEAN_TOL: f64 = 1e-10;

/// 1-Lipschitz maximizer of `∫ f φ dm` together with the optimal plan
/// between the normalized positive and negative parts of `f`.
pub fn solve_potential(space: &FiniteMMS, f: &SignedFunction) -> Result<KantorovichSolution> {
    solve_potential_with(space, f, &SolverOptions::default())
}

pub fn solve_potential_with(
    space: &FiniteMMS,
    f: &SignedFunction,
    opts: &SolverOptions,
) -> Result<KantorovichSolution> {
    let n = space.len();
    if f.values.len() != n {
        return domain("function length differs from point count");
    }
    let scale = f.positive_mass(space);
    let mean = f.mean(space);
    let abs_mass: f64 = f.values.iter().zip(space.weights()).map(|(v, w)| v.abs() * w).sum();
    if mean.abs() > MEAN_TOL * abs_mass.max(1.0) {
        return domain(format!("function must have zero mean, got {mean:e}"));
    }
    if scale <= 0.0 {
        let potential = Potential::new(space, vec![0.0; n])?;
        return Ok(KantorovichSolution {
            plan: TransportPlan {
                entries: Vec::new(),
                cost: 0.0,
                dual: vec![f64::NAN; n],
                pivots: 0,
            },
            potential,
            scale: 0.0,
            objective: 0.0,
            duality_gap: 0.0,
            root: 0,
        });
    }
    let threshold = 1e-14 * f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let w = space.weights();
    let neg_scale: f64 = (0..n)
        .filter(|&i| f.values[i] < -threshold)
        .map(|i| -f.values[i] * w[i])
        .sum();
    let pos_scale: f64 = (0..n)
        .filter(|&i| f.values[i] > threshold)
        .map(|i| f.values[i] * w[i])
        .sum();
    let mu0: Vec<f64> = (0..n)
        .map(|i| if f.values[i] > threshold { f.values[i] * w[i] / pos_scale } else { 0.0 })
        .collect();
    let mu1: Vec<f64> = (0..n)
        .map(|i| if f.values[i] < -threshold { -f.values[i] * w[i] / neg_scale } else { 0.0 })
        .collect();
    let plan = solve_plan_with(space, &mu0, &mu1, opts)?;
    let support: Vec<usize> = (0..n).filter(|&i| !plan.dual[i].is_nan()).collect();
    let mut phi: Vec<f64> = (0..n)
        .map(|x| {
            let row = space.row(x);
            support
                .iter()
                .map(|&y| row[y] + plan.dual[y])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let root = 0;
    let shift = phi[root];
    phi.iter_mut().for_each(|p| *p -= shift);
    let potential = Potential::new(space, phi)?;
    let objective = potential.objective(space, f);
    let duality_gap = (objective - scale * plan.cost).abs();
    Ok(KantorovichSolution {
        plan,
        potential,
        scale,
        objective,
        duality_gap,
        root,
    })
}

/// Largest `|φ(x) − φ(y) − d(x,y)|` over plan entries.
pub fn plan_saturation_defect(space: &FiniteMMS, plan: &TransportPlan, phi: &[f64]) -> f64 {
    plan.entries
        .iter()
        .filter(|e| e.mass > 1e-12)
        .map(|e| (phi[e.from] - phi[e.to] - space.d(e.from, e.to)).abs())
        .fold(0.0, f64::max)
}

struct Solution {
    flows: Vec<(usize, usize, f64)>,
    u: Vec<f64>,
    v: Vec<f64>,
    cost: f64,
    pivots: usize,
}

/// Balanced transportation problem `min Σ c_ij x_ij` with row sums `supply`
/// and column sums `demand`, solved by the primal network simplex.
struct TransportSimplex {
    m: usize,
    n: usize,
    supply: Vec<f64>,
    demand: Vec<f64>,
    cost: Vec<f64>,
    /// Basic cells `(row, col, flow)`; always a spanning tree of `m + n − 1` cells.
    basis: Vec<(usize, usize, f64)>,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl TransportSimplex {
    fn new(supply: Vec<f64>, demand: Vec<f64>, cost: Vec<f64>) -> Self {
        let (m, n) = (supply.len(), demand.len());
        TransportSimplex {
            m,
            n,
            supply,
            demand,
            cost,
            basis: Vec::new(),
            row_adj: vec![Vec::new(); m],
            col_adj: vec![Vec::new(); n],
            u: vec![0.0; m],
            v: vec![0.0; n],
        }
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    fn add_basic(&mut self, i: usize, j: usize, x: f64) {
        let id = self.basis.len();
        self.basis.push((i, j, x));
        self.row_adj[i].push(id);
        self.col_adj[j].push(id);
    }

    /// Least-cost greedy start completed to a spanning tree with zero cells.
    fn initial_basis(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut order: Vec<usize> = (0..m * n).collect();
        order.sort_by(|&a, &b| self.cost[a].total_cmp(&self.cost[b]).then(a.cmp(&b)));
        let mut rem_s = self.supply.clone();
        let mut rem_d = self.demand.clone();
        let mut uf = UnionFind::new(m + n);
        let mut row_open = vec![true; m];
        let mut col_open = vec![true; n];
        // each allocation closes exactly one line, which keeps the cells acyclic
        for &cell in &order {
            if self.basis.len() == m + n - 1 {
                break;
            }
            let (i, j) = (cell / n, cell % n);
            if !row_open[i] || !col_open[j] {
                continue;
            }
            let x = if rem_s[i] <= rem_d[j] {
                let x = rem_s[i];
                rem_d[j] -= x;
                rem_s[i] = 0.0;
                row_open[i] = false;
                x
            } else {
                let x = rem_d[j];
                rem_s[i] -= x;
                rem_d[j] = 0.0;
                col_open[j] = false;
                x
            };
            uf.union(i, m + j);
            self.add_basic(i, j, x);
        }
        // lines left open only by round-off are joined with zero cells
        if self.basis.len() < m + n - 1 {
            for &cell in &order {
                let (i, j) = (cell / n, cell % n);
                if uf.find(i) != uf.find(m + j) {
                    uf.union(i, m + j);
                    self.add_basic(i, j, 0.0);
                    if self.basis.len() == m + n - 1 {
                        break;
                    }
                }
            }
        }
    }

    fn compute_duals(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::new();
        self.u[0] = 0.0;
        seen[0] = true;
        queue.push_back(0usize);
        while let Some(node) = queue.pop_front() {
            let adj = if node < m { &self.row_adj[node] } else { &self.col_adj[node - m] };
            for &id in adj {
                let (i, j, _) = self.basis[id];
                let c = self.cost[i * n + j];
                if node < m {
                    if !seen[m + j] {
                        seen[m + j] = true;
                        self.v[j] = c - self.u[i];
                        queue.push_back(m + j);
                    }
                } else if !seen[i] {
                    seen[i] = true;
                    self.u[i] = c - self.v[j];
                    queue.push_back(i);
                }
            }
        }
    }

    /// Basic cell ids on the tree path from row `i` to column `j`.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let (m, n) = (self.m, self.n);
        let mut parent: Vec<Option<usize>> = vec![None; m + n];
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::new();
        seen[i] = true;
        queue.push_back(i);
        let target = m + j;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            let adj = if node < m { &self.row_adj[node] } else { &self.col_adj[node - m] };
            for &id in adj {
                let (r, c, _) = self.basis[id];
                let next = if node < m { m + c } else { r };
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some(id);
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != i {
            let id = parent[node].expect("basis is a spanning tree");
            path.push(id);
            let (r, c, _) = self.basis[id];
            node = if node < m { m + c } else { r };
        }
        // path[0] touches column j; alternate signs starting with −
        path
    }

    fn remove_basic(&mut self, id: usize) {
        let (i, j, _) = self.basis[id];
        self.row_adj[i].retain(|&x| x != id);
        self.col_adj[j].retain(|&x| x != id);
    }

    fn solve(mut self, budget: usize) -> Result<Solution> {
        let (m, n) = (self.m, self.n);
        if m == 0 || n == 0 {
            return Err(Error::Solver("empty marginal support".into()));
        }
        self.initial_basis();
        self.compute_duals();
        let scale = self.cost.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
        let tol = 1e-12 * scale;
        let block = ((m as f64).sqrt().ceil() as usize).max(1);
        let mut next_row = 0usize;
        let mut pivots = 0usize;
        loop {
            // block pricing: scan rows cyclically, stop after a block with a candidate
            let mut best: Option<(usize, usize, f64)> = None;
            let mut scanned = 0;
            while scanned < m {
                let i = (next_row + scanned) % m;
                let ui = self.u[i];
                let row = &self.cost[i * n..(i + 1) * n];
                for (j, &c) in row.iter().enumerate() {
                    let r = c - ui - self.v[j];
                    if r < -tol && best.map_or(true, |b| r < b.2) {
                        best = Some((i, j, r));
                    }
                }
                scanned += 1;
                if best.is_some() && scanned % block == 0 {
                    break;
                }
            }
            next_row = (next_row + scanned) % m;
            let Some((ei, ej, _)) = best else { break };
            if pivots >= budget {
                return Err(Error::Solver(format!(
                    "transport simplex exceeded {budget} pivots without reaching optimality"
                )));
            }
            pivots += 1;
            let path = self.path(ei, ej);
            // cells at even positions lose flow
            let mut theta = f64::INFINITY;
            let mut leave = usize::MAX;
            for (k, &id) in path.iter().enumerate() {
                if k % 2 == 0 {
                    let (r, c, x) = self.basis[id];
                    let better = x < theta
                        || (x == theta && leave != usize::MAX && {
                            let (lr, lc, _) = self.basis[leave];
                            (r, c) < (lr, lc)
                        });
                    if better {
                        theta = x;
                        leave = id;
                    }
                }
            }
            for (k, &id) in path.iter().enumerate() {
                let x = &mut self.basis[id].2;
                if k % 2 == 0 {
                    *x = (*x - theta).max(0.0);
                } else {
                    *x += theta;
                }
            }
            self.basis[leave].2 = 0.0;
            self.remove_basic(leave);
            // reuse the leaving slot for the entering cell
            self.basis[leave] = (ei, ej, theta);
            self.row_adj[ei].push(leave);
            self.col_adj[ej].push(leave);
            self.compute_duals();
        }
        let cost = self.basis.iter().map(|&(i, j, x)| x * self.c(i, j)).sum();
        Ok(Solution {
            flows: self.basis.clone(),
            u: self.u,
            v: self.v,
            cost,
            pivots,
        })
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
