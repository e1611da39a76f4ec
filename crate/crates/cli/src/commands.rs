use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use isoprofile::density1d::load_density;
use isoprofile::iso1d::{oracle_stride, profile_bruteforce, profile_structured};
use isoprofile::l1ot::{solve_potential, SignedFunction};
use isoprofile::mms::{gen_interval, gen_sphere, gen_suspension, FiniteMMS};
use isoprofile::model_profiles::{profile_curve, ProfileMode};
use isoprofile::needles::{
    build_structure_from, check_d2_monotone, check_needles, extract_needles, NeedleOptions, Tolerances,
};
use isoprofile::verify::{
    compare_profile, diameter_gap, diameter_gap_curve, needle_lower_bound, persistent_violations,
    profile_continuity_in_delta, rigidity_cap_check, CompareOptions, EpsLadder, NeedleBoundOptions, RigidityOptions,
    Slack, SLACK_C_EPS, SLACK_C_RES,
};

use crate::exit::Failure;
use crate::output::{int, jnum, num, text, write_json, Table};
use crate::{Cli, Command, Format, L1otCommand, MmsCommand, NeedlesCommand, VerifyCommand};

type Outcome = Result<(), Failure>;

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dispatch,
    Infimum,
}

#[derive(Args, Debug, Serialize)]
pub struct ModelProfileArgs {
    #[arg(long = "K", allow_hyphen_values = true)]
    #[serde(rename = "K")]
    pub k: f64,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: f64,
    /// Diameter bound; `inf` for none.
    #[arg(long = "D")]
    #[serde(rename = "D")]
    pub d: String,
    /// Number of equispaced volumes in [0, 1].
    #[arg(long = "v-grid", default_value_t = 11)]
    #[serde(rename = "v-grid")]
    pub v_grid: usize,
    #[arg(long, value_enum, default_value_t = Mode::Dispatch)]
    pub mode: Mode,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IsoMethod {
    Structured,
    Bruteforce,
}

#[derive(Args, Debug, Serialize)]
pub struct Iso1dArgs {
    /// Density CSV file (`t,h`) or a catalog name such as `sin`.
    #[arg(long)]
    pub density: String,
    #[arg(long = "v-grid", default_value_t = 21)]
    #[serde(rename = "v-grid")]
    pub v_grid: usize,
    #[arg(long, value_enum, default_value_t = IsoMethod::Structured)]
    pub method: IsoMethod,
    /// Grid stride of the brute-force search; defaults to the oracle stride.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Interval,
    Sphere,
    Suspension,
}

#[derive(Args, Debug, Serialize)]
pub struct MmsGenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Points (interval, sphere) or heights (suspension).
    #[arg(long)]
    pub n: usize,
    /// Sphere dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Interval density file or catalog name.
    #[arg(long, default_value = "uniform")]
    pub density: String,
    /// Suspension base space; a circle of `base-n` points when absent.
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long = "base-n", default_value_t = 64)]
    #[serde(rename = "base-n")]
    pub base_n: usize,
    /// Suspension dimension parameter.
    #[arg(long = "N", default_value_t = 2.0)]
    #[serde(rename = "N")]
    pub n_dim: f64,
    /// File stem inside the output directory.
    #[arg(long, default_value = "space")]
    pub name: String,
}

#[derive(Args, Debug, Serialize)]
pub struct L1otArgs {
    /// Space stem or `.dist.csv` file.
    #[arg(long)]
    pub space: PathBuf,
    /// One-column CSV of function values with a header line.
    #[arg(long)]
    pub f: PathBuf,
    /// Subtract the mean of `f` before solving.
    #[arg(long, default_value_t = false, num_args = 0..=1, default_missing_value = "true")]
    pub center: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct NeedlesArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub f: PathBuf,
    #[arg(long, default_value_t = false, num_args = 0..=1, default_missing_value = "true")]
    pub center: bool,
    /// Curvature bound; defaults to the space metadata.
    #[arg(long = "K", allow_hyphen_values = true)]
    #[serde(rename = "K")]
    pub k: Option<f64>,
    /// Dimension bound; defaults to the space metadata.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<f64>,
    /// Ray separation; exact saturation when absent.
    #[arg(long = "ray-tol")]
    #[serde(rename = "ray-tol")]
    pub ray_tol: Option<f64>,
    /// Tolerance of the per-needle curvature checks.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long = "points-per-bin", default_value_t = 1)]
    #[serde(rename = "points-per-bin")]
    pub points_per_bin: usize,
    /// Sampled tuples for the d²-monotonicity check.
    #[arg(long, default_value_t = 1000)]
    pub tuples: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long = "K", allow_hyphen_values = true)]
    #[serde(rename = "K")]
    pub k: Option<f64>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
    pub v: Vec<f64>,
    #[arg(long, default_value_t = 16)]
    pub centers: usize,
    #[arg(long, default_value_t = 2)]
    pub potentials: usize,
    /// Absolute ε rungs; multiples of the resolution when absent.
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    /// Finer sample of the same space used to confirm violations.
    #[arg(long)]
    pub refine: Option<PathBuf>,
    /// One-column 0/1 CSV masks evaluated as extra candidates.
    #[arg(long = "user-sets", value_delimiter = ',')]
    #[serde(rename = "user-sets")]
    pub user_sets: Vec<PathBuf>,
    #[arg(long = "c-eps", default_value_t = SLACK_C_EPS)]
    #[serde(rename = "c-eps")]
    pub c_eps: f64,
    #[arg(long = "c-res", default_value_t = SLACK_C_RES)]
    #[serde(rename = "c-res")]
    pub c_res: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct NeedleBoundArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// One-column 0/1 CSV mask of the set.
    #[arg(long, conflicts_with = "center")]
    pub set: Option<PathBuf>,
    /// Ball set: centre point index.
    #[arg(long, requires = "radius")]
    pub center: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long = "K", allow_hyphen_values = true)]
    #[serde(rename = "K")]
    pub k: Option<f64>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<f64>,
    #[arg(long = "ray-tol")]
    #[serde(rename = "ray-tol")]
    pub ray_tol: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct RigidityArgs {
    /// A space written by `mms gen --kind suspension`.
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub v: f64,
    #[arg(long = "model-tol", default_value_t = 0.1)]
    #[serde(rename = "model-tol")]
    pub model_tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct DiamGapArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long = "D")]
    #[serde(rename = "D")]
    pub d: f64,
    #[arg(long)]
    pub v: f64,
    /// Also evaluate this many equispaced diameters in [D, π).
    #[arg(long, default_value_t = 0)]
    pub curve: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct DeltaContArgs {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: f64,
    #[arg(long)]
    pub v: f64,
    /// Number of equispaced δ in [0, (N−1)/2].
    #[arg(long = "delta-grid", default_value_t = 11)]
    #[serde(rename = "delta-grid")]
    pub delta_grid: usize,
    /// Largest allowed jump between neighbouring δ.
    #[arg(long = "max-jump", default_value_t = 0.1)]
    #[serde(rename = "max-jump")]
    pub max_jump: f64,
}

pub fn run(cli: &Cli) -> Outcome {
    let dir = cli.global.output_dir.clone();
    fs::create_dir_all(&dir).map_err(Failure::io)?;
    let global = to_value(&cli.global)?;
    let (name, args, result) = match &cli.command {
        Command::ModelProfile(a) => ("model-profile", to_value(a)?, model_profile(cli, &dir, a)),
        Command::Iso1d(a) => ("iso1d", to_value(a)?, iso1d(cli, &dir, a)),
        Command::Mms(MmsCommand::Gen(a)) => ("mms gen", to_value(a)?, mms_gen(cli, &dir, a)),
        Command::L1ot(L1otCommand::Solve(a)) => ("l1ot solve", to_value(a)?, l1ot_solve(&dir, a)),
        Command::Needles(NeedlesCommand::Run(a)) => ("needles run", to_value(a)?, needles_run(cli, &dir, a)),
        Command::Verify(VerifyCommand::Compare(a)) => ("verify compare", to_value(a)?, compare(cli, &dir, a)),
        Command::Verify(VerifyCommand::NeedleBound(a)) => ("verify needle-bound", to_value(a)?, needle_bound(&dir, a)),
        Command::Verify(VerifyCommand::Rigidity(a)) => ("verify rigidity", to_value(a)?, rigidity(&dir, a)),
        Command::Verify(VerifyCommand::DiamGap(a)) => ("verify diam-gap", to_value(a)?, diam_gap(&dir, a)),
        Command::Verify(VerifyCommand::DeltaCont(a)) => ("verify delta-cont", to_value(a)?, delta_cont(&dir, a)),
    };
    if matches!(result, Ok(()) | Err(Failure::Regression(_))) {
        crate::config::write(&dir, name, &[global, args])?;
    }
    result
}

fn to_value<T: Serialize>(t: &T) -> Result<Value, Failure> {
    serde_json::to_value(t).map_err(|e| Failure::Runtime(e.to_string()))
}

fn grid(n: usize, hi: f64) -> Result<Vec<f64>, Failure> {
    if n < 2 {
        return Err(Failure::Domain(format!("grid needs at least 2 points, got {n}")));
    }
    Ok((0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect())
}

fn parse_diameter(s: &str) -> Result<f64, Failure> {
    let t = s.trim();
    if t == "∞" {
        return Ok(f64::INFINITY);
    }
    t.parse::<f64>()
        .map_err(|_| Failure::Usage(format!("invalid diameter '{s}'")))
}

fn read_column(path: &Path) -> Result<Vec<f64>, Failure> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
        let cell = rec.get(0).unwrap_or("").trim();
        let x = cell
            .parse::<f64>()
            .map_err(|_| Failure::Domain(format!("{}: row {}: bad number '{cell}'", path.display(), i + 1)))?;
        out.push(x);
    }
    Ok(out)
}

fn read_mask(path: &Path, n: usize) -> Result<Vec<bool>, Failure> {
    let col = read_column(path)?;
    if col.len() != n {
        return Err(Failure::Domain(format!(
            "{}: {} entries for {n} points",
            path.display(),
            col.len()
        )));
    }
    Ok(col.into_iter().map(|x| x != 0.0).collect())
}

fn read_function(path: &Path, space: &FiniteMMS, center: bool) -> Result<SignedFunction, Failure> {
    let values = read_column(path)?;
    if values.len() != space.len() {
        return Err(Failure::Domain(format!(
            "{}: {} values for {} points",
            path.display(),
            values.len(),
            space.len()
        )));
    }
    let f = SignedFunction::new(values)?;
    Ok(if center { f.centered(space) } else { f })
}

fn load_space(path: &Path) -> Result<FiniteMMS, Failure> {
    Ok(FiniteMMS::load(path)?)
}

fn claim(space: &FiniteMMS, k: Option<f64>, n: Option<f64>) -> Result<(f64, f64), Failure> {
    let meta = space.meta();
    match (k.or(meta.k), n.or(meta.n)) {
        (Some(k), Some(n)) => Ok((k, n)),
        _ => Err(Failure::Domain("no (K, N) given and none in the space metadata".into())),
    }
}

fn model_profile(cli: &Cli, dir: &Path, a: &ModelProfileArgs) -> Outcome {
    let d = parse_diameter(&a.d)?;
    let mode = match a.mode {
        Mode::Dispatch => ProfileMode::Dispatch,
        Mode::Infimum => ProfileMode::Infimum,
    };
    let rows = profile_curve(a.k, a.n, d, &grid(a.v_grid, 1.0)?, mode)?;
    match cli.global.format {
        Format::Csv => {
            let mut t = Table::new(&["v", "value", "case", "argmin_params"]);
            for r in &rows {
                t.row(&[num(r.v), num(r.value), text(r.case.to_string()), text(r.argmin.clone())]);
            }
            t.write(dir, "model_profile.csv")?;
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| json!({"v": r.v, "value": r.value, "case": r.case, "argmin_params": r.argmin}))
                .collect();
            let body = json!({"K": a.k, "N": a.n, "D": jnum(d), "rows": rows});
            write_json(dir, "model_profile.json", "model-profile", body)?;
        }
    }
    Ok(())
}

fn iso1d(cli: &Cli, dir: &Path, a: &Iso1dArgs) -> Outcome {
    let d = load_density(&a.density)?;
    let stride = a.stride.unwrap_or_else(|| oracle_stride(&d));
    let mut rows = Vec::new();
    for v in grid(a.v_grid, 1.0)? {
        let r = match a.method {
            IsoMethod::Structured => profile_structured(&d, v)?,
            IsoMethod::Bruteforce => profile_bruteforce(&d, v, 2, stride)?,
        };
        rows.push(r);
    }
    match cli.global.format {
        Format::Csv => {
            let mut t = Table::new(&["v", "value", "method", "l", "r"]);
            for r in &rows {
                let (l, rr) = r.endpoints();
                t.row(&[num(r.v), num(r.value), text(r.method.to_string()), num(l), num(rr)]);
            }
            t.write(dir, "iso1d.csv")?;
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let (l, rr) = r.endpoints();
                    json!({"v": r.v, "value": r.value, "method": r.method, "l": jnum(l), "r": jnum(rr),
                           "components": r.minimizer.components()})
                })
                .collect();
            write_json(dir, "iso1d.json", "iso1d", json!({"density": a.density, "rows": rows}))?;
        }
    }
    Ok(())
}

fn mms_gen(cli: &Cli, dir: &Path, a: &MmsGenArgs) -> Outcome {
    let space = match a.kind {
        Kind::Interval => gen_interval(&load_density(&a.density)?, a.n)?,
        Kind::Sphere => gen_sphere(a.dim, a.n, cli.global.seed)?,
        Kind::Suspension => {
            let base = match &a.base {
                Some(p) => load_space(p)?,
                None => gen_sphere(1, a.base_n, cli.global.seed)?,
            };
            gen_suspension(&base, a.n_dim, a.n)?
        }
    };
    let stem = dir.join(&a.name);
    space.save(&stem)?;
    println!("{}", stem.display());
    Ok(())
}

fn l1ot_solve(dir: &Path, a: &L1otArgs) -> Outcome {
    let space = load_space(&a.space)?;
    let f = read_function(&a.f, &space, a.center)?;
    let sol = solve_potential(&space, &f)?;
    let mut phi = Table::new(&["point", "phi"]);
    for (i, p) in sol.potential.phi.iter().enumerate() {
        phi.row(&[int(i), num(*p)]);
    }
    phi.write(dir, "potential.csv")?;
    let mut plan = Table::new(&["from", "to", "mass"]);
    for e in &sol.plan.entries {
        plan.row(&[int(e.from), int(e.to), num(e.mass)]);
    }
    plan.write(dir, "plan.csv")?;
    let body = json!({
        "cost": sol.plan.cost,
        "scale": sol.scale,
        "objective": sol.objective,
        "duality_gap": sol.duality_gap,
        "lipschitz_defect": sol.potential.lipschitz_defect,
        "pivots": sol.plan.pivots,
        "potential_file": "potential.csv",
        "plan_file": "plan.csv",
    });
    write_json(dir, "l1ot.json", "l1ot solve", body)?;
    Ok(())
}

fn needles_run(cli: &Cli, dir: &Path, a: &NeedlesArgs) -> Outcome {
    let space = load_space(&a.space)?;
    let (k, n) = claim(&space, a.k, a.n)?;
    let f = read_function(&a.f, &space, a.center)?;
    let sol = solve_potential(&space, &f)?;
    let tol = match a.ray_tol {
        Some(r) => Tolerances::sampled(&space, r),
        None => Tolerances::exact(&space),
    };
    let s = build_structure_from(&space, &sol, tol)?;
    let opts = NeedleOptions {
        points_per_bin: a.points_per_bin,
        ..Default::default()
    };
    let dec = extract_needles(&s, &space, &opts)?;
    let check = check_needles(&dec.needles, &f, k, n, a.tol)?;
    let mono = check_d2_monotone(&s, &space, a.tuples, 4, cli.global.seed, 1e-9);
    let mut chains = Table::new(&["needle", "position", "point", "t", "weight"]);
    let mut densities = Table::new(&["needle", "t", "h"]);
    for (q, needle) in dec.needles.iter().enumerate() {
        for (i, &p) in needle.chain.iter().enumerate() {
            chains.row(&[int(q), int(i), int(p), num(needle.t[i]), num(needle.weights[i])]);
        }
        if let Some(h) = &needle.density {
            let g = h.grid();
            for (i, v) in h.values().iter().enumerate() {
                densities.row(&[int(q), num(g.node(i)), num(*v)]);
            }
        }
    }
    chains.write(dir, "needles.csv")?;
    densities.write(dir, "needle_density.csv")?;
    let body = json!({
        "K": k,
        "N": n,
        "needles": dec.needles.len(),
        "transport_mass": dec.transport_mass(),
        "off_transport_points": dec.off_transport.len(),
        "off_transport_f_mass": dec.off_transport_mass(&space, &f),
        "gamma_pairs": s.gamma_len(),
        "check": check,
        "d2_monotone": mono,
        "chain_file": "needles.csv",
        "density_file": "needle_density.csv",
    });
    write_json(dir, "needles.json", "needles run", body)?;
    Ok(())
}

fn compare(cli: &Cli, dir: &Path, a: &CompareArgs) -> Outcome {
    let space = load_space(&a.space)?;
    let (k, n) = claim(&space, a.k, a.n)?;
    let user_sets = a
        .user_sets
        .iter()
        .map(|p| Ok((p.display().to_string(), read_mask(p, space.len())?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let opts = CompareOptions {
        ladder: if a.eps.is_empty() {
            EpsLadder::default()
        } else {
            EpsLadder::Absolute(a.eps.clone())
        },
        centers: a.centers,
        potentials: a.potentials,
        seed: cli.global.seed,
        slack: Slack {
            c_eps: a.c_eps,
            c_res: a.c_res,
        },
        user_sets,
    };
    let report = compare_profile(&space, k, n, &a.v, &opts)?;
    let (refined, persistent) = match (&a.refine, report.violations.is_empty()) {
        (Some(p), false) => {
            let fine_space = load_space(p)?;
            let fine_opts = CompareOptions {
                ladder: EpsLadder::Absolute(report.eps.clone()),
                user_sets: Vec::new(),
                ..opts.clone()
            };
            let fine = compare_profile(&fine_space, k, n, &a.v, &fine_opts)?;
            let p = persistent_violations(&report, &fine);
            (true, p)
        }
        _ => (false, report.violations.clone()),
    };
    let mut rows = Table::new(&["v", "model", "i_hat", "best", "best_mass"]);
    for r in &report.rows {
        rows.row(&[
            num(r.v),
            num(r.model),
            num(r.i_hat.unwrap_or(f64::NAN)),
            text(r.best.clone().unwrap_or_default()),
            num(r.best_mass.unwrap_or(f64::NAN)),
        ]);
    }
    rows.write(dir, "compare.csv")?;
    let mut viol = Table::new(&["v", "family", "label", "mass", "eps", "content", "model", "slack", "resolution"]);
    for x in &report.violations {
        viol.row(&[
            num(x.v),
            text(x.family.clone()),
            text(x.label.clone()),
            num(x.mass),
            num(x.eps),
            num(x.content),
            num(x.model),
            num(x.slack),
            num(x.resolution),
        ]);
    }
    viol.write(dir, "violations.csv")?;
    let body = json!({
        "report": report,
        "refined": refined,
        "persistent": persistent,
    });
    write_json(dir, "compare.json", "verify compare", body)?;
    if persistent.is_empty() {
        Ok(())
    } else if refined {
        Err(Failure::Regression(format!("{} persistent violations", persistent.len())))
    } else {
        Err(Failure::Regression(format!(
            "{} violations with no --refine sample to rule them out",
            persistent.len()
        )))
    }
}

fn needle_bound(dir: &Path, a: &NeedleBoundArgs) -> Outcome {
    let space = load_space(&a.space)?;
    let (k, n) = claim(&space, a.k, a.n)?;
    let set = match (&a.set, a.center, a.radius) {
        (Some(p), _, _) => read_mask(p, space.len())?,
        (None, Some(c), Some(r)) => {
            if c >= space.len() {
                return Err(Failure::Domain(format!("centre {c} out of range")));
            }
            space.row(c).iter().map(|&d| d <= r).collect()
        }
        _ => return Err(Failure::Usage("give --set, or --center with --radius".into())),
    };
    let opts = NeedleBoundOptions {
        ray_tol: a.ray_tol,
        ..Default::default()
    };
    let r = needle_lower_bound(&space, &set, k, n, &opts)?;
    let mut t = Table::new(&["needle", "weight", "length", "trace_mass", "trace_content", "model"]);
    for term in &r.needles {
        t.row(&[
            int(term.index),
            num(term.weight),
            num(term.length),
            num(term.trace_mass),
            num(term.trace_content),
            num(term.model),
        ]);
    }
    t.write(dir, "needle_terms.csv")?;
    let consistent = r.consistent();
    let (bound, measured) = (r.model_bound, r.measured);
    write_json(dir, "needle_bound.json", "verify needle-bound", json!({"report": r, "consistent": consistent}))?;
    if consistent {
        Ok(())
    } else {
        Err(Failure::Regression(format!("needle bound {bound} exceeds measured {measured} plus slack")))
    }
}

fn rigidity(dir: &Path, a: &RigidityArgs) -> Outcome {
    let space = load_space(&a.space)?;
    let opts = RigidityOptions {
        model_tol_rel: a.model_tol,
        ..Default::default()
    };
    let r = rigidity_cap_check(&space, a.v, &opts)?;
    let mut t = Table::new(&["family", "label", "mass", "content", "margin", "predicted_gap"]);
    for c in &r.competitors {
        t.row(&[
            text(c.family.clone()),
            text(c.label.clone()),
            num(c.mass),
            num(c.content),
            num(c.margin),
            num(c.predicted_gap.unwrap_or(f64::NAN)),
        ]);
    }
    t.write(dir, "competitors.csv")?;
    let passed = r.passed();
    write_json(dir, "rigidity.json", "verify rigidity", json!({"report": r, "passed": passed}))?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Regression("cap is not within tolerance of the model or a competitor beats it".into()))
    }
}

fn diam_gap(dir: &Path, a: &DiamGapArgs) -> Outcome {
    let g = diameter_gap(a.n, a.delta, a.d, a.v)?;
    let mut ok = g.positive();
    let mut body = json!({"gap": g, "eta": g.eta, "positive": g.positive()});
    if a.curve > 0 {
        let ds: Vec<f64> = (0..a.curve)
            .map(|i| a.d + (PI - a.d) * i as f64 / a.curve as f64)
            .collect();
        let c = diameter_gap_curve(a.n, a.delta, a.v, &ds)?;
        let mut t = Table::new(&["D", "finite", "infinite", "eta"]);
        for p in &c.points {
            t.row(&[num(p.d), num(p.finite), num(p.infinite), num(p.eta)]);
        }
        t.write(dir, "diam_gap.csv")?;
        ok &= c.monotone && c.positive;
        body["curve"] = to_value(&c)?;
    }
    write_json(dir, "diam_gap.json", "verify diam-gap", body)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Regression(format!("diameter gap {} is not positive and monotone", g.eta)))
    }
}

fn delta_cont(dir: &Path, a: &DeltaContArgs) -> Outcome {
    let deltas = grid(a.delta_grid, 0.5 * (a.n - 1.0))?;
    let c = profile_continuity_in_delta(a.n, a.v, &deltas)?;
    let mut t = Table::new(&["delta", "value"]);
    for (d, v) in c.deltas.iter().zip(&c.values) {
        t.row(&[num(*d), num(*v)]);
    }
    t.write(dir, "delta_cont.csv")?;
    let ok = c.max_jump <= a.max_jump;
    let jump = c.max_jump;
    write_json(dir, "delta_cont.json", "verify delta-cont", json!({"report": c, "passed": ok}))?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Regression(format!("jump {jump} exceeds {}", a.max_jump)))
    }
}
