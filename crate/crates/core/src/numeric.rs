//! Small numerical building blocks: Gauss-Legendre panels, golden-section
//! minimization and bracketed root refinement.

/// 8-point Gauss-Legendre abscissae on [-1, 1] (positive half).
const GL_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Integral of `f` over `[lo, hi]` with one 8-point Gauss-Legendre panel.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (x, w) in GL_X.iter().zip(GL_W.iter()) {
        acc += w * (f(c - r * x) + f(c + r * x));
    }
    acc * r
}

/// Panel edges on `[lo, hi]`: `cells` uniform panels, with the first and last
/// panel split geometrically toward the endpoints so that integrable
/// endpoint singularities (`t^p`, `p > -1`) are resolved.
pub fn graded_edges(lo: f64, hi: f64, cells: usize, grading: usize) -> Vec<f64> {
    let cells = cells.max(2);
    let h = (hi - lo) / cells as f64;
    let mut edges = Vec::with_capacity(cells + 2 * grading + 1);
    edges.push(lo);
    for k in (1..=grading).rev() {
        edges.push(lo + h * 0.5f64.powi(k as i32));
    }
    for i in 1..cells {
        edges.push(lo + h * i as f64);
    }
    for k in 1..=grading {
        edges.push(hi - h * 0.5f64.powi(k as i32));
    }
    edges.push(hi);
    edges.dedup();
    edges
}

/// Composite integral of `f` over consecutive panels; returns the running sum
/// at every edge (first entry is 0).
pub fn cumulative<F: Fn(f64) -> f64>(f: &F, edges: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(edges.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in edges.windows(2) {
        acc += gauss_legendre(f, w[0], w[1]);
        cum.push(acc);
    }
    cum
}

/// Index `i` with `xs[i] <= x < xs[i+1]`, clamped to a valid panel.
pub fn locate(xs: &[f64], x: f64) -> usize {
    debug_assert!(xs.len() >= 2);
    let p = xs.partition_point(|&e| e <= x);
    p.saturating_sub(1).min(xs.len() - 2)
}

pub const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Returns `(argmin, min)`; the endpoints are compared against the interior
/// estimate so that boundary minima are not lost.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    iterations: usize,
) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iterations {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimizes `f` over `[lo, hi]`: scan `samples` equispaced points (including
/// both endpoints), then refine with golden section on the bracket around the
/// best sample.
pub fn scan_then_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    samples: usize,
    iterations: usize,
) -> (f64, f64) {
    if hi <= lo {
        let v = f(lo);
        return (lo, v);
    }
    let samples = samples.max(3);
    let xs: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    scan_points_then_golden(&mut f, &xs, iterations)
}

/// As [`scan_then_golden`] but over caller-provided sorted sample points.
pub fn scan_points_then_golden<F: FnMut(f64) -> f64>(
    f: &mut F,
    xs: &[f64],
    iterations: usize,
) -> (f64, f64) {
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let v = f(x);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let lo = xs[best_i.saturating_sub(1)];
    let hi = xs[(best_i + 1).min(xs.len() - 1)];
    let (x, v) = golden_section(&mut *f, lo, hi, iterations);
    if v < best {
        (x, v)
    } else {
        (xs[best_i], best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_is_exact_for_low_degree() {
        let v = gauss_legendre(&|x: f64| x.powi(15) + 3.0 * x * x, -1.0, 2.0);
        let exact = (2f64.powi(16) - 1.0) / 16.0 + 9.0;
        assert_abs_diff_eq!(v, exact, epsilon = 1e-9);
    }

    #[test]
    fn graded_cumulative_resolves_sqrt() {
        let edges = graded_edges(0.0, 1.0, 64, 30);
        let cum = cumulative(&|x: f64| x.sqrt(), &edges);
        assert_abs_diff_eq!(*cum.last().unwrap(), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn golden_finds_interior_and_boundary_minima() {
        let (x, v) = golden_section(|x| (x - 0.3) * (x - 0.3), 0.0, 1.0, 80);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-7);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        let (x, _) = golden_section(|x| x, 0.0, 1.0, 60);
        assert_eq!(x, 0.0);
    }
}
