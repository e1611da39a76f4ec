//! Distortion coefficients `σ_{K,N}^{(t)}(θ)`, `τ_{K,N}^{(t)}(θ)` and the
//! trigonometric model functions `s_δ`, `c_δ`.
//!
//! Every other module goes through these kernels, so they are total over
//! their documented domain and return an [`Extended`] value instead of a
//! large float on the blow-up branch.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Below this magnitude of the trigonometric argument the ratio of sines is
/// replaced by its Taylor expansion.
const TAYLOR_CUTOFF: f64 = 1e-6;

/// Extended nonnegative real used for the distortion coefficients.
///
/// `Infinite` is absorbing under infima and products with positive numbers;
/// `0 · ∞` is taken to be `0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::Infinite => None,
        }
    }

    /// Product with a nonnegative scalar, with the measure-theoretic
    /// convention `0 · ∞ = 0`.
    pub fn scale(self, x: f64) -> Extended {
        match self {
            Extended::Finite(s) => Extended::Finite(s * x),
            Extended::Infinite if x == 0.0 => Extended::Finite(0.0),
            Extended::Infinite => Extended::Infinite,
        }
    }

    pub fn powf(self, p: f64) -> Extended {
        match self {
            Extended::Finite(s) => Extended::Finite(s.powf(p)),
            Extended::Infinite => Extended::Infinite,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(x) => x,
            Extended::Infinite => f64::INFINITY,
        }
    }
}

/// Curvature/dimension/diameter triple driving every comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub k: f64,
    pub n: f64,
    /// Diameter bound; `f64::INFINITY` for an unbounded diameter.
    pub d: f64,
}

impl ProfileParams {
    pub fn new(k: f64, n: f64, d: f64) -> Result<Self> {
        if !k.is_finite() || k.is_nan() {
            return domain(format!("curvature K must be finite, got {k}"));
        }
        if n.is_nan() || n < 1.0 || !n.is_finite() {
            return domain(format!("dimension N must be finite and >= 1, got {n}"));
        }
        if d.is_nan() || d <= 0.0 {
            return domain(format!("diameter D must be positive, got {d}"));
        }
        Ok(ProfileParams { k, n, d })
    }

    /// Bonnet-Myers diameter `π·sqrt((N−1)/K)`, when `K > 0` and `N > 1`.
    pub fn bonnet_myers(&self) -> Option<f64> {
        (self.k > 0.0 && self.n > 1.0).then(|| PI * ((self.n - 1.0) / self.k).sqrt())
    }

    /// `min(D, π·sqrt((N−1)/K))` for positive curvature, `D` otherwise.
    pub fn effective_diameter(&self) -> f64 {
        match self.bonnet_myers() {
            Some(bm) => self.d.min(bm),
            None => self.d,
        }
    }
}

fn check_t_theta(t: f64, theta: f64) -> Result<()> {
    if t.is_nan() || !(0.0..=1.0).contains(&t) {
        return domain(format!("t must lie in [0,1], got {t}"));
    }
    if theta.is_nan() || theta < 0.0 {
        return domain(format!("theta must be nonnegative, got {theta}"));
    }
    Ok(())
}

/// `sin(t x) / sin(x)` for `0 < x < π`.
fn sin_ratio(t: f64, x: f64) -> f64 {
    if x < TAYLOR_CUTOFF {
        let x2 = x * x;
        let u = 1.0 - t * t;
        t * (1.0 + u * x2 / 6.0 + u * (7.0 - 3.0 * t * t) * x2 * x2 / 360.0)
    } else {
        (t * x).sin() / x.sin()
    }
}

/// `sinh(t x) / sinh(x)` for `x > 0`, stable for large `x`.
fn sinh_ratio(t: f64, x: f64) -> f64 {
    if x < TAYLOR_CUTOFF {
        let x2 = x * x;
        let u = 1.0 - t * t;
        t * (1.0 - u * x2 / 6.0 + u * (7.0 - 3.0 * t * t) * x2 * x2 / 360.0)
    } else if x > 20.0 {
        // sinh(tx)/sinh(x) = e^{(t-1)x} (1 - e^{-2tx}) / (1 - e^{-2x})
        ((t - 1.0) * x).exp() * (-(-2.0 * t * x).exp_m1()) / (-(-2.0 * x).exp_m1())
    } else {
        (t * x).sinh() / x.sinh()
    }
}

/// Distortion coefficient `σ_{K,N}^{(t)}(θ)`.
///
/// Branches are tested in the order: `Kθ² = 0`, `Kθ² ≥ Nπ²`, `0 < Kθ² < Nπ²`,
/// `Kθ² < 0`. Putting the degenerate case first keeps `σ_{0,N} ≡ t` for
/// every admissible `N`, including `N = 0`.
pub fn sigma(t: f64, theta: f64, k: f64, n: f64) -> Result<Extended> {
    check_t_theta(t, theta)?;
    if n.is_nan() || n < 0.0 {
        return domain(format!("N must be nonnegative, got {n}"));
    }
    let k_theta2 = k * theta * theta;
    if k_theta2 == 0.0 {
        return Ok(Extended::Finite(t));
    }
    if k_theta2 >= n * PI * PI {
        return Ok(Extended::Infinite);
    }
    if k_theta2 > 0.0 {
        let x = theta * (k / n).sqrt();
        return Ok(Extended::Finite(sin_ratio(t, x)));
    }
    // k_theta2 < 0 from here on
    if n == 0.0 {
        return Ok(Extended::Finite(t));
    }
    let x = theta * (-k / n).sqrt();
    Ok(Extended::Finite(sinh_ratio(t, x)))
}

/// Distortion coefficient `τ_{K,N}^{(t)}(θ) = t^{1/N} σ_{K,N−1}^{(t)}(θ)^{(N−1)/N}`.
pub fn tau(t: f64, theta: f64, k: f64, n: f64) -> Result<Extended> {
    check_t_theta(t, theta)?;
    if n.is_nan() || n < 1.0 {
        return domain(format!("tau requires N >= 1, got {n}"));
    }
    let s = sigma(t, theta, k, n - 1.0)?;
    Ok(match s {
        Extended::Infinite => Extended::Infinite,
        Extended::Finite(s) => {
            if k * theta * theta == 0.0 {
                // σ = t exactly; avoid the round-off of t^{1/N} t^{(N-1)/N}.
                Extended::Finite(t)
            } else {
                Extended::Finite(t.powf(1.0 / n) * s.powf((n - 1.0) / n))
            }
        }
    })
}

/// `s_δ(t)`: `sin(√δ t)/√δ`, `t` or `sinh(√−δ t)/√−δ`.
pub fn s_delta(t: f64, delta: f64) -> f64 {
    if delta > 0.0 {
        let r = delta.sqrt();
        (r * t).sin() / r
    } else if delta == 0.0 {
        t
    } else {
        let r = (-delta).sqrt();
        (r * t).sinh() / r
    }
}

/// `c_δ(t)`: `cos(√δ t)`, `1` or `cosh(√−δ t)`.
pub fn c_delta(t: f64, delta: f64) -> f64 {
    if delta > 0.0 {
        (delta.sqrt() * t).cos()
    } else if delta == 0.0 {
        1.0
    } else {
        ((-delta).sqrt() * t).cosh()
    }
}
