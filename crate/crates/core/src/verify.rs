//! Numerical checks of how hyperbolic distance gradients scale with norm,
//! against the constant-magnitude Euclidean case.
//!
//! Probes place `x̂` and `ŷ` in the plane of the first two space-like axes,
//! separated by angle `θ`, and lift them onto the hyperboloid. The exact
//! magnitude is the gradient of `d_H(x, y)` with respect to the space-like
//! coordinates of `x` (the time-like coordinate following the constraint):
//! `‖∇z‖ / √(z² - 1)` with `z = -<x,y>_L` and `∂z/∂x_j = x_j y_0 / x_0 - y_j`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{inner, Hyperboloid};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

pub const GRID_NORMS: [f64; 4] = [2.0, 5.0, 10.0, 20.0];
pub const GRID_THETAS: [f64; 4] = [PI / 6.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];

/// Central-difference gradient of `f` at `x`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            xp[k] = x[k] + h;
            let fp = f(&xp);
            xp[k] = x[k] - h;
            let fm = f(&xp);
            xp[k] = x[k];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Points with space-like norms `norm_x`, `norm_y` at angle `theta`, in
/// ambient dimension `n + 1`.
pub fn probe_points(norm_x: f64, norm_y: f64, theta: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::InvalidParameter("probes need n >= 2".into()));
    }
    if !(norm_x > 0.0 && norm_y > 0.0) {
        return Err(Error::InvalidParameter("probe norms must be positive".into()));
    }
    let m = Hyperboloid::default();
    let mut xs = vec![0.0; n];
    let mut ys = vec![0.0; n];
    xs[0] = norm_x;
    ys[0] = norm_y * theta.cos();
    ys[1] = norm_y * theta.sin();
    Ok((m.lift(&xs), m.lift(&ys)))
}

/// Exact gradient magnitude of `d_H(x, y)` with respect to the space-like
/// coordinates of `x`.
pub fn hyperbolic_grad_magnitude(x: &[f64], y: &[f64]) -> Result<f64> {
    Error::check_dim(x.len(), y.len())?;
    let z = -inner(x, y);
    if z.is_nan() || z <= 1.0 || x == y {
        return Err(Error::Numerical("gradient of the distance is singular at x = y".into()));
    }
    let grad: Vec<f64> = x[1..]
        .iter()
        .zip(&y[1..])
        .map(|(xj, yj)| xj * y[0] / x[0] - yj)
        .collect();
    Ok(norm(&grad) / (z * z - 1.0).sqrt())
}

/// Central-difference estimate of [`hyperbolic_grad_magnitude`].
pub fn hyperbolic_grad_fd(x: &[f64], y: &[f64], h: f64) -> f64 {
    let m = Hyperboloid::default();
    let f = |xs: &[f64]| m.dist(&m.lift(xs), y);
    norm(&central_difference(f, &x[1..], h))
}

/// The large-norm approximation `‖x̂ - ŷ‖ / (‖x‖ (1 - cos θ))`.
pub fn large_norm_approximation(norm_x: f64, _norm_y: f64, theta: f64) -> Result<f64> {
    let c = theta.cos();
    if theta <= 0.0 || 1.0 - c <= 0.0 {
        return Err(Error::InvalidParameter("approximation undefined at theta = 0".into()));
    }
    if norm_x <= 0.0 {
        return Err(Error::InvalidParameter("norm must be positive".into()));
    }
    Ok((2.0 - 2.0 * c).sqrt() / (norm_x * (1.0 - c)))
}

/// `z = -<x,y>_L` for the probe configuration.
pub fn probe_product(norm_x: f64, norm_y: f64, theta: f64) -> f64 {
    (1.0 + norm_x * norm_x).sqrt() * (1.0 + norm_y * norm_y).sqrt() - norm_x * norm_y * theta.cos()
}

/// Published relative-error bound `1/(2‖x‖²(1 - cos θ)) + 1/(2z²)`.
pub fn error_bound(norm_x: f64, norm_y: f64, theta: f64) -> f64 {
    let z = probe_product(norm_x, norm_y, theta);
    1.0 / (2.0 * norm_x * norm_x * (1.0 - theta.cos())) + 1.0 / (2.0 * z * z)
}

/// Bound that keeps the Lorentz-product term intact:
/// `½(1/‖x‖² + 1/‖y‖²)/(1 - cos θ) + 1/(2z²)`.
pub fn product_bound(norm_x: f64, norm_y: f64, theta: f64) -> f64 {
    let z = probe_product(norm_x, norm_y, theta);
    0.5 * (1.0 / (norm_x * norm_x) + 1.0 / (norm_y * norm_y)) / (1.0 - theta.cos()) + 1.0 / (2.0 * z * z)
}

/// `‖∇_x ‖x - y‖‖` via the closed form `(x - y)/‖x - y‖`.
pub fn euclidean_grad_magnitude(x: &[f64], y: &[f64]) -> Result<f64> {
    Error::check_dim(x.len(), y.len())?;
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let d = norm(&diff);
    if d == 0.0 {
        return Err(Error::Numerical("gradient of the distance is singular at x = y".into()));
    }
    let grad: Vec<f64> = diff.iter().map(|v| v / d).collect();
    Ok(norm(&grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradProbe {
    pub norm_x: f64,
    pub norm_y: f64,
    pub theta: f64,
    pub exact: f64,
    pub approx: f64,
    pub fd: f64,
    /// `|approx - exact| / exact`.
    pub rel_err: f64,
    /// [`error_bound`].
    pub bound: f64,
    /// [`product_bound`].
    pub product_bound: f64,
}

impl GradProbe {
    pub fn within_bound(&self) -> bool {
        self.rel_err <= self.bound
    }

    pub fn within_product_bound(&self) -> bool {
        self.rel_err <= self.product_bound
    }
}

/// Exact, approximate and finite-difference magnitudes with both bounds.
pub fn error_bound_report(norm_x: f64, norm_y: f64, theta: f64) -> Result<GradProbe> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::InvalidParameter(format!("theta {theta} outside (0, π]")));
    }
    let (x, y) = probe_points(norm_x, norm_y, theta, 2)?;
    let exact = hyperbolic_grad_magnitude(&x, &y)?;
    let approx = large_norm_approximation(norm_x, norm_y, theta)?;
    Ok(GradProbe {
        norm_x,
        norm_y,
        theta,
        exact,
        approx,
        fd: hyperbolic_grad_fd(&x, &y, FD_STEP),
        rel_err: (approx - exact).abs() / exact,
        bound: error_bound(norm_x, norm_y, theta),
        product_bound: product_bound(norm_x, norm_y, theta),
    })
}

/// Every `(‖x‖, ‖y‖, θ)` combination.
pub fn probe_grid(norms: &[f64], thetas: &[f64]) -> Result<Vec<GradProbe>> {
    let mut out = Vec::with_capacity(norms.len() * norms.len() * thetas.len());
    for &nx in norms {
        for &ny in norms {
            for &t in thetas {
                out.push(error_bound_report(nx, ny, t)?);
            }
        }
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "norm_x,norm_y,theta,exact,approx,fd,rel_err,bound";

pub fn grid_csv(probes: &[GradProbe]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for p in probes {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.10},{:.10},{:.10},{:.6},{:.6}",
            p.norm_x, p.norm_y, p.theta, p.exact, p.approx, p.fd, p.rel_err, p.bound
        );
    }
    s
}

/// Outcome of one named check in [`run_checks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Reference configuration for the approximation check.
pub const REFERENCE_NORM: f64 = 5.0;
/// Published error figure plus half a percentage point of slack.
pub const REFERENCE_TOLERANCE: f64 = 0.021 + 0.005;

/// The standard battery: finite differences, Euclidean constancy,
/// adaptivity, the reference approximation error, and bound soundness over
/// the default grid.
pub fn run_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let m = Hyperboloid::default();

    let mut worst_fd: f64 = 0.0;
    for &nx in &GRID_NORMS[..2] {
        for &t in &GRID_THETAS {
            for ny in [0.5, 1.0, 2.0] {
                let (x, y) = probe_points(nx.min(3.0) / 2.0, ny, t, 3)?;
                let d = m.dist(&x, &y);
                if !(0.5..=5.0).contains(&d) {
                    continue;
                }
                let exact = hyperbolic_grad_magnitude(&x, &y)?;
                worst_fd = worst_fd.max((hyperbolic_grad_fd(&x, &y, FD_STEP) - exact).abs() / exact);
            }
        }
    }
    out.push(Check {
        name: "finite_difference".into(),
        passed: worst_fd <= 1e-5,
        detail: format!("max relative deviation {worst_fd:.3e} (limit 1e-5)"),
    });

    let mut rng = crate::rng::stream_rng(seed, 0);
    let mut worst_euc: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..4).map(|_| rand::Rng::random_range(&mut rng, -10.0..10.0)).collect();
        let y: Vec<f64> = (0..4).map(|_| rand::Rng::random_range(&mut rng, -10.0..10.0)).collect();
        worst_euc = worst_euc.max((euclidean_grad_magnitude(&x, &y)? - 1.0).abs());
    }
    out.push(Check {
        name: "euclidean_constant".into(),
        passed: worst_euc <= 1e-12,
        detail: format!("max |magnitude - 1| {worst_euc:.3e} over 100 probes"),
    });

    let mags = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|&r| {
            let (x, y) = probe_points(r, r, PI / 2.0, 2)?;
            hyperbolic_grad_magnitude(&x, &y)
        })
        .collect::<Result<Vec<f64>>>()?;
    out.push(Check {
        name: "adaptivity".into(),
        passed: mags.windows(2).all(|w| w[1] < w[0]),
        detail: format!("magnitudes at norms 1,2,5,10: {mags:.4?}"),
    });

    let p = error_bound_report(REFERENCE_NORM, REFERENCE_NORM, PI / 2.0)?;
    out.push(Check {
        name: "reference_error".into(),
        passed: p.rel_err <= REFERENCE_TOLERANCE,
        detail: format!(
            "relative error {:.4} vs limit {REFERENCE_TOLERANCE:.3} (published bound {:.4}, product bound {:.4})",
            p.rel_err, p.bound, p.product_bound
        ),
    });

    let grid = probe_grid(&GRID_NORMS, &GRID_THETAS)?;
    let violations = grid.iter().filter(|p| !p.within_bound()).count();
    let product_violations = grid.iter().filter(|p| !p.within_product_bound()).count();
    out.push(Check {
        name: "bound_soundness".into(),
        passed: violations == 0,
        detail: format!(
            "{violations}/{} grid points exceed the published bound; {product_violations} exceed the product bound",
            grid.len()
        ),
    });
    Ok(out)
}
