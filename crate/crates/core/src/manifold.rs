//! Lorentz (hyperboloid) model of hyperbolic space.
//!
//! Points live in R^{n+1} on the upper sheet `{x : <x,x>_L = -κ, x_0 > 0}`,
//! where `<x,y>_L = -x_0 y_0 + Σ x_i y_i`. Coordinate 0 is the time-like axis.
//!
//! The hot paths (training, clustering, retrieval) work on plain `&[f64]`
//! slices through [`Hyperboloid`]; [`LorentzPoint`] and [`TangentVector`]
//! are the checked, typed surface for callers that want the invariants
//! enforced at construction.

use crate::error::{Error, Result};

/// Tangent vectors longer than this are clipped before the exponential map.
/// cosh(32) ≈ 4e13 is comfortably finite; cosh(710) overflows.
pub const MAX_TANGENT_NORM: f64 = 32.0;

/// Absolute tolerance used for the hyperboloid and tangency checks.
pub const MANIFOLD_TOL: f64 = 1e-9;

/// Below this norm a tangent vector is treated as zero.
const ZERO_NORM: f64 = 1e-15;

/// Lorentzian inner product with a length check.
pub fn lorentz_inner(x: &[f64], y: &[f64]) -> Result<f64> {
    Error::check_dim(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::Dimension {
            expected: 2,
            found: x.len(),
        });
    }
    Ok(inner(x, y))
}

/// Unchecked Lorentzian inner product.
#[inline]
pub fn inner(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let space: f64 = x[1..].iter().zip(&y[1..]).map(|(a, b)| a * b).sum();
    space - x[0] * y[0]
}

/// Lorentzian norm of a (space-like) tangent vector; 0 for round-off negatives.
#[inline]
pub fn tangent_norm(v: &[f64]) -> f64 {
    inner(v, v).max(0.0).sqrt()
}

/// `arcosh(z) / sqrt(z^2 - 1)`, continuous at z = 1 where it tends to 1.
#[inline]
pub(crate) fn arcosh_ratio(z: f64) -> f64 {
    let t = z - 1.0;
    if t < 1e-7 {
        // arcosh(1+t)/sqrt(t(2+t)) = 1 - t/3 + O(t^2)
        1.0 - t.max(0.0) / 3.0
    } else {
        z.acosh() / (z * z - 1.0).sqrt()
    }
}

/// The hyperboloid of curvature `-1/κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperboloid {
    kappa: f64,
}

impl Default for Hyperboloid {
    fn default() -> Self {
        Self { kappa: 1.0 }
    }
}

impl Hyperboloid {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "curvature parameter must be positive, got {kappa}"
            )));
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// The reference point `o = (√κ, 0, ..., 0)` in ambient dimension `n + 1`.
    pub fn origin(&self, n: usize) -> Vec<f64> {
        let mut o = vec![0.0; n + 1];
        o[0] = self.kappa.sqrt();
        o
    }

    /// `|<x,x>_L + κ|`.
    pub fn constraint_residual(&self, x: &[f64]) -> f64 {
        (inner(x, x) + self.kappa).abs()
    }

    /// Whether `x` satisfies the hyperboloid constraint and lies on the upper sheet.
    ///
    /// The tolerance is absolute for points near the origin and relative to
    /// `x_0^2` far out, where the constraint is evaluated by cancellation.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() >= 2
            && x.iter().all(|v| v.is_finite())
            && x[0] > 0.0
            && self.constraint_residual(x) <= MANIFOLD_TOL * (x[0] * x[0]).max(1.0)
    }

    /// Recompute the time-like coordinate from the space-like ones.
    pub fn renormalize(&self, x: &mut [f64]) {
        let s2: f64 = x[1..].iter().map(|v| v * v).sum();
        x[0] = (self.kappa + s2).sqrt();
    }

    /// Lift space-like coordinates onto the hyperboloid.
    pub fn lift(&self, space: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(space.len() + 1);
        x.push(0.0);
        x.extend_from_slice(space);
        self.renormalize(&mut x);
        x
    }

    /// Geodesic distance `√κ · arcosh(-<x,y>_L / κ)`, with the argument clamped to ≥ 1.
    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        if x == y {
            return 0.0;
        }
        let z = (-inner(x, y) / self.kappa).max(1.0);
        self.kappa.sqrt() * z.acosh()
    }

    /// Tangent projection `g + (<x,g>_L / κ) x`.
    pub fn project_to_tangent(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let c = inner(x, g) / self.kappa;
        g.iter().zip(x).map(|(gi, xi)| gi + c * xi).collect()
    }

    /// Exponential map at `x`. A zero tangent vector maps to `x` itself; norms
    /// above [`MAX_TANGENT_NORM`] are clipped.
    pub fn exp_map(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let norm = tangent_norm(v);
        if norm < ZERO_NORM {
            return x.to_vec();
        }
        let clipped = norm.min(MAX_TANGENT_NORM);
        let sk = self.kappa.sqrt();
        let c = (clipped / sk).cosh();
        let s = sk * (clipped / sk).sinh() / norm;
        let mut out: Vec<f64> = x.iter().zip(v).map(|(xi, vi)| c * xi + s * vi).collect();
        self.renormalize(&mut out);
        out
    }

    /// Logarithmic map at `x`; returns the zero vector when `x == y`.
    pub fn log_map(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.dist(x, y);
        if d == 0.0 {
            return vec![0.0; x.len()];
        }
        let c = inner(x, y) / self.kappa;
        let u: Vec<f64> = y.iter().zip(x).map(|(yi, xi)| yi + c * xi).collect();
        let un = tangent_norm(&u);
        if un < ZERO_NORM {
            return vec![0.0; x.len()];
        }
        let mut v: Vec<f64> = u.iter().map(|ui| d * ui / un).collect();
        // strip the round-off normal component so the result is tangent to x
        let c = inner(x, &v) / self.kappa;
        v.iter_mut().zip(x).for_each(|(vi, xi)| *vi += c * xi);
        v
    }

    /// Weighted Lorentzian centroid: the normalized weighted ambient sum.
    pub fn centroid(&self, points: &[&[f64]], weights: &[f64]) -> Result<Vec<f64>> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidParameter("centroid of an empty set".into()))?;
        Error::check_dim(points.len(), weights.len())?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "centroid weights must be finite and nonnegative".into(),
            ));
        }
        let dim = first.len();
        let mut s = vec![0.0; dim];
        for (p, &w) in points.iter().zip(weights) {
            Error::check_dim(dim, p.len())?;
            s.iter_mut().zip(p.iter()).for_each(|(si, pi)| *si += w * pi);
        }
        let mut q = -inner(&s, &s);
        if q <= 1e-8 * s[0] * s[0] && s[0].is_finite() {
            // far from the origin the direct form cancels; expand it pairwise
            q = 0.0;
            for (a, &wa) in points.iter().zip(weights) {
                for (b, &wb) in points.iter().zip(weights) {
                    q += wa * wb * (-inner(a, b)).max(self.kappa);
                }
            }
        }
        if !(q > 0.0 && q.is_finite()) || s[0] <= 0.0 {
            return Err(Error::Numerical(
                "weighted sum is not time-like; weights all zero or points off the upper sheet"
                    .into(),
            ));
        }
        let scale = self.kappa.sqrt() / q.sqrt();
        s.iter_mut().for_each(|v| *v *= scale);
        self.renormalize(&mut s);
        Ok(s)
    }

    /// Ambient gradient of `d(x, y)` with respect to `x`.
    ///
    /// Singular at `x == y`; callers that need a well-defined value there
    /// should use [`Hyperboloid::dist_sq_grad`].
    pub fn dist_grad(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let z = (-inner(x, y) / self.kappa).max(1.0);
        let denom = (z * z - 1.0).sqrt();
        let c = self.kappa.sqrt() / (self.kappa * denom);
        minus_metric(y, c)
    }

    /// `d(x, y)^2` and its ambient gradient with respect to `x`.
    pub fn dist_sq_grad(&self, x: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
        let z = (-inner(x, y) / self.kappa).max(1.0);
        let d = self.kappa.sqrt() * z.acosh();
        // d(d^2)/dz = 2κ arcosh(z)/sqrt(z^2-1); dz/dx = -η y / κ
        let c = 2.0 * arcosh_ratio(z);
        (d * d, minus_metric(y, c))
    }

    /// Riemannian gradient from an ambient Euclidean gradient: flip the sign
    /// of coordinate 0 (the inverse metric) and project onto the tangent space.
    pub fn riemannian_grad(&self, x: &[f64], euclidean: &[f64]) -> Vec<f64> {
        let mut g = euclidean.to_vec();
        g[0] = -g[0];
        self.project_to_tangent(x, &g)
    }
}

/// `c · (y_0, -y_1, ..., -y_n)`, the gradient direction of `-<x,y>_L` in `x`.
#[inline]
fn minus_metric(y: &[f64], c: f64) -> Vec<f64> {
    let mut g: Vec<f64> = y.iter().map(|v| -c * v).collect();
    g[0] = c * y[0];
    g
}

/// A point on the hyperboloid, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzPoint {
    coords: Vec<f64>,
    kappa: f64,
}

impl LorentzPoint {
    pub fn new(coords: Vec<f64>, kappa: f64) -> Result<Self> {
        let m = Hyperboloid::new(kappa)?;
        if !m.contains(&coords) {
            return Err(Error::Numerical(format!(
                "point is off the hyperboloid (residual {:.3e})",
                if coords.len() >= 2 {
                    m.constraint_residual(&coords)
                } else {
                    f64::NAN
                }
            )));
        }
        Ok(Self { coords, kappa })
    }

    pub fn origin(n: usize) -> Self {
        let m = Hyperboloid::default();
        Self {
            coords: m.origin(n),
            kappa: 1.0,
        }
    }

    /// Lift space-like coordinates onto the unit-κ hyperboloid.
    pub fn from_space(space: &[f64]) -> Self {
        Self {
            coords: Hyperboloid::default().lift(space),
            kappa: 1.0,
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Intrinsic dimension `n`.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    fn model(&self) -> Hyperboloid {
        Hyperboloid { kappa: self.kappa }
    }

    pub fn dist(&self, other: &LorentzPoint) -> Result<f64> {
        Error::check_dim(self.coords.len(), other.coords.len())?;
        Ok(self.model().dist(&self.coords, &other.coords))
    }

    pub fn exp(&self, v: &TangentVector) -> Result<LorentzPoint> {
        if v.base != *self {
            return Err(Error::InvalidParameter(
                "tangent vector is attached to a different base point".into(),
            ));
        }
        let coords = self.model().exp_map(&self.coords, &v.coords);
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("exponential map overflowed".into()));
        }
        Ok(Self {
            coords,
            kappa: self.kappa,
        })
    }

    pub fn log(&self, y: &LorentzPoint) -> Result<TangentVector> {
        Error::check_dim(self.coords.len(), y.coords.len())?;
        Ok(TangentVector {
            base: self.clone(),
            coords: self.model().log_map(&self.coords, &y.coords),
        })
    }

    pub fn project(&self, g: &[f64]) -> Result<TangentVector> {
        Error::check_dim(self.coords.len(), g.len())?;
        Ok(TangentVector {
            base: self.clone(),
            coords: self.model().project_to_tangent(&self.coords, g),
        })
    }

    pub fn zero_tangent(&self) -> TangentVector {
        TangentVector {
            base: self.clone(),
            coords: vec![0.0; self.coords.len()],
        }
    }
}

/// A vector in the tangent space of `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: LorentzPoint,
    coords: Vec<f64>,
}

impl TangentVector {
    /// Checks `<v, base>_L = 0` within [`MANIFOLD_TOL`] (scaled by `base_0`).
    pub fn new(base: LorentzPoint, coords: Vec<f64>) -> Result<Self> {
        Error::check_dim(base.coords.len(), coords.len())?;
        let ip = inner(&base.coords, &coords);
        let scale = base.coords[0] * coords.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if ip.abs() > MANIFOLD_TOL * scale {
            return Err(Error::Numerical(format!(
                "vector is not tangent (<v, x>_L = {ip:.3e})"
            )));
        }
        Ok(Self { base, coords })
    }

    pub fn base(&self) -> &LorentzPoint {
        &self.base
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        tangent_norm(&self.coords)
    }
}
