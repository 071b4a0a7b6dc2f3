//! Model parameters, derived constants and the exact predicates for the
//! successor quadrangle `Q_x` and the search triangle `T_{x,l}`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Absolute tolerance applied to cosine comparisons.
pub const EPS_GEOM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x1: f64,
    pub x2: f64,
}

impl PlanarPoint {
    pub const ORIGIN: PlanarPoint = PlanarPoint { x1: 0.0, x2: 0.0 };

    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn norm_sq(self) -> f64 {
        self.x1 * self.x1 + self.x2 * self.x2
    }

    pub fn dot(self, o: PlanarPoint) -> f64 {
        self.x1 * o.x1 + self.x2 * o.x2
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, o: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(self.x1 - o.x1, self.x2 - o.x2)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, o: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(self.x1 + o.x1, self.x2 + o.x2)
    }

    pub fn scale(self, k: f64) -> PlanarPoint {
        PlanarPoint::new(self.x1 * k, self.x2 * k)
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn is_origin(self) -> bool {
        self.x1 == 0.0 && self.x2 == 0.0
    }

    /// Angular offset from the downward vertical ray, i.e. `arg(p) + π/2`
    /// measured in `(−π, π]` and positive towards `+x1`.
    pub fn sigma(self) -> f64 {
        self.x1.atan2(-self.x2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub phi: f64,
}

impl PolarPoint {
    pub fn new(r: f64, phi: f64) -> Self {
        Self { r, phi: normalize_angle(phi) }
    }
}

/// Maps an angle into `(−π, π]`.
pub fn normalize_angle(phi: f64) -> f64 {
    let mut a = phi % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

pub fn to_polar(p: PlanarPoint) -> PolarPoint {
    if p.is_origin() {
        return PolarPoint { r: 0.0, phi: 0.0 };
    }
    let phi = p.x2.atan2(p.x1);
    // atan2 returns −π for (negative, −0.0); fold it onto π.
    let phi = if phi == -PI { PI } else { phi };
    PolarPoint { r: p.norm(), phi }
}

pub fn from_polar(q: PolarPoint) -> PlanarPoint {
    let (s, c) = q.phi.sin_cos();
    PlanarPoint::new(q.r * c, q.r * s)
}

/// Model constants. `n` is a positive real scale and logarithms are natural.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub n: f64,
    pub alpha: f64,
    pub a_exp: f64,
    pub b_exp: f64,
}

impl ModelParams {
    pub fn new(theta: f64, n: f64, alpha: f64, a_exp: f64, b_exp: f64) -> Result<Self> {
        let p = Self { theta, n, alpha, a_exp, b_exp };
        p.validate()?;
        Ok(p)
    }

    /// Defaults used throughout: θ = π/4, α = 1/2, a = 0.3, b = 0.45.
    pub fn with_n(n: f64) -> Result<Self> {
        Self::new(std::f64::consts::FRAC_PI_4, n, 0.5, 0.3, 0.45)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        let all = [self.theta, self.n, self.alpha, self.a_exp, self.b_exp];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if !(self.theta > 0.0 && self.theta < FRAC_PI_2) {
            return bad("theta must lie in (0, π/2)");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(0.25 < self.a_exp && self.a_exp < self.b_exp && self.b_exp < 0.5) {
            return bad("exponents must satisfy 1/4 < a < b < 1/2");
        }
        if self.n <= 1.0 {
            return bad("n must exceed 1 so that log n > 0");
        }
        // Truncation depth must stay positive over the whole strip.
        if self.log_n() / self.n * (1.0 + self.tau()) >= 1.0 {
            return bad("(log n / n)(1 + τ) must be below 1");
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        self.theta.tan()
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.alpha - 1.0
    }

    pub fn log_n(&self) -> f64 {
        self.n.ln()
    }

    /// `d(s) = (1 + c²) / (2 (1 + s/n))`.
    pub fn d(&self, s: f64) -> f64 {
        let c = self.c();
        (1.0 + c * c) / (2.0 * (1.0 + s / self.n))
    }

    /// Slope parameter `c_n(s) = c (1 + d(s)/n)`.
    pub fn c_n(&self, s: f64) -> f64 {
        self.c() * (1.0 + self.d(s) / self.n)
    }

    /// `d′_n(s) = (1 + s/n)² / (1 − (log n / n)(1 + s/n))`.
    pub fn d_prime(&self, s: f64) -> f64 {
        let a = 1.0 + s / self.n;
        a * a / (1.0 - self.log_n() / self.n * a)
    }

    /// Truncation depth `L_n(s) = d′_n(s) log n`.
    pub fn l_n(&self, s: f64) -> f64 {
        self.d_prime(s) * self.log_n()
    }

    /// Whether the strip formulas are defined at time `s`.
    pub fn strip_guard_ok(&self, s: f64) -> bool {
        s >= 0.0 && self.log_n() / self.n * (1.0 + s / self.n) < 1.0
    }

    /// Mean of a variable with tail `exp(−c v²)`: `½ √(π / c)`.
    pub fn c_hat(&self) -> f64 {
        0.5 * (PI / self.c()).sqrt()
    }

    /// Extended-regime tail coefficient, evaluated at `s = τn`.
    pub fn a_n(&self) -> f64 {
        let s = self.tau() * self.n;
        self.c_n(s) * (1.0 + self.tau()).powi(-4)
    }

    /// Variance rate of the diffusive limit, `c / (3 ĉ)`.
    pub fn sigma2(&self) -> f64 {
        self.c() / (3.0 * self.c_hat())
    }

    /// The diffusion coefficient as printed in the source derivation,
    /// `√(c / (6 ĉ))`; its square is half of [`Self::sigma2`].
    pub fn omega_printed(&self) -> f64 {
        (self.c() / (6.0 * self.c_hat())).sqrt()
    }

    /// Half-width of the angular window, `n^{−a}`.
    pub fn angle_window(&self) -> f64 {
        self.n.powf(-self.a_exp)
    }

    /// Half-width of the start window, `n^{−b}`.
    pub fn start_window(&self) -> f64 {
        self.n.powf(-self.b_exp)
    }

    pub fn inner_radius(&self) -> f64 {
        self.alpha * self.n
    }

    /// Membership in `Λ̄_n`: radius in `[αn, n]`, angle within `n^{−a}`.
    pub fn in_lambda_bar(&self, p: PlanarPoint) -> bool {
        let r = p.norm();
        r >= self.inner_radius() && r <= self.n && p.sigma().abs() <= self.angle_window()
    }

    /// Membership in `Λ_n`: radius in `[αn, n]`, angle within `n^{−b}`.
    pub fn in_lambda(&self, p: PlanarPoint) -> bool {
        let r = p.norm();
        r >= self.inner_radius() && r <= self.n && p.sigma().abs() <= self.start_window()
    }
}

/// Two-angle membership test for the closed quadrangle with apex `x`.
pub fn quadrangle_contains_theta(x: PlanarPoint, theta: f64, p: PlanarPoint) -> bool {
    let (st, ct) = theta.sin_cos();
    let rx = x.norm();
    // angle(p − x, O − x) ≤ θ
    let u = p.sub(x);
    let nu = u.norm();
    if nu > 0.0 {
        let cos_x = -u.dot(x) / (nu * rx);
        if cos_x < ct - EPS_GEOM {
            return false;
        }
    }
    // angle(p, x) at the origin ≤ π/2 − θ
    let np = p.norm();
    if np > 0.0 {
        let cos_o = p.dot(x) / (np * rx);
        if cos_o < st - EPS_GEOM {
            return false;
        }
    }
    true
}

pub fn quadrangle_contains(x: PlanarPoint, params: &ModelParams, p: PlanarPoint) -> Result<bool> {
    if x.is_origin() {
        return Err(Error::InvalidApex);
    }
    Ok(quadrangle_contains_theta(x, params.theta, p))
}

fn check_depth(x: PlanarPoint, l: f64) -> Result<f64> {
    let r = x.norm();
    if !(l >= 0.0 && l <= r) {
        return Err(Error::InvalidDepth { depth: l, max: r });
    }
    Ok(r)
}

/// Membership in `T_{x,l} = Q_x ∩ {‖p‖ ≥ ‖x‖ − l}`.
pub fn triangle_contains(x: PlanarPoint, l: f64, params: &ModelParams, p: PlanarPoint) -> Result<bool> {
    if x.is_origin() {
        return Err(Error::InvalidApex);
    }
    let r = check_depth(x, l)?;
    Ok(p.norm() >= r - l && quadrangle_contains_theta(x, params.theta, p))
}

/// The point on segment `Ox` at distance `l` from `x`.
pub fn w_point(x: PlanarPoint, l: f64) -> Result<PlanarPoint> {
    let r = check_depth(x, l)?;
    if r == 0.0 {
        return Ok(x);
    }
    Ok(x.scale((r - l) / r))
}

/// The two side vertices of `Q_x`, where the right angles sit.
pub fn quadrangle_side_vertices(x: PlanarPoint, theta: f64) -> (PlanarPoint, PlanarPoint) {
    let r = x.norm();
    let phi = x.x2.atan2(x.x1);
    let half = FRAC_PI_2 - theta;
    let len = r * theta.sin();
    let y = from_polar(PolarPoint { r: len, phi: phi + half });
    let z = from_polar(PolarPoint { r: len, phi: phi - half });
    (y, z)
}

/// Axis-aligned bounding box `(x1_lo, x1_hi, x2_lo, x2_hi)` of `Q_x`.
pub fn quadrangle_bbox(x: PlanarPoint, theta: f64) -> [f64; 4] {
    let (y, z) = quadrangle_side_vertices(x, theta);
    let pts = [PlanarPoint::ORIGIN, x, y, z];
    bbox_of(&pts)
}

/// Bounding box of `T_{x,l}`: the quadrangle box intersected with the
/// disc around `x` that contains every point of `Q_x` at radius ≥ ‖x‖ − l.
pub fn triangle_bbox(x: PlanarPoint, l: f64, theta: f64) -> [f64; 4] {
    let q = quadrangle_bbox(x, theta);
    let rho = triangle_reach(x.norm(), l, theta);
    [
        q[0].max(x.x1 - rho),
        q[1].min(x.x1 + rho),
        q[2].max(x.x2 - rho),
        q[3].min(x.x2 + rho),
    ]
}

/// Largest distance from the apex to a point of `T_{x,l}`, for `‖x‖ = r`.
///
/// A point at distance `d` from the apex, at angle at most θ off the axis,
/// has squared norm at most `r² − 2rd cosθ + d²`; requiring this to be at
/// least `(r − l)²` bounds `d` by the smaller root. Without a root the
/// Thales disc on `Ox` still bounds it by `√(r² − (r − l)²)`.
pub fn triangle_reach(r: f64, l: f64, theta: f64) -> f64 {
    let ct = theta.cos();
    let q = (2.0 * r * l - l * l).max(0.0);
    let disc = r * r * ct * ct - q;
    let d = if disc < 0.0 { q.sqrt() } else { q / (r * ct + disc.sqrt()) };
    (d * (1.0 + 1e-12) + 1e-12).min(r)
}

pub fn bbox_of(pts: &[PlanarPoint]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in pts {
        b[0] = b[0].min(p.x1);
        b[1] = b[1].max(p.x1);
        b[2] = b[2].min(p.x2);
        b[3] = b[3].max(p.x2);
    }
    b
}
