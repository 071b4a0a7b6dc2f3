//! Coordinate maps between the radial plane, the time strip and the bridge
//! window, the exact and linearized images of the search triangle, and the
//! path metrics `d` and `d_H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RegionQuery;
use crate::geometry::{normalize_angle, ModelParams, PlanarPoint, PolarPoint};
use crate::path::PathPolyline;

/// Direction of a strip transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub n: f64,
    pub tau: f64,
    pub direction: Direction,
}

/// `Ξ(r e^{i(−π/2 + σ)}) = (nσ, n²/r − n)`.
pub fn xi(p: PolarPoint, n: f64) -> Result<PlanarPoint> {
    if !(p.r > 0.0) || !p.r.is_finite() {
        return Err(Error::InvalidRadius(p.r));
    }
    let sigma = normalize_angle(p.phi + std::f64::consts::FRAC_PI_2);
    Ok(PlanarPoint::new(n * sigma, n * n / p.r - n))
}

/// `Ξ` applied to a Cartesian point of the radial plane.
pub fn xi_planar(p: PlanarPoint, n: f64) -> Result<PlanarPoint> {
    let r = p.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidRadius(r));
    }
    Ok(PlanarPoint::new(n * p.sigma(), n * n / r - n))
}

pub fn xi_inverse(q: PlanarPoint, n: f64) -> Result<PolarPoint> {
    let r = n * n / (q.x2 + n);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidRadius(r));
    }
    Ok(PolarPoint::new(r, q.x1 / n - std::f64::consts::FRAC_PI_2))
}

pub fn xi_inverse_planar(q: PlanarPoint, n: f64) -> Result<PlanarPoint> {
    xi_inverse(q, n).map(crate::geometry::from_polar)
}

/// `D(x1, x2) = (x1/√n, x2/n)`.
pub fn diffusive_rescale(p: PlanarPoint, n: f64) -> PlanarPoint {
    PlanarPoint::new(p.x1 / n.sqrt(), p.x2 / n)
}

pub fn diffusive_rescale_path(path: &PathPolyline, n: f64) -> PathPolyline {
    path.map(|v| diffusive_rescale(v, n))
}

/// `ψ(y, s) = (y/(1+s), −1/(1+s))` for `s ∈ [0, τ]`.
pub fn psi_point(q: PlanarPoint, tau: f64) -> Result<PlanarPoint> {
    let tol = 1e-12 * (1.0 + tau);
    if !(q.x2 >= -tol && q.x2 <= tau + tol) {
        return Err(Error::DomainViolation(format!("time {} outside [0, {tau}]", q.x2)));
    }
    let k = 1.0 / (1.0 + q.x2);
    Ok(PlanarPoint::new(q.x1 * k, -k))
}

pub fn psi_path(path: &PathPolyline, tau: f64) -> Result<PathPolyline> {
    path.try_map(|v| psi_point(v, tau))
}

/// Elementwise image of a path set.
pub fn psi_ensemble(paths: &[PathPolyline], tau: f64) -> Result<Vec<PathPolyline>> {
    paths.iter().map(|p| psi_path(p, tau)).collect()
}

/// The exact image of `T_{x,l}` under `Ξ`, described per depth `l′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrianglePrimeParams {
    /// Image of the apex, `(y, s)`.
    pub apex: PlanarPoint,
    pub depth: f64,
    pub n: f64,
    pub theta: f64,
}

impl TrianglePrimeParams {
    fn radius(&self) -> f64 {
        self.n / (1.0 + self.apex.x2 / self.n)
    }

    /// Positive root `a` of `c²(l′+a)² + (r−l′−a)² = (r−l′)²`.
    pub fn a_of(&self, lp: f64) -> Result<f64> {
        let r = self.radius();
        let c = self.theta.tan();
        let k = 1.0 + c * c;
        let q = 2.0 * r * lp - lp * lp;
        let disc = r * r - k * q;
        if disc < 0.0 || lp >= r {
            return Err(Error::GeometryFault(format!("no root for depth {lp}")));
        }
        // smaller root for u = l′ + a, written without cancellation
        let u = q / (r + disc.sqrt());
        Ok(u - lp)
    }

    /// Half-width `nη(l′)` of the image at depth `l′`.
    pub fn half_width(&self, lp: f64) -> Result<f64> {
        let r = self.radius();
        let c = self.theta.tan();
        let a = self.a_of(lp)?;
        Ok(self.n * (c * (lp + a) / (r - lp)).asin())
    }

    /// Time offset `(1+s/n)² l′ / (1 − (l′/n)(1+s/n))` of depth `l′`.
    pub fn time_offset(&self, lp: f64) -> f64 {
        let a = 1.0 + self.apex.x2 / self.n;
        a * a * lp / (1.0 - lp / self.n * a)
    }

    /// Depth whose image lies `h` above the apex.
    pub fn depth_at_offset(&self, h: f64) -> f64 {
        let a = 1.0 + self.apex.x2 / self.n;
        h / (a * a + h * a / self.n)
    }
}

/// `Ξ(T_{x,l})` for a radial apex `x`.
pub fn triangle_prime_image(apex_radial: PlanarPoint, l: f64, n: f64, theta: f64) -> Result<TrianglePrimeParams> {
    let r = apex_radial.norm();
    if !(l >= 0.0 && l <= r) {
        return Err(Error::InvalidDepth { depth: l, max: r });
    }
    Ok(TrianglePrimeParams { apex: xi_planar(apex_radial, n)?, depth: l, n, theta })
}

/// Slope of the linearized triangle at strip time `s`; constant from `τn` on.
pub fn double_prime_slope(s: f64, params: &ModelParams) -> f64 {
    let cut = params.tau() * params.n;
    let s = s.min(cut);
    params.c_n(s) / (1.0 + s / params.n)
}

/// `T″_{(y,s),v}`: the linear-slope triangle above `(y, s)`.
pub fn triangle_double_prime(apex_planar: PlanarPoint, v: f64, params: &ModelParams) -> RegionQuery {
    RegionQuery::TrianglePlanar { apex: apex_planar, height: v, slope: double_prime_slope(apex_planar.x2, params) }
}

/// Area of `T′ △ T″` where `T′` is the exact image of depth `depth` and
/// `T″` the linearized triangle of the same height, by midpoint-rule
/// integration of the width mismatch over `steps` slices.
pub fn symmetric_difference_area(tp: &TrianglePrimeParams, params: &ModelParams, steps: usize) -> Result<f64> {
    let h_top = tp.time_offset(tp.depth);
    let slope = double_prime_slope(tp.apex.x2, params);
    let dh = h_top / steps as f64;
    let mut area = 0.0;
    for k in 0..steps {
        let h = (k as f64 + 0.5) * dh;
        let w1 = tp.half_width(tp.depth_at_offset(h))?;
        let w2 = slope * h;
        area += 2.0 * (w1 - w2).abs() * dh;
    }
    Ok(area)
}

/// Window `(β, β′, β″)` of the path metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWindow {
    pub beta: f64,
    pub beta_mid: f64,
    pub beta_end: f64,
}

impl MetricWindow {
    /// `(−1, −α, −α/2)`.
    pub fn bridge(alpha: f64) -> Self {
        Self { beta: -1.0, beta_mid: -alpha, beta_end: -alpha / 2.0 }
    }
}

const GRID: usize = 2048;

/// `d(p1, p2) = |t0 − s0| ∨ |t1 − s1| ∨ sup |tanh f⋆ − tanh g⋆|`, the sup
/// taken on a 2048-point grid of `[β, β″]` plus every vertex time.
pub fn path_distance(p1: &PathPolyline, p2: &PathPolyline, window: &MetricWindow) -> f64 {
    let mut d = (p1.t_start() - p2.t_start()).abs().max((p1.t_end() - p2.t_end()).abs());
    let mut probe = |t: f64| {
        let v = (p1.value_at_extended(t).tanh() - p2.value_at_extended(t).tanh()).abs();
        if v > d {
            d = v;
        }
    };
    let (lo, hi) = (window.beta, window.beta_end);
    for k in 0..=GRID {
        probe(lo + (hi - lo) * k as f64 / GRID as f64);
    }
    for v in p1.vertices.iter().chain(&p2.vertices) {
        if v.x2 >= lo && v.x2 <= hi {
            probe(v.x2);
        }
    }
    d
}

const PROBES: usize = 9;

struct Sketch {
    t0: f64,
    t1: f64,
    probes: [f64; PROBES],
}

fn sketch(p: &PathPolyline, w: &MetricWindow) -> Sketch {
    let mut probes = [0.0; PROBES];
    for (k, pr) in probes.iter_mut().enumerate() {
        let t = w.beta + (w.beta_end - w.beta) * k as f64 / (PROBES - 1) as f64;
        *pr = p.value_at_extended(t).tanh();
    }
    Sketch { t0: p.t_start(), t1: p.t_end(), probes }
}

fn lower_bound(a: &Sketch, b: &Sketch) -> f64 {
    let mut d = (a.t0 - b.t0).abs().max((a.t1 - b.t1).abs());
    for k in 0..PROBES {
        d = d.max((a.probes[k] - b.probes[k]).abs());
    }
    d
}

fn directed(a: &[PathPolyline], sa: &[Sketch], b: &[PathPolyline], sb: &[Sketch], w: &MetricWindow) -> f64 {
    let mut h = 0.0f64;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(b.len());
    for (i, p) in a.iter().enumerate() {
        order.clear();
        order.extend(sb.iter().enumerate().map(|(j, s)| (lower_bound(&sa[i], s), j)));
        order.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut best = f64::INFINITY;
        for &(lb, j) in &order {
            // neither a closer match nor a larger directed distance is possible
            if lb >= best || best <= h {
                break;
            }
            best = best.min(path_distance(p, &b[j], w));
        }
        h = h.max(best);
    }
    h
}

/// Hausdorff distance between two finite path sets under `d`. Lower bounds
/// from start/end times and a few probe values prune exact evaluations
/// without changing the result.
pub fn hausdorff_distance(e1: &[PathPolyline], e2: &[PathPolyline], window: &MetricWindow) -> f64 {
    if e1.is_empty() || e2.is_empty() {
        return if e1.is_empty() && e2.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let s1: Vec<_> = e1.iter().map(|p| sketch(p, window)).collect();
    let s2: Vec<_> = e2.iter().map(|p| sketch(p, window)).collect();
    directed(e1, &s1, e2, &s2, window).max(directed(e2, &s2, e1, &s1, window))
}

/// Restriction to the time horizon `tau`: paths starting after `tau` are
/// dropped, the rest are cut at `tau` or held constant up to it.
pub fn restrict_paths(paths: &[PathPolyline], tau: f64) -> Vec<PathPolyline> {
    paths
        .iter()
        .filter(|p| p.t_start() <= tau)
        .map(|p| {
            let mut v: Vec<PlanarPoint> = p.vertices.iter().copied().filter(|q| q.x2 < tau).collect();
            if v.is_empty() {
                // path starting exactly at tau
                v.push(p.start());
                return PathPolyline::new(v);
            }
            let x = p.value_at(tau).unwrap_or(p.end().x1);
            let end = PlanarPoint::new(x, tau);
            v.push(end);
            PathPolyline::new(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn params(n: f64) -> ModelParams {
        ModelParams::with_n(n).unwrap()
    }

    #[test]
    fn xi_examples_and_round_trip() {
        let n = 100.0;
        let q = xi(PolarPoint::new(n, -FRAC_PI_2), n).unwrap();
        assert!(q.x1.abs() < 1e-12 && q.x2.abs() < 1e-12);
        let q = xi(PolarPoint::new(0.5 * n, -FRAC_PI_2), n).unwrap();
        assert!(q.x1.abs() < 1e-12 && (q.x2 - n).abs() < 1e-9);
        let q = xi(PolarPoint::new(80.0, -FRAC_PI_2 + 0.01), n).unwrap();
        assert!((q.x1 - 1.0).abs() < 1e-12 && (q.x2 - 25.0).abs() < 1e-12);
        for (r, sg) in [(80.0, 0.01), (55.5, -0.2), (99.0, 0.0)] {
            let p = PolarPoint::new(r, -FRAC_PI_2 + sg);
            let back = xi_inverse(xi(p, n).unwrap(), n).unwrap();
            assert!((back.r - r).abs() < 1e-10 * r && (back.phi - p.phi).abs() < 1e-12);
        }
        assert!(matches!(xi(PolarPoint::new(0.0, 0.0), n), Err(Error::InvalidRadius(_))));
    }

    #[test]
    fn diffusive_examples() {
        assert_eq!(diffusive_rescale(PlanarPoint::ORIGIN, 100.0), PlanarPoint::ORIGIN);
        assert_eq!(diffusive_rescale(PlanarPoint::new(10.0, 100.0), 100.0), PlanarPoint::new(1.0, 1.0));
        let n = 1e4;
        let q = diffusive_rescale(xi(PolarPoint::new(n / 2.0, -FRAC_PI_2 + 0.01), n).unwrap(), n);
        assert!((q.x1 - 1.0).abs() < 1e-12 && (q.x2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_point(PlanarPoint::new(0.0, 0.0), 1.0).unwrap(), PlanarPoint::new(0.0, -1.0));
        let alpha = 0.25;
        let tau = 1.0 / alpha - 1.0;
        let q = psi_point(PlanarPoint::new(2.0, tau), tau).unwrap();
        assert!((q.x1 - alpha * 2.0).abs() < 1e-15 && (q.x2 + alpha).abs() < 1e-15);
        assert!(matches!(psi_point(PlanarPoint::new(0.0, 1.5), 1.0), Err(Error::DomainViolation(_))));
        // ψ∘D∘Ξ(r e^{i(−π/2+σ)}) = (rσ/√n, −r/n)
        let n = 1e4;
        for (r, sg) in [(7000.0, 0.003), (9900.0, -0.01)] {
            let w = psi_point(diffusive_rescale(xi(PolarPoint::new(r, -FRAC_PI_2 + sg), n).unwrap(), n), 1.0).unwrap();
            assert!((w.x1 - r * sg / n.sqrt()).abs() < 1e-12);
            assert!((w.x2 + r / n).abs() < 1e-12);
        }
    }

    /// Root of the T′ quadratic located by bisection along the side of `Q_x`.
    fn a_by_bisection(r: f64, lp: f64, c: f64) -> f64 {
        let g = |u: f64| ((r - u).powi(2) + (c * u).powi(2)).sqrt() - (r - lp);
        let (mut lo, mut hi) = (0.0, lp * 2.0 + 1.0);
        assert!(g(lo) > 0.0 && g(hi) < 0.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if g(m) > 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        0.5 * (lo + hi) - lp
    }

    #[test]
    fn a_root_matches_geometry() {
        let n = 1e4;
        let tp = triangle_prime_image(PlanarPoint::new(0.0, -n / 1.3), 9.0, n, FRAC_PI_4).unwrap();
        let r = n / 1.3;
        for lp in [0.1, 1.0, 4.0, 9.0] {
            let a = tp.a_of(lp).unwrap();
            assert!((a - a_by_bisection(r, lp, 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn a_over_l_first_order_term() {
        // Expanding the root gives a = c² l′² / (2r) + O(l′³/r²), so a/l′
        // vanishes with l′ at fixed n.
        let n = 1e4;
        for theta in [0.5, FRAC_PI_4, 1.0] {
            let c: f64 = f64::tan(theta);
            let tp = triangle_prime_image(PlanarPoint::new(0.0, -n / 1.25), 5.0, n, theta).unwrap();
            let r = n / 1.25;
            for lp in [0.01, 0.1, 1.0] {
                let a = tp.a_of(lp).unwrap();
                let lead = c * c * lp * lp / (2.0 * r);
                assert!(((a - lead) / lead).abs() < 10.0 * lp / r * (1.0 + c * c));
            }
        }
    }

    #[test]
    fn double_prime_width_matches_half_width_to_second_order() {
        let p = params(1e4);
        let tp = triangle_prime_image(PlanarPoint::new(0.0, -p.n), p.log_n(), p.n, p.theta).unwrap();
        let slope = double_prime_slope(0.0, &p);
        for lp in [0.5, 2.0, p.log_n()] {
            let h = tp.time_offset(lp);
            let w1 = tp.half_width(lp).unwrap();
            let w2 = slope * h;
            // mismatch is O(l′²/n), not zero
            assert!((w1 - w2).abs() < 2.0 * lp * lp / p.n + 1e-12);
        }
    }

    #[test]
    fn time_offset_inverts() {
        let tp = TrianglePrimeParams { apex: PlanarPoint::new(0.0, 300.0), depth: 9.0, n: 1000.0, theta: FRAC_PI_4 };
        for lp in [0.0, 0.5, 3.0, 9.0] {
            assert!((tp.depth_at_offset(tp.time_offset(lp)) - lp).abs() < 1e-12);
        }
        assert_eq!(tp.time_offset(0.0), 0.0);
        assert_eq!(tp.half_width(0.0).unwrap(), 0.0);
    }

    #[test]
    fn metric_examples() {
        let w = MetricWindow { beta: 0.0, beta_mid: 0.5, beta_end: 1.0 };
        let a = PathPolyline::new(vec![PlanarPoint::new(0.0, 0.0), PlanarPoint::new(0.0, 1.0)]);
        let b = PathPolyline::new(vec![PlanarPoint::new(1.0, 0.0), PlanarPoint::new(1.0, 1.0)]);
        assert_eq!(path_distance(&a, &a, &w), 0.0);
        assert!((path_distance(&a, &b, &w) - 1f64.tanh()).abs() < 1e-15);
        assert_eq!(path_distance(&a, &b, &w), path_distance(&b, &a, &w));
        assert_eq!(hausdorff_distance(std::slice::from_ref(&a), std::slice::from_ref(&a), &w), 0.0);
        assert_eq!(hausdorff_distance(std::slice::from_ref(&a), std::slice::from_ref(&b), &w), path_distance(&a, &b, &w));
    }

    #[test]
    fn restrict_examples() {
        let p = PathPolyline::new(vec![PlanarPoint::new(0.0, 0.0), PlanarPoint::new(2.0, 2.0)]);
        let r = restrict_paths(std::slice::from_ref(&p), 1.0);
        assert_eq!(r[0].vertices, vec![PlanarPoint::new(0.0, 0.0), PlanarPoint::new(1.0, 1.0)]);
        let late = PathPolyline::new(vec![PlanarPoint::new(0.0, 1.5), PlanarPoint::new(0.0, 2.0)]);
        assert!(restrict_paths(&[late], 1.0).is_empty());
        assert_eq!(restrict_paths(&r, 1.0), r);
    }
}
