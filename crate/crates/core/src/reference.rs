//! Limit objects used as oracles: coalescing Brownian motions from finite
//! start sets, their bridge-window images, and closed-form formulas.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PlanarPoint;
use crate::path::PathPolyline;
use crate::stats::normal_cdf;
use crate::transform::psi_ensemble;

const COINCIDE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceEnsemble {
    pub starts: Vec<PlanarPoint>,
    pub dt: f64,
    pub sigma2: f64,
    pub tau: f64,
    pub paths: Vec<PathPolyline>,
    pub seed: u64,
}

/// Regular grid of step `dt` on `[t_min, tau]` merged with the start times.
fn time_grid(starts: &[PlanarPoint], dt: f64, tau: f64) -> Vec<f64> {
    let t_min = starts.iter().map(|p| p.x2).fold(f64::INFINITY, f64::min);
    let k = ((tau - t_min) / dt).ceil() as usize;
    let mut g: Vec<f64> = (0..k).map(|i| t_min + i as f64 * dt).collect();
    g.push(tau);
    g.extend(starts.iter().map(|p| p.x2));
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= COINCIDE * (1.0 + b.abs()));
    g
}

struct Cluster {
    leader: usize,
    x: f64,
    members: Vec<usize>,
}

/// Coalescing motions on an explicit time grid. `noise(leader, k)` supplies
/// the standard normal that drives the cluster led by start `leader` over
/// grid step `k`, so runs on nested grids can share one Brownian motion.
pub fn coalesce_on_grid(
    starts: &[PlanarPoint],
    sigma2: f64,
    grid: &[f64],
    mut noise: impl FnMut(usize, usize) -> f64,
) -> Vec<PathPolyline> {
    let mut paths: Vec<Vec<PlanarPoint>> = starts.iter().map(|&p| vec![p]).collect();
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|&a, &b| starts[a].x2.total_cmp(&starts[b].x2).then(starts[a].x1.total_cmp(&starts[b].x1)));
    let mut next_start = 0;
    let mut clusters: Vec<Cluster> = Vec::new();

    let admit = |clusters: &mut Vec<Cluster>, t: f64, next_start: &mut usize| {
        while *next_start < order.len() && starts[order[*next_start]].x2 <= t + COINCIDE * (1.0 + t.abs()) {
            let i = order[*next_start];
            *next_start += 1;
            let y = starts[i].x1;
            let at = clusters.partition_point(|c| c.x < y - COINCIDE);
            match clusters.get_mut(at) {
                Some(c) if (c.x - y).abs() <= COINCIDE => c.members.push(i),
                _ => clusters.insert(at, Cluster { leader: i, x: y, members: vec![i] }),
            }
        }
    };

    admit(&mut clusters, grid[0], &mut next_start);
    for k in 0..grid.len().saturating_sub(1) {
        let (t, t1) = (grid[k], grid[k + 1]);
        let sd = (sigma2 * (t1 - t)).sqrt();
        let prop: Vec<f64> = clusters.iter().map(|c| c.x + sd * noise(c.leader, k)).collect();
        // merge inversions left to right; the left cluster survives
        let mut stack: Vec<(Cluster, f64)> = Vec::with_capacity(clusters.len());
        for (c, xn) in clusters.drain(..).zip(prop) {
            let mut cur = (c, xn);
            while let Some(top) = stack.last_mut() {
                let d0 = cur.0.x - top.0.x;
                let d1 = cur.1 - top.1;
                if d1 > 0.0 {
                    break;
                }
                let lam = if d0 > 0.0 { d0 / (d0 - d1) } else { 0.0 };
                let tc = t + lam * (t1 - t);
                let xc = top.0.x + lam * (top.1 - top.0.x);
                for &m in &cur.0.members {
                    paths[m].push(PlanarPoint::new(xc, tc));
                }
                top.0.members.append(&mut cur.0.members);
                cur = stack.pop().expect("stack top exists");
            }
            stack.push(cur);
        }
        for (mut c, xn) in stack {
            c.x = xn;
            for &m in &c.members {
                paths[m].push(PlanarPoint::new(xn, t1));
            }
            clusters.push(c);
        }
        admit(&mut clusters, t1, &mut next_start);
    }
    paths
        .into_iter()
        .map(|mut v| {
            v.dedup_by(|a, b| a.x2 == b.x2 && a.x1 == b.x1);
            PathPolyline::new(v)
        })
        .collect()
}

/// Coalescing Brownian motions with variance rate `sigma2` from `starts`
/// up to time `tau`, exact Gaussian increments on a grid of step `dt`.
pub fn sample_coalescing_bm(starts: &[PlanarPoint], sigma2: f64, dt: f64, tau: f64, seed: u64) -> Result<ReferenceEnsemble> {
    if !(dt > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::InvalidInput("dt and sigma2 must be positive".into()));
    }
    if starts.is_empty() {
        return Err(Error::InvalidInput("no start points".into()));
    }
    if starts.iter().any(|p| !(p.x2 >= 0.0 && p.x2 <= tau) || !p.x1.is_finite()) {
        return Err(Error::DomainViolation(format!("start times must lie in [0, {tau}]")));
    }
    let grid = time_grid(starts, dt, tau);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths = coalesce_on_grid(starts, sigma2, &grid, |_, _| StandardNormal.sample(&mut rng));
    Ok(ReferenceEnsemble { starts: starts.to_vec(), dt, sigma2, tau, paths, seed })
}

/// Image of a reference ensemble in the bridge window.
pub fn bridge_web(ens: &ReferenceEnsemble) -> Result<Vec<PathPolyline>> {
    psi_ensemble(&ens.paths, ens.tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oracle {
    /// `2Φ(ε / √(2σ²t)) − 1`.
    NonCoalescence { eps: f64, t: f64, sigma2: f64 },
    /// `1 / √(π σ² t)`.
    CoalescingDensity { t: f64, sigma2: f64 },
    /// `ĉr / (1 − ĉr)`.
    LlnCurve { r: f64, c_hat: f64 },
}

pub fn analytic_oracle(o: Oracle) -> Result<f64> {
    match o {
        Oracle::NonCoalescence { eps, t, sigma2 } => non_coalescence(eps, t, sigma2),
        Oracle::CoalescingDensity { t, sigma2 } => coalescing_density(t, sigma2),
        Oracle::LlnCurve { r, c_hat } => lln_curve(r, c_hat),
    }
}

fn check_positive(t: f64, sigma2: f64) -> Result<()> {
    if t > 0.0 && sigma2 > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("need t > 0 and sigma2 > 0, got {t}, {sigma2}")))
    }
}

/// Probability that two coalescing motions `eps` apart are still apart
/// after time `t`.
pub fn non_coalescence(eps: f64, t: f64, sigma2: f64) -> Result<f64> {
    check_positive(t, sigma2)?;
    Ok(2.0 * normal_cdf(eps.abs() / (2.0 * sigma2 * t).sqrt()) - 1.0)
}

/// Expected number of distinct coalescing paths per unit length at lag `t`.
pub fn coalescing_density(t: f64, sigma2: f64) -> Result<f64> {
    check_positive(t, sigma2)?;
    Ok(1.0 / (std::f64::consts::PI * sigma2 * t).sqrt())
}

/// Limit of `S_{⌊rn⌋}/n`, defined for `0 ≤ r < 1/ĉ`.
pub fn lln_curve(r: f64, c_hat: f64) -> Result<f64> {
    if !(r >= 0.0 && c_hat > 0.0 && c_hat * r < 1.0) {
        return Err(Error::InvalidInput(format!("lln curve undefined at r = {r}")));
    }
    Ok(c_hat * r / (1.0 - c_hat * r))
}
