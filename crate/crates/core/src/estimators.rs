//! Estimators that turn ensembles and trial outcomes into reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::path::PathPolyline;
use crate::reference::{coalescing_density, lln_curve, non_coalescence};
use crate::stats::{linear_fit, mean, normal_cdf, one_sample_ks, quantile, variance, StatsReport};

/// Coincidence tolerance for "distinct points" on a time slice.
pub const COINCIDENCE: f64 = 1e-9;

fn distinct(mut v: Vec<f64>) -> usize {
    if v.is_empty() {
        return 0;
    }
    v.sort_by(f64::total_cmp);
    1 + v.windows(2).filter(|w| w[1] - w[0] > COINCIDENCE).count()
}

/// Distinct positions at `t0 + t` of paths that start by `t0` and pass
/// through `[a, b]` at `t0`.
pub fn eta_count(paths: &[PathPolyline], t0: f64, t: f64, a: f64, b: f64) -> usize {
    let vals = paths
        .iter()
        .filter(|p| p.t_start() <= t0)
        .filter(|p| p.value_at(t0).is_some_and(|x| x >= a && x <= b))
        .filter_map(|p| p.value_at(t0 + t))
        .collect();
    distinct(vals)
}

/// Distinct positions in `(a, b)` at `t0 + t` of paths alive at `t0`.
pub fn eta_hat_count(paths: &[PathPolyline], t0: f64, t: f64, a: f64, b: f64) -> usize {
    let vals = paths
        .iter()
        .filter(|p| p.t_start() <= t0 && p.value_at(t0).is_some())
        .filter_map(|p| p.value_at(t0 + t))
        .filter(|&x| x > a && x < b)
        .collect();
    distinct(vals)
}

/// Jackknife standard error of the sample variance, in closed form.
fn jackknife_variance_se(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let m = mean(d);
    let ss: f64 = d.iter().map(|x| (x - m).powi(2)).sum();
    let loo: Vec<f64> = d
        .iter()
        .map(|&x| {
            // leave-one-out sum of squares about the leave-one-out mean
            let m1 = (m * n - x) / (n - 1.0);
            let ss1 = ss - (x - m) * (x - m1);
            ss1 / (n - 2.0)
        })
        .collect();
    let lm = mean(&loo);
    ((n - 1.0) / n * loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>()).sqrt()
}

/// `Var(Z(t2) − Z(t1)) / (t2 − t1)` from paired values, with a jackknife
/// standard error and a KS normality check of the standardized increments.
/// With `expected = Some((σ², rel))` the verdict also requires the estimate
/// to lie within relative distance `rel` of `σ²`.
pub fn variance_rate(z1: &[f64], z2: &[f64], t1: f64, t2: f64, expected: Option<(f64, f64)>) -> Result<StatsReport> {
    if !(t2 > t1) {
        return Err(Error::InvalidInput(format!("need t1 < t2, got {t1}, {t2}")));
    }
    if z1.len() != z2.len() {
        return Err(Error::InvalidInput("unpaired values".into()));
    }
    if z1.len() < 1000 {
        return Err(Error::InsufficientData(format!("{} increments, need at least 1000", z1.len())));
    }
    let d: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| b - a).collect();
    let h = t2 - t1;
    let est = variance(&d) / h;
    let se = jackknife_variance_se(&d) / h;
    let (m, sd) = (mean(&d), variance(&d).sqrt());
    let ks = one_sample_ks(&d, |x| normal_cdf((x - m) / sd))?;
    let ks_p = ks.p.unwrap_or(0.0);
    let mut r = StatsReport::new("variance_rate")
        .estimate(est)
        .stderr(se)
        .stat(ks.stat.unwrap_or(f64::NAN))
        .p(ks_p)
        .meta("t1", t1)
        .meta("t2", t2)
        .meta("samples", d.len() as u64)
        .meta("normality_p", ks_p);
    let mut pass = ks_p > crate::stats::ALPHA_99;
    if let Some((s2, rel)) = expected {
        pass &= ((est - s2) / s2).abs() <= rel;
        r = r.threshold(rel).meta("expected", s2).meta("relative_error", (est - s2) / s2);
    } else {
        r = r.threshold(crate::stats::ALPHA_99);
    }
    Ok(r.pass(pass))
}

/// Wrapper over path ensembles, reading `Z` at the two times.
pub fn variance_rate_paths(paths: &[PathPolyline], t1: f64, t2: f64, expected: Option<(f64, f64)>) -> Result<StatsReport> {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for p in paths {
        if let (Some(x), Some(y)) = (p.value_at(t1), p.value_at(t2)) {
            a.push(x);
            b.push(y);
        }
    }
    variance_rate(&a, &b, t1, t2, expected)
}

/// Sample correlation of two equally long series.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Sup deviation of `S_{⌊rn⌋}/n` from `ĉr/(1 − ĉr)` per chain. Row `k` of
/// `scaled` holds the values at `r_grid[k]`. Passes when the 95th
/// percentile is below `tol`.
pub fn lln_deviation(scaled: &[Vec<f64>], r_grid: &[f64], c_hat: f64, tol: f64) -> Result<(StatsReport, Vec<f64>)> {
    if scaled.is_empty() {
        return Err(Error::InsufficientData("no chains".into()));
    }
    let limit: Vec<f64> = r_grid.iter().map(|&r| lln_curve(r, c_hat)).collect::<Result<_>>()?;
    let sups: Vec<f64> = scaled
        .iter()
        .map(|row| row.iter().zip(&limit).map(|(s, l)| (s - l).abs()).fold(0.0, f64::max))
        .collect();
    let p95 = quantile(&sups, 0.95);
    let r = StatsReport::new("lln_deviation")
        .estimate(p95)
        .stat(mean(&sups))
        .threshold(tol)
        .pass(p95 < tol)
        .meta("mean_sup_deviation", mean(&sups))
        .meta("p95_sup_deviation", p95)
        .meta("chains", scaled.len() as u64)
        .meta("grid_points", r_grid.len() as u64)
        .meta("c_hat", c_hat);
    Ok((r, sups))
}

/// Empirical `P(ν > t)`; infinite values count as survivors.
pub fn survival(nus: &[f64], t: f64) -> f64 {
    nus.iter().filter(|&&v| v > t).count() as f64 / nus.len() as f64
}

fn survival_sorted(sorted: &[f64], t: f64) -> f64 {
    let k = sorted.partition_point(|&v| v <= t);
    (sorted.len() - k) as f64 / sorted.len() as f64
}

/// Log-spaced evaluation times in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (k - 1) as f64).exp()).collect()
}

fn slope_of(sorted: &[f64], ts: &[f64]) -> Option<f64> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for &t in ts {
        let s = survival_sorted(sorted, t);
        if s > 0.0 {
            x.push(t.ln());
            y.push(s.ln());
        }
    }
    (x.len() >= 2).then(|| linear_fit(&x, &y).1)
}

fn resample(v: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut b: Vec<f64> = (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect();
    b.sort_by(f64::total_cmp);
    b
}

/// Log-log least-squares slope of the survival curve over `window`, with a
/// bootstrap 99% interval. Passes when the slope is within `tol` of
/// `target`. The curve is returned as `(t, survival)` pairs.
pub fn coalescence_tail_fit(
    nus: &[f64],
    window: (f64, f64),
    target: f64,
    tol: f64,
    boot: usize,
    seed: u64,
) -> Result<(StatsReport, Vec<(f64, f64)>)> {
    let finite = nus.iter().filter(|v| v.is_finite()).count();
    if finite == 0 {
        return Err(Error::AllCensored);
    }
    if finite < 1000 {
        return Err(Error::InsufficientData(format!("{finite} uncensored samples, need at least 1000")));
    }
    let at_risk = nus.iter().filter(|&&v| v > window.0).count();
    if nus.iter().filter(|&&v| v > window.0 && v <= window.1).count() == 0 {
        return Err(Error::AllCensored);
    }
    let mut sorted = nus.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ts = log_grid(window.0, window.1, 21);
    let slope = slope_of(&sorted, &ts).ok_or_else(|| Error::InsufficientData("survival vanishes in the window".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bs: Vec<f64> = (0..boot).filter_map(|_| slope_of(&resample(nus, &mut rng), &ts)).collect();
    bs.sort_by(f64::total_cmp);
    let (lo, hi) = if bs.is_empty() { (f64::NAN, f64::NAN) } else { (quantile(&bs, 0.005), quantile(&bs, 0.995)) };
    let curve: Vec<(f64, f64)> = ts.iter().map(|&t| (t, survival_sorted(&sorted, t))).collect();
    let r = StatsReport::new("coalescence_tail_slope")
        .estimate(slope)
        .stderr(if bs.len() > 1 { variance(&bs).sqrt() } else { f64::NAN })
        .threshold(tol)
        .pass((slope - target).abs() <= tol)
        .meta("target", target)
        .meta("ci99_lo", lo)
        .meta("ci99_hi", hi)
        .meta("samples", nus.len() as u64)
        .meta("uncensored", finite as u64)
        .meta("at_risk_at_window_start", at_risk as u64)
        .meta("window_lo", window.0)
        .meta("window_hi", window.1);
    Ok((r, curve))
}

/// Ratio `P(ν_b > t) / P(ν_a > t)` with a bootstrap interval. Passes when
/// the ratio lies within relative distance `rel` of `target`.
pub fn survival_ratio(a: &[f64], b: &[f64], t: f64, target: f64, rel: f64, boot: usize, seed: u64) -> Result<StatsReport> {
    let sa = survival(a, t);
    if sa == 0.0 {
        return Err(Error::InsufficientData(format!("no survivors at t = {t}")));
    }
    let ratio = survival(b, t) / sa;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rs = Vec::with_capacity(boot);
    for _ in 0..boot {
        let (ra, rb) = (resample(a, &mut rng), resample(b, &mut rng));
        let d = survival_sorted(&ra, t);
        if d > 0.0 {
            rs.push(survival_sorted(&rb, t) / d);
        }
    }
    let (lo, hi) = if rs.is_empty() { (f64::NAN, f64::NAN) } else { (quantile(&rs, 0.005), quantile(&rs, 0.995)) };
    Ok(StatsReport::new("survival_ratio")
        .estimate(ratio)
        .stderr(if rs.len() > 1 { variance(&rs).sqrt() } else { f64::NAN })
        .threshold(rel)
        .pass(((ratio - target) / target).abs() <= rel)
        .meta("t", t)
        .meta("target", target)
        .meta("ci99_lo", lo)
        .meta("ci99_hi", hi))
}

/// Mean count per cell and its standard error from per-cell counts.
/// `(lag, density, standard error)`.
pub type DensityRow = (f64, f64, f64);

pub fn cell_mean(counts: &[u32]) -> (f64, f64) {
    let v: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    if v.len() < 2 {
        return (v.first().copied().unwrap_or(f64::NAN), f64::NAN);
    }
    (mean(&v), (variance(&v) / v.len() as f64).sqrt())
}

/// Touch density per unit length at each lag and the slope of its log
/// against log lag. Passes when the slope is within `tol` of `target`.
pub fn touch_density(lags: &[f64], counts: &[Vec<u32>], cell: f64, target: f64, tol: f64) -> Result<(StatsReport, Vec<DensityRow>)> {
    let mut rows = Vec::with_capacity(lags.len());
    for (&t, c) in lags.iter().zip(counts) {
        if c.is_empty() {
            return Err(Error::InsufficientData(format!("no admissible cell at lag {t}")));
        }
        let (m, se) = cell_mean(c);
        rows.push((t, m / cell, se / cell));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let (_, slope, se) = linear_fit(&x, &y);
    let r = StatsReport::new("touch_density_slope")
        .estimate(slope)
        .stderr(se)
        .threshold(tol)
        .pass((slope - target).abs() <= tol)
        .meta("target", target)
        .meta("cell_length", cell);
    Ok((r, rows))
}

/// Compares an empirical `P(η ≥ 2)` with `2Φ(ε/√(2σ̂²t)) − 1` at the
/// fitted rate `σ̂²`, within `k` combined standard errors (binomial plus
/// the delta-method share of the rate uncertainty).
pub fn b1_check(eps: f64, t: f64, split: &[bool], sigma2_hat: f64, sigma2_se: f64, k: f64) -> Result<StatsReport> {
    if split.is_empty() {
        return Err(Error::InsufficientData("no realizations".into()));
    }
    let n = split.len() as f64;
    let p_hat = split.iter().filter(|&&b| b).count() as f64 / n;
    let p0 = non_coalescence(eps, t, sigma2_hat)?;
    let z = eps / (2.0 * sigma2_hat * t).sqrt();
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let dp = -phi * z / sigma2_hat;
    let se_bin = (p0 * (1.0 - p0) / n).sqrt();
    let se = (se_bin * se_bin + (dp * sigma2_se).powi(2)).sqrt();
    let stat = (p_hat - p0) / se;
    Ok(StatsReport::new("b1_non_coalescence")
        .estimate(p_hat)
        .stderr(se)
        .stat(stat)
        .p(2.0 * (1.0 - normal_cdf(stat.abs())))
        .threshold(k)
        .pass(stat.abs() <= k)
        .meta("eps", eps)
        .meta("t", t)
        .meta("oracle", p0)
        .meta("sigma2_fitted", sigma2_hat)
        .meta("realizations", split.len() as u64))
}

/// Checks `Ê[η̂] ≤ factor · (b − a) / √(π σ² t)` from per-window counts.
pub fn e_density_check(t: f64, width: f64, counts: &[u32], sigma2: f64, factor: f64) -> Result<StatsReport> {
    if counts.is_empty() {
        return Err(Error::InsufficientData("no admissible window".into()));
    }
    let (m, se) = cell_mean(counts);
    let bound = width * coalescing_density(t, sigma2)?;
    Ok(StatsReport::new("e_density")
        .estimate(m)
        .stderr(se)
        .stat(m / bound)
        .threshold(factor)
        .pass(m <= factor * bound)
        .meta("t", t)
        .meta("bound", bound)
        .meta("windows", counts.len() as u64)
        .meta("sigma2", sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlanarPoint;
    use crate::reference::sample_coalescing_bm;
    use rand_distr::{Distribution, StandardNormal};

    fn seg(x0: f64, x1: f64) -> PathPolyline {
        PathPolyline::new(vec![PlanarPoint::new(x0, 0.0), PlanarPoint::new(x1, 1.0)])
    }

    #[test]
    fn eta_enumeration() {
        // three paths, two of which meet before t = 1
        let paths = vec![
            PathPolyline::new(vec![PlanarPoint::new(0.0, 0.0), PlanarPoint::new(0.5, 0.5), PlanarPoint::new(0.5, 1.0)]),
            PathPolyline::new(vec![PlanarPoint::new(1.0, 0.0), PlanarPoint::new(0.5, 0.5), PlanarPoint::new(0.5, 1.0)]),
            seg(2.0, 2.0),
        ];
        assert_eq!(eta_count(&paths, 0.0, 1.0, 0.0, 2.0), 2);
        assert_eq!(eta_count(&paths, 0.0, 1.0, 5.0, 6.0), 0);
        assert_eq!(eta_count(&paths, 0.0, 1.0, 0.0, 1.0), 1);
        assert_eq!(eta_hat_count(&paths, 0.0, 1.0, 0.0, 2.5), 2);
        assert_eq!(eta_hat_count(&paths, 0.0, 1.0, 5.0, 6.0), 0);
        assert_eq!(eta_hat_count(&paths, 0.0, 1.0, 0.0, 1.0), 1);
        // η is nonincreasing in t on a coalescing family
        assert!(eta_count(&paths, 0.0, 0.25, 0.0, 2.0) >= eta_count(&paths, 0.0, 1.0, 0.0, 2.0));
    }

    #[test]
    fn jackknife_matches_brute_force() {
        let d = [1.0, 2.5, -0.3, 4.0, 0.7, 1.1];
        let n = d.len();
        let loo: Vec<f64> = (0..n)
            .map(|i| {
                let v: Vec<f64> = d.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x).collect();
                variance(&v)
            })
            .collect();
        let lm = mean(&loo);
        let brute = ((n as f64 - 1.0) / n as f64 * loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>()).sqrt();
        assert!((jackknife_variance_se(&d) - brute).abs() < 1e-12);
    }

    #[test]
    fn variance_rate_on_reference() {
        let s2 = 0.376;
        let mut paths = Vec::new();
        for k in 0..2000 {
            paths.push(sample_coalescing_bm(&[PlanarPoint::new(0.0, 0.0)], s2, 0.1, 1.0, k).unwrap().paths.remove(0));
        }
        let r = variance_rate_paths(&paths, 0.2, 0.8, None).unwrap();
        assert!((r.estimate.unwrap() - s2).abs() < 3.0 * r.stderr.unwrap());
        assert!(r.pass);
        let bad = variance_rate_paths(&paths, 0.2, 0.8, Some((s2 * 2.0, 0.05))).unwrap();
        assert!(!bad.pass);
        assert!(variance_rate_paths(&paths[..10], 0.2, 0.8, None).is_err());
    }

    #[test]
    fn half_stable_tail_calibration() {
        // hitting time of 0 for |BM| from 1: P(ν > t) = 2Φ(1/√t) − 1 ~ t^{-1/2}
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nus: Vec<f64> = (0..20_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                1.0 / (z * z)
            })
            .collect();
        let (r, curve) = coalescence_tail_fit(&nus, (1e2, 1e4), -0.5, 0.1, 200, 1).unwrap();
        assert!(r.pass, "{}", r.summary());
        assert_eq!(curve.len(), 21);
        let lo = r.meta["ci99_lo"].as_f64().unwrap();
        let hi = r.meta["ci99_hi"].as_f64().unwrap();
        assert!(lo <= -0.5 && -0.5 <= hi);
        assert!(matches!(coalescence_tail_fit(&[f64::INFINITY; 5], (1.0, 2.0), -0.5, 0.1, 10, 1), Err(Error::AllCensored)));
    }

    #[test]
    fn survival_ratio_of_scaled_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draw = |m: f64, rng: &mut ChaCha8Rng| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            m * m / (z * z)
        };
        let a: Vec<f64> = (0..20_000).map(|_| draw(1.0, &mut rng)).collect();
        let b: Vec<f64> = (0..20_000).map(|_| draw(2.0, &mut rng)).collect();
        let r = survival_ratio(&a, &b, 1e3, 2.0, 0.3, 100, 2).unwrap();
        assert!(r.pass, "{}", r.summary());
    }

    #[test]
    fn lln_deviation_zero_at_origin() {
        let ch = 0.5 * std::f64::consts::PI.sqrt();
        let grid = [0.0, 0.3];
        let rows = vec![vec![0.0, lln_curve(0.3, ch).unwrap()]; 10];
        let (r, sups) = lln_deviation(&rows, &grid, ch, 0.05).unwrap();
        assert!(r.pass);
        assert!(sups.iter().all(|&s| s < 1e-15));
    }

    #[test]
    fn b1_check_on_reference_pairs() {
        let (eps, t, s2) = (0.5, 0.5, 0.376);
        let split: Vec<bool> = (0..4000)
            .map(|k| {
                let e = sample_coalescing_bm(&[PlanarPoint::new(0.0, 0.0), PlanarPoint::new(eps, 0.0)], s2, 1e-3, t, k).unwrap();
                e.paths[0].end() != e.paths[1].end()
            })
            .collect();
        let r = b1_check(eps, t, &split, s2, 0.0, 3.0).unwrap();
        assert!(r.pass, "{}", r.summary());
    }

    #[test]
    fn touch_density_slope_on_synthetic_counts() {
        let lags = [1.0, 4.0, 16.0];
        // 8, 4, 2 per cell of length 4: density halves as the lag quadruples
        let counts = vec![vec![8, 8, 8], vec![4, 4, 4], vec![2, 2, 2]];
        let (r, rows) = touch_density(&lags, &counts, 4.0, -0.5, 0.15).unwrap();
        assert!((r.estimate.unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(rows[0].1, 2.0);
        // bound 1.1/√π ≈ 0.62
        assert!(e_density_check(1.0, 1.0, &[1, 0, 0], 1.0, 1.1).unwrap().pass);
        assert!(!e_density_check(1.0, 1.0, &[1, 0, 1], 1.0, 1.1).unwrap().pass);
    }
}
