//! Report type and the generic test machinery (KS, chi-square, regression).

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Default significance level for two-sided 99% verdicts.
pub const ALPHA_99: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub name: String,
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub stat: Option<f64>,
    pub p: Option<f64>,
    pub threshold: Option<f64>,
    pub pass: bool,
    pub meta: Map<String, Value>,
}

impl StatsReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            estimate: None,
            stderr: None,
            stat: None,
            p: None,
            threshold: None,
            pass: false,
            meta: Map::new(),
        }
    }

    pub fn estimate(mut self, v: f64) -> Self {
        self.estimate = Some(v);
        self
    }

    pub fn stderr(mut self, v: f64) -> Self {
        self.stderr = Some(v);
        self
    }

    pub fn stat(mut self, v: f64) -> Self {
        self.stat = Some(v);
        self
    }

    pub fn p(mut self, v: f64) -> Self {
        self.p = Some(v);
        self
    }

    pub fn threshold(mut self, v: f64) -> Self {
        self.threshold = Some(v);
        self
    }

    pub fn pass(mut self, v: bool) -> Self {
        self.pass = v;
        self
    }

    pub fn meta(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), v.into());
        self
    }

    pub fn set_meta(&mut self, key: &str, v: impl Into<Value>) {
        self.meta.insert(key.to_string(), v.into());
    }

    /// Pass when the p-value exceeds the threshold.
    pub fn with_p_verdict(self, threshold: f64) -> Self {
        let ok = self.p.is_some_and(|p| p > threshold);
        self.threshold(threshold).pass(ok)
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let f = |o: Option<f64>| o.map_or("-".to_string(), |v| format!("{v:.6}"));
        format!(
            "{} {}: estimate={} stderr={} stat={} p={} threshold={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            f(self.estimate),
            f(self.stderr),
            f(self.stat),
            f(self.p),
            f(self.threshold)
        )
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolation quantile on a copy of the data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (h - lo as f64)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn chi2_sf(x: f64, df: f64) -> f64 {
    ChiSquared::new(df).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let mut s = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            s += (-m * m * std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn two_sample_ks(xs: &[f64], ys: &[f64]) -> Result<StatsReport> {
    if xs.len() < 30 || ys.len() < 30 {
        return Err(Error::InsufficientData("KS needs at least 30 samples per side".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let p = ks_p(d, ne);
    Ok(StatsReport::new("two_sample_ks")
        .stat(d)
        .p(p)
        .meta("n_x", a.len())
        .meta("n_y", b.len())
        .with_p_verdict(ALPHA_99))
}

/// One-sample KS against a continuous CDF.
pub fn one_sample_ks(xs: &[f64], cdf: impl Fn(f64) -> f64) -> Result<StatsReport> {
    if xs.len() < 30 {
        return Err(Error::InsufficientData("KS needs at least 30 samples".into()));
    }
    let mut a = xs.to_vec();
    a.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    let mut d = 0.0f64;
    for (k, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    Ok(StatsReport::new("one_sample_ks")
        .stat(d)
        .p(ks_p(d, n))
        .meta("n", a.len())
        .with_p_verdict(ALPHA_99))
}

/// Pearson chi-square of observed counts against expected counts with
/// `k − 1` degrees of freedom.
pub fn chi_square(counts: &[u64], expected: &[f64]) -> Result<StatsReport> {
    if counts.len() != expected.len() || counts.len() < 2 {
        return Err(Error::InvalidInput("counts and expected must align, k ≥ 2".into()));
    }
    if expected.iter().any(|&e| !(e >= 5.0)) {
        return Err(Error::InsufficientData("expected count below 5 in some bin".into()));
    }
    let stat: f64 = counts
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let df = (counts.len() - 1) as f64;
    Ok(StatsReport::new("chi_square")
        .stat(stat)
        .p(chi2_sf(stat, df))
        .meta("df", df)
        .meta("bins", counts.len())
        .with_p_verdict(ALPHA_99))
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, se_b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (a, b, se)
}
