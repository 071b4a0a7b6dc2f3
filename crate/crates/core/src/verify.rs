//! Verification suites. Each suite runs one experiment from the master seed
//! and returns its reports together with CSV tables for plotting. Trials
//! draw their randomness from seeds derived per trial, so results do not
//! depend on the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{chain_times, chain_values_at, sample_increment, ChainLaw};
use crate::error::{Error, Result};
use crate::estimators::{
    b1_check, cell_mean, coalescence_tail_fit, correlation, e_density_check, lln_deviation, survival_ratio, touch_density,
    variance_rate,
};
use crate::export::Csv;
use crate::field::{chi_square_points, IntensityBins, IntensityLaw, LazyPointField};
use crate::flow::{cell_counts, extreme_paths, run_two_paths_shared_field, strip_successor, touch_positions};
use crate::geometry::{ModelParams, PlanarPoint};
use crate::path::PathPolyline;
use crate::radial::{build_gamma_double_prime, lambda_n_points, lateral_excursion, variant_agreement};
use crate::reference::{bridge_web, lln_curve, sample_coalescing_bm};
use crate::seeds::{derive, rng_for};
use crate::stats::{mean, two_sample_ks, StatsReport, ALPHA_99};
use crate::transform::{diffusive_rescale, hausdorff_distance, psi_point, xi_planar, MetricWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Intensity,
    Increments,
    Lln,
    Variance,
    Coaltail,
    B1,
    EDensity,
    LemmaAgreement,
    Hausdorff,
    Lateral,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Intensity,
        Suite::Increments,
        Suite::Lln,
        Suite::Variance,
        Suite::Coaltail,
        Suite::B1,
        Suite::EDensity,
        Suite::LemmaAgreement,
        Suite::Hausdorff,
        Suite::Lateral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Intensity => "intensity",
            Suite::Increments => "increments",
            Suite::Lln => "lln",
            Suite::Variance => "variance",
            Suite::Coaltail => "coaltail",
            Suite::B1 => "b1",
            Suite::EDensity => "e-density",
            Suite::LemmaAgreement => "lemma-agreement",
            Suite::Hausdorff => "hausdorff",
            Suite::Lateral => "lateral",
        }
    }

    /// A single suite name or `all`.
    pub fn parse_selection(s: &str) -> Result<Vec<Suite>> {
        if s == "all" {
            Ok(Suite::ALL.to_vec())
        } else {
            Ok(vec![s.parse()?])
        }
    }

    fn default_n(self) -> f64 {
        match self {
            Suite::Lln | Suite::Variance | Suite::B1 | Suite::EDensity | Suite::Hausdorff => 1e5,
            _ => 1e4,
        }
    }

    fn default_trials(self) -> u64 {
        match self {
            Suite::Intensity => 20_000,
            Suite::Increments | Suite::Variance | Suite::Coaltail => 10_000,
            Suite::Lln => 200,
            Suite::B1 => 2_000,
            Suite::EDensity => 200,
            Suite::LemmaAgreement => 10,
            Suite::Hausdorff | Suite::Lateral => 100,
        }
    }

    pub fn run(self, cfg: &SuiteConfig) -> Result<SuiteOutput> {
        let run = SuiteRun::new(self, cfg)?;
        let (reports, tables) = match self {
            Suite::Intensity => intensity(&run)?,
            Suite::Increments => increments(&run)?,
            Suite::Lln => lln(&run)?,
            Suite::Variance => variance(&run, cfg.expected_sigma2)?,
            Suite::Coaltail => coaltail(&run, cfg.horizon)?,
            Suite::B1 => b1(&run)?,
            Suite::EDensity => e_density(&run, cfg.window_w)?,
            Suite::LemmaAgreement => lemma_agreement(&run)?,
            Suite::Hausdorff => hausdorff(&run)?,
            Suite::Lateral => lateral(&run)?,
        };
        let reports = reports.into_iter().map(|r| run.stamp(r)).collect();
        Ok(SuiteOutput { suite: self, reports, tables })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown suite '{s}'")))
    }
}

/// Settings shared by all suites. `n` and `trials` replace every suite's
/// own defaults when set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    /// Supplies θ, α and the exponents; its `n` is not used.
    pub base: ModelParams,
    pub seed: u64,
    pub n: Option<f64>,
    pub trials: Option<u64>,
    pub horizon: Option<f64>,
    pub expected_sigma2: Option<f64>,
    pub window_w: Option<f64>,
}

impl SuiteConfig {
    pub fn new(base: ModelParams, seed: u64) -> Self {
        Self { base, seed, n: None, trials: None, horizon: None, expected_sigma2: None, window_w: None }
    }
}

/// A named CSV table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

impl Table {
    fn new(name: &str, csv: Csv) -> Self {
        Self { name: name.to_string(), csv: csv.into_string() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutput {
    pub suite: Suite,
    pub reports: Vec<StatsReport>,
    pub tables: Vec<Table>,
}

impl SuiteOutput {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    /// Reports as pretty JSON, the text written to `<suite>.json`.
    pub fn reports_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.reports)? + "\n")
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

struct SuiteRun {
    params: ModelParams,
    seed: u64,
    trials: u64,
}

impl SuiteRun {
    fn new(suite: Suite, cfg: &SuiteConfig) -> Result<Self> {
        let n = cfg.n.unwrap_or(suite.default_n());
        Ok(Self { params: with_n(&cfg.base, n)?, seed: cfg.seed, trials: cfg.trials.unwrap_or(suite.default_trials()) })
    }

    fn stamp(&self, r: StatsReport) -> StatsReport {
        let mut r = r;
        r.meta.entry("n").or_insert(self.params.n.into());
        r.meta("theta", self.params.theta).meta("seed", self.seed).meta("trials", self.trials)
    }

    /// Trials `0..count` in parallel, collected in index order.
    fn trials<T: Send>(&self, count: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        (0..count).into_par_iter().map(f).collect()
    }
}

fn with_n(base: &ModelParams, n: f64) -> Result<ModelParams> {
    ModelParams::new(base.theta, n, base.alpha, base.a_exp, base.b_exp)
}

/// Turns a shortage of data into a failed verdict instead of an abort.
fn soft(name: &str, r: Result<StatsReport>) -> Result<StatsReport> {
    match r {
        Err(e @ (Error::InsufficientData(_) | Error::AllCensored)) => Ok(StatsReport::new(name).pass(false).meta("error", e.to_string())),
        other => other,
    }
}

fn named(mut r: StatsReport, name: &str) -> StatsReport {
    r.name = name.to_string();
    r
}

type Outcome = Result<(Vec<StatsReport>, Vec<Table>)>;

fn intensity(run: &SuiteRun) -> Outcome {
    let p = &run.params;
    let n = p.n;
    let (rho, tau) = (p.inner_radius(), p.tau());
    // sector half-angle giving the requested expected number of points
    let w = (run.trials as f64 / (n * n * (1.0 - p.alpha * p.alpha))).min(0.5);
    let mut field = LazyPointField::new(derive(run.seed, "intensity", 0), IntensityLaw::Unit);
    let mut pts = Vec::new();
    let mut failure = None;
    field.visit_box([-n * w.sin(), n * w.sin(), -n, -rho * w.cos()], |q| {
        let r = q.norm();
        if r >= rho && r <= n && q.sigma().abs() <= w {
            match xi_planar(q, n) {
                Ok(s) => pts.push(s),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let law = IntensityLaw::transformed(p);
    let bins = IntensityBins { y_bins: 1, s_bins: 20 };
    let rect = [-n * w, n * w, 0.0, tau * n];
    let report = soft("intensity_chi_square", chi_square_points(&pts, &law, rect, bins).map(|r| r.with_p_verdict(ALPHA_99)))?
        .meta("sector_half_angle", w);
    let mut csv = Csv::with_header(&["s_lo", "s_hi", "observed", "expected"]);
    let ws = tau * n / 20.0;
    for k in 0..20 {
        let (lo, hi) = (k as f64 * ws, (k + 1) as f64 * ws);
        let last = k == 19;
        let obs = pts.iter().filter(|q| q.x2 >= lo && (q.x2 < hi || last && q.x2 <= hi)).count();
        csv.row(&[lo, hi, obs as f64, 2.0 * n * w * law.mass(lo, hi)]);
    }
    Ok((vec![report], vec![Table::new("intensity.csv", csv)]))
}

fn increments(run: &SuiteRun) -> Outcome {
    let p = run.params;
    let s0 = 0.25 * p.tau() * p.n;
    let chain = run.trials(run.trials, |k| {
        let mut rng = rng_for(run.seed, "increments-chain", k);
        sample_increment(s0, &p, ChainLaw::Strip, &mut rng)
    })?;
    let geo = run.trials(run.trials, |k| {
        let mut f = LazyPointField::new(derive(run.seed, "increments-field", k), IntensityLaw::transformed(&p));
        Ok(strip_successor(&mut f, PlanarPoint::new(0.0, s0), &p, ChainLaw::Strip)?.1)
    })?;
    let pick = |v: &[crate::chain::IncrementSample], f: fn(&crate::chain::IncrementSample) -> f64| v.iter().map(f).collect::<Vec<_>>();
    let mut reports = Vec::new();
    for (name, f) in [("increment_ks_t", (|i: &crate::chain::IncrementSample| i.t) as fn(&_) -> f64), ("increment_ks_x", |i| i.x)] {
        let r = soft(name, two_sample_ks(&pick(&chain, f), &pick(&geo, f)).map(|r| named(r.with_p_verdict(ALPHA_99), name)))?;
        reports.push(r.meta("apex_s", s0));
    }
    let mut csv = Csv::with_header(&["source", "t", "x"]);
    for (src, v) in [(0.0, &chain), (1.0, &geo)] {
        for i in v.iter() {
            csv.row(&[src, i.t, i.x]);
        }
    }
    Ok((reports, vec![Table::new("increments.csv", csv)]))
}

fn lln(run: &SuiteRun) -> Outcome {
    let p = run.params;
    let ch = p.c_hat();
    let r_max = 0.5 / ch;
    let grid: Vec<f64> = (0..50).map(|k| r_max * k as f64 / 49.0).collect();
    let idx: Vec<usize> = grid.iter().map(|r| (r * p.n).floor() as usize).collect();
    let steps = *idx.last().expect("nonempty grid");
    let rows = run.trials(run.trials, |k| {
        let mut rng = rng_for(run.seed, "lln", k);
        let s = chain_times(steps, &p, ChainLaw::Strip, &mut rng)?;
        Ok(idx.iter().map(|&i| s[i] / p.n).collect::<Vec<f64>>())
    })?;
    let (report, _) = lln_deviation(&rows, &grid, ch, 0.05)?;
    let report = report.meta("curve_at_0_3", lln_curve(0.3, ch)?).meta("c_hat", ch);
    let mut dev = Csv::with_header(&["r", "dev"]);
    let mut curve = Csv::with_header(&["r", "empirical", "limit"]);
    for (k, &r) in grid.iter().enumerate() {
        let lim = lln_curve(r, ch)?;
        let col: Vec<f64> = rows.iter().map(|row| row[k]).collect();
        dev.row(&[r, mean(&col.iter().map(|v| (v - lim).abs()).collect::<Vec<_>>())]);
        curve.row(&[r, mean(&col), lim]);
    }
    Ok((vec![report], vec![Table::new("lln.csv", dev), Table::new("lln_curve.csv", curve)]))
}

fn variance(run: &SuiteRun, expected: Option<f64>) -> Outcome {
    let p = run.params;
    let times = [0.2, 0.5, 0.8];
    let abs: Vec<f64> = times.iter().map(|t| t * p.n).collect();
    let sq = p.n.sqrt();
    let z = run.trials(run.trials, |k| {
        let mut rng = rng_for(run.seed, "variance", k);
        let v = chain_values_at(PlanarPoint::ORIGIN, &abs, &p, ChainLaw::Strip, &mut rng)?;
        Ok(v.into_iter().map(|y| y / sq).collect::<Vec<f64>>())
    })?;
    let col = |i: usize| z.iter().map(|r| r[i]).collect::<Vec<f64>>();
    let (z2, z5, z8) = (col(0), col(1), col(2));
    let s2 = p.sigma2();
    let target = expected.unwrap_or(s2);
    let omega = p.omega_printed();
    let rate = soft("variance_rate", variance_rate(&z2, &z8, 0.2, 0.8, Some((target, 0.05))))?
        .meta("sigma2_derived", s2)
        .meta("omega_printed", omega)
        .meta("omega2_printed", omega * omega);
    let d1: Vec<f64> = z5.iter().zip(&z2).map(|(a, b)| a - b).collect();
    let d2: Vec<f64> = z8.iter().zip(&z5).map(|(a, b)| a - b).collect();
    let rho = correlation(&d1, &d2);
    let se = 1.0 / (d1.len() as f64).sqrt();
    let corr = StatsReport::new("increment_correlation")
        .estimate(rho)
        .stderr(se)
        .stat(rho / se)
        .threshold(3.0)
        .pass((rho / se).abs() <= 3.0);
    let mut csv = Csv::with_header(&["t1", "t2", "estimate", "stderr", "sigma2_derived", "omega2_printed"]);
    csv.row(&[0.2, 0.8, rate.estimate.unwrap_or(f64::NAN), rate.stderr.unwrap_or(f64::NAN), s2, omega * omega]);
    Ok((vec![rate, corr], vec![Table::new("variance.csv", csv)]))
}

fn coaltail(run: &SuiteRun, horizon: Option<f64>) -> Outcome {
    let p = run.params;
    let t0 = p.tau() * p.n;
    let horizon = horizon.unwrap_or(1e4);
    let ms = [1.0, 2.0, 4.0];
    let mut nus = Vec::new();
    for (i, &m) in ms.iter().enumerate() {
        let tag = format!("coaltail-m{i}");
        nus.push(run.trials(run.trials, |k| {
            let mut f = LazyPointField::new(derive(run.seed, &tag, k), IntensityLaw::extended(&p));
            Ok(run_two_paths_shared_field(&mut f, t0, m, horizon, &p, ChainLaw::Extended)?.nu)
        })?);
    }
    let window = (1e2, horizon.min(1e4));
    let boot_seed = derive(run.seed, "coaltail-boot", 0);
    let (slope, curve) = match coalescence_tail_fit(&nus[0], window, -0.5, 0.1, 200, boot_seed) {
        Ok((r, c)) => (r, c),
        Err(e) => (soft("coalescence_tail_slope", Err(e))?, Vec::new()),
    };
    let t_ratio = 1e3f64.min(horizon);
    let mut reports = vec![slope.meta("m", 1.0).meta("t0", t0)];
    for (i, target) in [(1usize, 2.0), (2, 4.0)] {
        let r = soft("survival_ratio", survival_ratio(&nus[0], &nus[i], t_ratio, target, 0.3, 200, boot_seed ^ i as u64))?;
        reports.push(r.meta("m", ms[i]));
    }
    let mut surv = Csv::with_header(&["t", "survival"]);
    let mut plot = Csv::with_header(&["log_t", "log_survival"]);
    for &(t, s) in &curve {
        surv.row(&[t, s]);
        if s > 0.0 {
            plot.row(&[t.ln(), s.ln()]);
        }
    }
    let mut trials = Csv::with_header(&["trial", "m", "t0", "nu"]);
    for (i, v) in nus.iter().enumerate() {
        for (k, &nu) in v.iter().enumerate() {
            trials.row(&[k as f64, ms[i], t0, nu]);
        }
    }
    Ok((
        reports,
        vec![Table::new("coaltail.csv", surv), Table::new("coaltail_plot.csv", plot), Table::new("coaltail_trials.csv", trials)],
    ))
}

/// Start line of the density suites, a quarter of the scale in.
fn density_start(p: &ModelParams) -> Result<f64> {
    if p.tau() < 0.75 {
        return Err(Error::InvalidParams("the density suites need τ ≥ 0.75".into()));
    }
    Ok(0.25 * p.n)
}

fn b1(run: &SuiteRun) -> Outcome {
    let p = run.params;
    let t0 = density_start(&p)?;
    let sq = p.n.sqrt();
    let eps = [0.1, 0.2];
    let ts = [0.25, 0.5];
    let eps_abs: Vec<f64> = eps.iter().map(|e| e * sq).collect();
    let lags: Vec<f64> = ts.iter().map(|t| t * p.n).collect();
    let samples = run.trials(run.trials, |k| {
        let mut f = LazyPointField::new(derive(run.seed, "b1", k), IntensityLaw::transformed(&p));
        extreme_paths(&mut f, t0, 0.0, &eps_abs, &lags, &p, ChainLaw::Strip)
    })?;
    // variance rate fitted from the left extreme path at the longer lag
    let d2: Vec<f64> = samples.iter().map(|s| (s.left_disp[1] / sq).powi(2)).collect();
    let s2_hat = mean(&d2) / ts[1];
    let s2_se = s2_hat * (2.0 / d2.len() as f64).sqrt();
    let mut reports = vec![StatsReport::new("b1_sigma2_fit")
        .estimate(s2_hat)
        .stderr(s2_se)
        .pass(true)
        .meta("sigma2_derived", p.sigma2())];
    let mut csv = Csv::with_header(&["eps", "t", "empirical", "oracle", "stderr"]);
    for (e, &ep) in eps.iter().enumerate() {
        for (l, &t) in ts.iter().enumerate() {
            let split: Vec<bool> = samples.iter().map(|s| s.split[e][l]).collect();
            let r = b1_check(ep, t, &split, s2_hat, s2_se, 3.0)?;
            csv.row(&[ep, t, r.estimate.unwrap_or(f64::NAN), r.meta["oracle"].as_f64().unwrap_or(f64::NAN), r.stderr.unwrap_or(f64::NAN)]);
            reports.push(r);
        }
    }
    Ok((reports, vec![Table::new("b1.csv", csv)]))
}

fn e_density(run: &SuiteRun, window_w: Option<f64>) -> Outcome {
    let p = run.params;
    let s2 = p.sigma2();
    let t0 = density_start(&p)?;
    let sq = p.n.sqrt();
    let ts = [0.25, 0.5];
    let w = window_w.unwrap_or(1.0 + 10.0 * (s2 * ts[1]).sqrt());
    let lags: Vec<f64> = ts.iter().map(|t| t * p.n).collect();
    let snaps = run.trials(run.trials, |k| {
        let mut f = LazyPointField::new(derive(run.seed, "e-density", k), IntensityLaw::transformed(&p));
        touch_positions(&mut f, t0, -w * sq, (1.0 + w) * sq, &lags, &p, ChainLaw::Strip)
    })?;
    let mut reports = Vec::new();
    let mut csv = Csv::with_header(&["t", "mean", "stderr", "bound"]);
    for (l, &t) in ts.iter().enumerate() {
        // a window counts only if it lies strictly inside the outermost survivors
        let counts: Vec<u32> = snaps
            .iter()
            .filter_map(|s| {
                let v = &s.positions[l];
                let inside = v.len() >= 2 && v[0] < 0.0 && v[v.len() - 1] > sq;
                inside.then(|| v.iter().filter(|&&x| x > 0.0 && x < sq).count() as u32)
            })
            .collect();
        let r = soft("e_density", e_density_check(t, 1.0, &counts, s2, 1.1))?.meta("window_w", w);
        csv.row(&[t, r.estimate.unwrap_or(f64::NAN), r.stderr.unwrap_or(f64::NAN), r.meta.get("bound").and_then(|b| b.as_f64()).unwrap_or(f64::NAN)]);
        reports.push(r);
    }

    // touch density on the unscaled strip
    let pt = with_n(&p, (p.n / 10.0).max(1e3))?;
    let t0 = density_start(&pt)?;
    let lags = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    let snaps = run.trials(run.trials, |k| {
        let mut f = LazyPointField::new(derive(run.seed, "touch", k), IntensityLaw::transformed(&pt));
        touch_positions(&mut f, t0, 0.0, 1000.0, &lags, &pt, ChainLaw::Strip)
    })?;
    let counts_for = |l: usize, m: f64| -> Vec<u32> { snaps.iter().flat_map(|s| cell_counts(&s.positions[l], m)).collect() };
    let per_lag: Vec<Vec<u32>> = (0..lags.len()).map(|l| counts_for(l, 4.0)).collect();
    let mut touch = Csv::with_header(&["lag", "density", "stderr"]);
    match touch_density(&lags, &per_lag, 4.0, -0.5, 0.15) {
        Ok((r, rows)) => {
            for (t, d, se) in rows {
                touch.row(&[t, d, se]);
            }
            reports.push(r.meta("n", pt.n).meta("t0", t0));
        }
        Err(e) => reports.push(soft("touch_density_slope", Err(e))?),
    }
    let l10 = lags.iter().position(|&t| t == 10.0).expect("lag 10 present");
    let (m4, se4) = cell_mean(&counts_for(l10, 4.0));
    let (m8, se8) = cell_mean(&counts_for(l10, 8.0));
    let se = (se8 * se8 + 4.0 * se4 * se4).sqrt();
    let z = (m8 - 2.0 * m4) / se;
    reports.push(
        StatsReport::new("touch_additivity")
            .estimate(m8 / m4)
            .stderr(se / m4)
            .stat(z)
            .threshold(2.576)
            .pass(z.abs() <= 2.576)
            .meta("n", pt.n)
            .meta("lag", 10.0)
            .meta("mean_m4", m4)
            .meta("mean_m8", m8),
    );
    Ok((reports, vec![Table::new("e_density.csv", csv), Table::new("touch.csv", touch)]))
}

fn lemma_agreement(run: &SuiteRun) -> Outcome {
    let p = run.params;
    let sums = run.trials(run.trials, |k| {
        let mut f = LazyPointField::new(derive(run.seed, "agreement", k), IntensityLaw::Unit);
        let starts = lambda_n_points(&mut f, &p)?;
        variant_agreement(&mut f, &p, &starts)
    })?;
    let worst = sums.iter().map(|s| s.rate()).fold(1.0, f64::min);
    let (starts, agreeing) = sums.iter().fold((0, 0), |(a, b), s| (a + s.starts, b + s.agreeing));
    let pooled = if starts == 0 { 1.0 } else { agreeing as f64 / starts as f64 };
    let report = StatsReport::new("variant_agreement")
        .estimate(pooled)
        .stat(worst)
        .threshold(0.999)
        .pass(worst >= 0.999)
        .meta("starts", starts)
        .meta("seeds", sums.len() as u64);
    let mut csv = Csv::with_header(&["seed", "starts", "agreeing", "rate"]);
    for (k, s) in sums.iter().enumerate() {
        csv.row(&[k as f64, s.starts as f64, s.agreeing as f64, s.rate()]);
    }
    Ok((vec![report], vec![Table::new("agreement.csv", csv)]))
}

/// Field point of `Λ_n` nearest to `target`, searched in growing boxes.
fn nearest_start(field: &mut LazyPointField, p: &ModelParams, target: PlanarPoint) -> Result<Option<PlanarPoint>> {
    let mut h = 2.0;
    for _ in 0..16 {
        let mut best: Option<(f64, PlanarPoint)> = None;
        field.visit_box([target.x1 - h, target.x1 + h, target.x2 - h, target.x2 + h], |q| {
            if p.in_lambda(q) {
                let d = q.sub(target).norm_sq();
                if best.is_none_or(|(bd, bq)| d < bd || d == bd && (q.x2, q.x1) < (bq.x2, bq.x1)) {
                    best = Some((d, q));
                }
            }
        })?;
        if let Some((_, q)) = best {
            return Ok(Some(q));
        }
        h *= 2.0;
    }
    Ok(None)
}

/// Deterministic start locations spread over `Λ_n`.
fn start_targets(p: &ModelParams, count: u64) -> Vec<PlanarPoint> {
    let golden = 0.618_033_988_749_894_9;
    (0..count)
        .map(|k| {
            let u = (k as f64 + 0.5) / count as f64;
            let r = p.n * (p.alpha + (1.0 - p.alpha) * (0.1 + 0.8 * u));
            let sg = 0.8 * p.start_window() * (2.0 * (k as f64 * golden).fract() - 1.0);
            PlanarPoint::new(r * sg.sin(), -r * sg.cos())
        })
        .collect()
}

fn hausdorff(run: &SuiteRun) -> Outcome {
    let top = run.params;
    let window = MetricWindow::bridge(top.alpha);
    let mut reports = Vec::new();
    let mut csv = Csv::with_header(&["n", "d_h", "max_gap_x", "rate_x", "max_gap_t", "rate_t"]);
    let mut dh = Vec::new();
    for (i, scale) in [100.0, 10.0, 1.0].into_iter().enumerate() {
        let p = with_n(&top, top.n / scale)?;
        let (n, tau) = (p.n, p.tau());
        let mut field = LazyPointField::new(derive(run.seed, "hausdorff", i as u64), IntensityLaw::Unit);
        let mut starts = Vec::new();
        for t in start_targets(&p, run.trials) {
            starts.extend(nearest_start(&mut field, &p, t)?);
        }
        starts.sort_by(|a, b| a.x2.total_cmp(&b.x2).then(a.x1.total_cmp(&b.x1)));
        starts.dedup();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let (mut gx, mut gt) = (0.0f64, 0.0f64);
        for &x in &starts {
            let g = build_gamma_double_prime(x, &mut field, &p)?;
            let pa = g.map(|v| diffusive_rescale(v, n));
            let pb = g.try_map(|v| psi_point(diffusive_rescale(xi_planar(v, n)?, n), tau))?;
            for (u, w) in pa.vertices.iter().zip(&pb.vertices) {
                gx = gx.max((u.x1 - w.x1).abs());
                gt = gt.max((u.x2 - w.x2).abs());
            }
            a.push(pa);
            b.push(pb);
        }
        let d = hausdorff_distance(&a, &b, &window);
        let rx = n.powf(0.5 - 3.0 * p.a_exp) / 6.0;
        let rt = n.powf(-2.0 * p.a_exp) / 2.0;
        reports.push(
            StatsReport::new("map_gap_rates")
                .estimate(gx / rx)
                .stat(gt / rt)
                .threshold(3.0)
                .pass(gx <= 3.0 * rx && gt <= 3.0 * rt && !starts.is_empty())
                .meta("n", n)
                .meta("d_h", d)
                .meta("paths", starts.len() as u64)
                .meta("max_gap_x", gx)
                .meta("max_gap_t", gt),
        );
        csv.row(&[n, d, gx, rx, gt, rt]);
        dh.push(d);
    }
    let decreasing = dh.windows(2).all(|w| w[1] < w[0]);
    reports.push(
        StatsReport::new("hausdorff_decreasing")
            .estimate(dh[dh.len() - 1])
            .pass(decreasing)
            .meta("d_h", dh.clone())
            .meta("n", top.n),
    );
    Ok((reports, vec![Table::new("hausdorff.csv", csv)]))
}

fn lateral(run: &SuiteRun) -> Outcome {
    let p = run.params;
    let sums = run.trials(run.trials, |k| {
        let mut f = LazyPointField::new(derive(run.seed, "lateral", k), IntensityLaw::Unit);
        let starts = lambda_n_points(&mut f, &p)?;
        lateral_excursion(&mut f, &p, &starts)
    })?;
    let failing = sums.iter().filter(|s| s.exceeding > 0).count();
    let rate = failing as f64 / sums.len() as f64;
    let bound = p.n.powf(1.0 - p.a_exp);
    let worst = sums.iter().map(|s| s.max_displacement).fold(0.0, f64::max);
    let report = StatsReport::new("lateral_excursion")
        .estimate(rate)
        .stat(worst / bound)
        .threshold(0.01)
        .pass(rate < 0.01)
        .meta("bound", bound)
        .meta("max_displacement", worst);
    let mut csv = Csv::with_header(&["seed", "starts", "max_displacement", "bound"]);
    for (k, s) in sums.iter().enumerate() {
        csv.row(&[k as f64, s.starts as f64, s.max_displacement, bound]);
    }
    Ok((vec![report], vec![Table::new("lateral.csv", csv)]))
}

/// Vertices of a sampled coalescing bridge web from evenly spaced starts
/// on the line `s = 0`, as `path,x,t` rows.
pub fn bridge_table(p: &ModelParams, seed: u64, paths: usize) -> Result<Table> {
    let starts: Vec<PlanarPoint> = (0..paths).map(|k| PlanarPoint::new(k as f64 - (paths as f64 - 1.0) / 2.0, 0.0)).collect();
    let ens = sample_coalescing_bm(&starts, p.sigma2(), 1e-3, p.tau(), derive(seed, "bridge", 0))?;
    let web: Vec<PathPolyline> = bridge_web(&ens)?;
    let mut csv = Csv::with_header(&["path", "x", "t"]);
    for (k, path) in web.iter().enumerate() {
        for v in &path.vertices {
            csv.row(&[k as f64, v.x1, v.x2]);
        }
    }
    Ok(Table::new("bridge.csv", csv))
}
