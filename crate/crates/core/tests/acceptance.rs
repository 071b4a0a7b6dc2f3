//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Each criterion runs its suite at full scale from a fixed master seed and
//! must pass every verdict within its runtime budget. Determinism reruns
//! every suite twice at reduced scale and compares the serialized outputs.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rpw_core::verify::{Suite, SuiteConfig, SuiteOutput};
use rpw_core::ModelParams;

const SEED: u64 = 20_240_601;

struct Criterion {
    id: u32,
    title: &'static str,
    suite: Suite,
    budget: Duration,
}

fn base() -> ModelParams {
    ModelParams::with_n(1e4).expect("default parameters are valid")
}

fn line(id: u32, title: &str, pass: bool, elapsed: Duration, detail: &str) {
    println!(
        "criterion {id:>2} [{}] {title} ({:.1}s){}{detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        if detail.is_empty() { "" } else { ": " }
    );
}

fn describe(out: &SuiteOutput) -> String {
    out.reports
        .iter()
        .map(|r| {
            let est = r.estimate.map_or("-".into(), |v| format!("{v:.4}"));
            format!("{}={}{}", r.name, est, if r.pass { "" } else { "(fail)" })
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn run_criterion(c: &Criterion) -> bool {
    let cfg = SuiteConfig::new(base(), SEED);
    let t = Instant::now();
    let res = c.suite.run(&cfg);
    let el = t.elapsed();
    match res {
        Ok(out) => {
            let within = el <= c.budget;
            let mut detail = describe(&out);
            if !within {
                detail.push_str(&format!(" [over budget {:.0}s]", c.budget.as_secs_f64()));
            }
            let pass = out.passed() && within;
            line(c.id, c.title, pass, el, &detail);
            pass
        }
        Err(e) => {
            line(c.id, c.title, false, el, &format!("error: {e}"));
            false
        }
    }
}

/// Negative control for criterion 4: a deliberately wrong variance rate
/// must be rejected.
fn negative_control() -> bool {
    let mut cfg = SuiteConfig::new(base(), SEED);
    cfg.expected_sigma2 = Some(base().omega_printed().powi(2));
    let t = Instant::now();
    let ok = Suite::Variance.run(&cfg).map(|o| !o.reports[0].pass).unwrap_or(false);
    line(4, "variance rate rejects the printed ω² (negative control)", ok, t.elapsed(), "");
    ok
}

fn determinism() -> bool {
    let t = Instant::now();
    let mut bad = Vec::new();
    for s in Suite::ALL {
        let mut cfg = SuiteConfig::new(base(), SEED);
        cfg.n = Some(if s == Suite::Hausdorff { 1e4 } else { 1e3 });
        cfg.trials = Some(30);
        let run = || s.run(&cfg).and_then(|o| Ok((o.reports_json()?, o.tables)));
        match (run(), run()) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => bad.push(s.name()),
        }
    }
    let detail = if bad.is_empty() { "all suites byte-identical".to_string() } else { format!("differs: {}", bad.join(", ")) };
    line(10, "determinism of JSON and CSV outputs", bad.is_empty(), t.elapsed(), &detail);
    bad.is_empty()
}

fn main() -> ExitCode {
    let mins = |m: u64| Duration::from_secs(60 * m);
    let criteria = [
        Criterion { id: 1, title: "transformed intensity chi-square, p > 0.01", suite: Suite::Intensity, budget: Duration::from_secs(10) },
        Criterion { id: 2, title: "increment law KS on T and X, p > 0.01", suite: Suite::Increments, budget: mins(1) },
        Criterion { id: 3, title: "LLN 95th percentile sup deviation < 0.05", suite: Suite::Lln, budget: mins(2) },
        Criterion { id: 4, title: "variance rate c/(3ĉ) within 5%, normality p > 0.01", suite: Suite::Variance, budget: mins(5) },
        Criterion { id: 5, title: "coalescence tail slope -0.5 ± 0.1, m-ratio 2 ± 30%", suite: Suite::Coaltail, budget: mins(10) },
        Criterion { id: 6, title: "B1 non-coalescence within 3 SE", suite: Suite::B1, budget: mins(10) },
        Criterion { id: 7, title: "E density ≤ 1.1 bound, touch slope -0.5 ± 0.15", suite: Suite::EDensity, budget: mins(10) },
        Criterion { id: 8, title: "variant agreement ≥ 0.999 on 10 seeds", suite: Suite::LemmaAgreement, budget: mins(2) },
        Criterion { id: 9, title: "d_H decreasing, gaps within 3× rates", suite: Suite::Hausdorff, budget: mins(5) },
    ];
    let mut all = true;
    for c in &criteria {
        all &= run_criterion(c);
        if c.id == 4 {
            all &= negative_control();
        }
    }
    all &= determinism();
    println!("acceptance: {}", if all { "PASS" } else { "FAIL" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
