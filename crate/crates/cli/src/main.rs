//! `rpw`: sample radial webs, run verification suites and export plot data.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rpw_core::config::RunConfig;
use rpw_core::field::{IntensityLaw, LazyPointField};
use rpw_core::path::{PathPolyline, Provenance, WebEnsemble};
use rpw_core::radial::{build_gamma_double_prime, build_hat_gamma, lambda_n_points};
use rpw_core::seeds::derive;
use rpw_core::transform::{diffusive_rescale, psi_point, xi_planar};
use rpw_core::verify::{bridge_table, Suite, SuiteOutput, Table};
use rpw_core::{Error, ModelParams};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "rpw", version, about = "Radial Poissonian web simulator and verification toolkit")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    /// Worker threads for trial loops; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Flags that take precedence over the JSON config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    n: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    a_exp: Option<f64>,
    #[arg(long, global = true)]
    b_exp: Option<f64>,
    /// Master seed; falls back to the config file, then to RPW_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    output_dir: Option<String>,
    #[arg(long, global = true)]
    suite_n: Option<f64>,
    #[arg(long, global = true)]
    suite_trials: Option<u64>,
    #[arg(long, global = true)]
    expected_sigma2: Option<f64>,
    #[arg(long, global = true)]
    window_w: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write path ensembles as JSONL plus a manifest of derived constants.
    SampleWeb,
    /// Run a verification suite, or `all`.
    Verify {
        #[arg(long)]
        suite: Option<String>,
    },
    /// Write plot-ready CSV.
    ExportPlotdata {
        #[arg(value_enum)]
        which: Plot,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Plot {
    Lln,
    Coaltail,
    Bridge,
}

enum Failure {
    Config(Error),
    Fault(Error),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Fault(e.into())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Fault(e)
    }
}

fn resolve(o: &Overrides, suite: Option<&str>) -> Result<RunConfig, Error> {
    let (mut c, file_has_seed) = match &o.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            (RunConfig::from_json(&text)?, v.get("seed").is_some())
        }
        None => (RunConfig::default(), false),
    };
    macro_rules! take {
        ($($f:ident),*) => { $(if let Some(v) = &o.$f { c.$f = v.clone(); })* };
    }
    take!(theta, n, alpha, a_exp, b_exp, trials, output_dir);
    macro_rules! take_opt {
        ($($f:ident),*) => { $(if o.$f.is_some() { c.$f = o.$f; })* };
    }
    take_opt!(horizon, suite_n, suite_trials, expected_sigma2, window_w);
    match o.seed {
        Some(s) => c.seed = s,
        None if !file_has_seed => {
            if let Ok(s) = std::env::var("RPW_SEED") {
                c.seed = s.trim().parse().map_err(|_| Error::InvalidParams(format!("RPW_SEED '{s}' is not an integer")))?;
            }
        }
        None => {}
    }
    if let Some(s) = suite {
        c.suite = s.to_string();
    }
    c.validate()?;
    Ok(c)
}

fn write(dir: &Path, name: &str, text: &str) -> std::io::Result<()> {
    fs::write(dir.join(name), text)
}

fn write_tables(dir: &Path, tables: &[Table]) -> std::io::Result<()> {
    tables.iter().try_for_each(|t| write(dir, &t.name, &t.csv))
}

fn manifest(c: &RunConfig, p: &ModelParams, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "config": c,
        "derived": {
            "c": p.c(),
            "tau": p.tau(),
            "c_hat": p.c_hat(),
            "sigma2": p.sigma2(),
            "omega_printed": p.omega_printed(),
            "omega2_printed": p.omega_printed().powi(2),
            "a_n": p.a_n(),
            "c_n_0": p.c_n(0.0),
            "l_n_0": p.l_n(0.0),
            "log_n": p.log_n(),
            "inner_radius": p.inner_radius(),
            "start_window": p.start_window(),
            "angle_window": p.angle_window(),
        },
        "run": extra,
    })
}

struct Sink {
    w: BufWriter<File>,
    ens: WebEnsemble,
}

impl Sink {
    fn new(dir: &Path, name: &str, p: &ModelParams, prov: Provenance, seed: u64) -> std::io::Result<Self> {
        Ok(Self { w: BufWriter::new(File::create(dir.join(name))?), ens: WebEnsemble::new(*p, prov, seed) })
    }

    fn put(&mut self, path: PathPolyline) -> Result<(), Error> {
        self.ens.paths.push(path);
        self.ens.write_jsonl(&mut self.w)?;
        self.ens.paths.clear();
        Ok(())
    }
}

/// Evenly spaced subsample of at most `k` items, in order.
fn subsample<T: Copy>(v: &[T], k: usize) -> Vec<T> {
    if k >= v.len() {
        return v.to_vec();
    }
    (0..k).map(|i| v[i * v.len() / k]).collect()
}

fn sample_web(c: &RunConfig, dir: &Path) -> Result<(), Failure> {
    let p = c.params().map_err(Failure::Config)?;
    let (n, tau) = (p.n, p.tau());
    let seed = derive(c.seed, "web", 0);
    let mut field = LazyPointField::new(seed, IntensityLaw::Unit);
    let all = lambda_n_points(&mut field, &p)?;
    let starts = subsample(&all, c.trials.min(usize::MAX as u64) as usize);
    let mut files = Vec::new();
    if !starts.is_empty() {
        let kinds = [
            ("gamma.jsonl", Provenance::GammaDoublePrime),
            ("hat_gamma.jsonl", Provenance::HatGamma),
            ("transformed.jsonl", Provenance::Transformed),
            ("rescaled.jsonl", Provenance::Rescaled),
            ("bridge.jsonl", Provenance::Bridge),
        ];
        let mut sinks = kinds.iter().map(|(f, k)| Sink::new(dir, f, &p, *k, seed)).collect::<std::io::Result<Vec<_>>>()?;
        for &x in &starts {
            sinks[0].put(build_gamma_double_prime(x, &mut field, &p)?)?;
            let hat = build_hat_gamma(x, &mut field, &p)?.path;
            let tr = hat.try_map(|v| xi_planar(v, n))?;
            let re = tr.map(|v| diffusive_rescale(v, n));
            let br = re.try_map(|v| psi_point(v, tau))?;
            for (s, path) in sinks[1..].iter_mut().zip([hat, tr, re, br]) {
                s.put(path)?;
            }
        }
        for s in &mut sinks {
            s.w.flush()?;
        }
        files = kinds.iter().map(|(f, _)| *f).collect();
    }
    let m = manifest(c, &p, json!({
        "field_seed": seed,
        "lambda_n_points": all.len(),
        "paths_written": starts.len(),
        "files": files,
    }));
    write(dir, "manifest.json", &(serde_json::to_string_pretty(&m).map_err(Error::from)? + "\n"))?;
    println!("wrote {} paths per ensemble ({} points in the start region) to {}", starts.len(), all.len(), dir.display());
    Ok(())
}

/// Runs the selected suites; `Ok(true)` when every verdict passes.
fn verify(c: &RunConfig, dir: &Path) -> Result<bool, Failure> {
    let suites = c.suites().map_err(Failure::Config)?;
    let sc = c.suite_config().map_err(Failure::Config)?;
    let mut all_pass = true;
    let mut summary = Vec::new();
    for s in suites {
        let out: SuiteOutput = s.run(&sc).map_err(|e| match e {
            Error::InvalidParams(_) => Failure::Config(e),
            other => Failure::Fault(other),
        })?;
        write(dir, &format!("{s}.json"), &out.reports_json()?)?;
        write_tables(dir, &out.tables)?;
        for r in &out.reports {
            println!("[{s}] {}", r.summary());
        }
        all_pass &= out.passed();
        summary.push(json!({ "suite": s, "pass": out.passed() }));
    }
    let p = c.params().map_err(Failure::Config)?;
    let m = manifest(c, &p, json!({ "suites": summary }));
    write(dir, "verify_manifest.json", &(serde_json::to_string_pretty(&m).map_err(Error::from)? + "\n"))?;
    Ok(all_pass)
}

fn export(c: &RunConfig, which: Plot, dir: &Path) -> Result<(), Failure> {
    let sc = c.suite_config().map_err(Failure::Config)?;
    let (table, name) = match which {
        Plot::Lln => (Suite::Lln.run(&sc)?.table("lln_curve.csv").cloned(), "plot_lln.csv"),
        Plot::Coaltail => (Suite::Coaltail.run(&sc)?.table("coaltail_plot.csv").cloned(), "plot_coaltail.csv"),
        Plot::Bridge => (Some(bridge_table(&c.params().map_err(Failure::Config)?, c.seed, 9)?), "plot_bridge.csv"),
    };
    let t = table.ok_or_else(|| Failure::Fault(Error::Fault("suite produced no plot table".into())))?;
    write(dir, name, &t.csv)?;
    println!("wrote {}", dir.join(name).display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let suite = match &cli.command {
        Command::Verify { suite } => suite.as_deref(),
        _ => None,
    };
    let c = resolve(&cli.overrides, suite).map_err(Failure::Config)?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Failure::Config(Error::InvalidParams("--jobs must be positive".into())));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Fault(Error::Fault(e.to_string())))?;
    }
    let dir = PathBuf::from(&c.output_dir);
    fs::create_dir_all(&dir)?;
    match cli.command {
        Command::SampleWeb => sample_web(&c, &dir).map(|_| ExitCode::SUCCESS),
        Command::Verify { .. } => verify(&c, &dir).map(|ok| if ok { ExitCode::SUCCESS } else { ExitCode::from(1) }),
        Command::ExportPlotdata { which } => export(&c, which, &dir).map(|_| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            eprintln!("rpw: configuration error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Fault(e)) => {
            eprintln!("rpw: internal fault: {e}");
            ExitCode::from(3)
        }
    }
}
