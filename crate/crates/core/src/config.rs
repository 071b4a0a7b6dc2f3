//! Run configuration shared by the command-line driver and the suites.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ModelParams;
use crate::verify::{Suite, SuiteConfig};

/// Everything that determines a run. Unknown keys are rejected so that a
/// misspelt override cannot be silently ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub theta: f64,
    pub n: f64,
    pub alpha: f64,
    pub a_exp: f64,
    pub b_exp: f64,
    pub seed: u64,
    /// Number of paths written by `sample-web`; zero writes the manifest only.
    pub trials: u64,
    /// Horizon override for the coalescence pairs, in strip time.
    pub horizon: Option<f64>,
    pub output_dir: String,
    pub suite: String,
    /// Scale override applied to every suite in place of its own default.
    pub suite_n: Option<f64>,
    /// Trial-count override applied to every suite.
    pub suite_trials: Option<u64>,
    /// Variance rate the diffusion suite compares against.
    pub expected_sigma2: Option<f64>,
    /// Extra half-width, in units of `√n`, of the start window for the
    /// density counts.
    pub window_w: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_4,
            n: 1e4,
            alpha: 0.5,
            a_exp: 0.3,
            b_exp: 0.45,
            seed: 1,
            trials: 10_000,
            horizon: None,
            output_dir: "out".into(),
            suite: "all".into(),
            suite_n: None,
            suite_trials: None,
            expected_sigma2: None,
            window_w: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.theta, self.n, self.alpha, self.a_exp, self.b_exp)
    }

    pub fn suites(&self) -> Result<Vec<Suite>> {
        Suite::parse_selection(&self.suite)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.suites()?;
        let positive = |v: Option<f64>, what: &str| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::InvalidParams(format!("{what} must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive(self.horizon, "horizon")?;
        positive(self.suite_n, "suite_n")?;
        positive(self.expected_sigma2, "expected_sigma2")?;
        positive(self.window_w, "window_w")?;
        if self.suite_trials == Some(0) {
            return Err(Error::InvalidParams("suite_trials must be positive".into()));
        }
        if let Some(n) = self.suite_n {
            ModelParams::new(self.theta, n, self.alpha, self.a_exp, self.b_exp)?;
        }
        if self.output_dir.is_empty() {
            return Err(Error::InvalidParams("output_dir is empty".into()));
        }
        Ok(())
    }

    /// Settings handed to the verification suites.
    pub fn suite_config(&self) -> Result<SuiteConfig> {
        Ok(SuiteConfig {
            base: self.params()?,
            seed: self.seed,
            n: self.suite_n,
            trials: self.suite_trials,
            horizon: self.horizon,
            expected_sigma2: self.expected_sigma2,
            window_w: self.window_w,
        })
    }
}
