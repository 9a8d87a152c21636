//! JSON experiment configuration shared by the command-line subcommands.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::Slack;
use crate::corpus::FunctionSpec;
use crate::envelope::{EnvelopeConfig, StallTolerance};
use crate::error::{MshError, Result};
use crate::grid::{build_domain, sample_function, DomainSpec, GridDomain, GridFunction, SetSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub stall: StallTolerance,
    #[serde(default)]
    pub slack: Slack,
    #[serde(default)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_case_id")]
    pub case_id: String,
    pub n: usize,
    pub m: usize,
    /// Hessian order for `hessian` and mixed checks; defaults to `m`.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_domain")]
    pub domain: DomainSpec,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Refinement ladder for studies (polarity, calibration).
    #[serde(default)]
    pub resolutions: Vec<usize>,
    /// Coarser resolution used to calibrate noise allowances.
    #[serde(default)]
    pub calibration_resolution: Option<usize>,
    #[serde(default)]
    pub function: Option<FunctionSpec>,
    /// Second function of a comparison.
    #[serde(default)]
    pub other: Option<FunctionSpec>,
    /// Inputs of mixed checks.
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    /// Obstacle or capacity set.
    #[serde(default)]
    pub set: Option<SetSpec>,
    /// Named corpus members to run.
    #[serde(default)]
    pub corpus: Vec<String>,
    /// Number of seeded random cases to add.
    #[serde(default)]
    pub random_cases: usize,
    /// Radius parameter of the integral estimate (a bound on `|z|²`) or of
    /// the compact in convergence checks.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Mollification radii in units of `h`, strictly decreasing.
    #[serde(default)]
    pub deltas_h: Vec<f64>,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    /// CSV file (relative to the output directory) receiving capacity rows.
    #[serde(default)]
    pub csv: Option<String>,
}

fn default_case_id() -> String {
    "case".to_string()
}

fn default_domain() -> DomainSpec {
    DomainSpec::Ball { radius: 1.0 }
}

fn default_resolution() -> usize {
    17
}

impl ExperimentConfig {
    pub fn new(n: usize, m: usize) -> Self {
        ExperimentConfig {
            case_id: default_case_id(),
            n,
            m,
            k: None,
            domain: default_domain(),
            resolution: default_resolution(),
            resolutions: Vec::new(),
            calibration_resolution: None,
            function: None,
            other: None,
            functions: Vec::new(),
            set: None,
            corpus: Vec::new(),
            random_cases: 0,
            radius: None,
            deltas_h: Vec::new(),
            warm_start: false,
            tolerances: Tolerances::default(),
            seed: 0,
            csv: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| MshError::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MshError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn order_k(&self) -> usize {
        self.k.unwrap_or(self.m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(MshError::Dimension(self.n));
        }
        if self.m == 0 || self.m > self.n {
            return Err(MshError::Order { order: self.m, lo: 1, hi: self.n });
        }
        if let Some(k) = self.k {
            if k > self.n {
                return Err(MshError::Order { order: k, lo: 0, hi: self.n });
            }
        }
        for &res in std::iter::once(&self.resolution).chain(&self.resolutions).chain(&self.calibration_resolution) {
            if res < 9 {
                return Err(MshError::Resolution(res));
            }
        }
        for f in self.function.iter().chain(&self.other).chain(&self.functions) {
            f.validate(self.n)?;
        }
        for id in &self.corpus {
            FunctionSpec::corpus(id).validate(self.n)?;
        }
        if self.deltas_h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(MshError::Precondition("deltas_h must be strictly decreasing".into()));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(MshError::Precondition(format!("radius {r}")));
            }
        }
        self.envelope().validate(self.n)
    }

    pub fn envelope(&self) -> EnvelopeConfig {
        let mut cfg = EnvelopeConfig::new(self.m).with_tol(self.tolerances.stall).with_warm_start(self.warm_start);
        if let Some(it) = self.tolerances.max_iters {
            cfg = cfg.with_max_iters(it);
        }
        cfg
    }

    pub fn domain_at(&self, resolution: usize) -> Result<Arc<GridDomain>> {
        Ok(Arc::new(build_domain(&self.domain, self.n, resolution)?))
    }

    /// The configured `function` sampled on `dom`.
    pub fn sample(&self, dom: &Arc<GridDomain>) -> Result<GridFunction> {
        let f = self.function.as_ref().ok_or(MshError::Empty("function"))?;
        sample_spec(f, dom)
    }

    /// Coarse and fine resolutions for noise calibration.
    pub fn calibration_pair(&self) -> (usize, usize) {
        let coarse = self.calibration_resolution.unwrap_or_else(|| (self.resolution - 1) / 2 + 1).max(9);
        (coarse, self.resolution)
    }
}

pub fn sample_spec(f: &FunctionSpec, dom: &Arc<GridDomain>) -> Result<GridFunction> {
    f.validate(dom.n())?;
    sample_function(|x| f.eval(x), dom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"n": 2, "m": 2}"#).unwrap();
        assert_eq!(cfg.domain, DomainSpec::Ball { radius: 1.0 });
        assert_eq!(cfg.resolution, 17);
        assert_eq!(cfg.order_k(), 2);
        assert_eq!(cfg.calibration_pair(), (9, 17));
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"{
            "case_id": "ball",
            "n": 2, "m": 1, "k": 2,
            "domain": {"shape": "box", "lo": -1.0, "hi": 1.0},
            "resolution": 21,
            "function": {"kind": "corpus", "id": "norm2"},
            "set": {"set": "ball", "center": [0, 0, 0, 0], "radius": 0.5},
            "tolerances": {"stall": {"absolute": 1e-10}, "slack": "default"},
            "csv": "rows.csv"
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.envelope().tol, StallTolerance::Absolute(1e-10));
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn schema_violations_are_rejected() {
        for bad in [
            r#"{"n": 2, "m": 3}"#,
            r#"{"n": 4, "m": 1}"#,
            r#"{"n": 2, "m": 1, "resolution": 5}"#,
            r#"{"n": 2, "m": 1, "bogus": true}"#,
            r#"{"n": 2, "m": 1, "deltas_h": [2, 4]}"#,
            r#"{"n": 1, "m": 1, "function": {"kind": "corpus", "id": "norm2"}}"#,
            r#"{"n": 2}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
        }
    }
}
