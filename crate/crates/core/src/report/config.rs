use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::data::{BlockKey, Country, PipelineConfig};
use crate::dfm::{BlockStructure, EmConfig};
use crate::stress::{scenario_from_name, COVARIANCE_SOURCES, DEFAULT_ALPHA, DEFAULT_DELTA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Long-format series CSV, or a directory of such files.
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorCounts {
    pub global_f: usize,
    pub global_m: usize,
    pub local_f: usize,
    pub local_m: usize,
}

impl Default for FactorCounts {
    fn default() -> Self {
        Self { global_f: 1, global_m: 1, local_f: 1, local_m: 2 }
    }
}

impl FactorCounts {
    pub fn structure(&self, series_blocks: Vec<BlockKey>) -> BlockStructure {
        BlockStructure::uniform(series_blocks, self.global_f, self.global_m, self.local_f, self.local_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsamplingSettings {
    pub enabled: bool,
    pub replications: usize,
    pub seed: u64,
    pub fraction_override: Option<f64>,
}

impl Default for SubsamplingSettings {
    fn default() -> Self {
        Self { enabled: true, replications: 199, seed: 0, fraction_override: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QrSettings {
    pub horizon: usize,
    /// Levels of the coefficient grid; defaults to 0.05, 0.10, ..., 0.95.
    pub taus: Option<Vec<f64>>,
}

impl Default for QrSettings {
    fn default() -> Self {
        Self { horizon: 1, taus: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StressSettings {
    pub alpha: f64,
    pub delta: u32,
    /// `joint`, `macro_only`, `univariate` (one per factor) or `univariate:<k>`.
    pub scenarios: Vec<String>,
    /// Contour covariance source.
    pub covariance: String,
}

impl Default for StressSettings {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            delta: DEFAULT_DELTA,
            scenarios: vec!["joint".into(), "macro_only".into(), "univariate".into()],
            covariance: "subsampled".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub factors: FactorCounts,
    #[serde(default)]
    pub em: EmConfig,
    #[serde(default)]
    pub subsampling: SubsamplingSettings,
    #[serde(default)]
    pub qr: QrSettings,
    #[serde(default)]
    pub stress: StressSettings,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Parse TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ReportError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ReportError::Config(e.to_string()))?;
        if cfg.data.path.is_relative() {
            cfg.data.path = base.join(&cfg.data.path);
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if !self.data.path.exists() {
            return Err(ReportError::Config(format!("data path {} does not exist", self.data.path.display())));
        }
        let f = self.factors;
        if f.global_f == 0 || f.global_m == 0 || f.local_f == 0 || f.local_m == 0 {
            return Err(ReportError::Config("factor counts must be positive".into()));
        }
        if self.em.max_iter == 0 || !(self.em.tol > 0.0) {
            return Err(ReportError::Config("EM needs max_iter >= 1 and a positive tolerance".into()));
        }
        if self.subsampling.enabled && self.subsampling.replications < 2 {
            return Err(ReportError::Config("subsampling needs at least 2 replications".into()));
        }
        if let Some(p) = self.subsampling.fraction_override {
            if !(p > 0.0 && p < 1.0) {
                return Err(ReportError::Config(format!("subsample fraction {p} outside (0, 1)")));
            }
        }
        if self.qr.horizon == 0 {
            return Err(ReportError::Config("forecast horizon must be at least 1".into()));
        }
        if let Some(t) = &self.qr.taus {
            if t.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(ReportError::Config("quantile levels must lie in (0, 1)".into()));
            }
        }
        let s = &self.stress;
        if !(s.alpha > 0.5 && s.alpha < 1.0) {
            return Err(ReportError::Config(format!("stress alpha {} outside (0.5, 1)", s.alpha)));
        }
        if s.delta < 1 {
            return Err(ReportError::Config("mesh granularity delta must be at least 1".into()));
        }
        if !COVARIANCE_SOURCES.contains(&s.covariance.as_str()) {
            return Err(ReportError::Config(format!(
                "unknown covariance source {:?}; expected one of {}",
                s.covariance,
                COVARIANCE_SOURCES.join(", ")
            )));
        }
        let dim = f.global_f + f.global_m + f.local_f + f.local_m;
        for name in &s.scenarios {
            if name != "univariate" {
                scenario_from_name(name, dim).map_err(|e| ReportError::Config(e.to_string()))?;
            }
        }
        for c in Country::ALL {
            if !self.pipeline.gdp_series.contains_key(&c) {
                return Err(ReportError::Config(format!("no GDP series configured for {c}")));
            }
        }
        Ok(())
    }

    /// Scenario names with `univariate` expanded to one entry per factor.
    pub fn scenario_names(&self, dim: usize) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.stress.scenarios {
            if s == "univariate" {
                out.extend((0..dim).map(|k| format!("univariate:{k}")));
            } else if !out.contains(s) {
                out.push(s.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
output = "results"
[data]
path = "series.csv"
[pipeline.gdp_series]
DE = "GDP_DE"
ES = "GDP_ES"
FR = "GDP_FR"
IT = "GDP_IT"
"#;

    #[test]
    fn defaults_and_path_resolution() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("series.csv"), "").unwrap();
        let cfg = RunConfig::from_toml(MINIMAL, dir.path()).unwrap();
        assert_eq!(cfg.data.path, dir.path().join("series.csv"));
        assert_eq!(cfg.output, dir.path().join("results"));
        assert_eq!(cfg.em.tol, 1e-3);
        assert_eq!(cfg.stress.alpha, 0.95);
        assert_eq!(cfg.stress.delta, 8);
        assert_eq!(cfg.subsampling.replications, 199);
        cfg.validate().unwrap();
        assert_eq!(cfg.scenario_names(5).len(), 7);
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let base = RunConfig::from_toml(MINIMAL, dir.path()).unwrap();
        assert!(matches!(base.validate(), Err(ReportError::Config(m)) if m.contains("series.csv")));
        std::fs::write(dir.path().join("series.csv"), "").unwrap();
        let mut c = base.clone();
        c.stress.alpha = 0.4;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.stress.delta = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.factors.local_m = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.stress.scenarios = vec!["sideways".into()];
        assert!(c.validate().is_err());
        assert!(RunConfig::from_toml("[data]\npath = 1", dir.path()).is_err());
        assert!(RunConfig::from_toml("bogus = 1\n[data]\npath = \"x\"", dir.path()).is_err());
    }
}
