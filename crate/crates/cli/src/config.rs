use std::path::{Path, PathBuf};

use limitval::limit_value::MIN_SWEEP_ROWS;
use limitval::{geometric_grid, FitConfig, SolveMethod, SweepOptions};
use serde::{Deserialize, Serialize};

/// Geometric grid `start, start·ratio, …` with `count` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: 0.5,
            ratio: 0.5,
            count: 24,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, String> {
        geometric_grid(self.start, self.ratio, self.count).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub slope_tol: f64,
    pub r2_min: f64,
    pub min_points: usize,
    pub min_decades: f64,
    pub window_fraction: f64,
    pub extrapolation_depth: usize,
    /// Cap on the log-space residual of the coefficient fit.
    pub residual_cap: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            slope_tol: f.slope_tol,
            r2_min: f.r2_min,
            min_points: f.min_points,
            min_decades: f.min_decades,
            window_fraction: f.window_fraction,
            extrapolation_depth: f.extrapolation_depth,
            residual_cap: limitval::canonical::RESIDUAL_CAP,
        }
    }
}

impl FitSection {
    pub fn estimator(&self) -> FitConfig {
        FitConfig {
            slope_tol: self.slope_tol,
            r2_min: self.r2_min,
            min_points: self.min_points,
            min_decades: self.min_decades,
            window_fraction: self.window_fraction,
            extrapolation_depth: self.extrapolation_depth,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Everything a run depends on besides the game file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tolerance: f64,
    pub method: SolveMethod,
    pub warm_start: bool,
    pub jobs: Option<usize>,
    pub seed: u64,
    pub epsilon: f64,
    pub oscillation_threshold: f64,
    /// Tolerance of the behavioral certificate.
    pub behavioral_tolerance: f64,
    pub grid: GridSpec,
    /// Grid of the optimality check; the sweep grid when absent.
    pub check_grid: Option<GridSpec>,
    pub fit: FitSection,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            method: SolveMethod::default(),
            warm_start: false,
            jobs: None,
            seed: 0,
            epsilon: 0.05,
            oscillation_threshold: limitval::limit_value::DEFAULT_OSCILLATION_THRESHOLD,
            behavioral_tolerance: 1e-3,
            grid: GridSpec::default(),
            check_grid: None,
            fit: FitSection::default(),
            output: OutputPaths::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite (got {v})"))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        positive("tolerance", self.tolerance)?;
        positive("epsilon", self.epsilon)?;
        positive("oscillation_threshold", self.oscillation_threshold)?;
        positive("behavioral_tolerance", self.behavioral_tolerance)?;
        positive("fit.residual_cap", self.fit.residual_cap)?;
        self.fit.estimator().validate().map_err(|e| format!("fit: {e}"))?;
        if self.jobs == Some(0) {
            return Err("jobs must be at least 1".into());
        }
        for (name, grid) in [("grid", Some(&self.grid)), ("check_grid", self.check_grid.as_ref())] {
            let Some(grid) = grid else { continue };
            grid.points().map_err(|e| format!("{name}: {e}"))?;
            if grid.count < MIN_SWEEP_ROWS {
                return Err(format!(
                    "{name}: {} points give too few rows (at least {MIN_SWEEP_ROWS} needed)",
                    grid.count
                ));
            }
        }
        Ok(())
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            tol: self.tolerance,
            method: self.method,
            jobs: self.jobs,
            warm_start: self.warm_start,
        }
    }

    pub fn check_points(&self) -> Result<Vec<f64>, String> {
        self.check_grid.as_ref().unwrap_or(&self.grid).points()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_parse_from_empty() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.grid.points().unwrap().len(), 24);
    }

    #[test]
    fn rejects_bad_settings() {
        let parse = |s: &str| toml::from_str::<RunConfig>(s).unwrap().validate();
        assert!(parse("epsilon = 0.0").unwrap_err().contains("epsilon"));
        assert!(parse("[fit]\nslope_tol = -1.0").unwrap_err().contains("slope_tol"));
        assert!(parse("[grid]\ncount = 2").unwrap_err().contains("too few rows"));
        assert!(toml::from_str::<RunConfig>("unknown = 1").is_err());
    }
}
