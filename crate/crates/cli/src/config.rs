use std::path::Path;
use std::time::Duration;

use physcorrect_core::control::ControllerGains;
use physcorrect_core::correction::{CorrectionConfig, DivergencePolicy};
use physcorrect_core::dynamics::PhysicsParams;
use physcorrect_core::metrics::MetricParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Foot height below which a foot counts as in contact (m).
    pub h_thresh: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            h_thresh: MetricParams::default().h_thresh,
        }
    }
}

/// Run configuration read from TOML or JSON; flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub loop_n: usize,
    pub substeps: usize,
    pub fps: Option<f64>,
    pub pen_tol: f64,
    pub solver_iterations: usize,
    pub friction: f64,
    pub ground_height: f64,
    pub divergence: DivergencePolicy,
    /// Solver wall-clock budget per frame; 0 disables the guard.
    pub frame_budget_ms: f64,
    pub diagnostics: bool,
    pub seed: u64,
    pub gains: ControllerGains,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = CorrectionConfig::default();
        RunConfig {
            loop_n: c.loop_n,
            substeps: c.substeps,
            fps: c.fps,
            pen_tol: c.physics.pen_tol,
            solver_iterations: c.physics.solver_iterations,
            friction: c.physics.friction,
            ground_height: c.ground_height,
            divergence: c.divergence,
            frame_budget_ms: c.frame_budget.map_or(0.0, |d| d.as_secs_f64() * 1e3),
            diagnostics: c.diagnostics,
            seed: 0,
            gains: c.gains,
            metrics: MetricsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|msg| CliError::Config {
            path: path.display().to_string(),
            msg,
        })
    }

    pub fn correction(&self) -> Result<CorrectionConfig, CliError> {
        if !(self.frame_budget_ms.is_finite() && self.frame_budget_ms >= 0.0) {
            return Err(CliError::Usage(
                "frame_budget_ms must be non-negative".into(),
            ));
        }
        let physics = PhysicsParams {
            pen_tol: self.pen_tol,
            solver_iterations: self.solver_iterations,
            friction: self.friction,
            ..PhysicsParams::default()
        };
        let config = CorrectionConfig {
            loop_n: self.loop_n,
            substeps: self.substeps,
            fps: self.fps,
            gains: self.gains.clone(),
            physics,
            ground_height: self.ground_height,
            diagnostics: self.diagnostics,
            divergence: self.divergence,
            frame_budget: (self.frame_budget_ms > 0.0)
                .then(|| Duration::from_secs_f64(self.frame_budget_ms / 1e3)),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn metric_params(&self) -> Result<MetricParams, CliError> {
        if !(self.metrics.h_thresh.is_finite() && self.metrics.h_thresh >= 0.0) {
            return Err(CliError::Usage(
                "metrics.h_thresh must be non-negative".into(),
            ));
        }
        Ok(MetricParams {
            h_thresh: self.metrics.h_thresh,
            ground_height: self.ground_height,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.loop_n, 2);
        assert_eq!(cfg.frame_budget_ms, 200.0);
        assert!(cfg.correction().is_ok());
    }

    #[test]
    fn toml_overrides_and_rejects_unknown() {
        let cfg: RunConfig = toml::from_str(
            "loop_n = 4\ndivergence = \"reset-to-reference\"\n[gains]\nkp = [100.0, 50.0, 10.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.loop_n, 4);
        assert_eq!(cfg.divergence, DivergencePolicy::ResetToReference);
        assert_eq!(cfg.gains.kp, [100.0, 50.0, 10.0]);
        assert_eq!(cfg.gains.root_kp, ControllerGains::default().root_kp);
        assert!(toml::from_str::<RunConfig>("loop_m = 4\n").is_err());
    }

    #[test]
    fn out_of_range_is_rejected() {
        let cfg = RunConfig {
            loop_n: 0,
            ..RunConfig::default()
        };
        assert!(cfg.correction().is_err());
    }
}
