//! Experiment configuration: one TOML file with `model`, `grid`, `solver` and
//! `schedule` blocks, plus optional blocks read by individual subcommands.
//!
//! ```toml
//! [model]
//! dim = 5
//! lambda_factors = [-0.5, -0.5]   # λ_i = factor · λ₁ of the discrete ball; or `lambdas`
//! beta = [[1.0, -1.0], [-1.0, 1.0]]
//! group_sizes = [1, 1]
//!
//! [grid]
//! radius = 1.0
//! cells = 2000
//!
//! [solver]                        # every field optional, see `SolveConfig`
//! grad_tol = 1e-7
//!
//! [schedule]
//! values = [-1.0, -10.0, -100.0, -1000.0]
//! ```

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::io::io_context;
use crate::model::{Decomposition, SystemModel};
use crate::solver::SolveConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub dim: usize,
    /// Absolute values of `λ_i`.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    /// `λ_i` as multiples of the principal Dirichlet eigenvalue of the grid.
    #[serde(default)]
    pub lambda_factors: Option<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    /// Sizes of the consecutive groups; a single group when omitted.
    #[serde(default)]
    pub group_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub cells: usize,
}

fn default_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleBlock {
    pub values: Vec<f64>,
    /// Cold-start audit every this many points (0 disables; the first point is
    /// always cold-started).
    pub audit_every: usize,
    /// Relative amplitude below which a node counts as outside the support.
    pub support_threshold: f64,
    /// Also start every point from the best segregated interface state.
    pub interface_family: bool,
}

impl Default for ScheduleBlock {
    fn default() -> Self {
        Self {
            values: Vec::new(),
            audit_every: 1,
            support_threshold: 1e-6,
            interface_family: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignChangingBlock {
    /// Nodes with `|w| ≤ band · max|w|` are excluded from the residual.
    pub band: f64,
}

impl Default for SignChangingBlock {
    fn default() -> Self {
        Self { band: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoGroupBlock {
    /// `β₁₃ = −σ₀`.
    pub sigma0: f64,
    /// `β₂₃ = −σ₁`.
    pub sigma1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsBlock {
    /// Bubble concentrations for the upper-bound sweep, as fractions of `R`.
    pub eps: Vec<f64>,
}

impl Default for LimitsBlock {
    fn default() -> Self {
        Self {
            eps: vec![0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksBlock {
    /// Names of report checks that do not affect the exit code.
    pub skip: Vec<String>,
    /// Floor for every component mass `|u_i|²_{2p}` in `solve`.
    pub mass_floor: f64,
}

impl Default for ChecksBlock {
    fn default() -> Self {
        Self {
            skip: Vec::new(),
            mass_floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub grid: GridBlock,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub schedule: ScheduleBlock,
    #[serde(default)]
    pub sign_changing: SignChangingBlock,
    #[serde(default)]
    pub two_group: Option<TwoGroupBlock>,
    #[serde(default)]
    pub limits: LimitsBlock,
    #[serde(default)]
    pub checks: ChecksBlock,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_context(path))?;
        Self::from_toml(&text)
    }

    pub fn build_grid(&self) -> Result<Arc<RadialGrid>> {
        RadialGrid::shared(self.model.dim, self.grid.radius, self.grid.cells)
    }

    /// The model on `grid`, resolving `lambda_factors` against its principal eigenvalue.
    pub fn build_model(&self, grid: &Arc<RadialGrid>) -> Result<SystemModel> {
        let m = &self.model;
        let d = m.beta.len();
        if m.beta.iter().any(|row| row.len() != d) {
            return Err(Error::Config("beta must be a square matrix".into()));
        }
        let lambdas = match (&m.lambdas, &m.lambda_factors) {
            (Some(l), None) => l.clone(),
            (None, Some(f)) => {
                let (lambda1, _) = grid.principal_eigenvalue()?;
                f.iter().map(|x| x * lambda1).collect()
            }
            _ => {
                return Err(Error::Config(
                    "model needs exactly one of `lambdas` and `lambda_factors`".into(),
                ))
            }
        };
        let sizes = m.group_sizes.clone().unwrap_or_else(|| vec![d]);
        let mut breakpoints = vec![0];
        for s in &sizes {
            breakpoints.push(breakpoints.last().unwrap() + s);
        }
        let dec = Decomposition::new(breakpoints)?;
        let betas = DMatrix::from_fn(d, d, |i, j| m.beta[i][j]);
        SystemModel::new(m.dim, lambdas, betas, dec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[model]
dim = 5
lambda_factors = [-0.5, -0.5]
beta = [[1.0, -1.0], [-1.0, 1.0]]
group_sizes = [1, 1]

[grid]
cells = 100

[solver]
grad_tol = 1e-6
execution = "sequential"

[schedule]
values = [-1.0, -10.0]
"#;

    #[test]
    fn sample_parses_and_builds() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.solver.grad_tol, 1e-6);
        assert_eq!(cfg.solver.max_iters, SolveConfig::default().max_iters);
        assert_eq!(cfg.schedule.audit_every, 1);
        let grid = cfg.build_grid().unwrap();
        let model = cfg.build_model(&grid).unwrap();
        assert_eq!(model.m(), 2);
        let (l1, _) = grid.principal_eigenvalue().unwrap();
        assert!((model.lambda(0) + 0.5 * l1).abs() < 1e-12);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let both = SAMPLE.replace(
            "lambda_factors = [-0.5, -0.5]",
            "lambda_factors = [-0.5, -0.5]\nlambdas = [1.0, 1.0]",
        );
        let cfg = ExperimentConfig::from_toml(&both).unwrap();
        let grid = cfg.build_grid().unwrap();
        assert!(matches!(cfg.build_model(&grid), Err(Error::Config(_))));
        let unknown = SAMPLE.replace("[grid]", "[grid]\nspacing = 0.1");
        assert!(matches!(
            ExperimentConfig::from_toml(&unknown),
            Err(Error::Config(_))
        ));
        let ragged = SAMPLE.replace("[-1.0, 1.0]]", "[-1.0]]");
        let cfg = ExperimentConfig::from_toml(&ragged).unwrap();
        assert!(cfg.build_model(&grid).is_err());
    }
}
