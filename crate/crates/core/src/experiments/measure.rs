//! Pointwise and integral diagnostics of a solved state.

use crate::energy::{Interactions, State};
use crate::model::SystemModel;
use crate::solver::SolveResult;

use super::record::{Start, SweepRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct Measures {
    pub beta_values: Vec<f64>,
    pub overlaps: Vec<f64>,
    pub weighted_overlaps: Vec<f64>,
    pub max_pointwise_products: Vec<f64>,
    pub component_masses: Vec<f64>,
    pub coverage: f64,
}

/// Fraction of the ball measure (node quadrature) covered by the union of the
/// supports `{u_i > threshold · max u_i}`.
pub fn support_coverage(u: &State, threshold: f64) -> f64 {
    let grid = u.grid();
    let cuts: Vec<f64> = u
        .components()
        .iter()
        .map(|c| threshold * c.max_abs())
        .collect();
    let w = grid.quad_weights();
    let covered: f64 = (0..grid.interior_len())
        .filter(|&k| {
            u.components()
                .iter()
                .zip(&cuts)
                .any(|(c, cut)| *cut > 0.0 && c.values()[k] > *cut)
        })
        .map(|k| w[k])
        .sum();
    covered / grid.volume()
}

pub fn max_product(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).fold(0.0, f64::max)
}

pub fn measure(model: &SystemModel, u: &State, threshold: f64) -> Measures {
    let inter = Interactions::compute(model, u);
    let pairs = model.decomposition().cross_pairs();
    Measures {
        beta_values: pairs.iter().map(|&(i, j)| model.beta(i, j)).collect(),
        overlaps: pairs.iter().map(|&(i, j)| inter.pair[(i, j)]).collect(),
        weighted_overlaps: pairs
            .iter()
            .map(|&(i, j)| model.beta(i, j) * inter.pair[(i, j)])
            .collect(),
        max_pointwise_products: pairs
            .iter()
            .map(|&(i, j)| max_product(u.component(i).values(), u.component(j).values()))
            .collect(),
        component_masses: inter.component_masses(),
        coverage: support_coverage(u, threshold),
    }
}

/// Record of a solved point with the measured diagnostics filled in.
pub fn solved_record(
    sweep_id: &str,
    point: usize,
    parameter: f64,
    model: &SystemModel,
    result: &SolveResult,
    start: Start,
    threshold: f64,
) -> SweepRecord {
    let m = measure(model, &result.state, threshold);
    let mut r = SweepRecord::blank(sweep_id, point, parameter);
    r.beta_values = m.beta_values;
    r.energy_c = result.energy;
    r.overlaps = m.overlaps;
    r.weighted_overlaps = m.weighted_overlaps;
    r.max_pointwise_products = m.max_pointwise_products;
    r.component_masses = m.component_masses;
    r.coverage = m.coverage;
    r.converged = result.converged;
    r.grad_residual = result.grad_residual;
    r.iterations = result.iterations;
    r.start = start;
    r
}
