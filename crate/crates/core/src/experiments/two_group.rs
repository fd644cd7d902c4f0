//! Two groups `I₁ = {1, 2}`, `I₂ = {3}` with competing cross couplings: as the
//! within-group coupling `β₁₂` grows, the least energy drops below both two-component
//! levels `d₁₃`, `d₂₃` and all three components survive.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::model::{Decomposition, SystemModel};
use crate::solver::{minimize, SolveConfig};

use super::measure::solved_record;
use super::record::SweepRecord;
use super::runs::component_floors;
use super::sweep::{continuation, reseeded, sub_levels, SweepOutput};

pub const TWO_GROUP: &str = "two-group";

/// The three-component model with `β₁₃ = −σ₀`, `β₂₃ = −σ₁` and the given `β₁₂`.
pub fn two_group_model(
    base: &SystemModel,
    sigma0: f64,
    sigma1: f64,
    beta12: f64,
) -> Result<SystemModel> {
    if base.d() != 3 || base.decomposition().breakpoints() != [0, 2, 3] {
        return Err(Error::InvalidModel(
            "two-group scans need three components grouped as {1,2},{3}".into(),
        ));
    }
    if !(0.0 < sigma0 && sigma0 <= sigma1) {
        return Err(Error::Config(format!(
            "need 0 < sigma0 <= sigma1, got {sigma0}, {sigma1}"
        )));
    }
    Ok(base
        .clone()
        .with_beta(0, 2, -sigma0)
        .with_beta(1, 2, -sigma1)
        .with_beta(0, 1, beta12))
}

/// `d_ij`: least energy of components `i`, `j` alone, as two groups.
pub fn pair_level(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    i: usize,
    j: usize,
) -> Result<f64> {
    let sub = model.sub_model(&[i, j], Decomposition::singletons(2))?;
    Ok(minimize(&sub, grid, &reseeded(cfg, &sub))?.energy)
}

/// Scans `β₁₂` over increasing `values`; `sobolev` is the constant used for the
/// nontriviality floors.
#[allow(clippy::too_many_arguments)]
pub fn two_group_scan(
    base: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    sigma0: f64,
    sigma1: f64,
    values: &[f64],
    sobolev: f64,
    support_threshold: f64,
) -> Result<SweepOutput> {
    if values.is_empty() || values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Schedule(
            "beta_12 values must be strictly increasing".into(),
        ));
    }
    let models = values
        .iter()
        .map(|&b| two_group_model(base, sigma0, sigma1, b))
        .collect::<Result<Vec<_>>>()?;
    // d₁₃ and d₂₃ do not involve β₁₂
    let d13 = pair_level(&models[0], grid, cfg, 0, 2)?;
    let d23 = pair_level(&models[0], grid, cfg, 1, 2)?;
    let chosen = continuation(&models, grid, cfg, 1, None)?;
    let mut records = Vec::new();
    let mut states = Vec::new();
    for (i, ch) in chosen.into_iter().enumerate() {
        let model = &models[i];
        let mut r: SweepRecord = solved_record(
            TWO_GROUP,
            i,
            values[i],
            model,
            &ch.result,
            ch.start,
            support_threshold,
        );
        r.sub_levels = sub_levels(model, grid, cfg)?
            .iter()
            .map(|s| s.energy)
            .collect();
        r.limit_levels = crate::limits::limit_levels(model);
        r.mass_floors = component_floors(model, sobolev)?;
        r.warm_energy = ch.warm_energy;
        r.cold_energy = ch.cold_energy;
        r.set_extra("d13", d13);
        r.set_extra("d23", d23);
        r.set_extra("sigma0", sigma0);
        r.set_extra("sigma1", sigma1);
        r.set_extra("sobolev", sobolev);
        records.push(r);
        states.push(ch.result.state);
    }
    Ok(SweepOutput { records, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn model_couplings_are_placed() {
        let base = SystemModel::new(
            5,
            vec![-1.0; 3],
            DMatrix::identity(3, 3),
            Decomposition::new(vec![0, 2, 3]).unwrap(),
        )
        .unwrap();
        let m = two_group_model(&base, 0.5, 1.0, 7.0).unwrap();
        assert_eq!(m.beta(0, 2), -0.5);
        assert_eq!(m.beta(2, 1), -1.0);
        assert_eq!(m.beta(1, 0), 7.0);
        assert!(two_group_model(&base, 1.0, 0.5, 0.0).is_err());
        let wrong = SystemModel::new(
            5,
            vec![-1.0; 3],
            DMatrix::identity(3, 3),
            Decomposition::singletons(3),
        )
        .unwrap();
        assert!(two_group_model(&wrong, 0.5, 1.0, 0.0).is_err());
    }
}
