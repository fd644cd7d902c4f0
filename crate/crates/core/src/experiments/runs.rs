//! Single solves, limit quantities and hypothesis checks as records.

use std::sync::Arc;

use crate::energy::NehariReport;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::io::num;
use crate::limits::{estimate_upper_bound, group_fmax, limit_level_with, sobolev_constant};
use crate::model::{validate_with_lambda1, SystemModel};
use crate::solver::{minimize, SolveConfig, SolveResult};

use super::measure::solved_record;
use super::record::{Start, SweepRecord};
use super::sweep::{reseeded, sub_levels};

pub const SOLVE: &str = "solve";
pub const LIMITS: &str = "limits";
pub const VALIDATE: &str = "validate";

/// Sobolev constant of the grid: with `d₀` the least energy of `−Δ_h u = u^{2p−1}`,
/// `S_h = (N d₀)^{2/N}` is the infimum of the discrete Sobolev quotient.
pub fn discrete_sobolev_constant(grid: &Arc<RadialGrid>, cfg: &SolveConfig) -> Result<f64> {
    let model = SystemModel::scalar(grid.dim(), 0.0, 1.0)?;
    let r = minimize(&model, grid, &reseeded(cfg, &model))?;
    let n = grid.dim() as f64;
    Ok((n * r.energy).powf(2.0 / n))
}

/// `(S / (d · max_{I_h²} β⁺))^{1/(p−1)}` for every group (infinite for groups without
/// positive couplings).
pub fn group_c1(model: &SystemModel, sobolev: f64) -> Vec<f64> {
    let d = model.d() as f64;
    let expo = 1.0 / (model.p() - 1.0);
    (0..model.m())
        .map(|h| {
            let max_pos = model.group_block(h).iter().fold(0.0_f64, |a, b| a.max(*b));
            if max_pos > 0.0 {
                (sobolev / (d * max_pos)).powf(expo)
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// [`group_c1`] with `S` reduced by the coercivity factor `1 − max_{I_h} |λ_i| / λ₁`, the
/// bound that holds on the Nehari set when the `λ_i` are negative.
pub fn group_c1_lambda(model: &SystemModel, sobolev: f64, lambda1: f64) -> Vec<f64> {
    let dec = model.decomposition();
    let d = model.d() as f64;
    let expo = 1.0 / (model.p() - 1.0);
    (0..model.m())
        .map(|h| {
            let worst = dec
                .group(h)
                .map(|i| (-model.lambda(i)).max(0.0))
                .fold(0.0, f64::max);
            let coercivity = (1.0 - worst / lambda1).max(0.0);
            let max_pos = model.group_block(h).iter().fold(0.0_f64, |a, b| a.max(*b));
            if max_pos > 0.0 {
                (coercivity * sobolev / (d * max_pos)).powf(expo)
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Floor for each component: its group's `C₁` term shared evenly within the group.
pub fn component_floors(model: &SystemModel, sobolev: f64) -> Result<Vec<f64>> {
    if !(sobolev > 0.0) {
        return Err(Error::InvalidModel(format!(
            "Sobolev constant {sobolev} must be positive"
        )));
    }
    let c1 = group_c1(model, sobolev);
    let dec = model.decomposition();
    Ok((0..model.d())
        .map(|i| {
            let h = dec.group_of(i);
            c1[h] / dec.group(h).len() as f64
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
/// Record of a single solve, with the Nehari identities and `C₁` quantities as extras.
pub fn solve_record(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    result: &SolveResult,
    start: Start,
    sobolev: f64,
    mass_floor: f64,
    support_threshold: f64,
) -> Result<SweepRecord> {
    let mut r = solved_record(SOLVE, 0, f64::NAN, model, result, start, support_threshold);
    r.sub_levels = if model.m() > 1 {
        sub_levels(model, grid, cfg)?
            .iter()
            .map(|s| s.energy)
            .collect()
    } else {
        vec![result.energy]
    };
    r.limit_levels = crate::limits::limit_levels(model);
    r.mass_floors = vec![mass_floor; model.d()];
    for (k, v) in nehari_extras(model, &result.report) {
        r.set_extra(&k, v);
    }
    let min = |v: Vec<f64>| v.into_iter().fold(f64::INFINITY, f64::min);
    let (lambda1, _) = grid.principal_eigenvalue()?;
    r.set_extra("sobolev", sobolev);
    r.set_extra("lambda1", lambda1);
    r.set_extra("c1", min(group_c1(model, sobolev)));
    r.set_extra("c1_lambda", min(group_c1_lambda(model, sobolev, lambda1)));
    let dec = model.decomposition();
    for h in 0..model.m() {
        let total: f64 = dec.group(h).map(|i| r.component_masses[i]).sum();
        r.set_extra(&format!("group_mass_{}", h + 1), total);
    }
    Ok(r)
}

/// Residuals of the Nehari identities at a state.
pub fn nehari_extras(model: &SystemModel, report: &NehariReport) -> Vec<(String, f64)> {
    let mut out = vec![
        ("psi_rel".to_string(), report.max_relative_residual()),
        (
            "nehari_gap".to_string(),
            (report.energy - report.nehari_energy).abs() / report.energy.abs().max(1.0),
        ),
    ];
    let competitive = model
        .decomposition()
        .cross_pairs()
        .iter()
        .all(|&(i, j)| model.beta(i, j) <= 0.0);
    if competitive {
        let two = 2.0 * model.p() - 2.0;
        let gap = report
            .dominance_margins
            .iter()
            .zip(&report.group_norms)
            .map(|(m, n)| (m - two * n).abs() / n.abs().max(1.0))
            .fold(0.0, f64::max);
        out.push(("margin_gap".to_string(), gap));
    }
    out
}

/// Cutoff-bubble upper bounds for every `eps / R` in `fractions`.
pub fn limits_records(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    fractions: &[f64],
) -> Result<Vec<SweepRecord>> {
    if fractions.is_empty() {
        return Err(Error::Config("limits need at least one eps".into()));
    }
    let s = sobolev_constant(model.dim());
    let p = model.p();
    let fmax: Vec<f64> = (0..model.m())
        .map(|h| group_fmax(&model.group_block(h), p).fmax)
        .collect();
    let l_h: Vec<f64> = (0..model.m())
        .map(|h| limit_level_with(&model.group_block(h), model.dim(), s))
        .collect();
    let sum_l: f64 = l_h.iter().sum();
    fractions
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let bound = estimate_upper_bound(model, grid, f * grid.radius())?;
            let mut r = SweepRecord::blank(LIMITS, i, f);
            r.energy_c = bound;
            r.limit_levels = l_h.clone();
            r.set_extra("sobolev", s);
            r.set_extra("limit_sum", sum_l);
            r.set_extra("gap", sum_l - bound);
            for (h, v) in fmax.iter().enumerate() {
                r.set_extra(&format!("fmax_{}", h + 1), *v);
            }
            Ok(r)
        })
        .collect()
}

/// CSV `eps,bound,sum_l,gap` of limit records.
pub fn upper_bound_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("eps,bound,sum_l,gap\n");
    for r in records {
        let sum = r.extra("limit_sum").unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{},{},{},{}\n",
            num(r.parameter),
            num(r.energy_c),
            num(sum),
            num(sum - r.energy_c)
        ));
    }
    out
}

/// Hypothesis checks against the principal eigenvalue of `grid`.
pub fn validate_record(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
) -> Result<(SweepRecord, Vec<String>)> {
    let (lambda1, _) = grid.principal_eigenvalue()?;
    let v = validate_with_lambda1(model, lambda1);
    let mut r = SweepRecord::blank(VALIDATE, 0, f64::NAN);
    r.set_extra("lambda1", lambda1);
    for (name, ok) in [("h1", v.h1), ("h2", v.h2), ("h3", v.h3), ("h4", v.h4)] {
        r.set_extra(name, if ok { 1.0 } else { 0.0 });
    }
    Ok((r, v.messages))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Decomposition;
    use nalgebra::DMatrix;

    #[test]
    fn floors_split_group_terms() {
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 4.0, -1.0, 4.0, 1.0, -1.0, -1.0, -1.0, 2.0]);
        let m = SystemModel::new(
            5,
            vec![-1.0; 3],
            b,
            Decomposition::new(vec![0, 2, 3]).unwrap(),
        )
        .unwrap();
        let s = 14.0;
        let c1 = group_c1(&m, s);
        assert!((c1[0] - (s / 12.0_f64).powf(1.5)).abs() < 1e-12);
        assert!((c1[1] - (s / 6.0_f64).powf(1.5)).abs() < 1e-12);
        let floors = component_floors(&m, s).unwrap();
        assert_eq!(floors[0], c1[0] / 2.0);
        assert_eq!(floors[2], c1[1]);
        let global = crate::model::c1_lower_bound(&m, s).unwrap();
        assert_eq!(global, c1[0].min(c1[1]));
        // λ = −λ₁/2 halves the effective constant
        let half = group_c1_lambda(&m, s, 2.0);
        assert!((half[0] - (s / 24.0_f64).powf(1.5)).abs() < 1e-12);
    }
}
