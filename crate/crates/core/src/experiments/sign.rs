//! Sign-changing solutions of the scalar equation from strongly competing pairs:
//! with `λ₁ = λ₂ = λ` and `β₁₁ = β₂₂ = μ`, `w = u₁ − u₂` approaches a nodal solution
//! of `−Δw + λw = μ|w|^{2p−2}w` as `β₁₂ → −∞`.

use std::sync::Arc;

use crate::config::ScheduleBlock;
use crate::energy::{energy_j, gradient_j, State};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::model::SystemModel;
use crate::solver::SolveConfig;

use super::sweep::sweep_to_infinity;
use super::{record::SweepRecord, sweep::SweepOutput};

pub const SIGN_CHANGING: &str = "sign-changing";

/// Values with `|w_k| ≤ SIGN_FLOOR · max|w|` are treated as zero when counting.
pub const SIGN_FLOOR: f64 = 1e-12;

/// Number of sign changes of a nodal profile, skipping values at roundoff level.
pub fn sign_changes(w: &[f64]) -> usize {
    let peak = w.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let cut = SIGN_FLOOR * peak;
    let mut last = 0.0_f64;
    let mut count = 0;
    for &x in w.iter().filter(|x| x.abs() > cut) {
        if last != 0.0 && x.signum() != last.signum() {
            count += 1;
        }
        last = x;
    }
    count
}

/// The scalar model `(λ, μ)` behind a symmetric competing pair.
pub fn scalar_of_pair(model: &SystemModel) -> Result<SystemModel> {
    if model.d() != 2 || model.m() != 2 {
        return Err(Error::InvalidModel(
            "sign-changing runs need two components in two groups".into(),
        ));
    }
    let (l, mu) = (model.lambda(0), model.beta(0, 0));
    if model.lambda(1) != l || model.beta(1, 1) != mu {
        return Err(Error::InvalidModel(
            "sign-changing runs need λ₁ = λ₂ and β₁₁ = β₂₂".into(),
        ));
    }
    SystemModel::scalar(model.dim(), l, mu)
}

/// Diagnostics of `w = u₁ − u₂` for a solved pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalDiagnostics {
    pub w: Vec<f64>,
    pub sign_changes: usize,
    /// `I(w)`, the scalar functional.
    pub energy_w: f64,
    /// Largest scalar-equation residual on nodes with `|w| > band · max|w|`, relative
    /// to the largest `μ|w|^{2p−1}` there.
    pub band_residual: f64,
}

pub fn nodal_diagnostics(scalar: &SystemModel, u: &State, band: f64) -> Result<NodalDiagnostics> {
    let grid = u.grid();
    let w: Vec<f64> = u
        .component(0)
        .values()
        .iter()
        .zip(u.component(1).values())
        .map(|(a, b)| a - b)
        .collect();
    let ws = State::from_values(grid, vec![w.clone()])?;
    let energy_w = energy_j(scalar, &ws);
    let g = gradient_j(scalar, &ws);
    let peak = w.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let two_p = scalar.two_p();
    let mu = scalar.beta(0, 0);
    let (mut num, mut den) = (0.0_f64, 0.0_f64);
    for (k, x) in w.iter().enumerate() {
        if x.abs() > band * peak {
            num = num.max(g.component(0).values()[k].abs());
            den = den.max(mu.abs() * x.abs().powf(two_p - 1.0));
        }
    }
    Ok(NodalDiagnostics {
        sign_changes: sign_changes(&w),
        w,
        energy_w,
        band_residual: if den > 0.0 { num / den } else { f64::NAN },
    })
}

/// Runs the `β₁₂ → −∞` continuation for a symmetric pair and records `w` at every point.
pub fn sign_changing_bn(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    schedule: &ScheduleBlock,
    band: f64,
) -> Result<SweepOutput> {
    if !(0.0..1.0).contains(&band) {
        return Err(Error::Config(format!("band {band} must lie in [0, 1)")));
    }
    let scalar = scalar_of_pair(model)?;
    let out = sweep_to_infinity(model, grid, cfg, schedule)?;
    let records = out
        .records
        .iter()
        .zip(&out.states)
        .map(|(r, u)| {
            let diag = nodal_diagnostics(&scalar, u, band)?;
            let mut r: SweepRecord = r.clone();
            r.sweep_id = SIGN_CHANGING.to_string();
            r.set_extra("sign_changes", diag.sign_changes as f64);
            r.set_extra("energy_w", diag.energy_w);
            r.set_extra("identity_gap", diag.energy_w - r.energy_c);
            r.set_extra("band_residual", diag.band_residual);
            r.set_extra("band", band);
            r.set_extra(
                "twice_limit",
                2.0 * r.limit_levels.first().copied().unwrap_or(f64::NAN),
            );
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutput {
        records,
        states: out.states,
    })
}

/// CSV of `r, u₁, u₂, w` for one solved pair.
pub fn nodal_csv(u: &State) -> String {
    let grid = u.grid();
    let mut out = String::from("r,u_1,u_2,w\n");
    for (k, r) in grid.nodes()[..grid.interior_len()].iter().enumerate() {
        let a = u.component(0).values()[k];
        let b = u.component(1).values()[k];
        out.push_str(&format!(
            "{},{},{},{}\n",
            crate::io::num(*r),
            crate::io::num(a),
            crate::io::num(b),
            crate::io::num(a - b)
        ));
    }
    out
}
