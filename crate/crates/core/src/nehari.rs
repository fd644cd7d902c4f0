//! Groupwise rescaling onto the Nehari set.
//!
//! For a state `u` with group norms `n_h` and interaction matrix `A = M_B(u)`, the scaled
//! state `(t_h u_h)` satisfies `Ψ_h = 0` iff
//! `G_h(s) = n_h − Σ_k e^{(p−2)s_h + p s_k} A_hk = 0` with `s = ln t`. Newton's method on
//! `G` starts from the decoupled solution `t_h^{2p−2} = n_h / A_hh`.

use nalgebra::{DMatrix, DVector};

use crate::energy::{Interactions, NehariReport, State};
use crate::error::{Error, Result};
use crate::model::SystemModel;

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-14;
const MIN_LOG_SCALE: f64 = -18.420680743952367; // ln 1e-8

/// A state rescaled onto the Nehari set.
#[derive(Debug, Clone)]
pub struct Projection {
    pub state: State,
    /// Group scale factors `t_h`.
    pub scales: Vec<f64>,
    pub iterations: usize,
    /// Interactions of the projected state.
    pub interactions: Interactions,
}

impl Projection {
    pub fn energy(&self, model: &SystemModel) -> f64 {
        self.interactions.energy(model)
    }

    pub fn report(&self, model: &SystemModel) -> NehariReport {
        NehariReport::from_interactions(model, &self.interactions)
    }
}

fn residual(n: &[f64], a: &DMatrix<f64>, p: f64, s: &[f64]) -> Vec<f64> {
    let m = n.len();
    (0..m)
        .map(|h| {
            let sum: f64 = (0..m)
                .map(|k| (((p - 2.0) * s[h] + p * s[k]).exp()) * a[(h, k)])
                .sum();
            n[h] - sum
        })
        .collect()
}

fn merit(n: &[f64], g: &[f64]) -> f64 {
    g.iter()
        .zip(n)
        .map(|(r, nh)| (r / nh).abs())
        .fold(0.0, f64::max)
}

/// Scale factors solving the Nehari equations for group norms `n` and interaction
/// matrix `a`, Newton iterations from `start` (log-scales). Returns `(t, iterations)`.
pub fn solve_scales(
    n: &[f64],
    a: &DMatrix<f64>,
    p: f64,
    start: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let m = n.len();
    let mut s = start.to_vec();
    let mut g = residual(n, a, p, &s);
    let mut err = merit(n, &g);
    for it in 0..MAX_ITER {
        if !err.is_finite() {
            return Err(Error::ProjectionInfeasible { residual: err });
        }
        if err <= TOL {
            return Ok((s.iter().map(|x| x.exp()).collect(), it));
        }
        let jac = DMatrix::from_fn(m, m, |h, k| {
            if h == k {
                let mut v = (2.0 * p - 2.0) * ((2.0 * p - 2.0) * s[h]).exp() * a[(h, h)];
                for j in (0..m).filter(|&j| j != h) {
                    v += (p - 2.0) * (((p - 2.0) * s[h] + p * s[j]).exp()) * a[(h, j)];
                }
                -v
            } else {
                -p * (((p - 2.0) * s[h] + p * s[k]).exp()) * a[(h, k)]
            }
        });
        let rhs = DVector::from_iterator(m, g.iter().map(|x| -x));
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(Error::ProjectionInfeasible { residual: err });
        };
        let mut eta = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = s
                .iter()
                .zip(step.iter())
                .map(|(x, d)| (x + eta * d).max(MIN_LOG_SCALE))
                .collect();
            let tg = residual(n, a, p, &trial);
            let te = merit(n, &tg);
            if te.is_finite() && te < err {
                s = trial;
                g = tg;
                err = te;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // rounding floor reached close to the solution
            if err <= 1e3 * TOL {
                return Ok((s.iter().map(|x| x.exp()).collect(), it));
            }
            return Err(Error::ProjectionInfeasible { residual: err });
        }
    }
    if err <= 1e3 * TOL {
        return Ok((s.iter().map(|x| x.exp()).collect(), MAX_ITER));
    }
    Err(Error::ProjectionInfeasible { residual: err })
}

fn base_data(model: &SystemModel, inter: &Interactions) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = inter.group_norms(model.decomposition());
    let a = inter.interaction_matrix(model);
    for (h, nh) in n.iter().enumerate() {
        if !(*nh > 0.0) {
            return Err(Error::Solver(format!(
                "group {} has non-positive norm {nh:e}",
                h + 1
            )));
        }
        if !(a[(h, h)] > 0.0) {
            return Err(Error::H3Violation {
                group: h,
                value: a[(h, h)],
            });
        }
    }
    Ok((n, a))
}

fn decoupled_start(n: &[f64], a: &DMatrix<f64>, p: f64) -> Vec<f64> {
    (0..n.len())
        .map(|h| ((n[h] / a[(h, h)]).ln() / (2.0 * p - 2.0)).max(MIN_LOG_SCALE))
        .collect()
}

fn finish(
    model: &SystemModel,
    u: &State,
    inter: &Interactions,
    t: Vec<f64>,
    iterations: usize,
) -> Result<Projection> {
    if t.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::ProjectionInfeasible {
            residual: f64::INFINITY,
        });
    }
    let dec = model.decomposition();
    Ok(Projection {
        state: u.scale_groups(dec, &t),
        interactions: inter.scaled(dec, &t),
        scales: t,
        iterations,
    })
}

/// Projects with precomputed interactions of `u`.
pub fn project_with(model: &SystemModel, u: &State, inter: &Interactions) -> Result<Projection> {
    let p = model.p();
    let (n, a) = base_data(model, inter)?;
    if model.m() == 1 {
        let t = (n[0] / a[(0, 0)]).powf(1.0 / (2.0 * p - 2.0));
        return finish(model, u, inter, vec![t], 0);
    }
    let start = decoupled_start(&n, &a, p);
    let first = solve_scales(&n, &a, p, &start);
    let (t, it) = match first {
        Ok(v) => v,
        Err(e) => {
            // fall back to the multistart grid; any converged start will do
            let mut found = None;
            for seed in seed_grid(model.m()) {
                let s: Vec<f64> = start.iter().zip(&seed).map(|(a, b)| a + b.ln()).collect();
                if let Ok(v) = solve_scales(&n, &a, p, &s) {
                    found = Some(v);
                    break;
                }
            }
            found.ok_or(e)?
        }
    };
    finish(model, u, inter, t, it)
}

/// Rescales each group of `u` (taken as `|u|`) so that every `Ψ_h` vanishes.
pub fn nehari_project(model: &SystemModel, u: &State) -> Result<Projection> {
    let u = u.abs();
    let inter = Interactions::compute(model, &u);
    project_with(model, &u, &inter)
}

/// Relative scale seeds `{0.25, 1, 4}^m` in lexicographic order.
fn seed_grid(m: usize) -> Vec<Vec<f64>> {
    const LEVELS: [f64; 3] = [0.25, 1.0, 4.0];
    let total = 3usize.pow(m as u32);
    (0..total)
        .map(|mut idx| {
            let mut v = vec![0.0; m];
            for slot in v.iter_mut().rev() {
                *slot = LEVELS[idx % 3];
                idx /= 3;
            }
            v
        })
        .collect()
}

/// `max_{t ∈ (0,∞)^m} J(t u)` over the Newton solutions reached from a grid of starts;
/// the maximizing projection is returned, ties broken by the earliest start.
pub fn segmented_max(model: &SystemModel, u: &State) -> Result<Projection> {
    let u = u.abs();
    let inter = Interactions::compute(model, &u);
    let p = model.p();
    let (n, a) = base_data(model, &inter)?;
    if model.m() == 1 {
        return project_with(model, &u, &inter);
    }
    let base = decoupled_start(&n, &a, p);
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut last_err = None;
    for seed in seed_grid(model.m()) {
        let s: Vec<f64> = base.iter().zip(&seed).map(|(a, b)| a + b.ln()).collect();
        match solve_scales(&n, &a, p, &s) {
            Ok((t, it)) => {
                let j = inter.scaled(model.decomposition(), &t).energy(model);
                if best.as_ref().is_none_or(|(bj, _, _)| j > *bj) {
                    best = Some((j, t, it));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, t, it)) => finish(model, &u, &inter, t, it),
        None => Err(last_err.unwrap_or(Error::ProjectionInfeasible { residual: f64::NAN })),
    }
}
