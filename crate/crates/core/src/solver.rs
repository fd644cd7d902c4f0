//! Nonnegative minimization of `J` on the Nehari set.
//!
//! Each iteration takes a preconditioned gradient step and maps the result back onto
//! the Nehari set with [`nehari::project_with`] after taking absolute values. The
//! preconditioner for component `i` is `−Δ_h + λ_i + c_i` where
//! `c_i = Σ_j β_ij⁻ |u_j|^p |u_i|^{p−2}` treats the competitive coupling implicitly;
//! the operator is an M-matrix, so for steps `η ≤ 1` the trial state
//! `(1−η)u + η P^{-1}(cooperative terms)` stays nonnegative.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energy::{
    constraint_gradient, gradient_j, Interactions, NehariReport, PointValues, State,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::{Field, RadialGrid};
use crate::limits::{bubble, cutoff};
use crate::model::SystemModel;
use crate::nehari;
use crate::newton::newton_increment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedProfile {
    /// Cut-off bubble of scale `sigma`.
    Bubble,
    /// Principal Dirichlet mode of the assigned support.
    Eigenfunction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "lowercase")]
pub enum SeedLayout {
    /// Every group on the whole ball, centred at the origin.
    Centered,
    /// Group `h` on the equal-measure support `order[h]`; `order` is a permutation.
    Annuli { order: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDescriptor {
    #[serde(flatten)]
    pub layout: SeedLayout,
    pub profile: SeedProfile,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_sigma() -> f64 {
    0.2
}

impl SeedDescriptor {
    pub fn centered(profile: SeedProfile) -> Self {
        Self {
            layout: SeedLayout::Centered,
            profile,
            amplitude: 1.0,
            sigma: default_sigma(),
        }
    }

    pub fn annuli(order: Vec<usize>, profile: SeedProfile) -> Self {
        Self {
            layout: SeedLayout::Annuli { order },
            profile,
            amplitude: 1.0,
            sigma: default_sigma(),
        }
    }
}

/// Seeds used when a configuration lists none: centred seeds for one group, disjoint
/// annuli in both orders plus a centred seed otherwise.
pub fn default_seeds(m: usize) -> Vec<SeedDescriptor> {
    if m == 1 {
        return vec![
            SeedDescriptor::centered(SeedProfile::Eigenfunction),
            SeedDescriptor::centered(SeedProfile::Bubble),
        ];
    }
    let forward: Vec<usize> = (0..m).collect();
    let backward: Vec<usize> = (0..m).rev().collect();
    vec![
        SeedDescriptor::annuli(forward, SeedProfile::Eigenfunction),
        SeedDescriptor::annuli(backward, SeedProfile::Eigenfunction),
        SeedDescriptor::centered(SeedProfile::Eigenfunction),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Initial (and maximal) step length.
    pub step_size: f64,
    pub max_iters: usize,
    /// Threshold on the relative Lagrange residual in the `H⁻¹` norm.
    pub grad_tol: f64,
    pub seeds: Vec<SeedDescriptor>,
    /// Threshold on `|Ψ_h| / max(1, ‖u_h‖²_h)` at the returned state.
    pub tolerance_psi: f64,
    pub execution: Execution,
    /// Number of stored L-BFGS pairs; zero gives preconditioned gradient descent.
    pub memory: usize,
    /// Residual below which Newton corrections are attempted (zero disables them).
    pub newton_switch: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_iters: 20_000,
            grad_tol: 1e-7,
            seeds: Vec::new(),
            tolerance_psi: 1e-10,
            execution: Execution::default(),
            memory: 8,
            newton_switch: 1e-3,
        }
    }
}

impl SolveConfig {
    /// Default settings with the default seeds for `model`.
    pub fn for_model(model: &SystemModel) -> Self {
        Self {
            seeds: default_seeds(model.m()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.grad_tol > 0.0 && self.tolerance_psi > 0.0) {
            return Err(Error::Config(
                "step_size, grad_tol and tolerance_psi must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: State,
    pub energy: f64,
    /// Least-squares multipliers `μ` of `J' − Σ μ_k Ψ_k'`.
    pub multiplier_estimates: Vec<f64>,
    /// `‖J' − Σ μ_k Ψ_k'‖_{H⁻¹} / (Σ_i ‖u_i‖²_i)^{1/2}`.
    pub grad_residual: f64,
    pub iterations: usize,
    pub seed_id: usize,
    /// `|u_i|²_{2p}`.
    pub component_masses: Vec<f64>,
    pub converged: bool,
    pub report: NehariReport,
    /// Energy after every accepted iteration, starting with the projected seed.
    pub energy_history: Vec<f64>,
    /// Final energy of every seed (`None` when the seed failed).
    pub seed_energies: Vec<Option<f64>>,
}

/// Full-grid support for every component.
pub fn full_supports(grid: &RadialGrid, d: usize) -> Vec<Range<usize>> {
    vec![0..grid.interior_len(); d]
}

fn mask(values: &mut [f64], support: &Range<usize>) {
    for (k, v) in values.iter_mut().enumerate() {
        if !support.contains(&k) {
            *v = 0.0;
        }
    }
}

fn mask_state(u: &mut State, supports: &[Range<usize>]) {
    for (i, s) in supports.iter().enumerate() {
        mask(u.component_mut(i).values_mut(), s);
    }
}

/// Sine bump on `[a, b]`, or the quarter cosine on a ball `[0, b]`.
fn mode_profile(a: f64, b: f64, r: f64) -> f64 {
    if r >= b || r < a {
        0.0
    } else if a == 0.0 {
        (std::f64::consts::FRAC_PI_2 * r / b).cos()
    } else {
        (std::f64::consts::PI * (r - a) / (b - a)).sin()
    }
}

/// Profile of component `index` on `support`; the shape varies with the index so that
/// centred seeds of different components are never proportional.
fn seed_profile(
    desc: &SeedDescriptor,
    dim: usize,
    support: (f64, f64),
    index: usize,
    r: f64,
) -> f64 {
    let (a, b) = support;
    let stretch = 1.0 + 0.5 * index as f64;
    match desc.profile {
        SeedProfile::Eigenfunction => mode_profile(a, b, r).max(0.0).powf(stretch),
        SeedProfile::Bubble => {
            let sigma = desc.sigma * stretch;
            if a == 0.0 {
                bubble(dim, sigma, r) * cutoff(r / b)
            } else {
                let c = 0.5 * (a + b);
                let w = 0.5 * (b - a);
                bubble(dim, sigma, (r - c).abs()) * cutoff((r - c).abs() / w)
            }
        }
    }
}

/// Equal-width radial supports `[Rk/m, R(k+1)/m]` with a 5% guard on each inner side;
/// equal widths keep the Dirichlet energies of ball and annuli comparable.
pub fn seed_supports(m: usize, radius: f64) -> Vec<(f64, f64)> {
    (0..m)
        .map(|k| {
            let (a, b) = (
                radius * k as f64 / m as f64,
                radius * (k + 1) as f64 / m as f64,
            );
            let guard = 0.05 * (b - a);
            let lo = if k == 0 { 0.0 } else { a + guard };
            let hi = if k + 1 == m { b } else { b - guard };
            (lo, hi)
        })
        .collect()
}

/// Builds the initial state of a seed.
pub fn seed_state(
    desc: &SeedDescriptor,
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
) -> Result<State> {
    if model.dim() != grid.dim() {
        return Err(Error::Mismatch("model and grid dimensions differ".into()));
    }
    if !(desc.amplitude > 0.0 && desc.sigma > 0.0) {
        return Err(Error::Config(
            "seed amplitude and sigma must be positive".into(),
        ));
    }
    let m = model.m();
    let radius = grid.radius();
    let supports: Vec<(f64, f64)> = match &desc.layout {
        SeedLayout::Centered => vec![(0.0, radius); m],
        SeedLayout::Annuli { order } => {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..m).collect::<Vec<_>>() {
                return Err(Error::Geometry(format!(
                    "annulus order {order:?} is not a permutation of 0..{m}"
                )));
            }
            let all = seed_supports(m, radius);
            order.iter().map(|&k| all[k]).collect()
        }
    };
    let dec = model.decomposition();
    let mut components = Vec::with_capacity(model.d());
    for (h, range) in dec.groups().enumerate() {
        for i in range {
            let field = Field::from_fn(Arc::clone(grid), |r| {
                desc.amplitude * seed_profile(desc, grid.dim(), supports[h], i, r)
            });
            if field.max_abs() == 0.0 {
                return Err(Error::Geometry(format!(
                    "support of group {} contains no grid node",
                    h + 1
                )));
            }
            components.push(field);
        }
    }
    State::new(components)
}

struct Problem<'a> {
    model: &'a SystemModel,
    grid: &'a Arc<RadialGrid>,
    supports: &'a [Range<usize>],
}

struct Stationarity {
    residual: f64,
    multipliers: Vec<f64>,
}

impl Problem<'_> {
    fn masked_gradient(&self, u: &State) -> State {
        let mut g = gradient_j(self.model, u);
        mask_state(&mut g, self.supports);
        g
    }

    /// `A⁻¹ x` componentwise with `A_i = −Δ_h + λ_i` on the support of `i`.
    fn riesz(&self, x: &State) -> State {
        let values = (0..x.d())
            .map(|i| {
                self.grid.solve_shifted(
                    self.model.lambda(i),
                    None,
                    x.component(i).values(),
                    self.supports[i].clone(),
                )
            })
            .collect();
        State::from_values(self.grid, values).expect("grid length")
    }

    /// Residual of the multiplier equation on the free set; nodes where `u_i = 0` and
    /// the gradient pushes outward are active bounds of the nonnegative cone.
    fn stationarity(&self, u: &State, g: &State, inter: &Interactions) -> Stationarity {
        let m = self.model.m();
        let active = active_set(u, g, false);
        let free = |mut s: State| {
            mask_state(&mut s, self.supports);
            clear_active(&mut s, &active);
            s
        };
        let psis: Vec<State> = (0..m)
            .map(|k| free(constraint_gradient(self.model, u, k)))
            .collect();
        let g = &free(g.clone());
        let rpsis: Vec<State> = psis.iter().map(|c| self.riesz(c)).collect();
        let rg = self.riesz(g);
        let gram = DMatrix::from_fn(m, m, |k, l| psis[k].dot(&rpsis[l]));
        let rhs = DVector::from_iterator(m, psis.iter().map(|c| c.dot(&rg)));
        let mu = gram
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .or_else(|| gram.clone().lu().solve(&rhs))
            .unwrap_or_else(|| DVector::zeros(m));
        // ‖g − Σμψ‖² in the A⁻¹ metric, expanded to avoid a further solve
        let mut res2 = g.dot(&rg);
        for k in 0..m {
            res2 -= 2.0 * mu[k] * rhs[k];
            for l in 0..m {
                res2 += mu[k] * mu[l] * gram[(k, l)];
            }
        }
        let scale: f64 = inter.norms.iter().sum::<f64>().sqrt();
        Stationarity {
            residual: res2.max(0.0).sqrt() / scale,
            multipliers: mu.iter().copied().collect(),
        }
    }

    /// Damped Newton correction, accepted when it cuts the residual by 10% without
    /// raising the energy beyond the `1e-12` relative slack of the descent steps.
    fn newton(
        &self,
        u: &State,
        g: &State,
        active: &[Vec<bool>],
        energy: f64,
        residual: f64,
    ) -> Option<(nehari::Projection, f64)> {
        let free: Vec<Vec<bool>> = active
            .iter()
            .zip(self.supports)
            .map(|(act, sup)| {
                act.iter()
                    .enumerate()
                    .map(|(k, a)| !a && sup.contains(&k))
                    .collect()
            })
            .collect();
        let delta = newton_increment(self.model, u, g, &free)?;
        let mut damping = 1.0;
        for _ in 0..3 {
            let mut trial = u.axpy(damping, &delta).positive_part();
            mask_state(&mut trial, self.supports);
            let inter = Interactions::compute(self.model, &trial);
            if let Ok(next) = nehari::project_with(self.model, &trial, &inter) {
                let e = next.energy(self.model);
                let gn = self.masked_gradient(&next.state);
                let r = self
                    .stationarity(&next.state, &gn, &next.interactions)
                    .residual;
                if r < 0.9 * residual && e <= energy + 1e-12 * energy.abs() {
                    return Some((next, e));
                }
            }
            damping *= 0.5;
        }
        None
    }

    fn direction(&self, u: &State, g: &State) -> State {
        let model = self.model;
        let p = model.p();
        let d = model.d();
        let points = PointValues::new(u, p);
        let values = (0..d)
            .map(|i| {
                let ui = u.component(i).values();
                let floor = 1e-10 * u.component(i).max_abs();
                let competitive = (0..d).any(|j| model.beta(i, j) < 0.0);
                // competitive force split off as a positive potential so that the
                // preconditioned step keeps the iterate nonnegative
                let potential: Option<Vec<f64>> = competitive.then(|| {
                    let force = points.weighted(i, |j| (-model.beta(i, j)).max(0.0));
                    self.grid
                        .scatter_cells(&force)
                        .iter()
                        .zip(ui)
                        .map(|(f, x)| {
                            if *f == 0.0 {
                                0.0
                            } else {
                                (f / x.abs().max(floor)).min(1e30)
                            }
                        })
                        .collect()
                });
                let sol = self.grid.solve_shifted(
                    model.lambda(i),
                    potential.as_deref(),
                    g.component(i).values(),
                    self.supports[i].clone(),
                );
                sol.into_iter().map(|x| -x).collect()
            })
            .collect();
        State::from_values(self.grid, values).expect("grid length")
    }
}

struct SeedRun {
    projection: nehari::Projection,
    stationarity: Stationarity,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Zeroes the entries of `s` flagged in `active`.
fn clear_active(s: &mut State, active: &[Vec<bool>]) {
    for (i, act) in active.iter().enumerate() {
        for (v, a) in s.component_mut(i).values_mut().iter_mut().zip(act) {
            if *a {
                *v = 0.0;
            }
        }
    }
}

/// Nodes where `u_i = 0` and the gradient points out of the cone; `with_flat` also
/// includes nodes with vanishing gradient.
fn active_set(u: &State, g: &State, with_flat: bool) -> Vec<Vec<bool>> {
    u.components()
        .iter()
        .zip(g.components())
        .map(|(c, gc)| {
            c.values()
                .iter()
                .zip(gc.values())
                .map(|(x, y)| *x == 0.0 && (*y > 0.0 || (with_flat && *y == 0.0)))
                .collect()
        })
        .collect()
}

/// Quasi-Newton iterations to wait after a rejected Newton correction.
const NEWTON_PAUSE: usize = 10;

struct Pair {
    s: State,
    y: State,
    rho: f64,
}

/// Preconditioned L-BFGS on the Nehari-projected energy `u ↦ J(N(u))` over the
/// nonnegative cone. At a projected state the gradient of the reduced functional is
/// `∇J`, and it is orthogonal to the group scalings, so steps are taken in the full
/// space and projected back.
fn run_seed(problem: &Problem, cfg: &SolveConfig, mut start: State) -> Result<SeedRun> {
    let model = problem.model;
    mask_state(&mut start, problem.supports);
    let mut proj = nehari::nehari_project(model, &start)?;
    let mut energy = proj.energy(model);
    let mut history = vec![energy];
    let mut eta = cfg.step_size;
    let mut iterations = 0;
    let mut converged = false;
    let mut stationarity;
    let mut memory: Vec<Pair> = Vec::new();
    let mut previous: Option<(State, State)> = None;
    let mut newton_pause = 0;
    loop {
        let g = problem.masked_gradient(&proj.state);
        stationarity = problem.stationarity(&proj.state, &g, &proj.interactions);
        if stationarity.residual <= cfg.grad_tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        if stationarity.residual < cfg.newton_switch && newton_pause == 0 {
            let fixed = active_set(&proj.state, &g, true);
            match problem.newton(&proj.state, &g, &fixed, energy, stationarity.residual) {
                Some((next, e)) => {
                    proj = next;
                    energy = e;
                    history.push(e);
                    iterations += 1;
                    memory.clear();
                    previous = None;
                    continue;
                }
                None => newton_pause = NEWTON_PAUSE,
            }
        }
        newton_pause = newton_pause.saturating_sub(1);
        let active = active_set(&proj.state, &g, false);
        let mut gf = g;
        clear_active(&mut gf, &active);
        if let Some((xp, gp)) = previous.take() {
            let s = proj.state.axpy(-1.0, &xp);
            let y = gf.axpy(-1.0, &gp);
            let sy = s.dot(&y);
            if cfg.memory > 0 && sy > 1e-12 * (s.dot(&s) * y.dot(&y)).sqrt() {
                if memory.len() == cfg.memory {
                    memory.remove(0);
                }
                memory.push(Pair {
                    s,
                    y,
                    rho: 1.0 / sy,
                });
            }
        }
        let plain = |u: &State| {
            let mut d = problem.direction(u, &gf);
            clear_active(&mut d, &active);
            d
        };
        let mut dir = if memory.is_empty() {
            plain(&proj.state)
        } else {
            let mut q = gf.clone();
            let mut alphas = Vec::with_capacity(memory.len());
            for pair in memory.iter().rev() {
                let a = pair.rho * pair.s.dot(&q);
                q = q.axpy(-a, &pair.y);
                alphas.push(a);
            }
            // the preconditioner returns −P⁻¹q
            let mut r = problem.direction(&proj.state, &q).scaled(-1.0);
            for (pair, a) in memory.iter().zip(alphas.iter().rev()) {
                let b = pair.rho * pair.y.dot(&r);
                r = r.axpy(a - b, &pair.s);
            }
            let mut d = r.scaled(-1.0);
            clear_active(&mut d, &active);
            d
        };
        if !memory.is_empty() && !(gf.dot(&dir) < 0.0) {
            memory.clear();
            dir = plain(&proj.state);
        }
        let quasi_newton = !memory.is_empty();
        let mut step = if quasi_newton { cfg.step_size } else { eta };
        let mut accepted = None;
        while step >= 1e-14 {
            let mut trial = proj.state.axpy(step, &dir).positive_part();
            mask_state(&mut trial, problem.supports);
            let decrease = gf.dot(&trial.axpy(-1.0, &proj.state));
            let inter = Interactions::compute(model, &trial);
            if let Ok(next) = nehari::project_with(model, &trial, &inter) {
                let e = next.energy(model);
                if e <= energy + 1e-4 * decrease.min(0.0) + 1e-12 * energy.abs() {
                    accepted = Some((next, e));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, e)) = accepted else {
            if quasi_newton {
                memory.clear();
                continue;
            }
            // no admissible step: the iterate is stationary to rounding
            break;
        };
        if !quasi_newton {
            eta = (2.0 * step).min(cfg.step_size);
        }
        previous = Some((std::mem::replace(&mut proj, next).state, gf));
        energy = e;
        history.push(e);
        iterations += 1;
    }
    Ok(SeedRun {
        projection: proj,
        stationarity,
        iterations,
        converged,
        history,
    })
}

fn finish(
    model: &SystemModel,
    run: SeedRun,
    seed_id: usize,
    seed_energies: Vec<Option<f64>>,
) -> SolveResult {
    let report = run.projection.report(model);
    SolveResult {
        energy: run.projection.energy(model),
        component_masses: run.projection.interactions.component_masses(),
        state: run.projection.state,
        multiplier_estimates: run.stationarity.multipliers,
        grad_residual: run.stationarity.residual,
        iterations: run.iterations,
        seed_id,
        converged: run.converged,
        report,
        energy_history: run.history,
        seed_energies,
    }
}

/// Minimizes from every configured seed, restricted to per-component node supports
/// (components vanish outside them), and returns the lowest-energy run; energies within
/// `1e-10` relative go to the lower seed index.
pub fn minimize_on(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    supports: &[Range<usize>],
) -> Result<SolveResult> {
    cfg.validate()?;
    if supports.len() != model.d() {
        return Err(Error::Mismatch(format!(
            "{} supports for {} components",
            supports.len(),
            model.d()
        )));
    }
    let problem = Problem {
        model,
        grid,
        supports,
    };
    let runs: Vec<Result<SeedRun>> = cfg.execution.map(&cfg.seeds, |_, desc| {
        let start = seed_state(desc, model, grid)?;
        run_seed(&problem, cfg, start)
    });
    let seed_energies: Vec<Option<f64>> = runs
        .iter()
        .map(|r| r.as_ref().ok().map(|s| s.projection.energy(model)))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in seed_energies.iter().enumerate() {
        if let Some(e) = *e {
            let better = match best {
                None => true,
                Some((_, be)) => e < be - 1e-10 * be.abs(),
            };
            if better {
                best = Some((i, e));
            }
        }
    }
    let mut runs = runs;
    match best {
        Some((i, _)) => {
            let run = runs.swap_remove(i).expect("selected seed succeeded");
            Ok(finish(model, run, i, seed_energies))
        }
        None => {
            let first = runs.into_iter().find_map(|r| r.err());
            Err(Error::Solver(format!(
                "every seed failed; first error: {}",
                first.map_or_else(|| "none".into(), |e| e.to_string())
            )))
        }
    }
}

pub fn minimize(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    minimize_on(model, grid, cfg, &full_supports(grid, model.d()))
}

/// Continues the iteration from a given state (warm start or resume); the result has
/// seed index 0 and the seed list of `cfg` is ignored.
pub fn minimize_from(
    model: &SystemModel,
    cfg: &SolveConfig,
    initial: &State,
    supports: Option<&[Range<usize>]>,
) -> Result<SolveResult> {
    let grid = Arc::clone(initial.grid());
    let full = full_supports(&grid, model.d());
    let supports = supports.unwrap_or(&full);
    if supports.len() != model.d() || initial.d() != model.d() {
        return Err(Error::Mismatch(
            "initial state, supports and model disagree".into(),
        ));
    }
    let problem = Problem {
        model,
        grid: &grid,
        supports,
    };
    let run = run_seed(&problem, cfg, initial.clone())?;
    let e = run.projection.energy(model);
    Ok(finish(model, run, 0, vec![Some(e)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{energy_j, interaction_matrices};
    use crate::model::Decomposition;

    fn grid(cells: usize) -> Arc<RadialGrid> {
        RadialGrid::shared(5, 1.0, cells).unwrap()
    }

    #[test]
    fn seeds_are_nonnegative_and_disjoint() {
        let g = grid(200);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let m = SystemModel::new(5, vec![-5.0, -5.0], b, Decomposition::singletons(2)).unwrap();
        for profile in [SeedProfile::Bubble, SeedProfile::Eigenfunction] {
            let u = seed_state(&SeedDescriptor::annuli(vec![1, 0], profile), &m, &g).unwrap();
            assert!(u.is_nonnegative());
            let r = interaction_matrices(&m, &u);
            assert_eq!(r.interaction_matrix[(0, 1)], 0.0);
            let c = seed_state(&SeedDescriptor::centered(profile), &m, &g).unwrap();
            for comp in c.components() {
                let half = g.interior_len() / 2;
                assert!(comp.values()[..half].iter().all(|v| *v > 0.0));
            }
        }
        let bad = SeedDescriptor::annuli(vec![0, 0], SeedProfile::Bubble);
        assert!(matches!(seed_state(&bad, &m, &g), Err(Error::Geometry(_))));
    }

    #[test]
    fn config_validation() {
        let cfg = SolveConfig::default();
        assert!(cfg.validate().is_err());
        let m = SystemModel::scalar(5, -5.0, 1.0).unwrap();
        assert!(SolveConfig::for_model(&m).validate().is_ok());
    }

    #[test]
    fn scalar_ground_state_converges() {
        let g = grid(400);
        let (l1, _) = g.principal_eigenvalue().unwrap();
        let m = SystemModel::scalar(5, -0.5 * l1, 1.0).unwrap();
        let cfg = SolveConfig {
            execution: Execution::Sequential,
            ..SolveConfig::for_model(&m)
        };
        let res = minimize(&m, &g, &cfg).unwrap();
        assert!(res.converged, "residual {}", res.grad_residual);
        assert!(res.state.is_nonnegative());
        assert!((res.energy - energy_j(&m, &res.state)).abs() < 1e-10 * res.energy);
        assert!((res.energy - res.report.nehari_energy).abs() < 1e-8 * res.energy);
        for w in res.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        assert!(res.multiplier_estimates[0].abs() < 1e-5);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let g = grid(200);
        let (l1, _) = g.principal_eigenvalue().unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -2.0, 1.0]);
        let m = SystemModel::new(
            5,
            vec![-0.5 * l1, -0.3 * l1],
            b,
            Decomposition::singletons(2),
        )
        .unwrap();
        let base = SolveConfig::for_model(&m);
        let seq = minimize(
            &m,
            &g,
            &SolveConfig {
                execution: Execution::Sequential,
                ..base.clone()
            },
        )
        .unwrap();
        let par = minimize(
            &m,
            &g,
            &SolveConfig {
                execution: Execution::Parallel,
                ..base
            },
        )
        .unwrap();
        assert_eq!(seq.energy.to_bits(), par.energy.to_bits());
        assert_eq!(seq.seed_id, par.seed_id);
        assert_eq!(seq.iterations, par.iterations);
    }

    #[test]
    fn supports_are_respected() {
        let g = grid(200);
        let m = SystemModel::scalar(5, -5.0, 1.0).unwrap();
        let cfg = SolveConfig {
            execution: Execution::Sequential,
            ..SolveConfig::for_model(&m)
        };
        let res = minimize_on(&m, &g, &cfg, std::slice::from_ref(&(50..200))).unwrap();
        assert!(res.state.component(0).values()[..50]
            .iter()
            .all(|v| *v == 0.0));
        assert!(res.energy > 0.0);
    }
}
