//! The functional `J`, its gradient, the group constraints `Ψ_h` and the interaction
//! matrices `M_B` and `B̃`.
//!
//! Quadratic terms use the grid's Dirichlet form and node weights; the coupling
//! integrals `∫|u_i|^p|u_j|^p` use the Gauss rule on the piecewise-linear interpolant.
//! The gradient is the representative with respect to the weighted nodal inner product,
//! so `⟨∇J(u), v⟩_quad` is the exact directional derivative of the discrete `J`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid};
use crate::model::{Decomposition, SystemModel};

/// `|x|^p` with an exact zero at the origin and a multiplication fast path for `p = 2`.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

/// `|x|^{p−2}x` given `|x|^p`; zero at the origin.
#[inline]
fn signed_pow_from(x: f64, pow_p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        pow_p / x
    }
}

/// A `d`-tuple of fields on one grid.
#[derive(Debug, Clone)]
pub struct State {
    components: Vec<Field>,
}

impl State {
    pub fn new(components: Vec<Field>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Mismatch("state needs at least one component".into()))?;
        let grid = first.grid();
        if components
            .iter()
            .any(|c| !Arc::ptr_eq(c.grid(), grid) && **c.grid() != **grid)
        {
            return Err(Error::Mismatch(
                "state components live on different grids".into(),
            ));
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: &Arc<RadialGrid>, d: usize) -> Self {
        Self {
            components: (0..d).map(|_| Field::zeros(Arc::clone(grid))).collect(),
        }
    }

    pub fn from_values(grid: &Arc<RadialGrid>, values: Vec<Vec<f64>>) -> Result<Self> {
        let components = values
            .into_iter()
            .map(|v| Field::new(Arc::clone(grid), v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.components[0].grid()
    }

    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &Field {
        &self.components[i]
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn component_mut(&mut self, i: usize) -> &mut Field {
        &mut self.components[i]
    }

    pub fn abs(&self) -> Self {
        Self {
            components: self.components.iter().map(|c| c.map(f64::abs)).collect(),
        }
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scaled(t)).collect(),
        }
    }

    /// Componentwise `max(u, 0)`.
    pub fn positive_part(&self) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| c.map(|x| x.max(0.0)))
                .collect(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.components.iter().all(Field::is_nonnegative)
    }

    /// Multiplies the components of group `h` by `t[h]`.
    pub fn scale_groups(&self, dec: &Decomposition, t: &[f64]) -> Self {
        assert_eq!(t.len(), dec.m());
        let mut components = self.components.clone();
        for (h, range) in dec.groups().enumerate() {
            for c in &mut components[range] {
                *c = c.scaled(t[h]);
            }
        }
        Self { components }
    }

    /// Componentwise `self + step·dir`.
    pub fn axpy(&self, step: f64, dir: &State) -> Self {
        let components = self
            .components
            .iter()
            .zip(&dir.components)
            .map(|(a, b)| {
                let values = a
                    .values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| x + step * y)
                    .collect();
                Field::new(Arc::clone(a.grid()), values).expect("matching lengths")
            })
            .collect();
        Self { components }
    }

    /// Quadrature inner product summed over components.
    pub fn dot(&self, other: &State) -> f64 {
        let grid = self.grid();
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| grid.inner(a.values(), b.values()))
            .sum()
    }

    fn check_model(&self, model: &SystemModel) {
        assert_eq!(
            self.d(),
            model.d(),
            "state has {} components, model {}",
            self.d(),
            model.d()
        );
    }
}

/// `‖u‖²_λ = ∫ |∇u|² + λu²` on the discrete grid.
pub fn lambda_norm_sq(grid: &RadialGrid, values: &[f64], lambda: f64) -> f64 {
    grid.dirichlet_form(values, values) + lambda * grid.inner(values, values)
}

/// Per-component norms and pairwise interaction integrals of a state; every derived
/// quantity (energy, constraints, matrices) is assembled from these.
#[derive(Debug, Clone, PartialEq)]
pub struct Interactions {
    /// `‖u_i‖²_i`.
    pub norms: Vec<f64>,
    /// `P_ij = ∫ |u_i|^p |u_j|^p` (symmetric).
    pub pair: DMatrix<f64>,
    p: f64,
    dim: usize,
}

impl Interactions {
    pub fn compute(model: &SystemModel, u: &State) -> Self {
        u.check_model(model);
        let grid = u.grid();
        let p = model.p();
        let d = model.d();
        let norms = (0..d)
            .map(|i| lambda_norm_sq(grid, u.component(i).values(), model.lambda(i)))
            .collect();
        let points = PointValues::new(u, p);
        let mut pair = DMatrix::zeros(d, d);
        let mut prod = vec![0.0; points.pows[0].len()];
        for i in 0..d {
            for j in i..d {
                for ((x, a), b) in prod.iter_mut().zip(&points.pows[i]).zip(&points.pows[j]) {
                    *x = a * b;
                }
                let v = grid.integrate_cells(&prod);
                pair[(i, j)] = v;
                pair[(j, i)] = v;
            }
        }
        Self {
            norms,
            pair,
            p,
            dim: model.dim(),
        }
    }

    /// `‖u_h‖²_h = Σ_{i ∈ I_h} ‖u_i‖²_i`.
    pub fn group_norms(&self, dec: &Decomposition) -> Vec<f64> {
        dec.groups().map(|g| self.norms[g].iter().sum()).collect()
    }

    /// `M_B(u)_hk = Σ_{(i,j) ∈ I_h×I_k} β_ij P_ij`.
    pub fn interaction_matrix(&self, model: &SystemModel) -> DMatrix<f64> {
        let dec = model.decomposition();
        let m = dec.m();
        DMatrix::from_fn(m, m, |h, k| {
            let mut acc = 0.0;
            for i in dec.group(h) {
                for j in dec.group(k) {
                    acc += model.beta(i, j) * self.pair[(i, j)];
                }
            }
            acc
        })
    }

    pub fn energy(&self, model: &SystemModel) -> f64 {
        let quad: f64 = self.norms.iter().sum();
        let d = model.d();
        let mut inter = 0.0;
        for i in 0..d {
            for j in 0..d {
                inter += model.beta(i, j) * self.pair[(i, j)];
            }
        }
        0.5 * quad - inter / (2.0 * self.p)
    }

    /// `|u_i|²_{2p} = (∫|u_i|^{2p})^{1/p}`.
    pub fn component_masses(&self) -> Vec<f64> {
        (0..self.norms.len())
            .map(|i| self.pair[(i, i)].powf(1.0 / self.p))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The interactions of `u` rescaled groupwise by `t`, without re-integrating.
    pub fn scaled(&self, dec: &Decomposition, t: &[f64]) -> Self {
        let d = self.norms.len();
        let ti: Vec<f64> = (0..d).map(|i| t[dec.group_of(i)]).collect();
        let tp: Vec<f64> = ti.iter().map(|x| x.powf(self.p)).collect();
        Self {
            norms: self.norms.iter().zip(&ti).map(|(n, x)| n * x * x).collect(),
            pair: DMatrix::from_fn(d, d, |i, j| self.pair[(i, j)] * tp[i] * tp[j]),
            p: self.p,
            dim: self.dim,
        }
    }
}

pub fn energy_j(model: &SystemModel, u: &State) -> f64 {
    Interactions::compute(model, u).energy(model)
}

/// Component values and their `p`-th absolute powers at the Gauss points.
pub(crate) struct PointValues {
    pub values: Vec<Vec<f64>>,
    pub pows: Vec<Vec<f64>>,
}

impl PointValues {
    pub fn new(u: &State, p: f64) -> Self {
        let grid = u.grid();
        let values: Vec<Vec<f64>> = u
            .components()
            .iter()
            .map(|c| grid.interpolate_cells(c.values()))
            .collect();
        let pows = values
            .iter()
            .map(|v| v.iter().map(|&x| abs_pow(x, p)).collect())
            .collect();
        Self { values, pows }
    }

    /// `|v_i|^{p−2} v_i · Σ_j c_j |v_j|^p` at every point.
    pub fn weighted(&self, i: usize, coeffs: impl Fn(usize) -> f64) -> Vec<f64> {
        let d = self.values.len();
        let c: Vec<f64> = (0..d).map(coeffs).collect();
        (0..self.values[i].len())
            .map(|q| {
                let coupling: f64 = (0..d).map(|j| c[j] * self.pows[j][q]).sum();
                signed_pow_from(self.values[i][q], self.pows[i][q]) * coupling
            })
            .collect()
    }
}

/// Nodal representative of `|u_i|^{p−2}u_i Σ_j β_ij |u_j|^p` for every component.
fn nonlinear_terms(model: &SystemModel, u: &State) -> Vec<Vec<f64>> {
    let points = PointValues::new(u, model.p());
    (0..model.d())
        .map(|i| {
            u.grid()
                .scatter_cells(&points.weighted(i, |j| model.beta(i, j)))
        })
        .collect()
}

/// `−Δ_h u_i + λ_i u_i − |u_i|^{p−2}u_i Σ_j β_ij|u_j|^p` for each component.
pub fn gradient_j(model: &SystemModel, u: &State) -> State {
    u.check_model(model);
    let grid = u.grid();
    let nonlinear = nonlinear_terms(model, u);
    let components = (0..model.d())
        .map(|i| {
            let ui = u.component(i).values();
            let lap = grid.laplacian_interior(ui);
            let values = lap
                .iter()
                .zip(ui)
                .zip(&nonlinear[i])
                .map(|((l, x), nl)| -l + model.lambda(i) * x - nl)
                .collect();
            Field::new(Arc::clone(grid), values).expect("grid length")
        })
        .collect();
    State { components }
}

/// `Ψ_h(u) = ‖u_h‖²_h − Σ_k M_B(u)_hk`.
pub fn constraints_psi(model: &SystemModel, u: &State) -> Vec<f64> {
    let inter = Interactions::compute(model, u);
    psi_from(&inter, model)
}

fn psi_from(inter: &Interactions, model: &SystemModel) -> Vec<f64> {
    let norms = inter.group_norms(model.decomposition());
    let mb = inter.interaction_matrix(model);
    norms
        .iter()
        .enumerate()
        .map(|(h, n)| n - mb.row(h).sum())
        .collect()
}

/// Quadrature gradient of `Ψ_k`.
pub fn constraint_gradient(model: &SystemModel, u: &State, k: usize) -> State {
    u.check_model(model);
    let grid = u.grid();
    let dec = model.decomposition();
    let p = model.p();
    let d = model.d();
    let group = dec.group(k);
    let n = grid.interior_len();
    let points = PointValues::new(u, p);
    let components = (0..d)
        .map(|l| {
            let ul = u.component(l).values();
            let in_group = group.contains(&l);
            let linear = if in_group {
                let lap = grid.laplacian_interior(ul);
                lap.iter()
                    .zip(ul)
                    .map(|(a, x)| 2.0 * (-a + model.lambda(l) * x))
                    .collect()
            } else {
                vec![0.0; n]
            };
            let coupling = points.weighted(l, |j| {
                let mut c = if group.contains(&j) {
                    model.beta(j, l)
                } else {
                    0.0
                };
                if in_group {
                    c += model.beta(l, j);
                }
                c
            });
            let nonlinear = grid.scatter_cells(&coupling);
            let values = linear
                .iter()
                .zip(&nonlinear)
                .map(|(a, b)| a - p * b)
                .collect();
            Field::new(Arc::clone(grid), values).expect("grid length")
        })
        .collect();
    State { components }
}

/// Constraint residuals, interaction matrices and energy of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct NehariReport {
    pub group_norms: Vec<f64>,
    pub constraint_residuals: Vec<f64>,
    /// `M_B(u)`.
    pub interaction_matrix: DMatrix<f64>,
    /// `B̃`: `b_kk = (2p−2)M_kk + (p−2)Σ_{h≠k} M_kh`, `b_kh = p·M_kh`.
    pub dominance_matrix: DMatrix<f64>,
    pub energy: f64,
    /// `(1/N) Σ_h ‖u_h‖²_h`, equal to `J(u)` on the Nehari set.
    pub nehari_energy: f64,
    /// `b_kk − Σ_{h≠k} |b_kh|`.
    pub dominance_margins: Vec<f64>,
}

impl NehariReport {
    pub fn from_interactions(model: &SystemModel, inter: &Interactions) -> Self {
        let p = model.p();
        let m = model.m();
        let group_norms = inter.group_norms(model.decomposition());
        let mb = inter.interaction_matrix(model);
        let constraint_residuals = psi_from(inter, model);
        let bt = dominance_matrix(&mb, p);
        let dominance_margins = (0..m)
            .map(|k| {
                let off: f64 = (0..m).filter(|&h| h != k).map(|h| bt[(k, h)].abs()).sum();
                bt[(k, k)] - off
            })
            .collect();
        let nehari_energy = group_norms.iter().sum::<f64>() / model.dim() as f64;
        Self {
            group_norms,
            constraint_residuals,
            interaction_matrix: mb,
            dominance_matrix: bt,
            energy: inter.energy(model),
            nehari_energy,
            dominance_margins,
        }
    }

    /// Largest `|Ψ_h| / max(1, ‖u_h‖²_h)`.
    pub fn max_relative_residual(&self) -> f64 {
        self.constraint_residuals
            .iter()
            .zip(&self.group_norms)
            .map(|(r, n)| r.abs() / n.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// CSV header matching [`NehariReport::csv_row`]; matrices flattened column-major.
    pub fn csv_header(m: usize) -> String {
        let mut cols = vec!["energy".to_string(), "nehari_energy".to_string()];
        cols.extend((1..=m).map(|h| format!("norm_{h}")));
        cols.extend((1..=m).map(|h| format!("psi_{h}")));
        for prefix in ["mb", "bt"] {
            for c in 1..=m {
                for r in 1..=m {
                    cols.push(format!("{prefix}_{r}_{c}"));
                }
            }
        }
        cols.extend((1..=m).map(|h| format!("margin_{h}")));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut vals = vec![self.energy, self.nehari_energy];
        vals.extend(&self.group_norms);
        vals.extend(&self.constraint_residuals);
        vals.extend(self.interaction_matrix.iter());
        vals.extend(self.dominance_matrix.iter());
        vals.extend(&self.dominance_margins);
        vals.iter()
            .map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// `B̃` built from `M_B`.
pub fn dominance_matrix(mb: &DMatrix<f64>, p: f64) -> DMatrix<f64> {
    let m = mb.nrows();
    DMatrix::from_fn(m, m, |k, h| {
        if k == h {
            let off: f64 = (0..m).filter(|&j| j != k).map(|j| mb[(k, j)]).sum();
            (2.0 * p - 2.0) * mb[(k, k)] + (p - 2.0) * off
        } else {
            p * mb[(k, h)]
        }
    })
}

pub fn interaction_matrices(model: &SystemModel, u: &State) -> NehariReport {
    NehariReport::from_interactions(model, &Interactions::compute(model, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Decomposition;

    fn grid() -> Arc<RadialGrid> {
        RadialGrid::shared(5, 1.0, 200).unwrap()
    }

    fn bump(grid: &Arc<RadialGrid>, amp: f64, width: f64) -> Field {
        Field::from_fn(Arc::clone(grid), |r| {
            amp * (1.0 - r * r) * (-(r / width).powi(2)).exp()
        })
    }

    fn two_comp(beta12: f64, dec: Decomposition) -> SystemModel {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, beta12, beta12, 1.3]);
        SystemModel::new(5, vec![-4.0, -7.0], b, dec).unwrap()
    }

    #[test]
    fn zero_state() {
        let g = grid();
        let m = two_comp(-1.0, Decomposition::singletons(2));
        let u = State::zeros(&g, 2);
        assert_eq!(energy_j(&m, &u), 0.0);
        assert!(constraints_psi(&m, &u).iter().all(|v| *v == 0.0));
        let grad = gradient_j(&m, &u);
        assert!(grad.components().iter().all(|c| c.max_abs() == 0.0));
    }

    #[test]
    fn scalar_homogeneity() {
        let g = grid();
        let m = SystemModel::scalar(5, -5.0, 1.0).unwrap();
        let u = State::new(vec![bump(&g, 2.0, 0.4)]).unwrap();
        let inter = Interactions::compute(&m, &u);
        let n = inter.norms[0];
        let a = inter.pair[(0, 0)];
        let p = m.p();
        for t in [0.5, 1.0, 2.0] {
            let ut = State::new(vec![u.component(0).scaled(t)]).unwrap();
            let expected = t * t / 2.0 * n - t.powf(2.0 * p) / (2.0 * p) * a;
            let got = energy_j(&m, &ut);
            assert!(
                (got - expected).abs() < 1e-11 * expected.abs().max(1.0),
                "t={t}"
            );
        }
    }

    #[test]
    fn decoupled_energy_is_sum() {
        let g = grid();
        let m = two_comp(0.0, Decomposition::singletons(2));
        let u1 = bump(&g, 1.5, 0.3);
        let u2 = bump(&g, 0.7, 0.6);
        let both = energy_j(&m, &State::new(vec![u1.clone(), u2.clone()]).unwrap());
        let s1 = SystemModel::scalar(5, -4.0, 1.0).unwrap();
        let s2 = SystemModel::scalar(5, -7.0, 1.3).unwrap();
        let sum = energy_j(&s1, &State::new(vec![u1]).unwrap())
            + energy_j(&s2, &State::new(vec![u2]).unwrap());
        assert!((both - sum).abs() < 1e-12 * sum.abs());
    }

    #[test]
    fn psi_decouples() {
        let g = grid();
        let m = two_comp(0.0, Decomposition::singletons(2));
        let u = State::new(vec![bump(&g, 1.5, 0.3), bump(&g, 0.7, 0.6)]).unwrap();
        let v = State::new(vec![bump(&g, 1.5, 0.3), bump(&g, 3.0, 0.2)]).unwrap();
        let a = constraints_psi(&m, &u)[0];
        let b = constraints_psi(&m, &v)[0];
        assert!((a - b).abs() <= 1e-13 * a.abs());
    }

    #[test]
    fn interaction_matrix_symmetric_and_single_group() {
        let g = grid();
        let m = two_comp(-0.8, Decomposition::singletons(2));
        let u = State::new(vec![bump(&g, 1.5, 0.3), bump(&g, 0.7, 0.6)]).unwrap();
        let r = interaction_matrices(&m, &u);
        assert_eq!(r.interaction_matrix[(0, 1)], r.interaction_matrix[(1, 0)]);

        let single = two_comp(0.5, Decomposition::single(2));
        let r = interaction_matrices(&single, &u);
        let p = single.p();
        assert_eq!(r.dominance_matrix.nrows(), 1);
        assert!(
            (r.dominance_matrix[(0, 0)] - (2.0 * p - 2.0) * r.interaction_matrix[(0, 0)]).abs()
                < 1e-12
        );
    }

    #[test]
    fn sign_flip_invariance() {
        let g = grid();
        let m = two_comp(-0.8, Decomposition::singletons(2));
        let u = State::new(vec![bump(&g, 1.5, 0.3), bump(&g, -0.7, 0.6)]).unwrap();
        let a = energy_j(&m, &u);
        let b = energy_j(&m, &u.abs());
        assert!((a - b).abs() < 1e-13 * a.abs());
    }

    #[test]
    fn constraint_gradient_matches_finite_difference() {
        let g = grid();
        let m = two_comp(-0.8, Decomposition::singletons(2));
        let u = State::new(vec![bump(&g, 1.5, 0.3), bump(&g, 0.7, 0.6)]).unwrap();
        let v = State::new(vec![bump(&g, 0.3, 0.5), bump(&g, -0.2, 0.2)]).unwrap();
        let eps = 1e-5;
        for k in 0..2 {
            let grad = constraint_gradient(&m, &u, k);
            let analytic = grad.dot(&v);
            let plus = constraints_psi(&m, &u.axpy(eps, &v))[k];
            let minus = constraints_psi(&m, &u.axpy(-eps, &v))[k];
            let fd = (plus - minus) / (2.0 * eps);
            assert!(
                (fd - analytic).abs() < 1e-6 * analytic.abs(),
                "k={k}: {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn csv_header_and_row_have_same_width() {
        let g = grid();
        let m = two_comp(-0.8, Decomposition::singletons(2));
        let u = State::new(vec![bump(&g, 1.5, 0.3), bump(&g, 0.7, 0.6)]).unwrap();
        let r = interaction_matrices(&m, &u);
        let header = NehariReport::csv_header(2);
        assert_eq!(header.split(',').count(), r.csv_row().split(',').count());
        assert!(header.starts_with("energy,nehari_energy,norm_1,norm_2,psi_1"));
    }
}
