//! Newton correction for the discrete Euler–Lagrange system `∇J(u) = 0`.
//!
//! In nodal coordinates the Hessian of `J` is block tridiagonal, with one `d × d` block
//! per node and per edge, so a step costs one block-Thomas sweep. Variables outside the
//! free set are held fixed.

use nalgebra::{DMatrix, DVector};

use crate::energy::{PointValues, State};
use crate::grid::GAUSS;
use crate::model::SystemModel;

/// `∂F_i/∂v_j` for `F_i = |v_i|^{p−2} v_i Σ_l β_il |v_l|^p` at one point.
fn point_jacobian(model: &SystemModel, points: &PointValues, q: usize) -> DMatrix<f64> {
    let d = model.d();
    let p = model.p();
    let v: Vec<f64> = (0..d).map(|i| points.values[i][q]).collect();
    let a: Vec<f64> = (0..d).map(|i| points.pows[i][q]).collect();
    let s: Vec<f64> = (0..d)
        .map(|i| if v[i] == 0.0 { 0.0 } else { a[i] / v[i] })
        .collect();
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            let mut own = p * model.beta(i, i) * s[i] * s[i];
            if v[i] != 0.0 {
                let coupling: f64 = (0..d).map(|l| model.beta(i, l) * a[l]).sum();
                own += (p - 1.0) * a[i] / (v[i] * v[i]) * coupling;
            }
            own
        } else {
            p * model.beta(i, j) * s[i] * s[j]
        }
    })
}

/// Newton increment `δ` solving `Hess J(u) δ = −∇J(u)` on the free variables
/// (`free[i][k]`), or `None` when a pivot block is singular.
pub(crate) fn newton_increment(
    model: &SystemModel,
    u: &State,
    gradient: &State,
    free: &[Vec<bool>],
) -> Option<State> {
    let grid = u.grid();
    let d = model.d();
    let n = grid.interior_len();
    let cond = grid.conductances();
    let weights = grid.quad_weights();
    let mut diag: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let left = if k == 0 { 0.0 } else { cond[k - 1] };
            DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    left + cond[k] + weights[k] * model.lambda(i)
                } else {
                    0.0
                }
            })
        })
        .collect();
    // off[k] couples node k (rows) with node k + 1 (columns)
    let mut off: Vec<DMatrix<f64>> = (0..n.saturating_sub(1))
        .map(|k| DMatrix::from_diagonal_element(d, d, -cond[k]))
        .collect();
    let points = PointValues::new(u, model.p());
    for (k, cell) in grid.cell_weights().iter().enumerate() {
        for (q, (xi, _)) in GAUSS.iter().enumerate() {
            let jac = point_jacobian(model, &points, k * GAUSS.len() + q);
            let w = cell[q];
            let (fa, fb) = (1.0 - xi, *xi);
            diag[k] -= &jac * (w * fa * fa);
            if k + 1 < n {
                diag[k + 1] -= &jac * (w * fb * fb);
                off[k] -= &jac * (w * fa * fb);
            }
        }
    }
    let mut rhs: Vec<DVector<f64>> = (0..n)
        .map(|k| DVector::from_fn(d, |i, _| -weights[k] * gradient.component(i).values()[k]))
        .collect();
    for (i, fr) in free.iter().enumerate() {
        for k in (0..n).filter(|&k| !fr[k]) {
            diag[k].row_mut(i).fill(0.0);
            diag[k].column_mut(i).fill(0.0);
            diag[k][(i, i)] = 1.0;
            rhs[k][i] = 0.0;
            if k + 1 < n {
                off[k].row_mut(i).fill(0.0);
            }
            if k > 0 {
                off[k - 1].column_mut(i).fill(0.0);
            }
        }
    }
    // block Thomas: S_k = D_k − U_{k−1}ᵀ S_{k−1}⁻¹ U_{k−1}
    let mut inv_s: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    let mut y: Vec<DVector<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let (s, b) = if k == 0 {
            (diag[0].clone(), rhs[0].clone())
        } else {
            let lower = off[k - 1].transpose();
            let t = &lower * &inv_s[k - 1];
            (&diag[k] - &t * &off[k - 1], &rhs[k] - &t * &y[k - 1])
        };
        let inv = s.try_inverse()?;
        y.push(b);
        inv_s.push(inv);
    }
    let mut x: Vec<DVector<f64>> = vec![DVector::zeros(d); n];
    for k in (0..n).rev() {
        let mut b = y[k].clone();
        if k + 1 < n {
            b -= &off[k] * &x[k + 1];
        }
        x[k] = &inv_s[k] * b;
    }
    if x.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
        return None;
    }
    let values = (0..d).map(|i| x.iter().map(|v| v[i]).collect()).collect();
    State::from_values(grid, values).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::gradient_j;
    use crate::grid::RadialGrid;
    use crate::model::Decomposition;

    #[test]
    fn increment_matches_finite_difference_hessian() {
        let grid = RadialGrid::shared(5, 1.0, 40).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.7, -0.7, 2.0]);
        let model = SystemModel::new(5, vec![-3.0, 1.0], b, Decomposition::singletons(2)).unwrap();
        let u = State::from_values(
            &grid,
            vec![
                grid.nodes()[..40]
                    .iter()
                    .map(|r| 2.0 * (1.0 - r * r) + 0.3)
                    .collect(),
                grid.nodes()[..40]
                    .iter()
                    .map(|r| (3.0 * r).sin().abs() + 0.1)
                    .collect(),
            ],
        )
        .unwrap();
        let g = gradient_j(&model, &u);
        let free = vec![vec![true; 40]; 2];
        let delta = newton_increment(&model, &u, &g, &free).unwrap();
        // H δ ≈ −g by a directional difference of the gradient
        let t = 1e-6;
        let gp = gradient_j(&model, &u.axpy(t, &delta));
        let gm = gradient_j(&model, &u.axpy(-t, &delta));
        for i in 0..2 {
            for k in 0..40 {
                let hd = (gp.component(i).values()[k] - gm.component(i).values()[k]) / (2.0 * t);
                let target = -g.component(i).values()[k];
                assert!(
                    (hd - target).abs() <= 1e-5 * (1.0 + target.abs()),
                    "{i} {k}: {hd} vs {target}"
                );
            }
        }
    }
}
