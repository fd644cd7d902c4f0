use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use critsys::energy::{constraints_psi, energy_j, State};
use critsys::experiments::measure::support_coverage;
use critsys::experiments::sweep::validate_schedule;
use critsys::experiments::{records_from_csv, records_to_csv, Start, SweepRecord};
use critsys::grid::{Field, RadialGrid};
use critsys::io::{state_from_str, state_to_string};
use critsys::model::{Decomposition, SystemModel};
use critsys::nehari::nehari_project;

const DIM: usize = 5;

fn grid(cells: usize) -> Arc<RadialGrid> {
    RadialGrid::shared(DIM, 1.0, cells).unwrap()
}

fn bump(grid: &Arc<RadialGrid>, a: f64, c: f64, w: f64) -> Field {
    Field::from_fn(Arc::clone(grid), |r| {
        a * (1.0 - r * r) * (-((r - c) / w).powi(2)).exp()
    })
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scatter_is_adjoint_of_interpolation(
        cells in 4usize..60,
        v in prop::collection::vec(-2.0..2.0f64, 60),
        f in prop::collection::vec(-2.0..2.0f64, 60 * 4),
    ) {
        let g = grid(cells);
        let v = &v[..cells];
        let points = g.interpolate_cells(v).len();
        let f = &f[..points];
        let lhs = g.integrate_cells(&f.iter().zip(g.interpolate_cells(v)).map(|(a, b)| a * b).collect::<Vec<_>>());
        let s = g.scatter_cells(f);
        let rhs: f64 = s.iter().zip(v).zip(g.quad_weights()).map(|((a, b), w)| a * b * w).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn dirichlet_form_is_symmetric_and_nonnegative(
        a in prop::collection::vec(-1.0..1.0f64, 40),
        b in prop::collection::vec(-1.0..1.0f64, 40),
    ) {
        let g = grid(40);
        let ab = g.dirichlet_form(&a, &b);
        prop_assert!((ab - g.dirichlet_form(&b, &a)).abs() <= 1e-12 * (1.0 + ab.abs()));
        prop_assert!(g.dirichlet_form(&a, &a) >= 0.0);
    }

    #[test]
    fn nehari_projection_lands_on_the_constraints(
        a in 0.2..3.0f64, b in 0.2..3.0f64,
        c1 in 0.0..0.3f64, c2 in 0.4..0.7f64,
        beta in -3.0..-0.05f64,
        lf in -0.8..0.0f64,
    ) {
        let g = grid(200);
        let (l1, _) = g.principal_eigenvalue().unwrap();
        let betas = DMatrix::from_row_slice(2, 2, &[1.0, beta, beta, 1.0]);
        let model = SystemModel::new(DIM, vec![lf * l1; 2], betas, Decomposition::singletons(2)).unwrap();
        let u = State::new(vec![bump(&g, a, c1, 0.2), bump(&g, b, c2, 0.15)]).unwrap();
        // strong overlap can leave the Nehari set empty along the ray; that is an error, not a wrong answer
        if let Ok(proj) = nehari_project(&model, &u) {
            let norm = proj.interactions.group_norms(model.decomposition());
            for (psi, n) in constraints_psi(&model, &proj.state).iter().zip(&norm) {
                prop_assert!(psi.abs() <= 1e-10 * n.max(1.0));
            }
            let j = energy_j(&model, &proj.state);
            prop_assert!(j > 0.0);
            prop_assert!((j - proj.energy(&model)).abs() <= 1e-12 * j);
            let again = nehari_project(&model, &proj.state).unwrap();
            for t in &again.scales {
                prop_assert!((t - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn record_csv_round_trip(
        point in 0usize..1000,
        parameter in finite(),
        values in prop::collection::vec(finite(), 0..5),
        extras in prop::collection::vec(("[a-z][a-z0-9_]{0,8}", finite()), 0..4),
        converged in any::<bool>(),
        warm in prop::option::of(finite()),
    ) {
        let mut r = SweepRecord::blank("sweep-infinity", point, parameter);
        r.beta_values = values.clone();
        r.overlaps = values.iter().map(|v| v.abs()).collect();
        r.energy_c = values.first().copied().unwrap_or(1.0);
        r.coverage = 0.5;
        r.grad_residual = 1e-9;
        r.converged = converged;
        r.start = Start::Warm;
        r.warm_energy = warm;
        for (k, v) in &extras {
            r.set_extra(k, *v);
        }
        let back = records_from_csv(&records_to_csv(std::slice::from_ref(&r))).unwrap();
        prop_assert_eq!(back, vec![r]);
    }

    #[test]
    fn state_text_round_trip(v in prop::collection::vec(finite(), 12)) {
        let g = grid(6);
        let u = State::from_values(&g, vec![v[..6].to_vec(), v[6..].to_vec()]).unwrap();
        let back = state_from_str(&state_to_string(&u)).unwrap();
        prop_assert_eq!(back.component(0).values(), u.component(0).values());
        prop_assert_eq!(back.component(1).values(), u.component(1).values());
    }

    #[test]
    fn coverage_is_a_fraction(
        a in prop::collection::vec(0.0..1.0f64, 30),
        b in prop::collection::vec(0.0..1.0f64, 30),
        threshold in 1e-8..0.5f64,
    ) {
        let g = grid(30);
        let u = State::from_values(&g, vec![a, b]).unwrap();
        let c = support_coverage(&u, threshold);
        prop_assert!((0.0..=1.0).contains(&c));
        let wider = support_coverage(&u, threshold / 2.0);
        prop_assert!(wider >= c - 1e-15);
    }

    #[test]
    fn schedules_validate_by_direction(mut v in prop::collection::vec(-1e3..-1e-3f64, 1..8)) {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v.dedup();
        prop_assert!(validate_schedule(&v, false).is_ok());
        if v.len() > 1 {
            prop_assert!(validate_schedule(&v, true).is_err());
        }
        v.reverse();
        prop_assert!(validate_schedule(&v, true).is_ok());
    }
}

#[test]
fn scalar_energy_scales_with_amplitude() {
    let g = grid(100);
    let model = SystemModel::scalar(DIM, 0.0, 1.0).unwrap();
    let u = State::new(vec![bump(&g, 1.0, 0.0, 0.4)]).unwrap();
    let proj = nehari_project(&model, &u).unwrap();
    let proj2 = nehari_project(&model, &u.scaled(7.0)).unwrap();
    let e = proj.energy(&model);
    assert!((e - proj2.energy(&model)).abs() <= 1e-12 * e);
}

#[test]
fn separated_pair_projects() {
    let g = grid(200);
    let betas = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -2.0, 1.0]);
    let model = SystemModel::new(DIM, vec![0.0; 2], betas, Decomposition::singletons(2)).unwrap();
    let u = State::new(vec![bump(&g, 1.0, 0.0, 0.2), bump(&g, 1.0, 0.65, 0.1)]).unwrap();
    let proj = nehari_project(&model, &u).unwrap();
    let norm = proj.interactions.group_norms(model.decomposition());
    for (psi, n) in constraints_psi(&model, &proj.state).iter().zip(&norm) {
        assert!(psi.abs() <= 1e-10 * n.max(1.0));
    }
}
