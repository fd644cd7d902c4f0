//! Whole-space limit quantities: Aubin–Talenti bubbles, the Sobolev quotient, the
//! sphere maximization `f_max`, the limit levels `l_h`, and cutoff-bubble test states
//! giving upper bounds for the least energy on a ball.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::energy::State;
use crate::error::{Error, Result};
use crate::grid::{unit_sphere_area, Field, RadialGrid};
use crate::model::SystemModel;
use crate::nehari;
use crate::sphere::{self, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleSpec {
    pub dim: usize,
    pub sigma: f64,
    /// Radius of the shell the profile is centred on; `0` is the genuine bubble
    /// `U_{σ,0}`, positive values give the shell profile `U_σ(|r − c|)`.
    pub center_offset: f64,
}

/// `(N(N−2))^{(N−2)/4}`.
fn bubble_constant(dim: usize) -> f64 {
    let n = dim as f64;
    (n * (n - 2.0)).powf((n - 2.0) / 4.0)
}

/// `U_{σ,0}(r) = (N(N−2))^{(N−2)/4} (σ/(σ² + r²))^{(N−2)/2}`.
pub fn bubble(dim: usize, sigma: f64, r: f64) -> f64 {
    let n = dim as f64;
    bubble_constant(dim) * (sigma / (sigma * sigma + r * r)).powf((n - 2.0) / 2.0)
}

/// `U'(r)`.
pub fn bubble_derivative(dim: usize, sigma: f64, r: f64) -> f64 {
    let n = dim as f64;
    -(n - 2.0) * r / (sigma * sigma + r * r) * bubble(dim, sigma, r)
}

/// Samples of the bubble (or shell profile) at the interior nodes of `grid`; the profile
/// is not truncated at `r = R`.
pub fn bubble_field(spec: &BubbleSpec, grid: &Arc<RadialGrid>) -> Result<Field> {
    if spec.dim != grid.dim() {
        return Err(Error::Mismatch(format!(
            "bubble dimension {} on a grid of dimension {}",
            spec.dim,
            grid.dim()
        )));
    }
    if !(spec.sigma > 0.0) {
        return Err(Error::InvalidModel(format!(
            "bubble sigma {} must be positive",
            spec.sigma
        )));
    }
    let c = spec.center_offset;
    Ok(Field::from_fn(Arc::clone(grid), |r| {
        bubble(spec.dim, spec.sigma, (r - c).abs())
    }))
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    (a, fa): (f64, f64),
    (m, fm): (f64, f64),
    (b, fb): (f64, f64),
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
        return left + right + delta / 15.0;
    }
    adaptive_step(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1)
        + adaptive_step(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // split first so that a narrow peak is never missed by the initial samples
    const PIECES: usize = 64;
    let width = (b - a) / PIECES as f64;
    (0..PIECES)
        .map(|k| {
            let lo = a + width * k as f64;
            let hi = lo + width;
            let (flo, fhi) = (f(lo), f(hi));
            let (m, fm, whole) = simpson(&f, lo, flo, hi, fhi);
            adaptive_step(
                &f,
                (lo, flo),
                (m, fm),
                (hi, fhi),
                whole,
                tol / PIECES as f64,
                24,
            )
        })
        .sum()
}

/// `∫_R^∞ r^q (σ² + r²)^{−e} dr` by the binomial series in `(σ/r)²`; needs `R > σ` and
/// `2e − q > 1`.
fn power_tail(q: f64, e: f64, sigma: f64, r_cut: f64) -> f64 {
    let x = (sigma / r_cut).powi(2);
    let mut coeff = 1.0; // binom(−e, k)
    let mut xk = 1.0;
    let mut sum = 0.0;
    for k in 0..400 {
        let kf = k as f64;
        let expo = 2.0 * e + 2.0 * kf - q - 1.0;
        let term = coeff * xk / expo;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        coeff *= -(e + kf) / (kf + 1.0);
        xk *= x;
    }
    sum * r_cut.powf(q - 2.0 * e + 1.0)
}

/// Sobolev quotient `∫|∇U|² / (∫U^{2*})^{2/2*}` of the bubble with scale `sigma`,
/// adaptive quadrature on `[0, r_cut]` plus the exact power-law tail.
pub fn sobolev_quotient(dim: usize, sigma: f64, r_cut: f64) -> f64 {
    assert!(dim >= 3, "dimension must be at least 3");
    assert!(
        r_cut > 2.0 * sigma,
        "cut radius must exceed twice the bubble scale"
    );
    let n = dim as f64;
    let two_star = 2.0 * n / (n - 2.0);
    let omega = unit_sphere_area(dim);
    let c = bubble_constant(dim);
    let grad_core = adaptive_simpson(
        |r| bubble_derivative(dim, sigma, r).powi(2) * r.powf(n - 1.0),
        0.0,
        r_cut,
        1e-15,
    );
    let pow_core = adaptive_simpson(
        |r| bubble(dim, sigma, r).powf(two_star) * r.powf(n - 1.0),
        0.0,
        r_cut,
        1e-15,
    );
    // U'(r)² r^{N−1} = c²(N−2)²σ^{N−2} r^{N+1}(σ²+r²)^{−N};  U^{2*} r^{N−1} = c^{2*}σ^N r^{N−1}(σ²+r²)^{−N}
    let grad_tail =
        c * c * (n - 2.0).powi(2) * sigma.powf(n - 2.0) * power_tail(n + 1.0, n, sigma, r_cut);
    let pow_tail = c.powf(two_star) * sigma.powf(n) * power_tail(n - 1.0, n, sigma, r_cut);
    let grad = omega * (grad_core + grad_tail);
    let pow = omega * (pow_core + pow_tail);
    grad / pow.powf(2.0 / two_star)
}

/// The best Sobolev constant `𝒮` in `ℝ^N`.
pub fn sobolev_constant(dim: usize) -> f64 {
    sobolev_quotient(dim, 1.0, 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMaximizer {
    /// Unit maximizer on the nonnegative sphere.
    pub x0: Vec<f64>,
    pub fmax: f64,
}

/// `max_{|X|=1} Σ β_ij |x_i|^p |x_j|^p` over a group block.
pub fn group_fmax(block: &DMatrix<f64>, p: f64) -> GroupMaximizer {
    let (x0, fmax) = sphere::extremum(block, p, Sense::Max);
    GroupMaximizer { x0, fmax }
}

/// `l_h = (1/N) f_max^{−(N−2)/2} 𝒮^{N/2}` with a precomputed Sobolev constant.
pub fn limit_level_with(block: &DMatrix<f64>, dim: usize, sobolev: f64) -> f64 {
    let n = dim as f64;
    let p = n / (n - 2.0);
    let fmax = group_fmax(block, p).fmax;
    fmax.powf(-(n - 2.0) / 2.0) * sobolev.powf(n / 2.0) / n
}

pub fn limit_level(block: &DMatrix<f64>, dim: usize) -> f64 {
    limit_level_with(block, dim, sobolev_constant(dim))
}

/// Limit levels of every group of `model`.
pub fn limit_levels(model: &SystemModel) -> Vec<f64> {
    let s = sobolev_constant(model.dim());
    (0..model.m())
        .map(|h| limit_level_with(&model.group_block(h), model.dim(), s))
        .collect()
}

/// Radial cutoff: `1` for `s ≤ 1/2`, quintic smoothstep down to `0` at `s = 1`.
pub fn cutoff(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let x = 2.0 * (s - 0.5);
        (1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)).max(0.0)
    }
}

/// Equal-measure radial supports `r_k = R (k/m)^{1/N}` for `m` groups, each shrunk by
/// 5% of its width on both sides (the first keeps its inner end at the origin).
pub fn equal_measure_supports(m: usize, radius: f64, dim: usize) -> Vec<(f64, f64)> {
    let edge = |k: usize| radius * (k as f64 / m as f64).powf(1.0 / dim as f64);
    (0..m)
        .map(|k| {
            let (a, b) = (edge(k), edge(k + 1));
            let guard = 0.05 * (b - a);
            let lo = if k == 0 { 0.0 } else { a + guard };
            (lo, b - guard)
        })
        .collect()
}

/// Radial profile of one group in the upper-bound test state: a centred bubble cut off
/// inside `[0, b]` for the first support, a shell profile centred mid-annulus otherwise.
fn cutoff_profile(dim: usize, eps: f64, support: (f64, f64), r: f64) -> f64 {
    let (a, b) = support;
    if a == 0.0 {
        bubble(dim, eps, r) * cutoff(r / b)
    } else {
        let c = 0.5 * (a + b);
        let w = 0.5 * (b - a);
        let s = (r - c).abs();
        bubble(dim, eps, s) * cutoff(s / w)
    }
}

/// The cutoff-bubble state: group `h` is `X0_h · profile_h` on the `h`-th equal-measure
/// support, with `X0_h` the `f_max` maximizer of the group block.
pub fn upper_bound_state(model: &SystemModel, grid: &Arc<RadialGrid>, eps: f64) -> Result<State> {
    if model.dim() != grid.dim() {
        return Err(Error::Mismatch("model and grid dimensions differ".into()));
    }
    let m = model.m();
    let supports = equal_measure_supports(m, grid.radius(), grid.dim());
    let h = grid.spacing();
    for (k, &(a, b)) in supports.iter().enumerate() {
        let half_width = if a == 0.0 { b } else { 0.5 * (b - a) };
        if !(eps > 0.0) || eps >= half_width {
            return Err(Error::Geometry(format!(
                "eps {eps} does not fit support {} of half-width {half_width}",
                k + 1
            )));
        }
        if b - a < 8.0 * h {
            return Err(Error::Geometry(format!(
                "support {} spans fewer than 8 grid cells",
                k + 1
            )));
        }
    }
    let p = model.p();
    let dec = model.decomposition();
    let mut components = Vec::with_capacity(model.d());
    for (g, range) in dec.groups().enumerate() {
        let x0 = group_fmax(&model.group_block(g), p).x0;
        for (slot, _) in range.enumerate() {
            let weight = x0[slot];
            let support = supports[g];
            components.push(Field::from_fn(Arc::clone(grid), |r| {
                weight * cutoff_profile(grid.dim(), eps, support, r)
            }));
        }
    }
    // maximizers may put zero weight on a component; such groups are still nonzero
    State::new(components)
}

/// `max_t J(t · cutoff-bubble state)`, an upper bound for the least energy `c`.
pub fn estimate_upper_bound(model: &SystemModel, grid: &Arc<RadialGrid>, eps: f64) -> Result<f64> {
    let u = upper_bound_state(model, grid, eps)?;
    Ok(nehari::segmented_max(model, &u)?.energy(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::gamma_half;
    use crate::model::Decomposition;

    fn closed_form_sobolev(dim: usize) -> f64 {
        let n = dim as f64;
        std::f64::consts::PI * n * (n - 2.0) * (gamma_half(dim) / gamma_half(2 * dim)).powf(2.0 / n)
    }

    /// Trapezoid rule on `θ ∈ [0, π/2]` after `r = tan θ`, Richardson-extrapolated.
    fn richardson_sobolev(dim: usize) -> f64 {
        let n = dim as f64;
        let c = bubble_constant(dim);
        let two_star = 2.0 * n / (n - 2.0);
        let grad =
            |t: f64| (n - 2.0).powi(2) * c * c * t.sin().powf(n + 1.0) * t.cos().powf(n - 3.0);
        let pow = |t: f64| c.powf(two_star) * t.sin().powf(n - 1.0) * t.cos().powf(n - 1.0);
        let trap = |f: &dyn Fn(f64) -> f64, k: usize| {
            let h = std::f64::consts::FRAC_PI_2 / k as f64;
            let inner: f64 = (1..k).map(|i| f(i as f64 * h)).sum();
            h * (inner + 0.5 * (f(0.0) + f(std::f64::consts::FRAC_PI_2)))
        };
        let romberg = |f: &dyn Fn(f64) -> f64| {
            let mut table = vec![trap(f, 8)];
            let mut k = 8;
            for _ in 0..6 {
                k *= 2;
                let mut row = vec![trap(f, k)];
                for (j, prev) in table.iter().enumerate() {
                    let factor = 4f64.powi(j as i32 + 1);
                    let v = (factor * row[j] - prev) / (factor - 1.0);
                    row.push(v);
                }
                table = row;
            }
            *table.last().unwrap()
        };
        let omega = unit_sphere_area(dim);
        omega * romberg(&grad) / (omega * romberg(&pow)).powf(2.0 / two_star)
    }

    #[test]
    fn bubble_value_at_origin() {
        assert!((bubble(5, 1.0, 0.0) - 15f64.powf(0.75)).abs() < 1e-12);
        assert!((bubble(5, 1.0, 0.0) - 7.6219).abs() < 1e-4);
    }

    #[test]
    fn bubble_decay_ratio() {
        for sigma in [0.5, 1.0] {
            let ratio = bubble(5, sigma, 10.0 * sigma) / bubble(5, sigma, 20.0 * sigma);
            assert!((ratio / 8.0 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn bubble_field_checks() {
        let g = RadialGrid::shared(5, 1.0, 50).unwrap();
        let spec = BubbleSpec {
            dim: 4,
            sigma: 1.0,
            center_offset: 0.0,
        };
        assert!(bubble_field(&spec, &g).is_err());
        let spec = BubbleSpec {
            dim: 5,
            sigma: 0.3,
            center_offset: 0.0,
        };
        let f = bubble_field(&spec, &g).unwrap();
        assert!((f.values()[0] - bubble(5, 0.3, 0.0)).abs() < 1e-14);
    }

    #[test]
    fn sobolev_matches_closed_form_and_extrapolation() {
        for dim in [3, 4, 5, 6] {
            let s = sobolev_constant(dim);
            let exact = closed_form_sobolev(dim);
            assert!((s / exact - 1.0).abs() < 1e-9, "N={dim}: {s} vs {exact}");
        }
        for dim in [4, 5] {
            let s = sobolev_constant(dim);
            let rich = richardson_sobolev(dim);
            assert!((s / rich - 1.0).abs() < 1e-5, "N={dim}: {s} vs {rich}");
        }
        assert!((sobolev_constant(5) - 14.82).abs() < 0.01);
    }

    #[test]
    fn sobolev_cut_and_scale_consistency() {
        let a = sobolev_quotient(5, 1.0, 10.0);
        let b = sobolev_quotient(5, 1.0, 20.0);
        let c = sobolev_quotient(5, 2.0, 20.0);
        assert!((a / b - 1.0).abs() < 1e-6);
        assert!((a / c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn power_tail_against_quadrature() {
        let direct = adaptive_simpson(
            |r| r.powf(4.0) * (1.0 + r * r).powf(-5.0),
            3.0,
            400.0,
            1e-16,
        ) + 400f64.powf(-5.0) / 5.0;
        let series = power_tail(4.0, 5.0, 1.0, 3.0);
        assert!((direct / series - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fmax_two_by_two_dense_scan() {
        let p = 5.0 / 3.0;
        for (mu, beta) in [(1.0, 0.0), (1.0, 0.3), (1.0, 2.0), (2.0, 0.7)] {
            let block = DMatrix::from_row_slice(2, 2, &[mu, beta, beta, mu]);
            let got = group_fmax(&block, p);
            let scan = (0..=100_000)
                .map(|k| {
                    let t = std::f64::consts::FRAC_PI_2 * k as f64 / 100_000.0;
                    sphere::coupling_form(&block, p, &[t.cos(), t.sin()])
                })
                .fold(f64::MIN, f64::max);
            assert!((got.fmax - scan).abs() < 1e-6, "mu={mu}, beta={beta}");
            assert!(got.fmax >= mu);
            let norm: f64 = got.x0.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_level_scaling() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let s = sobolev_constant(5);
        assert!((limit_level(&one, 5) - s.powf(2.5) / 5.0).abs() < 1e-10);
        let block = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.5]);
        let scaled = &block * 4.0;
        let ratio = limit_level(&scaled, 5) / limit_level(&block, 5);
        assert!((ratio - 4f64.powf(-1.5)).abs() < 1e-9);
        let stronger = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.5]);
        assert!(limit_level(&stronger, 5) < limit_level(&block, 5));
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.2), 1.0);
        assert_eq!(cutoff(1.3), 0.0);
        assert!((cutoff(0.75) - 0.5).abs() < 1e-15);
        // C² at both joins
        let h = 1e-6;
        assert!((cutoff(0.5 + h) - 1.0).abs() < 1e-15);
        assert!(cutoff(1.0 - h) < 1e-15);
    }

    #[test]
    fn supports_have_equal_measure_before_guards() {
        let s = equal_measure_supports(3, 1.0, 5);
        assert_eq!(s[0].0, 0.0);
        for w in s.windows(2) {
            assert!(w[0].1 < w[1].0);
        }
        assert!(s[2].1 < 1.0);
    }

    #[test]
    fn upper_bound_ignores_cross_coupling() {
        let g = RadialGrid::shared(5, 1.0, 400).unwrap();
        let (l1, _) = g.principal_eigenvalue().unwrap();
        let build = |b12: f64| {
            let b = DMatrix::from_row_slice(2, 2, &[1.0, b12, b12, 1.0]);
            SystemModel::new(
                5,
                vec![-0.5 * l1, -0.5 * l1],
                b,
                Decomposition::singletons(2),
            )
            .unwrap()
        };
        let a = estimate_upper_bound(&build(0.0), &g, 0.05).unwrap();
        let b = estimate_upper_bound(&build(-10.0), &g, 0.05).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn upper_bound_geometry_errors() {
        let g = RadialGrid::shared(5, 1.0, 400).unwrap();
        let m = SystemModel::scalar(5, -5.0, 1.0).unwrap();
        assert!(matches!(
            estimate_upper_bound(&m, &g, 2.0),
            Err(Error::Geometry(_))
        ));
        assert!(matches!(
            estimate_upper_bound(&m, &g, 0.0),
            Err(Error::Geometry(_))
        ));
    }
}
