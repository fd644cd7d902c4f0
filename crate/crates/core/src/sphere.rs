//! Extrema of the coupling form `f(X) = Σ β_ij |x_i|^p |x_j|^p` on the unit sphere.
//!
//! `f` is even in every coordinate, so the search runs over the nonnegative orthant
//! only. Projected gradient steps (tangent step, clip to the orthant, renormalize) are
//! started from the corners, the barycenter, pairwise midpoints and, for up to three
//! coordinates, the best points of a coarse angular grid.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

pub fn coupling_form(block: &DMatrix<f64>, p: f64, x: &[f64]) -> f64 {
    let pw: Vec<f64> = x.iter().map(|v| v.abs().powf(p)).collect();
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += block[(i, j)] * pw[i] * pw[j];
        }
    }
    acc
}

fn form_gradient(block: &DMatrix<f64>, p: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let pw: Vec<f64> = x.iter().map(|v| v.abs().powf(p)).collect();
    (0..n)
        .map(|k| {
            let row: f64 = (0..n).map(|j| block[(k, j)] * pw[j]).sum();
            let dk = if x[k] == 0.0 { 0.0 } else { pw[k] / x[k] };
            2.0 * p * dk * row
        })
        .collect()
}

fn normalize(x: &mut [f64]) -> bool {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}

/// Projected gradient ascent of `sense·f` from `start`.
fn climb(block: &DMatrix<f64>, p: f64, sense: Sense, start: &[f64]) -> (Vec<f64>, f64) {
    let sign = match sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };
    let scale = block
        .iter()
        .fold(0.0_f64, |a, b| a.max(b.abs()))
        .max(f64::MIN_POSITIVE);
    let mut x = start.to_vec();
    normalize(&mut x);
    let mut value = sign * coupling_form(block, p, &x);
    let mut step = 0.5 / scale;
    for _ in 0..5000 {
        let g = form_gradient(block, p, &x);
        let radial: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        let tangent: Vec<f64> = g
            .iter()
            .zip(&x)
            .map(|(a, b)| sign * (a - radial * b))
            .collect();
        let mut improved = false;
        while step > 1e-16 / scale {
            let mut trial: Vec<f64> = x
                .iter()
                .zip(&tangent)
                .map(|(a, b)| (a + step * b).max(0.0))
                .collect();
            if normalize(&mut trial) {
                let tv = sign * coupling_form(block, p, &trial);
                if tv > value {
                    let moved = trial
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    x = trial;
                    value = tv;
                    improved = moved > 1e-15;
                    step *= 2.0;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, sign * value)
}

fn starts(n: usize, block: &DMatrix<f64>, p: f64, sense: Sense) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        out.push(e);
    }
    out.push(vec![1.0; n]);
    for i in 0..n {
        for j in i + 1..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e[j] = 1.0;
            out.push(e);
        }
    }
    if (2..=3).contains(&n) {
        let mut grid = angular_grid(n, 48);
        let sign = if sense == Sense::Max { -1.0 } else { 1.0 };
        grid.sort_by(|a, b| {
            let fa = sign * coupling_form(block, p, a);
            let fb = sign * coupling_form(block, p, b);
            fa.total_cmp(&fb)
        });
        out.extend(grid.into_iter().take(6));
    } else {
        // deterministic interior points for larger blocks
        for k in 1..=2 * n {
            out.push(
                (0..n)
                    .map(|i| 1.0 + ((i * 7 + k * 13) % 11) as f64 / 5.0)
                    .collect(),
            );
        }
    }
    out
}

/// Points of the nonnegative unit sphere on a uniform angular grid (n = 2 or 3).
pub(crate) fn angular_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut pts = Vec::new();
    match n {
        2 => {
            for a in 0..=steps {
                let t = half_pi * a as f64 / steps as f64;
                pts.push(vec![t.cos(), t.sin()]);
            }
        }
        3 => {
            for a in 0..=steps {
                let t = half_pi * a as f64 / steps as f64;
                for b in 0..=steps {
                    let s = half_pi * b as f64 / steps as f64;
                    pts.push(vec![t.cos(), t.sin() * s.cos(), t.sin() * s.sin()]);
                }
            }
        }
        _ => panic!("angular grid only for 2 or 3 coordinates"),
    }
    pts
}

/// Extremum of the coupling form on the nonnegative unit sphere: `(argument, value)`.
/// Ties between starts go to the earliest start.
pub fn extremum(block: &DMatrix<f64>, p: f64, sense: Sense) -> (Vec<f64>, f64) {
    let n = block.nrows();
    assert!(n > 0 && block.ncols() == n, "square block required");
    if n == 1 {
        return (vec![1.0], block[(0, 0)]);
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts(n, block, p, sense) {
        let (x, v) = climb(block, p, sense, &s);
        let better = match &best {
            None => true,
            Some((_, bv)) => match sense {
                Sense::Max => v > *bv,
                Sense::Min => v < *bv,
            },
        };
        if better {
            best = Some((x, v));
        }
    }
    best.expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coordinate() {
        let b = DMatrix::from_element(1, 1, 2.5);
        assert_eq!(extremum(&b, 1.5, Sense::Max), (vec![1.0], 2.5));
    }

    #[test]
    fn diagonal_block_max_at_corner() {
        // p > 1: x^{2p} + y^{2p} is maximal at the corners
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let (_, v) = extremum(&b, 5.0 / 3.0, Sense::Max);
        assert!((v - 1.0).abs() < 1e-12);
        let (x, v) = extremum(&b, 5.0 / 3.0, Sense::Min);
        assert!((x[0] - x[1]).abs() < 1e-6);
        assert!((v - 2.0 * 0.5_f64.powf(5.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn homogeneity() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
        let p = 5.0 / 3.0;
        let x = [0.3, 0.7];
        let x2 = [0.6, 1.4];
        let ratio = coupling_form(&b, p, &x2) / coupling_form(&b, p, &x);
        assert!((ratio - 2f64.powf(2.0 * p)).abs() < 1e-10);
    }
}
