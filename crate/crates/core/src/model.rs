//! Structural data of the system: dimension, `λ`, couplings `β` and the grouping of the
//! components, together with the hypothesis checks.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::sphere::{self, Sense};

/// Partition of `{0, …, d−1}` into `m` consecutive groups given by breakpoints
/// `0 = a₀ < a₁ < … < a_m = d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    breakpoints: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Diagonal,
    /// Off-diagonal pair inside one group (𝒦₁).
    Within,
    /// Pair across two groups (𝒦₂).
    Cross,
}

impl Decomposition {
    pub fn new(breakpoints: Vec<usize>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints[0] != 0 {
            return Err(Error::InvalidModel(
                "breakpoints must start at 0 and contain at least one group".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self { breakpoints })
    }

    /// One group holding all `d` components.
    pub fn single(d: usize) -> Self {
        Self {
            breakpoints: vec![0, d],
        }
    }

    /// `m = d` singleton groups.
    pub fn singletons(d: usize) -> Self {
        Self {
            breakpoints: (0..=d).collect(),
        }
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breakpoints
    }

    pub fn d(&self) -> usize {
        *self.breakpoints.last().unwrap()
    }

    pub fn m(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn group(&self, h: usize) -> Range<usize> {
        self.breakpoints[h]..self.breakpoints[h + 1]
    }

    pub fn groups(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.m()).map(|h| self.group(h))
    }

    pub fn group_of(&self, i: usize) -> usize {
        assert!(i < self.d(), "component {i} out of range");
        self.breakpoints.partition_point(|&a| a <= i) - 1
    }

    pub fn pair_kind(&self, i: usize, j: usize) -> PairKind {
        if i == j {
            PairKind::Diagonal
        } else if self.group_of(i) == self.group_of(j) {
            PairKind::Within
        } else {
            PairKind::Cross
        }
    }

    /// Unordered cross-group pairs `(i, j)` with `i < j`.
    pub fn cross_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs_of(PairKind::Cross)
    }

    /// Unordered within-group off-diagonal pairs `(i, j)` with `i < j`.
    pub fn within_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs_of(PairKind::Within)
    }

    fn pairs_of(&self, kind: PairKind) -> Vec<(usize, usize)> {
        let d = self.d();
        let mut out = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                if self.pair_kind(i, j) == kind {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    dim: usize,
    lambdas: Vec<f64>,
    betas: DMatrix<f64>,
    decomposition: Decomposition,
}

impl SystemModel {
    /// Builds a model. Checks shapes, `N ≥ 4` and the symmetry of `β`; the sign
    /// hypotheses are reported by [`validate`], not enforced here, so that
    /// exploratory parameter sets can still be evaluated.
    pub fn new(
        dim: usize,
        lambdas: Vec<f64>,
        betas: DMatrix<f64>,
        decomposition: Decomposition,
    ) -> Result<Self> {
        let d = lambdas.len();
        if dim < 4 {
            return Err(Error::InvalidModel(format!("dimension {dim} < 4")));
        }
        if d == 0 || betas.nrows() != d || betas.ncols() != d {
            return Err(Error::InvalidModel(format!(
                "beta must be {d}×{d}, got {}×{}",
                betas.nrows(),
                betas.ncols()
            )));
        }
        if decomposition.d() != d {
            return Err(Error::InvalidModel(format!(
                "decomposition covers {} components, model has {d}",
                decomposition.d()
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if betas[(i, j)] != betas[(j, i)] {
                    return Err(Error::InvalidModel(format!(
                        "beta not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if lambdas.iter().chain(betas.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        Ok(Self {
            dim,
            lambdas,
            betas,
            decomposition,
        })
    }

    /// Scalar Brézis–Nirenberg model `−Δu + λu = μ|u|^{2*−2}u`.
    pub fn scalar(dim: usize, lambda: f64, mu: f64) -> Result<Self> {
        Self::new(
            dim,
            vec![lambda],
            DMatrix::from_element(1, 1, mu),
            Decomposition::single(1),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `p = N/(N−2)`.
    pub fn p(&self) -> f64 {
        self.dim as f64 / (self.dim as f64 - 2.0)
    }

    /// Critical exponent `2p = 2N/(N−2)`.
    pub fn two_p(&self) -> f64 {
        2.0 * self.dim as f64 / (self.dim as f64 - 2.0)
    }

    pub fn d(&self) -> usize {
        self.lambdas.len()
    }

    pub fn m(&self) -> usize {
        self.decomposition.m()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    pub fn betas(&self) -> &DMatrix<f64> {
        &self.betas
    }

    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.betas[(i, j)]
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    /// Sets `β_ij = β_ji = value`.
    pub fn with_beta(mut self, i: usize, j: usize, value: f64) -> Self {
        self.betas[(i, j)] = value;
        self.betas[(j, i)] = value;
        self
    }

    /// Sets every cross-group coupling to `value`.
    pub fn with_cross_coupling(mut self, value: f64) -> Self {
        for (i, j) in self.decomposition.cross_pairs() {
            self.betas[(i, j)] = value;
            self.betas[(j, i)] = value;
        }
        self
    }

    /// Multiplies every coupling by `factor`.
    pub fn with_scaled_betas(mut self, factor: f64) -> Self {
        self.betas *= factor;
        self
    }

    /// `(β_ij)_{i,j ∈ I_h}`.
    pub fn group_block(&self, h: usize) -> DMatrix<f64> {
        let g = self.decomposition.group(h);
        self.betas
            .view((g.start, g.start), (g.len(), g.len()))
            .into_owned()
    }

    /// The model restricted to the listed components (kept in order) with a new grouping.
    pub fn sub_model(&self, components: &[usize], decomposition: Decomposition) -> Result<Self> {
        let k = components.len();
        let lambdas = components.iter().map(|&i| self.lambdas[i]).collect();
        let betas = DMatrix::from_fn(k, k, |a, b| self.betas[(components[a], components[b])]);
        Self::new(self.dim, lambdas, betas, decomposition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H3Branch {
    /// All within-group couplings nonnegative.
    Cooperative,
    /// Group block positive definite.
    PositiveDefinite,
    /// Numerical copositivity of the coupling form.
    Copositive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupH3 {
    pub group: usize,
    pub branch: Option<H3Branch>,
    /// Minimum of `Σ β_ij x_i^p x_j^p` over the nonnegative unit sphere, when computed.
    pub sphere_minimum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub lambda1: f64,
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h3_groups: Vec<GroupH3>,
    pub h4: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.h1 && self.h2 && self.h3 && self.h4
    }

    /// First `H3` branch used per group, or `None` if the group failed.
    pub fn h3_branches(&self) -> Vec<Option<H3Branch>> {
        self.h3_groups.iter().map(|g| g.branch).collect()
    }
}

/// Tolerance factor for the copositivity branch, relative to `max |β|` of the block.
pub const COPOSITIVITY_TOL: f64 = 1e-8;

/// Checks (H1)–(H4) against the discrete principal eigenvalue of `grid`.
pub fn validate(
    model: &SystemModel,
    grid: &std::sync::Arc<RadialGrid>,
) -> Result<ValidationReport> {
    let (lambda1, _) = grid.principal_eigenvalue()?;
    Ok(validate_with_lambda1(model, lambda1))
}

pub fn validate_with_lambda1(model: &SystemModel, lambda1: f64) -> ValidationReport {
    let mut messages = Vec::new();
    let d = model.d();
    let dec = model.decomposition();

    let mut h1 = true;
    for (i, &l) in model.lambdas.iter().enumerate() {
        if !(-lambda1 < l && l < 0.0) {
            h1 = false;
            messages.push(format!(
                "H1: lambda_{} = {l} outside (-{lambda1}, 0)",
                i + 1
            ));
        }
    }

    let mut h2 = true;
    for i in 0..d {
        if model.beta(i, i) <= 0.0 {
            h2 = false;
            messages.push(format!(
                "H2: beta_{0}{0} = {1} not positive",
                i + 1,
                model.beta(i, i)
            ));
        }
    }

    let p = model.p();
    let h3_groups: Vec<GroupH3> = (0..model.m())
        .map(|h| {
            let block = model.group_block(h);
            let n = block.nrows();
            let cooperative = (0..n).all(|i| (0..n).all(|j| block[(i, j)] >= 0.0))
                && (0..n).all(|i| block[(i, i)] > 0.0);
            if cooperative {
                return GroupH3 {
                    group: h,
                    branch: Some(H3Branch::Cooperative),
                    sphere_minimum: None,
                };
            }
            if block.clone().cholesky().is_some() {
                return GroupH3 {
                    group: h,
                    branch: Some(H3Branch::PositiveDefinite),
                    sphere_minimum: None,
                };
            }
            let min = copositivity_minimum(&block, p);
            let scale = block.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            let branch = (min > COPOSITIVITY_TOL * scale).then_some(H3Branch::Copositive);
            GroupH3 {
                group: h,
                branch,
                sphere_minimum: Some(min),
            }
        })
        .collect();
    let h3 = h3_groups.iter().all(|g| g.branch.is_some());
    for g in h3_groups.iter().filter(|g| g.branch.is_none()) {
        messages.push(format!(
            "H3: group {} not copositive (sphere minimum {:e})",
            g.group + 1,
            g.sphere_minimum.unwrap_or(f64::NAN)
        ));
    }

    let mut h4 = true;
    for (i, j) in dec.cross_pairs() {
        if model.beta(i, j) > 0.0 {
            h4 = false;
            messages.push(format!(
                "H4: beta_{}{} = {} > 0",
                i + 1,
                j + 1,
                model.beta(i, j)
            ));
        }
    }

    ValidationReport {
        lambda1,
        h1,
        h2,
        h3,
        h3_groups,
        h4,
        messages,
    }
}

/// Minimum of `Σ β_ij x_i^p x_j^p` over the nonnegative unit sphere.
pub fn copositivity_minimum(block: &DMatrix<f64>, p: f64) -> f64 {
    sphere::extremum(block, p, Sense::Min).1
}

/// `C₁ = min_h (S / (d · max_{I_h²} β⁺_ij))^{1/(p−1)}`, the lower bound on
/// `Σ_{i∈I_h} |u_i|²_{2p}` over the Nehari set.
pub fn c1_lower_bound(model: &SystemModel, sobolev: f64) -> Result<f64> {
    if !(sobolev > 0.0) {
        return Err(Error::InvalidModel(format!(
            "Sobolev quotient {sobolev} must be positive"
        )));
    }
    let d = model.d() as f64;
    let expo = 1.0 / (model.p() - 1.0);
    let mut best = f64::INFINITY;
    for h in 0..model.m() {
        let block = model.group_block(h);
        let max_pos = block.iter().fold(0.0_f64, |a, b| a.max(*b));
        if max_pos <= 0.0 {
            return Err(Error::InfeasibleBound { group: h });
        }
        best = best.min((sobolev / (d * max_pos)).powf(expo));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, b, c])
    }

    #[test]
    fn decomposition_groups() {
        let dec = Decomposition::new(vec![0, 2, 3]).unwrap();
        assert_eq!(dec.m(), 2);
        assert_eq!(dec.group(0), 0..2);
        assert_eq!(dec.group_of(2), 1);
        assert_eq!(dec.pair_kind(0, 1), PairKind::Within);
        assert_eq!(dec.pair_kind(1, 2), PairKind::Cross);
        assert_eq!(dec.cross_pairs(), vec![(0, 2), (1, 2)]);
        assert_eq!(dec.within_pairs(), vec![(0, 1)]);
        assert!(Decomposition::new(vec![0, 2, 2]).is_err());
        assert!(Decomposition::new(vec![1, 2]).is_err());
    }

    #[test]
    fn pair_sets_partition_all_pairs() {
        let dec = Decomposition::new(vec![0, 1, 3, 6]).unwrap();
        let d = dec.d();
        let total = dec.cross_pairs().len() + dec.within_pairs().len();
        assert_eq!(total, d * (d - 1) / 2);
    }

    #[test]
    fn rejects_asymmetric_beta() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(SystemModel::new(5, vec![-1.0, -1.0], b, Decomposition::single(2)).is_err());
    }

    #[test]
    fn validate_diagonal_groups() {
        let lambda1 = 20.0;
        let m = SystemModel::new(
            5,
            vec![-0.5 * lambda1; 2],
            two_by_two(1.0, -1.0, 1.0),
            Decomposition::singletons(2),
        )
        .unwrap();
        let r = validate_with_lambda1(&m, lambda1);
        assert!(r.all_passed(), "{:?}", r.messages);
        assert_eq!(r.h3_branches(), vec![Some(H3Branch::Cooperative); 2]);
    }

    #[test]
    fn validate_positive_definite_branch() {
        let mut b = DMatrix::identity(3, 3);
        b[(0, 1)] = -0.1;
        b[(1, 0)] = -0.1;
        b[(0, 2)] = -0.5;
        b[(2, 0)] = -0.5;
        let m = SystemModel::new(
            5,
            vec![-1.0; 3],
            b,
            Decomposition::new(vec![0, 2, 3]).unwrap(),
        )
        .unwrap();
        let r = validate_with_lambda1(&m, 20.0);
        assert_eq!(r.h3_branches()[0], Some(H3Branch::PositiveDefinite));
        assert!(r.all_passed());
    }

    #[test]
    fn validate_copositivity_failure() {
        let m = SystemModel::new(
            5,
            vec![-1.0; 2],
            two_by_two(1.0, -2.0, 1.0),
            Decomposition::single(2),
        )
        .unwrap();
        let r = validate_with_lambda1(&m, 20.0);
        assert!(!r.h3);
        let min = r.h3_groups[0].sphere_minimum.unwrap();
        // at x = y = 2^{-1/2}: 2·2^{-p} − 4·2^{-p}
        let p = 5.0 / 3.0;
        assert!((min - (-2.0 * 0.5_f64.powf(p))).abs() < 1e-8, "{min}");
    }

    #[test]
    fn validate_copositive_but_indefinite() {
        // indefinite but copositive: negative products are dominated by the diagonal
        let b = two_by_two(1.0, -0.5, 1.0);
        // make it indefinite by augmenting to 3×3 with a large positive coupling
        let mut big = DMatrix::identity(3, 3);
        big.view_mut((0, 0), (2, 2)).copy_from(&b);
        big[(0, 2)] = 3.0;
        big[(2, 0)] = 3.0;
        assert!(big.clone().cholesky().is_none());
        let m = SystemModel::new(5, vec![-1.0; 3], big, Decomposition::single(3)).unwrap();
        let r = validate_with_lambda1(&m, 20.0);
        assert_eq!(r.h3_branches()[0], Some(H3Branch::Copositive));
    }

    #[test]
    fn validate_flags_h1_and_h4() {
        let m = SystemModel::new(
            5,
            vec![-30.0, 1.0],
            two_by_two(1.0, 0.5, 1.0),
            Decomposition::singletons(2),
        )
        .unwrap();
        let r = validate_with_lambda1(&m, 20.0);
        assert!(!r.h1);
        assert!(!r.h4);
        assert!(r.h2 && r.h3);
        assert_eq!(r.messages.len(), 3);
    }

    #[test]
    fn c1_single_equation() {
        let m = SystemModel::scalar(5, -1.0, 1.0).unwrap();
        let s = 14.0;
        let c1 = c1_lower_bound(&m, s).unwrap();
        assert!((c1 - s.powf(1.5)).abs() < 1e-9 * c1);
    }

    #[test]
    fn c1_two_components_one_group() {
        let m = SystemModel::new(
            5,
            vec![-1.0; 2],
            two_by_two(1.0, 3.0, 1.0),
            Decomposition::single(2),
        )
        .unwrap();
        let s = 12.5;
        let c1 = c1_lower_bound(&m, s).unwrap();
        assert!((c1 - (s / 6.0).powf(1.5)).abs() < 1e-12 * c1);
        let doubled = m.clone().with_scaled_betas(2.0);
        let c1d = c1_lower_bound(&doubled, s).unwrap();
        assert!((c1 / c1d - 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn c1_rejects_bad_inputs() {
        let m = SystemModel::scalar(5, -1.0, 1.0).unwrap();
        assert!(c1_lower_bound(&m, 0.0).is_err());
        let neg = SystemModel::scalar(5, -1.0, -1.0).unwrap();
        assert!(matches!(
            c1_lower_bound(&neg, 1.0),
            Err(Error::InfeasibleBound { group: 0 })
        ));
    }
}
