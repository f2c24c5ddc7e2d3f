//! Truncated-SVD principal component regression and subspace diagnostics.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to vector norms when normalizing residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Singular values below this fraction of the largest are numerically zero.
pub const RANK_TOL: f64 = 1e-12;

/// Thin SVD with singular values in descending order.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub singular_values: Vec<f64>,
    /// `rows x k` orthonormal columns.
    pub left: DMatrix<f64>,
    /// `cols x k` orthonormal columns.
    pub right: DMatrix<f64>,
}

impl SvdFactors {
    pub fn compute(m: &DMatrix<f64>) -> Self {
        let (r, c) = m.shape();
        let k = r.min(c);
        if k == 0 {
            return SvdFactors {
                singular_values: Vec::new(),
                left: DMatrix::zeros(r, 0),
                right: DMatrix::zeros(c, 0),
            };
        }
        let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
        match fm.thin_svd() {
            Ok(svd) => {
                let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
                SvdFactors {
                    singular_values: (0..k).map(|l| s[l]).collect(),
                    left: DMatrix::from_fn(r, k, |i, l| u[(i, l)]),
                    right: DMatrix::from_fn(c, k, |j, l| v[(j, l)]),
                }
            }
            Err(_) => {
                let svd = m.clone().svd(true, true);
                SvdFactors {
                    singular_values: svd.singular_values.iter().copied().collect(),
                    left: svd.u.expect("requested U"),
                    right: svd.v_t.expect("requested V^T").transpose(),
                }
            }
        }
    }

    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `RANK_TOL * tau_1`.
    pub fn numerical_rank(&self) -> usize {
        let cut = RANK_TOL * self.largest();
        self.singular_values.iter().filter(|&&t| t > cut).count()
    }

    /// `sum_{l <= rank} tau_l u_l v_l^T`.
    pub fn reconstruct(&self, rank: usize) -> DMatrix<f64> {
        let k = rank.min(self.singular_values.len());
        let mut out = DMatrix::zeros(self.left.nrows(), self.right.nrows());
        for l in 0..k {
            out += self.singular_values[l] * self.left.column(l) * self.right.column(l).transpose();
        }
        out
    }
}

/// How many singular directions the regression keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum RankRule {
    /// Exactly `λ` directions (clipped to the matrix shape).
    Fixed(usize),
    /// Smallest `λ` whose squared singular values reach this share of the total.
    Energy(f64),
    /// Keep every `τ_l >= δ τ_1`.
    Gap(f64),
}

impl Default for RankRule {
    fn default() -> Self {
        RankRule::Gap(0.1)
    }
}

/// Outcome of applying a [`RankRule`] to a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankChoice {
    pub rank: usize,
    /// A fixed rank larger than `min(rows, cols)` was requested.
    pub clipped: bool,
}

impl RankRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RankRule::Fixed(0) => Err(Error::Config("fixed rank must be >= 1".into())),
            RankRule::Energy(t) | RankRule::Gap(t) if !(t > 0.0 && t < 1.0) => Err(Error::Config(
                format!("rank rule parameter {t} must lie strictly in (0, 1)"),
            )),
            _ => Ok(()),
        }
    }

    /// Picks the retained rank for a descending spectrum. Numerically zero
    /// singular values are never retained.
    pub fn select(&self, singular_values: &[f64]) -> RankChoice {
        let full = singular_values.len();
        let tau1 = singular_values.first().copied().unwrap_or(0.0);
        let numerical = singular_values.iter().filter(|&&t| t > RANK_TOL * tau1).count();
        let (rank, clipped) = match *self {
            RankRule::Fixed(l) => (l.min(full), l > full),
            RankRule::Gap(delta) => (
                singular_values.iter().filter(|&&t| t >= delta * tau1).count(),
                false,
            ),
            RankRule::Energy(share) => {
                let total: f64 = singular_values.iter().map(|t| t * t).sum();
                let mut acc = 0.0;
                let mut k = full;
                for (l, t) in singular_values.iter().enumerate() {
                    acc += t * t;
                    if acc >= share * total {
                        k = l + 1;
                        break;
                    }
                }
                (k, false)
            }
        };
        RankChoice {
            rank: rank.min(numerical).max(1).min(full),
            clipped,
        }
    }
}

impl fmt::Display for RankRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankRule::Fixed(l) => write!(f, "fixed:{l}"),
            RankRule::Energy(t) => write!(f, "energy:{t}"),
            RankRule::Gap(d) => write!(f, "gap:{d}"),
        }
    }
}

impl FromStr for RankRule {
    type Err = Error;

    /// Parses `fixed:3`, `energy:0.95` or `gap:0.1`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("rank rule {s:?}: expected kind:value")))?;
        let bad = |_| Error::Config(format!("rank rule {s:?}: bad value"));
        let rule = match kind {
            "fixed" => RankRule::Fixed(value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?),
            "energy" => RankRule::Energy(value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?),
            "gap" => RankRule::Gap(value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?),
            _ => return Err(Error::Config(format!("unknown rank rule {kind:?}"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

/// Regression coefficients over the rows of `S` plus the rank actually used.
#[derive(Debug, Clone)]
pub struct BetaFit {
    pub beta: DVector<f64>,
    pub rank: RankChoice,
    pub factors: SvdFactors,
}

/// `β = Σ_{l ≤ λ} τ_l⁻¹ û_l v̂_lᵀ q`: the rank-λ pseudo-inverse of `Sᵀ` applied
/// to `q`, so that `Sᵀ β` is the projection of `q` onto the top-λ row space of `S`.
pub fn truncated_beta(s: &DMatrix<f64>, q: &DVector<f64>, rule: RankRule) -> Result<BetaFit> {
    if q.len() != s.ncols() {
        return Err(Error::Domain(format!(
            "q has length {}, S has {} columns",
            q.len(),
            s.ncols()
        )));
    }
    let factors = SvdFactors::compute(s);
    beta_from_factors(factors, q, rule)
}

pub(crate) fn beta_from_factors(factors: SvdFactors, q: &DVector<f64>, rule: RankRule) -> Result<BetaFit> {
    if !(factors.largest() > 0.0) {
        return Err(Error::Degenerate("anchor matrix is identically zero".into()));
    }
    let rank = rule.select(&factors.singular_values);
    let mut beta = DVector::zeros(factors.left.nrows());
    for l in 0..rank.rank {
        let coef = factors.right.column(l).dot(q) / factors.singular_values[l];
        beta.axpy(coef, &factors.left.column(l), 1.0);
    }
    Ok(BetaFit { beta, rank, factors })
}

/// Relative distance of `v` from the span of the first `k` orthonormal columns
/// of `basis`.
pub fn residual_onto_basis(v: &DVector<f64>, basis: &DMatrix<f64>, k: usize) -> f64 {
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let mut r = v.clone();
    for l in 0..k.min(basis.ncols()) {
        let c = basis.column(l);
        let coef = c.dot(v);
        r.axpy(-coef, &c, 1.0);
    }
    r.norm() / norm.max(RESIDUAL_FLOOR)
}

/// `‖v − P_col(M) v‖ / max(‖v‖, ε)`. Zero for the zero vector.
pub fn subspace_residual(v: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    assert_eq!(v.len(), m.nrows(), "dimension mismatch");
    let f = SvdFactors::compute(m);
    let k = f.numerical_rank();
    residual_onto_basis(v, &f.left, k)
}

/// `τ_1 / τ_min`, or `+∞` when `τ_min < 1e-12 τ_1`.
pub fn condition_number(s: &DMatrix<f64>) -> f64 {
    condition_from_spectrum(&SvdFactors::compute(s).singular_values)
}

pub fn condition_from_spectrum(singular_values: &[f64]) -> f64 {
    let tau1 = singular_values.first().copied().unwrap_or(0.0);
    let tau_min = singular_values.last().copied().unwrap_or(0.0);
    if !(tau1 > 0.0) || tau_min < RANK_TOL * tau1 {
        f64::INFINITY
    } else {
        tau1 / tau_min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn rank_one_hand_example() {
        let s = mat(2, 2, &[2.0, 2.0, 2.0, 2.0]);
        let fit = truncated_beta(&s, &DVector::from_vec(vec![3.0, 3.0]), RankRule::Fixed(1)).unwrap();
        assert_relative_eq!(fit.beta[0], 0.75, epsilon = 1e-12);
        assert_relative_eq!(fit.beta[1], 0.75, epsilon = 1e-12);
        assert_eq!(fit.rank.rank, 1);
        assert_relative_eq!(fit.factors.singular_values[0], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_passes_q_through() {
        let s = DMatrix::identity(2, 2);
        let fit = truncated_beta(&s, &DVector::from_vec(vec![-1.5, 7.0]), RankRule::Fixed(2)).unwrap();
        assert_relative_eq!(fit.beta[0], -1.5, epsilon = 1e-12);
        assert_relative_eq!(fit.beta[1], 7.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let s = DMatrix::zeros(3, 2);
        let err = truncated_beta(&s, &DVector::zeros(2), RankRule::Fixed(1)).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn oversized_fixed_rank_is_clipped() {
        let s = mat(2, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 1.0]);
        let fit = truncated_beta(&s, &DVector::from_vec(vec![1.0, 1.0, 3.0]), RankRule::Fixed(5)).unwrap();
        assert_eq!(fit.rank, RankChoice { rank: 2, clipped: true });
    }

    #[test]
    fn residual_examples() {
        let m = mat(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let col = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(subspace_residual(&col, &m) < 1e-12);
        let orth = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert_relative_eq!(subspace_residual(&orth, &m), 1.0, epsilon = 1e-12);
        // ‖0.1 e3‖ / ‖e1 + 0.1 e3‖ = 0.1 / sqrt(1.01)
        let mixed = &col + 0.1 * &orth;
        assert_relative_eq!(subspace_residual(&mixed, &m), 0.1 / 1.01f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(subspace_residual(&mixed, &m), 0.0995, epsilon = 1e-4);
        assert_eq!(subspace_residual(&DVector::zeros(3), &m), 0.0);
    }

    #[test]
    fn condition_examples() {
        assert_relative_eq!(condition_number(&mat(2, 2, &[1.0, 0.0, 0.0, 100.0])), 100.0, epsilon = 1e-10);
        assert_eq!(condition_number(&DMatrix::identity(2, 2)), 1.0);
        assert!(condition_number(&mat(2, 2, &[1.0, 1.0, 1.0, 1.0])).is_infinite());
    }

    #[test]
    fn rule_selection() {
        let tau = [10.0, 5.0, 0.5, 0.01];
        assert_eq!(RankRule::Gap(0.1).select(&tau).rank, 2);
        assert_eq!(RankRule::Gap(0.01).select(&tau).rank, 3);
        assert_eq!(RankRule::Gap(0.001).select(&tau).rank, 4);
        // squares: 100, 25, 0.25, 1e-4 → 125.25 total; 0.99 needs two.
        assert_eq!(RankRule::Energy(0.99).select(&tau).rank, 2);
        assert_eq!(RankRule::Energy(0.9999).select(&tau).rank, 3);
        assert_eq!(RankRule::Fixed(3).select(&tau).rank, 3);
        assert!(RankRule::Gap(1.0).validate().is_err());
        assert!(RankRule::Fixed(0).validate().is_err());
        assert_eq!("gap:0.1".parse::<RankRule>().unwrap(), RankRule::Gap(0.1));
        assert_eq!("fixed:3".parse::<RankRule>().unwrap(), RankRule::Fixed(3));
        assert!("median:2".parse::<RankRule>().is_err());
    }
}
