//! Modified low-rank thin-plate cubic splines on `[0, 1]`.
//!
//! A curve is `phi(t) = beta_0 + beta_1 t + sum_k beta_k (|t - knot_{k-1}|^3 - knot_{k-1}^3)`
//! for `k = 2..=K`, so `beta_0` is the value at `t = 0`. Priors are placed on
//! the whitened coefficients `b = (beta_0, beta_1, S beta_radial)` where `S` is
//! the SVD square root of the knot penalty matrix `Omega`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GmcError, Result};

const DOMAIN_TOL: f64 = 1e-12;
/// Largest accepted singular-value ratio of `Omega`.
pub const MAX_OMEGA_CONDITION: f64 = 1e12;

/// Knot placement rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Equal,
    Quantile,
}

impl std::str::FromStr for Spacing {
    type Err = GmcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Spacing::Equal),
            "quantile" => Ok(Spacing::Quantile),
            other => Err(GmcError::InvalidConfig(format!("unknown spacing `{other}`"))),
        }
    }
}

impl std::fmt::Display for Spacing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Spacing::Equal => "equal",
            Spacing::Quantile => "quantile",
        })
    }
}

/// Ordered knots `0 = knot_0 < ... < knot_K = 1` defining `K` intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    knots: Vec<f64>,
}

impl Partition {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        Self::checked(knots, 2)
    }

    /// Time-axis partition for hazard models; a single interval is allowed.
    pub fn hazard(knots: Vec<f64>) -> Result<Self> {
        Self::checked(knots, 1)
    }

    /// `K >= 1` equal-width hazard intervals.
    pub fn hazard_equal(intervals: usize) -> Result<Self> {
        if intervals < 1 {
            return Err(GmcError::DegeneratePartition("need at least 1 interval".into()));
        }
        let k = intervals as f64;
        let mut knots: Vec<f64> = (0..=intervals).map(|i| i as f64 / k).collect();
        knots[intervals] = 1.0;
        Self::hazard(knots)
    }

    fn checked(knots: Vec<f64>, min_intervals: usize) -> Result<Self> {
        if knots.len() < min_intervals + 1 {
            return Err(GmcError::DegeneratePartition(format!(
                "need at least {min_intervals} intervals, got {}",
                knots.len().saturating_sub(1)
            )));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(GmcError::DegeneratePartition(
                "knots must start at 0 and end at 1".into(),
            ));
        }
        if let Some(w) = knots.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(GmcError::DegeneratePartition(format!(
                "knots not strictly increasing near {} and {}",
                w[0], w[1]
            )));
        }
        Ok(Self { knots })
    }

    /// `K` equal-width intervals.
    pub fn equal(intervals: usize) -> Result<Self> {
        if intervals < 2 {
            return Err(GmcError::DegeneratePartition(format!(
                "need at least 2 intervals, got {intervals}"
            )));
        }
        let k = intervals as f64;
        let mut knots: Vec<f64> = (0..=intervals).map(|i| i as f64 / k).collect();
        knots[intervals] = 1.0;
        Self::new(knots)
    }

    /// Interior knots at the type-7 empirical quantiles `k/K` of `t`.
    pub fn quantile(intervals: usize, t: &[f64]) -> Result<Self> {
        if intervals < 2 {
            return Err(GmcError::DegeneratePartition(format!(
                "need at least 2 intervals, got {intervals}"
            )));
        }
        if t.is_empty() {
            return Err(GmcError::DegeneratePartition(
                "quantile spacing needs data".into(),
            ));
        }
        for &v in t {
            check_unit(v)?;
        }
        let mut sorted: Vec<f64> = t.iter().map(|&v| v.clamp(0.0, 1.0)).collect();
        sorted.sort_by(f64::total_cmp);
        let mut distinct: Vec<f64> = sorted.iter().copied().filter(|&v| v > 0.0).collect();
        distinct.dedup();
        if distinct.len() < intervals {
            return Err(GmcError::DegeneratePartition(format!(
                "{} distinct positive values cannot support {intervals} intervals",
                distinct.len()
            )));
        }
        let mut knots = Vec::with_capacity(intervals + 1);
        knots.push(0.0);
        for k in 1..intervals {
            knots.push(type7_quantile(&sorted, k as f64 / intervals as f64));
        }
        knots.push(1.0);
        Self::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of intervals `K`.
    pub fn intervals(&self) -> usize {
        self.knots.len() - 1
    }

    /// Interior knots `knot_1..knot_{K-1}`; these centre the radial terms.
    pub fn interior(&self) -> &[f64] {
        &self.knots[1..self.knots.len() - 1]
    }

    /// Index (0-based) of the right-closed interval `(knot_{j}, knot_{j+1}]`
    /// containing `t`. `t = 0` maps to the first interval.
    pub fn interval_of(&self, t: f64) -> usize {
        let k = self.intervals();
        // first j with t <= knot_{j+1}
        let idx = self.knots[1..].partition_point(|&knot| knot < t);
        idx.min(k - 1)
    }
}

/// Builds a partition with the requested spacing. `t` is only read for
/// quantile spacing.
pub fn build_partition(intervals: usize, spacing: Spacing, t: &[f64]) -> Result<Partition> {
    match spacing {
        Spacing::Equal => Partition::equal(intervals),
        Spacing::Quantile => Partition::quantile(intervals, t),
    }
}

/// Linear-interpolation quantile of sorted data (R type 7).
pub(crate) fn type7_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_unit(t: f64) -> Result<f64> {
    if !t.is_finite() || t < -DOMAIN_TOL || t > 1.0 + DOMAIN_TOL {
        return Err(GmcError::DomainError { value: t });
    }
    Ok(t.clamp(0.0, 1.0))
}

/// Raw-space spline coefficients `(beta_0, beta_1, beta_2..beta_K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCoefficients(pub Vec<f64>);

impl BasisCoefficients {
    pub fn new(beta: Vec<f64>, p: &Partition) -> Result<Self> {
        let expected = p.intervals() + 1;
        if beta.len() != expected {
            return Err(GmcError::DimensionMismatch {
                expected,
                actual: beta.len(),
            });
        }
        Ok(Self(beta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Basis row `(1, t, |t - knot_1|^3 - knot_1^3, ..., |t - knot_{K-1}|^3 - knot_{K-1}^3)`.
pub fn eval_basis(t: f64, p: &Partition) -> Result<Vec<f64>> {
    let t = check_unit(t)?;
    let mut row = Vec::with_capacity(p.intervals() + 1);
    row.push(1.0);
    row.push(t);
    row.extend(p.interior().iter().map(|&c| (t - c).abs().powi(3) - c.powi(3)));
    Ok(row)
}

/// Stacks [`eval_basis`] rows into an `n x (K+1)` matrix.
pub fn design_matrix(t: &[f64], p: &Partition) -> Result<DMatrix<f64>> {
    let cols = p.intervals() + 1;
    let mut x = DMatrix::zeros(t.len(), cols);
    for (i, &ti) in t.iter().enumerate() {
        let row = eval_basis(ti, p)?;
        for (j, v) in row.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    Ok(x)
}

/// `Omega` together with its SVD square root and inverse square root.
#[derive(Debug, Clone)]
pub struct OmegaFactor {
    pub omega: DMatrix<f64>,
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub condition: f64,
}

/// Factorizes `Omega[j,k] = |knot_{j-1} - knot_{k-1}|^3` (interior knots).
///
/// `Omega` has a zero diagonal and is indefinite, so the square root is
/// `U D^{1/2} V^T` from `Omega = U D V^T`.
pub fn omega_factor(p: &Partition) -> Result<OmegaFactor> {
    if p.intervals() < 2 {
        return Err(GmcError::DegeneratePartition(
            "a spline basis needs at least 2 intervals".into(),
        ));
    }
    let inner = p.interior();
    let m = inner.len();
    let omega = DMatrix::from_fn(m, m, |j, k| (inner[j] - inner[k]).abs().powi(3));
    let svd = omega.clone().svd(true, true);
    let d = &svd.singular_values;
    let max = d.max();
    let min = d.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition < MAX_OMEGA_CONDITION) {
        return Err(GmcError::SingularOmega { condition });
    }
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V^T").transpose();
    let half = DMatrix::from_diagonal(&d.map(f64::sqrt));
    let inv_half = DMatrix::from_diagonal(&d.map(|s| 1.0 / s.sqrt()));
    let sqrt = &u * &half * v.transpose();
    let inv_sqrt = &v * &inv_half * u.transpose();
    Ok(OmegaFactor {
        omega,
        sqrt,
        inv_sqrt,
        condition,
    })
}

fn check_len(len: usize, f: &OmegaFactor) -> Result<()> {
    let expected = f.sqrt.nrows() + 2;
    if len != expected {
        return Err(GmcError::DimensionMismatch {
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// `b = (beta_0, beta_1, sqrt * beta_radial)`.
pub fn to_b_space(beta: &BasisCoefficients, f: &OmegaFactor) -> Result<Vec<f64>> {
    check_len(beta.0.len(), f)?;
    let radial = DVector::from_column_slice(&beta.0[2..]);
    let mapped = &f.sqrt * radial;
    let mut b = vec![beta.0[0], beta.0[1]];
    b.extend(mapped.iter());
    Ok(b)
}

/// Inverse of [`to_b_space`].
pub fn from_b_space(b: &[f64], f: &OmegaFactor) -> Result<BasisCoefficients> {
    check_len(b.len(), f)?;
    let radial = DVector::from_column_slice(&b[2..]);
    let mapped = &f.inv_sqrt * radial;
    let mut beta = vec![b[0], b[1]];
    beta.extend(mapped.iter());
    Ok(BasisCoefficients(beta))
}

/// Row `r` with `r . beta` the first derivative of `phi(t; beta)`.
pub fn derivative_row(t: f64, p: &Partition) -> Result<Vec<f64>> {
    let t = check_unit(t)?;
    let mut row = Vec::with_capacity(p.intervals() + 1);
    row.push(0.0);
    row.push(1.0);
    row.extend(p.interior().iter().map(|&c| {
        let r = t - c;
        // sign(0) = 0 so the knot itself contributes nothing
        let s = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        };
        s * 3.0 * r * r
    }));
    Ok(row)
}

/// First derivative of `phi(t; beta)`.
pub fn eval_derivative(t: f64, p: &Partition, beta: &BasisCoefficients) -> Result<f64> {
    let k = p.intervals();
    if beta.0.len() != k + 1 {
        return Err(GmcError::DimensionMismatch {
            expected: k + 1,
            actual: beta.0.len(),
        });
    }
    let row = derivative_row(t, p)?;
    Ok(row.iter().zip(&beta.0).map(|(r, b)| r * b).sum())
}

/// A partition with its factorized penalty, evaluating curves directly
/// from whitened coefficients.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    pub partition: Partition,
    pub factor: OmegaFactor,
    /// `blockdiag(I_2, inv_sqrt)`; maps `b` to `beta`.
    to_beta: DMatrix<f64>,
}

impl SplineBasis {
    pub fn new(partition: Partition) -> Result<Self> {
        let factor = omega_factor(&partition)?;
        let n = partition.intervals() + 1;
        let mut to_beta = DMatrix::zeros(n, n);
        to_beta[(0, 0)] = 1.0;
        to_beta[(1, 1)] = 1.0;
        to_beta
            .view_mut((2, 2), (n - 2, n - 2))
            .copy_from(&factor.inv_sqrt);
        Ok(Self {
            partition,
            factor,
            to_beta,
        })
    }

    /// Number of coefficients, `K + 1`.
    pub fn dim(&self) -> usize {
        self.partition.intervals() + 1
    }

    /// Design matrix acting on whitened coefficients: `X * blockdiag(I, inv_sqrt)`.
    pub fn b_design(&self, t: &[f64]) -> Result<DMatrix<f64>> {
        Ok(design_matrix(t, &self.partition)? * &self.to_beta)
    }

    /// `blockdiag(I_2, inv_sqrt)`.
    pub fn whitening(&self) -> &DMatrix<f64> {
        &self.to_beta
    }

    pub fn to_beta(&self, b: &[f64]) -> Result<BasisCoefficients> {
        from_b_space(b, &self.factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k2() -> Partition {
        Partition::new(vec![0.0, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn equal_partition_knots() {
        let p = build_partition(4, Spacing::Equal, &[]).unwrap();
        assert_eq!(p.knots(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.intervals(), 4);
    }

    #[test]
    fn quantile_partition_needs_distinct_values() {
        let t = [0.2, 0.2, 0.8, 0.8];
        assert!(matches!(
            build_partition(3, Spacing::Quantile, &t),
            Err(GmcError::DegeneratePartition(_))
        ));
    }

    #[test]
    fn quantile_partition_uses_type7() {
        let t: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let p = build_partition(4, Spacing::Quantile, &t).unwrap();
        // h = 9 p -> 2.25, 4.5, 6.75 (0-based)
        let expect = [0.0, 0.325, 0.55, 0.775, 1.0];
        for (a, b) in p.knots().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn partition_rejects_bad_knots() {
        assert!(Partition::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Partition::new(vec![0.1, 0.5, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 1.0]).is_err());
        assert!(Partition::equal(1).is_err());
    }

    #[test]
    fn hazard_partition_allows_one_interval() {
        let p = Partition::hazard_equal(1).unwrap();
        assert_eq!(p.knots(), &[0.0, 1.0]);
        assert_eq!(p.interval_of(0.3), 0);
        assert!(Partition::hazard(vec![0.0, 0.3, 0.3, 1.0]).is_err());
        assert!(matches!(omega_factor(&p), Err(GmcError::DegeneratePartition(_))));
    }

    #[test]
    fn interval_lookup_is_right_closed() {
        let p = Partition::equal(4).unwrap();
        assert_eq!(p.interval_of(0.0), 0);
        assert_eq!(p.interval_of(0.25), 0);
        assert_eq!(p.interval_of(0.2500001), 1);
        assert_eq!(p.interval_of(1.0), 3);
    }

    #[test]
    fn basis_hand_values() {
        let p = k2();
        assert_eq!(eval_basis(0.0, &p).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(eval_basis(1.0, &p).unwrap(), vec![1.0, 1.0, 0.0]);
        assert_eq!(eval_basis(0.5, &p).unwrap(), vec![1.0, 0.5, -0.125]);
        assert!(matches!(
            eval_basis(1.1, &p),
            Err(GmcError::DomainError { .. })
        ));
        assert!(eval_basis(1.0 + 1e-13, &p).is_ok());
    }

    #[test]
    fn basis_at_zero_is_unit_intercept() {
        for k in 2..12 {
            let p = Partition::equal(k).unwrap();
            let row = eval_basis(0.0, &p).unwrap();
            assert_eq!(row[0], 1.0);
            assert!(row[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn design_matrix_rows() {
        let p = k2();
        let x = design_matrix(&[0.0, 1.0], &p).unwrap();
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
        assert_eq!(x.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 0.0]);
        let same = design_matrix(&[0.0, 0.0], &Partition::equal(5).unwrap()).unwrap();
        assert_eq!(same.row(0), same.row(1));
        let empty = design_matrix(&[], &p).unwrap();
        assert_eq!(empty.shape(), (0, 3));
    }

    #[test]
    fn omega_k3_hand_case() {
        let p = Partition::new(vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]).unwrap();
        let f = omega_factor(&p).unwrap();
        let a = 1.0 / 27.0;
        assert_abs_diff_eq!(f.omega[(0, 0)], 0.0);
        assert_abs_diff_eq!(f.omega[(1, 1)], 0.0);
        assert_abs_diff_eq!(f.omega[(0, 1)], a, epsilon = 1e-15);
        assert_abs_diff_eq!(f.omega[(1, 0)], a, epsilon = 1e-15);
        // [[0,a],[a,0]] = sqrt(a)[[0,1],[1,0]] * D^{1/2}-style: U V^T = [[0,1],[1,0]]
        // so the SVD root is sqrt(a) [[0,1],[1,0]]; frozen first column:
        let b = to_b_space(&BasisCoefficients(vec![0.0, 0.0, 1.0, 0.0]), &f).unwrap();
        assert_abs_diff_eq!(b[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[3], 0.192_450_089_729_875_26, epsilon = 1e-12);
    }

    #[test]
    fn omega_k2_is_singular() {
        assert!(matches!(
            omega_factor(&k2()),
            Err(GmcError::SingularOmega { .. })
        ));
    }

    #[test]
    fn omega_factor_identities() {
        for k in [3, 5, 10, 15, 25] {
            let f = omega_factor(&Partition::equal(k).unwrap()).unwrap();
            let m = f.omega.nrows();
            assert!(f.condition < MAX_OMEGA_CONDITION);
            for j in 0..m {
                assert_eq!(f.omega[(j, j)], 0.0);
                for i in 0..m {
                    assert_eq!(f.omega[(i, j)], f.omega[(j, i)]);
                }
            }
            let eye = &f.sqrt * &f.inv_sqrt;
            assert!((eye - DMatrix::identity(m, m)).abs().max() < 1e-10);
            // sqrt^T sqrt = V D V^T, which squares to Omega^T Omega
            let gram = f.sqrt.transpose() * &f.sqrt;
            let svd = f.omega.clone().svd(true, true);
            let v = svd.v_t.unwrap().transpose();
            let vdv = &v * DMatrix::from_diagonal(&svd.singular_values) * v.transpose();
            assert!((gram - vdv).abs().max() < 1e-10);
        }
    }

    #[test]
    fn b_space_round_trip_and_zero() {
        let p = Partition::equal(6).unwrap();
        let f = omega_factor(&p).unwrap();
        let beta = BasisCoefficients(vec![1.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(to_b_space(&beta, &f).unwrap(), beta.0);
        let zero = from_b_space(&[0.0; 7], &f).unwrap();
        assert!(zero.0.iter().all(|&v| v == 0.0));
        let beta = BasisCoefficients(vec![0.3, 1.0, 2.0, -1.0, 0.5, 0.25, -3.0]);
        let back = from_b_space(&to_b_space(&beta, &f).unwrap(), &f).unwrap();
        for (a, b) in back.0.iter().zip(&beta.0) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert!(matches!(
            to_b_space(&BasisCoefficients(vec![0.0; 3]), &f),
            Err(GmcError::DimensionMismatch { .. })
        ));
        assert!(from_b_space(&[0.0; 8], &f).is_err());
    }

    #[test]
    fn curve_invariant_under_reparameterization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = SplineBasis::new(Partition::equal(10).unwrap()).unwrap();
        let t: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let x = design_matrix(&t, &basis.partition).unwrap();
        let z = basis.b_design(&t).unwrap();
        for _ in 0..20 {
            let beta: Vec<f64> = (0..11).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b = to_b_space(&BasisCoefficients(beta.clone()), &basis.factor).unwrap();
            let direct = &x * DVector::from_vec(beta);
            let whitened = &z * DVector::from_vec(b);
            assert!((direct - whitened).abs().max() < 1e-10);
        }
    }

    fn phi(t: f64, p: &Partition, beta: &[f64]) -> f64 {
        eval_basis(t, p)
            .unwrap()
            .iter()
            .zip(beta)
            .map(|(a, b)| a * b)
            .sum()
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = Partition::equal(8).unwrap();
        let h = 1e-5;
        for _ in 0..100 {
            let beta: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
            let t = rng.random_range(0.01..0.99);
            let fd = (phi(t + h, &p, &beta) - phi(t - h, &p, &beta)) / (2.0 * h);
            let d = eval_derivative(t, &p, &BasisCoefficients(beta)).unwrap();
            assert!((d - fd).abs() <= 1e-6 * fd.abs().max(1.0), "{d} vs {fd}");
        }
    }

    #[test]
    fn derivative_special_cases() {
        let p = Partition::equal(4).unwrap();
        let linear = BasisCoefficients(vec![1.0, 2.5, 0.0, 0.0, 0.0]);
        for t in [0.0, 0.3, 0.75, 1.0] {
            assert_eq!(eval_derivative(t, &p, &linear).unwrap(), 2.5);
        }
        let radial = BasisCoefficients(vec![0.0, 0.0, 4.0, 0.0, 0.0]);
        assert_eq!(eval_derivative(p.knots()[1], &p, &radial).unwrap(), 0.0);
        assert!(eval_derivative(-0.5, &p, &radial).is_err());
    }

    #[test]
    fn curve_is_continuous_on_dense_grid() {
        let p = Partition::equal(10).unwrap();
        let beta: Vec<f64> = (0..11).map(|i| (i as f64).sin() * 3.0).collect();
        let eps = 1e-7;
        for i in 0..1000 {
            let t = i as f64 / 1000.0;
            let jump = (phi((t + eps).min(1.0), &p, &beta) - phi(t, &p, &beta)).abs();
            assert!(jump < 1e-4);
        }
    }
}
