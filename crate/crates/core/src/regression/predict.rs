use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, RowDVector};
use serde::Serialize;

use super::Tissue;
use crate::error::{GmcError, Result};
use crate::mcmc::summary::describe;
use crate::mcmc::ChainSet;
use crate::spline::{derivative_row, eval_basis, Partition, SplineBasis};

/// Names a curve stored in a [`ChainSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveSelector {
    /// `b[k]`: conventional fits and the primary curve of two-source fits.
    Primary,
    /// `b0[k]`.
    Supplemental,
    /// `bT[k]` of a CTp fit.
    Cancerous,
    /// `bN[k]` of a CTp fit.
    Noncancerous,
    /// Raw-coefficient deviation curve of one individual in one tissue.
    Deviation { individual: i64, tissue: Tissue },
}

impl CurveSelector {
    /// Coefficient name prefix and whether the coefficients are whitened.
    fn prefix(&self) -> (String, bool) {
        match self {
            Self::Primary => ("b".into(), true),
            Self::Supplemental => ("b0".into(), true),
            Self::Cancerous => ("bT".into(), true),
            Self::Noncancerous => ("bN".into(), true),
            Self::Deviation { individual, tissue } => {
                (format!("alpha_{}_{}", tissue.code(), individual), false)
            }
        }
    }
}

impl FromStr for CurveSelector {
    type Err = GmcError;
    /// `primary`, `supplemental`, `cancerous`, `noncancerous` or
    /// `deviation:<individual>:<tissue>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primary" => Ok(Self::Primary),
            "supplemental" => Ok(Self::Supplemental),
            "cancerous" => Ok(Self::Cancerous),
            "noncancerous" => Ok(Self::Noncancerous),
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                match parts.as_slice() {
                    ["deviation", id, tissue] => Ok(Self::Deviation {
                        individual: id.parse().map_err(|_| GmcError::UnknownCurve(s.into()))?,
                        tissue: tissue.parse().map_err(|_| GmcError::UnknownCurve(s.into()))?,
                    }),
                    _ => Err(GmcError::UnknownCurve(s.into())),
                }
            }
        }
    }
}

impl fmt::Display for CurveSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Primary => f.write_str("primary"),
            Self::Supplemental => f.write_str("supplemental"),
            Self::Cancerous => f.write_str("cancerous"),
            Self::Noncancerous => f.write_str("noncancerous"),
            Self::Deviation { individual, tissue } => write!(f, "deviation:{individual}:{tissue}"),
        }
    }
}

/// Pointwise posterior mean and equal-tailed interval on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

fn curve_columns(chains: &ChainSet, which: CurveSelector, n: usize) -> Result<(Vec<usize>, bool)> {
    let (prefix, whitened) = which.prefix();
    let cols = (0..n)
        .map(|k| chains.index_of(&format!("{prefix}[{k}]")))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| GmcError::UnknownCurve(which.to_string()))?;
    Ok((cols, whitened))
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(GmcError::InvalidConfig(format!("credible level {level} not in (0, 1)")))
    }
}

/// Summarizes `rows * coef` over all draws, one row per grid point.
pub(crate) fn summarize_linear(
    chains: &ChainSet,
    cols: &[usize],
    rows: &DMatrix<f64>,
    grid: &[f64],
    level: f64,
) -> CurveSummary {
    let probs = [(1.0 - level) / 2.0, (1.0 + level) / 2.0];
    let n_draws = chains.n_chains() * chains.n_stored();
    let mut values = vec![Vec::with_capacity(n_draws); grid.len()];
    let mut coef = vec![0.0; cols.len()];
    for draw in chains.iter_draws() {
        for (c, &j) in coef.iter_mut().zip(cols) {
            *c = draw[j];
        }
        for (g, v) in values.iter_mut().enumerate() {
            v.push(rows.row(g).iter().zip(&coef).map(|(r, c)| r * c).sum());
        }
    }
    let mut out = CurveSummary {
        grid: grid.to_vec(),
        mean: Vec::with_capacity(grid.len()),
        lower: Vec::with_capacity(grid.len()),
        upper: Vec::with_capacity(grid.len()),
        level,
    };
    for v in &values {
        let (m, _, q) = describe(v, &probs);
        out.mean.push(m);
        out.lower.push(q[0]);
        out.upper.push(q[1]);
    }
    out
}

fn predict_with<F>(
    chains: &ChainSet,
    which: CurveSelector,
    partition: &Partition,
    grid: &[f64],
    level: f64,
    row_fn: F,
) -> Result<CurveSummary>
where
    F: Fn(f64, &Partition) -> Result<Vec<f64>>,
{
    check_level(level)?;
    let n = partition.intervals() + 1;
    let (cols, whitened) = curve_columns(chains, which, n)?;
    let mut rows = DMatrix::zeros(grid.len(), n);
    for (g, &t) in grid.iter().enumerate() {
        rows.set_row(g, &RowDVector::from_vec(row_fn(t, partition)?));
    }
    if whitened {
        rows = rows * SplineBasis::new(partition.clone())?.whitening();
    }
    Ok(summarize_linear(chains, &cols, &rows, grid, level))
}

/// Posterior mean and pointwise `level` interval of the curve `which`.
pub fn predict_curve(
    chains: &ChainSet,
    which: CurveSelector,
    partition: &Partition,
    grid: &[f64],
    level: f64,
) -> Result<CurveSummary> {
    predict_with(chains, which, partition, grid, level, eval_basis)
}

/// Same as [`predict_curve`] for the first derivative.
pub fn predict_derivative(
    chains: &ChainSet,
    which: CurveSelector,
    partition: &Partition,
    grid: &[f64],
    level: f64,
) -> Result<CurveSummary> {
    predict_with(chains, which, partition, grid, level, derivative_row)
}
