//! Posterior summaries, DIC and partition ranking.

use serde::Serialize;

use super::engine::ChainSet;
use crate::error::{GmcError, Result};
use crate::spline::type7_quantile;

/// Pooled-chain summary of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// One entry per requested probability.
    pub quantiles: Vec<f64>,
}

/// Mean, sample standard deviation and type-7 quantiles of `x`.
pub fn describe(x: &[f64], probs: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = probs.iter().map(|&p| type7_quantile(&sorted, p)).collect();
    (mean, sd, q)
}

/// Summary rows for every parameter of `chains`, in parameter order.
pub fn summarize(chains: &ChainSet, probs: &[f64]) -> Result<Vec<ParamSummary>> {
    if let Some(&p) = probs.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(GmcError::InvalidConfig(format!(
            "quantile probability {p} not in (0, 1)"
        )));
    }
    Ok(chains
        .names()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (mean, sd, quantiles) = describe(&chains.pooled(i), probs);
            ParamSummary {
                name: name.clone(),
                mean,
                sd,
                quantiles,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DicReport {
    pub dbar: f64,
    pub pd: f64,
    pub dic: f64,
    /// Set when `pd < 0`.
    pub negative_pd: bool,
}

pub fn compute_dic(deviance_draws: &[f64], deviance_at_mean: f64) -> Result<DicReport> {
    if deviance_draws.is_empty() {
        return Err(GmcError::EmptyDraws);
    }
    let dbar = deviance_draws.iter().sum::<f64>() / deviance_draws.len() as f64;
    let pd = dbar - deviance_at_mean;
    if pd < 0.0 {
        log::warn!("negative effective number of parameters (pD = {pd})");
    }
    Ok(DicReport {
        dbar,
        pd,
        dic: dbar + pd,
        negative_pd: pd < 0.0,
    })
}

/// One candidate in a DIC comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionScore {
    pub label: String,
    pub dbar: f64,
    pub pd: f64,
    pub dic: f64,
}

/// Sorts ascending by DIC, then by posterior mean deviance, then by label.
pub fn compare_partitions(mut fits: Vec<PartitionScore>) -> Vec<PartitionScore> {
    fits.sort_by(|a, b| {
        a.dic
            .total_cmp(&b.dic)
            .then(a.dbar.total_cmp(&b.dbar))
            .then_with(|| a.label.cmp(&b.label))
    });
    fits
}
