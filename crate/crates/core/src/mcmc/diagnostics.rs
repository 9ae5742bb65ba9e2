//! Split-R-hat and effective sample size.

use serde::Serialize;

use super::engine::ChainSet;
use crate::error::{GmcError, Result};

/// Convergence summary for a whole [`ChainSet`].
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub names: Vec<String>,
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
    /// `(block, mean acceptance across chains)`.
    pub accept_rates: Vec<(String, f64)>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn split(draws: &[Vec<f64>]) -> Result<Vec<&[f64]>> {
    if draws.len() < 2 {
        return Err(GmcError::InsufficientDraws(format!(
            "split R-hat needs >= 2 chains, got {}",
            draws.len()
        )));
    }
    let n = draws.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return Err(GmcError::InsufficientDraws(format!(
            "split R-hat needs >= 4 draws per chain, got {n}"
        )));
    }
    let half = n / 2;
    Ok(draws
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..n]])
        .collect())
}

/// Split-chain potential scale reduction factor.
pub fn compute_rhat(draws: &[Vec<f64>]) -> Result<f64> {
    let parts = split(draws)?;
    let n = parts[0].len() as f64;
    let means: Vec<f64> = parts.iter().map(|c| mean(c)).collect();
    let w = mean(&parts.iter().map(|c| variance(c)).collect::<Vec<_>>());
    let b_over_n = variance(&means);
    if w <= 0.0 {
        return Ok(if b_over_n <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n - 1.0) / n * w + b_over_n;
    Ok((var_plus / w).sqrt())
}

fn autocovariance(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let m = mean(x);
    let mut s = 0.0;
    for i in 0..n - lag {
        s += (x[i] - m) * (x[i + lag] - m);
    }
    s / n as f64
}

/// Multi-chain effective sample size with Geyer's initial monotone
/// sequence estimator, capped at the total number of draws.
pub fn compute_ess(draws: &[Vec<f64>]) -> Result<f64> {
    if draws.is_empty() {
        return Err(GmcError::EmptyDraws);
    }
    let n = draws.iter().map(Vec::len).min().unwrap_or(0);
    if n < 4 {
        return Err(GmcError::InsufficientDraws(format!(
            "ESS needs >= 4 draws per chain, got {n}"
        )));
    }
    let chains: Vec<&[f64]> = draws.iter().map(|c| &c[..n]).collect();
    let m = chains.len() as f64;
    let total = m * n as f64;
    let nf = n as f64;
    let chain_var: Vec<f64> = chains.iter().map(|c| variance(c)).collect();
    let w = mean(&chain_var);
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let b_over_n = if chains.len() > 1 { variance(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    if !(var_plus > 0.0) {
        return Ok(total);
    }
    let rho = |lag: usize| -> f64 {
        let acov = mean(&chains.iter().map(|c| autocovariance(c, lag)).collect::<Vec<_>>());
        1.0 - (w - acov) / var_plus
    };
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / total.log10().max(1.0));
    Ok((total / tau).min(total))
}

/// R-hat, ESS and Metropolis acceptance for every parameter of `set`.
/// R-hat is reported as NaN for single-chain sets.
pub fn diagnose(set: &ChainSet) -> Result<Diagnostics> {
    let mut rhat = Vec::with_capacity(set.n_params());
    let mut ess = Vec::with_capacity(set.n_params());
    for i in 0..set.n_params() {
        let tr = set.trace(i);
        rhat.push(if set.n_chains() >= 2 {
            compute_rhat(&tr)?
        } else {
            f64::NAN
        });
        ess.push(compute_ess(&tr)?);
    }
    let mut accept_rates = Vec::new();
    if let Some(first) = set.chains().first() {
        for (b, block) in first.tuning.iter().enumerate() {
            let rate = mean(
                &set.chains()
                    .iter()
                    .map(|c| c.tuning[b].acceptance)
                    .collect::<Vec<_>>(),
            );
            accept_rates.push((block.name.clone(), rate));
        }
    }
    Ok(Diagnostics {
        names: set.names().to_vec(),
        rhat,
        ess,
        accept_rates,
    })
}
