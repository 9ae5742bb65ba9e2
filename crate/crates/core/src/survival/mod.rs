//! Piecewise-exponential proportional-hazards models with right censoring:
//! conventional and GMC-borrowing fits, posterior survival summaries,
//! Kaplan-Meier estimation and DIC partition selection.

mod conventional;
mod data;
mod gmc;
mod likelihood;
mod summary;

use serde::Serialize;

pub use conventional::fit_pwe_conventional;
pub use data::SurvivalDataset;
pub use gmc::{fit_pwe_gmc, fit_pwe_gmc_forced};
pub use likelihood::{pwe_loglik, rescale_time, PweParams, DEFAULT_HORIZON_DAYS};
pub use summary::{
    hazard_ratio_summary, kaplan_meier, median_survival, survival_curve, survival_curve_for,
    HazardRatio, KaplanMeier, MedianSurvival,
};

use crate::error::{GmcError, Result};
use crate::mcmc::{compare_partitions, compute_dic, run_chains, PartitionScore, PosteriorModel, SamplerConfig};
use crate::spline::Partition;

/// `prefix[1]`, ..., `prefix[k]`.
pub(crate) fn gamma_names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}[{j}]")).collect()
}

pub(crate) fn rho_names(treatments: &[String]) -> Vec<String> {
    treatments.iter().map(|t| format!("rho[{t}]")).collect()
}

/// One ranked candidate of [`select_partition_dic`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedPartition {
    pub intervals: usize,
    pub partition: Partition,
    pub score: PartitionScore,
}

/// Label identifying a candidate time-axis partition.
pub fn partition_label(p: &Partition) -> String {
    let knots: Vec<String> = p.knots().iter().map(|k| format!("{k}")).collect();
    format!("K={} knots={}", p.intervals(), knots.join(";"))
}

/// Fits the conventional model under every candidate partition and ranks
/// them by DIC (ties broken by mean deviance, then label).
pub fn select_partition_dic(
    primary: &SurvivalDataset,
    candidates: &[Partition],
    config: &SamplerConfig,
) -> Result<Vec<RankedPartition>> {
    if candidates.is_empty() {
        return Err(GmcError::InvalidConfig("no candidate partitions".into()));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for p in candidates {
        let model = conventional::PweModel::new(primary, p)?;
        let chains = run_chains(&model, config)?;
        let d = compute_dic(&chains.deviance(), model.deviance(&chains.posterior_mean()))?;
        scores.push(PartitionScore {
            label: partition_label(p),
            dbar: d.dbar,
            pd: d.pd,
            dic: d.dic,
        });
    }
    Ok(compare_partitions(scores)
        .into_iter()
        .map(|score| {
            let partition = candidates
                .iter()
                .find(|p| partition_label(p) == score.label)
                .expect("label of a candidate")
                .clone();
            RankedPartition {
                intervals: partition.intervals(),
                partition,
                score,
            }
        })
        .collect())
}
