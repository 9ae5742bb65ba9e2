use serde::Serialize;

use super::likelihood::overlaps;
use super::{gamma_names, SurvivalDataset};
use crate::error::{GmcError, Result};
use crate::mcmc::summary::describe;
use crate::mcmc::ChainSet;
use crate::regression::{check_level, CurveSummary, Source};
use crate::spline::Partition;

/// Per-draw medians summarized on the day scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianSurvival {
    pub median_days: f64,
    pub lower: f64,
    pub upper: f64,
    /// Draws whose survival stays above 0.5 through the horizon; these are
    /// left out of the summary.
    pub beyond_horizon: usize,
    pub draws: usize,
    /// Set when the posterior-mean draw does not reach 0.5 by the horizon.
    pub censored_at_horizon: bool,
}

/// Posterior mean and equal-tailed interval of `exp(rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HazardRatio {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Product-limit estimate, one row per distinct observed time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KaplanMeier {
    pub times: Vec<f64>,
    /// Survival just after each time.
    pub survival: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

/// Column indices of the log-hazards and hazard ratios of one source.
struct HazardColumns {
    gamma: Vec<usize>,
    rho: Vec<usize>,
}

fn hazard_columns(chains: &ChainSet, p: &Partition, source: Source, z: &[f64]) -> Result<HazardColumns> {
    let prefix = match source {
        Source::Primary => "gamma",
        Source::Supplemental => "gamma0",
    };
    let stem = format!("{prefix}[");
    let count = chains.names().iter().filter(|n| n.starts_with(&stem)).count();
    if count == 0 {
        return Err(GmcError::UnknownCurve(format!("{source} log-hazards")));
    }
    if count != p.intervals() {
        return Err(GmcError::DimensionMismatch {
            expected: count,
            actual: p.intervals(),
        });
    }
    let gamma = gamma_names(prefix, count)
        .iter()
        .map(|n| chains.index_of(n))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| GmcError::UnknownCurve(format!("{source} log-hazards")))?;
    let rho: Vec<usize> = match source {
        Source::Primary => chains
            .names()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with("rho["))
            .map(|(i, _)| i)
            .collect(),
        Source::Supplemental => Vec::new(),
    };
    if z.len() != rho.len() {
        return Err(GmcError::UnknownCovariateSetting {
            expected: rho.len(),
            actual: z.len(),
        });
    }
    Ok(HazardColumns { gamma, rho })
}

/// Per-interval hazards `exp(gamma_k + rho.z)` of one draw.
fn draw_hazards(draw: &[f64], cols: &HazardColumns, z: &[f64]) -> Vec<f64> {
    let lin: f64 = cols.rho.iter().zip(z).map(|(&j, zj)| draw[j] * zj).sum();
    cols.gamma.iter().map(|&j| (draw[j] + lin).exp()).collect()
}

fn cumulative_hazard(hazards: &[f64], t: f64, p: &Partition) -> f64 {
    hazards.iter().zip(overlaps(t, p)).map(|(h, d)| h * d).sum()
}

/// Time at which the cumulative hazard reaches `ln 2`, if within `(0, 1]`.
fn median_time(hazards: &[f64], p: &Partition) -> Option<f64> {
    let target = std::f64::consts::LN_2;
    let mut acc = 0.0;
    for (h, w) in hazards.iter().zip(p.knots().windows(2)) {
        let next = acc + h * (w[1] - w[0]);
        if next >= target {
            return Some(w[0] + (target - acc) / h);
        }
        acc = next;
    }
    None
}

/// Pointwise posterior survival `S(t | z)` of the primary source.
pub fn survival_curve(
    chains: &ChainSet,
    p: &Partition,
    z: &[f64],
    grid: &[f64],
    level: f64,
) -> Result<CurveSummary> {
    survival_curve_for(chains, p, Source::Primary, z, grid, level)
}

/// [`survival_curve`] for either source; the supplemental curve of a GMC
/// fit takes an empty covariate setting.
pub fn survival_curve_for(
    chains: &ChainSet,
    p: &Partition,
    source: Source,
    z: &[f64],
    grid: &[f64],
    level: f64,
) -> Result<CurveSummary> {
    check_level(level)?;
    if let Some(&t) = grid.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
        return Err(GmcError::DomainError { value: t });
    }
    let cols = hazard_columns(chains, p, source, z)?;
    let probs = [(1.0 - level) / 2.0, (1.0 + level) / 2.0];
    let mut values = vec![Vec::with_capacity(chains.n_chains() * chains.n_stored()); grid.len()];
    for draw in chains.iter_draws() {
        let h = draw_hazards(draw, &cols, z);
        for (v, &t) in values.iter_mut().zip(grid) {
            v.push((-cumulative_hazard(&h, t, p)).exp());
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
    Ok(out)
}

/// Per-draw closed-form median survival of the primary source, scaled to
/// days.
pub fn median_survival(
    chains: &ChainSet,
    p: &Partition,
    z: &[f64],
    horizon_days: f64,
    level: f64,
) -> Result<MedianSurvival> {
    check_level(level)?;
    let cols = hazard_columns(chains, p, Source::Primary, z)?;
    let mut medians = Vec::new();
    let mut beyond = 0;
    for draw in chains.iter_draws() {
        match median_time(&draw_hazards(draw, &cols, z), p) {
            Some(t) => medians.push(t * horizon_days),
            None => beyond += 1,
        }
    }
    let mean_draw = chains.posterior_mean();
    let censored = median_time(&draw_hazards(&mean_draw, &cols, z), p).is_none();
    if beyond > 0 {
        log::warn!("{beyond} draws keep survival above 0.5 through the horizon");
    }
    let draws = medians.len() + beyond;
    if medians.is_empty() {
        return Ok(MedianSurvival {
            median_days: horizon_days,
            lower: horizon_days,
            upper: horizon_days,
            beyond_horizon: beyond,
            draws,
            censored_at_horizon: true,
        });
    }
    let (m, _, q) = describe(&medians, &[(1.0 - level) / 2.0, (1.0 + level) / 2.0]);
    Ok(MedianSurvival {
        median_days: m,
        lower: q[0],
        upper: q[1],
        beyond_horizon: beyond,
        draws,
        censored_at_horizon: censored,
    })
}

/// Summary of `exp(rho)` for treatment `which` (its column name, e.g.
/// `z_F`, or the full parameter name `rho[z_F]`).
pub fn hazard_ratio_summary(chains: &ChainSet, which: &str, level: f64) -> Result<HazardRatio> {
    check_level(level)?;
    let name = if which.starts_with("rho[") {
        which.to_string()
    } else {
        format!("rho[{which}]")
    };
    let draws = chains
        .pooled_by_name(&name)
        .ok_or_else(|| GmcError::UnknownTreatment(which.into()))?;
    let hr: Vec<f64> = draws.iter().map(|r| r.exp()).collect();
    let (mean, _, q) = describe(&hr, &[(1.0 - level) / 2.0, (1.0 + level) / 2.0]);
    Ok(HazardRatio {
        mean,
        lower: q[0],
        upper: q[1],
    })
}

/// Product-limit estimator. Subjects censored at an event time count as at
/// risk at that time.
pub fn kaplan_meier(data: &SurvivalDataset) -> KaplanMeier {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data.time[a].total_cmp(&data.time[b]));
    let mut out = KaplanMeier {
        times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
    };
    let mut s = 1.0;
    let mut at_risk = data.len();
    let mut i = 0;
    while i < order.len() {
        let t = data.time[order[i]];
        let mut j = i;
        let mut d = 0;
        while j < order.len() && data.time[order[j]] == t {
            d += data.event[order[j]] as usize;
            j += 1;
        }
        s *= 1.0 - d as f64 / at_risk as f64;
        out.times.push(t);
        out.survival.push(s);
        out.at_risk.push(at_risk);
        out.events.push(d);
        at_risk -= j - i;
        i = j;
    }
    out
}
